#include "cdil/io.hpp"

#include "cdil/errors.hpp"
#include "cdil/log.hpp"
#include "cdil/text.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <regex>
#include <set>
#include <sstream>
#include <unordered_set>

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace cdil {

namespace {

std::string read_file(const fs::path& path, const std::string& field) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError(path.string(), 0, field, "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  return out;
}

std::size_t line_at(const std::string& text, std::size_t offset) {
  return static_cast<std::size_t>(
             std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(
                                                         std::min(offset, text.size())),
                        '\n')) +
         1;
}

// Line of each element object in the top-level "sessions" array; JSON values
// carry no positions, so loader errors use these to point into the file.
std::vector<std::size_t> session_lines(const std::string& text) {
  std::vector<std::size_t> lines;
  const auto key = text.find("\"sessions\"");
  if (key == std::string::npos) return lines;
  const auto open = text.find('[', key);
  if (open == std::string::npos) return lines;
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = open + 1; i < text.size(); ++i) {
    const char ch = text[i];
    if (in_string) {
      if (ch == '\\') ++i;
      else if (ch == '"') in_string = false;
      continue;
    }
    if (ch == '"') in_string = true;
    else if (ch == '{' || ch == '[') {
      if (depth == 0 && ch == '{') lines.push_back(line_at(text, i));
      ++depth;
    } else if (ch == '}' || ch == ']') {
      if (depth == 0) break;
      --depth;
    }
  }
  return lines;
}

template <typename T>
T get_field(const json& obj, const char* field, const std::string& file, std::size_t line) {
  if (!obj.is_object() || !obj.contains(field))
    throw LoadError(file, line, field, "missing required field");
  try {
    return obj.at(field).get<T>();
  } catch (const json::exception& e) {
    throw LoadError(file, line, field, std::string("wrong type: ") + e.what());
  }
}

template <typename T>
T get_optional(const json& obj, const char* field, T fallback, const std::string& file,
               std::size_t line) {
  if (!obj.contains(field) || obj.at(field).is_null()) return fallback;
  return get_field<T>(obj, field, file, line);
}

std::string strip_session_scope(const std::string& id, SessionIndex t) {
  const auto prefix = "s" + std::to_string(t) + ":";
  return id.rfind(prefix, 0) == 0 ? id.substr(prefix.size()) : id;
}

}  // namespace

// ---------------------------------------------------------------------------
// Manifest

LabelRegistry Manifest::declared_registry() const {
  LabelRegistry reg;
  for (const auto& s : sessions)
    for (const auto& n : s.label_names) reg.register_name(n);
  return reg;
}

fs::path Manifest::resolve(const ManifestSession& s) const {
  const fs::path p(s.features_path);
  return p.is_absolute() ? p : base_dir / p;
}

Manifest load_manifest(const fs::path& path) {
  const auto file = path.string();
  const auto text = read_file(path, "manifest");
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw LoadError(file, line_at(text, e.byte == 0 ? 0 : e.byte - 1), "json", e.what());
  }
  if (!j.is_object()) throw LoadError(file, 1, "manifest", "top level must be an object");

  Manifest m;
  m.base_dir = path.parent_path();
  m.name = get_field<std::string>(j, "name", file, 1);
  m.feature_dim = get_field<int>(j, "feature_dim", file, 1);
  if (m.feature_dim < 1) throw LoadError(file, 1, "feature_dim", "must be positive");
  m.cross_session_subjects = get_optional<bool>(j, "cross_session_subjects", false, file, 1);
  if (!j.contains("sessions") || !j["sessions"].is_array() || j["sessions"].empty())
    throw LoadError(file, 1, "sessions", "must be a non-empty array");

  const auto lines = session_lines(text);
  std::set<std::string> names;
  for (std::size_t i = 0; i < j["sessions"].size(); ++i) {
    const auto& e = j["sessions"][i];
    const std::size_t line = i < lines.size() ? lines[i] : 1;
    ManifestSession s;
    s.name = get_field<std::string>(e, "name", file, line);
    if (!names.insert(s.name).second)
      throw LoadError(file, line, "name", "duplicate session name '" + s.name + "'");
    if (e.contains("year") && !e["year"].is_null()) s.year = get_field<int>(e, "year", file, line);
    s.label_names = get_field<std::vector<std::string>>(e, "label_names", file, line);
    if (s.label_names.empty())
      throw LoadError(file, line, "label_names", "session '" + s.name + "' declares no labels");
    if (std::set<std::string>(s.label_names.begin(), s.label_names.end()).size() !=
        s.label_names.size())
      throw LoadError(file, line, "label_names", "session '" + s.name + "' repeats a label");
    s.features_path = get_field<std::string>(e, "features_path", file, line);
    s.min_samples_per_class = get_optional<int>(e, "min_samples_per_class", 0, file, line);
    if (s.min_samples_per_class < 0)
      throw LoadError(file, line, "min_samples_per_class", "must be >= 0");
    m.sessions.push_back(std::move(s));
  }

  // Header width check: every feature file must carry exactly feature_dim columns.
  for (std::size_t i = 0; i < m.sessions.size(); ++i) {
    const auto& s = m.sessions[i];
    const std::size_t line = i < lines.size() ? lines[i] : 1;
    std::ifstream in(m.resolve(s));
    if (!in)
      throw LoadError(file, line, "features_path",
                      "session '" + s.name + "': cannot read '" + m.resolve(s).string() + "'");
    std::string header;
    std::getline(in, header);
    const auto cols = text::split_csv(text::trim(header)).size();
    if (cols < 3 || cols - 3 != static_cast<std::size_t>(m.feature_dim))
      throw LoadError(file, line, "feature_dim",
                      "session '" + s.name + "': feature file has " +
                          std::to_string(cols < 3 ? 0 : cols - 3) +
                          " feature columns, manifest declares " + std::to_string(m.feature_dim));
  }
  return m;
}

void write_manifest(const Manifest& m, const fs::path& path) {
  ordered_json j;
  j["name"] = m.name;
  j["feature_dim"] = m.feature_dim;
  j["cross_session_subjects"] = m.cross_session_subjects;
  j["sessions"] = ordered_json::array();
  for (const auto& s : m.sessions) {
    ordered_json e;
    e["name"] = s.name;
    if (s.year) e["year"] = *s.year;
    e["label_names"] = s.label_names;
    e["features_path"] = s.features_path;
    e["min_samples_per_class"] = s.min_samples_per_class;
    j["sessions"].push_back(std::move(e));
  }
  open_out(path) << j.dump(2) << '\n';
}

SessionDataset load_session_features(const Manifest& manifest, SessionIndex t,
                                     LabelRegistry& registry) {
  if (t < 1 || static_cast<std::size_t>(t) > manifest.sessions.size())
    throw std::out_of_range("manifest has no session " + std::to_string(t));
  const auto& entry = manifest.sessions[static_cast<std::size_t>(t - 1)];
  const auto path = manifest.resolve(entry);
  const auto file = path.string();
  const auto d = static_cast<std::size_t>(manifest.feature_dim);

  std::ifstream in(path);
  if (!in) throw LoadError(file, 0, "features_path", "cannot open feature file");
  std::string line;
  if (!std::getline(in, line)) throw LoadError(file, 1, "header", "empty feature file");
  {
    const auto header = text::split_csv(text::trim(line));
    if (header.size() != d + 3)
      throw LoadError(file, 1, "header",
                      "session '" + entry.name + "': expected " + std::to_string(d) +
                          " feature columns, found " +
                          std::to_string(header.size() < 3 ? 0 : header.size() - 3));
    const char* fixed[] = {"sample_id", "subject_id", "label"};
    for (std::size_t i = 0; i < 3; ++i)
      if (text::trim(header[i]) != fixed[i])
        throw LoadError(file, 1, fixed[i], "header column " + std::to_string(i + 1) + " must be '" +
                                               fixed[i] + "'");
    for (std::size_t j = 0; j < d; ++j)
      if (text::trim(header[j + 3]) != "f" + std::to_string(j))
        throw LoadError(file, 1, "f" + std::to_string(j), "unexpected feature column name");
  }

  struct Row {
    std::string sample_id, subject_id, label;
    Eigen::VectorXd x;
  };
  std::vector<Row> rows;
  std::unordered_set<std::string> ids;
  const std::set<std::string> declared(entry.label_names.begin(), entry.label_names.end());
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    const auto trimmed = text::trim(line);
    if (trimmed.empty()) continue;
    const auto f = text::split_csv(trimmed);
    if (f.size() != d + 3)
      throw LoadError(file, lineno, "row",
                      "expected " + std::to_string(d + 3) + " columns, found " +
                          std::to_string(f.size()));
    Row r{std::string(text::trim(f[0])), std::string(text::trim(f[1])),
          std::string(text::trim(f[2])), Eigen::VectorXd(static_cast<Eigen::Index>(d))};
    if (r.sample_id.empty()) throw LoadError(file, lineno, "sample_id", "empty sample id");
    if (r.subject_id.empty()) throw LoadError(file, lineno, "subject_id", "empty subject id");
    if (!declared.contains(r.label))
      throw LoadError(file, lineno, "label",
                      "label '" + r.label + "' is not declared for session '" + entry.name + "'");
    if (!ids.insert(r.sample_id).second)
      throw LoadError(file, lineno, "sample_id", "duplicate sample id '" + r.sample_id + "'");
    for (std::size_t j = 0; j < d; ++j)
      if (!text::parse_double(f[j + 3], r.x[static_cast<Eigen::Index>(j)]))
        throw LoadError(file, lineno, "f" + std::to_string(j),
                        "non-numeric value '" + std::string(f[j + 3]) + "'");
    rows.push_back(std::move(r));
  }

  std::map<std::string, std::size_t> counts;
  for (const auto& r : rows) ++counts[r.label];
  std::vector<std::string> kept;
  for (const auto& name : entry.label_names) {
    const auto n = counts.contains(name) ? counts[name] : 0;
    if (entry.min_samples_per_class > 0 &&
        n < static_cast<std::size_t>(entry.min_samples_per_class)) {
      log::warn("session '" + entry.name + "': dropping class '" + name + "' (" +
                std::to_string(n) + " samples < " + std::to_string(entry.min_samples_per_class) +
                ")");
      continue;
    }
    kept.push_back(name);
  }
  if (kept.empty()) throw LoadError(file, 0, "label", "every class of session '" + entry.name +
                                                          "' was filtered out");

  ClassSet label_set;
  std::map<std::string, ClassIndex> index;
  for (const auto& name : kept) {
    const auto c = registry.register_name(name);
    label_set.insert(c);
    index.emplace(name, c);
  }
  std::vector<Sample> samples;
  samples.reserve(rows.size());
  for (auto& r : rows) {
    auto it = index.find(r.label);
    if (it == index.end()) continue;
    samples.push_back({std::move(r.sample_id),
                       scoped_subject_id(t, r.subject_id, manifest.cross_session_subjects),
                       it->second, std::move(r.x)});
  }
  if (samples.empty()) throw LoadError(file, 0, "row", "session '" + entry.name + "' has no samples");
  return SessionDataset(t, entry.name, std::move(samples), std::move(label_set));
}

SessionSequence load_sequence(const Manifest& manifest) {
  LabelRegistry registry;
  std::vector<SessionDataset> sessions;
  for (std::size_t i = 0; i < manifest.sessions.size(); ++i)
    sessions.push_back(load_session_features(manifest, static_cast<SessionIndex>(i + 1), registry));
  return SessionSequence(std::move(sessions), std::move(registry), manifest.feature_dim);
}

fs::path write_stream(const SessionSequence& seq, const fs::path& dir, const std::string& name) {
  fs::create_directories(dir);
  Manifest m;
  m.name = name;
  m.feature_dim = static_cast<int>(seq.feature_dim());
  m.base_dir = dir;
  // Scoped ids ("s<t>:raw") are written raw; loading scopes them again.
  bool cross = false;
  for (const auto& s : seq.sessions())
    for (const auto& x : s.samples())
      if (strip_session_scope(x.subject_id, s.session_index()) == x.subject_id) cross = true;
  m.cross_session_subjects = cross;

  for (const auto& s : seq.sessions()) {
    ManifestSession e;
    e.name = s.name();
    for (ClassIndex c : s.label_set()) e.label_names.push_back(seq.registry().name_of(c));
    e.features_path = "session_" + std::to_string(s.session_index()) + ".csv";
    m.sessions.push_back(e);

    auto out = open_out(dir / e.features_path);
    out << "sample_id,subject_id,label";
    for (Eigen::Index j = 0; j < seq.feature_dim(); ++j) out << ",f" << j;
    out << '\n';
    for (const auto& x : s.samples()) {
      out << x.sample_id << ','
          << (cross ? x.subject_id : strip_session_scope(x.subject_id, s.session_index())) << ','
          << seq.registry().name_of(x.label);
      for (Eigen::Index j = 0; j < x.features.size(); ++j)
        out << ',' << text::format_double(x.features[j]);
      out << '\n';
    }
  }
  const auto path = dir / "manifest.json";
  write_manifest(m, path);
  return path;
}

void write_split_csv(const SessionSequence& seq, const std::vector<FoldAssignment>& assignments,
                     const fs::path& path) {
  auto out = open_out(path);
  out << "session,sample_id,subject_id,fold\n";
  for (const auto& a : assignments) {
    const auto& session = seq.session(a.session_index);
    for (const auto& s : session.samples())
      out << a.session_index << ',' << s.sample_id << ',' << s.subject_id << ','
          << a.fold_of.at(s.sample_id) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Configs

ordered_json synth_spec_to_json(const SynthSpec& spec) {
  ordered_json j;
  j["session_label_sets"] = spec.session_label_sets;
  j["session_names"] = spec.session_names;
  j["feature_dim"] = spec.feature_dim;
  j["samples_per_class_per_session"] = spec.samples_per_class_per_session;
  j["subjects_per_session"] = spec.subjects_per_session;
  j["class_separation"] = spec.class_separation;
  j["domain_shift"] = spec.domain_shift;
  j["subject_shift"] = spec.subject_shift;
  j["noise"] = spec.noise;
  j["seed"] = spec.seed;
  j["cross_session_subjects"] = spec.cross_session_subjects;
  return j;
}

SynthSpec synth_spec_from_json(const json& j) {
  SynthSpec s;
  if (!j.is_object()) throw ConfigError("synthetic spec must be a JSON object");
  static const std::set<std::string> known = {
      "session_label_sets", "session_names", "feature_dim",   "samples_per_class_per_session",
      "subjects_per_session", "class_separation", "domain_shift", "subject_shift",
      "noise", "seed", "cross_session_subjects"};
  for (const auto& [key, value] : j.items())
    if (!known.contains(key)) throw ConfigError("unknown synthetic spec field '" + key + "'");
  try {
    if (j.contains("session_label_sets"))
      s.session_label_sets = j["session_label_sets"].get<std::vector<std::vector<std::string>>>();
    if (j.contains("session_names"))
      s.session_names = j["session_names"].get<std::vector<std::string>>();
    s.feature_dim = j.value("feature_dim", s.feature_dim);
    s.samples_per_class_per_session =
        j.value("samples_per_class_per_session", s.samples_per_class_per_session);
    s.subjects_per_session = j.value("subjects_per_session", s.subjects_per_session);
    s.class_separation = j.value("class_separation", s.class_separation);
    if (j.contains("domain_shift")) {
      if (j["domain_shift"].is_array())
        s.domain_shift = j["domain_shift"].get<std::vector<double>>();
      else
        s.domain_shift = {j["domain_shift"].get<double>()};
    }
    s.subject_shift = j.value("subject_shift", s.subject_shift);
    s.noise = j.value("noise", s.noise);
    s.seed = j.value("seed", s.seed);
    s.cross_session_subjects = j.value("cross_session_subjects", s.cross_session_subjects);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("synthetic spec: ") + e.what());
  }
  s.validate();
  return s;
}

SynthSpec load_synth_spec(const fs::path& path) {
  const auto text = read_file(path, "spec");
  try {
    return synth_spec_from_json(json::parse(text));
  } catch (const json::parse_error& e) {
    throw LoadError(path.string(), line_at(text, e.byte == 0 ? 0 : e.byte - 1), "json", e.what());
  }
}

namespace {

ordered_json learner_to_json(LearnerKind kind, const LearnerConfig& c) {
  ordered_json j;
  j["variant"] = std::string(to_string(kind));
  j["learning_rate"] = c.learning_rate;
  j["batch_size"] = c.batch_size;
  j["epochs_first"] = c.epochs_first;
  j["epochs_later"] = c.epochs_later;
  j["feature_map"] = std::string(to_string(c.feature_map));
  j["finetune_loss"] = std::string(to_string(c.finetune_loss));
  j["head_init"] = c.head_init == HeadInit::Kind::zeros ? "zeros" : "gaussian";
  j["head_init_stddev"] = c.head_init_stddev;
  j["bias_feature"] = c.bias_feature;
  j["ridge_lambda"] = c.ridge_lambda;
  j["projection_dim"] = c.projection_dim;
  j["nonlinearity"] = std::string(to_string(c.nonlinearity));
  j["prototype_stats"] = std::string(to_string(c.prototype_stats));
  return j;
}

void learner_from_json(const json& j, ExperimentConfig& cfg) {
  if (!j.is_object()) throw ConfigError("'learner' must be an object");
  static const std::set<std::string> known = {
      "variant",      "learning_rate",    "batch_size",   "epochs_first",
      "epochs_later", "feature_map",      "head_init",    "head_init_stddev",
      "bias_feature", "ridge_lambda",     "projection_dim", "nonlinearity",
      "prototype_stats", "finetune_loss"};
  for (const auto& [key, value] : j.items())
    if (!known.contains(key)) throw ConfigError("unknown learner field '" + key + "'");
  auto& c = cfg.learner_config;
  if (j.contains("variant")) cfg.learner = parse_learner_kind(j["variant"].get<std::string>());
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs_first = j.value("epochs_first", c.epochs_first);
  c.epochs_later = j.value("epochs_later", c.epochs_later);
  if (j.contains("feature_map")) c.feature_map = parse_feature_map_mode(j["feature_map"].get<std::string>());
  if (j.contains("finetune_loss"))
    c.finetune_loss = parse_finetune_loss(j["finetune_loss"].get<std::string>());
  if (j.contains("head_init")) {
    const auto v = j["head_init"].get<std::string>();
    if (v == "zeros") c.head_init = HeadInit::Kind::zeros;
    else if (v == "gaussian") c.head_init = HeadInit::Kind::gaussian;
    else throw ConfigError("unknown head_init '" + v + "'");
  }
  c.head_init_stddev = j.value("head_init_stddev", c.head_init_stddev);
  c.bias_feature = j.value("bias_feature", c.bias_feature);
  c.ridge_lambda = j.value("ridge_lambda", c.ridge_lambda);
  c.projection_dim = j.value("projection_dim", c.projection_dim);
  if (j.contains("nonlinearity")) c.nonlinearity = parse_nonlinearity(j["nonlinearity"].get<std::string>());
  if (j.contains("prototype_stats"))
    c.prototype_stats = parse_prototype_stats(j["prototype_stats"].get<std::string>());
}

}  // namespace

ordered_json config_to_json(const ExperimentConfig& cfg) {
  ordered_json j;
  j["protocol"] = std::string(to_string(cfg.protocol));
  j["k"] = cfg.k;
  j["seed"] = cfg.seed;
  j["deterministic"] = cfg.deterministic;
  j["learner"] = learner_to_json(cfg.learner, cfg.learner_config);
  ordered_json seq;
  if (cfg.synthetic) seq["synthetic"] = synth_spec_to_json(*cfg.synthetic);
  else seq["manifest"] = cfg.manifest_path;
  j["sequence"] = std::move(seq);
  return j;
}

ExperimentConfig config_from_json(const json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
  static const std::set<std::string> known = {"protocol", "k",       "seed",   "deterministic",
                                              "learner",  "sequence", "output", "threads",
                                              "verbose"};
  for (const auto& [key, value] : j.items())
    if (!known.contains(key)) throw ConfigError("unknown config field '" + key + "'");
  ExperimentConfig cfg;
  try {
    if (j.contains("protocol")) cfg.protocol = parse_protocol(j["protocol"].get<std::string>());
    cfg.k = j.value("k", cfg.k);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.deterministic = j.value("deterministic", cfg.deterministic);
    cfg.threads = j.value("threads", cfg.threads);
    cfg.verbose = j.value("verbose", cfg.verbose);
    if (j.contains("output")) cfg.output_dir = j["output"].get<std::string>();
    if (j.contains("learner")) learner_from_json(j["learner"], cfg);
    if (!j.contains("sequence") || !j["sequence"].is_object())
      throw ConfigError("config needs a 'sequence' object with 'synthetic' or 'manifest'");
    const auto& seq = j["sequence"];
    if (seq.contains("synthetic") == seq.contains("manifest"))
      throw ConfigError("'sequence' needs exactly one of 'synthetic' or 'manifest'");
    if (seq.contains("synthetic")) {
      cfg.synthetic = synth_spec_from_json(seq["synthetic"]);
    } else {
      fs::path p(seq["manifest"].get<std::string>());
      if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
      cfg.manifest_path = p.string();
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  const auto text = read_file(path, "config");
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw LoadError(path.string(), line_at(text, e.byte == 0 ? 0 : e.byte - 1), "json", e.what());
  }
  return config_from_json(j, path.parent_path());
}

// ---------------------------------------------------------------------------
// Reports

ordered_json trial_to_json(const TrialResult& t) {
  ordered_json j;
  j["trial"] = t.trial_index;
  j["sessions"] = ordered_json::array();
  for (const auto& s : t.sessions)
    j["sessions"].push_back({{"correct", s.correct}, {"total", s.total}, {"accuracy", s.value()}});
  j["average_accuracy"] = average_accuracy(t);
  j["final_accuracy"] = final_accuracy(t);
  return j;
}

TrialResult trial_from_json(const ordered_json& j) {
  TrialResult t;
  try {
    t.trial_index = j.at("trial").get<int>();
    for (const auto& s : j.at("sessions"))
      t.sessions.push_back({s.at("correct").get<std::size_t>(), s.at("total").get<std::size_t>()});
  } catch (const json::exception& e) {
    throw ConfigError(std::string("trial record: ") + e.what());
  }
  return t;
}

ordered_json report_to_json(const ExperimentReport& r) {
  if (r.trials.empty()) throw ProtocolError("report has no trials");
  ordered_json j;
  j["config"] = r.config;
  j["trials"] = ordered_json::array();
  for (const auto& t : r.trials) j["trials"].push_back(trial_to_json(t));
  ordered_json a;
  a["sessions"] = r.mean_per_session.size();
  a["mean_per_session"] = r.mean_per_session;
  a["std_per_session"] = r.std_per_session;
  a["mean_average_accuracy"] = r.mean_average;
  a["std_average_accuracy"] = r.std_average;
  a["mean_final_accuracy"] = r.mean_final;
  a["std_final_accuracy"] = r.std_final;
  a["trial_average_accuracy"] = r.trial_average;
  a["trial_final_accuracy"] = r.trial_final;
  j["aggregate"] = std::move(a);
  return j;
}

ExperimentReport report_from_json(const ordered_json& j) {
  ExperimentReport r;
  try {
    for (const auto& t : j.at("trials")) r.trials.push_back(trial_from_json(t));
    const auto& a = j.at("aggregate");
    r.mean_per_session = a.at("mean_per_session").get<std::vector<double>>();
    r.std_per_session = a.at("std_per_session").get<std::vector<double>>();
    r.mean_average = a.at("mean_average_accuracy").get<double>();
    r.std_average = a.at("std_average_accuracy").get<double>();
    r.mean_final = a.at("mean_final_accuracy").get<double>();
    r.std_final = a.at("std_final_accuracy").get<double>();
    r.trial_average = a.at("trial_average_accuracy").get<std::vector<double>>();
    r.trial_final = a.at("trial_final_accuracy").get<std::vector<double>>();
    if (j.contains("config")) r.config = j["config"];
  } catch (const json::exception& e) {
    throw ConfigError(std::string("report: ") + e.what());
  }
  return r;
}

std::string format_report_table(const ExperimentReport& r, const std::string& method) {
  if (r.trials.empty()) throw ProtocolError("report has no trials");
  auto pct = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
    return std::string(buf);
  };
  std::ostringstream os;
  const auto n = r.mean_per_session.size();
  os << std::left << std::setw(24) << "Method";
  for (std::size_t i = 0; i < n; ++i) os << " | " << std::setw(9) << ("Session " + std::to_string(i + 1));
  // Ā and Ã are two bytes each in UTF-8; pad by hand.
  os << " |      Ā |      Ã\n";
  os << std::setw(24) << method;
  for (double v : r.mean_per_session) os << " | " << std::right << std::setw(9) << pct(v) << std::left;
  os << " | " << std::right << std::setw(6) << pct(r.mean_average) << " | " << std::setw(6)
     << pct(r.mean_final) << std::left << '\n';
  os << "(mean over " << r.trials.size() << " bound trials; std of Ā "
     << pct(r.std_average) << ", std of Ã " << pct(r.std_final) << ")\n";
  return os.str();
}

std::string method_label(const ordered_json& config) {
  if (!config.is_object() || !config.contains("learner")) return "method";
  std::string label = config["learner"].value("variant", std::string("method"));
  if (config.contains("protocol")) {
    auto p = config["protocol"].get<std::string>();
    std::transform(p.begin(), p.end(), p.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    label += " (" + p + ")";
  }
  return label;
}

void write_report(const ExperimentReport& report, const fs::path& dir) {
  const auto j = report_to_json(report);
  open_out(dir / "report.json") << j.dump(2) << '\n';
  open_out(dir / "report.txt") << format_report_table(report, method_label(report.config));
}

void write_trial(const TrialResult& trial, const ordered_json& config, const fs::path& dir) {
  ordered_json j;
  j["config"] = config;
  j["result"] = trial_to_json(trial);
  open_out(dir / ("trial_" + std::to_string(trial.trial_index) + ".json")) << j.dump(2) << '\n';
}

ExperimentReport reaggregate_trials(const fs::path& dir) {
  static const std::regex pattern(R"(trial_(\d+)\.json)");
  std::map<int, fs::path> files;
  if (!fs::is_directory(dir)) throw LoadError(dir.string(), 0, "in", "not a directory");
  for (const auto& e : fs::directory_iterator(dir)) {
    std::smatch m;
    const auto name = e.path().filename().string();
    if (std::regex_match(name, m, pattern)) files.emplace(std::stoi(m[1].str()), e.path());
  }
  if (files.empty()) throw ProtocolError("no trial_<n>.json files in '" + dir.string() + "'");
  std::vector<TrialResult> trials;
  ordered_json config;
  for (const auto& [tau, path] : files) {
    const auto text = read_file(path, "trial");
    ordered_json j;
    try {
      j = ordered_json::parse(text);
    } catch (const json::parse_error& e) {
      throw LoadError(path.string(), line_at(text, e.byte == 0 ? 0 : e.byte - 1), "json", e.what());
    }
    if (!j.contains("result")) throw LoadError(path.string(), 1, "result", "missing trial result");
    trials.push_back(trial_from_json(j["result"]));
    if (config.is_null() && j.contains("config")) config = j["config"];
  }
  const std::size_t expected =
      config.is_object() && config.contains("k") ? config["k"].get<std::size_t>() : 0;
  auto report = aggregate(std::move(trials), expected);
  report.config = config;
  return report;
}

}  // namespace cdil
