// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include "oracles.hpp"
#include "support.hpp"

#include "cdil/io.hpp"
#include "cdil/learners.hpp"
#include "cdil/log.hpp"
#include "cdil/metrics.hpp"
#include "cdil/pipeline.hpp"
#include "cdil/random.hpp"
#include "cdil/rch.hpp"
#include "cdil/splitters.hpp"
#include "cdil/synth.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

using namespace cdil;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(int id, const std::string& title, double budget_s, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (budget_s > 0 && secs > budget_s) {
    o.pass = false;
    o.detail += " [over time budget " + std::to_string(budget_s) + " s]";
  }
  if (!o.pass) ++failures;
  std::printf("criterion %2d %s: %s (%.2f s) %s\n", id, o.pass ? "PASS" : "FAIL", title.c_str(), secs,
              o.detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// 1 ---------------------------------------------------------------------------

Outcome metric_arithmetic() {
  const std::vector<double> finetune{35.60, 25.74, 23.90, 21.04};
  const std::vector<double> prototype_row{47.07, 37.25, 43.17, 39.08};
  const double a1 = average_accuracy(finetune), a2 = average_accuracy(prototype_row);
  const bool ok = std::abs(a1 - 26.57) <= 0.005 && std::abs(a2 - 41.64) <= 0.005 &&
                  final_accuracy(finetune) == 21.04 && final_accuracy(prototype_row) == 39.08;
  return {ok, "A-bar " + fmt("%.4f", a1) + ", " + fmt("%.4f", a2) + "; A-tilde " +
                  fmt("%.2f", final_accuracy(finetune)) + ", " + fmt("%.2f", final_accuracy(prototype_row))};
}

// 2 ---------------------------------------------------------------------------

/// Records the id of every sample it is asked to classify.
class SpyLearner final : public Learner {
 public:
  SpyLearner(const SessionSequence& seq, std::vector<std::set<std::pair<SessionIndex, std::string>>>* log)
      : head_(seq.feature_dim()), log_(log) {
    for (const auto& s : seq.sessions())
      for (const auto& x : s.samples()) where_[x.features[0]] = {s.session_index(), x.sample_id};
  }
  void update(std::span<const Sample>, const ClassSet& labels, const ClassSet&) override {
    head_.add_session(labels);
    log_->emplace_back();
  }
  Eigen::VectorXd predict_proba(const Eigen::Ref<const Eigen::VectorXd>& x) const override {
    return head_.predict_proba(x);
  }
  ClassIndex predict(const Eigen::Ref<const Eigen::VectorXd>& x) const override {
    log_->back().insert(where_.at(x[0]));
    return head_.predict(x);
  }
  const RemappableHead& head() const override { return head_; }
  LearnerKind kind() const noexcept override { return LearnerKind::finetune; }

 private:
  RemappableHead head_;
  std::vector<std::set<std::pair<SessionIndex, std::string>>>* log_;
  std::map<double, std::pair<SessionIndex, std::string>> where_;
};

Outcome protocol_shape() {
  SynthSpec spec = testing::small_benchmark_spec(21, 12, 4);
  spec.session_label_sets.resize(3);
  spec.session_names.resize(3);
  const auto seq = generate_stream(spec);
  const int k = 5;
  std::size_t evaluations = 0, trials = 0;
  bool sets_ok = true;
  for (auto protocol : {Protocol::slcv, Protocol::ilcv}) {
    const auto asg = partition_sequence(seq, protocol, k, 21);
    ExperimentConfig cfg;
    cfg.k = k;
    cfg.seed = 21;
    cfg.protocol = protocol;
    cfg.synthetic = spec;
    cfg.deterministic = true;
    std::map<int, std::vector<std::set<std::pair<SessionIndex, std::string>>>> logs;
    const auto report = run_experiment(cfg, seq, [&](int tau) {
      return std::make_unique<SpyLearner>(seq, &logs[tau]);
    });
    trials += report.trials.size();
    for (const auto& t : report.trials) evaluations += t.sessions.size();
    for (int tau = 1; tau <= k; ++tau) {
      const auto& log = logs[tau];
      if (log.size() != seq.size()) sets_ok = false;
      for (std::size_t t = 1; t <= log.size(); ++t) {
        // Expected set straight from the fold assignments: fold tau of every session i <= t.
        std::set<std::pair<SessionIndex, std::string>> want;
        for (std::size_t i = 1; i <= t; ++i)
          for (const auto& [id, fold] : asg[i - 1].fold_of)
            if (fold == tau) want.emplace(static_cast<SessionIndex>(i), id);
        if (log[t - 1] != want) sets_ok = false;
        if (report.trials[static_cast<std::size_t>(tau - 1)].sessions[t - 1].total != want.size())
          sets_ok = false;
      }
    }
  }
  const bool ok = trials == 2 * k && evaluations == 2 * k * seq.size() && sets_ok;
  return {ok, std::to_string(trials / 2) + " trials, " + std::to_string(evaluations / 2) +
                  " evaluations per protocol (n=3), evaluation sets " + (sets_ok ? "exact" : "WRONG")};
}

// 3 ---------------------------------------------------------------------------

Outcome splitter_properties() {
  Xoshiro256 rng(3);
  int bad_cover = 0, bad_disjoint = 0, bad_balance = 0, bad_determinism = 0;
  const int cases = 1000;
  for (int c = 0; c < cases; ++c) {
    const int k = 2 + static_cast<int>(rng.below(6));
    const int subjects = k + static_cast<int>(rng.below(25));
    const int per_subject = 1 + static_cast<int>(rng.below(5));
    std::vector<ClassIndex> labels;
    for (int l = 0; l < 1 + static_cast<int>(rng.below(5)); ++l) labels.push_back(l);
    // Uneven subjects: drop a random tail of samples.
    auto full = testing::make_session(1, subjects, per_subject, labels, 1, rng());
    std::vector<Sample> kept;
    for (const auto& s : full.samples())
      if (rng.below(4) != 0 || kept.empty()) kept.push_back(s);
    std::set<std::string> subject_ids;
    ClassSet present;
    for (const auto& s : kept) {
      subject_ids.insert(s.subject_id);
      present.insert(s.label);
    }
    if (static_cast<int>(subject_ids.size()) < k) {
      kept = full.samples();
      present = full.label_set();
    }
    const SessionDataset session(1, "s", kept, present);
    const auto seed = rng();
    for (auto mode : {Protocol::slcv, Protocol::ilcv}) {
      const auto a = partition(session, mode, k, seed);
      const auto b = partition(session, mode, k, seed);
      if (!(a == b)) ++bad_determinism;
      // Coverage: every sample in exactly one fold in 1..k, fold members partition the session.
      std::size_t members = 0;
      std::set<std::string> seen;
      for (int tau = 1; tau <= k; ++tau)
        for (const auto& id : a.fold_members(tau)) {
          ++members;
          seen.insert(id);
        }
      if (members != session.size() || seen.size() != session.size() || a.fold_of.size() != session.size())
        ++bad_cover;
      const auto units = a.unit_counts(session);
      if (*std::max_element(units.begin(), units.end()) - *std::min_element(units.begin(), units.end()) > 1)
        ++bad_balance;
      if (mode == Protocol::slcv) {
        for (int tau = 1; tau <= k; ++tau) {
          const auto plan = bind_folds({a}, tau);
          std::set<std::string> train_subjects, test_subjects;
          for (const auto& s : session.samples())
            (plan.split(1).test_ids.contains(s.sample_id) ? test_subjects : train_subjects).insert(s.subject_id);
          for (const auto& s : test_subjects)
            if (train_subjects.contains(s)) {
              ++bad_disjoint;
              break;
            }
        }
      }
    }
  }
  const bool ok = bad_cover + bad_disjoint + bad_balance + bad_determinism == 0;
  return {ok, std::to_string(cases) + " cases x 2 protocols; violations: coverage " + std::to_string(bad_cover) +
                  ", subject leakage " + std::to_string(bad_disjoint) + ", balance " +
                  std::to_string(bad_balance) + ", determinism " + std::to_string(bad_determinism)};
}

// 4 ---------------------------------------------------------------------------

Outcome rch_oracle() {
  Xoshiro256 rng(4);
  int mismatches = 0;
  double worst_linearity = 0.0;
  const int cases = 1000;
  for (int c = 0; c < cases; ++c) {
    const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng.below(4));
    const int sessions = 1 + static_cast<int>(rng.below(3));
    const bool integer = c % 2 == 0;  // integer weights make exact ties common
    auto draw = [&] { return integer ? static_cast<double>(static_cast<int>(rng.below(5)) - 2) : rng.normal(); };
    RemappableHead h(d), a(d), b(d), mix(d);
    const double alpha = rng.normal(), beta = rng.normal();
    for (int t = 1; t <= sessions; ++t) {
      ClassSet labels;
      const int count = 1 + static_cast<int>(rng.below(5));
      while (static_cast<int>(labels.size()) < count) labels.insert(static_cast<ClassIndex>(rng.below(5)));
      for (auto* head : {&h, &a, &b, &mix}) head->add_session(labels);
      for (ClassIndex cls : labels) {
        Eigen::VectorXd w(d), wa(d), wb(d);
        for (Eigen::Index i = 0; i < d; ++i) {
          w[i] = draw();
          wa[i] = rng.normal();
          wb[i] = rng.normal();
        }
        h.set_row(t, cls, w);
        a.set_row(t, cls, wa);
        b.set_row(t, cls, wb);
        mix.set_row(t, cls, alpha * wa + beta * wb);
      }
    }
    for (int probe = 0; probe < 5; ++probe) {
      Eigen::VectorXd x(d);
      for (Eigen::Index i = 0; i < d; ++i) x[i] = draw();
      if (h.predict(x) != oracle::predict(h, x)) ++mismatches;
    }
    const Eigen::MatrixXd lhs = mix.remap();
    const Eigen::MatrixXd rhs = alpha * a.remap() + beta * b.remap();
    const double scale = std::max(rhs.norm(), 1e-300);
    worst_linearity = std::max(worst_linearity, (lhs - rhs).norm() / scale);
  }
  const bool ok = mismatches == 0 && worst_linearity <= 1e-10;
  return {ok, std::to_string(cases) + " instances; predict mismatches " + std::to_string(mismatches) +
                  ", worst remap-linearity error " + fmt("%.2e", worst_linearity)};
}

// 5 ---------------------------------------------------------------------------

Outcome gradient_check() {
  Xoshiro256 rng(5);
  double worst = 0.0;
  const int cases = 50;
  for (int c = 0; c < cases; ++c) {
    LearnerConfig cfg;
    cfg.head_init = HeadInit::Kind::gaussian;
    cfg.head_init_stddev = 0.5;
    cfg.bias_feature = c % 2 == 1;
    cfg.finetune_loss = c % 4 < 2 ? FinetuneLoss::cumulative : FinetuneLoss::session;
    FinetuneLearner l(5, cfg, rng());
    l.begin_session({0, 1, 2});
    l.mutable_feature_map() += 0.3 * Eigen::MatrixXd::Random(l.feature_map().rows(), l.feature_map().cols());
    const ClassSet second = c % 3 == 0 ? ClassSet{0, 1, 2} : ClassSet{1, 3, 4};
    l.begin_session(second);
    const std::vector<ClassIndex> labels(second.begin(), second.end());
    std::vector<Sample> batch;
    const int size = 1 + static_cast<int>(rng.below(8));
    for (int i = 0; i < size; ++i)
      batch.push_back({"b" + std::to_string(i), "p", labels[rng.below(labels.size())],
                       testing::random_vector(rng, 5)});
    worst = std::max(worst, oracle::gradient_mismatch(l, batch));
  }
  return {worst <= 1e-4, std::to_string(cases) + " instances at d=5; worst relative error " + fmt("%.2e", worst)};
}

// 6 ---------------------------------------------------------------------------

Outcome ridge_residual() {
  Xoshiro256 rng(6);
  double worst_ratio = 0.0;
  const int cases = 100;
  for (int c = 0; c < cases; ++c) {
    const Eigen::Index m = 1 + static_cast<Eigen::Index>(rng.below(32));
    const Eigen::Index n = 1 + static_cast<Eigen::Index>(rng.below(64));
    Eigen::MatrixXd h(m, n);
    for (Eigen::Index r = 0; r < m; ++r)
      for (Eigen::Index s = 0; s < n; ++s) h(r, s) = rng.normal();
    const Eigen::MatrixXd g = h * h.transpose();
    const Eigen::Index cols = 1 + static_cast<Eigen::Index>(rng.below(9));
    Eigen::MatrixXd targets(m, cols);
    for (Eigen::Index r = 0; r < m; ++r)
      for (Eigen::Index s = 0; s < cols; ++s) targets(r, s) = rng.normal();
    const double lambda = std::pow(10.0, -3.0 + 6.0 * rng.uniform());
    const Eigen::MatrixXd w = ridge_solve(g, targets, lambda);
    Eigen::MatrixXd a = g;
    a.diagonal().array() += lambda;
    const double bound = 1e-8 * (g.norm() + lambda) * w.norm();
    worst_ratio = std::max(worst_ratio, (a * w - targets).norm() / bound);
  }
  return {worst_ratio <= 1.0, std::to_string(cases) + " instances, M <= 32; worst residual / bound " +
                                  fmt("%.2e", worst_ratio)};
}

// 7 ---------------------------------------------------------------------------

/// Minimum trial-averaged drop, in percentage points, fixed after the pilot.
constexpr double kForgettingDrop = 5.0;

double session1_accuracy(const Learner& l, const SessionSequence& seq, const TrialPlan& plan) {
  const auto test = oracle::fold_samples(seq, plan, 1, true);
  std::size_t ok = 0;
  for (const auto& s : test) ok += l.predict(s.features) == s.label;
  return static_cast<double>(ok) / static_cast<double>(test.size());
}

Outcome forgetting() {
  int passed = 0;
  std::ostringstream detail;
  detail << "D = " << kForgettingDrop << " points; drop/NCM per seed:";
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    ExperimentConfig cfg;
    cfg.seed = seed;
    cfg.protocol = Protocol::slcv;
    SynthSpec spec;
    spec.seed = seed;
    spec.session_label_sets[1] = {"anger", "contempt", "fear", "sad", "tension"};
    cfg.synthetic = spec;
    const auto seq = load_sequence(cfg);
    const auto asg = partition_sequence(seq, cfg.protocol, cfg.k, cfg.seed);
    const auto factory = default_learner_factory(cfg, seq.feature_dim());
    double drop = 0.0, ncm = 0.0;
    for (int tau = 1; tau <= cfg.k; ++tau) {
      const auto plan = bind_folds(asg, tau);
      auto learner = factory(tau);
      run_session(*learner, seq, plan, 1);
      const double after1 = session1_accuracy(*learner, seq, plan);
      run_session(*learner, seq, plan, 2);
      const double after2 = session1_accuracy(*learner, seq, plan);
      drop += 100.0 * (after1 - after2);
      // Solvability oracle: class means from both training slices, scored on the session-1 fold.
      oracle::NearestClassMean model;
      auto train = oracle::fold_samples(seq, plan, 1, false);
      const auto train2 = oracle::fold_samples(seq, plan, 2, false);
      train.insert(train.end(), train2.begin(), train2.end());
      model.fit(train);
      ncm += model.accuracy(oracle::fold_samples(seq, plan, 1, true));
    }
    drop /= cfg.k;
    ncm /= cfg.k;
    if (drop >= kForgettingDrop) ++passed;
    detail << ' ' << fmt("%.1f", drop) << '/' << fmt("%.3f", ncm);
  }
  detail << "; " << passed << "/5 seeds";
  return {passed >= 4, detail.str()};
}

// 8, 9 ------------------------------------------------------------------------

struct DefaultRuns {
  // [learner][protocol][seed-1] -> A-bar
  std::map<LearnerKind, std::map<Protocol, std::vector<double>>> average;
  std::map<Protocol, double> seconds;
};

const DefaultRuns& default_runs() {
  static const DefaultRuns runs = [] {
    DefaultRuns r;
    for (auto protocol : {Protocol::slcv, Protocol::ilcv}) {
      const auto start = std::chrono::steady_clock::now();
      for (auto kind : {LearnerKind::finetune, LearnerKind::prototype})
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
          ExperimentConfig cfg;
          cfg.seed = seed;
          cfg.protocol = protocol;
          cfg.learner = kind;
          SynthSpec spec;
          spec.seed = seed;
          cfg.synthetic = spec;
          cfg.deterministic = true;
          r.average[kind][protocol].push_back(run_experiment(cfg).mean_average);
        }
      r.seconds[protocol] =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
    return r;
  }();
  return runs;
}

std::string list(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : ",") + fmt("%.1f", 100.0 * x);
  return s;
}

Outcome method_ordering() {
  const auto& r = default_runs();
  bool ok = true;
  std::ostringstream detail;
  for (auto protocol : {Protocol::slcv, Protocol::ilcv}) {
    const auto& p = r.average.at(LearnerKind::prototype).at(protocol);
    const auto& f = r.average.at(LearnerKind::finetune).at(protocol);
    int wins = 0;
    for (std::size_t i = 0; i < p.size(); ++i) wins += p[i] > f[i];
    ok = ok && wins >= 4 && r.seconds.at(protocol) < 60.0;
    detail << to_string(protocol) << ": prototype " << list(p) << " vs finetune " << list(f) << " ("
           << wins << "/5, " << fmt("%.1f", r.seconds.at(protocol)) << " s); ";
  }
  return {ok, detail.str()};
}

Outcome protocol_gap() {
  const auto& r = default_runs();
  bool ok = true;
  std::ostringstream detail;
  detail << "subject_shift " << SynthSpec{}.subject_shift << "; ";
  for (auto kind : {LearnerKind::finetune, LearnerKind::prototype}) {
    const auto& s = r.average.at(kind).at(Protocol::slcv);
    const auto& i = r.average.at(kind).at(Protocol::ilcv);
    int wins = 0;
    for (std::size_t j = 0; j < s.size(); ++j) wins += i[j] >= s[j];
    ok = ok && wins >= 4;
    detail << to_string(kind) << " ILCV " << list(i) << " vs SLCV " << list(s) << " (" << wins << "/5); ";
  }
  return {ok, detail.str()};
}

// 10 --------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  const auto root = fs::temp_directory_path() / "cdil_acceptance_determinism";
  fs::remove_all(root);
  ExperimentConfig cfg;
  cfg.seed = 10;
  SynthSpec spec;
  spec.seed = 10;
  cfg.synthetic = spec;
  cfg.deterministic = true;
  std::string bytes[2];
  for (int run = 0; run < 2; ++run) {
    const auto dir = root / ("run" + std::to_string(run));
    fs::create_directories(dir);
    write_report(run_experiment(cfg), dir);
    bytes[run] = slurp(dir / "report.json");
  }
  fs::remove_all(root);
  const bool ok = !bytes[0].empty() && bytes[0] == bytes[1];
  return {ok, "report.json " + std::to_string(bytes[0].size()) + " bytes, " +
                  (ok ? "identical" : "DIFFERENT")};
}

// 11 --------------------------------------------------------------------------

Outcome full_experiment() {
  SynthSpec spec;
  spec.seed = 11;
  spec.samples_per_class_per_session = 100;
  const auto seq = generate_stream(spec);
  std::size_t samples = 0;
  for (const auto& s : seq.sessions()) samples += s.size();
  std::ostringstream detail;
  detail << samples << " samples, d=" << seq.feature_dim() << ", k=5; A-bar";
  for (auto kind : {LearnerKind::finetune, LearnerKind::prototype})
    for (auto protocol : {Protocol::slcv, Protocol::ilcv}) {
      ExperimentConfig cfg;
      cfg.seed = 11;
      cfg.learner = kind;
      cfg.protocol = protocol;
      cfg.synthetic = spec;
      const auto r = run_experiment(cfg, seq);
      detail << ' ' << to_string(kind) << '/' << to_string(protocol) << '=' << fmt("%.1f", 100.0 * r.mean_average);
    }
  return {samples >= 2000 && samples <= 6000, detail.str()};
}

}  // namespace

int main() {
  log::set_level(log::Level::quiet);
  criterion(1, "metric arithmetic on reference rows", 1.0, metric_arithmetic);
  criterion(2, "protocol shape", 1.0, protocol_shape);
  criterion(3, "splitter properties", 10.0, splitter_properties);
  criterion(4, "RCH oracle equivalence", 5.0, rch_oracle);
  criterion(5, "gradient check", 5.0, gradient_check);
  criterion(6, "ridge solve residual", 5.0, ridge_residual);
  criterion(7, "forgetting on disjoint sessions", 30.0, forgetting);
  criterion(8, "prototype beats finetune", 120.0, method_ordering);
  criterion(9, "ILCV at least SLCV", 120.0, protocol_gap);
  criterion(10, "end-to-end determinism", 60.0, determinism);
  criterion(11, "full default experiment", 300.0, full_experiment);
  std::printf("%s: %d criteria failed\n", failures == 0 ? "ACCEPTANCE PASS" : "ACCEPTANCE FAIL", failures);
  return failures == 0 ? 0 : 1;
}
