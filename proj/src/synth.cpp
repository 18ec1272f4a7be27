#include "cdil/synth.hpp"

#include "cdil/errors.hpp"
#include "cdil/random.hpp"

#include <cmath>
#include <cstdio>
#include <set>

namespace cdil {

std::vector<std::vector<std::string>> benchmark_label_sets() {
  return {
      {"disgust", "happiness", "others", "repression", "surprise"},
      {"anger", "contempt", "happiness", "others", "surprise"},
      {"disgust", "fear", "happiness", "others", "sad", "surprise"},
      {"anger", "disgust", "fear", "happiness", "others", "sad", "surprise"},
  };
}

std::vector<std::string> benchmark_session_names() {
  return {"CASME II", "SAMM", "MMEW", "CAS(ME)^3"};
}

void SynthSpec::validate() const {
  if (session_label_sets.empty()) throw ConfigError("synthetic spec has no sessions");
  if (session_label_sets.front().size() < 2)
    throw ConfigError("synthetic session 1 needs at least two classes");
  for (std::size_t i = 0; i < session_label_sets.size(); ++i) {
    const auto& l = session_label_sets[i];
    if (l.empty()) throw ConfigError("synthetic session " + std::to_string(i + 1) + " has no classes");
    if (std::set<std::string>(l.begin(), l.end()).size() != l.size())
      throw ConfigError("synthetic session " + std::to_string(i + 1) + " repeats a class");
  }
  if (feature_dim < 1) throw ConfigError("feature_dim must be positive");
  if (samples_per_class_per_session < 1)
    throw ConfigError("samples_per_class_per_session must be positive");
  if (subjects_per_session < 1) throw ConfigError("subjects_per_session must be positive");
  for (std::size_t i = 0; i < session_label_sets.size(); ++i)
    if (static_cast<std::size_t>(subjects_per_session) < session_label_sets[i].size())
      throw ConfigError("synthetic session " + std::to_string(i + 1) +
                        " has more classes than subjects_per_session");
  if (domain_shift.empty()) throw ConfigError("domain_shift needs at least one entry");
  if (domain_shift.size() != 1 && domain_shift.size() != session_label_sets.size())
    throw ConfigError("domain_shift must have one entry or one per session");
  for (double s : domain_shift)
    if (!(s >= 0.0)) throw ConfigError("domain_shift entries must be >= 0");
  if (!(class_separation >= 0.0) || !(subject_shift >= 0.0) || !(noise >= 0.0))
    throw ConfigError("class_separation, subject_shift and noise must be >= 0");
}

double SynthSpec::domain_shift_of(SessionIndex t) const {
  return domain_shift.size() == 1 ? domain_shift.front()
                                  : domain_shift.at(static_cast<std::size_t>(t - 1));
}

namespace {

Eigen::VectorXd random_direction(Xoshiro256& rng, int d) {
  Eigen::VectorXd v(d);
  do {
    for (int j = 0; j < d; ++j) v[j] = rng.normal();
  } while (v.norm() == 0.0);
  return v / v.norm();
}

Eigen::VectorXd offset(std::uint64_t seed, std::string_view tag,
                       std::initializer_list<std::uint64_t> coords, int d, double norm) {
  Xoshiro256 rng(derive_seed(seed, tag, coords));
  return norm * random_direction(rng, d);
}

LabelRegistry registry_of(const SynthSpec& spec) {
  LabelRegistry reg;
  for (const auto& l : spec.session_label_sets)
    for (const auto& name : l) reg.register_name(name);
  return reg;
}

}  // namespace

SynthGroundTruth synth_ground_truth(const SynthSpec& spec) {
  spec.validate();
  const auto reg = registry_of(spec);
  SynthGroundTruth gt;
  for (std::size_t c = 0; c < reg.size(); ++c)
    gt.class_means.push_back(
        offset(spec.seed, "class-mean", {c}, spec.feature_dim, spec.class_separation));
  for (std::size_t t = 1; t <= spec.session_label_sets.size(); ++t)
    gt.session_offsets.push_back(offset(spec.seed, "domain-offset", {t}, spec.feature_dim,
                                        spec.domain_shift_of(static_cast<SessionIndex>(t))));
  return gt;
}

SessionSequence generate_stream(const SynthSpec& spec) {
  const auto gt = synth_ground_truth(spec);
  const auto reg = registry_of(spec);
  const int d = spec.feature_dim;

  std::vector<SessionDataset> sessions;
  for (std::size_t ti = 0; ti < spec.session_label_sets.size(); ++ti) {
    const auto t = static_cast<SessionIndex>(ti + 1);
    const auto tu = static_cast<std::uint64_t>(t);
    std::vector<Eigen::VectorXd> subject_offsets;
    for (int s = 0; s < spec.subjects_per_session; ++s)
      subject_offsets.push_back(offset(spec.seed, "subject-offset",
                                       {tu, static_cast<std::uint64_t>(s)}, d, spec.subject_shift));

    Xoshiro256 noise_rng(derive_seed(spec.seed, "sample-noise", {tu}));
    std::vector<Sample> samples;
    ClassSet labels;
    std::size_t serial = 0;
    // Subjects are dealt to classes: the class at position i owns subjects
    // i, i + m, i + 2m, ... where m is the session's class count.
    const int m = static_cast<int>(spec.session_label_sets[ti].size());
    int position = 0;
    for (const auto& name : spec.session_label_sets[ti]) {
      const int owned = (spec.subjects_per_session - position + m - 1) / m;
      const ClassIndex c = reg.index_of(name);
      labels.insert(c);
      const Eigen::VectorXd centre = gt.class_means[static_cast<std::size_t>(c)] + gt.session_offsets[ti];
      for (int j = 0; j < spec.samples_per_class_per_session; ++j) {
        const int s = position + m * (j % owned);
        Eigen::VectorXd x = centre + subject_offsets[static_cast<std::size_t>(s)];
        for (int k = 0; k < d; ++k) x[k] += spec.noise * noise_rng.normal();
        char sid[32], subj[16];
        std::snprintf(sid, sizeof sid, "t%d-%05zu", t, serial++);
        std::snprintf(subj, sizeof subj, "p%03d", s + 1);
        samples.push_back({sid, scoped_subject_id(t, subj, spec.cross_session_subjects), c, std::move(x)});
      }
      ++position;
    }
    const std::string name = ti < spec.session_names.size() ? spec.session_names[ti]
                                                            : "session" + std::to_string(t);
    sessions.emplace_back(t, name, std::move(samples), std::move(labels));
  }
  return SessionSequence(std::move(sessions), reg, d);
}

}  // namespace cdil
