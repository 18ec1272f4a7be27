#pragma once

// Small builders shared by the unit tests.

#include "cdil/core.hpp"
#include "cdil/random.hpp"
#include "cdil/synth.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace cdil::testing {

inline Eigen::VectorXd random_vector(Xoshiro256& rng, Eigen::Index d, double scale = 1.0) {
  Eigen::VectorXd v(d);
  for (Eigen::Index i = 0; i < d; ++i) v[i] = scale * rng.normal();
  return v;
}

/// Session with `per_subject` samples for each of `subjects` subjects, labels
/// cycling over `labels`, random features.
inline SessionDataset make_session(SessionIndex t, int subjects, int per_subject,
                                   const std::vector<ClassIndex>& labels, Eigen::Index d,
                                   std::uint64_t seed) {
  Xoshiro256 rng(seed);
  std::vector<Sample> samples;
  int serial = 0;
  for (int s = 0; s < subjects; ++s)
    for (int j = 0; j < per_subject; ++j) {
      const auto label = labels[static_cast<std::size_t>(serial % static_cast<int>(labels.size()))];
      samples.push_back({"t" + std::to_string(t) + "-" + std::to_string(serial),
                         "s" + std::to_string(t) + ":p" + std::to_string(s), label,
                         random_vector(rng, d)});
      ++serial;
    }
  return SessionDataset(t, "session" + std::to_string(t), std::move(samples),
                        ClassSet(labels.begin(), labels.end()));
}

/// The four-session benchmark structure with a handful of samples per class.
inline SynthSpec small_benchmark_spec(std::uint64_t seed, int per_class = 10, int d = 8) {
  SynthSpec s;
  s.seed = seed;
  s.feature_dim = d;
  s.samples_per_class_per_session = per_class;
  s.subjects_per_session = 10;
  return s;
}

inline LabelRegistry registry_of_names(const std::vector<std::string>& names) {
  return LabelRegistry(names);
}

}  // namespace cdil::testing
