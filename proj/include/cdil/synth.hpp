#pragma once

// Synthetic composite class-domain streams.
//
// Class c has a fixed mean mu_c (random direction, norm class_separation).
// Session t translates every class by delta_t (norm domain_shift[t]) and each
// subject s adds eta_s (norm subject_shift). A sample is
//
//     x ~ N(mu_c + delta_t + eta_s, noise^2 I).
//
// Magnitudes are absolute feature-space lengths; with the default noise of 1
// they read directly in units of the noise standard deviation.

#include "cdil/core.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace cdil {

/// The four-session label structure of the micro-expression benchmark
/// (CASME II, SAMM, MMEW, CAS(ME)^3).
std::vector<std::vector<std::string>> benchmark_label_sets();
std::vector<std::string> benchmark_session_names();

struct SynthSpec {
  std::vector<std::vector<std::string>> session_label_sets = benchmark_label_sets();
  /// Defaults to "session<t>" when shorter than the label-set list.
  std::vector<std::string> session_names = benchmark_session_names();
  int feature_dim = 64;
  int samples_per_class_per_session = 40;
  int subjects_per_session = 15;
  double class_separation = 4.0;
  /// One entry per session, or a single entry broadcast to all sessions.
  std::vector<double> domain_shift = {2.0};
  double subject_shift = 0.5;
  double noise = 1.0;
  std::uint64_t seed = 0;
  bool cross_session_subjects = false;

  /// Throws ConfigError on negative magnitudes, non-positive counts, fewer
  /// than two classes in session 1, duplicate labels within a session, or a
  /// session with more classes than subjects.
  void validate() const;
  double domain_shift_of(SessionIndex t) const;
};

/// Deterministic in the spec (seed included). Each session's subjects are
/// split evenly over its classes, so a subject shows a single class; a
/// class's samples are dealt round-robin over its own subjects.
SessionSequence generate_stream(const SynthSpec& spec);

/// Class means and per-session offsets used by generate_stream, exposed for
/// oracle classifiers in tests.
struct SynthGroundTruth {
  std::vector<Eigen::VectorXd> class_means;     // by class index
  std::vector<Eigen::VectorXd> session_offsets;  // by t-1
};
SynthGroundTruth synth_ground_truth(const SynthSpec& spec);

}  // namespace cdil
