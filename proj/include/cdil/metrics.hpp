#pragma once

#include <cstddef>
#include <vector>

#include <nlohmann/json.hpp>

namespace cdil {

/// A_i = correct / total, kept as the exact count pair alongside its value.
struct SessionAccuracy {
  std::size_t correct = 0;
  std::size_t total = 0;

  double value() const;
  bool operator==(const SessionAccuracy&) const = default;
};

struct TrialResult {
  int trial_index = 0;
  std::vector<SessionAccuracy> sessions;

  /// A_1..A_n as reals.
  std::vector<double> accuracies() const;
  bool operator==(const TrialResult&) const = default;
};

/// Final accuracy: the last session's accuracy. Throws ProtocolError if empty.
double final_accuracy(const std::vector<double>& per_session);
double final_accuracy(const TrialResult& result);

/// Average accuracy: mean of the per-session accuracies. Throws ProtocolError if empty.
double average_accuracy(const std::vector<double>& per_session);
double average_accuracy(const TrialResult& result);

struct ExperimentReport {
  std::vector<TrialResult> trials;
  std::vector<double> mean_per_session;
  double mean_final = 0.0;
  double mean_average = 0.0;
  /// Sample standard deviations across trials (0 for a single trial).
  std::vector<double> std_per_session;
  double std_final = 0.0;
  double std_average = 0.0;
  /// Per-trial final / average values, in trial order.
  std::vector<double> trial_final;
  std::vector<double> trial_average;
  nlohmann::ordered_json config;
};

/// Fold averaging across trials. Throws ProtocolError when trials is empty,
/// lengths are ragged, or (when expected_trials > 0) the count is wrong.
ExperimentReport aggregate(std::vector<TrialResult> trials, std::size_t expected_trials = 0);

}  // namespace cdil
