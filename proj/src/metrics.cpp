#include "cdil/metrics.hpp"

#include "cdil/errors.hpp"

#include <cmath>
#include <string>

namespace cdil {

double SessionAccuracy::value() const {
  if (total == 0) throw ProtocolError("accuracy over an empty evaluation set");
  return static_cast<double>(correct) / static_cast<double>(total);
}

std::vector<double> TrialResult::accuracies() const {
  std::vector<double> out;
  out.reserve(sessions.size());
  for (const auto& s : sessions) out.push_back(s.value());
  return out;
}

double final_accuracy(const std::vector<double>& per_session) {
  if (per_session.empty()) throw ProtocolError("final accuracy of an empty session vector");
  return per_session.back();
}

double final_accuracy(const TrialResult& result) { return final_accuracy(result.accuracies()); }

double average_accuracy(const std::vector<double>& per_session) {
  if (per_session.empty()) throw ProtocolError("average accuracy of an empty session vector");
  double sum = 0.0;
  for (double a : per_session) sum += a;
  return sum / static_cast<double>(per_session.size());
}

double average_accuracy(const TrialResult& result) { return average_accuracy(result.accuracies()); }

namespace {

struct MeanStd {
  double mean;
  double sd;
};

MeanStd mean_std(const std::vector<double>& v) {
  double sum = 0.0;
  for (double x : v) sum += x;
  const double mean = sum / static_cast<double>(v.size());
  if (v.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

}  // namespace

ExperimentReport aggregate(std::vector<TrialResult> trials, std::size_t expected_trials) {
  if (trials.empty()) throw ProtocolError("cannot aggregate an empty set of trials");
  if (expected_trials > 0 && trials.size() != expected_trials)
    throw ProtocolError("expected " + std::to_string(expected_trials) + " trials, got " +
                        std::to_string(trials.size()));
  const std::size_t n = trials.front().sessions.size();
  if (n == 0) throw ProtocolError("trial " + std::to_string(trials.front().trial_index) +
                                  " has no sessions");
  for (const auto& t : trials)
    if (t.sessions.size() != n)
      throw ProtocolError("ragged trials: trial " + std::to_string(t.trial_index) + " has " +
                          std::to_string(t.sessions.size()) + " sessions, expected " +
                          std::to_string(n));

  ExperimentReport r;
  for (const auto& t : trials) {
    r.trial_final.push_back(final_accuracy(t));
    r.trial_average.push_back(average_accuracy(t));
  }
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> column;
    for (const auto& t : trials) column.push_back(t.sessions[i].value());
    const auto ms = mean_std(column);
    r.mean_per_session.push_back(ms.mean);
    r.std_per_session.push_back(ms.sd);
  }
  const auto f = mean_std(r.trial_final);
  const auto a = mean_std(r.trial_average);
  r.mean_final = f.mean;
  r.std_final = f.sd;
  r.mean_average = a.mean;
  r.std_average = a.sd;
  r.trials = std::move(trials);
  return r;
}

}  // namespace cdil
