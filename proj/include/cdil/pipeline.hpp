#pragma once

#include "cdil/core.hpp"
#include "cdil/learners.hpp"
#include "cdil/metrics.hpp"
#include "cdil/splitters.hpp"
#include "cdil/synth.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace cdil {

struct ExperimentConfig {
  Protocol protocol = Protocol::slcv;
  int k = 5;
  LearnerKind learner = LearnerKind::finetune;
  LearnerConfig learner_config;
  std::uint64_t seed = 0;

  /// Exactly one of synthetic / manifest_path selects the session stream.
  std::optional<SynthSpec> synthetic;
  std::string manifest_path;

  std::string output_dir;
  /// Sequential trials in a fixed order.
  bool deterministic = false;
  /// Upper bound on concurrent trials; 0 defers to CDIL_THREADS, then hardware.
  int threads = 0;
  /// Progress lines on stderr.
  bool verbose = false;

  void validate() const;
};

/// Builds a learner for trial tau.
using LearnerFactory = std::function<std::unique_ptr<Learner>(int trial)>;

/// Default factory: cfg.learner seeded from (cfg.seed, tau).
LearnerFactory default_learner_factory(const ExperimentConfig& cfg, Eigen::Index feature_dim);

/// Materialises the configured session stream.
SessionSequence load_sequence(const ExperimentConfig& cfg);

/// Training slice of session t under plan; the only samples a learner sees.
std::vector<Sample> training_slice(const SessionSequence& seq, const TrialPlan& plan, SessionIndex t);

/// Trains session t, then evaluates on the union of bound test folds 1..t over L_t.
SessionAccuracy run_session(Learner& learner, const SessionSequence& seq, const TrialPlan& plan,
                            SessionIndex t);

/// Fresh learner, sessions 1..n in order.
TrialResult run_trial(const LearnerFactory& factory, const SessionSequence& seq,
                      const std::vector<FoldAssignment>& assignments, int tau,
                      std::unique_ptr<Learner>* keep_learner = nullptr);
TrialResult run_trial(const ExperimentConfig& cfg, const SessionSequence& seq,
                      const std::vector<FoldAssignment>& assignments, int tau);

/// Called once per finished trial (serialised, possibly off the main thread).
using TrialObserver = std::function<void(const TrialResult&, const Learner&)>;

/// Partition, run all k trials, aggregate. The report carries the config echo.
/// Throws on the first failing trial (no partial averages).
ExperimentReport run_experiment(const ExperimentConfig& cfg, const SessionSequence& seq,
                                const LearnerFactory& factory = {},
                                const TrialObserver& observer = {});
ExperimentReport run_experiment(const ExperimentConfig& cfg);

/// Trial parallelism actually used for cfg.
int effective_threads(const ExperimentConfig& cfg);

}  // namespace cdil
