#include "cdil/pipeline.hpp"

#include "cdil/errors.hpp"
#include "cdil/io.hpp"
#include "cdil/log.hpp"
#include "cdil/random.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <unordered_map>

namespace cdil {

void ExperimentConfig::validate() const {
  if (k < 2) throw ConfigError("k must be >= 2, got " + std::to_string(k));
  if (synthetic.has_value() == !manifest_path.empty())
    throw ConfigError("exactly one of a synthetic spec or a manifest path must be given");
  if (threads < 0) throw ConfigError("threads must be >= 0");
  learner_config.validate();
  if (synthetic) synthetic->validate();
}

LearnerFactory default_learner_factory(const ExperimentConfig& cfg, Eigen::Index feature_dim) {
  return [kind = cfg.learner, lc = cfg.learner_config, seed = cfg.seed, feature_dim](int tau) {
    return make_learner(kind, feature_dim, lc,
                        derive_seed(seed, "learner", {static_cast<std::uint64_t>(tau)}));
  };
}

SessionSequence load_sequence(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.synthetic) return generate_stream(*cfg.synthetic);
  return load_sequence(load_manifest(cfg.manifest_path));
}

std::vector<Sample> training_slice(const SessionSequence& seq, const TrialPlan& plan,
                                   SessionIndex t) {
  const auto& ids = plan.split(t).train_ids;
  std::vector<Sample> out;
  out.reserve(ids.size());
  for (const auto& s : seq.session(t).samples())
    if (ids.contains(s.sample_id)) out.push_back(s);
  return out;
}

SessionAccuracy run_session(Learner& learner, const SessionSequence& seq, const TrialPlan& plan,
                            SessionIndex t) {
  if (learner.sessions_seen() != static_cast<std::size_t>(t - 1))
    throw ProtocolError("session " + std::to_string(t) + " requested after " +
                        std::to_string(learner.sessions_seen()) + " completed sessions");
  const auto& session = seq.session(t);
  const auto cumulative = cumulative_label_space(seq, t);

  const auto missing = classes_missing_from_training(session, plan.split(t));
  for (ClassIndex c : missing)
    log::warn("trial " + std::to_string(plan.trial_index) + ", session " + std::to_string(t) +
              ": class '" + seq.registry().name_of(c) +
              "' has no training samples; its head stays at initialisation");

  const auto train = training_slice(seq, plan, t);
  if (train.empty())
    throw ProtocolError("trial " + std::to_string(plan.trial_index) + ", session " +
                        std::to_string(t) + ": empty training split");
  learner.update(train, session.label_set(), cumulative);
  if (learner.known_classes() != cumulative)
    throw ProtocolError("learner label space differs from L_" + std::to_string(t));

  const auto test = cumulative_test_ids(plan, t);
  if (test.empty())
    throw ProtocolError("trial " + std::to_string(plan.trial_index) + ", session " +
                        std::to_string(t) + ": empty evaluation set");

  SessionAccuracy acc;
  for (SessionIndex i = 1; i <= t; ++i) {
    const auto& ids = plan.split(i).test_ids;
    for (const auto& s : seq.session(i).samples()) {
      if (!ids.contains(s.sample_id)) continue;
      ++acc.total;
      if (learner.predict(s.features) == s.label) ++acc.correct;
    }
  }
  return acc;
}

TrialResult run_trial(const LearnerFactory& factory, const SessionSequence& seq,
                      const std::vector<FoldAssignment>& assignments, int tau,
                      std::unique_ptr<Learner>* keep_learner) {
  if (assignments.size() != seq.size())
    throw ConfigError("fold assignments cover " + std::to_string(assignments.size()) +
                      " sessions, sequence has " + std::to_string(seq.size()));
  const auto plan = bind_folds(assignments, tau);
  auto learner = factory(tau);
  TrialResult result{tau, {}};
  for (SessionIndex t = 1; t <= static_cast<SessionIndex>(seq.size()); ++t) {
    try {
      result.sessions.push_back(run_session(*learner, seq, plan, t));
    } catch (const NumericalError& e) {
      throw NumericalError("trial " + std::to_string(tau) + ", session " + std::to_string(t) +
                           ": " + e.what());
    }
    log::info("trial " + std::to_string(tau) + " session " + std::to_string(t) + ": " +
              std::to_string(result.sessions.back().correct) + "/" +
              std::to_string(result.sessions.back().total));
  }
  if (keep_learner) *keep_learner = std::move(learner);
  return result;
}

TrialResult run_trial(const ExperimentConfig& cfg, const SessionSequence& seq,
                      const std::vector<FoldAssignment>& assignments, int tau) {
  return run_trial(default_learner_factory(cfg, seq.feature_dim()), seq, assignments, tau);
}

int effective_threads(const ExperimentConfig& cfg) {
  if (cfg.deterministic) return 1;
  int n = cfg.threads;
  if (n == 0) {
    if (const char* env = std::getenv("CDIL_THREADS")) n = std::atoi(env);
  }
  if (n <= 0) n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  return std::clamp(n, 1, cfg.k);
}

ExperimentReport run_experiment(const ExperimentConfig& cfg, const SessionSequence& seq,
                                const LearnerFactory& factory, const TrialObserver& observer) {
  cfg.validate();
  const auto make = factory ? factory : default_learner_factory(cfg, seq.feature_dim());
  const auto assignments = partition_sequence(seq, cfg.protocol, cfg.k, cfg.seed);

  std::vector<TrialResult> results(static_cast<std::size_t>(cfg.k));
  std::mutex observer_mutex;
  auto run_one = [&](int tau) {
    std::unique_ptr<Learner> learner;
    results[static_cast<std::size_t>(tau - 1)] = run_trial(make, seq, assignments, tau, &learner);
    if (observer) {
      std::lock_guard lock(observer_mutex);
      observer(results[static_cast<std::size_t>(tau - 1)], *learner);
    }
  };

  const int threads = effective_threads(cfg);
  if (threads == 1) {
    for (int tau = 1; tau <= cfg.k; ++tau) run_one(tau);
  } else {
    std::atomic<int> next{1};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w)
      pool.emplace_back([&] {
        for (int tau = next++; tau <= cfg.k && !failed; tau = next++) {
          try {
            run_one(tau);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
            failed = true;
          }
        }
      });
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
  }

  auto report = aggregate(std::move(results), static_cast<std::size_t>(cfg.k));
  report.config = config_to_json(cfg);
  return report;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  return run_experiment(cfg, load_sequence(cfg));
}

}  // namespace cdil
