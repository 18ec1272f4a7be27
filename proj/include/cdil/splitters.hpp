#pragma once

#include "cdil/core.hpp"

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cdil {

enum class Protocol { slcv, ilcv };

std::string_view to_string(Protocol p) noexcept;
/// Accepts "slcv"/"ilcv" in any case; throws ConfigError otherwise.
Protocol parse_protocol(std::string_view s);

/// Sample-to-fold map for one session. Folds are numbered 1..k.
struct FoldAssignment {
  SessionIndex session_index = 0;
  int k = 0;
  Protocol mode = Protocol::slcv;
  std::uint64_t seed = 0;
  std::map<std::string, int> fold_of;

  /// Sample ids in fold tau, in id order.
  std::vector<std::string> fold_members(int tau) const;
  /// Units per fold (subjects for SLCV, samples for ILCV), indexed by tau-1.
  std::vector<std::size_t> unit_counts(const SessionDataset& session) const;

  bool operator==(const FoldAssignment&) const = default;
};

struct SessionSplit {
  std::set<std::string> train_ids;
  std::set<std::string> test_ids;

  bool operator==(const SessionSplit&) const = default;
};

/// Bound train/test splits of one trial tau; splits[t-1] belongs to session t.
struct TrialPlan {
  int trial_index = 0;
  std::vector<SessionSplit> splits;

  const SessionSplit& split(SessionIndex t) const;
  std::size_t session_count() const noexcept { return splits.size(); }
};

/// Shuffles subjects, then deals subject i to fold (i mod k) + 1.
FoldAssignment slcv_partition(const SessionDataset& session, int k, std::uint64_t seed);

/// Shuffles samples, then deals sample i to fold (i mod k) + 1.
FoldAssignment ilcv_partition(const SessionDataset& session, int k, std::uint64_t seed);

FoldAssignment partition(const SessionDataset& session, Protocol mode, int k, std::uint64_t seed);

/// Per-session fold seed: independent across sessions and between protocols.
std::uint64_t fold_seed(std::uint64_t experiment_seed, SessionIndex t, Protocol mode);

/// Partitions every session of seq with its derived fold seed.
std::vector<FoldAssignment> partition_sequence(const SessionSequence& seq, Protocol mode, int k,
                                               std::uint64_t experiment_seed);

/// Fold binding: in every session, fold tau is the test split and the rest trains.
TrialPlan bind_folds(const std::vector<FoldAssignment>& assignments, int tau);

/// Union of test splits of sessions 1..t, tagged with their session.
std::set<std::pair<SessionIndex, std::string>> cumulative_test_ids(const TrialPlan& plan,
                                                                   SessionIndex t);

/// Classes of the session's label set with no sample in the training split.
ClassSet classes_missing_from_training(const SessionDataset& session, const SessionSplit& split);

}  // namespace cdil
