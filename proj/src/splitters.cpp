#include "cdil/splitters.hpp"

#include "cdil/errors.hpp"
#include "cdil/random.hpp"

#include <algorithm>
#include <cctype>
#include <span>

namespace cdil {

std::string_view to_string(Protocol p) noexcept { return p == Protocol::slcv ? "slcv" : "ilcv"; }

Protocol parse_protocol(std::string_view s) {
  std::string lower(s);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "slcv") return Protocol::slcv;
  if (lower == "ilcv") return Protocol::ilcv;
  throw ConfigError("unknown protocol '" + std::string(s) + "' (expected slcv or ilcv)");
}

std::vector<std::string> FoldAssignment::fold_members(int tau) const {
  std::vector<std::string> out;
  for (const auto& [id, f] : fold_of)
    if (f == tau) out.push_back(id);
  return out;
}

std::vector<std::size_t> FoldAssignment::unit_counts(const SessionDataset& session) const {
  std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
  if (mode == Protocol::ilcv) {
    for (const auto& [id, f] : fold_of) ++counts[static_cast<std::size_t>(f - 1)];
    return counts;
  }
  std::map<std::string, int> subject_fold;
  for (const auto& s : session.samples()) subject_fold.emplace(s.subject_id, fold_of.at(s.sample_id));
  for (const auto& [subj, f] : subject_fold) ++counts[static_cast<std::size_t>(f - 1)];
  return counts;
}

const SessionSplit& TrialPlan::split(SessionIndex t) const {
  if (t < 1 || static_cast<std::size_t>(t) > splits.size())
    throw std::out_of_range("session index " + std::to_string(t) + " outside trial plan");
  return splits[static_cast<std::size_t>(t - 1)];
}

namespace {

void check_k(int k) {
  if (k < 2) throw ConfigError("fold count k must be >= 2, got " + std::to_string(k));
}

// Deal shuffled units round-robin: unit i goes to fold (i mod k) + 1.
std::map<std::string, int> deal(std::vector<std::string> units, int k, std::uint64_t seed) {
  Xoshiro256 rng(seed);
  shuffle(std::span<std::string>(units), rng);
  std::map<std::string, int> fold;
  for (std::size_t i = 0; i < units.size(); ++i)
    fold.emplace(units[i], static_cast<int>(i % static_cast<std::size_t>(k)) + 1);
  return fold;
}

}  // namespace

FoldAssignment slcv_partition(const SessionDataset& session, int k, std::uint64_t seed) {
  check_k(k);
  const auto& subjects = session.subjects();
  if (subjects.size() < static_cast<std::size_t>(k))
    throw ConfigError("session " + std::to_string(session.session_index()) +
                      ": fewer subjects than folds (" + std::to_string(subjects.size()) +
                      " < " + std::to_string(k) + ")");
  // std::set iteration gives a canonical starting order independent of sample order.
  const auto subject_fold = deal({subjects.begin(), subjects.end()}, k, seed);
  FoldAssignment fa{session.session_index(), k, Protocol::slcv, seed, {}};
  for (const auto& s : session.samples()) fa.fold_of.emplace(s.sample_id, subject_fold.at(s.subject_id));
  return fa;
}

FoldAssignment ilcv_partition(const SessionDataset& session, int k, std::uint64_t seed) {
  check_k(k);
  if (session.size() < static_cast<std::size_t>(k))
    throw ConfigError("session " + std::to_string(session.session_index()) +
                      ": fewer samples than folds (" + std::to_string(session.size()) + " < " +
                      std::to_string(k) + ")");
  std::vector<std::string> ids;
  ids.reserve(session.size());
  for (const auto& s : session.samples()) ids.push_back(s.sample_id);
  std::sort(ids.begin(), ids.end());
  return {session.session_index(), k, Protocol::ilcv, seed, deal(std::move(ids), k, seed)};
}

FoldAssignment partition(const SessionDataset& session, Protocol mode, int k, std::uint64_t seed) {
  return mode == Protocol::slcv ? slcv_partition(session, k, seed) : ilcv_partition(session, k, seed);
}

std::uint64_t fold_seed(std::uint64_t experiment_seed, SessionIndex t, Protocol mode) {
  return derive_seed(experiment_seed, "folds",
                     {static_cast<std::uint64_t>(t), mode == Protocol::slcv ? 1u : 2u});
}

std::vector<FoldAssignment> partition_sequence(const SessionSequence& seq, Protocol mode, int k,
                                               std::uint64_t experiment_seed) {
  std::vector<FoldAssignment> out;
  out.reserve(seq.size());
  for (const auto& s : seq.sessions())
    out.push_back(partition(s, mode, k, fold_seed(experiment_seed, s.session_index(), mode)));
  return out;
}

TrialPlan bind_folds(const std::vector<FoldAssignment>& assignments, int tau) {
  if (assignments.empty()) throw ConfigError("no fold assignments to bind");
  const int k = assignments.front().k;
  const Protocol mode = assignments.front().mode;
  for (const auto& a : assignments)
    if (a.k != k || a.mode != mode)
      throw ConfigError("fold assignments disagree on k or protocol (session " +
                        std::to_string(a.session_index) + ")");
  if (tau < 1 || tau > k)
    throw ConfigError("trial index " + std::to_string(tau) + " outside 1.." + std::to_string(k));

  TrialPlan plan{tau, {}};
  plan.splits.reserve(assignments.size());
  for (const auto& a : assignments) {
    SessionSplit split;
    for (const auto& [id, f] : a.fold_of) (f == tau ? split.test_ids : split.train_ids).insert(id);
    plan.splits.push_back(std::move(split));
  }
  return plan;
}

std::set<std::pair<SessionIndex, std::string>> cumulative_test_ids(const TrialPlan& plan,
                                                                   SessionIndex t) {
  plan.split(t);  // range check
  std::set<std::pair<SessionIndex, std::string>> out;
  for (SessionIndex i = 1; i <= t; ++i)
    for (const auto& id : plan.split(i).test_ids) out.emplace(i, id);
  return out;
}

ClassSet classes_missing_from_training(const SessionDataset& session, const SessionSplit& split) {
  ClassSet missing = session.label_set();
  for (const auto& s : session.samples())
    if (split.train_ids.contains(s.sample_id)) missing.erase(s.label);
  return missing;
}

}  // namespace cdil
