#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

namespace cdil {

/// 0-based class index, assigned in order of first appearance across sessions.
using ClassIndex = int;
/// 1-based session index t.
using SessionIndex = int;
using ClassSet = std::set<ClassIndex>;

/// Global class-name universe. Indices are contiguous and never reassigned.
class LabelRegistry {
 public:
  LabelRegistry() = default;
  explicit LabelRegistry(const std::vector<std::string>& names);

  /// Returns the existing index for a known name, otherwise appends it.
  ClassIndex register_name(const std::string& name);

  /// Throws LookupError for unknown names.
  ClassIndex index_of(const std::string& name) const;
  std::optional<ClassIndex> find(const std::string& name) const;
  const std::string& name_of(ClassIndex c) const;

  const std::vector<std::string>& names() const noexcept { return names_; }
  std::size_t size() const noexcept { return names_.size(); }
  bool contains(ClassIndex c) const noexcept {
    return c >= 0 && static_cast<std::size_t>(c) < names_.size();
  }

  bool operator==(const LabelRegistry& other) const { return names_ == other.names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, ClassIndex> index_of_;
};

struct Sample {
  std::string sample_id;
  std::string subject_id;
  ClassIndex label = -1;
  Eigen::VectorXd features;

  bool operator==(const Sample& other) const {
    return sample_id == other.sample_id && subject_id == other.subject_id &&
           label == other.label && features.size() == other.features.size() &&
           features == other.features;
  }
};

/// One session's dataset D^(t). Subjects are derived from the samples.
class SessionDataset {
 public:
  /// Throws ConfigError if a label falls outside label_set, sample ids repeat,
  /// the session is empty, or feature lengths disagree.
  SessionDataset(SessionIndex index, std::string name, std::vector<Sample> samples,
                 ClassSet label_set);

  SessionIndex session_index() const noexcept { return index_; }
  const std::string& name() const noexcept { return name_; }
  const std::vector<Sample>& samples() const noexcept { return samples_; }
  const ClassSet& label_set() const noexcept { return label_set_; }
  const std::set<std::string>& subjects() const noexcept { return subjects_; }
  std::size_t size() const noexcept { return samples_.size(); }
  Eigen::Index feature_dim() const noexcept { return samples_.front().features.size(); }

  bool operator==(const SessionDataset& other) const = default;

 private:
  SessionIndex index_;
  std::string name_;
  std::vector<Sample> samples_;
  ClassSet label_set_;
  std::set<std::string> subjects_;
};

/// The ordered session stream D^(1..n) sharing one feature dimension.
class SessionSequence {
 public:
  SessionSequence(std::vector<SessionDataset> sessions, LabelRegistry registry,
                  Eigen::Index feature_dim);

  std::size_t size() const noexcept { return sessions_.size(); }
  /// 1-based access; throws std::out_of_range.
  const SessionDataset& session(SessionIndex t) const;
  const std::vector<SessionDataset>& sessions() const noexcept { return sessions_; }
  const LabelRegistry& registry() const noexcept { return registry_; }
  Eigen::Index feature_dim() const noexcept { return feature_dim_; }

  bool operator==(const SessionSequence& other) const = default;

 private:
  std::vector<SessionDataset> sessions_;
  LabelRegistry registry_;
  Eigen::Index feature_dim_;
};

/// L_t, the union of l^(1..t). Throws std::out_of_range unless 1 <= t <= n.
ClassSet cumulative_label_space(const SessionSequence& seq, SessionIndex t);

/// T_c, the sessions whose label set contains c. Throws LookupError for
/// classes absent from every session.
std::set<SessionIndex> sessions_of_class(const SessionSequence& seq, ClassIndex c);

/// Session-scoped subject identity used at ingestion: "s<t>:<raw>" unless
/// subjects are declared to recur across sessions.
std::string scoped_subject_id(SessionIndex t, const std::string& raw_id,
                              bool cross_session_subjects);

}  // namespace cdil
