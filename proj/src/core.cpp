#include "cdil/core.hpp"

#include "cdil/errors.hpp"

#include <stdexcept>
#include <unordered_set>

namespace cdil {

LabelRegistry::LabelRegistry(const std::vector<std::string>& names) {
  for (const auto& n : names) register_name(n);
}

ClassIndex LabelRegistry::register_name(const std::string& name) {
  if (auto it = index_of_.find(name); it != index_of_.end()) return it->second;
  const auto idx = static_cast<ClassIndex>(names_.size());
  names_.push_back(name);
  index_of_.emplace(name, idx);
  return idx;
}

ClassIndex LabelRegistry::index_of(const std::string& name) const {
  if (auto it = index_of_.find(name); it != index_of_.end()) return it->second;
  throw LookupError("unknown class name '" + name + "'");
}

std::optional<ClassIndex> LabelRegistry::find(const std::string& name) const {
  if (auto it = index_of_.find(name); it != index_of_.end()) return it->second;
  return std::nullopt;
}

const std::string& LabelRegistry::name_of(ClassIndex c) const {
  if (!contains(c)) throw LookupError("unknown class index " + std::to_string(c));
  return names_[static_cast<std::size_t>(c)];
}

SessionDataset::SessionDataset(SessionIndex index, std::string name, std::vector<Sample> samples,
                               ClassSet label_set)
    : index_(index), name_(std::move(name)), samples_(std::move(samples)),
      label_set_(std::move(label_set)) {
  const std::string where = "session " + std::to_string(index_) + " (" + name_ + ")";
  if (index_ < 1) throw ConfigError(where + ": session index must be >= 1");
  if (samples_.empty()) throw ConfigError(where + ": session has no samples");
  const auto d = samples_.front().features.size();
  std::unordered_set<std::string> ids;
  for (const auto& s : samples_) {
    if (!label_set_.contains(s.label))
      throw ConfigError(where + ": sample '" + s.sample_id + "' has label " +
                        std::to_string(s.label) + " outside the session label set");
    if (s.features.size() != d)
      throw ShapeError(where + ": sample '" + s.sample_id + "' has " +
                       std::to_string(s.features.size()) + " features, expected " +
                       std::to_string(d));
    if (!ids.insert(s.sample_id).second)
      throw ConfigError(where + ": duplicate sample id '" + s.sample_id + "'");
    subjects_.insert(s.subject_id);
  }
}

SessionSequence::SessionSequence(std::vector<SessionDataset> sessions, LabelRegistry registry,
                                 Eigen::Index feature_dim)
    : sessions_(std::move(sessions)), registry_(std::move(registry)), feature_dim_(feature_dim) {
  if (sessions_.empty()) throw ConfigError("session sequence is empty");
  if (feature_dim_ < 1) throw ConfigError("feature dimension must be positive");
  for (std::size_t i = 0; i < sessions_.size(); ++i) {
    const auto& s = sessions_[i];
    if (s.session_index() != static_cast<SessionIndex>(i + 1))
      throw ConfigError("session indices must run 1..n in order; position " +
                        std::to_string(i + 1) + " holds session " +
                        std::to_string(s.session_index()));
    if (s.feature_dim() != feature_dim_)
      throw ShapeError("session " + std::to_string(i + 1) + " has feature dimension " +
                       std::to_string(s.feature_dim()) + ", sequence uses " +
                       std::to_string(feature_dim_));
    for (ClassIndex c : s.label_set())
      if (!registry_.contains(c))
        throw ConfigError("session " + std::to_string(i + 1) + " uses unregistered class " +
                          std::to_string(c));
  }
}

const SessionDataset& SessionSequence::session(SessionIndex t) const {
  if (t < 1 || static_cast<std::size_t>(t) > sessions_.size())
    throw std::out_of_range("session index " + std::to_string(t) + " outside 1.." +
                            std::to_string(sessions_.size()));
  return sessions_[static_cast<std::size_t>(t - 1)];
}

ClassSet cumulative_label_space(const SessionSequence& seq, SessionIndex t) {
  seq.session(t);  // range check
  ClassSet out;
  for (SessionIndex k = 1; k <= t; ++k) {
    const auto& l = seq.session(k).label_set();
    out.insert(l.begin(), l.end());
  }
  return out;
}

std::set<SessionIndex> sessions_of_class(const SessionSequence& seq, ClassIndex c) {
  std::set<SessionIndex> out;
  for (const auto& s : seq.sessions())
    if (s.label_set().contains(c)) out.insert(s.session_index());
  if (out.empty())
    throw LookupError("class " + std::to_string(c) + " appears in no session");
  return out;
}

std::string scoped_subject_id(SessionIndex t, const std::string& raw_id,
                              bool cross_session_subjects) {
  if (cross_session_subjects) return raw_id;
  return "s" + std::to_string(t) + ":" + raw_id;
}

}  // namespace cdil
