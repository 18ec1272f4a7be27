#pragma once

// Remappable classification head.
//
// Each session t contributes an independent head group with one weight row
// per class of its label set l^(t). Rows of the same class across sessions
// are summed into a single remapped weight,
//
//     final_c = sum_{t in T_c} head_t[c],
//
// and prediction is softmax over z_c = x . final_c across every known class.
// There is no bias; callers that want one append a constant-1 feature.

#include "cdil/core.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace cdil {

struct HeadInit {
  enum class Kind { zeros, gaussian };
  Kind kind = Kind::zeros;
  double stddev = 0.01;
  std::uint64_t seed = 0;
};

struct HeadGroup {
  SessionIndex session_index = 0;
  std::map<ClassIndex, Eigen::VectorXd> class_rows;
};

class RemappableHead {
 public:
  explicit RemappableHead(Eigen::Index feature_dim);

  /// Appends the head group for the next session (index = groups + 1).
  /// Throws ConfigError on an empty label set.
  SessionIndex add_session(const ClassSet& label_set, const HeadInit& init = {});

  Eigen::Index feature_dim() const noexcept { return dim_; }
  std::size_t session_count() const noexcept { return groups_.size(); }
  const std::vector<HeadGroup>& groups() const noexcept { return groups_; }
  const HeadGroup& group(SessionIndex t) const;
  const ClassSet& known_classes() const noexcept { return known_; }
  const std::map<ClassIndex, std::set<SessionIndex>>& class_sessions() const noexcept {
    return class_sessions_;
  }
  /// Known classes in remap row order (ascending index).
  std::vector<ClassIndex> class_order() const { return {known_.begin(), known_.end()}; }
  /// Position of class c among the remapped rows; throws LookupError.
  Eigen::Index row_of(ClassIndex c) const;

  /// Read-only row H_t^c.
  const Eigen::VectorXd& row(SessionIndex t, ClassIndex c) const;
  /// Writes H_t^c and invalidates the remap cache.
  void set_row(SessionIndex t, ClassIndex c, const Eigen::Ref<const Eigen::VectorXd>& w);
  /// Adds delta to H_t^c and invalidates the remap cache.
  void add_to_row(SessionIndex t, ClassIndex c, const Eigen::Ref<const Eigen::VectorXd>& delta);

  /// Remapped matrix: one row per known class, ordered by class index.
  /// Cached until the next head write.
  const Eigen::MatrixXd& remap() const;

  /// Logits z_c = x . final_c over known classes; throws ShapeError.
  Eigen::VectorXd logits(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  Eigen::VectorXd predict_proba(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  /// Argmax of predict_proba; ties resolve to the lowest class index.
  ClassIndex predict(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  /// CSV dump, one line per head row: session,class,w0,...,w{d-1}.
  void write_csv(std::ostream& os, const LabelRegistry& registry) const;
  /// Inverse of write_csv. Sessions must appear in order 1..n.
  static RemappableHead read_csv(std::istream& is, const LabelRegistry& registry,
                                 const std::string& source = "<stream>");

 private:
  HeadGroup& mutable_group(SessionIndex t);
  void check_dim(Eigen::Index n, const char* what) const;

  Eigen::Index dim_;
  std::vector<HeadGroup> groups_;
  ClassSet known_;
  std::map<ClassIndex, std::set<SessionIndex>> class_sessions_;
  mutable std::optional<Eigen::MatrixXd> remapped_;
};

/// Numerically stable softmax (max-logit subtraction).
Eigen::VectorXd softmax(const Eigen::Ref<const Eigen::VectorXd>& logits);

/// First index of the maximum; lowest index wins ties.
Eigen::Index argmax(const Eigen::Ref<const Eigen::VectorXd>& v);

}  // namespace cdil
