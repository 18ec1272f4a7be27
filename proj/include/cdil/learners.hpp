#pragma once

#include "cdil/core.hpp"
#include "cdil/rch.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cdil {

enum class LearnerKind { finetune, prototype };
enum class Nonlinearity { relu, identity };
/// Which sessions may update the finetune learner's d x d feature map.
enum class FeatureMapMode { frozen, first_session, all_sessions };
/// Classes the finetune cross-entropy normalises over during session t:
/// only l^(t), or the whole cumulative label space L_t.
enum class FinetuneLoss { session, cumulative };
/// Per-session Gram statistics (summed through the head) or one global Gram.
enum class PrototypeStats { per_session, cumulative };

std::string_view to_string(LearnerKind k) noexcept;
std::string_view to_string(Nonlinearity n) noexcept;
std::string_view to_string(FeatureMapMode m) noexcept;
std::string_view to_string(PrototypeStats s) noexcept;
std::string_view to_string(FinetuneLoss l) noexcept;
LearnerKind parse_learner_kind(std::string_view s);
Nonlinearity parse_nonlinearity(std::string_view s);
FeatureMapMode parse_feature_map_mode(std::string_view s);
PrototypeStats parse_prototype_stats(std::string_view s);
FinetuneLoss parse_finetune_loss(std::string_view s);

struct LearnerConfig {
  // Linear models train at a much larger step than the 2e-5 used for
  // pretrained deep backbones; the 60/10 epoch schedule is kept.
  double learning_rate = 0.05;
  int batch_size = 16;
  int epochs_first = 60;
  int epochs_later = 10;
  FeatureMapMode feature_map = FeatureMapMode::all_sessions;
  FinetuneLoss finetune_loss = FinetuneLoss::cumulative;
  HeadInit::Kind head_init = HeadInit::Kind::zeros;
  double head_init_stddev = 0.01;
  /// Appends a constant-1 input feature in place of a head bias.
  bool bias_feature = false;

  double ridge_lambda = 1.0;
  /// 0 selects 4 * input dimension.
  int projection_dim = 0;
  Nonlinearity nonlinearity = Nonlinearity::relu;
  PrototypeStats prototype_stats = PrototypeStats::per_session;

  /// Throws ConfigError on non-positive counts, rates or lambda.
  void validate() const;
};

/// Incremental learner contract driven by the pipeline. update() receives only
/// session t's training slice; afterwards the learner classifies all of L_t.
class Learner {
 public:
  virtual ~Learner() = default;

  /// Adds the session-t head group for session_labels and trains it.
  /// Throws ProtocolError on an empty split or if the learner's known classes
  /// do not equal cumulative_labels afterwards.
  virtual void update(std::span<const Sample> train, const ClassSet& session_labels,
                      const ClassSet& cumulative_labels) = 0;

  virtual Eigen::VectorXd predict_proba(const Eigen::Ref<const Eigen::VectorXd>& x) const = 0;
  virtual ClassIndex predict(const Eigen::Ref<const Eigen::VectorXd>& x) const = 0;
  virtual const RemappableHead& head() const = 0;
  virtual LearnerKind kind() const noexcept = 0;

  const ClassSet& known_classes() const { return head().known_classes(); }
  std::size_t sessions_seen() const { return head().session_count(); }
};

/// Plain mini-batch cross-entropy descent through the remappable head, with an
/// optional linear feature map standing in for backbone fine-tuning. Only the
/// current session's head group is trained; earlier groups stay frozen.
class FinetuneLearner final : public Learner {
 public:
  struct Gradient {
    double loss = 0.0;
    std::map<ClassIndex, Eigen::VectorXd> head;  // rows of the current session
    Eigen::MatrixXd feature_map;                  // empty when the map is frozen
  };

  FinetuneLearner(Eigen::Index input_dim, LearnerConfig cfg, std::uint64_t seed);

  void update(std::span<const Sample> train, const ClassSet& session_labels,
              const ClassSet& cumulative_labels) override;
  Eigen::VectorXd predict_proba(const Eigen::Ref<const Eigen::VectorXd>& x) const override;
  ClassIndex predict(const Eigen::Ref<const Eigen::VectorXd>& x) const override;
  const RemappableHead& head() const override { return head_; }
  LearnerKind kind() const noexcept override { return LearnerKind::finetune; }

  /// Opens the next session's head group without training it.
  SessionIndex begin_session(const ClassSet& session_labels);
  /// One pass over train in seeded mini-batch order; returns the mean batch loss.
  double train_epoch(std::span<const Sample> train, int epoch);
  /// Mean cross-entropy over the classes selected by finetune_loss.
  double loss(std::span<const Sample> batch) const;
  /// Analytic gradient of loss(batch) w.r.t. the trainable parameters.
  Gradient gradient(std::span<const Sample> batch) const;
  /// Applies params -= learning_rate * g.
  void apply(const Gradient& g);

  const Eigen::MatrixXd& feature_map() const noexcept { return map_; }
  Eigen::MatrixXd& mutable_feature_map() noexcept { return map_; }
  RemappableHead& mutable_head() noexcept { return head_; }
  bool feature_map_trainable() const noexcept;
  Eigen::VectorXd transform(const Eigen::Ref<const Eigen::VectorXd>& x) const;

 private:
  Eigen::VectorXd augment(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  /// Remapped rows entering the softmax of the loss.
  std::vector<Eigen::Index> loss_rows() const;

  Eigen::Index input_dim_;
  LearnerConfig cfg_;
  std::uint64_t seed_;
  Eigen::MatrixXd map_;
  RemappableHead head_;
};

/// Frozen random-feature embedding with class statistics solved by ridge
/// regression. The head lives in the projected space.
class PrototypeLearner final : public Learner {
 public:
  PrototypeLearner(Eigen::Index input_dim, LearnerConfig cfg, std::uint64_t seed);

  void update(std::span<const Sample> train, const ClassSet& session_labels,
              const ClassSet& cumulative_labels) override;
  Eigen::VectorXd predict_proba(const Eigen::Ref<const Eigen::VectorXd>& x) const override;
  ClassIndex predict(const Eigen::Ref<const Eigen::VectorXd>& x) const override;
  const RemappableHead& head() const override { return head_; }
  LearnerKind kind() const noexcept override { return LearnerKind::prototype; }

  /// phi(P x) on the (optionally bias-augmented) input.
  Eigen::VectorXd embed(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  const Eigen::MatrixXd& projection() const noexcept { return projection_; }
  /// FNV-1a over the projection's bytes; constant for the learner's lifetime.
  std::uint64_t projection_hash() const;
  /// Gram statistics G of session t (or the running global one in cumulative mode).
  const Eigen::MatrixXd& gram(SessionIndex t) const;
  /// Class sums C of session t, one column per class in class_columns(t).
  const Eigen::MatrixXd& class_sums(SessionIndex t) const;
  const std::vector<ClassIndex>& class_columns(SessionIndex t) const;

 private:
  struct SessionStats {
    Eigen::MatrixXd gram;
    Eigen::MatrixXd sums;
    std::vector<ClassIndex> columns;
  };

  Eigen::Index input_dim_;
  LearnerConfig cfg_;
  Eigen::MatrixXd projection_;
  RemappableHead head_;
  std::vector<SessionStats> stats_;
  // Running totals for PrototypeStats::cumulative.
  Eigen::MatrixXd global_gram_;
  std::map<ClassIndex, Eigen::VectorXd> global_sums_;
};

/// Solves (G + lambda I) W = C by Cholesky. Throws NumericalError if the
/// residual exceeds 1e-8 * (||G|| + lambda) * ||W|| (Frobenius norms).
Eigen::MatrixXd ridge_solve(const Eigen::Ref<const Eigen::MatrixXd>& gram,
                            const Eigen::Ref<const Eigen::MatrixXd>& targets, double lambda);

/// Order-insensitive accumulation of sum_i h_i h_i^T and per-class sum_i h_i
/// (Neumaier compensated summation per entry).
class CompensatedStats {
 public:
  explicit CompensatedStats(Eigen::Index dim);
  void add(const Eigen::Ref<const Eigen::VectorXd>& h, ClassIndex label);
  Eigen::MatrixXd gram() const;
  /// One column per class in ascending class order.
  Eigen::MatrixXd sums(const std::vector<ClassIndex>& columns) const;
  std::vector<ClassIndex> classes() const;

 private:
  Eigen::Index dim_;
  Eigen::MatrixXd gram_sum_, gram_comp_;
  std::map<ClassIndex, std::pair<Eigen::VectorXd, Eigen::VectorXd>> class_sums_;
};

std::unique_ptr<Learner> make_learner(LearnerKind kind, Eigen::Index input_dim,
                                      const LearnerConfig& cfg, std::uint64_t seed);

}  // namespace cdil
