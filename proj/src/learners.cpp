#include "cdil/learners.hpp"

#include "cdil/errors.hpp"
#include "cdil/random.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <numeric>

namespace cdil {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

void check_protocol_after_add(const RemappableHead& head, const ClassSet& cumulative) {
  if (head.known_classes() != cumulative)
    throw ProtocolError("learner label space after session " +
                        std::to_string(head.session_count()) +
                        " does not match the cumulative label space");
}

void check_split(std::span<const Sample> train, Eigen::Index dim) {
  if (train.empty())
    throw ProtocolError("empty training split (a bound fold consumed the whole session)");
  for (const auto& s : train)
    if (s.features.size() != dim)
      throw ShapeError("sample '" + s.sample_id + "' has " + std::to_string(s.features.size()) +
                       " features, learner expects " + std::to_string(dim));
}

// Neumaier step: sum += v, comp collects the lost low-order bits.
inline void neumaier(double& sum, double& comp, double v) {
  const double t = sum + v;
  if (std::abs(sum) >= std::abs(v))
    comp += (sum - t) + v;
  else
    comp += (v - t) + sum;
  sum = t;
}

}  // namespace

std::string_view to_string(LearnerKind k) noexcept {
  return k == LearnerKind::finetune ? "finetune" : "prototype";
}
std::string_view to_string(Nonlinearity n) noexcept {
  return n == Nonlinearity::relu ? "relu" : "identity";
}
std::string_view to_string(FeatureMapMode m) noexcept {
  switch (m) {
    case FeatureMapMode::frozen: return "frozen";
    case FeatureMapMode::first_session: return "first_session";
    case FeatureMapMode::all_sessions: return "all_sessions";
  }
  return "all_sessions";
}
std::string_view to_string(PrototypeStats s) noexcept {
  return s == PrototypeStats::per_session ? "per_session" : "cumulative";
}
std::string_view to_string(FinetuneLoss l) noexcept {
  return l == FinetuneLoss::session ? "session" : "cumulative";
}

LearnerKind parse_learner_kind(std::string_view s) {
  const auto v = lower(s);
  if (v == "finetune") return LearnerKind::finetune;
  if (v == "prototype") return LearnerKind::prototype;
  throw ConfigError("unknown learner '" + std::string(s) + "' (expected finetune or prototype)");
}
Nonlinearity parse_nonlinearity(std::string_view s) {
  const auto v = lower(s);
  if (v == "relu") return Nonlinearity::relu;
  if (v == "identity") return Nonlinearity::identity;
  throw ConfigError("unknown nonlinearity '" + std::string(s) + "'");
}
FeatureMapMode parse_feature_map_mode(std::string_view s) {
  const auto v = lower(s);
  if (v == "frozen") return FeatureMapMode::frozen;
  if (v == "first_session") return FeatureMapMode::first_session;
  if (v == "all_sessions") return FeatureMapMode::all_sessions;
  throw ConfigError("unknown feature map mode '" + std::string(s) + "'");
}
FinetuneLoss parse_finetune_loss(std::string_view s) {
  const auto v = lower(s);
  if (v == "session") return FinetuneLoss::session;
  if (v == "cumulative") return FinetuneLoss::cumulative;
  throw ConfigError("unknown finetune loss '" + std::string(s) + "' (expected session or cumulative)");
}
PrototypeStats parse_prototype_stats(std::string_view s) {
  const auto v = lower(s);
  if (v == "per_session" || v == "per-session") return PrototypeStats::per_session;
  if (v == "cumulative") return PrototypeStats::cumulative;
  throw ConfigError("unknown prototype statistics mode '" + std::string(s) + "'");
}

void LearnerConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw ConfigError("learning_rate must be a finite non-negative number");
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
  if (epochs_first < 0 || epochs_later < 0) throw ConfigError("epoch counts must be >= 0");
  if (!(ridge_lambda > 0.0)) throw ConfigError("ridge_lambda must be positive");
  if (projection_dim < 0) throw ConfigError("projection_dim must be >= 0");
  if (!(head_init_stddev >= 0.0)) throw ConfigError("head_init_stddev must be >= 0");
}

// ---------------------------------------------------------------------------
// FinetuneLearner

FinetuneLearner::FinetuneLearner(Eigen::Index input_dim, LearnerConfig cfg, std::uint64_t seed)
    : input_dim_(input_dim),
      cfg_(cfg),
      seed_(seed),
      map_(Eigen::MatrixXd::Identity(input_dim + (cfg.bias_feature ? 1 : 0),
                                     input_dim + (cfg.bias_feature ? 1 : 0))),
      head_(input_dim + (cfg.bias_feature ? 1 : 0)) {
  cfg_.validate();
}

Eigen::VectorXd FinetuneLearner::augment(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != input_dim_)
    throw ShapeError("feature vector has length " + std::to_string(x.size()) + ", expected " +
                     std::to_string(input_dim_));
  if (!cfg_.bias_feature) return x;
  Eigen::VectorXd u(input_dim_ + 1);
  u << x, 1.0;
  return u;
}

Eigen::VectorXd FinetuneLearner::transform(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  return map_ * augment(x);
}

bool FinetuneLearner::feature_map_trainable() const noexcept {
  switch (cfg_.feature_map) {
    case FeatureMapMode::frozen: return false;
    case FeatureMapMode::first_session: return head_.session_count() == 1;
    case FeatureMapMode::all_sessions: return true;
  }
  return false;
}

SessionIndex FinetuneLearner::begin_session(const ClassSet& session_labels) {
  const auto t = static_cast<std::uint64_t>(head_.session_count() + 1);
  HeadInit init{cfg_.head_init, cfg_.head_init_stddev, derive_seed(seed_, "finetune-head", {t})};
  return head_.add_session(session_labels, init);
}

std::vector<Eigen::Index> FinetuneLearner::loss_rows() const {
  std::vector<Eigen::Index> rows;
  if (cfg_.finetune_loss == FinetuneLoss::cumulative) {
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(head_.known_classes().size()); ++i)
      rows.push_back(i);
  } else {
    const auto t = static_cast<SessionIndex>(head_.session_count());
    for (const auto& [c, r] : head_.group(t).class_rows) rows.push_back(head_.row_of(c));
  }
  return rows;
}

FinetuneLearner::Gradient FinetuneLearner::gradient(std::span<const Sample> batch) const {
  if (batch.empty()) throw ProtocolError("gradient of an empty batch");
  const auto t = static_cast<SessionIndex>(head_.session_count());
  const auto& rows = head_.group(t).class_rows;
  const auto active = loss_rows();
  const Eigen::MatrixXd w = head_.remap()(active, Eigen::all);
  const bool map_trainable = feature_map_trainable();

  // Position of each current-session class among the active rows.
  std::map<ClassIndex, Eigen::Index> pos;
  for (const auto& [c, r] : rows)
    pos[c] = std::find(active.begin(), active.end(), head_.row_of(c)) - active.begin();

  Gradient g;
  for (const auto& [c, r] : rows) g.head.emplace(c, Eigen::VectorXd::Zero(r.size()));
  if (map_trainable) g.feature_map = Eigen::MatrixXd::Zero(map_.rows(), map_.cols());

  for (const auto& s : batch) {
    const Eigen::VectorXd u = augment(s.features);
    const Eigen::VectorXd h = map_ * u;
    Eigen::VectorXd p = softmax(w * h);
    const auto it = std::find(active.begin(), active.end(), head_.row_of(s.label));
    if (it == active.end())
      throw ProtocolError("training label " + std::to_string(s.label) +
                          " is outside the classes of the loss");
    const auto y = it - active.begin();
    g.loss -= std::log(std::max(p[y], std::numeric_limits<double>::min()));
    p[y] -= 1.0;  // dL/dz
    for (auto& [c, gc] : g.head) gc += p[pos.at(c)] * h;
    if (map_trainable) g.feature_map.noalias() += (w.transpose() * p) * u.transpose();
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  g.loss *= inv;
  for (auto& [c, gc] : g.head) gc *= inv;
  if (map_trainable) g.feature_map *= inv;
  return g;
}

double FinetuneLearner::loss(std::span<const Sample> batch) const {
  if (batch.empty()) throw ProtocolError("loss of an empty batch");
  const auto active = loss_rows();
  const Eigen::MatrixXd w = head_.remap()(active, Eigen::all);
  double total = 0.0;
  for (const auto& s : batch) {
    const Eigen::VectorXd z = w * transform(s.features);
    const auto y = std::find(active.begin(), active.end(), head_.row_of(s.label)) - active.begin();
    if (y == static_cast<std::ptrdiff_t>(active.size()))
      throw ProtocolError("label " + std::to_string(s.label) + " is outside the classes of the loss");
    const double m = z.maxCoeff();
    const double lse = m + std::log((z.array() - m).exp().sum());
    total += lse - z[y];
  }
  return total / static_cast<double>(batch.size());
}

void FinetuneLearner::apply(const Gradient& g) {
  const auto t = static_cast<SessionIndex>(head_.session_count());
  for (const auto& [c, gc] : g.head) head_.add_to_row(t, c, -cfg_.learning_rate * gc);
  if (g.feature_map.size() != 0) map_.noalias() -= cfg_.learning_rate * g.feature_map;
}

double FinetuneLearner::train_epoch(std::span<const Sample> train, int epoch) {
  const auto t = static_cast<std::uint64_t>(head_.session_count());
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Xoshiro256 rng(derive_seed(seed_, "batch-order", {t, static_cast<std::uint64_t>(epoch)}));
  shuffle(std::span<std::size_t>(order), rng);

  const auto bs = static_cast<std::size_t>(cfg_.batch_size);
  std::vector<Sample> batch;
  batch.reserve(bs);
  double loss_sum = 0.0;
  std::size_t batches = 0;
  for (std::size_t start = 0; start < order.size(); start += bs) {
    batch.clear();
    for (std::size_t i = start; i < std::min(order.size(), start + bs); ++i)
      batch.push_back(train[order[i]]);
    const auto g = gradient(batch);
    if (!std::isfinite(g.loss))
      throw NumericalError("non-finite finetune loss in session " + std::to_string(t) +
                           ", epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batches + 1) + " (learning_rate " +
                           std::to_string(cfg_.learning_rate) + ")");
    apply(g);
    loss_sum += g.loss;
    ++batches;
  }
  return loss_sum / static_cast<double>(batches);
}

void FinetuneLearner::update(std::span<const Sample> train, const ClassSet& session_labels,
                             const ClassSet& cumulative_labels) {
  check_split(train, input_dim_);
  begin_session(session_labels);
  check_protocol_after_add(head_, cumulative_labels);
  const int epochs = head_.session_count() == 1 ? cfg_.epochs_first : cfg_.epochs_later;
  for (int e = 1; e <= epochs; ++e) train_epoch(train, e);
}

Eigen::VectorXd FinetuneLearner::predict_proba(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  return head_.predict_proba(transform(x));
}

ClassIndex FinetuneLearner::predict(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  return head_.predict(transform(x));
}

// ---------------------------------------------------------------------------
// Ridge solve and compensated statistics

Eigen::MatrixXd ridge_solve(const Eigen::Ref<const Eigen::MatrixXd>& gram,
                            const Eigen::Ref<const Eigen::MatrixXd>& targets, double lambda) {
  if (gram.rows() != gram.cols() || gram.rows() != targets.rows())
    throw ShapeError("ridge solve: Gram is " + std::to_string(gram.rows()) + "x" +
                     std::to_string(gram.cols()) + ", targets have " +
                     std::to_string(targets.rows()) + " rows");
  if (!(lambda > 0.0)) throw ConfigError("ridge lambda must be positive");
  Eigen::MatrixXd a = gram;
  a.diagonal().array() += lambda;
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success)
    throw NumericalError("ridge solve: Cholesky factorisation failed");
  Eigen::MatrixXd w = llt.solve(targets);
  const double residual = (a * w - targets).norm();
  const double bound = 1e-8 * (gram.norm() + lambda) * w.norm();
  if (!std::isfinite(residual) || residual > bound)
    throw NumericalError("ridge solve residual " + std::to_string(residual) +
                         " exceeds tolerance " + std::to_string(bound));
  return w;
}

CompensatedStats::CompensatedStats(Eigen::Index dim)
    : dim_(dim),
      gram_sum_(Eigen::MatrixXd::Zero(dim, dim)),
      gram_comp_(Eigen::MatrixXd::Zero(dim, dim)) {}

void CompensatedStats::add(const Eigen::Ref<const Eigen::VectorXd>& h, ClassIndex label) {
  // Upper triangle only; gram() mirrors it.
  for (Eigen::Index j = 0; j < dim_; ++j) {
    const double hj = h[j];
    if (hj == 0.0) continue;
    for (Eigen::Index i = 0; i <= j; ++i) neumaier(gram_sum_(i, j), gram_comp_(i, j), h[i] * hj);
  }
  auto [it, fresh] = class_sums_.try_emplace(label);
  if (fresh) it->second = {Eigen::VectorXd::Zero(dim_), Eigen::VectorXd::Zero(dim_)};
  for (Eigen::Index i = 0; i < dim_; ++i) neumaier(it->second.first[i], it->second.second[i], h[i]);
}

Eigen::MatrixXd CompensatedStats::gram() const {
  Eigen::MatrixXd g = gram_sum_ + gram_comp_;
  g.triangularView<Eigen::StrictlyLower>() = g.transpose().triangularView<Eigen::StrictlyLower>();
  return g;
}

Eigen::MatrixXd CompensatedStats::sums(const std::vector<ClassIndex>& columns) const {
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(dim_, static_cast<Eigen::Index>(columns.size()));
  for (std::size_t k = 0; k < columns.size(); ++k)
    if (auto it = class_sums_.find(columns[k]); it != class_sums_.end())
      c.col(static_cast<Eigen::Index>(k)) = it->second.first + it->second.second;
  return c;
}

std::vector<ClassIndex> CompensatedStats::classes() const {
  std::vector<ClassIndex> out;
  for (const auto& [c, s] : class_sums_) out.push_back(c);
  return out;
}

// ---------------------------------------------------------------------------
// PrototypeLearner

namespace {

Eigen::Index projected_dim(Eigen::Index input_dim, const LearnerConfig& cfg) {
  return cfg.projection_dim > 0 ? cfg.projection_dim : 4 * input_dim;
}

}  // namespace

PrototypeLearner::PrototypeLearner(Eigen::Index input_dim, LearnerConfig cfg, std::uint64_t seed)
    : input_dim_(input_dim), cfg_(cfg), head_(projected_dim(input_dim, cfg)) {
  cfg_.validate();
  const Eigen::Index in = input_dim + (cfg_.bias_feature ? 1 : 0);
  const Eigen::Index m = projected_dim(input_dim, cfg_);
  projection_.resize(m, in);
  Xoshiro256 rng(derive_seed(seed, "projection"));
  const double scale = 1.0 / std::sqrt(static_cast<double>(in));
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < in; ++j) projection_(i, j) = scale * rng.normal();
  global_gram_ = Eigen::MatrixXd::Zero(m, m);
}

Eigen::VectorXd PrototypeLearner::embed(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != input_dim_)
    throw ShapeError("feature vector has length " + std::to_string(x.size()) + ", expected " +
                     std::to_string(input_dim_));
  Eigen::VectorXd h;
  if (cfg_.bias_feature) {
    Eigen::VectorXd u(input_dim_ + 1);
    u << x, 1.0;
    h = projection_ * u;
  } else {
    h = projection_ * x;
  }
  if (cfg_.nonlinearity == Nonlinearity::relu) h = h.cwiseMax(0.0);
  return h;
}

std::uint64_t PrototypeLearner::projection_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto* bytes = reinterpret_cast<const unsigned char*>(projection_.data());
  for (std::size_t i = 0; i < static_cast<std::size_t>(projection_.size()) * sizeof(double); ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

const Eigen::MatrixXd& PrototypeLearner::gram(SessionIndex t) const {
  if (t < 1 || static_cast<std::size_t>(t) > stats_.size())
    throw std::out_of_range("no statistics for session " + std::to_string(t));
  return stats_[static_cast<std::size_t>(t - 1)].gram;
}

const Eigen::MatrixXd& PrototypeLearner::class_sums(SessionIndex t) const {
  gram(t);
  return stats_[static_cast<std::size_t>(t - 1)].sums;
}

const std::vector<ClassIndex>& PrototypeLearner::class_columns(SessionIndex t) const {
  gram(t);
  return stats_[static_cast<std::size_t>(t - 1)].columns;
}

void PrototypeLearner::update(std::span<const Sample> train, const ClassSet& session_labels,
                              const ClassSet& cumulative_labels) {
  check_split(train, input_dim_);
  const SessionIndex t = head_.add_session(session_labels);
  check_protocol_after_add(head_, cumulative_labels);

  const Eigen::Index m = projection_.rows();
  CompensatedStats acc(m);
  for (const auto& s : train) {
    if (!session_labels.contains(s.label))
      throw ProtocolError("training sample '" + s.sample_id + "' carries a label outside l^(t)");
    acc.add(embed(s.features), s.label);
  }

  SessionStats st;
  st.columns.assign(session_labels.begin(), session_labels.end());
  st.gram = acc.gram();
  st.sums = acc.sums(st.columns);

  if (cfg_.prototype_stats == PrototypeStats::per_session) {
    const Eigen::MatrixXd w = ridge_solve(st.gram, st.sums, cfg_.ridge_lambda);
    for (std::size_t k = 0; k < st.columns.size(); ++k)
      head_.set_row(t, st.columns[k], w.col(static_cast<Eigen::Index>(k)));
  } else {
    // One global ridge solution; session-t rows absorb the difference so the
    // remapped weight of every class in l^(t) equals it. Classes absent from
    // session t keep their earlier remapped weight.
    global_gram_ += st.gram;
    for (std::size_t k = 0; k < st.columns.size(); ++k) {
      auto [it, fresh] = global_sums_.try_emplace(st.columns[k], Eigen::VectorXd::Zero(m));
      it->second += st.sums.col(static_cast<Eigen::Index>(k));
    }
    std::vector<ClassIndex> all;
    Eigen::MatrixXd c(m, static_cast<Eigen::Index>(global_sums_.size()));
    for (const auto& [cls, v] : global_sums_) {
      c.col(static_cast<Eigen::Index>(all.size())) = v;
      all.push_back(cls);
    }
    const Eigen::MatrixXd w = ridge_solve(global_gram_, c, cfg_.ridge_lambda);
    for (std::size_t k = 0; k < all.size(); ++k) {
      const ClassIndex cls = all[k];
      if (!session_labels.contains(cls)) continue;
      Eigen::VectorXd row = w.col(static_cast<Eigen::Index>(k));
      for (SessionIndex s : head_.class_sessions().at(cls))
        if (s != t) row -= head_.row(s, cls);
      head_.set_row(t, cls, row);
    }
    st.gram = global_gram_;
  }
  stats_.push_back(std::move(st));
}

Eigen::VectorXd PrototypeLearner::predict_proba(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  return head_.predict_proba(embed(x));
}

ClassIndex PrototypeLearner::predict(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  return head_.predict(embed(x));
}

std::unique_ptr<Learner> make_learner(LearnerKind kind, Eigen::Index input_dim,
                                      const LearnerConfig& cfg, std::uint64_t seed) {
  if (kind == LearnerKind::finetune) return std::make_unique<FinetuneLearner>(input_dim, cfg, seed);
  return std::make_unique<PrototypeLearner>(input_dim, cfg, seed);
}

}  // namespace cdil
