#include "cdil/rch.hpp"

#include "cdil/errors.hpp"
#include "cdil/random.hpp"
#include "cdil/text.hpp"

#include <istream>
#include <ostream>

namespace cdil {

RemappableHead::RemappableHead(Eigen::Index feature_dim) : dim_(feature_dim) {
  if (dim_ < 1) throw ConfigError("head feature dimension must be positive");
}

SessionIndex RemappableHead::add_session(const ClassSet& label_set, const HeadInit& init) {
  if (label_set.empty()) throw ConfigError("cannot add a head group with an empty label set");
  const auto t = static_cast<SessionIndex>(groups_.size() + 1);
  HeadGroup g{t, {}};
  Xoshiro256 rng(derive_seed(init.seed, "head-init", {static_cast<std::uint64_t>(t)}));
  for (ClassIndex c : label_set) {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(dim_);
    if (init.kind == HeadInit::Kind::gaussian)
      for (Eigen::Index j = 0; j < dim_; ++j) w[j] = init.stddev * rng.normal();
    g.class_rows.emplace(c, std::move(w));
    known_.insert(c);
    class_sessions_[c].insert(t);
  }
  groups_.push_back(std::move(g));
  remapped_.reset();
  return t;
}

const HeadGroup& RemappableHead::group(SessionIndex t) const {
  if (t < 1 || static_cast<std::size_t>(t) > groups_.size())
    throw std::out_of_range("no head group for session " + std::to_string(t));
  return groups_[static_cast<std::size_t>(t - 1)];
}

HeadGroup& RemappableHead::mutable_group(SessionIndex t) {
  return const_cast<HeadGroup&>(std::as_const(*this).group(t));
}

Eigen::Index RemappableHead::row_of(ClassIndex c) const {
  auto it = known_.find(c);
  if (it == known_.end()) throw LookupError("class " + std::to_string(c) + " has no head");
  return static_cast<Eigen::Index>(std::distance(known_.begin(), it));
}

const Eigen::VectorXd& RemappableHead::row(SessionIndex t, ClassIndex c) const {
  const auto& g = group(t);
  auto it = g.class_rows.find(c);
  if (it == g.class_rows.end())
    throw LookupError("session " + std::to_string(t) + " has no head row for class " +
                      std::to_string(c));
  return it->second;
}

void RemappableHead::check_dim(Eigen::Index n, const char* what) const {
  if (n != dim_)
    throw ShapeError(std::string(what) + " has length " + std::to_string(n) + ", head expects " +
                     std::to_string(dim_));
}

void RemappableHead::set_row(SessionIndex t, ClassIndex c,
                             const Eigen::Ref<const Eigen::VectorXd>& w) {
  check_dim(w.size(), "head row");
  const_cast<Eigen::VectorXd&>(row(t, c)) = w;
  remapped_.reset();
}

void RemappableHead::add_to_row(SessionIndex t, ClassIndex c,
                                const Eigen::Ref<const Eigen::VectorXd>& delta) {
  check_dim(delta.size(), "head update");
  const_cast<Eigen::VectorXd&>(row(t, c)) += delta;
  remapped_.reset();
}

const Eigen::MatrixXd& RemappableHead::remap() const {
  if (remapped_) return *remapped_;
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(known_.size()), dim_);
  // Sessions are summed in ascending order so results are reproducible.
  for (const auto& g : groups_)
    for (const auto& [c, r] : g.class_rows) w.row(row_of(c)) += r.transpose();
  remapped_ = std::move(w);
  return *remapped_;
}

Eigen::VectorXd RemappableHead::logits(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  check_dim(x.size(), "feature vector");
  if (groups_.empty()) throw ProtocolError("head has no session groups");
  return remap() * x;
}

Eigen::VectorXd RemappableHead::predict_proba(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  return softmax(logits(x));
}

ClassIndex RemappableHead::predict(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  const auto p = predict_proba(x);
  const auto order = class_order();
  return order[static_cast<std::size_t>(argmax(p))];
}

void RemappableHead::write_csv(std::ostream& os, const LabelRegistry& registry) const {
  os << "session,class";
  for (Eigen::Index j = 0; j < dim_; ++j) os << ",w" << j;
  os << '\n';
  for (const auto& g : groups_)
    for (const auto& [c, r] : g.class_rows) {
      os << g.session_index << ',' << registry.name_of(c);
      for (Eigen::Index j = 0; j < dim_; ++j) os << ',' << text::format_double(r[j]);
      os << '\n';
    }
}

RemappableHead RemappableHead::read_csv(std::istream& is, const LabelRegistry& registry,
                                        const std::string& source) {
  std::string line;
  if (!std::getline(is, line)) throw LoadError(source, 1, "header", "missing header line");
  const auto header = text::split_csv(text::trim(line));
  if (header.size() < 3 || header[0] != "session" || header[1] != "class")
    throw LoadError(source, 1, "header", "expected 'session,class,w0,...'");
  const auto d = static_cast<Eigen::Index>(header.size() - 2);

  // Collect rows per session first, then rebuild via add_session.
  std::vector<std::map<ClassIndex, Eigen::VectorXd>> sessions;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    const auto trimmed = text::trim(line);
    if (trimmed.empty()) continue;
    const auto fields = text::split_csv(trimmed);
    if (static_cast<Eigen::Index>(fields.size()) != d + 2)
      throw LoadError(source, lineno, "row", "expected " + std::to_string(d + 2) + " columns");
    long long t = 0;
    if (!text::parse_int(fields[0], t) || t < 1)
      throw LoadError(source, lineno, "session", "not a positive integer");
    if (static_cast<std::size_t>(t) < sessions.size() ||
        static_cast<std::size_t>(t) > sessions.size() + 1)
      throw LoadError(source, lineno, "session", "sessions must appear in order 1..n");
    if (static_cast<std::size_t>(t) == sessions.size() + 1) sessions.emplace_back();
    const auto c = registry.find(std::string(fields[1]));
    if (!c) throw LoadError(source, lineno, "class", "unknown class '" + std::string(fields[1]) + "'");
    Eigen::VectorXd w(d);
    for (Eigen::Index j = 0; j < d; ++j)
      if (!text::parse_double(fields[static_cast<std::size_t>(j + 2)], w[j]))
        throw LoadError(source, lineno, "w" + std::to_string(j), "not a finite number");
    if (!sessions.back().emplace(*c, std::move(w)).second)
      throw LoadError(source, lineno, "class", "duplicate row for class in session");
  }

  RemappableHead head(d);
  for (const auto& rows : sessions) {
    ClassSet labels;
    for (const auto& [c, w] : rows) labels.insert(c);
    const auto t = head.add_session(labels);
    for (const auto& [c, w] : rows) head.set_row(t, c, w);
  }
  return head;
}

Eigen::VectorXd softmax(const Eigen::Ref<const Eigen::VectorXd>& logits) {
  if (logits.size() == 0) return {};
  const double m = logits.maxCoeff();
  Eigen::VectorXd e = (logits.array() - m).exp().matrix();
  return e / e.sum();
}

Eigen::Index argmax(const Eigen::Ref<const Eigen::VectorXd>& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

}  // namespace cdil
