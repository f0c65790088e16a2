#include "bvrvi/operators.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace bvrvi {

namespace {

Eigen::VectorXd cumulative(const Eigen::VectorXd& p) {
  Eigen::VectorXd cdf(p.size());
  double acc = 0.0;
  for (Index i = 0; i < p.size(); ++i) {
    acc += p[i];
    cdf[i] = acc;
  }
  return cdf;
}

// Inverse-CDF lookup that never lands on a zero-probability index.
Index draw_index(const Eigen::VectorXd& p, const Eigen::VectorXd& cdf, double u) {
  const double target = u * cdf[cdf.size() - 1];
  const double* begin = cdf.data();
  const double* end = begin + cdf.size();
  Index idx = static_cast<Index>(std::upper_bound(begin, end, target) - begin);
  if (idx >= cdf.size()) idx = cdf.size() - 1;
  while (idx > 0 && p[idx] <= 0.0) --idx;
  return idx;
}

void check_simplex_weights(const Eigen::VectorXd& w, const char* what) {
  if (w.size() == 0) throw ParameterError(std::string(what) + ": empty weight vector");
  if (!w.allFinite() || w.minCoeff() < 0.0) {
    throw ParameterError(std::string(what) + ": weights must be finite and nonnegative");
  }
  if (std::abs(w.sum() - 1.0) > 1e-12) {
    throw ParameterError(std::string(what) + ": weights must sum to 1");
  }
}

// l1-normalized |a - b|; empty result when the difference vanishes.
std::optional<Eigen::VectorXd> abs_difference_weights(const Eigen::Ref<const Eigen::VectorXd>& a,
                                                      const Eigen::Ref<const Eigen::VectorXd>& b) {
  Eigen::VectorXd d = (a - b).cwiseAbs();
  const double total = d.sum();
  if (!(total > 0.0)) return std::nullopt;
  return Eigen::VectorXd(d / total);
}

Eigen::VectorXd uniform_weights(Index n) {
  return Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
}

[[noreturn]] void zero_probability_draw() {
  throw std::logic_error("component drawn with zero sampling probability");
}

}  // namespace

// ---------------------------------------------------------------------------
// SampleDistribution

SampleDistribution::SampleDistribution(Eigen::VectorXd rows, Eigen::VectorXd cols, Flags flags)
    : rows_(std::move(rows)), cols_(std::move(cols)), flags_(flags) {
  check_simplex_weights(rows_, "row probabilities");
  check_simplex_weights(cols_, "column probabilities");
  row_cdf_ = cumulative(rows_);
  col_cdf_ = cumulative(cols_);
}

IndexPair SampleDistribution::draw(Rng& rng) const {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double ur = unit(rng);
  const double uc = unit(rng);
  return {draw_index(rows_, row_cdf_, ur), draw_index(cols_, col_cdf_, uc)};
}

std::vector<IndexPair> sample_batch(const SampleDistribution& dist, std::size_t b, Rng& rng) {
  if (b == 0) throw ParameterError("batch size must be positive");
  if (dist.degenerate()) throw ParameterError("cannot sample from a degenerate distribution");
  std::vector<IndexPair> batch;
  batch.reserve(b);
  for (std::size_t j = 0; j < b; ++j) batch.push_back(dist.draw(rng));
  return batch;
}

std::string_view to_string(MonotonicityClass c) {
  switch (c) {
    case MonotonicityClass::Monotone:
      return "monotone";
    case MonotonicityClass::WeakMinty:
      return "non-monotone-weak-minty";
    case MonotonicityClass::StronglyPseudomonotone:
      return "strongly-pseudomonotone";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// FiniteSumProblem

FiniteSumProblem::FiniteSumProblem(GeometrySpec geometry, std::uint64_t component_count,
                                   double lipschitz, double mean_lipschitz,
                                   MonotonicityClass monotonicity)
    : geometry_(std::move(geometry)),
      component_count_(component_count),
      lipschitz_(lipschitz),
      mean_lipschitz_(mean_lipschitz),
      monotonicity_(monotonicity) {
  if (component_count_ == 0) throw ParameterError("finite sum needs at least one component");
}

DualVector FiniteSumProblem::full_eval(const BlockVector& z, OracleCounters& counters) const {
  require_same_layout(layout(), z.layout(), "full_eval");
  counters.full_evals += 1;
  counters.component_calls += component_count_;
  return evaluate(z);
}

DualVector FiniteSumProblem::diagnostic_eval(const BlockVector& z, OracleCounters& counters) const {
  require_same_layout(layout(), z.layout(), "diagnostic_eval");
  counters.diagnostic_calls += 1;
  return evaluate(z);
}

DualVector FiniteSumProblem::component_eval(IndexPair xi, const BlockVector& z,
                                            const SampleDistribution& dist,
                                            OracleCounters& counters) const {
  require_same_layout(layout(), z.layout(), "component_eval");
  if (!(dist.probability(xi) > 0.0)) zero_probability_draw();
  counters.component_calls += 1;
  return evaluate_component(xi, z, dist);
}

DualVector FiniteSumProblem::component_difference(IndexPair xi, const BlockVector& x,
                                                  const BlockVector& y,
                                                  const SampleDistribution& dist,
                                                  OracleCounters& counters) const {
  require_same_layout(layout(), x.layout(), "component_difference");
  require_same_layout(layout(), y.layout(), "component_difference");
  if (!(dist.probability(xi) > 0.0)) zero_probability_draw();
  counters.component_calls += 2;
  return evaluate_component_difference(xi, x, y, dist);
}

DualVector FiniteSumProblem::evaluate_component_difference(IndexPair xi, const BlockVector& x,
                                                           const BlockVector& y,
                                                           const SampleDistribution& dist) const {
  DualVector fx = evaluate_component(xi, x, dist);
  fx.values() -= evaluate_component(xi, y, dist).values();
  return fx;
}

DualVector estimator_delta(const DualVector& f_anchor, const FiniteSumProblem& problem,
                           const BlockVector& x_s, const BlockVector& w_prev,
                           const std::vector<IndexPair>& batch, const SampleDistribution& dist,
                           OracleCounters& counters) {
  require_same_layout(problem.layout(), f_anchor.layout(), "estimator_delta");
  if (dist.degenerate()) return f_anchor;
  if (batch.empty()) throw ParameterError("estimator needs a non-empty batch");
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(f_anchor.size());
  // Fixed index order keeps the reduction bit-reproducible.
  for (const IndexPair& xi : batch) {
    sum += problem.component_difference(xi, x_s, w_prev, dist, counters).values();
  }
  DualVector delta = f_anchor;
  delta.values() += sum / static_cast<double>(batch.size());
  return delta;
}

// ---------------------------------------------------------------------------
// Spectral helpers

double largest_eigenvalue_psd(const Eigen::MatrixXd& s, int max_iters, double rel_tol) {
  if (s.rows() != s.cols() || s.rows() == 0) throw ParameterError("square matrix required");
  Eigen::VectorXd v = Eigen::VectorXd::Ones(s.rows()).normalized();
  double estimate = 0.0;
  for (int it = 0; it < max_iters; ++it) {
    Eigen::VectorXd w = s * v;
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    const double next = v.dot(w);
    v = w / norm;
    if (it > 0 && std::abs(next - estimate) <= rel_tol * std::abs(next)) return next;
    estimate = next;
  }
  return estimate;
}

double spectral_norm(const Eigen::MatrixXd& a, int max_iters, double rel_tol) {
  if (a.size() == 0) throw ParameterError("empty matrix");
  Eigen::VectorXd v = Eigen::VectorXd::Ones(a.cols()).normalized();
  double estimate = 0.0;
  for (int it = 0; it < max_iters; ++it) {
    const Eigen::VectorXd av = a * v;
    const double next = av.norm();
    if (next == 0.0) return 0.0;
    Eigen::VectorXd w = a.transpose() * av;
    v = w / w.norm();
    if (it > 0 && std::abs(next - estimate) <= rel_tol * next) break;
    estimate = next;
  }
  return (a * v).norm();
}

// ---------------------------------------------------------------------------
// MatrixGameOperator

MatrixGameOperator::MatrixGameOperator(Eigen::MatrixXd payoff)
    : FiniteSumProblem(GeometrySpec::entropy_simplex(BlockLayout::uniform(2, payoff.rows())),
                       static_cast<std::uint64_t>(payoff.rows() * payoff.rows()),
                       payoff.cwiseAbs().maxCoeff(), payoff.cwiseAbs().maxCoeff(),
                       MonotonicityClass::Monotone),
      payoff_(std::move(payoff)) {
  if (payoff_.rows() != payoff_.cols()) throw ParameterError("matrix game needs a square payoff");
  if (!payoff_.allFinite()) throw DomainError("payoff has non-finite entries");
}

DualVector MatrixGameOperator::evaluate(const BlockVector& z) const {
  DualVector out = DualVector::zeros(layout());
  out.block(0) = payoff_.transpose() * z.block(1);
  out.block(1) = -(payoff_ * z.block(0));
  return out;
}

DualVector MatrixGameOperator::evaluate_component(IndexPair xi, const BlockVector& z,
                                                  const SampleDistribution& dist) const {
  DualVector out = DualVector::zeros(layout());
  out.block(0) = payoff_.row(xi.row).transpose() * (z.block(1)[xi.row] / dist.rows()[xi.row]);
  out.block(1) = -payoff_.col(xi.col) * (z.block(0)[xi.col] / dist.cols()[xi.col]);
  return out;
}

DualVector MatrixGameOperator::evaluate_component_difference(IndexPair xi, const BlockVector& x,
                                                             const BlockVector& y,
                                                             const SampleDistribution& dist) const {
  // Differences first: avoids cancellation between two 1/r_i-scaled terms.
  const double dy = (x.block(1)[xi.row] - y.block(1)[xi.row]) / dist.rows()[xi.row];
  const double dx = (x.block(0)[xi.col] - y.block(0)[xi.col]) / dist.cols()[xi.col];
  DualVector out = DualVector::zeros(layout());
  out.block(0) = payoff_.row(xi.row).transpose() * dy;
  out.block(1) = -payoff_.col(xi.col) * dx;
  return out;
}

SampleDistribution MatrixGameOperator::make_distribution(const BlockVector& u,
                                                         const BlockVector& v) const {
  require_same_layout(layout(), u.layout(), "make_distribution");
  require_same_layout(layout(), v.layout(), "make_distribution");
  auto rows = abs_difference_weights(u.block(1), v.block(1));
  auto cols = abs_difference_weights(u.block(0), v.block(0));
  SampleDistribution::Flags flags;
  flags.row_fallback = !rows.has_value();
  flags.col_fallback = !cols.has_value();
  flags.degenerate = flags.row_fallback && flags.col_fallback;
  return SampleDistribution(rows ? std::move(*rows) : uniform_weights(n()),
                            cols ? std::move(*cols) : uniform_weights(n()), flags);
}

SampleDistribution MatrixGameOperator::uniform_distribution() const {
  return SampleDistribution(uniform_weights(n()), uniform_weights(n()));
}

DualVector MatrixGameOperator::jacobian_transpose_apply(const BlockVector& w) const {
  require_same_layout(layout(), w.layout(), "jacobian_transpose_apply");
  // J = [[0, A^T], [-A, 0]], so J^T = [[0, -A^T], [A, 0]].
  DualVector out = DualVector::zeros(layout());
  out.block(0) = -(payoff_.transpose() * w.block(1));
  out.block(1) = payoff_ * w.block(0);
  return out;
}

// ---------------------------------------------------------------------------
// RegularizedGameOperator

namespace {

struct RegularizedConstants {
  double spectral;
  double lipschitz;
  double mean_lipschitz;
};

// With Frobenius weights the cross terms cancel and
// E|F_xi(x) - F_xi(y)|^2 = (lambda^2 + |A|_F^2) |x - y|^2 exactly.
RegularizedConstants regularized_constants(const Eigen::MatrixXd& a, double lambda) {
  const double s = spectral_norm(a);
  return {s, std::sqrt(lambda * lambda + s * s), std::sqrt(lambda * lambda + a.squaredNorm())};
}

}  // namespace

RegularizedGameOperator::RegularizedGameOperator(Eigen::MatrixXd payoff, double lambda)
    : FiniteSumProblem(GeometrySpec::euclidean_ball(BlockLayout::uniform(2, payoff.rows()), 1.0),
                       static_cast<std::uint64_t>(payoff.rows() * payoff.rows()),
                       regularized_constants(payoff, lambda).lipschitz,
                       regularized_constants(payoff, lambda).mean_lipschitz,
                       MonotonicityClass::WeakMinty),
      payoff_(std::move(payoff)),
      lambda_(lambda) {
  if (payoff_.rows() != payoff_.cols()) throw ParameterError("regularized game needs a square payoff");
  if (!(lambda_ > 0.0)) throw ParameterError("regularization lambda must be positive");
  spectral_norm_ = bvrvi::spectral_norm(payoff_);
  set_weak_minty_rho(lambda_ / (lambda_ * lambda_ + spectral_norm_ * spectral_norm_));

  const double frob_sq = payoff_.squaredNorm();
  if (frob_sq > 0.0) {
    row_weights_ = payoff_.rowwise().squaredNorm() / frob_sq;
    col_weights_ = payoff_.colwise().squaredNorm().transpose() / frob_sq;
  } else {
    row_weights_ = uniform_weights(n());
    col_weights_ = uniform_weights(n());
    weights_fallback_ = true;
  }
}

DualVector RegularizedGameOperator::evaluate(const BlockVector& z) const {
  DualVector out = DualVector::zeros(layout());
  out.block(0) = payoff_.transpose() * z.block(1) - lambda_ * z.block(0);
  out.block(1) = -(payoff_ * z.block(0)) - lambda_ * z.block(1);
  return out;
}

DualVector RegularizedGameOperator::evaluate_component(IndexPair xi, const BlockVector& z,
                                                       const SampleDistribution& dist) const {
  DualVector out = DualVector::zeros(layout());
  out.block(0) = payoff_.row(xi.row).transpose() * (z.block(1)[xi.row] / dist.rows()[xi.row]) -
                 lambda_ * z.block(0);
  out.block(1) = -payoff_.col(xi.col) * (z.block(0)[xi.col] / dist.cols()[xi.col]) -
                 lambda_ * z.block(1);
  return out;
}

SampleDistribution RegularizedGameOperator::make_distribution(const BlockVector& u,
                                                              const BlockVector& v) const {
  require_same_layout(layout(), u.layout(), "make_distribution");
  require_same_layout(layout(), v.layout(), "make_distribution");
  SampleDistribution::Flags flags;
  flags.row_fallback = weights_fallback_;
  flags.col_fallback = weights_fallback_;
  return SampleDistribution(row_weights_, col_weights_, flags);
}

SampleDistribution RegularizedGameOperator::uniform_distribution() const {
  return SampleDistribution(uniform_weights(n()), uniform_weights(n()));
}

BlockVector RegularizedGameOperator::default_start() const {
  return BlockVector::constant(layout(), 1.0);
}

DualVector RegularizedGameOperator::jacobian_transpose_apply(const BlockVector& w) const {
  require_same_layout(layout(), w.layout(), "jacobian_transpose_apply");
  DualVector out = DualVector::zeros(layout());
  out.block(0) = -(payoff_.transpose() * w.block(1)) - lambda_ * w.block(0);
  out.block(1) = payoff_ * w.block(0) - lambda_ * w.block(1);
  return out;
}

// ---------------------------------------------------------------------------
// AffineStrongOperator

namespace {

struct AffineConstants {
  Eigen::MatrixXd mean_matrix;
  double lipschitz;
  double mean_lipschitz;
};

AffineConstants affine_constants(double mu, const std::vector<Eigen::MatrixXd>& skews) {
  if (skews.empty()) throw ParameterError("affine operator needs at least one component");
  const Index d = skews.front().rows();
  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(d, d);
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(d, d);
  for (const auto& s : skews) {
    if (s.rows() != d || s.cols() != d) throw LayoutError("skew parts must be square and equal-sized");
    if ((s + s.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, s.cwiseAbs().maxCoeff())) {
      throw ParameterError("skew part is not antisymmetric");
    }
    const Eigen::MatrixXd h = mu * Eigen::MatrixXd::Identity(d, d) + s;
    mean += h;
    gram += h.transpose() * h;
  }
  const double m = static_cast<double>(skews.size());
  mean /= m;
  gram /= m;
  return {mean, spectral_norm(mean), std::sqrt(largest_eigenvalue_psd(gram))};
}

}  // namespace

AffineStrongOperator::AffineStrongOperator(GeometrySpec geometry, double mu,
                                           std::vector<Eigen::MatrixXd> skews,
                                           std::vector<Eigen::VectorXd> offsets)
    : FiniteSumProblem(geometry, skews.size(), affine_constants(mu, skews).lipschitz,
                       affine_constants(mu, skews).mean_lipschitz,
                       MonotonicityClass::StronglyPseudomonotone),
      mu_(mu) {
  if (!(mu_ > 0.0)) throw ParameterError("strong monotonicity modulus must be positive");
  if (geometry.kind() == GeometryKind::EntropySimplex) {
    throw UnsupportedError("affine strong operator is defined for Euclidean geometries");
  }
  if (geometry.layout().num_blocks() != 1) throw LayoutError("affine strong operator uses one block");
  if (offsets.size() != skews.size()) throw LayoutError("one offset per component required");
  const Index d = geometry.layout().dimension();
  mean_matrix_ = Eigen::MatrixXd::Zero(d, d);
  mean_offset_ = Eigen::VectorXd::Zero(d);
  matrices_.reserve(skews.size());
  for (std::size_t i = 0; i < skews.size(); ++i) {
    if (skews[i].rows() != d || offsets[i].size() != d) throw LayoutError("component size mismatch");
    matrices_.push_back(mu_ * Eigen::MatrixXd::Identity(d, d) + skews[i]);
    mean_matrix_ += matrices_.back();
    mean_offset_ += offsets[i];
  }
  offsets_ = std::move(offsets);
  mean_matrix_ /= static_cast<double>(matrices_.size());
  mean_offset_ /= static_cast<double>(matrices_.size());
  set_pseudomonotone_beta(2.0 * mu_);
}

DualVector AffineStrongOperator::evaluate(const BlockVector& z) const {
  return DualVector(layout(), mean_matrix_ * z.values() + mean_offset_);
}

DualVector AffineStrongOperator::evaluate_component(IndexPair xi, const BlockVector& z,
                                                    const SampleDistribution& dist) const {
  // Importance weight 1 / (M r_i) keeps the estimate unbiased under any row law.
  const auto i = static_cast<std::size_t>(xi.row);
  const double w = 1.0 / (static_cast<double>(matrices_.size()) * dist.rows()[xi.row]);
  return DualVector(layout(), w * (matrices_[i] * z.values() + offsets_[i]));
}

DualVector AffineStrongOperator::evaluate_component_difference(IndexPair xi, const BlockVector& x,
                                                               const BlockVector& y,
                                                               const SampleDistribution& dist) const {
  const auto i = static_cast<std::size_t>(xi.row);
  const double w = 1.0 / (static_cast<double>(matrices_.size()) * dist.rows()[xi.row]);
  return DualVector(layout(), w * (matrices_[i] * (x.values() - y.values())));
}

SampleDistribution AffineStrongOperator::make_distribution(const BlockVector& u,
                                                           const BlockVector& v) const {
  require_same_layout(layout(), u.layout(), "make_distribution");
  require_same_layout(layout(), v.layout(), "make_distribution");
  return uniform_distribution();
}

SampleDistribution AffineStrongOperator::uniform_distribution() const {
  return SampleDistribution(uniform_weights(static_cast<Index>(matrices_.size())),
                            Eigen::VectorXd::Ones(1));
}

DualVector AffineStrongOperator::jacobian_transpose_apply(const BlockVector& w) const {
  require_same_layout(layout(), w.layout(), "jacobian_transpose_apply");
  return DualVector(layout(), mean_matrix_.transpose() * w.values());
}

// ---------------------------------------------------------------------------
// Builders

std::shared_ptr<MatrixGameOperator> build_example41(Index n, Rng& rng) {
  if (n < 2) throw ParameterError("matrix game dimension must be at least 2");
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd a(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) a(i, j) = normal(rng);
  }
  return std::make_shared<MatrixGameOperator>(std::move(a));
}

std::shared_ptr<RegularizedGameOperator> build_example42(Index n) {
  if (n < 2) throw ParameterError("regularized game dimension must be at least 2");
  Eigen::MatrixXd a(n, n);
  const double denom = static_cast<double>(2 * n - 1);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      const double t = (static_cast<double>(std::abs(i - j)) + 1.0) / denom;
      a(i, j) = t * t;
    }
  }
  a *= 10.0 / spectral_norm(a);
  return std::make_shared<RegularizedGameOperator>(std::move(a), 0.01);
}

AffineStrongInstance build_affine_strong(const AffineStrongConfig& config, Rng& rng) {
  const Index d = config.dimension;
  if (d < 1 || config.components == 0) throw ParameterError("affine instance needs d >= 1, M >= 1");
  std::normal_distribution<double> normal(0.0, 1.0);
  auto gaussian = [&](Index rows, Index cols) {
    Eigen::MatrixXd g(rows, cols);
    for (Index i = 0; i < rows; ++i) {
      for (Index j = 0; j < cols; ++j) g(i, j) = normal(rng);
    }
    return g;
  };

  std::vector<Eigen::MatrixXd> skews;
  skews.reserve(config.components);
  for (std::size_t i = 0; i < config.components; ++i) {
    const Eigen::MatrixXd g = gaussian(d, d);
    Eigen::MatrixXd s = g - g.transpose();
    const double norm = spectral_norm(s);
    if (norm > 0.0) s *= config.skew_scale * config.mu / norm;
    skews.push_back(std::move(s));
  }

  Eigen::VectorXd x_star = gaussian(d, 1);
  x_star *= config.solution_norm / x_star.norm();

  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(d, d);
  for (const auto& s : skews) mean += config.mu * Eigen::MatrixXd::Identity(d, d) + s;
  mean /= static_cast<double>(config.components);
  const Eigen::VectorXd q = -(mean * x_star);

  // Zero-mean perturbations of the offsets keep x* as the solution of the mean.
  std::vector<Eigen::VectorXd> offsets(config.components);
  Eigen::VectorXd perturb_mean = Eigen::VectorXd::Zero(d);
  for (auto& o : offsets) {
    o = gaussian(d, 1) * config.mu * 0.1;
    perturb_mean += o;
  }
  perturb_mean /= static_cast<double>(config.components);
  for (auto& o : offsets) o = q + (o - perturb_mean);

  GeometrySpec geometry = config.ball ? GeometrySpec::euclidean_ball(BlockLayout{d}, 1.0)
                                      : GeometrySpec::euclidean_free(BlockLayout{d});
  auto op = std::make_shared<AffineStrongOperator>(std::move(geometry), config.mu, std::move(skews),
                                                   std::move(offsets));
  return {std::move(op), std::move(x_star)};
}

}  // namespace bvrvi
