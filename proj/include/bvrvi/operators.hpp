#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string_view>
#include <vector>

#include "bvrvi/block_vector.hpp"
#include "bvrvi/geometry.hpp"

namespace bvrvi {

using Rng = std::mt19937_64;

/// Per-run oracle accounting. One full evaluation counts as M component calls.
/// Diagnostic evaluations (metrics) are tracked apart from the algorithmic
/// complexity.
struct OracleCounters {
  std::uint64_t full_evals = 0;
  std::uint64_t component_calls = 0;
  std::uint64_t diagnostic_calls = 0;
};

/// Component index. Game operators use (row, column) pairs; single-index
/// finite sums use (i, 0).
struct IndexPair {
  Index row = 0;
  Index col = 0;
  bool operator==(const IndexPair&) const = default;
};

/// Product distribution Pr{(i, k)} = rows[i] * cols[k] over component indices.
class SampleDistribution {
 public:
  struct Flags {
    bool row_fallback = false;  // row normalizer vanished, uniform used
    bool col_fallback = false;
    bool degenerate = false;    // stochastic differences are identically zero
  };

  SampleDistribution(Eigen::VectorXd rows, Eigen::VectorXd cols)
      : SampleDistribution(std::move(rows), std::move(cols), Flags()) {}
  SampleDistribution(Eigen::VectorXd rows, Eigen::VectorXd cols, Flags flags);

  const Eigen::VectorXd& rows() const { return rows_; }
  const Eigen::VectorXd& cols() const { return cols_; }
  bool degenerate() const { return flags_.degenerate; }
  const Flags& flags() const { return flags_; }

  double probability(IndexPair xi) const { return rows_[xi.row] * cols_[xi.col]; }

  /// One i.i.d. draw: row index first, then column index.
  IndexPair draw(Rng& rng) const;

 private:
  Eigen::VectorXd rows_;
  Eigen::VectorXd cols_;
  Eigen::VectorXd row_cdf_;
  Eigen::VectorXd col_cdf_;
  Flags flags_;
};

/// b i.i.d. draws with replacement. Throws ParameterError for b == 0 or a
/// degenerate distribution (the caller branches before sampling).
std::vector<IndexPair> sample_batch(const SampleDistribution& dist, std::size_t b, Rng& rng);

enum class MonotonicityClass { Monotone, WeakMinty, StronglyPseudomonotone };

std::string_view to_string(MonotonicityClass c);

/// F = (1/M) sum_i F_i together with a stochastic oracle that is unbiased
/// under a (possibly point-dependent) sampling distribution.
class FiniteSumProblem {
 public:
  virtual ~FiniteSumProblem() = default;

  const GeometrySpec& geometry() const { return geometry_; }
  const BlockLayout& layout() const { return geometry_.layout(); }
  std::uint64_t component_count() const { return component_count_; }
  double lipschitz() const { return lipschitz_; }
  double mean_lipschitz() const { return mean_lipschitz_; }
  MonotonicityClass monotonicity() const { return monotonicity_; }
  std::optional<double> weak_minty_rho() const { return rho_; }
  std::optional<double> pseudomonotone_beta() const { return beta_; }

  virtual std::string_view name() const = 0;

  /// Exact F(z); counts one full evaluation (M component calls).
  DualVector full_eval(const BlockVector& z, OracleCounters& counters) const;
  /// Exact F(z) for metrics; counted as a diagnostic call only.
  DualVector diagnostic_eval(const BlockVector& z, OracleCounters& counters) const;
  /// Single-sample unbiased estimate F_xi(z); counts one component call.
  DualVector component_eval(IndexPair xi, const BlockVector& z, const SampleDistribution& dist,
                            OracleCounters& counters) const;
  /// F_xi(x) - F_xi(y); counts two component calls.
  DualVector component_difference(IndexPair xi, const BlockVector& x, const BlockVector& y,
                                  const SampleDistribution& dist, OracleCounters& counters) const;

  /// The oracle distribution Q_{u,v} for the pair (current iterate, previous anchor).
  virtual SampleDistribution make_distribution(const BlockVector& u, const BlockVector& v) const = 0;
  /// Uniform distribution over all component indices.
  virtual SampleDistribution uniform_distribution() const = 0;

  /// J^T w for the (constant) Jacobian J of an affine operator.
  virtual DualVector jacobian_transpose_apply(const BlockVector& w) const = 0;
  /// Start point used by the experiments: the geometry centre unless overridden.
  virtual BlockVector default_start() const { return geometry_.center(); }

  /// True when F(u) = J u + q; the restricted-gap maximizer relies on it.
  virtual bool is_affine() const { return true; }
  /// <F(u) - F(v), u - v> = 0 identically (bilinear saddle operators).
  virtual bool is_skew() const { return false; }

 protected:
  FiniteSumProblem(GeometrySpec geometry, std::uint64_t component_count, double lipschitz,
                   double mean_lipschitz, MonotonicityClass monotonicity);

  void set_weak_minty_rho(double rho) { rho_ = rho; }
  void set_pseudomonotone_beta(double beta) { beta_ = beta; }

  virtual DualVector evaluate(const BlockVector& z) const = 0;
  virtual DualVector evaluate_component(IndexPair xi, const BlockVector& z,
                                        const SampleDistribution& dist) const = 0;
  /// Defaults to the difference of two component evaluations.
  virtual DualVector evaluate_component_difference(IndexPair xi, const BlockVector& x,
                                                   const BlockVector& y,
                                                   const SampleDistribution& dist) const;

 private:
  GeometrySpec geometry_;
  std::uint64_t component_count_;
  double lipschitz_;
  double mean_lipschitz_;
  MonotonicityClass monotonicity_;
  std::optional<double> rho_;
  std::optional<double> beta_;
};

/// Bilinear matrix game min_x max_y <Ax, y> over two simplices:
/// F(x, y) = (A^T y, -A x), L = Lbar = max |A_ij|, M = n^2 index pairs.
///
/// Oracle: F_(i,k)(z) = ((1/r_i) A_{i:} y_i, -(1/c_k) A_{:k} x_k) with
/// r, c the l1-normalized absolute differences of the y- and x-blocks of
/// (u, v).
class MatrixGameOperator final : public FiniteSumProblem {
 public:
  explicit MatrixGameOperator(Eigen::MatrixXd payoff);

  std::string_view name() const override { return "matrix-game"; }
  const Eigen::MatrixXd& payoff() const { return payoff_; }
  Index n() const { return payoff_.rows(); }

  SampleDistribution make_distribution(const BlockVector& u, const BlockVector& v) const override;
  SampleDistribution uniform_distribution() const override;
  DualVector jacobian_transpose_apply(const BlockVector& w) const override;
  bool is_skew() const override { return true; }

 protected:
  DualVector evaluate(const BlockVector& z) const override;
  DualVector evaluate_component(IndexPair xi, const BlockVector& z,
                                const SampleDistribution& dist) const override;
  DualVector evaluate_component_difference(IndexPair xi, const BlockVector& x,
                                           const BlockVector& y,
                                           const SampleDistribution& dist) const override;

 private:
  Eigen::MatrixXd payoff_;
};

/// Non-monotone regularized game over two unit balls:
/// F(z) = (A^T y - lambda x, -A x - lambda y), L = sqrt(lambda^2 + |A|_2^2),
/// Lbar = sqrt(lambda^2 + |A|_F^2) for the Frobenius-weighted oracle,
/// weak Minty modulus rho = lambda / (lambda^2 + |A|_2^2). Oracle weights are
/// the squared row / column norms over the squared Frobenius norm.
class RegularizedGameOperator final : public FiniteSumProblem {
 public:
  RegularizedGameOperator(Eigen::MatrixXd payoff, double lambda);

  std::string_view name() const override { return "regularized-game"; }
  const Eigen::MatrixXd& payoff() const { return payoff_; }
  double lambda() const { return lambda_; }
  double spectral_norm() const { return spectral_norm_; }
  Index n() const { return payoff_.rows(); }

  SampleDistribution make_distribution(const BlockVector& u, const BlockVector& v) const override;
  SampleDistribution uniform_distribution() const override;
  DualVector jacobian_transpose_apply(const BlockVector& w) const override;
  /// All-ones in both blocks; outside the balls, so the first prox projects.
  BlockVector default_start() const override;

 protected:
  DualVector evaluate(const BlockVector& z) const override;
  DualVector evaluate_component(IndexPair xi, const BlockVector& z,
                                const SampleDistribution& dist) const override;

 private:
  Eigen::MatrixXd payoff_;
  double lambda_;
  double spectral_norm_;
  Eigen::VectorXd row_weights_;
  Eigen::VectorXd col_weights_;
  bool weights_fallback_ = false;
};

/// Strongly monotone affine finite sum F_i(x) = (mu I + S_i) x + q_i with
/// skew S_i, sampled uniformly. <F(x) - F(y), x - y> = mu |x - y|^2, so the
/// strong pseudomonotonicity modulus relative to D = |.|^2 / 2 is 2 mu.
class AffineStrongOperator final : public FiniteSumProblem {
 public:
  AffineStrongOperator(GeometrySpec geometry, double mu, std::vector<Eigen::MatrixXd> skews,
                       std::vector<Eigen::VectorXd> offsets);

  std::string_view name() const override { return "affine-strong"; }
  double mu() const { return mu_; }
  const Eigen::MatrixXd& mean_matrix() const { return mean_matrix_; }
  const Eigen::VectorXd& mean_offset() const { return mean_offset_; }

  SampleDistribution make_distribution(const BlockVector& u, const BlockVector& v) const override;
  SampleDistribution uniform_distribution() const override;
  DualVector jacobian_transpose_apply(const BlockVector& w) const override;

 protected:
  DualVector evaluate(const BlockVector& z) const override;
  DualVector evaluate_component(IndexPair xi, const BlockVector& z,
                                const SampleDistribution& dist) const override;
  DualVector evaluate_component_difference(IndexPair xi, const BlockVector& x,
                                           const BlockVector& y,
                                           const SampleDistribution& dist) const override;

 private:
  double mu_;
  std::vector<Eigen::MatrixXd> matrices_;  // mu I + S_i
  std::vector<Eigen::VectorXd> offsets_;
  Eigen::MatrixXd mean_matrix_;
  Eigen::VectorXd mean_offset_;
};

/// Delta = F_anchor + (1/b) sum_{xi in batch} (F_xi(x_s) - F_xi(w_prev)).
/// A degenerate distribution returns F_anchor without touching the batch.
DualVector estimator_delta(const DualVector& f_anchor, const FiniteSumProblem& problem,
                           const BlockVector& x_s, const BlockVector& w_prev,
                           const std::vector<IndexPair>& batch, const SampleDistribution& dist,
                           OracleCounters& counters);

/// Spectral norm by power iteration on A^T A from the normalized all-ones
/// vector, at most 10^4 iterations, relative tolerance 1e-10.
double spectral_norm(const Eigen::MatrixXd& a, int max_iters = 10000, double rel_tol = 1e-10);

/// Largest eigenvalue of a symmetric positive semidefinite matrix, same scheme.
double largest_eigenvalue_psd(const Eigen::MatrixXd& s, int max_iters = 10000,
                              double rel_tol = 1e-10);

/// Matrix game with i.i.d. standard normal payoff entries (row-major fill).
std::shared_ptr<MatrixGameOperator> build_example41(Index n, Rng& rng);

/// Regularized game with A_ij = ((|i-j|+1)/(2n-1))^2 rescaled to |A|_2 = 10, lambda = 0.01.
std::shared_ptr<RegularizedGameOperator> build_example42(Index n);

struct AffineStrongConfig {
  Index dimension = 10;
  std::size_t components = 64;
  double mu = 1.0;
  double skew_scale = 0.1;     // spectral size of each skew part relative to mu
  double solution_norm = 0.5;  // |x*| for the planted solution
  bool ball = true;            // unit ball, otherwise the whole space
};

/// Random instance with a planted interior solution x* (F(x*) = 0).
struct AffineStrongInstance {
  std::shared_ptr<AffineStrongOperator> op;
  Eigen::VectorXd planted_solution;
};

AffineStrongInstance build_affine_strong(const AffineStrongConfig& config, Rng& rng);

}  // namespace bvrvi
