#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bvrvi/block_vector.hpp"
#include "bvrvi/geometry.hpp"
#include "bvrvi/operators.hpp"
#include "bvrvi/solver.hpp"

namespace bvrvi {

/// max_i (A x)_i - min_j (A^T y)_j at z = (x, y).
double duality_gap(const MatrixGameOperator& game, const BlockVector& z);

/// The compact set C over which the restricted gap maximizes.
struct GapDomain {
  enum class Kind { FeasibleSet, SinglePoint };
  Kind kind = Kind::FeasibleSet;
  std::optional<BlockVector> point;  // only for SinglePoint

  static GapDomain feasible_set() { return {}; }
  static GapDomain single_point(BlockVector u) { return {Kind::SinglePoint, std::move(u)}; }
};

struct GapValue {
  double value = 0.0;
  /// True when `value` comes from the inner ascent and only bounds the gap
  /// from below.
  bool lower_bound = false;
};

struct InnerAscentOptions {
  int steps = 1000;
  int restarts = 10;
  std::uint64_t seed = 0;
};

/// Gap(z) = max_{u in C} <F(u), z - u>. Skew operators reduce this to
/// <F(z), z> - min_u <F(z), u>, which for matrix games is the duality gap.
/// Otherwise a projected (mirror) gradient ascent over C gives a lower bound.
/// Throws UnsupportedError when C is the whole (unbounded) space.
GapValue restricted_gap(const FiniteSumProblem& problem, const BlockVector& z,
                        const GapDomain& domain, OracleCounters& diagnostics,
                        const InnerAscentOptions& ascent = {});

/// |u_s|_* with u_s = F(x_{s+1}) - Delta_s - (grad f(x_{s+1}) - gamma grad f(x_s)
///   - (1 - gamma) grad f(x_{s-1})) / alpha, using the state's last step.
/// Throws UnsupportedError for the entropy geometry and ParameterError when no
/// step has been taken.
double natural_residual(const SolverState& state, const GeometrySpec& geometry, double gamma,
                        double alpha, const DualVector& f_next);

/// The vector u_s itself (same contract as natural_residual).
DualVector natural_residual_vector(const SolverState& state, const GeometrySpec& geometry,
                                   double gamma, double alpha, const DualVector& f_next);

/// |z|_2 / sqrt(n).
double scaled_norm_residual(const BlockVector& z, Index n);

/// Everything the theory constants depend on.
struct TheoryInputs {
  double alpha = 0.0;
  double gamma = 1.0;
  double p = 1.0;
  double batch = 1.0;
  double lipschitz = 0.0;       // L
  double mean_lipschitz = 0.0;  // Lbar
  std::optional<double> mirror_lipschitz;  // L_f, absent for entropy
  double rho = 0.0;
  std::optional<double> beta;

  static TheoryInputs from(const SolverParams& params, const FiniteSumProblem& problem);
};

struct TheoryBounds {
  TheoryInputs inputs;
  std::optional<double> sigma1;
  std::optional<double> sigma2;
  std::optional<double> sigma1_prime;
  std::optional<double> sigma2_prime;
  std::optional<double> theta;
  std::optional<double> varsigma;
  double ergodic_coefficient = 0.0;  // (2 + alpha - gamma) / alpha, per 1/S
  /// Named inequalities that failed; the affected fields stay empty.
  std::vector<std::string> violations;
};

double sigma1(const TheoryInputs& in);
double sigma2(const TheoryInputs& in);
double sigma1_prime(const TheoryInputs& in);
double sigma2_prime(const TheoryInputs& in);
double ergodic_coefficient(double alpha, double gamma);

/// Largest admissible theta for the p < 1 linear rate (needs p < gamma < 1).
/// Throws PremiseError naming the first violated premise, or when the
/// resulting theta is not above 1.
double theta_max(const TheoryInputs& in);
/// Largest admissible varsigma for the p = 1 linear rate, capped by
/// 1 - (1 - gamma) varsigma >= 0; at gamma = 1 that cap is +inf and drops
/// out. Same error contract.
double varsigma_max(const TheoryInputs& in);

/// sqrt(4 / ((1 + gamma - alpha) rate^s) * d0), d0 = D(x*, x_0).
double linear_rate_bound(double rate, double alpha, double gamma, std::uint64_t s, double d0);

/// Evaluates every constant whose inputs and premises are available.
TheoryBounds theory_bounds(const TheoryInputs& in);
TheoryBounds theory_bounds(const SolverParams& params, const FiniteSumProblem& problem);

}  // namespace bvrvi
