#include "bvrvi/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace bvrvi {

double duality_gap(const MatrixGameOperator& game, const BlockVector& z) {
  require_same_layout(game.layout(), z.layout(), "duality_gap");
  const Eigen::MatrixXd& a = game.payoff();
  const double best_response_y = (a * z.block(0)).maxCoeff();
  const double best_response_x = (a.transpose() * z.block(1)).minCoeff();
  return best_response_y - best_response_x;
}

namespace {

// min over the feasible set of <v, u>, block by block.
double linear_minimum(const GeometrySpec& geometry, const DualVector& v) {
  double total = 0.0;
  for (Index b = 0; b < v.layout().num_blocks(); ++b) {
    switch (geometry.kind()) {
      case GeometryKind::EntropySimplex:
        total += v.block(b).minCoeff();
        break;
      case GeometryKind::EuclideanBall:
        total -= geometry.radius(b) * v.block(b).norm();
        break;
      case GeometryKind::EuclideanFree:
        throw UnsupportedError("restricted gap over an unbounded set");
    }
  }
  return total;
}

BlockVector random_feasible(const GeometrySpec& geometry, Rng& rng) {
  const BlockLayout& layout = geometry.layout();
  Eigen::VectorXd v(layout.dimension());
  std::exponential_distribution<double> expo(1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (Index b = 0; b < layout.num_blocks(); ++b) {
    auto seg = v.segment(layout.offset(b), layout.block_size(b));
    if (geometry.kind() == GeometryKind::EntropySimplex) {
      for (Index i = 0; i < seg.size(); ++i) seg[i] = expo(rng);
      seg /= seg.sum();
    } else {
      for (Index i = 0; i < seg.size(); ++i) seg[i] = normal(rng);
      const double r = geometry.radius(b) *
                       std::pow(unit(rng), 1.0 / static_cast<double>(seg.size()));
      seg *= r / seg.norm();
    }
  }
  return BlockVector(layout, std::move(v));
}

double gap_objective(const BlockVector& z, const BlockVector& u,
                     const DualVector& fu) {
  return fu.values().dot(z.values() - u.values());
}

}  // namespace

GapValue restricted_gap(const FiniteSumProblem& problem, const BlockVector& z,
                        const GapDomain& domain, OracleCounters& diagnostics,
                        const InnerAscentOptions& ascent) {
  require_same_layout(problem.layout(), z.layout(), "restricted_gap");
  const GeometrySpec& geometry = problem.geometry();

  if (domain.kind == GapDomain::Kind::SinglePoint) {
    if (!domain.point) throw ParameterError("single-point gap domain without a point");
    const DualVector fu = problem.diagnostic_eval(*domain.point, diagnostics);
    return {gap_objective(z, *domain.point, fu), false};
  }
  if (geometry.kind() == GeometryKind::EuclideanFree) {
    throw UnsupportedError("restricted gap over an unbounded set");
  }

  if (problem.is_skew()) {
    // <F(u), z - u> = <F(z), z - u> for every u.
    const DualVector fz = problem.diagnostic_eval(z, diagnostics);
    return {pairing(fz, z) - linear_minimum(geometry, fz), false};
  }

  if (!problem.is_affine()) throw UnsupportedError("inner gap ascent needs an affine operator");
  if (ascent.steps < 1 || ascent.restarts < 1) throw ParameterError("ascent needs steps, restarts >= 1");

  // Projected / mirror ascent on phi(u) = <F(u), z - u>, gradient J^T (z - u) - F(u).
  const double eta = 1.0 / (2.0 * std::max(problem.lipschitz(), 1e-12));
  Rng rng(ascent.seed);
  double best = -std::numeric_limits<double>::infinity();
  for (int r = 0; r < ascent.restarts; ++r) {
    BlockVector u = r == 0 ? geometry.center() : random_feasible(geometry, rng);
    for (int k = 0; k <= ascent.steps; ++k) {
      const DualVector fu = problem.diagnostic_eval(u, diagnostics);
      best = std::max(best, gap_objective(z, u, fu));
      if (k == ascent.steps) break;
      const BlockVector diff(z.layout(), z.values() - u.values());
      const DualVector grad(z.layout(),
                            problem.jacobian_transpose_apply(diff).values() - fu.values());
      u = bregman_prox(geometry, u, DualVector(z.layout(), -grad.values()), eta);
    }
  }
  return {best, true};
}

DualVector natural_residual_vector(const SolverState& state, const GeometrySpec& geometry,
                                   double gamma, double alpha, const DualVector& f_next) {
  if (geometry.kind() == GeometryKind::EntropySimplex) {
    throw UnsupportedError("natural residual needs a Lipschitz mirror map (not entropy)");
  }
  if (!state.last_step) throw ParameterError("natural residual needs a completed step");
  if (!(alpha > 0.0)) throw ParameterError("require alpha > 0");
  const StepRecord& rec = *state.last_step;
  // Euclidean mirror map is the identity.
  const Eigen::VectorXd centre =
      gamma * rec.x_s.values() + (1.0 - gamma) * rec.x_s_prev.values();
  Eigen::VectorXd u =
      f_next.values() - rec.delta.values() - (state.x_cur.values() - centre) / alpha;
  return DualVector(f_next.layout(), std::move(u));
}

double natural_residual(const SolverState& state, const GeometrySpec& geometry, double gamma,
                        double alpha, const DualVector& f_next) {
  return geometry.dual_norm(natural_residual_vector(state, geometry, gamma, alpha, f_next));
}

double scaled_norm_residual(const BlockVector& z, Index n) {
  if (n < 1) throw ParameterError("n must be positive");
  return z.values().norm() / std::sqrt(static_cast<double>(n));
}

// ---------------------------------------------------------------------------
// Theory constants

TheoryInputs TheoryInputs::from(const SolverParams& params, const FiniteSumProblem& problem) {
  TheoryInputs in;
  in.alpha = params.alpha;
  in.gamma = params.gamma;
  in.p = params.p;
  in.batch = static_cast<double>(params.batch);
  in.lipschitz = problem.lipschitz();
  in.mean_lipschitz = problem.mean_lipschitz();
  in.mirror_lipschitz = problem.geometry().mirror_lipschitz();
  in.rho = problem.weak_minty_rho().value_or(0.0);
  in.beta = problem.pseudomonotone_beta();
  return in;
}

namespace {

double require_lf(const TheoryInputs& in) {
  if (!in.mirror_lipschitz) throw UnsupportedError("sigma constants need a finite L_f");
  return *in.mirror_lipschitz;
}

double sq(double v) { return v * v; }

}  // namespace

double sigma1(const TheoryInputs& in) {
  const double lf = require_lf(in);
  const double a = in.alpha, b = in.batch, l2 = sq(in.lipschitz), lb2 = sq(in.mean_lipschitz);
  if (!(in.p < 1.0)) throw ParameterError("sigma1 is defined for p < 1");
  const double lead = (1.0 - in.gamma) / (2.0 * (1.0 - in.p)) * (1.0 - 8.0 * in.rho * sq(lf) / a);
  return lead - (2.0 * a * a * l2 + 8.0 * a * in.rho * l2 + 4.0 * a * in.rho * lb2 / b +
                 5.0 * a * a * lb2 / (2.0 * b));
}

double sigma2(const TheoryInputs& in) {
  const double lf = require_lf(in);
  if (!(in.p < 1.0)) throw ParameterError("sigma2 is defined for p < 1");
  return 8.0 * sq(in.lipschitz) + 4.0 * (1.0 - in.gamma) * sq(lf) / ((1.0 - in.p) * sq(in.alpha)) +
         4.0 * sq(in.mean_lipschitz) / in.batch;
}

double sigma1_prime(const TheoryInputs& in) {
  const double lf = require_lf(in);
  const double a = in.alpha, b = in.batch, l2 = sq(in.lipschitz), lb2 = sq(in.mean_lipschitz);
  return (in.gamma - 0.5) - (4.0 * a * a * l2 + 16.0 * a * in.rho * l2 + 8.0 * a * in.rho * lb2 / b +
                             5.0 * a * a * lb2 / b + 8.0 * in.gamma * in.rho * sq(lf) / a);
}

double sigma2_prime(const TheoryInputs& in) {
  const double lf = require_lf(in);
  return 16.0 * sq(in.lipschitz) + 8.0 * in.gamma * sq(lf) / sq(in.alpha) +
         8.0 * sq(in.mean_lipschitz) / in.batch;
}

double ergodic_coefficient(double alpha, double gamma) {
  if (!(alpha > 0.0)) throw ParameterError("require alpha > 0");
  return (2.0 + alpha - gamma) / alpha;
}

namespace {

double first_rate_term(const TheoryInputs& in) {
  return (0.5 + in.alpha * *in.beta + in.alpha / 2.0) / (1.0 + in.gamma + in.alpha / 2.0);
}

void require_beta(const TheoryInputs& in) {
  if (!in.beta || !(*in.beta > 0.0)) {
    throw PremiseError("strong pseudomonotonicity modulus beta > 0 is not available");
  }
}

}  // namespace

double theta_max(const TheoryInputs& in) {
  require_beta(in);
  const double a = in.alpha, b = in.batch, l2 = sq(in.lipschitz), lb2 = sq(in.mean_lipschitz);
  if (!(in.p > 0.0 && in.p < 1.0)) throw PremiseError("0 < p < 1 violated");
  if (!(in.p < in.gamma && in.gamma < 1.0)) throw PremiseError("p < gamma < 1 violated");
  if (!(a > (0.5 + in.gamma) / *in.beta)) throw PremiseError("(1/2 + gamma)/beta < alpha violated");
  const double ratio = (1.0 - in.gamma) / (1.0 - in.p);
  const double upper = (std::sqrt(b * b * l2 * l2 + 8.0 * b * lb2 * ratio) - b * l2) / (4.0 * lb2);
  if (!(a < upper)) {
    throw PremiseError(
        "alpha < (sqrt(b^2 L^4 + 8 b Lbar^2 (1-gamma)/(1-p)) - b L^2)/(4 Lbar^2) violated");
  }
  if (!(a <= (in.gamma - in.p) / (1.0 - in.p))) {
    throw PremiseError("alpha <= (gamma - p)/(1 - p) violated");
  }
  const double t2 = (ratio + 2.0 * a * l2) / (2.0 * a * a * lb2 / b + 3.0 * a * l2);
  const double t3 = 1.0 / (1.0 - in.gamma);
  const double theta = std::min({first_rate_term(in), t2, t3});
  if (!(theta > 1.0)) throw PremiseError("theta > 1 violated (empty rate window)");
  return theta;
}

double varsigma_max(const TheoryInputs& in) {
  require_beta(in);
  const double a = in.alpha, b = in.batch, l2 = sq(in.lipschitz), lb2 = sq(in.mean_lipschitz);
  if (!(in.p == 1.0)) throw PremiseError("p = 1 violated");
  if (!(in.gamma > 0.0 && in.gamma <= 1.0)) throw PremiseError("0 < gamma <= 1 violated");
  if (!(a > (0.5 + in.gamma) / *in.beta)) throw PremiseError("(1/2 + gamma)/beta < alpha violated");
  const double upper =
      (std::sqrt(b * b * sq(l2 + 1.0) + 8.0 * b * in.gamma * lb2) - b * (l2 + 1.0)) / (4.0 * lb2);
  if (!(a < upper)) {
    throw PremiseError(
        "alpha < (sqrt(b^2 (L^2+1)^2 + 8 b gamma Lbar^2) - b (L^2+1))/(4 Lbar^2) violated");
  }
  const double t2 = (in.gamma - a + 2.0 * a * l2) / (2.0 * a * a * lb2 / b + 3.0 * a * l2);
  double varsigma = std::min(first_rate_term(in), t2);
  if (in.gamma < 1.0) varsigma = std::min(varsigma, 1.0 / (1.0 - in.gamma));
  if (!(varsigma > 1.0)) throw PremiseError("varsigma > 1 violated (empty rate window)");
  return varsigma;
}

double linear_rate_bound(double rate, double alpha, double gamma, std::uint64_t s, double d0) {
  const double denom = (1.0 + gamma - alpha) * std::pow(rate, static_cast<double>(s));
  if (!(denom > 0.0)) throw PremiseError("1 + gamma - alpha > 0 violated");
  return std::sqrt(4.0 / denom * d0);
}

TheoryBounds theory_bounds(const TheoryInputs& in) {
  TheoryBounds out;
  out.inputs = in;
  out.ergodic_coefficient = ergodic_coefficient(in.alpha, in.gamma);

  if (!in.mirror_lipschitz) {
    out.violations.emplace_back("L_f finite violated (entropy mirror map)");
  } else {
    if (in.p < 1.0) {
      out.sigma1 = sigma1(in);
      out.sigma2 = sigma2(in);
    }
    out.sigma1_prime = sigma1_prime(in);
    out.sigma2_prime = sigma2_prime(in);
  }

  if (in.beta) {
    try {
      if (in.p < 1.0) {
        out.theta = theta_max(in);
      } else {
        out.varsigma = varsigma_max(in);
      }
    } catch (const PremiseError& e) {
      out.violations.emplace_back(e.what());
    }
  }
  return out;
}

TheoryBounds theory_bounds(const SolverParams& params, const FiniteSumProblem& problem) {
  return theory_bounds(TheoryInputs::from(params, problem));
}

}  // namespace bvrvi
