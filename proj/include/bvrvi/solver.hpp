#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bvrvi/block_vector.hpp"
#include "bvrvi/geometry.hpp"
#include "bvrvi/operators.hpp"

namespace bvrvi {

enum class Preset { Manual, Corollary31, Example41, Example42Alg11, Example42Alg12 };

std::string_view to_string(Preset preset);
std::optional<Preset> parse_preset(std::string_view text);

struct SolverParams {
  double gamma = 1.0;  // inertial weight on x_s in the prox centre
  double p = 1.0;      // anchor refresh probability
  double alpha = 0.1;  // step size
  std::size_t batch = 1;
  std::uint64_t max_iters = 1000;
  std::uint64_t seed = 0;
  Preset preset = Preset::Manual;
};

/// Throws ParameterError unless 0 < p <= 1, 0 < gamma <= 1, p < gamma when
/// p < 1, alpha > 0 and 1 <= batch <= M.
void validate(const SolverParams& params, std::uint64_t component_count);

/// Largest step the ergodic-rate theorem admits for the monotone case (p < 1):
/// min{(gamma - p) / (2 (1 - p)), (1 - gamma) b / ((1 - p) (2 Lbar^2 + b L^2))}.
double monotone_step_bound(double gamma, double p, std::size_t batch, double lipschitz,
                           double mean_lipschitz);

/// Human-readable notes for parameter choices outside the theory (research
/// mode: these never abort a run).
std::vector<std::string> parameter_warnings(const SolverParams& params,
                                            const FiniteSumProblem& problem);

/// p = 1/M, gamma = p + 1/sqrt(M), alpha = monotone_step_bound(...).
SolverParams preset_corollary31(std::uint64_t component_count, std::size_t batch, double lipschitz,
                                double mean_lipschitz);

/// Matrix game experiment settings: the same step rule with p = 1/n and
/// gamma = p + 1/sqrt(n), n the strategy dimension.
SolverParams preset_example41(Index n, std::size_t batch, double lipschitz, double mean_lipschitz);

enum class Example42Variant { Alg11, Alg12 };

/// Alg11: gamma = 0.94, p = 0.82, b = 15, alpha = 8 rho / (1 - (1-p) / (1.63 (gamma-p))).
/// Alg12: gamma = p = 1, b = 15, alpha = 0.015.
SolverParams preset_example42(Example42Variant variant, double rho);

/// VR-FoRB baseline settings: p = 8.15 / sqrt(n), step tau = (1 - sqrt(1 - p)) / (3 L^2),
/// returned with alpha = tau, gamma = 1, batch = 1.
SolverParams vr_forb_example41(Index n, double lipschitz);

/// Memoized full operator value at one of the two most recent x iterates.
struct IterateMemo {
  std::optional<DualVector> at_cur;
  std::optional<DualVector> at_prev;
};

/// Quantities of the most recent step that residual diagnostics need.
struct StepRecord {
  DualVector delta;       // the estimator used by the prox step
  BlockVector x_s;        // prox centre inputs
  BlockVector x_s_prev;
  bool anchor_refreshed = false;
  bool sampled = false;
};

struct SolverState {
  BlockVector x_cur;
  BlockVector x_prev;
  BlockVector w_cur;
  BlockVector w_prev;
  DualVector f_anchor;  // F(w_cur), kept coherent with w_cur
  IterateMemo memo;
  std::optional<StepRecord> last_step;
  std::uint64_t iteration = 0;
  Rng rng;
  OracleCounters counters;
  std::uint64_t sampled_iterations = 0;
  std::uint64_t anchor_refreshes = 0;
};

/// x_0 = x_{-1} = w_0 = w_{-1} = start; evaluates F(start) once.
SolverState initial_state(const FiniteSumProblem& problem, const BlockVector& start,
                          std::uint64_t seed);

/// One iteration of the variance-reduced inertial Bregman method. Random
/// draws happen in the fixed order: batch (skipped when the distribution is
/// degenerate), then the anchor coin.
void step(SolverState& state, const FiniteSumProblem& problem, const SolverParams& params);

/// One iteration of the VR-FoRB baseline: single uniform sample, plain prox at
/// x_s with step tau, and an anchor that keeps w_s on a failed coin.
void vr_forb_step(SolverState& state, const FiniteSumProblem& problem, double tau, double p);

enum class Method { Alg1, VrForb };

/// What a metric probe sees at a logged iteration.
struct ProbeContext {
  const SolverState& state;
  const FiniteSumProblem& problem;
  const SolverParams& params;
  /// Ergodic mean of x_1..x_s; equals x_0 before the first step.
  const BlockVector& ergodic_average;
  OracleCounters& diagnostics;
};

struct MetricProbe {
  std::string name;
  std::function<double(const ProbeContext&)> evaluate;
};

struct LogRecord {
  std::uint64_t iteration = 0;
  std::uint64_t component_calls = 0;
  std::uint64_t full_evals = 0;
  std::vector<double> metrics;  // parallel to RunTrace::metric_names
  double wall_ms = 0.0;
};

struct RunOptions {
  Method method = Method::Alg1;
  SolverParams params;  // for VR-FoRB: alpha is tau, gamma ignored, batch = 1
  std::vector<MetricProbe> probes;
  std::uint64_t log_stride = 100;
  std::optional<BlockVector> start;
  /// Stop once the first probe drops to this value. Off by default.
  std::optional<double> stop_threshold;
  bool record_wall_time = false;
};

struct RunTrace {
  std::vector<std::string> metric_names;
  std::vector<LogRecord> records;
  BlockVector start;
  Eigen::VectorXd ergodic_sum;
  std::uint64_t ergodic_count = 0;
  SolverState final_state;
  OracleCounters diagnostics;

  /// (1/S) sum_{s<S} x_{s+1}; x_0 when no step was taken.
  BlockVector ergodic_average() const;
};

/// Runs params.max_iters steps from `start` (default: problem.default_start()),
/// logging at iteration 0, every log_stride iterations, and the last iteration.
/// Identical options give identical traces (wall time aside).
RunTrace run(const FiniteSumProblem& problem, const RunOptions& options);

}  // namespace bvrvi
