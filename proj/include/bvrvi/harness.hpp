#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bvrvi/metrics.hpp"
#include "bvrvi/operators.hpp"
#include "bvrvi/solver.hpp"

namespace bvrvi {

enum class ExperimentKind { MatrixGame, NonmonotoneGame, LinearRate, VarianceCheck };
enum class MethodKind { Alg1, Alg1P1, VrForb };

std::string_view to_string(ExperimentKind kind);
std::string_view to_string(MethodKind kind);
std::optional<ExperimentKind> parse_experiment(std::string_view text);
std::optional<MethodKind> parse_method(std::string_view text);

/// Thrown for invalid or conflicting command-line / config-file input.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum ExitCode : int { kExitOk = 0, kExitUsage = 2, kExitPremise = 3, kExitIo = 4 };

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::MatrixGame;
  Index n = 100;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::uint64_t iters = 15000;
  std::optional<std::size_t> batch;  // experiment default when unset
  std::vector<MethodKind> methods{MethodKind::Alg1};
  std::string preset = "auto";  // auto, manual or a solver preset name
  std::optional<double> gamma;
  std::optional<double> p;
  std::optional<double> alpha;
  std::uint64_t log_stride = 100;
  std::string output = "out";
  std::uint64_t problem_seed = 0;  // seeds the random payoff / instance
  std::uint64_t mc_trials = 100000;
  bool wall_time = false;

  bool operator==(const ExperimentConfig&) const = default;
};

/// Flat `key = value` lines in a fixed key order; unset optionals are omitted.
std::string canonical_text(const ExperimentConfig& config);

/// Inverse of canonical_text; also accepts hand-written files with comments
/// (#) and blank lines. Unknown keys throw UsageError.
ExperimentConfig parse_config_text(std::string_view text);

/// Checks method / preset / override combinations. Throws UsageError naming
/// the offending pair.
void check_config(const ExperimentConfig& config);

struct ParseOutcome {
  std::optional<ExperimentConfig> config;  // empty: exit with `exit_code`
  int exit_code = kExitOk;
  std::string message;  // usage text or error
};

/// Command line (and an optional `--config file`, which flags override).
/// Empty argv prints usage and yields the usage exit code.
ParseOutcome parse_config(int argc, const char* const* argv);

/// Built problem plus everything needed to report against it.
struct ExperimentProblem {
  std::shared_ptr<FiniteSumProblem> problem;
  std::optional<Eigen::VectorXd> solution;  // linear-rate only
  std::shared_ptr<MatrixGameOperator> game;
  std::shared_ptr<RegularizedGameOperator> regularized;
};

ExperimentProblem build_problem(const ExperimentConfig& config);

/// Effective solver settings for `method` (presets resolved, overrides applied).
RunOptions resolve_run_options(const ExperimentConfig& config, MethodKind method,
                               const ExperimentProblem& built);

/// Deterministic extragradient with step 1/(2L) and exact operator calls,
/// stopped when |x - P(x - F(x))| <= tol. Throws PremiseError when the
/// tolerance is not reached within max_iters.
Eigen::VectorXd extragradient_solution(const FiniteSumProblem& problem, double tol = 1e-12,
                                       std::uint64_t max_iters = 1000000);

/// Affine strongly monotone instance used by the linear-rate experiment.
AffineStrongConfig linear_rate_instance_config(Index dimension);

/// Monte Carlo estimate of E |Delta - E Delta|_*^2 for fixed (x_s, w_prev).
struct VarianceEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
  double bound = 0.0;  // Lbar^2 / b * |x_s - w_prev|^2
};

VarianceEstimate estimate_variance(const FiniteSumProblem& problem, const BlockVector& x_s,
                                   const BlockVector& w_prev, std::size_t batch,
                                   std::uint64_t trials, Rng& rng);

/// Shortest round-trip decimal text for a double.
std::string format_double(double v);

/// Median of the finite entries; NaN if there are none.
double median(std::vector<double> values);

/// Worker count: BVRVI_THREADS if set and positive, else hardware concurrency.
unsigned worker_count();

struct SeedRun {
  std::uint64_t seed = 0;
  RunTrace trace;
};

/// Runs all seeds of one method, in parallel, returning results in seed order.
std::vector<SeedRun> run_seeds(const ExperimentConfig& config, MethodKind method,
                               const ExperimentProblem& built);

void write_seed_csv(std::ostream& out, const SeedRun& run);
/// Median across seeds per logged iteration and metric; seed column "median".
void write_aggregate_csv(std::ostream& out, const std::vector<SeedRun>& runs);

/// Runs the configured experiment, writes CSVs under config.output and a run
/// header, and returns an exit code. Messages go to `log`.
int run_experiment(const ExperimentConfig& config, std::ostream& log);

}  // namespace bvrvi
