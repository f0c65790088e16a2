#include "bvrvi/solver.hpp"

#include <cassert>
#include <chrono>
#include <cmath>

namespace bvrvi {

namespace {

bool coin(Rng& rng, double p) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  return unit(rng) < p;
}

#ifndef NDEBUG
void check_anchor_cache(const SolverState& state, const FiniteSumProblem& problem) {
  OracleCounters scratch;
  const DualVector fresh = problem.diagnostic_eval(state.w_cur, scratch);
  assert(fresh.values() == state.f_anchor.values() && "anchor cache out of sync");
}
#endif

}  // namespace

SolverState initial_state(const FiniteSumProblem& problem, const BlockVector& start,
                          std::uint64_t seed) {
  require_same_layout(problem.layout(), start.layout(), "initial_state");
  SolverState state;
  state.x_cur = start;
  state.x_prev = start;
  state.w_cur = start;
  state.w_prev = start;
  state.rng = Rng(seed);
  state.f_anchor = problem.full_eval(start, state.counters);
  state.memo.at_cur = state.f_anchor;
  return state;
}

void step(SolverState& state, const FiniteSumProblem& problem, const SolverParams& params) {
  const GeometrySpec& geometry = problem.geometry();

  // (a)-(c) oracle distribution, batch, estimator
  const SampleDistribution dist = problem.make_distribution(state.x_cur, state.w_prev);
  std::vector<IndexPair> batch;
  const bool sampled = !dist.degenerate();
  if (sampled) batch = sample_batch(dist, params.batch, state.rng);
  DualVector delta = estimator_delta(state.f_anchor, problem, state.x_cur, state.w_prev, batch,
                                     dist, state.counters);

  // (d) inertial prox
  BlockVector x_next =
      fused_inertial_prox(geometry, state.x_cur, state.x_prev, params.gamma, delta, params.alpha);

  // (e) anchor coin: x_{s+1} on success, x_s otherwise
  const bool refreshed = coin(state.rng, params.p);

  // (f) anchor value, reusing the memo for x_s
  IterateMemo next_memo;
  next_memo.at_prev = state.memo.at_cur;
  DualVector f_next_anchor;
  if (refreshed) {
    f_next_anchor = problem.full_eval(x_next, state.counters);
    next_memo.at_cur = f_next_anchor;
  } else {
    if (!next_memo.at_prev) next_memo.at_prev = problem.full_eval(state.x_cur, state.counters);
    f_next_anchor = *next_memo.at_prev;
  }

  // (g) shift the window
  StepRecord record{std::move(delta), state.x_cur, state.x_prev, refreshed, sampled};
  BlockVector w_next = refreshed ? x_next : state.x_cur;
  state.w_prev = std::move(state.w_cur);
  state.w_cur = std::move(w_next);
  state.x_prev = std::move(state.x_cur);
  state.x_cur = std::move(x_next);
  state.f_anchor = std::move(f_next_anchor);
  state.memo = std::move(next_memo);
  state.last_step = std::move(record);
  state.iteration += 1;
  if (sampled) state.sampled_iterations += 1;
  if (refreshed) state.anchor_refreshes += 1;
#ifndef NDEBUG
  check_anchor_cache(state, problem);
#endif
}

void vr_forb_step(SolverState& state, const FiniteSumProblem& problem, double tau, double p) {
  const SampleDistribution dist = problem.uniform_distribution();
  const std::vector<IndexPair> batch = sample_batch(dist, 1, state.rng);
  DualVector delta = estimator_delta(state.f_anchor, problem, state.x_cur, state.w_prev, batch,
                                     dist, state.counters);
  BlockVector x_next = bregman_prox(problem.geometry(), state.x_cur, delta, tau);
  const bool refreshed = coin(state.rng, p);

  IterateMemo next_memo;
  next_memo.at_prev = state.memo.at_cur;
  StepRecord record{std::move(delta), state.x_cur, state.x_prev, refreshed, true};
  state.w_prev = state.w_cur;
  if (refreshed) {
    state.f_anchor = problem.full_eval(x_next, state.counters);
    next_memo.at_cur = state.f_anchor;
    state.w_cur = x_next;
  }
  state.x_prev = std::move(state.x_cur);
  state.x_cur = std::move(x_next);
  state.memo = std::move(next_memo);
  state.last_step = std::move(record);
  state.iteration += 1;
  state.sampled_iterations += 1;
  if (refreshed) state.anchor_refreshes += 1;
#ifndef NDEBUG
  check_anchor_cache(state, problem);
#endif
}

BlockVector RunTrace::ergodic_average() const {
  if (ergodic_count == 0) return start;
  return BlockVector(start.layout(), ergodic_sum / static_cast<double>(ergodic_count));
}

RunTrace run(const FiniteSumProblem& problem, const RunOptions& options) {
  const SolverParams& params = options.params;
  if (options.method == Method::Alg1) {
    validate(params, problem.component_count());
    if (params.preset == Preset::Corollary31 || params.preset == Preset::Example41) {
      const double bound = monotone_step_bound(params.gamma, params.p, params.batch,
                                               problem.lipschitz(), problem.mean_lipschitz());
      if (params.alpha > bound) {
        throw PremiseError("alpha <= min{(gamma-p)/(2(1-p)), (1-gamma)b/((1-p)(2Lbar^2+bL^2))} violated");
      }
    }
  } else {
    if (!(params.p >= 0.0 && params.p <= 1.0)) throw ParameterError("require 0 <= p <= 1");
    if (!(params.alpha > 0.0)) throw ParameterError("require tau > 0");
  }
  if (options.log_stride == 0) throw ParameterError("log stride must be positive");

  const auto clock_start = std::chrono::steady_clock::now();
  RunTrace trace;
  trace.start = options.start ? *options.start : problem.default_start();
  trace.ergodic_sum = Eigen::VectorXd::Zero(trace.start.size());
  for (const auto& probe : options.probes) trace.metric_names.push_back(probe.name);

  SolverState state = initial_state(problem, trace.start, params.seed);

  auto log = [&]() {
    LogRecord rec;
    rec.iteration = state.iteration;
    rec.component_calls = state.counters.component_calls;
    rec.full_evals = state.counters.full_evals;
    const BlockVector avg = trace.ergodic_average();
    ProbeContext ctx{state, problem, params, avg, trace.diagnostics};
    rec.metrics.reserve(options.probes.size());
    for (const auto& probe : options.probes) rec.metrics.push_back(probe.evaluate(ctx));
    if (options.record_wall_time) {
      rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                              clock_start)
                        .count();
    }
    trace.records.push_back(std::move(rec));
    return options.stop_threshold && !trace.records.back().metrics.empty() &&
           trace.records.back().metrics.front() <= *options.stop_threshold;
  };

  bool stop = log();
  while (!stop && state.iteration < params.max_iters) {
    if (options.method == Method::Alg1) {
      step(state, problem, params);
    } else {
      vr_forb_step(state, problem, params.alpha, params.p);
    }
    trace.ergodic_sum += state.x_cur.values();
    trace.ergodic_count += 1;
    if (state.iteration % options.log_stride == 0 || state.iteration == params.max_iters) {
      stop = log();
    }
  }
  trace.final_state = std::move(state);
  return trace;
}

}  // namespace bvrvi
