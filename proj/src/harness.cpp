#include "bvrvi/harness.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

namespace bvrvi {

std::string_view to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::MatrixGame:
      return "matrix-game";
    case ExperimentKind::NonmonotoneGame:
      return "nonmonotone-game";
    case ExperimentKind::LinearRate:
      return "linear-rate";
    case ExperimentKind::VarianceCheck:
      return "variance-check";
  }
  return "unknown";
}

std::string_view to_string(MethodKind kind) {
  switch (kind) {
    case MethodKind::Alg1:
      return "alg1";
    case MethodKind::Alg1P1:
      return "alg1-p1";
    case MethodKind::VrForb:
      return "vr-forb";
  }
  return "unknown";
}

std::optional<ExperimentKind> parse_experiment(std::string_view text) {
  for (auto k : {ExperimentKind::MatrixGame, ExperimentKind::NonmonotoneGame,
                 ExperimentKind::LinearRate, ExperimentKind::VarianceCheck}) {
    if (to_string(k) == text) return k;
  }
  return std::nullopt;
}

std::optional<MethodKind> parse_method(std::string_view text) {
  for (auto k : {MethodKind::Alg1, MethodKind::Alg1P1, MethodKind::VrForb}) {
    if (to_string(k) == text) return k;
  }
  return std::nullopt;
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------------
// Config text

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const auto piece = trim(s.substr(start, comma == std::string_view::npos ? s.size() - start
                                                                           : comma - start));
    if (!piece.empty()) out.push_back(piece);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* end = text.data() + text.size();
  auto res = std::from_chars(text.data(), end, value);
  if (res.ec != std::errc() || res.ptr != end) {
    throw UsageError("invalid value for " + key + ": '" + text + "'");
  }
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw UsageError("invalid value for " + key + ": '" + text + "'");
}

std::vector<MethodKind> parse_methods(const std::vector<std::string>& names) {
  std::vector<MethodKind> out;
  for (const auto& name : names) {
    auto m = parse_method(name);
    if (!m) throw UsageError("unknown method '" + name + "' (alg1, alg1-p1, vr-forb)");
    out.push_back(*m);
  }
  return out;
}

std::vector<std::uint64_t> parse_seeds(const std::vector<std::string>& names) {
  std::vector<std::uint64_t> out;
  for (const auto& s : names) out.push_back(parse_number<std::uint64_t>("seeds", s));
  return out;
}

void apply_key(ExperimentConfig& c, const std::string& key, const std::string& value) {
  if (key == "experiment") {
    auto e = parse_experiment(value);
    if (!e) throw UsageError("unknown experiment '" + value + "'");
    c.experiment = *e;
  } else if (key == "n") {
    c.n = parse_number<Index>(key, value);
  } else if (key == "seeds") {
    c.seeds = parse_seeds(split_list(value));
  } else if (key == "iters") {
    c.iters = parse_number<std::uint64_t>(key, value);
  } else if (key == "batch") {
    c.batch = parse_number<std::size_t>(key, value);
  } else if (key == "methods") {
    c.methods = parse_methods(split_list(value));
  } else if (key == "preset") {
    c.preset = value;
  } else if (key == "gamma") {
    c.gamma = parse_number<double>(key, value);
  } else if (key == "p") {
    c.p = parse_number<double>(key, value);
  } else if (key == "alpha") {
    c.alpha = parse_number<double>(key, value);
  } else if (key == "log_stride") {
    c.log_stride = parse_number<std::uint64_t>(key, value);
  } else if (key == "output") {
    c.output = value;
  } else if (key == "problem_seed") {
    c.problem_seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "mc_trials") {
    c.mc_trials = parse_number<std::uint64_t>(key, value);
  } else if (key == "wall_time") {
    c.wall_time = parse_bool(key, value);
  } else {
    throw UsageError("unknown config key '" + key + "'");
  }
}

template <class T, class F>
std::string join(const std::vector<T>& items, F&& fmt) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) out += ",";
    out += fmt(items[i]);
  }
  return out;
}

}  // namespace

std::string canonical_text(const ExperimentConfig& c) {
  std::ostringstream os;
  os << "experiment = " << to_string(c.experiment) << "\n";
  os << "n = " << c.n << "\n";
  os << "seeds = " << join(c.seeds, [](std::uint64_t s) { return std::to_string(s); }) << "\n";
  os << "iters = " << c.iters << "\n";
  if (c.batch) os << "batch = " << *c.batch << "\n";
  os << "methods = " << join(c.methods, [](MethodKind m) { return std::string(to_string(m)); })
     << "\n";
  os << "preset = " << c.preset << "\n";
  if (c.gamma) os << "gamma = " << format_double(*c.gamma) << "\n";
  if (c.p) os << "p = " << format_double(*c.p) << "\n";
  if (c.alpha) os << "alpha = " << format_double(*c.alpha) << "\n";
  os << "log_stride = " << c.log_stride << "\n";
  os << "output = " << c.output << "\n";
  os << "problem_seed = " << c.problem_seed << "\n";
  os << "mc_trials = " << c.mc_trials << "\n";
  os << "wall_time = " << (c.wall_time ? "true" : "false") << "\n";
  return os.str();
}

ExperimentConfig parse_config_text(std::string_view text) {
  ExperimentConfig c;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw UsageError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    apply_key(c, trim(body.substr(0, eq)), trim(body.substr(eq + 1)));
  }
  return c;
}

void check_config(const ExperimentConfig& c) {
  if (c.n < 2) throw UsageError("n must be at least 2");
  if (c.seeds.empty()) throw UsageError("at least one seed is required");
  if (c.iters < 1) throw UsageError("iters must be positive");
  if (c.log_stride < 1) throw UsageError("log_stride must be positive");
  if (c.methods.empty()) throw UsageError("at least one method is required");
  if (c.batch && *c.batch < 1) throw UsageError("batch must be positive");
  if (c.experiment == ExperimentKind::VarianceCheck && c.mc_trials < 2) {
    throw UsageError("mc_trials must be at least 2");
  }

  const bool named = c.preset != "auto" && c.preset != "manual";
  std::optional<Preset> preset;
  if (named) {
    preset = parse_preset(c.preset);
    if (!preset || *preset == Preset::Manual) throw UsageError("unknown preset '" + c.preset + "'");
    const char* flag = c.alpha ? "--alpha" : c.gamma ? "--gamma" : c.p ? "--p" : nullptr;
    if (flag) {
      throw UsageError(std::string("conflicting options: ") + flag + " overrides --preset " +
                       c.preset);
    }
  }

  for (MethodKind m : c.methods) {
    const std::string pair = "--method " + std::string(to_string(m)) + " with ";
    if (m == MethodKind::VrForb) {
      if (named) throw UsageError("conflicting options: " + pair + "--preset " + c.preset);
      if (c.gamma) throw UsageError("conflicting options: " + pair + "--gamma");
      if (c.experiment == ExperimentKind::LinearRate) {
        throw UsageError("conflicting options: " + pair + "--experiment linear-rate");
      }
    }
    if (m == MethodKind::Alg1P1 && (c.p.value_or(1.0) != 1.0)) {
      throw UsageError("conflicting options: " + pair + "--p " + format_double(*c.p));
    }
    if (m == MethodKind::Alg1P1 && c.experiment == ExperimentKind::MatrixGame && !c.alpha) {
      throw UsageError("--method alg1-p1 on matrix-game needs --alpha");
    }
    if (!preset) continue;
    const bool p1_preset = *preset == Preset::Example42Alg12;
    if ((m == MethodKind::Alg1P1) != p1_preset) {
      throw UsageError("conflicting options: " + pair + "--preset " + c.preset);
    }
    if (*preset == Preset::Example41 && c.experiment != ExperimentKind::MatrixGame) {
      throw UsageError("conflicting options: --preset example41 with --experiment " +
                       std::string(to_string(c.experiment)));
    }
    if ((*preset == Preset::Example42Alg11 || p1_preset) &&
        c.experiment != ExperimentKind::NonmonotoneGame) {
      throw UsageError("conflicting options: --preset " + c.preset + " with --experiment " +
                       std::string(to_string(c.experiment)));
    }
  }
}

ParseOutcome parse_config(int argc, const char* const* argv) {
  CLI::App app{"Variance-reduced inertial Bregman method: experiment runner", "bvrvi"};
  ExperimentConfig defaults;

  std::string config_file, experiment, preset, output, methods_text, seeds_text;
  std::vector<std::uint64_t> seed_flags;
  std::vector<std::string> method_flags;
  Index n = 0;
  std::uint64_t iters = 0, log_stride = 0, problem_seed = 0, mc_trials = 0;
  std::size_t batch = 0;
  double gamma = 0, p = 0, alpha = 0;
  bool wall_time = false;

  app.add_option("--config", config_file, "Flat key = value file; flags override it");
  app.add_option("--experiment", experiment,
                 "matrix-game | nonmonotone-game | linear-rate | variance-check");
  app.add_option("--n", n, "Strategy / problem dimension");
  app.add_option("--seed", seed_flags, "Run seed (repeatable)");
  app.add_option("--seeds", seeds_text, "Comma-separated run seeds");
  app.add_option("--iters", iters, "Iteration budget");
  app.add_option("--batch", batch, "Mini-batch size b");
  app.add_option("--method", method_flags, "alg1 | alg1-p1 | vr-forb (repeatable)");
  app.add_option("--methods", methods_text, "Comma-separated methods");
  app.add_option("--preset", preset,
                 "auto | manual | corollary31 | example41 | example42-alg11 | example42-alg12");
  app.add_option("--gamma", gamma, "Inertial weight override");
  app.add_option("--p", p, "Anchor refresh probability override");
  app.add_option("--alpha", alpha, "Step size override");
  app.add_option("--log-stride", log_stride, "Log every this many iterations");
  app.add_option("--output", output, "Output directory");
  app.add_option("--problem-seed", problem_seed, "Seed of the random problem instance");
  app.add_option("--mc-trials", mc_trials, "Monte Carlo batches for variance-check");
  app.add_flag("--wall-time", wall_time, "Record wall-clock milliseconds (breaks byte identity)");
  bool print_config = false;
  app.add_flag("--print-config", print_config, "Print the effective config and exit");

  ParseOutcome out;
  if (argc <= 1) {
    out.exit_code = kExitUsage;
    out.message = app.help();
    return out;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out.exit_code = kExitOk;
    out.message = app.help();
    return out;
  } catch (const CLI::ParseError& e) {
    out.exit_code = kExitUsage;
    out.message = std::string(e.what()) + "\n" + app.help();
    return out;
  }

  try {
    ExperimentConfig c = defaults;
    if (!config_file.empty()) {
      std::ifstream in(config_file);
      if (!in) {
        out.exit_code = kExitIo;
        out.message = "cannot read config file " + config_file;
        return out;
      }
      std::stringstream ss;
      ss << in.rdbuf();
      c = parse_config_text(ss.str());
    }
    auto given = [&](const char* name) { return app.count(name) > 0; };
    if (given("--experiment")) apply_key(c, "experiment", experiment);
    if (given("--n")) c.n = n;
    if (given("--seeds") || given("--seed")) {
      std::vector<std::uint64_t> seeds = parse_seeds(split_list(seeds_text));
      seeds.insert(seeds.end(), seed_flags.begin(), seed_flags.end());
      c.seeds = seeds;
    }
    if (given("--iters")) c.iters = iters;
    if (given("--batch")) c.batch = batch;
    if (given("--methods") || given("--method")) {
      std::vector<std::string> names = split_list(methods_text);
      names.insert(names.end(), method_flags.begin(), method_flags.end());
      c.methods = parse_methods(names);
    }
    if (given("--preset")) c.preset = preset;
    if (given("--gamma")) c.gamma = gamma;
    if (given("--p")) c.p = p;
    if (given("--alpha")) c.alpha = alpha;
    if (given("--log-stride")) c.log_stride = log_stride;
    if (given("--output")) c.output = output;
    if (given("--problem-seed")) c.problem_seed = problem_seed;
    if (given("--mc-trials")) c.mc_trials = mc_trials;
    if (given("--wall-time")) c.wall_time = wall_time;
    check_config(c);
    if (print_config) {
      out.message = canonical_text(c);
      out.exit_code = kExitOk;
      return out;
    }
    out.config = std::move(c);
  } catch (const UsageError& e) {
    out.exit_code = kExitUsage;
    out.message = e.what();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Problems and run options

AffineStrongConfig linear_rate_instance_config(Index dimension) {
  AffineStrongConfig cfg;
  cfg.dimension = dimension;
  cfg.components = 64;
  cfg.mu = 1.66;
  cfg.skew_scale = 0.1;
  cfg.solution_norm = 0.5;
  cfg.ball = true;
  return cfg;
}

ExperimentProblem build_problem(const ExperimentConfig& config) {
  ExperimentProblem out;
  Rng rng(config.problem_seed);
  switch (config.experiment) {
    case ExperimentKind::MatrixGame:
    case ExperimentKind::VarianceCheck:
      out.game = build_example41(config.n, rng);
      out.problem = out.game;
      break;
    case ExperimentKind::NonmonotoneGame:
      out.regularized = build_example42(config.n);
      out.problem = out.regularized;
      break;
    case ExperimentKind::LinearRate: {
      auto inst = build_affine_strong(linear_rate_instance_config(config.n), rng);
      out.problem = inst.op;
      out.solution = extragradient_solution(*inst.op);
      break;
    }
  }
  return out;
}

namespace {

SolverParams linear_rate_defaults(const FiniteSumProblem& problem, MethodKind method) {
  SolverParams params;
  params.batch = 32;
  if (method == MethodKind::Alg1) {
    params.gamma = 0.25;
    params.p = 0.01;
  } else {
    params.gamma = 1.0;
    params.p = 1.0;
  }
  if (method == MethodKind::Alg1) {
    // Just above the lower end (1/2 + gamma)/beta of the admissible step window.
    params.alpha = 1.01 * (0.5 + params.gamma) / problem.pseudomonotone_beta().value();
  } else {
    // The p = 1 window is empty whenever beta <= 2L; stay below its upper end.
    const double b = static_cast<double>(params.batch);
    const double l2p1 = problem.lipschitz() * problem.lipschitz() + 1.0;
    const double lb2 = problem.mean_lipschitz() * problem.mean_lipschitz();
    params.alpha =
        0.9 * (std::sqrt(b * b * l2p1 * l2p1 + 8.0 * b * params.gamma * lb2) - b * l2p1) / (4.0 * lb2);
  }
  return params;
}

SolverParams method_defaults(const ExperimentConfig& config, MethodKind method,
                             const ExperimentProblem& built, std::size_t batch) {
  const FiniteSumProblem& problem = *built.problem;
  if (!config.preset.empty() && config.preset != "auto" && config.preset != "manual") {
    const Preset preset = *parse_preset(config.preset);
    switch (preset) {
      case Preset::Corollary31:
        return preset_corollary31(problem.component_count(), batch, problem.lipschitz(),
                                  problem.mean_lipschitz());
      case Preset::Example41:
        return preset_example41(config.n, batch, problem.lipschitz(), problem.mean_lipschitz());
      case Preset::Example42Alg11:
        return preset_example42(Example42Variant::Alg11, problem.weak_minty_rho().value());
      case Preset::Example42Alg12:
        return preset_example42(Example42Variant::Alg12, 0.0);
      case Preset::Manual:
        break;
    }
  }
  if (method == MethodKind::VrForb) return vr_forb_example41(config.n, problem.lipschitz());
  switch (config.experiment) {
    case ExperimentKind::MatrixGame:
    case ExperimentKind::VarianceCheck:
      if (method == MethodKind::Alg1) {
        return preset_example41(config.n, batch, problem.lipschitz(), problem.mean_lipschitz());
      }
      {
        SolverParams params;
        params.gamma = 1.0;
        params.p = 1.0;
        params.alpha = config.alpha.value_or(0.0);
        return params;
      }
    case ExperimentKind::NonmonotoneGame:
      return method == MethodKind::Alg1
                 ? preset_example42(Example42Variant::Alg11, problem.weak_minty_rho().value())
                 : preset_example42(Example42Variant::Alg12, 0.0);
    case ExperimentKind::LinearRate:
      return linear_rate_defaults(problem, method);
  }
  return {};
}

std::size_t default_batch(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::MatrixGame:
    case ExperimentKind::VarianceCheck:
      return 2;
    case ExperimentKind::NonmonotoneGame:
      return 15;
    case ExperimentKind::LinearRate:
      return 32;
  }
  return 1;
}

std::vector<MetricProbe> probes_for(const ExperimentConfig& config, const ExperimentProblem& built,
                                    double gamma) {
  std::vector<MetricProbe> probes;
  switch (config.experiment) {
    case ExperimentKind::MatrixGame:
    case ExperimentKind::VarianceCheck: {
      auto game = built.game;
      probes.push_back({"duality_gap", [game](const ProbeContext& ctx) {
                          return duality_gap(*game, ctx.state.x_cur);
                        }});
      probes.push_back({"ergodic_duality_gap", [game](const ProbeContext& ctx) {
                          return duality_gap(*game, ctx.ergodic_average);
                        }});
      break;
    }
    case ExperimentKind::NonmonotoneGame: {
      const Index n = config.n;
      probes.push_back({"scaled_residual", [n](const ProbeContext& ctx) {
                          return scaled_norm_residual(ctx.state.x_cur, n);
                        }});
      break;
    }
    case ExperimentKind::LinearRate: {
      const Eigen::VectorXd solution = *built.solution;
      probes.push_back({"distance_to_solution", [solution](const ProbeContext& ctx) {
                          return (ctx.state.x_cur.values() - solution).norm();
                        }});
      probes.push_back({"natural_residual", [gamma](const ProbeContext& ctx) {
                          if (!ctx.state.last_step) return std::numeric_limits<double>::quiet_NaN();
                          const DualVector f_next =
                              ctx.problem.diagnostic_eval(ctx.state.x_cur, ctx.diagnostics);
                          return natural_residual(ctx.state, ctx.problem.geometry(), gamma,
                                                  ctx.params.alpha, f_next);
                        }});
      break;
    }
  }
  return probes;
}

}  // namespace

RunOptions resolve_run_options(const ExperimentConfig& config, MethodKind method,
                               const ExperimentProblem& built) {
  const std::size_t batch = config.batch.value_or(default_batch(config.experiment));
  RunOptions options;
  options.method = method == MethodKind::VrForb ? Method::VrForb : Method::Alg1;
  SolverParams params = method_defaults(config, method, built, batch);
  if (method != MethodKind::VrForb) params.batch = batch;
  const bool overridden = config.gamma || config.p || config.alpha;
  if (config.gamma) params.gamma = *config.gamma;
  if (config.p) params.p = *config.p;
  if (config.alpha) params.alpha = *config.alpha;
  if (overridden || config.preset == "manual") params.preset = Preset::Manual;
  params.max_iters = config.iters;
  options.params = params;
  options.probes = probes_for(config, built, method == MethodKind::VrForb ? 1.0 : params.gamma);
  options.log_stride = config.log_stride;
  options.record_wall_time = config.wall_time;
  return options;
}

Eigen::VectorXd extragradient_solution(const FiniteSumProblem& problem, double tol,
                                       std::uint64_t max_iters) {
  const GeometrySpec& geometry = problem.geometry();
  if (geometry.kind() == GeometryKind::EntropySimplex) {
    throw UnsupportedError("extragradient oracle is Euclidean");
  }
  const double eta = 1.0 / (2.0 * problem.lipschitz());
  OracleCounters scratch;
  BlockVector x = problem.default_start();
  for (std::uint64_t k = 0; k < max_iters; ++k) {
    const DualVector fx = problem.diagnostic_eval(x, scratch);
    const BlockVector natural = bregman_prox(geometry, x, fx, 1.0);
    if ((natural.values() - x.values()).norm() <= tol) return x.values();
    const BlockVector y = bregman_prox(geometry, x, fx, eta);
    x = bregman_prox(geometry, x, problem.diagnostic_eval(y, scratch), eta);
  }
  throw PremiseError("extragradient residual <= tol not reached");
}

VarianceEstimate estimate_variance(const FiniteSumProblem& problem, const BlockVector& x_s,
                                   const BlockVector& w_prev, std::size_t batch,
                                   std::uint64_t trials, Rng& rng) {
  if (trials < 2) throw ParameterError("need at least two trials");
  OracleCounters counters;
  const DualVector f_x = problem.diagnostic_eval(x_s, counters);
  const DualVector f_w = problem.diagnostic_eval(w_prev, counters);
  // E_s Delta = F(w_s) + F(x_s) - F(w_prev); the anchor value cancels in the
  // deviation, so F(w_prev) stands in for F(w_s).
  const DualVector expected = f_x;
  const SampleDistribution dist = problem.make_distribution(x_s, w_prev);
  const GeometrySpec& geometry = problem.geometry();
  double sum = 0.0, sum_sq = 0.0;
  for (std::uint64_t t = 0; t < trials; ++t) {
    const auto b = dist.degenerate() ? std::vector<IndexPair>{} : sample_batch(dist, batch, rng);
    const DualVector delta = estimator_delta(f_w, problem, x_s, w_prev, b, dist, counters);
    const double dev =
        std::pow(geometry.dual_norm(DualVector(x_s.layout(), delta.values() - expected.values())),
                 2);
    sum += dev;
    sum_sq += dev * dev;
  }
  const double m = static_cast<double>(trials);
  VarianceEstimate est;
  est.mean = sum / m;
  const double var = std::max(0.0, (sum_sq - m * est.mean * est.mean) / (m - 1.0));
  est.standard_error = std::sqrt(var / m);
  const double dist_xw = geometry.distance(x_s, w_prev);
  est.bound = problem.mean_lipschitz() * problem.mean_lipschitz() / static_cast<double>(batch) *
              dist_xw * dist_xw;
  return est;
}

double median(std::vector<double> values) {
  values.erase(std::remove_if(values.begin(), values.end(), [](double v) { return std::isnan(v); }),
               values.end());
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  if (values.size() % 2 == 1) return values[mid];
  return 0.5 * (values[mid - 1] + values[mid]);
}

unsigned worker_count() {
  if (const char* env = std::getenv("BVRVI_THREADS")) {
    unsigned v = 0;
    const std::string_view s(env);
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec == std::errc() && v > 0) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<SeedRun> run_seeds(const ExperimentConfig& config, MethodKind method,
                               const ExperimentProblem& built) {
  const RunOptions base = resolve_run_options(config, method, built);
  std::vector<SeedRun> results(config.seeds.size());
  std::vector<std::exception_ptr> errors(config.seeds.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < results.size(); i = next++) {
      try {
        RunOptions options = base;
        options.params.seed = config.seeds[i];
        results[i] = {config.seeds[i], run(*built.problem, options)};
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned workers =
      std::min<unsigned>(worker_count(), static_cast<unsigned>(results.size()));
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

namespace {

constexpr const char* kCsvHeader = "iter,component_calls,full_evals,metric_name,metric_value,wall_ms,seed\n";

}  // namespace

void write_seed_csv(std::ostream& out, const SeedRun& run) {
  out << kCsvHeader;
  const auto& names = run.trace.metric_names;
  for (const LogRecord& rec : run.trace.records) {
    for (std::size_t m = 0; m < names.size(); ++m) {
      out << rec.iteration << ',' << rec.component_calls << ',' << rec.full_evals << ','
          << names[m] << ',' << format_double(rec.metrics[m]) << ',' << format_double(rec.wall_ms)
          << ',' << run.seed << '\n';
    }
  }
}

void write_aggregate_csv(std::ostream& out, const std::vector<SeedRun>& runs) {
  out << kCsvHeader;
  if (runs.empty()) return;
  const auto& names = runs.front().trace.metric_names;
  // Runs share the logging schedule (no stop threshold in the harness), but
  // guard against ragged traces by aggregating over the shortest.
  std::size_t rows = runs.front().trace.records.size();
  for (const auto& r : runs) rows = std::min(rows, r.trace.records.size());
  for (std::size_t k = 0; k < rows; ++k) {
    std::vector<double> calls, fulls, walls;
    for (const auto& r : runs) {
      const auto& rec = r.trace.records[k];
      calls.push_back(static_cast<double>(rec.component_calls));
      fulls.push_back(static_cast<double>(rec.full_evals));
      walls.push_back(rec.wall_ms);
    }
    const auto iter = runs.front().trace.records[k].iteration;
    for (std::size_t m = 0; m < names.size(); ++m) {
      std::vector<double> vals;
      for (const auto& r : runs) vals.push_back(r.trace.records[k].metrics[m]);
      out << iter << ',' << format_double(median(calls)) << ',' << format_double(median(fulls))
          << ',' << names[m] << ',' << format_double(median(vals)) << ','
          << format_double(median(walls)) << ",median\n";
    }
  }
}

// ---------------------------------------------------------------------------
// Experiment driver

namespace {

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

void close_output(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

void write_params(std::ostream& os, MethodKind method, const RunOptions& options,
                  const FiniteSumProblem& problem) {
  const SolverParams& p = options.params;
  os << "[" << to_string(method) << "]\n";
  os << "preset = " << to_string(p.preset) << "\n";
  os << "gamma = " << format_double(method == MethodKind::VrForb ? 1.0 : p.gamma) << "\n";
  os << "p = " << format_double(p.p) << "\n";
  os << (method == MethodKind::VrForb ? "tau = " : "alpha = ") << format_double(p.alpha) << "\n";
  os << "batch = " << p.batch << "\n";
  os << "M = " << problem.component_count() << "\n";
  os << "L = " << format_double(problem.lipschitz()) << "\n";
  os << "Lbar = " << format_double(problem.mean_lipschitz()) << "\n";
  if (problem.weak_minty_rho()) os << "rho = " << format_double(*problem.weak_minty_rho()) << "\n";
  if (problem.pseudomonotone_beta()) {
    os << "beta = " << format_double(*problem.pseudomonotone_beta()) << "\n";
  }
  if (method == MethodKind::VrForb) return;
  const TheoryBounds tb = theory_bounds(p, problem);
  os << "ergodic_coefficient = " << format_double(tb.ergodic_coefficient) << "\n";
  auto opt = [&](const char* name, const std::optional<double>& v) {
    if (v) os << name << " = " << format_double(*v) << "\n";
  };
  opt("sigma1", tb.sigma1);
  opt("sigma2", tb.sigma2);
  opt("sigma1_prime", tb.sigma1_prime);
  opt("sigma2_prime", tb.sigma2_prime);
  opt("theta", tb.theta);
  opt("varsigma", tb.varsigma);
  for (const auto& v : tb.violations) os << "# premise: " << v << "\n";
  for (const auto& w : parameter_warnings(p, problem)) os << "# warning: " << w << "\n";
}

int run_variance_check(const ExperimentConfig& config, const ExperimentProblem& built,
                       const std::filesystem::path& dir, std::ostream& log) {
  const FiniteSumProblem& problem = *built.problem;
  Rng rng(config.seeds.front());
  // Random interior points of the two simplices.
  auto random_point = [&]() {
    std::exponential_distribution<double> expo(1.0);
    Eigen::VectorXd v(problem.layout().dimension());
    for (Index b = 0; b < problem.layout().num_blocks(); ++b) {
      auto seg = v.segment(problem.layout().offset(b), problem.layout().block_size(b));
      for (Index i = 0; i < seg.size(); ++i) seg[i] = expo(rng);
      seg /= seg.sum();
    }
    return BlockVector(problem.layout(), v);
  };
  const BlockVector x_s = random_point();
  const BlockVector w_prev = random_point();
  const auto path = dir / "variance-check.csv";
  std::ofstream out = open_output(path);
  out << "batch,empirical,standard_error,bound,ratio,pass\n";
  bool all = true;
  const std::vector<std::size_t> batches = config.batch
                                               ? std::vector<std::size_t>{*config.batch}
                                               : std::vector<std::size_t>{1, 4, 16};
  for (std::size_t b : batches) {
    const VarianceEstimate est = estimate_variance(problem, x_s, w_prev, b, config.mc_trials, rng);
    const bool pass = est.mean <= est.bound + 5.0 * est.standard_error;
    all = all && pass;
    out << b << ',' << format_double(est.mean) << ',' << format_double(est.standard_error) << ','
        << format_double(est.bound) << ',' << format_double(est.mean / est.bound) << ','
        << (pass ? "true" : "false") << '\n';
    log << (pass ? "PASS" : "FAIL") << " variance bound b=" << b
        << " empirical=" << format_double(est.mean) << " bound=" << format_double(est.bound)
        << " ratio=" << format_double(est.mean / est.bound) << "\n";
  }
  close_output(out, path);
  return all ? kExitOk : kExitPremise;
}

}  // namespace

int run_experiment(const ExperimentConfig& config, std::ostream& log) {
  try {
    check_config(config);
    const std::filesystem::path dir(config.output);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir)) {
      throw IoError("cannot create output directory " + dir.string());
    }
    const ExperimentProblem built = build_problem(config);
    const std::string exp = std::string(to_string(config.experiment));

    std::ostringstream header;
    header << canonical_text(config);
    if (config.experiment == ExperimentKind::VarianceCheck) {
      log << header.str();
      return run_variance_check(config, built, dir, log);
    }

    std::vector<std::pair<MethodKind, std::vector<SeedRun>>> all;
    for (MethodKind method : config.methods) {
      const RunOptions options = resolve_run_options(config, method, built);
      write_params(header, method, options, *built.problem);
      all.emplace_back(method, run_seeds(config, method, built));
    }
    {
      const auto path = dir / (exp + "_header.txt");
      std::ofstream out = open_output(path);
      out << header.str();
      close_output(out, path);
    }
    log << header.str();

    const auto cmp_path = dir / (exp + "_comparison.csv");
    std::ofstream cmp = open_output(cmp_path);
    cmp << "method,seed,metric_name,final_metric,wall_ms,component_calls\n";
    for (const auto& [method, runs] : all) {
      const std::string m(to_string(method));
      for (const SeedRun& r : runs) {
        const auto path = dir / (exp + "_" + m + "_seed" + std::to_string(r.seed) + ".csv");
        std::ofstream out = open_output(path);
        write_seed_csv(out, r);
        close_output(out, path);
      }
      {
        const auto path = dir / (exp + "_" + m + "_aggregate.csv");
        std::ofstream out = open_output(path);
        write_aggregate_csv(out, runs);
        close_output(out, path);
      }
      const auto& names = runs.front().trace.metric_names;
      for (std::size_t k = 0; k < names.size(); ++k) {
        std::vector<double> finals, walls, calls;
        for (const SeedRun& r : runs) {
          const LogRecord& last = r.trace.records.back();
          cmp << m << ',' << r.seed << ',' << names[k] << ',' << format_double(last.metrics[k])
              << ',' << format_double(last.wall_ms) << ',' << last.component_calls << '\n';
          finals.push_back(last.metrics[k]);
          walls.push_back(last.wall_ms);
          calls.push_back(static_cast<double>(last.component_calls));
        }
        cmp << m << ",median," << names[k] << ',' << format_double(median(finals)) << ','
            << format_double(median(walls)) << ',' << format_double(median(calls)) << '\n';
        log << m << " median final " << names[k] << " = " << format_double(median(finals))
            << "\n";
      }
    }
    close_output(cmp, cmp_path);
    return kExitOk;
  } catch (const UsageError& e) {
    log << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ParameterError& e) {
    log << "parameter error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const PremiseError& e) {
    log << "premise violated: " << e.what() << "\n";
    return kExitPremise;
  } catch (const IoError& e) {
    log << "I/O error: " << e.what() << "\n";
    return kExitIo;
  }
}

}  // namespace bvrvi
