// Acceptance suite: one PASS/FAIL line per criterion.
//   acceptance            run everything
//   acceptance 3 5a 8     run a subset ("5" means 5a and 5b)

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "bvrvi/harness.hpp"
#include "bvrvi/metrics.hpp"
#include "bvrvi/solver.hpp"
#include "support/oracles.hpp"

using namespace bvrvi;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

double final_metric(const RunTrace& t, const std::string& name) {
  const auto it = std::find(t.metric_names.begin(), t.metric_names.end(), name);
  if (it == t.metric_names.end()) throw std::logic_error("no metric " + name);
  return t.records.back().metrics[static_cast<std::size_t>(it - t.metric_names.begin())];
}

// ---------------------------------------------------------------------------

Verdict criterion1() {
  oracle::Rng rng(101);
  double worst = 0.0;
  int checks = 0;
  for (Index n : {2, 3, 4}) {
    Eigen::MatrixXd a(n, n);
    for (Index i = 0; i < n * n; ++i) a.data()[i] = oracle::random_normal(rng, 1)[0];
    MatrixGameOperator game(a);
    RegularizedGameOperator reg(a, 0.01);
    for (const FiniteSumProblem* op : {static_cast<const FiniteSumProblem*>(&game),
                                       static_cast<const FiniteSumProblem*>(&reg)}) {
      for (int t = 0; t < 20; ++t) {
        const BlockVector z = oracle::random_feasible(op->geometry(), rng);
        const BlockVector u = oracle::random_feasible(op->geometry(), rng);
        const BlockVector v = oracle::random_feasible(op->geometry(), rng);
        const SampleDistribution dist = op->make_distribution(u, v);
        OracleCounters c;
        Eigen::VectorXd sum = Eigen::VectorXd::Zero(z.size());
        for (Index i = 0; i < n; ++i) {
          for (Index k = 0; k < n; ++k) {
            const double pr = dist.probability({i, k});
            if (pr > 0.0) sum += pr * op->component_eval({i, k}, z, dist, c).values();
          }
        }
        worst = std::max(worst, (sum - op->full_eval(z, c).values()).cwiseAbs().maxCoeff());
        ++checks;
      }
    }
  }
  return {worst <= 1e-12, std::to_string(checks) + " points, max coordinate error " + fmt(worst)};
}

Verdict criterion2() {
  Rng rng(202);
  auto game = build_example41(8, rng);
  oracle::Rng pick(203);
  Verdict v;
  double worst_ratio = 0.0;
  for (int pair = 0; pair < 3; ++pair) {
    const BlockVector xs = oracle::random_feasible(game->geometry(), pick);
    const BlockVector wp = oracle::random_feasible(game->geometry(), pick);
    for (std::size_t b : {1u, 4u, 16u}) {
      const VarianceEstimate e = estimate_variance(*game, xs, wp, b, 100000, rng);
      const bool ok = e.mean <= e.bound + 5.0 * e.standard_error;
      worst_ratio = std::max(worst_ratio, e.mean / e.bound);
      if (!ok) {
        v.pass = false;
        v.detail += "b=" + std::to_string(b) + " mean " + fmt(e.mean) + " > bound " + fmt(e.bound) + "; ";
      }
    }
  }
  v.detail += "9 cases, largest variance/bound ratio " + fmt(worst_ratio);
  return v;
}

Verdict criterion3() {
  oracle::Rng rng(303);
  const BlockLayout layout{4, 3};
  const std::vector<GeometrySpec> specs = {GeometrySpec::entropy_simplex(layout),
                                           GeometrySpec::euclidean_ball(layout, 1.0),
                                           GeometrySpec::euclidean_free(layout)};
  double worst_dist = 0.0, worst_violation = 0.0;
  std::uniform_real_distribution<double> unit(0.05, 1.0);
  for (const auto& spec : specs) {
    for (int t = 0; t < 100; ++t) {
      const BlockVector x1 = oracle::random_feasible(spec, rng);
      const BlockVector x2 = oracle::random_feasible(spec, rng);
      const Eigen::VectorXd y = oracle::random_normal(rng, layout.dimension());
      const double gamma = unit(rng), alpha = unit(rng);
      const BlockVector zp = fused_inertial_prox(spec, x1, x2, gamma, DualVector(layout, y), alpha);
      const Eigen::VectorXd ref = oracle::brute_force_prox(spec, x1.values(), x2.values(), gamma, y, alpha);
      worst_dist = std::max(worst_dist, (zp.values() - ref).norm());
      // alpha <y, z - z+> >= D(z, z+) + gamma (D(z+, x1) - D(z, x1)) + (1-gamma)(D(z+, x2) - D(z, x2))
      for (int k = 0; k < 50; ++k) {
        const Eigen::VectorXd z = oracle::random_feasible(spec, rng, 0.0).values();
        auto d = [&](const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
          return oracle::divergence(spec, p, q);
        };
        const double lhs = alpha * y.dot(z - zp.values());
        const double rhs = d(z, zp.values()) +
                           gamma * (d(zp.values(), x1.values()) - d(z, x1.values())) +
                           (1 - gamma) * (d(zp.values(), x2.values()) - d(z, x2.values()));
        worst_violation = std::max(worst_violation, (rhs - lhs) / std::max(1.0, std::abs(lhs)));
      }
    }
  }
  return {worst_dist <= 1e-6 && worst_violation <= 1e-8,
          "300 instances, max distance to brute force " + fmt(worst_dist) +
              ", max inequality violation " + fmt(std::max(0.0, worst_violation))};
}

Verdict criterion4() {
  const Index n = 20;
  Rng rng(404);
  auto raw = build_example41(n, rng);
  const Eigen::MatrixXd a = raw->payoff() / raw->payoff().cwiseAbs().maxCoeff();
  MatrixGameOperator game(a);
  RunOptions options;
  options.params = preset_corollary31(static_cast<std::uint64_t>(n * n), 2, game.lipschitz(),
                                      game.mean_lipschitz());
  options.params.max_iters = 8000;
  options.log_stride = 500;
  options.probes = {{"ergodic_gap", [&game](const ProbeContext& c) {
                       return duality_gap(game, c.ergodic_average);
                     }}};
  const std::vector<std::uint64_t> horizons{500, 2000, 8000};
  std::map<std::uint64_t, double> mean_gap;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    options.params.seed = seed;
    const RunTrace t = run(game, options);
    for (const auto& rec : t.records) {
      if (std::find(horizons.begin(), horizons.end(), rec.iteration) != horizons.end()) {
        mean_gap[rec.iteration] += rec.metrics[0] / 10.0;
      }
    }
  }
  const double coef = ergodic_coefficient(options.params.alpha, options.params.gamma);
  const double dmax = 2.0 * std::log(static_cast<double>(n));
  Verdict v;
  std::vector<double> lx, ly;
  for (std::uint64_t s : horizons) {
    const double bound = coef / static_cast<double>(s) * dmax * 1.1;
    if (!(mean_gap[s] <= bound)) v.pass = false;
    v.detail += "S=" + std::to_string(s) + " gap " + fmt(mean_gap[s]) + " (bound " + fmt(bound) + "), ";
    lx.push_back(std::log(static_cast<double>(s)));
    ly.push_back(std::log(mean_gap[s]));
  }
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / 3.0;
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / 3.0;
  double sxy = 0, sxx = 0;
  for (int i = 0; i < 3; ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  const double slope = sxy / sxx;
  if (!(slope >= -1.3 && slope <= -0.7)) v.pass = false;
  v.detail += "log-log slope " + fmt(slope);
  return v;
}

struct LinearSetup {
  ExperimentConfig config;
  ExperimentProblem built;
};

LinearSetup linear_setup() {
  LinearSetup s;
  s.config.experiment = ExperimentKind::LinearRate;
  s.config.n = 10;
  s.config.iters = 3000;
  s.built = build_problem(s.config);
  return s;
}

// Mean distance to x* over 5 seeds at the checkpoints.
std::map<std::uint64_t, double> linear_distances(const LinearSetup& s, RunOptions options) {
  const Eigen::VectorXd xs = *s.built.solution;
  options.log_stride = 500;
  options.probes = {{"distance", [xs](const ProbeContext& c) {
                       return (c.state.x_cur.values() - xs).norm();
                     }}};
  std::map<std::uint64_t, double> mean;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    options.params.seed = seed;
    const RunTrace t = run(*s.built.problem, options);
    for (const auto& rec : t.records) mean[rec.iteration] += rec.metrics[0] / 5.0;
  }
  return mean;
}

Verdict linear_rate_check(MethodKind method) {
  const LinearSetup s = linear_setup();
  const RunOptions options = resolve_run_options(s.config, method, s.built);
  const SolverParams& p = options.params;
  const TheoryInputs in = TheoryInputs::from(p, *s.built.problem);
  const double d0 =
      0.5 * (*s.built.solution - s.built.problem->default_start().values()).squaredNorm();
  const auto mean = linear_distances(s, options);
  Verdict v;
  double rate = 0.0;
  try {
    rate = method == MethodKind::Alg1 ? theta_max(in) : varsigma_max(in);
  } catch (const PremiseError& e) {
    v.pass = false;
    // With beta <= 2L the p = 1 window (1/2+gamma)/beta < alpha < gamma/(L^2+1) is empty.
    v.detail = std::string("rate premise fails: ") + e.what() + " (beta " + fmt(in.beta.value_or(0.0)) +
               ", L " + fmt(in.lipschitz) + ", alpha " + fmt(p.alpha) + ", gamma " + fmt(p.gamma) +
               "); observed distance at s=3000 " + fmt(mean.at(3000));
    return v;
  }
  v.detail = std::string(method == MethodKind::Alg1 ? "theta " : "varsigma ") + fmt(rate) + ": ";
  for (std::uint64_t k : {500u, 1500u, 3000u}) {
    const double bound = linear_rate_bound(rate, p.alpha, p.gamma, k, d0) * 1.1;
    if (!(mean.at(k) <= bound)) v.pass = false;
    v.detail += "s=" + std::to_string(k) + " dist " + fmt(mean.at(k)) + " (bound " + fmt(bound) + ") ";
  }
  return v;
}

Verdict criterion5a() { return linear_rate_check(MethodKind::Alg1); }
Verdict criterion5b() { return linear_rate_check(MethodKind::Alg1P1); }

Verdict criterion6() {
  ExperimentConfig c;
  c.experiment = ExperimentKind::MatrixGame;
  c.n = 100;
  c.iters = 15000;
  c.seeds = {1, 2, 3, 4, 5};
  c.batch = 2;
  c.log_stride = 1000;
  const ExperimentProblem built = build_problem(c);
  std::map<MethodKind, double> med;
  for (MethodKind m : {MethodKind::Alg1, MethodKind::VrForb}) {
    std::vector<double> finals;
    for (const SeedRun& r : run_seeds(c, m, built)) {
      finals.push_back(final_metric(r.trace, "ergodic_duality_gap"));
    }
    med[m] = median(finals);
  }
  const double a = med[MethodKind::Alg1], b = med[MethodKind::VrForb];
  return {a >= 0.002 && a <= 0.05 && a < b,
          "median final ergodic duality gap alg1 " + fmt(a) + " (band [0.002, 0.05]), vr-forb " + fmt(b)};
}

Verdict criterion7() {
  ExperimentConfig c;
  c.experiment = ExperimentKind::NonmonotoneGame;
  c.n = 100;
  c.iters = 15000;
  c.seeds = {1, 2, 3};
  c.log_stride = 100;
  const ExperimentProblem built = build_problem(c);
  Verdict v;
  for (MethodKind m : {MethodKind::Alg1, MethodKind::Alg1P1}) {
    const std::vector<SeedRun> runs = run_seeds(c, m, built);
    const auto& recs = runs.front().trace.records;
    std::vector<double> med(recs.size());
    for (std::size_t k = 0; k < recs.size(); ++k) {
      std::vector<double> vals;
      for (const auto& r : runs) vals.push_back(r.trace.records[k].metrics[0]);
      med[k] = median(vals);
    }
    const double initial = med.front(), last = med.back();
    bool ok = recs.back().iteration == 15000 && last <= 0.1 * initial;
    double prev = std::numeric_limits<double>::infinity();
    int bad_windows = 0;
    for (std::uint64_t w = 1; w <= 15; ++w) {
      std::vector<double> window;
      for (std::size_t k = 0; k < recs.size(); ++k) {
        if (recs[k].iteration > (w - 1) * 1000 && recs[k].iteration <= w * 1000) window.push_back(med[k]);
      }
      const double wm = median(window);
      if (!(wm < prev)) ++bad_windows;
      prev = wm;
    }
    ok = ok && bad_windows == 0;
    v.pass = v.pass && ok;
    v.detail += std::string(m == MethodKind::Alg1 ? "alg11" : "alg12") + " residual " + fmt(initial) +
                " -> " + fmt(last) + ", non-decreasing windows " + std::to_string(bad_windows) + "; ";
  }
  return v;
}

std::string sha256_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string data = ss.str();
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr);
  std::string hex;
  char buf[3];
  for (unsigned i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", md[i]);
    hex += buf;
  }
  return hex;
}

std::map<std::string, std::string> hash_outputs(const ExperimentConfig& c) {
  fs::remove_all(c.output);
  std::ostringstream log;
  if (run_experiment(c, log) != kExitOk) throw std::runtime_error("experiment failed: " + log.str());
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(c.output)) {
    out[e.path().filename().string()] = sha256_file(e.path());
  }
  fs::remove_all(c.output);
  return out;
}

Verdict criterion8() {
  const fs::path dir = fs::temp_directory_path() / "bvrvi_acceptance_determinism";
  std::vector<ExperimentConfig> configs(4);
  configs[0].experiment = ExperimentKind::MatrixGame;
  configs[0].n = 100;
  configs[0].iters = 2000;
  configs[0].seeds = {1, 2, 3};
  configs[0].methods = {MethodKind::Alg1, MethodKind::VrForb};
  configs[1].experiment = ExperimentKind::NonmonotoneGame;
  configs[1].n = 50;
  configs[1].iters = 2000;
  configs[1].seeds = {1, 2};
  configs[1].methods = {MethodKind::Alg1, MethodKind::Alg1P1};
  configs[2].experiment = ExperimentKind::LinearRate;
  configs[2].n = 10;
  configs[2].iters = 1000;
  configs[2].seeds = {1, 2};
  configs[2].methods = {MethodKind::Alg1, MethodKind::Alg1P1};
  configs[3].experiment = ExperimentKind::VarianceCheck;
  configs[3].n = 8;
  configs[3].mc_trials = 5000;
  std::size_t files = 0;
  Verdict v;
  for (auto& c : configs) {
    c.output = (dir / std::string(to_string(c.experiment))).string();
    const auto first = hash_outputs(c);
    const auto second = hash_outputs(c);
    files += first.size();
    if (first != second || first.empty()) {
      v.pass = false;
      v.detail += std::string(to_string(c.experiment)) + " differs; ";
    }
  }
  fs::remove_all(dir);
  v.detail += std::to_string(files) + " output files hashed twice (SHA-256)";
  return v;
}

// One-component affine operator on a product of simplices.
class SingleAffineOnSimplex final : public FiniteSumProblem {
 public:
  SingleAffineOnSimplex(Eigen::MatrixXd b, Eigen::VectorXd c)
      : FiniteSumProblem(GeometrySpec::entropy_simplex(BlockLayout{3, 2}), 1,
                         b.cwiseAbs().colwise().sum().maxCoeff(), b.cwiseAbs().colwise().sum().maxCoeff(),
                         MonotonicityClass::Monotone),
        b_(std::move(b)),
        c_(std::move(c)) {}
  std::string_view name() const override { return "single-affine-simplex"; }
  SampleDistribution make_distribution(const BlockVector&, const BlockVector&) const override {
    return uniform_distribution();
  }
  SampleDistribution uniform_distribution() const override {
    return SampleDistribution(Eigen::VectorXd::Ones(1), Eigen::VectorXd::Ones(1));
  }
  DualVector jacobian_transpose_apply(const BlockVector& w) const override {
    return DualVector(layout(), b_.transpose() * w.values());
  }

 protected:
  DualVector evaluate(const BlockVector& z) const override {
    return DualVector(layout(), b_ * z.values() + c_);
  }
  DualVector evaluate_component(IndexPair, const BlockVector& z, const SampleDistribution&) const override {
    return evaluate(z);
  }

 private:
  Eigen::MatrixXd b_;
  Eigen::VectorXd c_;
};

Verdict criterion9() {
  oracle::Rng rng(909);
  std::vector<std::shared_ptr<FiniteSumProblem>> problems;
  for (bool ball : {true, false}) {
    Rng r(910 + ball);
    AffineStrongConfig cfg;
    cfg.dimension = 6;
    cfg.components = 1;
    cfg.ball = ball;
    problems.push_back(build_affine_strong(cfg, r).op);
  }
  Eigen::MatrixXd b(5, 5);
  for (Index i = 0; i < 25; ++i) b.data()[i] = oracle::random_normal(rng, 1)[0];
  problems.push_back(std::make_shared<SingleAffineOnSimplex>(b, oracle::random_normal(rng, 5)));

  SolverParams params;
  params.gamma = 1.0;
  params.p = 1.0;
  params.batch = 1;
  double worst = 0.0;
  std::string names;
  for (const auto& op : problems) {
    params.alpha = 0.5 / op->lipschitz();
    const BlockVector start = oracle::random_feasible(op->geometry(), rng);
    SolverState s = initial_state(*op, start, 7);
    Eigen::VectorXd x = start.values(), x_prev = start.values();
    OracleCounters scratch;
    auto f = [&](const Eigen::VectorXd& z) {
      return op->diagnostic_eval(BlockVector(op->layout(), z), scratch).values();
    };
    for (int k = 0; k < 500; ++k) {
      const Eigen::VectorXd next = oracle::bregman_projection_step(op->geometry(), x, 2.0 * f(x) - f(x_prev), params.alpha);
      x_prev = x;
      x = next;
      step(s, *op, params);
      worst = std::max(worst, (s.x_cur.values() - x).cwiseAbs().maxCoeff());
    }
    names += std::string(to_string(op->geometry().kind())) + " ";
  }
  return {worst <= 1e-12, "500 steps on " + names + "geometries, max deviation " + fmt(worst)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> all = {
      {"1", criterion1},   {"2", criterion2}, {"3", criterion3}, {"4", criterion4},
      {"5a", criterion5a}, {"5b", criterion5b}, {"6", criterion6}, {"7", criterion7},
      {"8", criterion8},   {"9", criterion9}};
  std::vector<std::string> wanted(argv + 1, argv + argc);
  for (auto& w : wanted) {
    if (w == "5") {
      w = "5a";
      wanted.push_back("5b");
      break;
    }
  }
  int failures = 0;
  for (const auto& [id, fn] : all) {
    if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), id) == wanted.end()) continue;
    Verdict v;
    try {
      v = fn();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << id << ": " << v.detail << std::endl;
    if (!v.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
