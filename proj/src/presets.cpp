#include <cmath>
#include <sstream>

#include "bvrvi/solver.hpp"

namespace bvrvi {

std::string_view to_string(Preset preset) {
  switch (preset) {
    case Preset::Manual:
      return "manual";
    case Preset::Corollary31:
      return "corollary31";
    case Preset::Example41:
      return "example41";
    case Preset::Example42Alg11:
      return "example42-alg11";
    case Preset::Example42Alg12:
      return "example42-alg12";
  }
  return "unknown";
}

std::optional<Preset> parse_preset(std::string_view text) {
  for (Preset p : {Preset::Manual, Preset::Corollary31, Preset::Example41, Preset::Example42Alg11,
                   Preset::Example42Alg12}) {
    if (to_string(p) == text) return p;
  }
  return std::nullopt;
}

void validate(const SolverParams& params, std::uint64_t component_count) {
  if (!(params.p > 0.0 && params.p <= 1.0)) throw ParameterError("require 0 < p <= 1");
  if (!(params.gamma > 0.0 && params.gamma <= 1.0)) throw ParameterError("require 0 < gamma <= 1");
  if (params.p < 1.0 && !(params.p < params.gamma)) {
    throw ParameterError("require p < gamma when p < 1");
  }
  if (!(params.alpha > 0.0) || !std::isfinite(params.alpha)) {
    throw ParameterError("require alpha > 0");
  }
  if (params.batch < 1 || params.batch > component_count) {
    throw ParameterError("require 1 <= b <= M (b = " + std::to_string(params.batch) +
                         ", M = " + std::to_string(component_count) + ")");
  }
}

double monotone_step_bound(double gamma, double p, std::size_t batch, double lipschitz,
                           double mean_lipschitz) {
  const double b = static_cast<double>(batch);
  const double first = (gamma - p) / (2.0 * (1.0 - p));
  const double second = (1.0 - gamma) * b /
                        ((1.0 - p) * (2.0 * mean_lipschitz * mean_lipschitz + b * lipschitz * lipschitz));
  return std::min(first, second);
}

std::vector<std::string> parameter_warnings(const SolverParams& params,
                                            const FiniteSumProblem& problem) {
  std::vector<std::string> notes;
  if (params.p < 1.0 && params.gamma < 1.0 && problem.monotonicity() == MonotonicityClass::Monotone) {
    const double bound = monotone_step_bound(params.gamma, params.p, params.batch,
                                             problem.lipschitz(), problem.mean_lipschitz());
    if (params.alpha > bound) {
      std::ostringstream os;
      os << "alpha = " << params.alpha << " exceeds the ergodic-rate step bound " << bound;
      notes.push_back(os.str());
    }
  }
  return notes;
}

namespace {

SolverParams monotone_preset(double p, double gamma, std::size_t batch, double lipschitz,
                             double mean_lipschitz, Preset tag) {
  if (!(gamma < 1.0)) {
    throw ParameterError("preset needs gamma = p + 1/sqrt(.) < 1, got gamma = " +
                         std::to_string(gamma));
  }
  SolverParams params;
  params.p = p;
  params.gamma = gamma;
  params.batch = batch;
  params.alpha = monotone_step_bound(gamma, p, batch, lipschitz, mean_lipschitz);
  params.preset = tag;
  if (!(params.alpha > 0.0)) throw PremiseError("preset step alpha is not positive");
  return params;
}

}  // namespace

SolverParams preset_corollary31(std::uint64_t component_count, std::size_t batch, double lipschitz,
                                double mean_lipschitz) {
  const double m = static_cast<double>(component_count);
  const double p = 1.0 / m;
  return monotone_preset(p, p + 1.0 / std::sqrt(m), batch, lipschitz, mean_lipschitz,
                         Preset::Corollary31);
}

SolverParams preset_example41(Index n, std::size_t batch, double lipschitz, double mean_lipschitz) {
  const double nd = static_cast<double>(n);
  const double p = 1.0 / nd;
  return monotone_preset(p, p + 1.0 / std::sqrt(nd), batch, lipschitz, mean_lipschitz,
                         Preset::Example41);
}

SolverParams preset_example42(Example42Variant variant, double rho) {
  SolverParams params;
  params.batch = 15;
  if (variant == Example42Variant::Alg12) {
    params.gamma = 1.0;
    params.p = 1.0;
    params.alpha = 0.015;
    params.preset = Preset::Example42Alg12;
    return params;
  }
  if (!(rho > 0.0)) throw ParameterError("alg11 preset needs rho > 0");
  params.gamma = 0.94;
  params.p = 0.82;
  const double denom = 1.0 - (1.0 - params.p) / (1.63 * (params.gamma - params.p));
  if (!(denom > 0.0)) throw PremiseError("alg11 step denominator 1 - (1-p)/(1.63(gamma-p)) <= 0");
  params.alpha = 8.0 * rho / denom;
  params.preset = Preset::Example42Alg11;
  return params;
}

SolverParams vr_forb_example41(Index n, double lipschitz) {
  const double p = 8.15 / std::sqrt(static_cast<double>(n));
  if (!(p <= 1.0)) {
    throw ParameterError("VR-FoRB setting p = 8.15/sqrt(n) exceeds 1 for n = " + std::to_string(n));
  }
  SolverParams params;
  params.p = p;
  params.gamma = 1.0;
  params.batch = 1;
  params.alpha = (1.0 - std::sqrt(1.0 - p)) / (3.0 * lipschitz * lipschitz);
  params.preset = Preset::Manual;
  return params;
}

}  // namespace bvrvi
