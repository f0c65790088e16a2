#include "bvrvi/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace bvrvi {

namespace {

// exp(d - 1) overflows past this argument.
constexpr double kMaxExpArgument = 709.0;

void check_layout(const GeometrySpec& spec, const BlockLayout& layout, const char* what) {
  require_same_layout(spec.layout(), layout, what);
}

// log of a floored simplex coordinate; negative or NaN entries are rejected.
double floored_log(double value, double floor) {
  if (!(value >= 0.0)) {
    throw DomainError("entropy geometry: negative coordinate " + std::to_string(value));
  }
  return std::log(std::max(value, floor));
}

}  // namespace

std::string_view to_string(GeometryKind kind) {
  switch (kind) {
    case GeometryKind::EntropySimplex:
      return "entropy-simplex";
    case GeometryKind::EuclideanBall:
      return "euclidean-ball";
    case GeometryKind::EuclideanFree:
      return "euclidean-free";
  }
  return "unknown";
}

GeometrySpec GeometrySpec::entropy_simplex(BlockLayout layout, double floor) {
  if (!(floor > 0.0)) throw ParameterError("simplex floor must be positive");
  GeometrySpec spec(GeometryKind::EntropySimplex, std::move(layout));
  spec.floor_ = floor;
  return spec;
}

GeometrySpec GeometrySpec::euclidean_ball(BlockLayout layout, double radius) {
  std::vector<double> radii(static_cast<std::size_t>(layout.num_blocks()), radius);
  return euclidean_ball(std::move(layout), std::move(radii));
}

GeometrySpec GeometrySpec::euclidean_ball(BlockLayout layout, std::vector<double> radii) {
  if (static_cast<Index>(radii.size()) != layout.num_blocks()) {
    throw LayoutError("one radius per block required");
  }
  for (double r : radii) {
    if (!(r > 0.0) || !std::isfinite(r)) throw ParameterError("ball radius must be positive");
  }
  GeometrySpec spec(GeometryKind::EuclideanBall, std::move(layout));
  spec.radii_ = std::move(radii);
  return spec;
}

GeometrySpec GeometrySpec::euclidean_free(BlockLayout layout) {
  return GeometrySpec(GeometryKind::EuclideanFree, std::move(layout));
}

std::optional<double> GeometrySpec::mirror_lipschitz() const {
  if (kind_ == GeometryKind::EntropySimplex) return std::nullopt;
  return 1.0;
}

double GeometrySpec::primal_norm(const BlockVector& x) const {
  check_layout(*this, x.layout(), "primal_norm");
  if (kind_ != GeometryKind::EntropySimplex) return x.values().norm();
  double sum_sq = 0.0;
  for (Index b = 0; b < layout_.num_blocks(); ++b) {
    const double l1 = x.block(b).lpNorm<1>();
    sum_sq += l1 * l1;
  }
  return std::sqrt(sum_sq);
}

double GeometrySpec::dual_norm(const DualVector& v) const {
  check_layout(*this, v.layout(), "dual_norm");
  if (kind_ != GeometryKind::EntropySimplex) return v.values().norm();
  double sum_sq = 0.0;
  for (Index b = 0; b < layout_.num_blocks(); ++b) {
    const double linf = v.block(b).lpNorm<Eigen::Infinity>();
    sum_sq += linf * linf;
  }
  return std::sqrt(sum_sq);
}

double GeometrySpec::distance(const BlockVector& x, const BlockVector& y) const {
  check_layout(*this, y.layout(), "distance");
  return primal_norm(BlockVector(x.layout(), x.values() - y.values()));
}

bool GeometrySpec::contains(const BlockVector& x, double tol) const {
  if (!(x.layout() == layout_)) return false;
  for (Index b = 0; b < layout_.num_blocks(); ++b) {
    const auto blk = x.block(b);
    switch (kind_) {
      case GeometryKind::EntropySimplex:
        if (blk.minCoeff() < -tol || std::abs(blk.sum() - 1.0) > tol) return false;
        break;
      case GeometryKind::EuclideanBall:
        if (blk.norm() > radius(b) + tol) return false;
        break;
      case GeometryKind::EuclideanFree:
        break;
    }
  }
  return true;
}

BlockVector GeometrySpec::center() const {
  BlockVector c = BlockVector::zeros(layout_);
  if (kind_ == GeometryKind::EntropySimplex) {
    for (Index b = 0; b < layout_.num_blocks(); ++b) {
      c.block(b).setConstant(1.0 / static_cast<double>(layout_.block_size(b)));
    }
  }
  return c;
}

DualVector mirror_map(const GeometrySpec& spec, const BlockVector& x) {
  check_layout(spec, x.layout(), "mirror_map");
  if (spec.kind() != GeometryKind::EntropySimplex) return DualVector(x.layout(), x.values());
  Eigen::VectorXd d(x.size());
  for (Index i = 0; i < x.size(); ++i) d[i] = 1.0 + floored_log(x[i], spec.floor());
  return DualVector(x.layout(), std::move(d));
}

BlockVector mirror_inverse(const GeometrySpec& spec, const DualVector& d) {
  check_layout(spec, d.layout(), "mirror_inverse");
  if (spec.kind() != GeometryKind::EntropySimplex) return BlockVector(d.layout(), d.values());
  Eigen::VectorXd x(d.size());
  for (Index i = 0; i < d.size(); ++i) {
    const double arg = d[i] - 1.0;
    if (arg > kMaxExpArgument) {
      throw DomainError("mirror_inverse: exp overflow, shift the dual point first");
    }
    x[i] = std::exp(arg);
  }
  return BlockVector(d.layout(), std::move(x));
}

double bregman_divergence(const GeometrySpec& spec, const BlockVector& x, const BlockVector& y) {
  check_layout(spec, x.layout(), "bregman_divergence");
  check_layout(spec, y.layout(), "bregman_divergence");
  if (spec.kind() != GeometryKind::EntropySimplex) {
    return 0.5 * (x.values() - y.values()).squaredNorm();
  }
  double total = 0.0;
  for (Index i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    const double yi = y[i];
    if (!(yi > 0.0)) throw DomainError("KL divergence: second argument has a zero coordinate");
    if (!(xi >= 0.0)) throw DomainError("KL divergence: first argument has a negative coordinate");
    total += (xi > 0.0 ? xi * std::log(xi / yi) : 0.0) + yi - xi;
  }
  // Rounding can leave a tiny negative value when x == y.
  return std::max(total, 0.0);
}

BlockVector fused_inertial_prox(const GeometrySpec& spec, const BlockVector& x_cur,
                                const BlockVector& x_prev, double gamma, const DualVector& v,
                                double alpha) {
  check_layout(spec, x_cur.layout(), "fused_inertial_prox");
  check_layout(spec, x_prev.layout(), "fused_inertial_prox");
  check_layout(spec, v.layout(), "fused_inertial_prox");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ParameterError("prox step alpha must be positive");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ParameterError("inertial weight gamma must lie in [0, 1]");

  const bool single_centre = gamma == 1.0 || x_cur.values() == x_prev.values();
  const BlockLayout& layout = spec.layout();
  Eigen::VectorXd out(layout.dimension());

  if (spec.kind() == GeometryKind::EntropySimplex) {
    const double floor = spec.floor();
    for (Index b = 0; b < layout.num_blocks(); ++b) {
      const Index off = layout.offset(b);
      const Index len = layout.block_size(b);
      Eigen::VectorXd logits(len);
      for (Index i = 0; i < len; ++i) {
        const double lc = floored_log(x_cur[off + i], floor);
        double centre = lc;
        if (!single_centre) {
          centre = gamma * lc + (1.0 - gamma) * floored_log(x_prev[off + i], floor);
        }
        logits[i] = centre - alpha * v[off + i];
      }
      if (!logits.allFinite()) throw DomainError("entropy prox: non-finite logits");
      const double shift = logits.maxCoeff();
      Eigen::VectorXd weights = (logits.array() - shift).exp().matrix();
      out.segment(off, len) = weights / weights.sum();
    }
    return BlockVector(layout, std::move(out));
  }

  if (single_centre) {
    out = x_cur.values() - alpha * v.values();
  } else {
    out = gamma * x_cur.values() + (1.0 - gamma) * x_prev.values() - alpha * v.values();
  }
  if (spec.kind() == GeometryKind::EuclideanBall) {
    for (Index b = 0; b < layout.num_blocks(); ++b) {
      auto blk = out.segment(layout.offset(b), layout.block_size(b));
      const double norm = blk.norm();
      if (norm > spec.radius(b)) blk *= spec.radius(b) / norm;
    }
  }
  return BlockVector(layout, std::move(out));
}

BlockVector bregman_prox(const GeometrySpec& spec, const BlockVector& x, const DualVector& v,
                         double alpha) {
  return fused_inertial_prox(spec, x, x, 1.0, v, alpha);
}

bool prox_inequality_check(const GeometrySpec& spec, const BlockVector& z_plus,
                           const BlockVector& z, const BlockVector& z1, const BlockVector& z2,
                           double gamma, double alpha, const DualVector& v, double tol) {
  if (!spec.contains(z, 1e-12)) return true;
  const Eigen::VectorXd diff = z.values() - z_plus.values();
  const double lhs = alpha * v.values().dot(diff);
  const double rhs = bregman_divergence(spec, z, z_plus) +
                     gamma * (bregman_divergence(spec, z_plus, z1) - bregman_divergence(spec, z, z1)) +
                     (1.0 - gamma) *
                         (bregman_divergence(spec, z_plus, z2) - bregman_divergence(spec, z, z2));
  const double scale = std::max({1.0, std::abs(lhs), std::abs(rhs)});
  return lhs >= rhs - tol * scale;
}

}  // namespace bvrvi
