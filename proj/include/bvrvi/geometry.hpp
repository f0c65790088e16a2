#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "bvrvi/block_vector.hpp"

namespace bvrvi {

enum class GeometryKind { EntropySimplex, EuclideanBall, EuclideanFree };

std::string_view to_string(GeometryKind kind);

/// Distance-generating function together with its feasible set and norm pair.
///
/// EntropySimplex: negative entropy on a product of probability simplices,
///   KL divergence, per-block l1 primal norm and l-infinity dual norm, combined
///   across blocks as sqrt(sum of squares).
/// EuclideanBall: half squared l2 norm on a product of balls, l2 / l2.
/// EuclideanFree: half squared l2 norm on the whole space, l2 / l2.
class GeometrySpec {
 public:
  static constexpr double kDefaultFloor = 1e-300;

  static GeometrySpec entropy_simplex(BlockLayout layout, double floor = kDefaultFloor);
  static GeometrySpec euclidean_ball(BlockLayout layout, double radius = 1.0);
  static GeometrySpec euclidean_ball(BlockLayout layout, std::vector<double> radii);
  static GeometrySpec euclidean_free(BlockLayout layout);

  GeometryKind kind() const { return kind_; }
  const BlockLayout& layout() const { return layout_; }
  double radius(Index block) const { return radii_.at(static_cast<std::size_t>(block)); }
  double floor() const { return floor_; }

  /// Lipschitz constant of the mirror map (L_f). Empty means unbounded, which
  /// is the case for the negative entropy on the open simplex.
  std::optional<double> mirror_lipschitz() const;

  double primal_norm(const BlockVector& x) const;
  double dual_norm(const DualVector& v) const;
  /// primal_norm(x - y)
  double distance(const BlockVector& x, const BlockVector& y) const;

  /// Simplex blocks: entries >= -tol summing to 1 within tol. Ball blocks:
  /// norm <= radius + tol. Free: always true.
  bool contains(const BlockVector& x, double tol = 1e-9) const;

  /// Uniform distribution per block (simplex), the origin otherwise.
  BlockVector center() const;

 private:
  GeometrySpec(GeometryKind kind, BlockLayout layout) : kind_(kind), layout_(std::move(layout)) {}

  GeometryKind kind_;
  BlockLayout layout_;
  std::vector<double> radii_;
  double floor_ = kDefaultFloor;
};

/// Gradient of the distance-generating function: 1 + log x per coordinate for
/// the entropy kind (after flooring), identity for the Euclidean kinds.
DualVector mirror_map(const GeometrySpec& spec, const BlockVector& x);

/// Inverse mirror map: exp(d - 1) for entropy, identity otherwise.
BlockVector mirror_inverse(const GeometrySpec& spec, const DualVector& d);

/// D(x, y) = f(x) - f(y) - <grad f(y), x - y>. For entropy this is the
/// generalized KL divergence sum x log(x/y) + y - x with 0 log 0 = 0.
double bregman_divergence(const GeometrySpec& spec, const BlockVector& x, const BlockVector& y);

/// argmin over the feasible set of <alpha v, z> + gamma D(z, x_cur) + (1-gamma) D(z, x_prev).
///
/// Entropy blocks are solved in log space: log z is proportional to
/// gamma log x_cur + (1-gamma) log x_prev - alpha v, normalized by a per-block
/// log-sum-exp shift. Ball blocks are the radial projection of
/// gamma x_cur + (1-gamma) x_prev - alpha v. With gamma = 1, or with
/// x_cur == x_prev, this is exactly the plain prox at x_cur.
///
/// Euclidean prox centres may lie outside the ball; entropy centres must be
/// nonnegative.
BlockVector fused_inertial_prox(const GeometrySpec& spec, const BlockVector& x_cur,
                                const BlockVector& x_prev, double gamma, const DualVector& v,
                                double alpha);

/// Plain Bregman prox at x: fused_inertial_prox with gamma = 1.
BlockVector bregman_prox(const GeometrySpec& spec, const BlockVector& x, const DualVector& v,
                         double alpha);

/// Diagnostic for the three-point prox inequality satisfied by
/// z_plus = fused_inertial_prox(z1, z2, gamma, v, alpha) at a feasible z:
///
///   alpha <v, z - z_plus> >= D(z, z_plus) + gamma (D(z_plus, z1) - D(z, z1))
///                            + (1 - gamma) (D(z_plus, z2) - D(z, z2)).
///
/// Holds vacuously for infeasible z. `tol` is relative to the larger side
/// (absolute below magnitude 1).
bool prox_inequality_check(const GeometrySpec& spec, const BlockVector& z_plus,
                           const BlockVector& z, const BlockVector& z1, const BlockVector& z2,
                           double gamma, double alpha, const DualVector& v, double tol = 1e-8);

}  // namespace bvrvi
