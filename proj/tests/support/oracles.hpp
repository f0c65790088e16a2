#pragma once

// Independent reference implementations used by the unit and acceptance
// tests. Nothing here calls the library's prox or solver code.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include "bvrvi/block_vector.hpp"
#include "bvrvi/geometry.hpp"

namespace oracle {

using bvrvi::BlockLayout;
using bvrvi::BlockVector;
using bvrvi::GeometryKind;
using bvrvi::GeometrySpec;
using Rng = std::mt19937_64;

// Euclidean projection onto the probability simplex (sort-based).
inline Eigen::VectorXd project_simplex(const Eigen::VectorXd& v) {
  std::vector<double> u(v.data(), v.data() + v.size());
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumsum = 0.0, theta = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    cumsum += u[j];
    const double t = (cumsum - 1.0) / static_cast<double>(j + 1);
    if (u[j] - t > 0.0) theta = t;
  }
  return (v.array() - theta).max(0.0).matrix();
}

inline Eigen::VectorXd project_ball(const Eigen::VectorXd& v, double radius) {
  const double n = v.norm();
  return n > radius ? Eigen::VectorXd(v * (radius / n)) : v;
}

inline Eigen::VectorXd project(const GeometrySpec& spec, const Eigen::VectorXd& v) {
  Eigen::VectorXd out = v;
  const BlockLayout& layout = spec.layout();
  for (bvrvi::Index b = 0; b < layout.num_blocks(); ++b) {
    auto seg = out.segment(layout.offset(b), layout.block_size(b));
    if (spec.kind() == GeometryKind::EntropySimplex) {
      seg = project_simplex(seg);
    } else if (spec.kind() == GeometryKind::EuclideanBall) {
      seg = project_ball(seg, spec.radius(b));
    }
  }
  return out;
}

// h(z) for the distance-generating function, written out directly.
inline double dgf(const GeometrySpec& spec, const Eigen::VectorXd& z) {
  if (spec.kind() != GeometryKind::EntropySimplex) return 0.5 * z.squaredNorm();
  double s = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    if (z[i] > 0.0) s += z[i] * std::log(z[i]);
  }
  return s;
}

inline double divergence(const GeometrySpec& spec, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& y) {
  if (spec.kind() != GeometryKind::EntropySimplex) return 0.5 * (x - y).squaredNorm();
  double s = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (x[i] > 0.0) s += x[i] * std::log(x[i] / y[i]);
    s += y[i] - x[i];
  }
  return s;
}

// Objective <alpha v, z> + gamma D(z, x1) + (1 - gamma) D(z, x2).
inline double prox_objective(const GeometrySpec& spec, const Eigen::VectorXd& z,
                             const Eigen::VectorXd& x1, const Eigen::VectorXd& x2, double gamma,
                             const Eigen::VectorXd& v, double alpha) {
  return alpha * v.dot(z) + gamma * divergence(spec, z, x1) + (1.0 - gamma) * divergence(spec, z, x2);
}

inline Eigen::VectorXd prox_gradient(const GeometrySpec& spec, const Eigen::VectorXd& z,
                                     const Eigen::VectorXd& x1, const Eigen::VectorXd& x2,
                                     double gamma, const Eigen::VectorXd& v, double alpha) {
  if (spec.kind() != GeometryKind::EntropySimplex) {
    return alpha * v + gamma * (z - x1) + (1.0 - gamma) * (z - x2);
  }
  Eigen::VectorXd g(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double lz = std::log(std::max(z[i], 1e-300));
    g[i] = alpha * v[i] + gamma * (lz - std::log(x1[i])) + (1.0 - gamma) * (lz - std::log(x2[i]));
  }
  return g;
}

// Projected gradient with Armijo backtracking on the prox objective.
inline Eigen::VectorXd brute_force_prox(const GeometrySpec& spec, const Eigen::VectorXd& x1,
                                        const Eigen::VectorXd& x2, double gamma,
                                        const Eigen::VectorXd& v, double alpha,
                                        int steps = 200000) {
  auto obj = [&](const Eigen::VectorXd& z) {
    return prox_objective(spec, z, x1, x2, gamma, v, alpha);
  };
  Eigen::VectorXd z = project(spec, gamma * x1 + (1.0 - gamma) * x2);
  double t = 1.0;
  for (int k = 0; k < steps; ++k) {
    const Eigen::VectorXd g = prox_gradient(spec, z, x1, x2, gamma, v, alpha);
    const double fz = obj(z);
    t = std::min(1.0, t * 2.0);
    Eigen::VectorXd next;
    for (int ls = 0; ls < 60; ++ls) {
      next = project(spec, z - t * g);
      const Eigen::VectorXd d = next - z;
      if (obj(next) <= fz + g.dot(d) + 0.5 / t * d.squaredNorm()) break;
      t *= 0.5;
    }
    z = next;
    // stop on the unit-step projected-gradient residual; a tiny accepted step
    // alone says nothing about optimality
    const Eigen::VectorXd gz = prox_gradient(spec, z, x1, x2, gamma, v, alpha);
    if ((z - project(spec, z - gz)).norm() < 1e-12) break;
  }
  return z;
}

inline Eigen::VectorXd random_simplex(Rng& rng, Eigen::Index n, double min_mass = 0.0) {
  std::exponential_distribution<double> expo(1.0);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = expo(rng) + min_mass;
  return v / v.sum();
}

inline Eigen::VectorXd random_ball(Rng& rng, Eigen::Index n, double radius) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = normal(rng);
  return v * (radius * std::pow(unit(rng), 1.0 / static_cast<double>(n)) / v.norm());
}

inline BlockVector random_feasible(const GeometrySpec& spec, Rng& rng, double min_mass = 0.05) {
  const BlockLayout& layout = spec.layout();
  Eigen::VectorXd v(layout.dimension());
  for (bvrvi::Index b = 0; b < layout.num_blocks(); ++b) {
    auto seg = v.segment(layout.offset(b), layout.block_size(b));
    switch (spec.kind()) {
      case GeometryKind::EntropySimplex:
        seg = random_simplex(rng, seg.size(), min_mass);
        break;
      case GeometryKind::EuclideanBall:
        seg = random_ball(rng, seg.size(), spec.radius(b));
        break;
      case GeometryKind::EuclideanFree:
        seg = random_ball(rng, seg.size(), 3.0);
        break;
    }
  }
  return BlockVector(layout, v);
}

inline Eigen::VectorXd random_normal(Rng& rng, Eigen::Index n, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = normal(rng);
  return v;
}

// argmin_x <alpha d, x> + D(x, x_s) over the feasible set, written directly:
// multiplicative weights for simplex blocks, a clipped gradient step for balls.
inline Eigen::VectorXd bregman_projection_step(const GeometrySpec& spec, const Eigen::VectorXd& xs,
                                               const Eigen::VectorXd& d, double alpha) {
  Eigen::VectorXd out(xs.size());
  const BlockLayout& layout = spec.layout();
  for (bvrvi::Index b = 0; b < layout.num_blocks(); ++b) {
    const auto off = layout.offset(b);
    const auto len = layout.block_size(b);
    if (spec.kind() == GeometryKind::EntropySimplex) {
      Eigen::VectorXd w(len);
      const double shift = (-alpha * d.segment(off, len)).maxCoeff();
      for (Eigen::Index i = 0; i < len; ++i) {
        w[i] = xs[off + i] * std::exp(-alpha * d[off + i] - shift);
      }
      out.segment(off, len) = w / w.sum();
    } else {
      Eigen::VectorXd y = xs.segment(off, len) - alpha * d.segment(off, len);
      out.segment(off, len) =
          spec.kind() == GeometryKind::EuclideanBall ? project_ball(y, spec.radius(b)) : y;
    }
  }
  return out;
}

// Equilibrium of min_x max_y y^T A x over two simplices by support
// enumeration (square supports). Returns (x, y) stacked, or nothing.
inline std::optional<Eigen::VectorXd> zero_sum_equilibrium(const Eigen::MatrixXd& a) {
  const int n = static_cast<int>(a.rows());
  std::optional<Eigen::VectorXd> best;
  double best_gap = std::numeric_limits<double>::infinity();
  for (int smask = 1; smask < (1 << n); ++smask) {      // rows: support of y
    for (int tmask = 1; tmask < (1 << n); ++tmask) {    // cols: support of x
      std::vector<int> rows, cols;
      for (int i = 0; i < n; ++i) {
        if (smask >> i & 1) rows.push_back(i);
        if (tmask >> i & 1) cols.push_back(i);
      }
      if (rows.size() != cols.size()) continue;
      const int k = static_cast<int>(rows.size());
      // [A_IJ -1; 1^T 0] [x_J; v] = [0; 1]
      Eigen::MatrixXd mx = Eigen::MatrixXd::Zero(k + 1, k + 1);
      Eigen::MatrixXd my = Eigen::MatrixXd::Zero(k + 1, k + 1);
      for (int r = 0; r < k; ++r) {
        for (int c = 0; c < k; ++c) {
          mx(r, c) = a(rows[r], cols[c]);
          my(r, c) = a(rows[c], cols[r]);
        }
        mx(r, k) = -1.0;
        my(r, k) = -1.0;
        mx(k, r) = 1.0;
        my(k, r) = 1.0;
      }
      Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k + 1);
      rhs[k] = 1.0;
      Eigen::FullPivLU<Eigen::MatrixXd> lux(mx), luy(my);
      if (!lux.isInvertible() || !luy.isInvertible()) continue;
      const Eigen::VectorXd sx = lux.solve(rhs);
      const Eigen::VectorXd sy = luy.solve(rhs);
      Eigen::VectorXd x = Eigen::VectorXd::Zero(n), y = Eigen::VectorXd::Zero(n);
      bool ok = true;
      for (int r = 0; r < k; ++r) {
        x[cols[r]] = sx[r];
        y[rows[r]] = sy[r];
        ok = ok && sx[r] >= -1e-12 && sy[r] >= -1e-12;
      }
      if (!ok) continue;
      const double gap = (a * x).maxCoeff() - (a.transpose() * y).minCoeff();
      if (gap < best_gap) {
        best_gap = gap;
        Eigen::VectorXd z(2 * n);
        z << x, y;
        best = z;
      }
    }
  }
  return best;
}

}  // namespace oracle
