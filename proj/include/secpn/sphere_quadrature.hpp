#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "secpn/angular_basis.hpp"
#include "secpn/errors.hpp"

namespace secpn {

/// Gauss-Legendre nodes and weights on [-1, 1], nodes ascending.
struct GaussLegendre {
  std::vector<double> nodes;
  std::vector<double> weights;
};

inline GaussLegendre gauss_legendre(int n) {
  if (n < 1) throw InvalidInput("Gauss-Legendre rule needs at least one point");
  GaussLegendre gl;
  gl.nodes.assign(static_cast<size_t>(n), 0.0);
  gl.weights.assign(static_cast<size_t>(n), 0.0);
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    // Tricomi initial guess, then Newton on P_n.
    double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 1.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    // Recompute derivative at the converged node for the weight.
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = n * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    gl.nodes[static_cast<size_t>(i)] = -x;
    gl.nodes[static_cast<size_t>(n - 1 - i)] = x;
    gl.weights[static_cast<size_t>(i)] = w;
    gl.weights[static_cast<size_t>(n - 1 - i)] = w;
  }
  if (n % 2 == 1) gl.nodes[static_cast<size_t>(n / 2)] = 0.0;
  return gl;
}

enum class QuadratureDomain { full_sphere, half_sphere };

/// Weighted point set on the sphere or on the half sphere {n . Omega < 0}.
struct QuadratureRule {
  std::vector<Direction> nodes;
  std::vector<Eigen::Vector3d> points;  // Cartesian images of nodes
  std::vector<double> weights;
  int exactness_degree = 0;
  QuadratureDomain domain = QuadratureDomain::full_sphere;
  Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();  // half sphere only

  size_t size() const { return weights.size(); }

  template <class F>
  auto integrate(F&& f) const {
    using R = decltype(f(points[0]));
    R acc = weights[0] * f(points[0]);
    for (size_t q = 1; q < size(); ++q) acc += weights[q] * f(points[q]);
    return acc;
  }

  double total_weight() const {
    double s = 0.0;
    for (double w : weights) s += w;
    return s;
  }
};

/// Product rule exact for spherical polynomials of total degree <= d.
/// For odd d the node set is invariant under Omega -> -Omega.
inline QuadratureRule full_sphere_rule(int degree) {
  if (degree < 0) throw InvalidInput("quadrature exactness degree must be >= 0");
  const int n_mu = (degree + 2) / 2;  // ceil((d + 1) / 2)
  const int n_phi = degree + 1;
  const auto gl = gauss_legendre(n_mu);
  QuadratureRule rule;
  rule.exactness_degree = degree;
  rule.domain = QuadratureDomain::full_sphere;
  const double dphi = 2.0 * kPi / n_phi;
  for (int i = 0; i < n_mu; ++i) {
    for (int k = 0; k < n_phi; ++k) {
      const Direction d{gl.nodes[static_cast<size_t>(i)], k * dphi};
      rule.nodes.push_back(d);
      rule.points.push_back(d.omega());
      rule.weights.push_back(gl.weights[static_cast<size_t>(i)] * dphi);
    }
  }
  return rule;
}

/// Rotation R with R e_z = -n.
///
/// Rodrigues rotation about e_z x (-n). For n = -e_z the identity is used and
/// for n = +e_z the half turn diag(1, -1, -1).
inline Eigen::Matrix3d rotation_to_inward(const Eigen::Vector3d& n) {
  const Eigen::Vector3d t = -n;
  const Eigen::Vector3d axis = Eigen::Vector3d::UnitZ().cross(t);
  const double s = axis.norm();
  const double c = t.z();
  if (s < 1e-14) {
    if (c > 0.0) return Eigen::Matrix3d::Identity();
    return Eigen::Vector3d(1.0, -1.0, -1.0).asDiagonal();
  }
  Eigen::Matrix3d k;
  k << 0.0, -axis.z(), axis.y(), axis.z(), 0.0, -axis.x(), -axis.y(), axis.x(), 0.0;
  return Eigen::Matrix3d::Identity() + k + k * k * ((1.0 - c) / (s * s));
}

/// Rule on the inflow half sphere {n . Omega < 0}.
///
/// Built from Gauss-Legendre in mu on (0, 1] times uniform azimuth around e_z,
/// then rotated so that e_z maps to -n. Weights sum to 2 pi.
inline QuadratureRule half_sphere_rule(const Eigen::Vector3d& n, int degree) {
  if (std::abs(n.norm() - 1.0) > 1e-12) {
    throw InvalidInput("half_sphere_rule: normal must have unit length");
  }
  if (degree < 0) throw InvalidInput("quadrature exactness degree must be >= 0");
  const int n_mu = (degree + 2) / 2;
  const int n_phi = degree + 1;
  const auto gl = gauss_legendre(n_mu);
  const Eigen::Matrix3d r = rotation_to_inward(n);
  QuadratureRule rule;
  rule.exactness_degree = degree;
  rule.domain = QuadratureDomain::half_sphere;
  rule.normal = n;
  const double dphi = 2.0 * kPi / n_phi;
  for (int i = 0; i < n_mu; ++i) {
    const double mu = 0.5 * (gl.nodes[static_cast<size_t>(i)] + 1.0);
    const double w = 0.5 * gl.weights[static_cast<size_t>(i)] * dphi;
    for (int k = 0; k < n_phi; ++k) {
      const Eigen::Vector3d ref = Direction{mu, k * dphi}.omega();
      const Eigen::Vector3d p = r * ref;
      rule.points.push_back(p);
      rule.nodes.push_back(Direction::from_cartesian(p));
      rule.weights.push_back(w);
    }
  }
  return rule;
}

// The opposite hemisphere: every node negated, weights unchanged.
inline QuadratureRule mirrored(const QuadratureRule& rule) {
  QuadratureRule m = rule;
  for (size_t q = 0; q < m.size(); ++q) {
    m.points[q] = -rule.points[q];
    m.nodes[q] = Direction::from_cartesian(m.points[q]);
  }
  m.normal = -rule.normal;
  return m;
}

}  // namespace secpn
