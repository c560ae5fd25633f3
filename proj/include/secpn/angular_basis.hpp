#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "secpn/errors.hpp"

namespace secpn {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kFourPi = 4.0 * std::numbers::pi;

/// Unit direction parametrized by mu = cos(polar angle) and azimuth phi.
struct Direction {
  double mu = 1.0;
  double phi = 0.0;

  Eigen::Vector3d omega() const {
    const double s = std::sqrt(std::max(0.0, 1.0 - mu * mu));
    return {s * std::cos(phi), s * std::sin(phi), mu};
  }

  // The vector is renormalized; mu is taken from its z component.
  static Direction from_cartesian(const Eigen::Vector3d& v) {
    const Eigen::Vector3d u = v.normalized();
    double phi = std::atan2(u.y(), u.x());
    if (phi < 0.0) phi += 2.0 * kPi;
    return {std::clamp(u.z(), -1.0, 1.0), phi};
  }
};

struct BasisIndex {
  int l = 0;
  int m = 0;

  bool even() const { return l % 2 == 0; }
  friend bool operator==(const BasisIndex&, const BasisIndex&) = default;
};

enum class Geometry { slab1d, planar2d, full3d };

inline std::string_view to_string(Geometry g) {
  switch (g) {
    case Geometry::slab1d: return "slab1d";
    case Geometry::planar2d: return "planar2d";
    case Geometry::full3d: return "full3d";
  }
  return "?";
}

inline Geometry parse_geometry(std::string_view s) {
  if (s == "slab1d") return Geometry::slab1d;
  if (s == "planar2d") return Geometry::planar2d;
  if (s == "full3d") return Geometry::full3d;
  throw InvalidInput("unknown geometry '" + std::string(s) +
                     "' (expected slab1d, planar2d or full3d)");
}

// Coordinate axes carrying a spatial derivative in the given geometry.
inline std::vector<int> active_axes(Geometry g) {
  switch (g) {
    case Geometry::slab1d: return {2};
    case Geometry::planar2d: return {0, 1};
    case Geometry::full3d: return {0, 1, 2};
  }
  return {};
}

inline int parity_sign(const BasisIndex& idx) { return idx.even() ? 1 : -1; }

namespace detail {

inline void check_index(const BasisIndex& idx) {
  if (idx.l < 0 || std::abs(idx.m) > idx.l) {
    throw InvalidInput("invalid spherical harmonic index (l=" + std::to_string(idx.l) +
                       ", m=" + std::to_string(idx.m) + "): need |m| <= l");
  }
}

// theta(l, m) for 0 <= m <= l <= lmax, stored at l*(l+1)/2 + m.
// Normalized associated Legendre functions without the Condon-Shortley phase,
// sqrt((2l+1)/(4 pi) (l-m)!/(l+m)!) P_l^m(mu).
inline std::vector<double> normalized_legendre_table(int lmax, double mu) {
  std::vector<double> t(static_cast<size_t>((lmax + 1) * (lmax + 2) / 2), 0.0);
  auto at = [&](int l, int m) -> double& { return t[static_cast<size_t>(l * (l + 1) / 2 + m)]; };
  const double s = std::sqrt(std::max(0.0, 1.0 - mu * mu));
  at(0, 0) = 1.0 / std::sqrt(kFourPi);
  for (int m = 1; m <= lmax; ++m) {
    at(m, m) = std::sqrt((2.0 * m + 1.0) / (2.0 * m)) * s * at(m - 1, m - 1);
  }
  for (int m = 0; m < lmax; ++m) {
    at(m + 1, m) = std::sqrt(2.0 * m + 3.0) * mu * at(m, m);
  }
  for (int m = 0; m <= lmax; ++m) {
    for (int l = m + 2; l <= lmax; ++l) {
      const double l2 = double(l) * l, m2 = double(m) * m, lm1 = l - 1.0;
      const double a = std::sqrt((4.0 * l2 - 1.0) / (l2 - m2));
      const double b = std::sqrt((lm1 * lm1 - m2) / (4.0 * lm1 * lm1 - 1.0));
      at(l, m) = a * (mu * at(l - 1, m) - b * at(l - 2, m));
    }
  }
  return t;
}

inline double real_harmonic_from_table(const std::vector<double>& table, const BasisIndex& idx,
                                       double phi) {
  const int am = std::abs(idx.m);
  const double theta = table[static_cast<size_t>(idx.l * (idx.l + 1) / 2 + am)];
  if (idx.m > 0) return theta * std::numbers::sqrt2 * std::cos(am * phi);
  if (idx.m < 0) return theta * std::numbers::sqrt2 * std::sin(am * phi);
  return theta;
}

}  // namespace detail

/// Real spherical harmonic S_lm without the (-1)^m phase.
inline double eval_sh(const BasisIndex& idx, const Direction& dir) {
  detail::check_index(idx);
  const auto table = detail::normalized_legendre_table(idx.l, dir.mu);
  return detail::real_harmonic_from_table(table, idx, dir.phi);
}

/// Ordered real-spherical-harmonic basis with its even/odd partition.
///
/// Ordering is degree-major with m ascending inside each degree; functions
/// excluded by the geometry's symmetry are skipped. The parity permutation
/// lists all even positions first, then all odd positions.
struct AngularBasis {
  Geometry geometry = Geometry::slab1d;
  int order = 1;
  std::vector<BasisIndex> indices;
  std::vector<int> even_indices;
  std::vector<int> odd_indices;

  int size() const { return static_cast<int>(indices.size()); }
  int n_even() const { return static_cast<int>(even_indices.size()); }
  int n_odd() const { return static_cast<int>(odd_indices.size()); }

  std::vector<int> parity_permutation() const {
    std::vector<int> p = even_indices;
    p.insert(p.end(), odd_indices.begin(), odd_indices.end());
    return p;
  }

  // Position of (l, m) in the basis, or -1.
  int position(const BasisIndex& idx) const {
    for (int i = 0; i < size(); ++i)
      if (indices[static_cast<size_t>(i)] == idx) return i;
    return -1;
  }

  Eigen::VectorXd evaluate(const Direction& dir) const {
    const auto table = detail::normalized_legendre_table(order, dir.mu);
    Eigen::VectorXd b(size());
    for (int i = 0; i < size(); ++i)
      b[i] = detail::real_harmonic_from_table(table, indices[static_cast<size_t>(i)], dir.phi);
    return b;
  }

  Eigen::VectorXd evaluate_even(const Direction& dir) const {
    return restrict(evaluate(dir), even_indices);
  }
  Eigen::VectorXd evaluate_odd(const Direction& dir) const {
    return restrict(evaluate(dir), odd_indices);
  }

  static Eigen::VectorXd restrict(const Eigen::VectorXd& full, const std::vector<int>& pos) {
    Eigen::VectorXd r(static_cast<Eigen::Index>(pos.size()));
    for (size_t i = 0; i < pos.size(); ++i) r[static_cast<Eigen::Index>(i)] = full[pos[i]];
    return r;
  }
};

inline bool basis_includes(Geometry g, int l, int m) {
  switch (g) {
    case Geometry::slab1d: return m == 0;
    case Geometry::planar2d: return (l + std::abs(m)) % 2 == 0;
    case Geometry::full3d: return true;
  }
  return false;
}

inline AngularBasis build_basis(Geometry geometry, int order) {
  if (order < 1 || order % 2 == 0) {
    throw InvalidInput("order N=" + std::to_string(order) +
                       " rejected: the second-order elimination needs an odd order N >= 1");
  }
  AngularBasis basis;
  basis.geometry = geometry;
  basis.order = order;
  for (int l = 0; l <= order; ++l) {
    for (int m = -l; m <= l; ++m) {
      if (!basis_includes(geometry, l, m)) continue;
      const int pos = static_cast<int>(basis.indices.size());
      basis.indices.push_back({l, m});
      (l % 2 == 0 ? basis.even_indices : basis.odd_indices).push_back(pos);
    }
  }
  return basis;
}

// Closed-form basis sizes per geometry.
inline int expected_basis_size(Geometry g, int order) {
  switch (g) {
    case Geometry::slab1d: return order + 1;
    case Geometry::planar2d: return (order * order + 3 * order + 2) / 2;
    case Geometry::full3d: return order * order + 2 * order + 1;
  }
  return 0;
}

}  // namespace secpn
