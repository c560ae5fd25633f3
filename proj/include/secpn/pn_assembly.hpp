#pragma once

#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "secpn/angular_basis.hpp"
#include "secpn/errors.hpp"
#include "secpn/scattering.hpp"
#include "secpn/sphere_quadrature.hpp"

namespace secpn {

inline constexpr std::array<const char*, 3> kAxisNames{"x", "y", "z"};

/// Flux matrices <Omega_i b b^T> for the axes active in the basis geometry.
struct FluxMatrices {
  std::vector<int> axes;
  std::array<Eigen::MatrixXd, 3> t;  // indexed by axis; empty when inactive

  const Eigen::MatrixXd& operator[](int axis) const { return t[static_cast<size_t>(axis)]; }
};

inline FluxMatrices assemble_flux_matrices(const AngularBasis& basis, const QuadratureRule& rule) {
  FluxMatrices f;
  f.axes = active_axes(basis.geometry);
  const int n = basis.size();
  for (int a : f.axes) f.t[static_cast<size_t>(a)] = Eigen::MatrixXd::Zero(n, n);
  for (size_t q = 0; q < rule.size(); ++q) {
    const Eigen::VectorXd b = basis.evaluate(rule.nodes[q]);
    const Eigen::MatrixXd bb = rule.weights[q] * (b * b.transpose());
    for (int a : f.axes) f.t[static_cast<size_t>(a)] += rule.points[q][a] * bb;
  }
  return f;
}

/// Tridiagonal slab flux matrix for normalized Legendre polynomials:
/// (T_z)_{l,l+1} = (l+1) / sqrt(4l^2 + 8l + 3), zero diagonal.
inline Eigen::MatrixXd slab_tz_closed_form(int order) {
  if (order < 1) throw InvalidInput("slab_tz_closed_form needs N >= 1");
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(order + 1, order + 1);
  for (int l = 0; l < order; ++l) {
    const double v = (l + 1.0) / std::sqrt(4.0 * l * l + 8.0 * l + 3.0);
    t(l, l + 1) = v;
    t(l + 1, l) = v;
  }
  return t;
}

/// Parity-ordered blocks of the PN system.
///
/// T_e,i = <Omega_i b_e b_o^T>, T_o,i = <Omega_i b_o b_e^T>; the collision
/// blocks are affine in (sigma_a, sigma_s) and evaluated on demand.
struct EvenOddBlocks {
  AngularBasis basis;
  std::vector<int> axes;
  std::array<Eigen::MatrixXd, 3> te;
  std::array<Eigen::MatrixXd, 3> to;
  ParityBlocks sigma;
  NoDriftReport no_drift;

  int n_even() const { return basis.n_even(); }
  int n_odd() const { return basis.n_odd(); }

  Eigen::MatrixXd c_ee(double sigma_a, double sigma_s) const {
    return sigma_s * sigma.ee - (sigma_a + sigma_s) * Eigen::MatrixXd::Identity(n_even(), n_even());
  }
  Eigen::MatrixXd c_oo(double sigma_a, double sigma_s) const {
    return sigma_s * sigma.oo - (sigma_a + sigma_s) * Eigen::MatrixXd::Identity(n_odd(), n_odd());
  }
  Eigen::MatrixXd c_eo(double, double sigma_s) const { return sigma_s * sigma.eo; }
  Eigen::MatrixXd c_oe(double, double sigma_s) const { return sigma_s * sigma.oe; }
};

inline EvenOddBlocks build_even_odd(const FluxMatrices& flux, const ScatteringMatrix& sigma,
                                    const AngularBasis& basis, double no_drift_tolerance = 1e-10) {
  if (sigma.sigma.rows() != basis.size()) {
    throw InvalidInput("scattering matrix and basis sizes differ");
  }
  EvenOddBlocks b;
  b.basis = basis;
  b.axes = flux.axes;
  for (int a : flux.axes) {
    const auto blocks = split_even_odd(flux[a], basis);
    b.te[static_cast<size_t>(a)] = blocks.eo;
    b.to[static_cast<size_t>(a)] = blocks.oe;
  }
  b.sigma = split_even_odd(sigma.sigma, basis);
  b.no_drift = check_no_drift(b.sigma, no_drift_tolerance);
  return b;
}

inline void require_positive_attenuation(double sigma_a, double sigma_s) {
  if (!(sigma_a + sigma_s > 0.0)) {
    throw ModelAssumptionViolation(
        "attenuation sigma_t = sigma_a + sigma_s = " + std::to_string(sigma_a + sigma_s) +
        " must be positive for C_oo to be invertible");
  }
}

/// Cholesky factorization of -C_oo, which is positive definite for a kernel
/// that is positive, symmetric and normalized and sigma_t > 0.
class CooFactorization {
 public:
  CooFactorization(const EvenOddBlocks& blocks, double sigma_a, double sigma_s) {
    require_positive_attenuation(sigma_a, sigma_s);
    coo_ = blocks.c_oo(sigma_a, sigma_s);
    llt_.compute(-coo_);
    if (llt_.info() != Eigen::Success) {
      throw ModelAssumptionViolation(
          "Cholesky factorization of -C_oo failed: the kernel is not positive, symmetric and "
          "normalized (or the scattering matrix is under-resolved)");
    }
  }

  // C_oo^{-1} rhs
  template <class Rhs>
  Eigen::MatrixXd solve(const Rhs& rhs) const {
    return -llt_.solve(rhs);
  }

  const Eigen::MatrixXd& coo() const { return coo_; }

 private:
  Eigen::MatrixXd coo_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

inline CooFactorization factorize_coo(const EvenOddBlocks& blocks, double sigma_a, double sigma_s) {
  return CooFactorization(blocks, sigma_a, sigma_s);
}

/// K_ij = T_e,i C_oo^{-1} T_o,j for active axes, plus C_ee, at one material point.
struct DiffusionBlocks {
  std::vector<int> axes;
  std::array<std::array<Eigen::MatrixXd, 3>, 3> k;
  Eigen::MatrixXd c_ee;

  const Eigen::MatrixXd& operator()(int i, int j) const {
    return k[static_cast<size_t>(i)][static_cast<size_t>(j)];
  }
};

inline void require_no_drift(const EvenOddBlocks& blocks) {
  if (!blocks.no_drift.passes) {
    throw ModelAssumptionViolation(
        "kernel violates the no-drift assumption: max |Sigma_eo| = " +
        std::to_string(blocks.no_drift.max_abs_eo) + ", max |Sigma_oe| = " +
        std::to_string(blocks.no_drift.max_abs_oe) + " (tolerance " +
        std::to_string(blocks.no_drift.tolerance) + ")");
  }
}

inline DiffusionBlocks diffusion_blocks(const EvenOddBlocks& blocks, double sigma_a, double sigma_s) {
  require_no_drift(blocks);
  const CooFactorization coo(blocks, sigma_a, sigma_s);
  DiffusionBlocks d;
  d.axes = blocks.axes;
  for (int j : blocks.axes) {
    const Eigen::MatrixXd coo_inv_to = coo.solve(blocks.to[static_cast<size_t>(j)]);
    for (int i : blocks.axes) {
      d.k[static_cast<size_t>(i)][static_cast<size_t>(j)] = blocks.te[static_cast<size_t>(i)] * coo_inv_to;
    }
  }
  d.c_ee = blocks.c_ee(sigma_a, sigma_s);
  return d;
}

/// Pointwise K evaluation with a memo keyed on (sigma_a, sigma_s), for
/// piecewise-constant material data.
class DiffusionBlockCache {
 public:
  explicit DiffusionBlockCache(const EvenOddBlocks& blocks) : blocks_(&blocks) {}

  const DiffusionBlocks& at(double sigma_a, double sigma_s) {
    const auto key = std::make_pair(sigma_a, sigma_s);
    auto it = memo_.find(key);
    if (it == memo_.end()) it = memo_.emplace(key, diffusion_blocks(*blocks_, sigma_a, sigma_s)).first;
    return it->second;
  }

  size_t size() const { return memo_.size(); }

 private:
  const EvenOddBlocks* blocks_;
  std::map<std::pair<double, double>, DiffusionBlocks> memo_;
};

/// Everything the second-order system needs from the angular discretization.
struct SecondOrderModel {
  AngularBasis basis;
  Kernel kernel;
  int quadrature_degree = 0;
  int sigma_degree = 0;
  FluxMatrices flux;
  ScatteringMatrix sigma;
  EvenOddBlocks blocks;
};

inline int default_quadrature_degree(int order) { return 2 * order + 2; }

inline SecondOrderModel generate_model(Geometry geometry, int order, const Kernel& kernel,
                                       std::optional<int> quadrature_degree = std::nullopt,
                                       std::optional<int> sigma_degree = std::nullopt) {
  SecondOrderModel m;
  m.basis = build_basis(geometry, order);
  m.kernel = kernel;
  m.quadrature_degree = quadrature_degree.value_or(default_quadrature_degree(order));
  if (m.quadrature_degree < 2 * order + 1) {
    throw InvalidInput("quadrature degree " + std::to_string(m.quadrature_degree) +
                       " too low: flux matrices need exactness >= 2N+1 = " +
                       std::to_string(2 * order + 1));
  }
  m.sigma_degree = sigma_degree.value_or(std::max(recommended_sigma_degree(kernel, order), m.quadrature_degree));
  m.flux = assemble_flux_matrices(m.basis, full_sphere_rule(m.quadrature_degree));
  m.sigma = assemble_sigma(kernel, m.basis, full_sphere_rule(m.sigma_degree));
  m.blocks = build_even_odd(m.flux, m.sigma, m.basis);
  return m;
}

}  // namespace secpn
