#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "secpn/angular_basis.hpp"
#include "secpn/errors.hpp"
#include "secpn/parallel.hpp"
#include "secpn/sphere_quadrature.hpp"

namespace secpn {

struct IsotropicKernel {};

/// Henyey-Greenstein phase function with asymmetry g.
///
/// By default the argument is the scattering cosine Omega . Omega'. With
/// `literal_cosine` the composition cos(Omega . Omega') is used instead; that
/// variant does not satisfy the normalization and exists only for comparison.
struct HenyeyGreensteinKernel {
  double g = 0.0;
  bool literal_cosine = false;
};

/// Sum of c * mu^i * mu'^j.
struct PolynomialKernel {
  struct Term {
    int i = 0;
    int j = 0;
    double c = 0.0;
  };
  std::vector<Term> terms;

  int degree() const {
    int d = 0;
    for (const auto& t : terms) d = std::max(d, t.i + t.j);
    return d;
  }
};

struct TabulatedKernel {
  std::function<double(const Eigen::Vector3d&, const Eigen::Vector3d&)> fn;
};

using Kernel = std::variant<IsotropicKernel, HenyeyGreensteinKernel, PolynomialKernel, TabulatedKernel>;

inline Kernel make_hg_kernel(double g, bool literal_cosine = false) {
  if (!(std::abs(g) <= 1.0)) {
    throw InvalidInput("Henyey-Greenstein asymmetry g=" + std::to_string(g) + " outside [-1, 1]");
  }
  return HenyeyGreensteinKernel{g, literal_cosine};
}

// Normalized, symmetric polynomial kernel in (mu, mu') that violates the
// no-drift property: it couples S_20 with S_10 for N = 3.
inline Kernel drift_example_kernel() {
  const double s = 3.0 / (1900.0 * kPi);
  return PolynomialKernel{{{2, 0, 25.0 * s},
                           {0, 2, 25.0 * s},
                           {2, 2, -75.0 * s},
                           {2, 1, 45.0 * s},
                           {1, 2, 45.0 * s},
                           {1, 1, -27.0 * s},
                           {1, 0, -15.0 * s},
                           {0, 1, -15.0 * s},
                           {0, 0, 150.0 * s}}};
}

inline std::string kernel_name(const Kernel& k) {
  struct V {
    std::string operator()(const IsotropicKernel&) const { return "isotropic"; }
    std::string operator()(const HenyeyGreensteinKernel& h) const {
      return "hg(g=" + std::to_string(h.g) + ")";
    }
    std::string operator()(const PolynomialKernel&) const { return "polynomial"; }
    std::string operator()(const TabulatedKernel&) const { return "tabulated"; }
  };
  return std::visit(V{}, k);
}

/// Kernel value kappa(Omega, Omega') for unit vectors.
inline double eval_kernel(const Kernel& k, const Eigen::Vector3d& omega,
                          const Eigen::Vector3d& omega_prime) {
  struct V {
    const Eigen::Vector3d& a;
    const Eigen::Vector3d& b;
    double operator()(const IsotropicKernel&) const { return 1.0 / kFourPi; }
    double operator()(const HenyeyGreensteinKernel& h) const {
      if (!(std::abs(h.g) <= 1.0)) throw InvalidInput("Henyey-Greenstein g outside [-1, 1]");
      double c = std::clamp(a.dot(b), -1.0, 1.0);
      if (h.literal_cosine) c = std::cos(c);
      const double denom = std::max(1.0 + h.g * h.g - 2.0 * h.g * c, 1e-30);
      return (1.0 - h.g * h.g) / (kFourPi * denom * std::sqrt(denom));
    }
    double operator()(const PolynomialKernel& p) const {
      double v = 0.0;
      for (const auto& t : p.terms) v += t.c * std::pow(a.z(), t.i) * std::pow(b.z(), t.j);
      return v;
    }
    double operator()(const TabulatedKernel& t) const { return t.fn(a, b); }
  };
  return std::visit(V{omega, omega_prime}, k);
}

inline void validate_kernel(const Kernel& k) {
  if (const auto* h = std::get_if<HenyeyGreensteinKernel>(&k); h && !(std::abs(h->g) <= 1.0)) {
    throw InvalidInput("Henyey-Greenstein asymmetry g=" + std::to_string(h->g) + " outside [-1, 1]");
  }
  if (const auto* t = std::get_if<TabulatedKernel>(&k); t && !t->fn) {
    throw InvalidInput("tabulated kernel has no callable");
  }
}

// Quadrature degree for assembling the scattering matrix of an order-N basis.
// Odd so that the product rule is antipodally symmetric.
inline int recommended_sigma_degree(const Kernel& k, int order) {
  int d = 2 * order + 2;
  if (const auto* p = std::get_if<PolynomialKernel>(&k)) d = 2 * order + p->degree() + 2;
  if (const auto* h = std::get_if<HenyeyGreensteinKernel>(&k); h && std::abs(h->g) > 0.0) {
    const double ag = std::min(std::abs(h->g), 0.999);
    const int tail = static_cast<int>(std::ceil(std::log(1e-13) / std::log(ag)));
    d = 2 * order + std::min(tail, 100);
  }
  return d % 2 == 0 ? d + 1 : d;
}

struct ScatteringMatrix {
  Eigen::MatrixXd sigma;
  AngularBasis basis;
  double symmetry_residual = 0.0;
  std::vector<std::string> warnings;
};

/// Double-quadrature assembly of <<b(Omega) b(Omega')^T kappa(Omega, Omega')>>
/// using the same rule for both spheres.
inline ScatteringMatrix assemble_sigma(const Kernel& k, const AngularBasis& basis,
                                       const QuadratureRule& rule) {
  if (rule.domain != QuadratureDomain::full_sphere) {
    throw InvalidInput("assemble_sigma needs a full-sphere quadrature rule");
  }
  validate_kernel(k);
  const auto nq = static_cast<Eigen::Index>(rule.size());
  const int n = basis.size();
  Eigen::MatrixXd bw(n, nq);  // weighted basis values, one column per node
  for (Eigen::Index q = 0; q < nq; ++q) {
    bw.col(q) = rule.weights[static_cast<size_t>(q)] * basis.evaluate(rule.nodes[static_cast<size_t>(q)]);
  }
  // kb(:, p) = sum_q kappa(p, q) bw(:, q)
  Eigen::MatrixXd kb(n, nq);
  parallel_for(static_cast<size_t>(nq), [&](size_t p) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(n);
    for (Eigen::Index q = 0; q < nq; ++q) {
      acc += eval_kernel(k, rule.points[p], rule.points[static_cast<size_t>(q)]) * bw.col(q);
    }
    kb.col(static_cast<Eigen::Index>(p)) = acc;
  });

  ScatteringMatrix out;
  out.basis = basis;
  out.sigma = bw * kb.transpose();
  out.symmetry_residual = (out.sigma - out.sigma.transpose()).cwiseAbs().maxCoeff();
  if (out.symmetry_residual > 1e-8) {
    out.warnings.push_back("scattering matrix symmetry residual " +
                           std::to_string(out.symmetry_residual) +
                           " exceeds 1e-8: quadrature under-resolves the kernel");
  }
  if (const auto* h = std::get_if<HenyeyGreensteinKernel>(&k); h && std::abs(h->g) >= 0.999) {
    out.warnings.push_back("Henyey-Greenstein |g| >= 0.999 is near singular; expect quadrature error");
  }
  return out;
}

inline ScatteringMatrix assemble_sigma(const Kernel& k, const AngularBasis& basis) {
  return assemble_sigma(k, basis, full_sphere_rule(recommended_sigma_degree(k, basis.order)));
}

struct ParityBlocks {
  Eigen::MatrixXd ee, eo, oe, oo;
};

inline Eigen::MatrixXd select_block(const Eigen::MatrixXd& m, const std::vector<int>& rows,
                                    const std::vector<int>& cols) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = 0; j < cols.size(); ++j)
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m(rows[i], cols[j]);
  return out;
}

inline ParityBlocks split_even_odd(const Eigen::MatrixXd& m, const AngularBasis& basis) {
  const auto& e = basis.even_indices;
  const auto& o = basis.odd_indices;
  return {select_block(m, e, e), select_block(m, e, o), select_block(m, o, e), select_block(m, o, o)};
}

struct NoDriftReport {
  double max_abs_eo = 0.0;
  double max_abs_oe = 0.0;
  double tolerance = 1e-10;
  bool passes = true;
  // Location of the largest |Sigma_eo| entry within the block (row, col).
  int argmax_row = -1;
  int argmax_col = -1;
};

inline NoDriftReport check_no_drift(const ParityBlocks& blocks, double tolerance = 1e-10) {
  NoDriftReport r;
  r.tolerance = tolerance;
  if (blocks.eo.size() > 0) {
    Eigen::Index i = 0, j = 0;
    r.max_abs_eo = blocks.eo.cwiseAbs().maxCoeff(&i, &j);
    r.argmax_row = static_cast<int>(i);
    r.argmax_col = static_cast<int>(j);
  }
  if (blocks.oe.size() > 0) r.max_abs_oe = blocks.oe.cwiseAbs().maxCoeff();
  r.passes = std::max(r.max_abs_eo, r.max_abs_oe) < tolerance;
  return r;
}

// Smallest kernel value over all quadrature node pairs.
inline double kernel_minimum(const Kernel& k, const QuadratureRule& rule) {
  double kmin = std::numeric_limits<double>::infinity();
  for (const auto& a : rule.points)
    for (const auto& b : rule.points) kmin = std::min(kmin, eval_kernel(k, a, b));
  return kmin;
}

}  // namespace secpn
