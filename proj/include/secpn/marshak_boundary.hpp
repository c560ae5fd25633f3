#pragma once

#include <array>
#include <cmath>
#include <map>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "secpn/angular_basis.hpp"
#include "secpn/errors.hpp"
#include "secpn/sphere_quadrature.hpp"

namespace secpn {

/// Specular reflection at the plane orthogonal to n.
inline Eigen::Vector3d reflect(const Eigen::Vector3d& omega, const Eigen::Vector3d& n) {
  return omega - 2.0 * n.dot(omega) * n;
}

struct VacuumSource {};
struct IsotropicSource {
  double value = 0.0;
};
struct ShExpansionSource {
  struct Term {
    int l = 0;
    int m = 0;
    double c = 0.0;
  };
  std::vector<Term> terms;
};

/// Incoming boundary distribution I_b(Omega).
using BoundarySource = std::variant<VacuumSource, IsotropicSource, ShExpansionSource>;

inline double eval_source(const BoundarySource& s, const Eigen::Vector3d& omega) {
  if (std::holds_alternative<VacuumSource>(s)) return 0.0;
  if (const auto* iso = std::get_if<IsotropicSource>(&s)) return iso->value;
  const auto& sh = std::get<ShExpansionSource>(s);
  const Direction d = Direction::from_cartesian(omega);
  double v = 0.0;
  for (const auto& t : sh.terms) v += t.c * eval_sh({t.l, t.m}, d);
  return v;
}

/// Reflectivity and incoming distribution for one boundary tag.
struct BoundaryCondition {
  double rho = 0.0;
  BoundarySource source = VacuumSource{};
};

/// Marshak operators for one outward normal.
///
/// H_o = int_{n.Omega<0} b_o (b_o - rho b_o(Omega_r))^T, H_e the same with b_e,
/// A_eo = <(n.Omega) b_e b_o^T>, B_l = A_eo H_o^{-1} H_e, B_r = A_eo H_o^{-1}.
struct BoundaryOperatorSet {
  Eigen::Vector3d normal;
  double rho = 0.0;
  Eigen::MatrixXd h_o;
  Eigen::MatrixXd h_e;
  Eigen::MatrixXd a_eo;
  Eigen::MatrixXd b_l;
  Eigen::MatrixXd b_r;
  double h_o_min_singular_value = 0.0;
  Eigen::PartialPivLU<Eigen::MatrixXd> h_o_lu;
};

inline void check_half_rule(const QuadratureRule& rule, const Eigen::Vector3d& n) {
  if (rule.domain != QuadratureDomain::half_sphere || (rule.normal - n).norm() > 1e-12) {
    throw InvalidInput("boundary operators need the half-sphere rule of the same normal");
  }
}

inline BoundaryOperatorSet boundary_operators(const AngularBasis& basis, const Eigen::Vector3d& n,
                                              double rho, const QuadratureRule& rule_half) {
  if (!(std::abs(rho) < 1.0)) {
    throw InvalidInput("reflectivity rho=" + std::to_string(rho) + " must satisfy |rho| < 1");
  }
  check_half_rule(rule_half, n);
  const int ne = basis.n_even();
  const int no = basis.n_odd();
  BoundaryOperatorSet ops;
  ops.normal = n;
  ops.rho = rho;
  ops.h_o = Eigen::MatrixXd::Zero(no, no);
  ops.h_e = Eigen::MatrixXd::Zero(no, ne);
  ops.a_eo = Eigen::MatrixXd::Zero(ne, no);
  for (size_t q = 0; q < rule_half.size(); ++q) {
    const Eigen::Vector3d& omega = rule_half.points[q];
    const double w = rule_half.weights[q];
    const Eigen::VectorXd b = basis.evaluate(rule_half.nodes[q]);
    const Eigen::VectorXd br = basis.evaluate(Direction::from_cartesian(reflect(omega, n)));
    const Eigen::VectorXd bo = AngularBasis::restrict(b, basis.odd_indices);
    const Eigen::VectorXd be = AngularBasis::restrict(b, basis.even_indices);
    const Eigen::VectorXd bro = AngularBasis::restrict(br, basis.odd_indices);
    const Eigen::VectorXd bre = AngularBasis::restrict(br, basis.even_indices);
    ops.h_o += w * bo * (bo - rho * bro).transpose();
    ops.h_e += w * bo * (be - rho * bre).transpose();
    // The outflow hemisphere contributes the same amount by parity:
    // (n.(-Omega)) b_e(-Omega) b_o(-Omega)^T = (n.Omega) b_e b_o^T.
    ops.a_eo += 2.0 * w * n.dot(omega) * be * bo.transpose();
  }
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(ops.h_o);
  const auto& sv = svd.singularValues();
  ops.h_o_min_singular_value = sv.size() > 0 ? sv[sv.size() - 1] : 0.0;
  if (sv.size() > 0 && !(ops.h_o_min_singular_value > 1e-13 * sv[0])) {
    throw NumericalFailure("boundary matrix H_o is singular (sigma_min=" +
                           std::to_string(ops.h_o_min_singular_value) +
                           "); the half-sphere quadrature under-resolves the basis");
  }
  ops.h_o_lu.compute(ops.h_o);
  ops.b_r = ops.h_o_lu.solve(Eigen::MatrixXd::Identity(no, no));
  ops.b_r = ops.a_eo * ops.b_r;
  ops.b_l = ops.b_r * ops.h_e;
  return ops;
}

inline BoundaryOperatorSet boundary_operators(const AngularBasis& basis, const Eigen::Vector3d& n,
                                              double rho, int degree) {
  return boundary_operators(basis, n, rho, half_sphere_rule(n, degree));
}

/// f_b = int_{n.Omega<0} (1 - rho) b_o I_b dOmega.
inline Eigen::VectorXd boundary_source_moments(const BoundarySource& source, const AngularBasis& basis,
                                               const Eigen::Vector3d& n, double rho,
                                               const QuadratureRule& rule_half) {
  check_half_rule(rule_half, n);
  Eigen::VectorXd f = Eigen::VectorXd::Zero(basis.n_odd());
  if (std::holds_alternative<VacuumSource>(source)) return f;
  for (size_t q = 0; q < rule_half.size(); ++q) {
    const double ib = eval_source(source, rule_half.points[q]);
    f += rule_half.weights[q] * ib * basis.evaluate_odd(rule_half.nodes[q]);
  }
  return (1.0 - rho) * f;
}

/// Odd moments on the boundary from the Marshak conditions.
inline Eigen::VectorXd eliminate_odd_at_boundary(const BoundaryOperatorSet& ops,
                                                 const Eigen::VectorXd& u_e,
                                                 const Eigen::VectorXd& f_b) {
  if (u_e.size() != ops.h_e.cols() || f_b.size() != ops.h_o.rows()) {
    throw InvalidInput("eliminate_odd_at_boundary: inconsistent vector sizes");
  }
  return ops.h_o_lu.solve(f_b - ops.h_e * u_e);
}

/// Boundary operators and source moments for one (tag, normal) pair.
struct BoundaryData {
  BoundaryOperatorSet ops;
  Eigen::VectorXd f_b;
};

/// Memo of boundary data per (tag, normal). Normals are keyed after rounding
/// to 1e-12 so that edges of one straight boundary segment share an entry.
class BoundaryOperatorCache {
 public:
  BoundaryOperatorCache(const AngularBasis& basis, int degree) : basis_(basis), degree_(degree) {}

  const BoundaryData& get(const std::string& tag, const BoundaryCondition& bc, const Eigen::Vector3d& n) {
    const auto key = std::make_tuple(tag, quantize(n.x()), quantize(n.y()), quantize(n.z()));
    auto it = memo_.find(key);
    if (it == memo_.end()) {
      const auto rule = half_sphere_rule(n, degree_);
      BoundaryData d{boundary_operators(basis_, n, bc.rho, rule),
                     boundary_source_moments(bc.source, basis_, n, bc.rho, rule)};
      it = memo_.emplace(key, std::move(d)).first;
    }
    return it->second;
  }

  size_t size() const { return memo_.size(); }

 private:
  static long long quantize(double v) { return std::llround(v * 1e12); }

  AngularBasis basis_;
  int degree_;
  std::map<std::tuple<std::string, long long, long long, long long>, BoundaryData> memo_;
};

}  // namespace secpn
