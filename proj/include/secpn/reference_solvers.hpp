#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "secpn/angular_basis.hpp"
#include "secpn/errors.hpp"
#include "secpn/marshak_boundary.hpp"
#include "secpn/mesh.hpp"
#include "secpn/parallel.hpp"
#include "secpn/pn_assembly.hpp"
#include "secpn/scattering.hpp"
#include "secpn/sphere_quadrature.hpp"

namespace secpn {

/// Homogeneous slab [z_min, z_max] with a boundary condition at each end.
struct SlabProblem {
  double sigma_a = 0.0;
  double sigma_s = 1.0;
  Kernel kernel = IsotropicKernel{};
  BoundaryCondition left;
  BoundaryCondition right;
  Mesh1D mesh;

  void validate() const {
    mesh.validate();
    if (sigma_a < 0.0 || sigma_s < 0.0) throw InvalidInput("negative material coefficient");
    if (!(sigma_a + sigma_s > 0.0)) throw InvalidInput("sigma_t = sigma_a + sigma_s must be positive");
    for (const auto* bc : {&left, &right}) {
      if (!(bc->rho >= 0.0 && bc->rho < 1.0)) throw InvalidInput("reflectivity must lie in [0, 1)");
    }
    validate_kernel(kernel);
  }
};

/// Gauss-Legendre ordinates on [-1, 1].
struct OrdinateSet {
  std::vector<double> mu;
  std::vector<double> w;

  explicit OrdinateSet(int n_mu) {
    if (n_mu < 2 || n_mu % 2 != 0) throw InvalidInput("the ordinate count must be even and at least 2");
    auto gl = gauss_legendre(n_mu);
    mu = std::move(gl.nodes);
    w = std::move(gl.weights);
  }
  int size() const { return static_cast<int>(mu.size()); }
};

struct DomOptions {
  int n_mu = 64;
  double tolerance = 1e-10;
  int max_iterations = 10000;
  int n_azimuth = 256;  // trapezoid points for the slab kernel and boundary averages
};

struct DomSolution {
  OrdinateSet ordinates{2};
  std::vector<double> z;
  Eigen::MatrixXd intensity;  // n_nodes x n_mu
  Eigen::VectorXd phi;
  int iterations = 0;
  double residual = 0.0;
};

namespace detail {

inline Eigen::Vector3d slab_direction(double mu, double azimuth) {
  const double s = std::sqrt(std::max(0.0, 1.0 - mu * mu));
  return {s * std::cos(azimuth), s * std::sin(azimuth), mu};
}

// (1/2pi) int_0^2pi I_b(mu, phi) dphi
inline double azimuthal_mean(const BoundarySource& src, double mu, int n_az) {
  if (std::holds_alternative<VacuumSource>(src)) return 0.0;
  if (const auto* iso = std::get_if<IsotropicSource>(&src)) return iso->value;
  double s = 0.0;
  for (int k = 0; k < n_az; ++k) s += eval_source(src, slab_direction(mu, 2.0 * kPi * k / n_az));
  return s / n_az;
}

// int (s/h) exp(-(h-s)/lambda) ds / mu over one cell, times sigma_t:
// weight of the downstream source value for a linear source.
inline double downstream_weight(double tau) {
  const double a0 = -std::expm1(-tau);
  double c;
  if (tau < 1e-3) {
    c = tau * (0.5 - tau * (1.0 / 3.0 - tau * (1.0 / 8.0 - tau / 30.0)));
  } else {
    c = (a0 - tau * std::exp(-tau)) / tau;
  }
  return a0 - c;
}

}  // namespace detail

/// Slab kernel kappa~(mu, mu') = int_0^2pi kappa(Omega(mu, 0), Omega(mu', phi')) dphi'.
inline Eigen::MatrixXd slab_kernel(const Kernel& k, const OrdinateSet& o, int n_azimuth) {
  const int n = o.size();
  Eigen::MatrixXd kt(n, n);
  if (std::holds_alternative<IsotropicKernel>(k)) {
    kt.setConstant(0.5);
    return kt;
  }
  parallel_for(static_cast<size_t>(n), [&](size_t i) {
    const Eigen::Vector3d a = detail::slab_direction(o.mu[i], 0.0);
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int q = 0; q < n_azimuth; ++q) {
        s += eval_kernel(k, a, detail::slab_direction(o.mu[static_cast<size_t>(j)], 2.0 * kPi * q / n_azimuth));
      }
      kt(static_cast<Eigen::Index>(i), j) = 2.0 * kPi * s / n_azimuth;
    }
  });
  return kt;
}

/// Discrete ordinates in slab geometry by source iteration.
///
/// Each sweep integrates mu dI/dz + sigma_t I = S along characteristics with
/// S linear on each cell, so a pure absorber is reproduced exactly.
inline DomSolution dom_slab_solve(const SlabProblem& p, const DomOptions& opts = {}) {
  p.validate();
  if (opts.tolerance <= 0.0 || opts.max_iterations < 1) throw InvalidInput("invalid DOM iteration controls");
  DomSolution sol;
  sol.ordinates = OrdinateSet(opts.n_mu);
  const auto& o = sol.ordinates;
  const int nq = o.size();
  const int nn = p.mesh.n_nodes();
  const int nc = p.mesh.n_cells;
  const double st = p.sigma_a + p.sigma_s;
  const double h = p.mesh.h();
  sol.z = p.mesh.nodes();

  const bool isotropic = std::holds_alternative<IsotropicKernel>(p.kernel);
  Eigen::MatrixXd kw;  // kappa~(mu_q, mu_q') w_q'
  if (!isotropic) {
    kw = slab_kernel(p.kernel, o, opts.n_azimuth);
    for (int j = 0; j < nq; ++j) kw.col(j) *= o.w[static_cast<size_t>(j)];
  }
  const Eigen::Map<const Eigen::VectorXd> wv(o.w.data(), nq);

  // Incoming boundary data. Ordinates are ascending, so q < nq/2 has mu < 0.
  const int half = nq / 2;
  Eigen::VectorXd in_left(nq), in_right(nq);
  for (int q = 0; q < nq; ++q) {
    in_left[q] = detail::azimuthal_mean(p.left.source, o.mu[static_cast<size_t>(q)], opts.n_azimuth);
    in_right[q] = detail::azimuthal_mean(p.right.source, o.mu[static_cast<size_t>(q)], opts.n_azimuth);
  }
  std::vector<double> e_tau(static_cast<size_t>(nq)), w_down(static_cast<size_t>(nq)), w_up(static_cast<size_t>(nq));
  for (int q = 0; q < nq; ++q) {
    const double tau = st * h / std::abs(o.mu[static_cast<size_t>(q)]);
    e_tau[static_cast<size_t>(q)] = std::exp(-tau);
    w_down[static_cast<size_t>(q)] = detail::downstream_weight(tau) / st;
    w_up[static_cast<size_t>(q)] = (-std::expm1(-tau)) / st - w_down[static_cast<size_t>(q)];
  }

  Eigen::MatrixXd psi = Eigen::MatrixXd::Zero(nn, nq);
  Eigen::MatrixXd src(nn, nq);
  Eigen::VectorXd phi = Eigen::VectorXd::Zero(nn);
  for (int it = 1; it <= opts.max_iterations; ++it) {
    if (p.sigma_s == 0.0) {
      src.setZero();
    } else if (isotropic) {
      src.colwise() = (0.5 * p.sigma_s) * (psi * wv);
    } else {
      src.noalias() = p.sigma_s * psi * kw.transpose();
    }
    // Rightward sweep, then reflect at the right end with the fresh outflow.
    parallel_for(static_cast<size_t>(half), [&](size_t k) {
      const int q = half + static_cast<int>(k);
      const int qr = nq - 1 - q;  // mirrored ordinate
      double v = (1.0 - p.left.rho) * in_left[q] + p.left.rho * psi(0, qr);
      psi(0, q) = v;
      for (int c = 0; c < nc; ++c) {
        v = v * e_tau[static_cast<size_t>(q)] + w_up[static_cast<size_t>(q)] * src(c, q) +
            w_down[static_cast<size_t>(q)] * src(c + 1, q);
        psi(c + 1, q) = v;
      }
    });
    parallel_for(static_cast<size_t>(half), [&](size_t k) {
      const int q = static_cast<int>(k);
      const int qr = nq - 1 - q;
      double v = (1.0 - p.right.rho) * in_right[q] + p.right.rho * psi(nc, qr);
      psi(nc, q) = v;
      for (int c = nc - 1; c >= 0; --c) {
        v = v * e_tau[static_cast<size_t>(q)] + w_up[static_cast<size_t>(q)] * src(c + 1, q) +
            w_down[static_cast<size_t>(q)] * src(c, q);
        psi(c, q) = v;
      }
    });
    const Eigen::VectorXd next = 2.0 * kPi * (psi * wv);
    const double scale = std::max(next.cwiseAbs().maxCoeff(), 1e-300);
    sol.residual = (next - phi).cwiseAbs().maxCoeff() / scale;
    phi = next;
    sol.iterations = it;
    if (sol.residual < opts.tolerance || next.cwiseAbs().maxCoeff() == 0.0) {
      sol.intensity = psi;
      sol.phi = phi;
      return sol;
    }
  }
  throw NumericalFailure("discrete ordinates source iteration did not converge in " +
                         std::to_string(opts.max_iterations) + " iterations (last relative change " +
                         std::to_string(sol.residual) + ")");
}

/// Net partial currents 2 pi sum w |mu| I at both ends: {in_left, out_left, in_right, out_right}.
inline std::array<double, 4> dom_boundary_currents(const DomSolution& s) {
  const auto& o = s.ordinates;
  const Eigen::Index last = s.intensity.rows() - 1;
  std::array<double, 4> j{0, 0, 0, 0};
  for (int q = 0; q < o.size(); ++q) {
    const double wm = 2.0 * kPi * o.w[static_cast<size_t>(q)] * std::abs(o.mu[static_cast<size_t>(q)]);
    if (o.mu[static_cast<size_t>(q)] > 0.0) {
      j[0] += wm * s.intensity(0, q);
      j[3] += wm * s.intensity(last, q);
    } else {
      j[1] += wm * s.intensity(0, q);
      j[2] += wm * s.intensity(last, q);
    }
  }
  return j;
}

/// First-order PN slab solution on a staggered grid.
struct PnSlabSolution {
  AngularBasis basis;
  std::vector<double> z;
  Eigen::MatrixXd u_e;  // n_nodes x n_even
  Eigen::MatrixXd u_o;  // n_cells x n_odd at cell centres
  Eigen::VectorXd u_o_left;
  Eigen::VectorXd u_o_right;

  Eigen::VectorXd phi() const { return std::sqrt(kFourPi) * u_e.col(0); }
};

/// Direct solve of T_z u' = (sigma_s Sigma - sigma_t I) u with Marshak rows
/// at both ends. Even moments live on nodes and odd moments on cell centres,
/// with one extra odd unknown at each end; the end nodes use half cells.
inline PnSlabSolution pn_firstorder_slab_solve(int order, const SlabProblem& p,
                                               std::optional<int> quadrature_degree = std::nullopt) {
  p.validate();
  const auto model = generate_model(Geometry::slab1d, order, p.kernel, quadrature_degree);
  const auto& b = model.blocks;
  const int ne = b.n_even(), no = b.n_odd();
  const int n = p.mesh.n_cells;
  const double h = p.mesh.h();
  const Eigen::MatrixXd& te = b.te[2];
  const Eigen::MatrixXd& to = b.to[2];
  const Eigen::MatrixXd cee = b.c_ee(p.sigma_a, p.sigma_s), coo = b.c_oo(p.sigma_a, p.sigma_s);
  const Eigen::MatrixXd ceo = b.c_eo(p.sigma_a, p.sigma_s), coe = b.c_oe(p.sigma_a, p.sigma_s);

  // Unknown layout: u_e nodes, then u_o centres, then u_o left and right.
  const int off_o = (n + 1) * ne;
  const int off_l = off_o + n * no;
  const int off_r = off_l + no;
  const int ndof = off_r + no;
  auto ue = [&](int k) { return k * ne; };
  auto uo = [&](int c) { return off_o + c * no; };

  std::vector<Eigen::Triplet<double>> trips;
  auto put = [&](int r0, int c0, const Eigen::MatrixXd& m, double s) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j)
        if (m(i, j) != 0.0) trips.emplace_back(r0 + static_cast<int>(i), c0 + static_cast<int>(j), s * m(i, j));
  };
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(ndof);

  // Odd equations at cell centres (rows reuse the u_o block layout).
  for (int c = 0; c < n; ++c) {
    const int r = uo(c);
    put(r, ue(c + 1), to, 1.0 / h);
    put(r, ue(c), to, -1.0 / h);
    put(r, uo(c), coo, -1.0);
    put(r, ue(c), coe, -0.5);
    put(r, ue(c + 1), coe, -0.5);
  }
  // Even equations at nodes (rows reuse the u_e block layout).
  for (int k = 0; k <= n; ++k) {
    const int r = ue(k);
    const int lo = k == 0 ? off_l : uo(k - 1);
    const int hi = k == n ? off_r : uo(k);
    const double dz = (k == 0 || k == n) ? 0.5 * h : h;
    put(r, hi, te, 1.0 / dz);
    put(r, lo, te, -1.0 / dz);
    put(r, ue(k), cee, -1.0);
    put(r, lo, ceo, -0.5);
    put(r, hi, ceo, -0.5);
  }
  // Marshak rows.
  const int qdeg = model.quadrature_degree;
  const std::array<std::tuple<const BoundaryCondition*, double, int, int>, 2> ends{
      {{&p.left, -1.0, off_l, ue(0)}, {&p.right, 1.0, off_r, ue(n)}}};
  for (const auto& [bc, nz, oo, ee] : ends) {
    const Eigen::Vector3d nrm(0.0, 0.0, nz);
    const auto rule = half_sphere_rule(nrm, qdeg);
    const auto ops = boundary_operators(model.basis, nrm, bc->rho, rule);
    put(oo, oo, ops.h_o, 1.0);
    put(oo, ee, ops.h_e, 1.0);
    rhs.segment(oo, no) = boundary_source_moments(bc->source, model.basis, nrm, bc->rho, rule);
  }

  Eigen::SparseMatrix<double> a(ndof, ndof);
  a.setFromTriplets(trips.begin(), trips.end());
  a.makeCompressed();
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(a);
  if (lu.info() != Eigen::Success) {
    throw NumericalFailure("first-order PN system is singular (check boundary rank): " + lu.lastErrorMessage());
  }
  const Eigen::VectorXd x = lu.solve(rhs);
  if (!x.allFinite()) throw NumericalFailure("first-order PN solve produced non-finite values");

  PnSlabSolution s;
  s.basis = model.basis;
  s.z = p.mesh.nodes();
  s.u_e.resize(n + 1, ne);
  s.u_o.resize(n, no);
  for (int k = 0; k <= n; ++k) s.u_e.row(k) = x.segment(ue(k), ne).transpose();
  for (int c = 0; c < n; ++c) s.u_o.row(c) = x.segment(uo(c), no).transpose();
  s.u_o_left = x.segment(off_l, no);
  s.u_o_right = x.segment(off_r, no);
  return s;
}

}  // namespace secpn
