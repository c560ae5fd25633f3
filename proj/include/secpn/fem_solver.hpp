#pragma once

#include <array>
#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "secpn/errors.hpp"
#include "secpn/marshak_boundary.hpp"
#include "secpn/mesh.hpp"
#include "secpn/pn_assembly.hpp"
#include "secpn/scattering.hpp"

namespace secpn {

/// Stationary monoenergetic transport problem on a 1D slab or 2D planar mesh.
///
/// sigma_a and sigma_s are per cell; a single entry means a constant value.
struct TransportProblem {
  Geometry geometry = Geometry::slab1d;
  std::variant<Mesh1D, Mesh2D> mesh = Mesh1D{};
  int order = 1;
  Kernel kernel = IsotropicKernel{};
  std::vector<double> sigma_a{0.0};
  std::vector<double> sigma_s{1.0};
  std::map<std::string, BoundaryCondition> boundaries;
  std::optional<int> quadrature_degree;
  std::optional<int> sigma_degree;

  int n_cells() const {
    if (const auto* m1 = std::get_if<Mesh1D>(&mesh)) return m1->n_cells;
    return std::get<Mesh2D>(mesh).n_triangles();
  }
  int n_nodes() const {
    if (const auto* m1 = std::get_if<Mesh1D>(&mesh)) return m1->n_nodes();
    return std::get<Mesh2D>(mesh).n_nodes();
  }
  double sigma_a_at(int cell) const { return sigma_a.size() == 1 ? sigma_a[0] : sigma_a[static_cast<size_t>(cell)]; }
  double sigma_s_at(int cell) const { return sigma_s.size() == 1 ? sigma_s[0] : sigma_s[static_cast<size_t>(cell)]; }

  int degree() const { return quadrature_degree.value_or(default_quadrature_degree(order)); }
};

inline std::vector<std::string> mesh_tags(const TransportProblem& p) {
  if (std::holds_alternative<Mesh1D>(p.mesh)) return {"left", "right"};
  const auto t = std::get<Mesh2D>(p.mesh).tags();
  return {t.begin(), t.end()};
}

inline void validate_problem(const TransportProblem& p) {
  if (p.geometry == Geometry::full3d) {
    throw InvalidInput("the finite element solver supports slab1d and planar2d only");
  }
  if ((p.geometry == Geometry::slab1d) != std::holds_alternative<Mesh1D>(p.mesh)) {
    throw InvalidInput("slab1d needs a 1D mesh and planar2d a triangular mesh");
  }
  const int cells = p.n_cells();
  for (const auto* v : {&p.sigma_a, &p.sigma_s}) {
    if (v->size() != 1 && v->size() != static_cast<size_t>(cells)) {
      throw InvalidInput("material coefficients need one value or one value per cell (" +
                         std::to_string(cells) + ")");
    }
  }
  for (int c = 0; c < cells; ++c) {
    const double sa = p.sigma_a_at(c), ss = p.sigma_s_at(c);
    if (sa < 0.0 || ss < 0.0) throw InvalidInput("negative coefficient on cell " + std::to_string(c));
    if (!(sa + ss > 0.0)) {
      throw InvalidInput("sigma_t = sigma_a + sigma_s must be positive; cell " + std::to_string(c) +
                         " has sigma_t = " + std::to_string(sa + ss));
    }
  }
  const auto tags = mesh_tags(p);
  for (const auto& t : tags) {
    if (!p.boundaries.count(t)) throw InvalidInput("no boundary condition configured for tag '" + t + "'");
  }
  for (const auto& [t, bc] : p.boundaries) {
    if (std::find(tags.begin(), tags.end(), t) == tags.end()) {
      throw InvalidInput("boundary condition for unknown tag '" + t + "'");
    }
    if (!(bc.rho >= 0.0 && bc.rho < 1.0)) {
      throw InvalidInput("reflectivity of tag '" + t + "' must lie in [0, 1)");
    }
  }
}

/// Global sparse system over n_nodes * n_even unknowns, node-major.
///
/// The bilinear form is multiplied by -1 once so that the diffusion block is
/// positive definite (`negated`).
struct LinearSystem {
  Eigen::SparseMatrix<double> a;
  Eigen::VectorXd rhs;
  int n_nodes = 0;
  int n_even = 0;
  bool negated = true;
  std::shared_ptr<const SecondOrderModel> model;
};

namespace detail {

inline void add_block(std::vector<Eigen::Triplet<double>>& trips, int row_node, int col_node,
                      const Eigen::MatrixXd& block, double scale, int ne) {
  for (int r = 0; r < ne; ++r)
    for (int c = 0; c < ne; ++c) {
      const double v = scale * block(r, c);
      if (v != 0.0) trips.emplace_back(row_node * ne + r, col_node * ne + c, v);
    }
}

inline Eigen::Vector3d lift_normal(const Eigen::Vector2d& n) { return {n.x(), n.y(), 0.0}; }

}  // namespace detail

inline std::shared_ptr<const SecondOrderModel> make_model(const TransportProblem& p) {
  auto m = std::make_shared<SecondOrderModel>(
      generate_model(p.geometry, p.order, p.kernel, p.quadrature_degree, p.sigma_degree));
  require_no_drift(m->blocks);
  return m;
}

inline LinearSystem assemble(const TransportProblem& p, std::shared_ptr<const SecondOrderModel> model) {
  validate_problem(p);
  require_no_drift(model->blocks);
  const auto& blocks = model->blocks;
  const int ne = blocks.n_even();
  DiffusionBlockCache kcache(blocks);
  BoundaryOperatorCache bcache(model->basis, p.degree());

  LinearSystem sys;
  sys.n_nodes = p.n_nodes();
  sys.n_even = ne;
  sys.model = model;
  const int ndof = sys.n_nodes * ne;
  sys.rhs = Eigen::VectorXd::Zero(ndof);
  std::vector<Eigen::Triplet<double>> trips;

  if (const auto* m1 = std::get_if<Mesh1D>(&p.mesh)) {
    const double h = m1->h();
    trips.reserve(static_cast<size_t>(m1->n_cells) * 4 * ne * ne);
    for (int c = 0; c < m1->n_cells; ++c) {
      const auto& d = kcache.at(p.sigma_a_at(c), p.sigma_s_at(c));
      const Eigen::MatrixXd& kzz = d(2, 2);
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
          const double stiff = (a == b ? 1.0 : -1.0) / h;
          const double mass = h / 6.0 * (a == b ? 2.0 : 1.0);
          detail::add_block(trips, c + a, c + b, kzz, -stiff, ne);
          detail::add_block(trips, c + a, c + b, d.c_ee, -mass, ne);
        }
    }
    const std::array<std::pair<const char*, int>, 2> ends{{{"left", 0}, {"right", m1->n_cells}}};
    for (const auto& [tag, node] : ends) {
      const Eigen::Vector3d n(0.0, 0.0, node == 0 ? -1.0 : 1.0);
      const auto& bd = bcache.get(tag, p.boundaries.at(tag), n);
      detail::add_block(trips, node, node, bd.ops.b_l, -1.0, ne);
      sys.rhs.segment(node * ne, ne) -= bd.ops.b_r * bd.f_b;
    }
  } else {
    const auto& m2 = std::get<Mesh2D>(p.mesh);
    const auto& nodes = m2.nodes();
    trips.reserve(static_cast<size_t>(m2.n_triangles()) * 9 * ne * ne);
    for (int t = 0; t < m2.n_triangles(); ++t) {
      const auto& tri = m2.triangles()[static_cast<size_t>(t)];
      const double area = m2.areas()[static_cast<size_t>(t)];
      std::array<Eigen::Vector2d, 3> grad;
      for (int k = 0; k < 3; ++k) {
        const auto& p1 = nodes[static_cast<size_t>(tri[static_cast<size_t>((k + 1) % 3)])];
        const auto& p2 = nodes[static_cast<size_t>(tri[static_cast<size_t>((k + 2) % 3)])];
        grad[static_cast<size_t>(k)] = Eigen::Vector2d(p1.y() - p2.y(), p2.x() - p1.x()) / (2.0 * area);
      }
      const auto& d = kcache.at(p.sigma_a_at(t), p.sigma_s_at(t));
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) {
          Eigen::MatrixXd blk = Eigen::MatrixXd::Zero(ne, ne);
          for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
              blk += grad[static_cast<size_t>(a)][i] * grad[static_cast<size_t>(b)][j] * d(i, j);
          blk *= area;
          // exact P1 mass matrix (three-point rule)
          blk += area / 12.0 * (a == b ? 2.0 : 1.0) * d.c_ee;
          detail::add_block(trips, tri[static_cast<size_t>(a)], tri[static_cast<size_t>(b)], blk, -1.0, ne);
        }
    }
    // Two-point Gauss on each boundary edge.
    const double g0 = 0.5 * (1.0 - 1.0 / std::sqrt(3.0));
    const std::array<double, 2> xi{g0, 1.0 - g0};
    for (size_t e = 0; e < m2.boundary_edges().size(); ++e) {
      const auto& edge = m2.boundary_edges()[e];
      const double len = m2.edge_lengths()[e];
      const auto& bd = bcache.get(edge.tag, p.boundaries.at(edge.tag), detail::lift_normal(m2.edge_normals()[e]));
      const std::array<int, 2> en{edge.a, edge.b};
      const Eigen::VectorXd src = bd.ops.b_r * bd.f_b;
      for (int a = 0; a < 2; ++a) {
        double load = 0.0;
        for (double s : xi) load += 0.5 * len * (a == 0 ? 1.0 - s : s);
        sys.rhs.segment(en[static_cast<size_t>(a)] * ne, ne) -= load * src;
        for (int b = 0; b < 2; ++b) {
          double mass = 0.0;
          for (double s : xi) mass += 0.5 * len * (a == 0 ? 1.0 - s : s) * (b == 0 ? 1.0 - s : s);
          detail::add_block(trips, en[static_cast<size_t>(a)], en[static_cast<size_t>(b)], bd.ops.b_l, -mass, ne);
        }
      }
    }
  }
  sys.a.resize(ndof, ndof);
  sys.a.setFromTriplets(trips.begin(), trips.end());
  sys.a.makeCompressed();
  return sys;
}

inline LinearSystem assemble(const TransportProblem& p) { return assemble(p, make_model(p)); }

enum class SolverKind { direct, conjugate_gradient };

struct SolverOptions {
  SolverKind kind = SolverKind::direct;
  double tolerance = 1e-10;
  int max_iterations = 100000;
};

/// Even moments per node plus the solve record.
struct FieldSolution {
  Eigen::MatrixXd u_e;  // n_nodes x n_even
  double residual = 0.0;
  std::string solver;
  bool negated = true;
  std::shared_ptr<const SecondOrderModel> model;
};

inline FieldSolution solve(const LinearSystem& sys, const SolverOptions& opts = {}) {
  Eigen::VectorXd x;
  FieldSolution sol;
  if (opts.kind == SolverKind::direct) {
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(sys.a);
    if (lu.info() != Eigen::Success) {
      throw NumericalFailure("sparse LU factorization failed: " + lu.lastErrorMessage());
    }
    x = lu.solve(sys.rhs);
    sol.solver = "sparse_lu";
  } else {
    const double asym = (Eigen::SparseMatrix<double>(sys.a.transpose()) - sys.a).norm();
    if (asym > 1e-12 * std::max(1.0, sys.a.norm())) {
      throw InvalidInput("conjugate gradient needs a symmetric system; this one has asymmetry " +
                         std::to_string(asym) + " (use the direct solver)");
    }
    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper> cg;
    cg.setTolerance(opts.tolerance);
    cg.setMaxIterations(opts.max_iterations);
    cg.compute(sys.a);
    x = cg.solve(sys.rhs);
    if (cg.info() != Eigen::Success) {
      throw NumericalFailure("conjugate gradient did not converge (estimated error " +
                             std::to_string(cg.error()) + ")");
    }
    sol.solver = "conjugate_gradient";
  }
  const double rn = sys.rhs.norm();
  const double res = (sys.a * x - sys.rhs).norm();
  sol.residual = rn > 0.0 ? res / rn : res;
  if (!std::isfinite(sol.residual)) throw NumericalFailure("solve produced non-finite values");
  sol.u_e = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      x.data(), sys.n_nodes, sys.n_even);
  sol.negated = sys.negated;
  sol.model = sys.model;
  return sol;
}

/// phi = sqrt(4 pi) * u_(0,0) at every node.
inline Eigen::VectorXd radiative_energy(const FieldSolution& sol) {
  return std::sqrt(kFourPi) * sol.u_e.col(0);
}

/// Per-cell odd moments u_o = C_oo^{-1} sum_i T_o,i d_i u_e from the constant
/// P1 gradient of each cell. Returns n_cells x n_odd.
inline Eigen::MatrixXd recover_odd_moments(const FieldSolution& sol, const TransportProblem& p) {
  const auto& blocks = sol.model->blocks;
  const int no = blocks.n_odd();
  const int ne = blocks.n_even();
  Eigen::MatrixXd out(p.n_cells(), no);
  std::map<std::pair<double, double>, CooFactorization> coo;
  auto factor = [&](int c) -> const CooFactorization& {
    const auto key = std::make_pair(p.sigma_a_at(c), p.sigma_s_at(c));
    auto it = coo.find(key);
    if (it == coo.end()) it = coo.emplace(key, CooFactorization(blocks, key.first, key.second)).first;
    return it->second;
  };
  if (const auto* m1 = std::get_if<Mesh1D>(&p.mesh)) {
    for (int c = 0; c < m1->n_cells; ++c) {
      const Eigen::VectorXd du = (sol.u_e.row(c + 1) - sol.u_e.row(c)).transpose() / m1->h();
      out.row(c) = factor(c).solve(blocks.to[2] * du).transpose();
    }
  } else {
    const auto& m2 = std::get<Mesh2D>(p.mesh);
    for (int t = 0; t < m2.n_triangles(); ++t) {
      const auto& tri = m2.triangles()[static_cast<size_t>(t)];
      const double area = m2.areas()[static_cast<size_t>(t)];
      Eigen::VectorXd flux = Eigen::VectorXd::Zero(no);
      for (int axis = 0; axis < 2; ++axis) {
        Eigen::VectorXd du = Eigen::VectorXd::Zero(ne);
        for (int k = 0; k < 3; ++k) {
          const auto& p1 = m2.nodes()[static_cast<size_t>(tri[static_cast<size_t>((k + 1) % 3)])];
          const auto& p2 = m2.nodes()[static_cast<size_t>(tri[static_cast<size_t>((k + 2) % 3)])];
          const double g = axis == 0 ? (p1.y() - p2.y()) / (2.0 * area) : (p2.x() - p1.x()) / (2.0 * area);
          du += g * sol.u_e.row(tri[static_cast<size_t>(k)]).transpose();
        }
        flux += blocks.to[static_cast<size_t>(axis)] * du;
      }
      out.row(t) = factor(t).solve(flux).transpose();
    }
  }
  return out;
}

/// Largest |H_o u_o + H_e u_e - f_b| over the boundary, with u_o taken from
/// the adjacent cell and u_e at the boundary point (edge midpoint in 2D).
inline double marshak_consistency(const FieldSolution& sol, const TransportProblem& p) {
  const Eigen::MatrixXd u_o = recover_odd_moments(sol, p);
  BoundaryOperatorCache bcache(sol.model->basis, p.degree());
  double worst = 0.0;
  auto check = [&](const std::string& tag, const Eigen::Vector3d& n, const Eigen::VectorXd& ue,
                   const Eigen::VectorXd& uo) {
    const auto& bd = bcache.get(tag, p.boundaries.at(tag), n);
    worst = std::max(worst, (bd.ops.h_o * uo + bd.ops.h_e * ue - bd.f_b).cwiseAbs().maxCoeff());
  };
  if (const auto* m1 = std::get_if<Mesh1D>(&p.mesh)) {
    check("left", {0, 0, -1}, sol.u_e.row(0).transpose(), u_o.row(0).transpose());
    check("right", {0, 0, 1}, sol.u_e.row(m1->n_cells).transpose(), u_o.row(m1->n_cells - 1).transpose());
  } else {
    const auto& m2 = std::get<Mesh2D>(p.mesh);
    for (size_t e = 0; e < m2.boundary_edges().size(); ++e) {
      const auto& edge = m2.boundary_edges()[e];
      const Eigen::VectorXd ue = 0.5 * (sol.u_e.row(edge.a) + sol.u_e.row(edge.b)).transpose();
      check(edge.tag, detail::lift_normal(m2.edge_normals()[e]), ue,
            u_o.row(m2.edge_triangles()[e]).transpose());
    }
  }
  return worst;
}

/// Squared L2 norm of a P1 field, integrated exactly.
inline double p1_l2_norm_squared(const Mesh1D& m, const Eigen::VectorXd& f) {
  double s = 0.0;
  for (int c = 0; c < m.n_cells; ++c) {
    const double a = f[c], b = f[c + 1];
    s += m.h() / 3.0 * (a * a + a * b + b * b);
  }
  return s;
}

inline double p1_l2_norm_squared(const Mesh2D& m, const Eigen::VectorXd& f) {
  double s = 0.0;
  for (int t = 0; t < m.n_triangles(); ++t) {
    const auto& tri = m.triangles()[static_cast<size_t>(t)];
    const double a = f[tri[0]], b = f[tri[1]], c = f[tri[2]];
    s += m.areas()[static_cast<size_t>(t)] / 6.0 * (a * a + b * b + c * c + a * b + b * c + c * a);
  }
  return s;
}

/// ||a - b|| / ||b|| in L2 for two P1 fields on the same mesh.
template <class Mesh>
double relative_l2_difference(const Mesh& m, const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) throw InvalidInput("relative_l2_difference: fields differ in size");
  const double den = p1_l2_norm_squared(m, b);
  if (!(den > 0.0)) throw InvalidInput("relative_l2_difference: reference field has zero norm");
  return std::sqrt(p1_l2_norm_squared(m, a - b) / den);
}

/// Evaluates a P1 field on `from` at arbitrary points.
inline Eigen::VectorXd interpolate_p1(const Mesh1D& from, const Eigen::VectorXd& f, const std::vector<double>& z) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(z.size()));
  for (size_t i = 0; i < z.size(); ++i) {
    const double s = (z[i] - from.z_min) / from.h();
    const int c = std::clamp(static_cast<int>(std::floor(s)), 0, from.n_cells - 1);
    const double t = std::clamp(s - c, 0.0, 1.0);
    out[static_cast<Eigen::Index>(i)] = (1.0 - t) * f[c] + t * f[c + 1];
  }
  return out;
}

/// One-stop SecPN solve.
inline FieldSolution solve(const TransportProblem& p, const SolverOptions& opts = {}) {
  return solve(assemble(p), opts);
}

}  // namespace secpn
