// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include "secpn/secpn.hpp"

using namespace secpn;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

double max_abs(const Eigen::MatrixXd& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

Eigen::Vector3d random_unit(std::mt19937& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return Eigen::Vector3d(n(rng), n(rng), n(rng)).normalized();
}

TransportProblem slab_problem(int order, int cells, const Kernel& k, double sa, double ss, double rho_right) {
  TransportProblem p;
  p.geometry = Geometry::slab1d;
  p.order = order;
  p.mesh = Mesh1D(0.0, 1.0, cells);
  p.kernel = k;
  p.sigma_a = {sa};
  p.sigma_s = {ss};
  p.boundaries["left"] = {0.0, IsotropicSource{1.0}};
  p.boundaries["right"] = {rho_right, VacuumSource{}};
  return p;
}

Outcome flux_closed_form() {
  double worst = 0.0;
  for (int n = 1; n <= 9; n += 2) {
    const auto b = build_basis(Geometry::slab1d, n);
    const auto f = assemble_flux_matrices(b, full_sphere_rule(default_quadrature_degree(n)));
    worst = std::max(worst, max_abs(f[2] - slab_tz_closed_form(n)));
  }
  return {worst < 1e-13, "max abs error " + sci(worst) + " over N=1..9"};
}

Outcome basis_sizes() {
  bool ok = true;
  std::ostringstream d;
  for (int n : {1, 3, 5, 7}) {
    const int s1 = build_basis(Geometry::slab1d, n).size();
    const int s2 = build_basis(Geometry::planar2d, n).size();
    const int s3 = build_basis(Geometry::full3d, n).size();
    ok = ok && s1 == n + 1 && 2 * s2 == n * n + 3 * n + 2 && s3 == n * n + 2 * n + 1;
    d << "N" << n << ":" << s1 << "/" << s2 << "/" << s3 << " ";
  }
  return {ok, d.str() + "(1D/2D/3D)"};
}

Outcome drift_counterexample() {
  const auto b = build_basis(Geometry::full3d, 3);
  const auto drift = split_even_odd(assemble_sigma(drift_example_kernel(), b, full_sphere_rule(13)).sigma, b);
  const double expected = 6.0 * std::sqrt(15.0) / 475.0;
  Eigen::MatrixXd rest = drift.eo;
  const double entry = rest(3, 1);
  rest(3, 1) = 0.0;
  bool ok = std::abs(entry - expected) < 1e-9 && max_abs(rest) < 1e-9;
  double worst = 0.0;
  for (const Kernel& k : {Kernel{IsotropicKernel{}}, make_hg_kernel(-0.9), make_hg_kernel(0.0), make_hg_kernel(0.5),
                          make_hg_kernel(0.9)}) {
    worst = std::max(worst, max_abs(split_even_odd(assemble_sigma(k, b).sigma, b).eo));
  }
  ok = ok && worst < 1e-10;
  return {ok, "Sigma_eo(3,1)=" + sci(entry) + " vs 6*sqrt(15)/475=" + sci(expected) + ", other entries " +
                  sci(max_abs(rest)) + ", no-drift kernels max " + sci(worst)};
}

Outcome coo_eigenvalue_bound() {
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  double worst_margin = -1e300;
  int cases = 0;
  for (const Kernel& k : {Kernel{IsotropicKernel{}}, make_hg_kernel(0.5), make_hg_kernel(-0.5)}) {
    for (auto [g, n] : {std::pair{Geometry::full3d, 3}, std::pair{Geometry::slab1d, 7}}) {
      const auto m = generate_model(g, n, k);
      const double kappa0 = kernel_minimum(k, full_sphere_rule(m.sigma_degree));
      std::mt19937 local(rng());
      for (int t = 0; t < 50; ++t) {
        double sa = 0.0, ss = 0.0;
        while (!(sa + ss > 0.0)) {
          sa = u(local);
          ss = u(local);
        }
        const double lmax = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m.blocks.c_oo(sa, ss)).eigenvalues().maxCoeff();
        worst_margin = std::max(worst_margin, lmax + (ss * kappa0 + sa));
        ++cases;
      }
    }
  }
  return {worst_margin <= 1e-9, std::to_string(cases) + " cases, max lambda_max + (ss*kappa0 + sa) = " + sci(worst_margin)};
}

Outcome boundary_invertibility() {
  std::mt19937 rng(7);
  double smin = 1e300, worst = 0.0;
  for (int n : {1, 3, 5}) {
    const auto b = build_basis(Geometry::full3d, n);
    const int deg = default_quadrature_degree(n);
    for (int t = 0; t < 100; ++t) {
      const auto nrm = random_unit(rng);
      for (double rho : {0.0, 0.5, 0.9, 0.99}) {
        const auto p = boundary_operators(b, nrm, rho, deg);
        const auto m = boundary_operators(b, -nrm, rho, deg);
        smin = std::min({smin, p.h_o_min_singular_value, m.h_o_min_singular_value});
        worst = std::max({worst, max_abs(p.h_o - m.h_o), max_abs(p.h_e + m.h_e)});
      }
    }
  }
  return {smin > 0.0 && worst < 1e-11, "min sigma_min(H_o) " + sci(smin) + ", parity defect " + sci(worst)};
}

// Marshak diffusion on [0, 1]: -D phi'' + sa phi = 0, phi/2 - D phi' = 2 pi at
// z = 0 and phi/2 + D phi' = 0 at z = 1.
Outcome diffusion_limit() {
  const double sa = 0.01, ss = 1.0;
  const double d = 1.0 / (3.0 * (sa + ss)), k = std::sqrt(sa / d);
  Eigen::Matrix2d m;
  m << 0.5 - d * k, 0.5 + d * k, (0.5 + d * k) * std::exp(k), (0.5 - d * k) * std::exp(-k);
  const Eigen::Vector2d c = m.lu().solve(Eigen::Vector2d(2.0 * kPi, 0.0));
  auto exact = [&](double z) { return c[0] * std::exp(k * z) + c[1] * std::exp(-k * z); };
  const auto gl = gauss_legendre(4);
  std::vector<double> errs;
  for (int cells : {125, 250, 500, 1000}) {
    const auto p = slab_problem(1, cells, IsotropicKernel{}, sa, ss, 0.0);
    const Eigen::VectorXd phi = radiative_energy(solve(p));
    const auto& mesh = std::get<Mesh1D>(p.mesh);
    double num = 0.0, den = 0.0;
    for (int e = 0; e < cells; ++e) {
      for (int q = 0; q < 4; ++q) {
        const double t = 0.5 * (gl.nodes[static_cast<size_t>(q)] + 1.0);
        const double w = 0.5 * mesh.h() * gl.weights[static_cast<size_t>(q)];
        const double ex = exact(mesh.z_min + (e + t) * mesh.h());
        const double fh = (1.0 - t) * phi[e] + t * phi[e + 1];
        num += w * (fh - ex) * (fh - ex);
        den += w * ex * ex;
      }
    }
    errs.push_back(std::sqrt(num / den));
  }
  double min_order = 1e300;
  for (size_t i = 1; i < errs.size(); ++i) min_order = std::min(min_order, std::log2(errs[i - 1] / errs[i]));
  return {errs.back() < 1e-3 && min_order >= 1.9,
          "error at 1000 cells " + sci(errs.back()) + ", min observed order " + sci(min_order)};
}

Outcome formulation_equivalence() {
  bool ok = true;
  std::ostringstream d;
  for (int n : {1, 3, 5}) {
    std::vector<double> diffs;
    for (int cells : {500, 1000, 2000}) {
      const auto p = slab_problem(n, cells, make_hg_kernel(0.5), 0.5, 1.0, 0.0);
      SlabProblem s;
      s.sigma_a = 0.5;
      s.sigma_s = 1.0;
      s.kernel = p.kernel;
      s.mesh = std::get<Mesh1D>(p.mesh);
      s.left = p.boundaries.at("left");
      s.right = p.boundaries.at("right");
      const auto fem = solve(p);
      const auto pn = pn_firstorder_slab_solve(n, s);
      double num = 0.0, den = 0.0;
      for (Eigen::Index k = 0; k < pn.u_e.cols(); ++k) {
        num += p1_l2_norm_squared(s.mesh, Eigen::VectorXd(fem.u_e.col(k) - pn.u_e.col(k)));
        den += p1_l2_norm_squared(s.mesh, Eigen::VectorXd(pn.u_e.col(k)));
      }
      diffs.push_back(std::sqrt(num / den));
    }
    ok = ok && diffs.back() <= 1e-2 && diffs[1] < diffs[0] && diffs[2] < diffs[1];
    d << "N" << n << ": " << sci(diffs[0]) << " " << sci(diffs[1]) << " " << sci(diffs[2]) << "; ";
  }
  return {ok, d.str() + "(500/1000/2000 cells)"};
}

Outcome model_hierarchy() {
  SlabProblem s;
  s.sigma_a = 0.1;
  s.sigma_s = 10.0;
  s.mesh = Mesh1D(0.0, 1.0, 4000);
  s.left = {0.0, IsotropicSource{1.0}};
  s.right = {0.5, VacuumSource{}};
  DomOptions opts;
  opts.n_mu = 64;
  opts.tolerance = 1e-10;
  const auto dom = dom_slab_solve(s, opts);
  std::vector<double> dist;
  std::ostringstream d;
  for (int n : {1, 3, 5, 7}) {
    const auto p = slab_problem(n, 4000, IsotropicKernel{}, 0.1, 10.0, 0.5);
    dist.push_back(relative_l2_difference(s.mesh, radiative_energy(solve(p)), dom.phi));
    d << "N" << n << " " << sci(dist.back()) << ", ";
  }
  bool ok = dist.back() < 0.1;
  for (size_t i = 1; i < dist.size(); ++i) ok = ok && dist[i] <= dist[i - 1];
  return {ok, d.str() + "DOM sweeps " + std::to_string(dom.iterations)};
}

Outcome dom_attenuation() {
  SlabProblem s;
  s.sigma_a = 1.0;
  s.sigma_s = 0.0;
  s.mesh = Mesh1D(0.0, 1.0, 200);
  s.left = {0.0, IsotropicSource{1.0}};
  s.right = {0.0, VacuumSource{}};
  DomOptions opts;
  opts.n_mu = 16;
  const auto sol = dom_slab_solve(s, opts);
  double worst = 0.0;
  for (int q = 0; q < sol.ordinates.size(); ++q) {
    const double mu = sol.ordinates.mu[static_cast<size_t>(q)];
    for (size_t k = 0; k < sol.z.size(); ++k) {
      const double exact = mu > 0.0 ? std::exp(-s.sigma_a * sol.z[k] / mu) : 0.0;
      const double got = sol.intensity(static_cast<Eigen::Index>(k), q);
      worst = std::max(worst, mu > 0.0 ? std::abs(got / exact - 1.0) : std::abs(got));
    }
  }
  return {worst < 1e-6, "max relative error " + sci(worst) + " at 200 cells"};
}

Outcome planar_smoke() {
  bool ok = true;
  std::ostringstream d;
  for (int n : {1, 3}) {
    std::vector<Mesh2D> meshes;
    std::vector<Eigen::VectorXd> phis;
    double asym = 0.0;
    for (int level : {4, 5, 6}) {
      TransportProblem p;
      p.geometry = Geometry::planar2d;
      p.order = n;
      const Mesh2D mesh = refine_by_splitting(unit_square_mesh("all"), level);
      p.mesh = mesh;
      p.sigma_a.clear();
      for (const auto& t : mesh.triangles()) {
        const Eigen::Vector2d c = (mesh.nodes()[t[0]] + mesh.nodes()[t[1]] + mesh.nodes()[t[2]]) / 3.0;
        p.sigma_a.push_back(0.2 + c.x() + c.y());
      }
      p.sigma_s = {1.0};
      p.boundaries["all"] = {0.0, IsotropicSource{1.0}};
      const Eigen::VectorXd phi = radiative_energy(solve(p));
      std::map<std::pair<long long, long long>, int> at;
      auto key = [](const Eigen::Vector2d& x) { return std::make_pair(std::llround(x.x() * 1e9), std::llround(x.y() * 1e9)); };
      for (int i = 0; i < mesh.n_nodes(); ++i) at[key(mesh.nodes()[static_cast<size_t>(i)])] = i;
      double worst = 0.0;
      for (int i = 0; i < mesh.n_nodes(); ++i) {
        const auto& x = mesh.nodes()[static_cast<size_t>(i)];
        worst = std::max(worst, std::abs(phi[i] - phi[at.at(key(Eigen::Vector2d(x.y(), x.x())))]));
      }
      asym = std::max(asym, worst / phi.cwiseAbs().maxCoeff());
      meshes.push_back(mesh);
      phis.push_back(phi);
    }
    // Refinement keeps coarse node indices, so restriction is a prefix.
    auto diff = [&](size_t i) {
      return relative_l2_difference(meshes[i], phis[i], Eigen::VectorXd(phis[i + 1].head(phis[i].size())));
    };
    const double ratio = diff(0) / diff(1);
    ok = ok && asym < 1e-8 && ratio >= 3.0;
    d << "N" << n << ": asymmetry " << sci(asym) << ", self-convergence ratio " << sci(ratio) << "; ";
  }
  return {ok, d.str() + "refinement levels 4-6"};
}

struct Criterion {
  int id;
  std::string name;
  double budget_s;
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "slab flux matrix closed form", 1.0, flux_closed_form},
      {2, "angular basis sizes", 1e300, basis_sizes},
      {3, "drift counterexample", 30.0, drift_counterexample},
      {4, "C_oo eigenvalue bound", 10.0, coo_eigenvalue_bound},
      {5, "Marshak operator invertibility and parity", 1e300, boundary_invertibility},
      {6, "diffusion limit", 5.0, diffusion_limit},
      {7, "second-order vs first-order PN", 1e300, formulation_equivalence},
      {8, "model hierarchy against DOM", 60.0, model_hierarchy},
      {9, "DOM attenuation law", 1e300, dom_attenuation},
      {10, "2D symmetry and self-convergence", 120.0, planar_smoke},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double t = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (t > c.budget_s) {
      o.pass = false;
      o.detail += " [over runtime budget " + sci(c.budget_s) + " s]";
    }
    failures += o.pass ? 0 : 1;
    char head[128];
    std::snprintf(head, sizeof head, "[%s] criterion %2d: %s (%.2f s): ", o.pass ? "PASS" : "FAIL", c.id, c.name.c_str(), t);
    std::cout << head << o.detail << std::endl;
  }
  std::cout << (failures ? std::to_string(failures) + " criteria failed" : std::string("all criteria passed")) << std::endl;
  return failures ? 1 : 0;
}
