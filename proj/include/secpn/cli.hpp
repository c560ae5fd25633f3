#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "secpn/errors.hpp"
#include "secpn/fem_solver.hpp"
#include "secpn/reference_solvers.hpp"

namespace secpn::cli {

using nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------- config

inline void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw InvalidInput(where + ": expected a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key())) throw InvalidInput(where + ": unknown key '" + it.key() + "'");
  }
}

inline const json& require(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) throw InvalidInput(where + ": missing required key '" + key + "'");
  return j.at(key);
}

inline double as_double(const json& v, const std::string& what) {
  if (!v.is_number()) throw InvalidInput(what + " must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw InvalidInput(what + " must be finite");
  return d;
}

inline int as_int(const json& v, const std::string& what) {
  if (!v.is_number_integer()) throw InvalidInput(what + " must be an integer");
  return v.get<int>();
}

inline std::string as_string(const json& v, const std::string& what) {
  if (!v.is_string()) throw InvalidInput(what + " must be a string");
  return v.get<std::string>();
}

inline Kernel parse_kernel(const json& spec) {
  const json j = spec.is_string() ? json{{"type", spec}} : spec;
  const std::string type = as_string(require(j, "type", "kernel"), "kernel.type");
  if (type == "isotropic") {
    check_keys(j, {"type"}, "kernel");
    return IsotropicKernel{};
  }
  if (type == "hg") {
    check_keys(j, {"type", "g", "literal_cosine"}, "kernel");
    const bool lit = j.contains("literal_cosine") ? j.at("literal_cosine").get<bool>() : false;
    return make_hg_kernel(as_double(require(j, "g", "kernel"), "kernel.g"), lit);
  }
  if (type == "polynomial") {
    check_keys(j, {"type", "terms"}, "kernel");
    PolynomialKernel p;
    for (const auto& t : require(j, "terms", "kernel")) {
      check_keys(t, {"i", "j", "c"}, "kernel term");
      const int i = as_int(require(t, "i", "kernel term"), "term.i");
      const int k = as_int(require(t, "j", "kernel term"), "term.j");
      if (i < 0 || k < 0) throw InvalidInput("kernel term exponents must be non-negative");
      p.terms.push_back({i, k, as_double(require(t, "c", "kernel term"), "term.c")});
    }
    return p;
  }
  if (type == "drift-example" || type == "paper-drift-example") {
    check_keys(j, {"type"}, "kernel");
    return drift_example_kernel();
  }
  throw InvalidInput("unknown kernel type '" + type + "'");
}

inline json kernel_to_json(const Kernel& k) {
  struct V {
    json operator()(const IsotropicKernel&) const { return {{"type", "isotropic"}}; }
    json operator()(const HenyeyGreensteinKernel& h) const {
      return {{"type", "hg"}, {"g", h.g}, {"literal_cosine", h.literal_cosine}};
    }
    json operator()(const PolynomialKernel& p) const {
      json terms = json::array();
      for (const auto& t : p.terms) terms.push_back({{"i", t.i}, {"j", t.j}, {"c", t.c}});
      return {{"type", "polynomial"}, {"terms", terms}};
    }
    json operator()(const TabulatedKernel&) const { return {{"type", "tabulated"}}; }
  };
  return std::visit(V{}, k);
}

inline BoundarySource parse_source(const json& j) {
  const std::string type = as_string(require(j, "type", "source"), "source.type");
  if (type == "vacuum") {
    check_keys(j, {"type"}, "source");
    return VacuumSource{};
  }
  if (type == "isotropic") {
    check_keys(j, {"type", "value"}, "source");
    return IsotropicSource{as_double(require(j, "value", "source"), "source.value")};
  }
  if (type == "sh_expansion") {
    check_keys(j, {"type", "terms"}, "source");
    ShExpansionSource s;
    for (const auto& t : require(j, "terms", "source")) {
      check_keys(t, {"l", "m", "c"}, "source term");
      const int l = as_int(require(t, "l", "source term"), "term.l");
      const int m = as_int(require(t, "m", "source term"), "term.m");
      if (l < 0 || std::abs(m) > l) throw InvalidInput("source term needs 0 <= |m| <= l");
      s.terms.push_back({l, m, as_double(require(t, "c", "source term"), "term.c")});
    }
    return s;
  }
  throw InvalidInput("unknown boundary source type '" + type + "'");
}

inline json source_to_json(const BoundarySource& s) {
  if (std::holds_alternative<VacuumSource>(s)) return {{"type", "vacuum"}};
  if (const auto* iso = std::get_if<IsotropicSource>(&s)) return {{"type", "isotropic"}, {"value", iso->value}};
  json terms = json::array();
  for (const auto& t : std::get<ShExpansionSource>(s).terms) terms.push_back({{"l", t.l}, {"m", t.m}, {"c", t.c}});
  return {{"type", "sh_expansion"}, {"terms", terms}};
}

inline BoundaryCondition parse_boundary(const json& j, const std::string& tag) {
  const std::string where = "boundary '" + tag + "'";
  check_keys(j, {"rho", "source"}, where);
  BoundaryCondition bc;
  bc.rho = j.contains("rho") ? as_double(j.at("rho"), where + ".rho") : 0.0;
  if (!(bc.rho >= 0.0 && bc.rho < 1.0)) throw InvalidInput(where + ": rho must lie in [0, 1)");
  bc.source = j.contains("source") ? parse_source(j.at("source")) : BoundarySource{VacuumSource{}};
  return bc;
}

inline std::map<std::string, BoundaryCondition> parse_boundaries(const json& j) {
  if (!j.is_object()) throw InvalidInput("boundaries: expected an object keyed by tag");
  std::map<std::string, BoundaryCondition> out;
  for (auto it = j.begin(); it != j.end(); ++it) out.emplace(it.key(), parse_boundary(it.value(), it.key()));
  return out;
}

inline json boundaries_to_json(const std::map<std::string, BoundaryCondition>& b) {
  json j = json::object();
  for (const auto& [tag, bc] : b) j[tag] = {{"rho", bc.rho}, {"source", source_to_json(bc.source)}};
  return j;
}

inline std::vector<double> parse_coefficient(const json& j, const std::string& what) {
  if (j.is_array()) {
    std::vector<double> v;
    for (const auto& x : j) v.push_back(as_double(x, what));
    if (v.empty()) throw InvalidInput(what + " must not be empty");
    return v;
  }
  return {as_double(j, what)};
}

inline int parse_order(const json& j) {
  const int n = as_int(require(j, "N", "config"), "N");
  if (n < 1 || n % 2 == 0) throw InvalidInput("N=" + std::to_string(n) + " invalid: the order must be odd and positive");
  return n;
}

inline Mesh1D parse_domain(const json& j) {
  check_keys(j, {"z_min", "z_max", "n_cells"}, "domain");
  return Mesh1D(as_double(require(j, "z_min", "domain"), "domain.z_min"),
                as_double(require(j, "z_max", "domain"), "domain.z_max"),
                as_int(require(j, "n_cells", "domain"), "domain.n_cells"));
}

inline json domain_to_json(const Mesh1D& m) {
  return {{"z_min", m.z_min}, {"z_max", m.z_max}, {"n_cells", m.n_cells}};
}

inline fs::path resolve_path(const std::string& p, const fs::path& base) {
  const fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

struct SolveConfig {
  TransportProblem problem;
  SolverKind solver = SolverKind::direct;
  std::string mesh_path;
  int refine = 0;
};

inline SolveConfig parse_solve_config(const json& j, const fs::path& base) {
  check_keys(j, {"geometry", "N", "kernel", "sigma_a", "sigma_s", "domain", "mesh", "refine", "boundaries",
                 "quadrature_degree", "sigma_degree", "solver"},
             "solve config");
  SolveConfig c;
  auto& p = c.problem;
  p.geometry = parse_geometry(as_string(require(j, "geometry", "solve config"), "geometry"));
  p.order = parse_order(j);
  p.kernel = j.contains("kernel") ? parse_kernel(j.at("kernel")) : Kernel{IsotropicKernel{}};
  p.sigma_a = parse_coefficient(require(j, "sigma_a", "solve config"), "sigma_a");
  p.sigma_s = parse_coefficient(require(j, "sigma_s", "solve config"), "sigma_s");
  if (j.contains("quadrature_degree")) p.quadrature_degree = as_int(j.at("quadrature_degree"), "quadrature_degree");
  if (j.contains("sigma_degree")) p.sigma_degree = as_int(j.at("sigma_degree"), "sigma_degree");
  if (p.geometry == Geometry::slab1d) {
    if (j.contains("mesh") || j.contains("refine")) throw InvalidInput("slab1d takes 'domain', not 'mesh'");
    p.mesh = parse_domain(require(j, "domain", "solve config"));
  } else if (p.geometry == Geometry::planar2d) {
    if (j.contains("domain")) throw InvalidInput("planar2d takes 'mesh', not 'domain'");
    c.mesh_path = as_string(require(j, "mesh", "solve config"), "mesh");
    c.refine = j.contains("refine") ? as_int(j.at("refine"), "refine") : 0;
    if (c.refine < 0) throw InvalidInput("refine must be non-negative");
    p.mesh = refine_by_splitting(load_mesh(resolve_path(c.mesh_path, base)), c.refine);
  } else {
    throw InvalidInput("solve supports slab1d and planar2d only");
  }
  p.boundaries = parse_boundaries(require(j, "boundaries", "solve config"));
  if (j.contains("solver")) {
    const std::string s = as_string(j.at("solver"), "solver");
    if (s == "direct") c.solver = SolverKind::direct;
    else if (s == "cg") c.solver = SolverKind::conjugate_gradient;
    else throw InvalidInput("solver must be 'direct' or 'cg'");
  }
  validate_problem(p);
  return c;
}

inline json resolved_solve_config(const SolveConfig& c, const SecondOrderModel& m) {
  const auto& p = c.problem;
  json j;
  j["geometry"] = std::string(to_string(p.geometry));
  j["N"] = p.order;
  j["kernel"] = kernel_to_json(p.kernel);
  j["sigma_a"] = p.sigma_a.size() == 1 ? json(p.sigma_a[0]) : json(p.sigma_a);
  j["sigma_s"] = p.sigma_s.size() == 1 ? json(p.sigma_s[0]) : json(p.sigma_s);
  if (const auto* m1 = std::get_if<Mesh1D>(&p.mesh)) {
    j["domain"] = domain_to_json(*m1);
  } else {
    j["mesh"] = c.mesh_path;
    j["refine"] = c.refine;
  }
  j["boundaries"] = boundaries_to_json(p.boundaries);
  j["quadrature_degree"] = m.quadrature_degree;
  j["sigma_degree"] = m.sigma_degree;
  j["solver"] = c.solver == SolverKind::direct ? "direct" : "cg";
  return j;
}

struct DomConfig {
  SlabProblem problem;
  DomOptions options;
};

inline DomConfig parse_dom_config(const json& j) {
  check_keys(j, {"kernel", "sigma_a", "sigma_s", "domain", "boundaries", "n_mu", "tolerance", "max_iterations",
                 "n_azimuth"},
             "dom1d config");
  DomConfig c;
  auto& p = c.problem;
  p.kernel = j.contains("kernel") ? parse_kernel(j.at("kernel")) : Kernel{IsotropicKernel{}};
  p.sigma_a = as_double(require(j, "sigma_a", "dom1d config"), "sigma_a");
  p.sigma_s = as_double(require(j, "sigma_s", "dom1d config"), "sigma_s");
  p.mesh = parse_domain(require(j, "domain", "dom1d config"));
  const auto b = parse_boundaries(require(j, "boundaries", "dom1d config"));
  for (const auto& [tag, bc] : b) {
    if (tag != "left" && tag != "right") throw InvalidInput("dom1d boundaries are 'left' and 'right'; got '" + tag + "'");
  }
  if (!b.count("left") || !b.count("right")) throw InvalidInput("dom1d needs both 'left' and 'right' boundaries");
  p.left = b.at("left");
  p.right = b.at("right");
  if (j.contains("n_mu")) c.options.n_mu = as_int(j.at("n_mu"), "n_mu");
  if (j.contains("tolerance")) c.options.tolerance = as_double(j.at("tolerance"), "tolerance");
  if (j.contains("max_iterations")) c.options.max_iterations = as_int(j.at("max_iterations"), "max_iterations");
  if (j.contains("n_azimuth")) c.options.n_azimuth = as_int(j.at("n_azimuth"), "n_azimuth");
  if (c.options.n_azimuth < 4) throw InvalidInput("n_azimuth must be at least 4");
  p.validate();
  return c;
}

inline json resolved_dom_config(const DomConfig& c) {
  const auto& p = c.problem;
  return {{"kernel", kernel_to_json(p.kernel)},
          {"sigma_a", p.sigma_a},
          {"sigma_s", p.sigma_s},
          {"domain", domain_to_json(p.mesh)},
          {"boundaries", boundaries_to_json({{"left", p.left}, {"right", p.right}})},
          {"n_mu", c.options.n_mu},
          {"tolerance", c.options.tolerance},
          {"max_iterations", c.options.max_iterations},
          {"n_azimuth", c.options.n_azimuth}};
}

// ---------------------------------------------------------------- output

inline json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) r.push_back(m(i, k));
    rows.push_back(std::move(r));
  }
  return rows;
}

inline json indices_to_json(const AngularBasis& b, const std::vector<int>& positions) {
  json a = json::array();
  for (int p : positions) a.push_back({b.indices[static_cast<size_t>(p)].l, b.indices[static_cast<size_t>(p)].m});
  return a;
}

inline json no_drift_to_json(const NoDriftReport& r) {
  return {{"passes", r.passes},
          {"max_abs_eo", r.max_abs_eo},
          {"max_abs_oe", r.max_abs_oe},
          {"tolerance", r.tolerance},
          {"argmax", {r.argmax_row, r.argmax_col}}};
}

inline std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string fmt_fixed7(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.7f", v);
  return buf;
}

inline std::string fmt_sig6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot write output file: " + path.string());
  out << text;
  if (!out) throw NumericalFailure("failed while writing " + path.string());
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline json read_json(const fs::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::exception& ex) {
    throw InvalidInput("config " + path.string() + ": invalid JSON: " + ex.what());
  }
}

inline std::string moment_header(const AngularBasis& b) {
  std::string h;
  for (int p : b.even_indices) {
    const auto& idx = b.indices[static_cast<size_t>(p)];
    h += ",u_l" + std::to_string(idx.l) + "_m" + std::to_string(idx.m);
  }
  return h;
}

inline std::string solution_csv(const FieldSolution& sol, const TransportProblem& p) {
  std::ostringstream out;
  const Eigen::VectorXd phi = radiative_energy(sol);
  const bool one_d = std::holds_alternative<Mesh1D>(p.mesh);
  out << "node_id" << (one_d ? ",z" : ",x,y") << moment_header(sol.model->basis) << ",phi\n";
  for (Eigen::Index i = 0; i < sol.u_e.rows(); ++i) {
    out << i;
    if (one_d) {
      out << ',' << fmt_double(std::get<Mesh1D>(p.mesh).node(static_cast<int>(i)));
    } else {
      const auto& x = std::get<Mesh2D>(p.mesh).nodes()[static_cast<size_t>(i)];
      out << ',' << fmt_double(x.x()) << ',' << fmt_double(x.y());
    }
    for (Eigen::Index k = 0; k < sol.u_e.cols(); ++k) out << ',' << fmt_double(sol.u_e(i, k));
    out << ',' << fmt_double(phi[i]) << '\n';
  }
  return out.str();
}

inline std::string dom_csv(const DomSolution& s) {
  std::ostringstream out;
  out << "node_id,z,phi\n";
  for (size_t i = 0; i < s.z.size(); ++i) {
    out << i << ',' << fmt_double(s.z[i]) << ',' << fmt_double(s.phi[static_cast<Eigen::Index>(i)]) << '\n';
  }
  return out.str();
}

/// Columns of a field CSV written by solve or dom1d.
struct FieldTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  int column(const std::string& name) const {
    for (size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    return -1;
  }
  Eigen::VectorXd values(int col) const {
    Eigen::VectorXd v(static_cast<Eigen::Index>(rows.size()));
    for (size_t i = 0; i < rows.size(); ++i) v[static_cast<Eigen::Index>(i)] = rows[i][static_cast<size_t>(col)];
    return v;
  }
};

inline FieldTable read_field_csv(const fs::path& path) {
  std::istringstream in(read_text(path));
  FieldTable t;
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> f;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) f.push_back(item);
    return f;
  };
  if (!std::getline(in, line)) throw InvalidInput(path.string() + ": empty CSV");
  t.header = split(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != t.header.size()) throw InvalidInput(path.string() + ": ragged CSV row");
    std::vector<double> r;
    for (const auto& s : f) {
      try {
        r.push_back(std::stod(s));
      } catch (const std::exception&) {
        throw InvalidInput(path.string() + ": non-numeric CSV entry '" + s + "'");
      }
    }
    t.rows.push_back(std::move(r));
  }
  if (t.column("phi") < 0) throw InvalidInput(path.string() + ": no 'phi' column");
  return t;
}

// ---------------------------------------------------------------- commands

struct Context {
  fs::path config;
  std::optional<fs::path> out;
  bool quiet = false;
  std::ostream* os = &std::cout;
  std::ostream* es = &std::cerr;
};

inline void emit(const Context& ctx, const std::string& text) {
  if (ctx.out) write_text(*ctx.out, text);
  else *ctx.os << text;
}

inline void note(const Context& ctx, const std::string& msg) {
  if (!ctx.quiet) *ctx.es << msg << '\n';
}

inline int cmd_generate(const Context& ctx) {
  const json j = read_json(ctx.config);
  check_keys(j, {"geometry", "N", "kernel", "quadrature_degree", "sigma_degree"}, "generate config");
  const Geometry g = parse_geometry(as_string(require(j, "geometry", "generate config"), "geometry"));
  const int order = parse_order(j);
  const Kernel k = j.contains("kernel") ? parse_kernel(j.at("kernel")) : Kernel{IsotropicKernel{}};
  std::optional<int> qd, sd;
  if (j.contains("quadrature_degree")) qd = as_int(j.at("quadrature_degree"), "quadrature_degree");
  if (j.contains("sigma_degree")) sd = as_int(j.at("sigma_degree"), "sigma_degree");
  const auto m = generate_model(g, order, k, qd, sd);

  json out;
  out["config"] = {{"geometry", std::string(to_string(g))},
                   {"N", order},
                   {"kernel", kernel_to_json(k)},
                   {"quadrature_degree", m.quadrature_degree},
                   {"sigma_degree", m.sigma_degree}};
  std::vector<int> all(static_cast<size_t>(m.basis.size()));
  for (int i = 0; i < m.basis.size(); ++i) all[static_cast<size_t>(i)] = i;
  out["basis"] = indices_to_json(m.basis, all);
  out["even_indices"] = m.basis.even_indices;
  out["odd_indices"] = m.basis.odd_indices;
  out["parity_permutation"] = m.basis.parity_permutation();
  json flux = json::object(), te = json::object(), to = json::object();
  for (int a : m.flux.axes) {
    const std::string name = kAxisNames[static_cast<size_t>(a)];
    flux[name] = matrix_to_json(m.flux[a]);
    te[name] = matrix_to_json(m.blocks.te[static_cast<size_t>(a)]);
    to[name] = matrix_to_json(m.blocks.to[static_cast<size_t>(a)]);
  }
  out["flux"] = flux;
  out["T_e"] = te;
  out["T_o"] = to;
  out["sigma"] = matrix_to_json(m.sigma.sigma);
  out["sigma_blocks"] = {{"ee", matrix_to_json(m.blocks.sigma.ee)},
                         {"eo", matrix_to_json(m.blocks.sigma.eo)},
                         {"oe", matrix_to_json(m.blocks.sigma.oe)},
                         {"oo", matrix_to_json(m.blocks.sigma.oo)}};
  out["no_drift_report"] = no_drift_to_json(m.blocks.no_drift);
  out["warnings"] = m.sigma.warnings;
  emit(ctx, out.dump(1) + "\n");
  for (const auto& w : m.sigma.warnings) note(ctx, "warning: " + w);
  if (!m.blocks.no_drift.passes) {
    *ctx.es << "no-drift check failed: max |Sigma_eo| = " << fmt_fixed7(m.blocks.no_drift.max_abs_eo) << " at ("
            << m.blocks.no_drift.argmax_row << "," << m.blocks.no_drift.argmax_col << ")\n";
    return 2;
  }
  return 0;
}

inline int cmd_check_kernel(const Context& ctx) {
  const json j = read_json(ctx.config);
  check_keys(j, {"geometry", "N", "kernel", "quadrature_degree", "tolerance"}, "check-kernel config");
  const Geometry g = j.contains("geometry") ? parse_geometry(as_string(j.at("geometry"), "geometry")) : Geometry::full3d;
  const int order = j.contains("N") ? parse_order(j) : 3;
  const Kernel k = parse_kernel(require(j, "kernel", "check-kernel config"));
  const double tol = j.contains("tolerance") ? as_double(j.at("tolerance"), "tolerance") : 1e-10;
  const AngularBasis basis = build_basis(g, order);
  const int deg = j.contains("quadrature_degree") ? as_int(j.at("quadrature_degree"), "quadrature_degree")
                                                  : recommended_sigma_degree(k, order);
  const auto sigma = assemble_sigma(k, basis, full_sphere_rule(deg));
  const auto report = check_no_drift(split_even_odd(sigma.sigma, basis), tol);
  json out = {{"config",
               {{"geometry", std::string(to_string(g))},
                {"N", order},
                {"kernel", kernel_to_json(k)},
                {"quadrature_degree", deg},
                {"tolerance", tol}}},
              {"no_drift_report", no_drift_to_json(report)},
              {"symmetry_residual", sigma.symmetry_residual},
              {"warnings", sigma.warnings}};
  emit(ctx, out.dump(1) + "\n");
  note(ctx, std::string("no-drift ") + (report.passes ? "passes" : "fails") +
                ": max |Sigma_eo| = " + fmt_fixed7(report.max_abs_eo));
  return report.passes ? 0 : 2;
}

inline int cmd_solve(const Context& ctx) {
  const json j = read_json(ctx.config);
  const SolveConfig c = parse_solve_config(j, ctx.config.parent_path());
  auto model = make_model(c.problem);
  const auto sys = assemble(c.problem, model);
  SolverOptions opts;
  opts.kind = c.solver;
  const auto sol = solve(sys, opts);
  const std::string csv = solution_csv(sol, c.problem);
  emit(ctx, csv);
  if (ctx.out) {
    json meta = {{"config", resolved_solve_config(c, *model)},
                 {"n_nodes", sys.n_nodes},
                 {"n_even", sys.n_even},
                 {"relative_residual", sol.residual},
                 {"solver", sol.solver},
                 {"negated_form", sol.negated},
                 {"marshak_consistency", marshak_consistency(sol, c.problem)}};
    write_text(ctx.out->string() + ".meta.json", meta.dump(1) + "\n");
    note(ctx, "wrote " + ctx.out->string() + " (" + std::to_string(sys.n_nodes) + " nodes, residual " +
                  fmt_sig6(sol.residual) + ")");
  }
  return 0;
}

inline int cmd_dom1d(const Context& ctx) {
  const DomConfig c = parse_dom_config(read_json(ctx.config));
  const auto s = dom_slab_solve(c.problem, c.options);
  emit(ctx, dom_csv(s));
  if (ctx.out) {
    json meta = {{"config", resolved_dom_config(c)}, {"iterations", s.iterations}, {"last_change", s.residual}};
    write_text(ctx.out->string() + ".meta.json", meta.dump(1) + "\n");
    note(ctx, "wrote " + ctx.out->string() + " after " + std::to_string(s.iterations) + " sweeps");
  }
  return 0;
}

/// Relative L2 distance of file_a to file_b. 1D fields on different uniform
/// grids are compared on the coarser one; 2D fields need the same mesh.
inline double compare_fields(const FieldTable& a, const FieldTable& b, const std::optional<Mesh2D>& mesh) {
  const Eigen::VectorXd pa = a.values(a.column("phi"));
  const Eigen::VectorXd pb = b.values(b.column("phi"));
  const int za = a.column("z"), zb = b.column("z");
  if (za >= 0 && zb >= 0) {
    auto grid = [](const FieldTable& t, int col) {
      const Eigen::VectorXd z = t.values(col);
      if (z.size() < 2) throw InvalidInput("1D field needs at least two nodes");
      return Mesh1D(z[0], z[z.size() - 1], static_cast<int>(z.size()) - 1);
    };
    const Mesh1D ga = grid(a, za), gb = grid(b, zb);
    if (std::abs(ga.z_min - gb.z_min) > 1e-12 || std::abs(ga.z_max - gb.z_max) > 1e-12) {
      throw InvalidInput("compare: the two fields cover different intervals");
    }
    const Mesh1D& coarse = ga.n_cells <= gb.n_cells ? ga : gb;
    const auto z = coarse.nodes();
    const Eigen::VectorXd ra = ga.n_cells == coarse.n_cells ? pa : interpolate_p1(ga, pa, z);
    const Eigen::VectorXd rb = gb.n_cells == coarse.n_cells ? pb : interpolate_p1(gb, pb, z);
    return relative_l2_difference(coarse, ra, rb);
  }
  if (!mesh) throw InvalidInput("compare: 2D fields need 'mesh' in the config");
  if (pa.size() != mesh->n_nodes() || pb.size() != mesh->n_nodes()) {
    throw InvalidInput("compare: 2D fields must live on the given mesh");
  }
  return relative_l2_difference(*mesh, pa, pb);
}

inline int cmd_compare(const Context& ctx) {
  const json j = read_json(ctx.config);
  check_keys(j, {"file_a", "file_b", "mesh", "refine"}, "compare config");
  const fs::path base = ctx.config.parent_path();
  const auto a = read_field_csv(resolve_path(as_string(require(j, "file_a", "compare config"), "file_a"), base));
  const auto b = read_field_csv(resolve_path(as_string(require(j, "file_b", "compare config"), "file_b"), base));
  std::optional<Mesh2D> mesh;
  if (j.contains("mesh")) {
    const int refine = j.contains("refine") ? as_int(j.at("refine"), "refine") : 0;
    mesh = refine_by_splitting(load_mesh(resolve_path(as_string(j.at("mesh"), "mesh"), base)), refine);
  }
  const double d = compare_fields(a, b, mesh);
  if (ctx.out) {
    write_text(*ctx.out, json({{"config", j}, {"relative_l2", d}}).dump(1) + "\n");
  }
  *ctx.os << "relative_l2 " << fmt_sig6(d) << '\n';
  return 0;
}

inline int cmd_mesh_refine(const fs::path& in, const fs::path& out, int levels, const Context& ctx) {
  if (levels < 0) throw InvalidInput("levels must be non-negative");
  const auto m = refine_by_splitting(load_mesh(in), levels);
  save_mesh(m, out);
  note(ctx, "wrote " + out.string() + " (" + std::to_string(m.n_nodes()) + " nodes, " +
                std::to_string(m.n_triangles()) + " triangles)");
  return 0;
}

/// Entry point shared by the executable and the tests.
inline int run(int argc, const char* const* argv, std::ostream& os = std::cout, std::ostream& es = std::cerr) {
  CLI::App app{"Second-order PN transport toolkit"};
  app.require_subcommand(1);
  Context ctx;
  ctx.os = &os;
  ctx.es = &es;
  std::string config, out;
  bool quiet = false;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config, "JSON config file")->required();
    sub->add_option("--out", out, "output file (stdout when omitted)");
    sub->add_flag("--quiet", quiet, "suppress progress notes");
  };
  auto* gen = app.add_subcommand("generate", "export basis, flux and scattering matrices");
  auto* chk = app.add_subcommand("check-kernel", "report the no-drift property of a kernel");
  auto* sol = app.add_subcommand("solve", "solve a SecPN boundary value problem");
  auto* dom = app.add_subcommand("dom1d", "discrete ordinates reference in slab geometry");
  auto* cmp = app.add_subcommand("compare", "relative L2 distance of two phi fields");
  for (auto* s : {gen, chk, sol, dom, cmp}) add_common(s);
  auto* mesh = app.add_subcommand("mesh", "mesh utilities");
  mesh->require_subcommand(1);
  auto* refine = mesh->add_subcommand("refine", "uniform splitting refinement");
  std::string mesh_in, mesh_out;
  int levels = 1;
  refine->add_option("--in", mesh_in, "input mesh JSON")->required();
  refine->add_option("--out", mesh_out, "output mesh JSON")->required();
  refine->add_option("--levels", levels, "number of refinements");
  refine->add_flag("--quiet", quiet, "suppress progress notes");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    os << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    os << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    es << "usage error: " << e.what() << '\n';
    return 1;
  }
  ctx.config = config;
  if (!out.empty()) ctx.out = fs::path(out);
  ctx.quiet = quiet;
  try {
    if (*gen) return cmd_generate(ctx);
    if (*chk) return cmd_check_kernel(ctx);
    if (*sol) return cmd_solve(ctx);
    if (*dom) return cmd_dom1d(ctx);
    if (*cmp) return cmd_compare(ctx);
    return cmd_mesh_refine(mesh_in, mesh_out, levels, ctx);
  } catch (const Error& e) {
    es << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const json::exception& e) {
    es << "error: malformed config: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    es << "error: " << e.what() << '\n';
    return 3;
  }
}

inline int run(const std::vector<std::string>& args, std::ostream& os = std::cout, std::ostream& es = std::cerr) {
  std::vector<const char*> argv{"secpn"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), os, es);
}

}  // namespace secpn::cli
