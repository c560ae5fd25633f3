#pragma once

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "secpn/errors.hpp"

namespace secpn {

/// Uniform interval mesh on [z_min, z_max] with boundary tags "left"/"right".
struct Mesh1D {
  double z_min = 0.0;
  double z_max = 1.0;
  int n_cells = 1;

  Mesh1D() = default;
  Mesh1D(double lo, double hi, int cells) : z_min(lo), z_max(hi), n_cells(cells) { validate(); }

  void validate() const {
    if (!(z_min < z_max)) throw InvalidInput("1D mesh needs z_min < z_max");
    if (n_cells < 1) throw InvalidInput("1D mesh needs at least one cell");
  }

  int n_nodes() const { return n_cells + 1; }
  double h() const { return (z_max - z_min) / n_cells; }
  double node(int i) const { return i == n_cells ? z_max : z_min + i * h(); }

  std::vector<double> nodes() const {
    std::vector<double> z(static_cast<size_t>(n_nodes()));
    for (int i = 0; i < n_nodes(); ++i) z[static_cast<size_t>(i)] = node(i);
    return z;
  }
};

struct BoundaryEdge {
  int a = 0;
  int b = 0;
  std::string tag;
};

/// Triangular mesh with tagged boundary edges and derived geometry.
class Mesh2D {
 public:
  Mesh2D() = default;
  Mesh2D(std::vector<Eigen::Vector2d> nodes, std::vector<std::array<int, 3>> triangles,
         std::vector<BoundaryEdge> boundary_edges)
      : nodes_(std::move(nodes)), triangles_(std::move(triangles)), boundary_(std::move(boundary_edges)) {
    derive();
  }

  const std::vector<Eigen::Vector2d>& nodes() const { return nodes_; }
  const std::vector<std::array<int, 3>>& triangles() const { return triangles_; }
  const std::vector<BoundaryEdge>& boundary_edges() const { return boundary_; }
  const std::vector<double>& areas() const { return areas_; }
  const std::vector<double>& edge_lengths() const { return edge_lengths_; }
  const std::vector<Eigen::Vector2d>& edge_normals() const { return edge_normals_; }
  // Triangle adjacent to each boundary edge.
  const std::vector<int>& edge_triangles() const { return edge_triangles_; }

  int n_nodes() const { return static_cast<int>(nodes_.size()); }
  int n_triangles() const { return static_cast<int>(triangles_.size()); }

  double total_area() const {
    double s = 0.0;
    for (double a : areas_) s += a;
    return s;
  }
  double boundary_length() const {
    double s = 0.0;
    for (double l : edge_lengths_) s += l;
    return s;
  }

  std::set<std::string> tags() const {
    std::set<std::string> t;
    for (const auto& e : boundary_) t.insert(e.tag);
    return t;
  }

  // Tags of the boundary edges touching each node (empty for interior nodes).
  std::vector<std::set<std::string>> node_tags() const {
    std::vector<std::set<std::string>> t(nodes_.size());
    for (const auto& e : boundary_) {
      t[static_cast<size_t>(e.a)].insert(e.tag);
      t[static_cast<size_t>(e.b)].insert(e.tag);
    }
    return t;
  }

 private:
  static std::pair<int, int> key(int a, int b) { return {std::min(a, b), std::max(a, b)}; }

  void derive() {
    const int nn = n_nodes();
    auto check_node = [&](int i, const std::string& what) {
      if (i < 0 || i >= nn) throw InvalidInput(what + " references node " + std::to_string(i) + " out of range");
    };
    areas_.clear();
    std::map<std::pair<int, int>, std::vector<int>> edge_tris;
    for (size_t t = 0; t < triangles_.size(); ++t) {
      const auto& tri = triangles_[t];
      for (int v : tri) check_node(v, "triangle " + std::to_string(t));
      const Eigen::Vector2d e1 = nodes_[static_cast<size_t>(tri[1])] - nodes_[static_cast<size_t>(tri[0])];
      const Eigen::Vector2d e2 = nodes_[static_cast<size_t>(tri[2])] - nodes_[static_cast<size_t>(tri[0])];
      const double area = 0.5 * (e1.x() * e2.y() - e1.y() * e2.x());
      if (!(area > 0.0)) {
        throw InvalidInput("triangle " + std::to_string(t) +
                           " is inverted or degenerate (signed area " + std::to_string(area) +
                           "); triangles must be counter-clockwise");
      }
      areas_.push_back(area);
      for (int k = 0; k < 3; ++k) edge_tris[key(tri[static_cast<size_t>(k)], tri[static_cast<size_t>((k + 1) % 3)])].push_back(static_cast<int>(t));
    }

    std::set<std::pair<int, int>> boundary_keys;
    edge_lengths_.clear();
    edge_normals_.clear();
    edge_triangles_.clear();
    std::map<int, int> degree;
    for (size_t i = 0; i < boundary_.size(); ++i) {
      const auto& e = boundary_[i];
      check_node(e.a, "boundary edge " + std::to_string(i));
      check_node(e.b, "boundary edge " + std::to_string(i));
      const auto k = key(e.a, e.b);
      const auto it = edge_tris.find(k);
      if (it == edge_tris.end() || it->second.size() != 1) {
        throw InvalidInput("boundary edge " + std::to_string(i) + " (" + std::to_string(e.a) + ", " +
                           std::to_string(e.b) + ") is dangling: it is not an edge of exactly one triangle");
      }
      if (!boundary_keys.insert(k).second) {
        throw InvalidInput("boundary edge " + std::to_string(i) + " is listed twice");
      }
      ++degree[e.a];
      ++degree[e.b];
      const Eigen::Vector2d pa = nodes_[static_cast<size_t>(e.a)];
      const Eigen::Vector2d d = nodes_[static_cast<size_t>(e.b)] - pa;
      const double len = d.norm();
      Eigen::Vector2d nrm(d.y() / len, -d.x() / len);
      const auto& tri = triangles_[static_cast<size_t>(it->second.front())];
      const Eigen::Vector2d centroid = (nodes_[static_cast<size_t>(tri[0])] + nodes_[static_cast<size_t>(tri[1])] +
                                        nodes_[static_cast<size_t>(tri[2])]) / 3.0;
      if (nrm.dot(centroid - pa) > 0.0) nrm = -nrm;
      edge_lengths_.push_back(len);
      edge_normals_.push_back(nrm);
      edge_triangles_.push_back(it->second.front());
    }
    for (const auto& [k, tris] : edge_tris) {
      if (tris.size() > 2) throw InvalidInput("non-manifold edge shared by more than two triangles");
      if (tris.size() == 1 && !boundary_keys.count(k)) {
        throw InvalidInput("mesh boundary edge (" + std::to_string(k.first) + ", " + std::to_string(k.second) +
                           ") has no boundary tag");
      }
    }
    for (const auto& [node, deg] : degree) {
      if (deg != 2) {
        throw InvalidInput("boundary edges do not form closed loops at node " + std::to_string(node));
      }
    }
  }

  std::vector<Eigen::Vector2d> nodes_;
  std::vector<std::array<int, 3>> triangles_;
  std::vector<BoundaryEdge> boundary_;
  std::vector<double> areas_;
  std::vector<double> edge_lengths_;
  std::vector<Eigen::Vector2d> edge_normals_;
  std::vector<int> edge_triangles_;
};

inline Mesh2D mesh_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw InvalidInput("mesh file: top level must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() != "nodes" && it.key() != "triangles" && it.key() != "boundary_edges") {
      throw InvalidInput("mesh file: unknown key '" + it.key() + "'");
    }
  }
  try {
    std::vector<Eigen::Vector2d> nodes;
    for (const auto& p : j.at("nodes")) {
      if (p.size() != 2) throw InvalidInput("mesh file: node entries must be [x, y]");
      nodes.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
    }
    std::vector<std::array<int, 3>> tris;
    for (const auto& t : j.at("triangles")) {
      if (t.size() != 3) throw InvalidInput("mesh file: triangle entries must be [a, b, c]");
      tris.push_back({t.at(0).get<int>(), t.at(1).get<int>(), t.at(2).get<int>()});
    }
    std::vector<BoundaryEdge> edges;
    for (const auto& e : j.at("boundary_edges")) {
      if (e.size() != 3) throw InvalidInput("mesh file: boundary edge entries must be [i, j, \"tag\"]");
      edges.push_back({e.at(0).get<int>(), e.at(1).get<int>(), e.at(2).get<std::string>()});
    }
    return Mesh2D(std::move(nodes), std::move(tris), std::move(edges));
  } catch (const nlohmann::json::exception& ex) {
    throw InvalidInput(std::string("mesh file: malformed schema: ") + ex.what());
  }
}

inline nlohmann::json mesh_to_json(const Mesh2D& m) {
  nlohmann::json j;
  j["nodes"] = nlohmann::json::array();
  for (const auto& p : m.nodes()) j["nodes"].push_back({p.x(), p.y()});
  j["triangles"] = nlohmann::json::array();
  for (const auto& t : m.triangles()) j["triangles"].push_back({t[0], t[1], t[2]});
  j["boundary_edges"] = nlohmann::json::array();
  for (const auto& e : m.boundary_edges()) j["boundary_edges"].push_back({e.a, e.b, e.tag});
  return j;
}

inline Mesh2D load_mesh(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open mesh file: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& ex) {
    throw InvalidInput("mesh file " + path.string() + ": invalid JSON: " + ex.what());
  }
  return mesh_from_json(j);
}

inline void save_mesh(const Mesh2D& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write mesh file: " + path.string());
  out << mesh_to_json(m).dump(1) << '\n';
}

/// Uniform red refinement: every triangle is split into four through its edge
/// midpoints. Original nodes keep their indices; midpoints are appended in
/// order of first appearance.
inline Mesh2D refine_by_splitting(const Mesh2D& m) {
  std::vector<Eigen::Vector2d> nodes = m.nodes();
  std::map<std::pair<int, int>, int> midpoint;
  auto mid = [&](int a, int b) {
    const auto k = std::make_pair(std::min(a, b), std::max(a, b));
    const auto it = midpoint.find(k);
    if (it != midpoint.end()) return it->second;
    const int id = static_cast<int>(nodes.size());
    nodes.push_back(0.5 * (nodes[static_cast<size_t>(a)] + nodes[static_cast<size_t>(b)]));
    midpoint.emplace(k, id);
    return id;
  };
  std::vector<std::array<int, 3>> tris;
  tris.reserve(4 * m.triangles().size());
  for (const auto& t : m.triangles()) {
    const int ab = mid(t[0], t[1]);
    const int bc = mid(t[1], t[2]);
    const int ca = mid(t[2], t[0]);
    tris.push_back({t[0], ab, ca});
    tris.push_back({ab, t[1], bc});
    tris.push_back({ca, bc, t[2]});
    tris.push_back({ab, bc, ca});
  }
  std::vector<BoundaryEdge> edges;
  edges.reserve(2 * m.boundary_edges().size());
  for (const auto& e : m.boundary_edges()) {
    const int c = mid(e.a, e.b);
    edges.push_back({e.a, c, e.tag});
    edges.push_back({c, e.b, e.tag});
  }
  return Mesh2D(std::move(nodes), std::move(tris), std::move(edges));
}

inline Mesh2D refine_by_splitting(const Mesh2D& m, int levels) {
  Mesh2D r = m;
  for (int i = 0; i < levels; ++i) r = refine_by_splitting(r);
  return r;
}

// Unit square [0,1]^2 split along the diagonal (0,0)-(1,1); every boundary
// edge carries `tag`. Symmetric under x <-> y.
inline Mesh2D unit_square_mesh(const std::string& tag = "all") {
  return Mesh2D({{0.0, 0.0}, {1.0, 0.0}, {1.0, 1.0}, {0.0, 1.0}}, {{0, 1, 2}, {0, 2, 3}},
                {{0, 1, tag}, {1, 2, tag}, {2, 3, tag}, {3, 0, tag}});
}

}  // namespace secpn
