#include "synfem/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <Eigen/LU>

#include "synfem/error.hpp"

namespace synfem {

namespace {

double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

double signed_area(const Vec2& a, const Vec2& b, const Vec2& c) {
  return 0.5 * cross(b - a, c - a);
}

std::string edge_name(int a, int b) {
  return "(" + std::to_string(a) + ", " + std::to_string(b) + ")";
}

}  // namespace

Mesh::Mesh(std::vector<Vec2> vertices, std::vector<Element> elements)
    : vertices_(std::move(vertices)), elements_(std::move(elements)) {
  if (vertices_.size() < 3) throw MeshError("mesh needs at least 3 vertices");
  if (elements_.empty()) throw MeshError("mesh has no elements");
  const int nv = num_vertices();
  std::set<std::array<int, 3>> seen;
  for (std::size_t e = 0; e < elements_.size(); ++e) {
    auto& el = elements_[e];
    for (int v : el) {
      if (v < 0 || v >= nv) {
        throw MeshError("element " + std::to_string(e) + " references vertex " +
                        std::to_string(v) + " out of range");
      }
    }
    if (el[0] == el[1] || el[1] == el[2] || el[0] == el[2]) {
      throw MeshError("element " + std::to_string(e) + " repeats a vertex");
    }
    auto key = el;
    std::sort(key.begin(), key.end());
    if (!seen.insert(key).second) {
      throw MeshError("duplicated element " + std::to_string(e) + " on edge " +
                      edge_name(key[0], key[1]));
    }
    const double a = signed_area(vertices_[el[0]], vertices_[el[1]], vertices_[el[2]]);
    const Vec2 span = vertices_[el[1]] - vertices_[el[0]];
    if (std::abs(a) <= 1e-14 * std::max(1.0, span.squaredNorm())) {
      throw MeshError("degenerate element " + std::to_string(e) + " (zero area)");
    }
    if (a < 0) std::swap(el[1], el[2]);
  }
  build_topology();

  // Tiling check: element areas must add up to the area enclosed by the
  // boundary, otherwise elements overlap.
  double sum = 0.0;
  for (int e = 0; e < num_elements(); ++e) sum += area(e);
  double poly = 0.0;
  for (const auto& be : boundary_edges()) poly += 0.5 * cross(vertices_[be[0]], vertices_[be[1]]);
  if (std::abs(sum - poly) > 1e-10 * std::max(1.0, sum)) {
    throw MeshError("elements overlap: element area sum " + std::to_string(sum) +
                    " differs from enclosed area " + std::to_string(poly));
  }
  check_convex();
}

void Mesh::build_topology() {
  const int ne = num_elements();
  std::map<std::pair<int, int>, int> lookup;
  edges_.clear();
  edge_elements_.clear();
  element_edges_.assign(ne, {-1, -1, -1});
  for (int e = 0; e < ne; ++e) {
    const auto& el = elements_[e];
    for (int k = 0; k < 3; ++k) {
      int a = el[(k + 1) % 3];
      int b = el[(k + 2) % 3];
      auto key = std::make_pair(std::min(a, b), std::max(a, b));
      auto it = lookup.find(key);
      if (it == lookup.end()) {
        const int id = static_cast<int>(edges_.size());
        lookup.emplace(key, id);
        edges_.push_back({key.first, key.second});
        edge_elements_.push_back({e, -1});
        element_edges_[e][k] = id;
      } else {
        auto& owners = edge_elements_[it->second];
        if (owners[1] >= 0) {
          throw MeshError("non-conforming mesh: edge " + edge_name(key.first, key.second) +
                          " is shared by more than two elements");
        }
        owners[1] = e;
        element_edges_[e][k] = it->second;
      }
    }
  }
  neighbors_.assign(ne, {-1, -1, -1});
  for (int e = 0; e < ne; ++e) {
    for (int k = 0; k < 3; ++k) {
      const auto& owners = edge_elements_[element_edges_[e][k]];
      neighbors_[e][k] = owners[0] == e ? owners[1] : owners[0];
    }
  }
  vertex_elements_.assign(num_vertices(), {});
  for (int e = 0; e < ne; ++e) {
    for (int v : elements_[e]) vertex_elements_[v].push_back(e);
  }
  boundary_vertex_.assign(num_vertices(), 0);
  for (int i = 0; i < num_edges(); ++i) {
    if (edge_elements_[i][1] < 0) {
      boundary_vertex_[edges_[i][0]] = 1;
      boundary_vertex_[edges_[i][1]] = 1;
    }
  }
  for (int v = 0; v < num_vertices(); ++v) {
    if (vertex_elements_[v].empty()) {
      throw MeshError("vertex " + std::to_string(v) + " belongs to no element");
    }
  }
}

std::vector<Mesh::Edge> Mesh::boundary_edges() const {
  std::vector<Edge> out;
  for (int i = 0; i < num_edges(); ++i) {
    if (edge_elements_[i][1] >= 0) continue;
    const int e = edge_elements_[i][0];
    const auto& el = elements_[e];
    for (int k = 0; k < 3; ++k) {
      if (element_edges_[e][k] == i) out.push_back({el[(k + 1) % 3], el[(k + 2) % 3]});
    }
  }
  return out;
}

void Mesh::check_convex() const {
  const auto bedges = boundary_edges();
  std::map<int, int> next;
  for (const auto& be : bedges) {
    if (!next.emplace(be[0], be[1]).second) {
      throw MeshError("boundary is not a simple polygon at vertex " + std::to_string(be[0]));
    }
  }
  // Walk the single boundary loop.
  int start = bedges.front()[0];
  int cur = start;
  std::size_t steps = 0;
  do {
    auto it = next.find(cur);
    if (it == next.end()) {
      throw MeshError("boundary loop is open at vertex " + std::to_string(cur));
    }
    const int nxt = it->second;
    auto it2 = next.find(nxt);
    if (it2 == next.end()) {
      throw MeshError("boundary loop is open at vertex " + std::to_string(nxt));
    }
    const Vec2 d1 = vertices_[nxt] - vertices_[cur];
    const Vec2 d2 = vertices_[it2->second] - vertices_[nxt];
    const double c = cross(d1, d2);
    const double scale = d1.norm() * d2.norm();
    if (c < -1e-12 * scale || (std::abs(c) <= 1e-12 * scale && d1.dot(d2) <= 0)) {
      throw MeshError("domain is not convex at boundary vertex " + std::to_string(nxt));
    }
    cur = nxt;
    ++steps;
  } while (cur != start && steps <= bedges.size());
  if (steps != bedges.size()) {
    throw MeshError("boundary consists of more than one loop");
  }
}

AffineMap Mesh::affine_map(int e) const {
  const auto& el = elements_[e];
  AffineMap m;
  m.offset = vertices_[el[0]];
  m.jacobian.col(0) = vertices_[el[1]] - vertices_[el[0]];
  m.jacobian.col(1) = vertices_[el[2]] - vertices_[el[0]];
  m.determinant = m.jacobian.determinant();
  m.inverse = m.jacobian.inverse();
  return m;
}

double Mesh::area(int e) const {
  const auto& el = elements_[e];
  return signed_area(vertices_[el[0]], vertices_[el[1]], vertices_[el[2]]);
}

double Mesh::diameter(int e) const {
  const auto& el = elements_[e];
  const Vec2& a = vertices_[el[0]];
  const Vec2& b = vertices_[el[1]];
  const Vec2& c = vertices_[el[2]];
  return std::max({(a - b).norm(), (b - c).norm(), (c - a).norm()});
}

double Mesh::inradius(int e) const {
  const auto& el = elements_[e];
  const Vec2& a = vertices_[el[0]];
  const Vec2& b = vertices_[el[1]];
  const Vec2& c = vertices_[el[2]];
  const double perimeter = (a - b).norm() + (b - c).norm() + (c - a).norm();
  return 2.0 * area(e) / perimeter;
}

Vec2 Mesh::centroid(int e) const {
  const auto& el = elements_[e];
  return (vertices_[el[0]] + vertices_[el[1]] + vertices_[el[2]]) / 3.0;
}

double Mesh::h_max() const {
  double h = 0.0;
  for (int e = 0; e < num_elements(); ++e) h = std::max(h, diameter(e));
  return h;
}

double Mesh::total_area() const {
  double s = 0.0;
  for (int e = 0; e < num_elements(); ++e) s += area(e);
  return s;
}

double Mesh::domain_diameter() const {
  double d = 0.0;
  std::vector<int> bv;
  for (int v = 0; v < num_vertices(); ++v)
    if (is_boundary_vertex(v)) bv.push_back(v);
  for (std::size_t i = 0; i < bv.size(); ++i)
    for (std::size_t j = i + 1; j < bv.size(); ++j)
      d = std::max(d, (vertices_[bv[i]] - vertices_[bv[j]]).norm());
  return d;
}

namespace {

// Next non-empty, non-comment line; returns false at end of input.
bool next_line(std::istream& in, std::string& line, int& lineno) {
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
  }
  return false;
}

template <typename T, std::size_t N>
std::array<T, N> read_fields(const std::string& line, int lineno, const char* what) {
  std::istringstream ss(line);
  std::array<T, N> out{};
  for (auto& v : out) {
    if (!(ss >> v)) throw ParseError(std::string("expected ") + what, lineno);
  }
  std::string rest;
  if (ss >> rest) throw ParseError(std::string("trailing text after ") + what, lineno);
  return out;
}

}  // namespace

Mesh parse_mesh(std::istream& in) {
  std::string line;
  int lineno = 0;
  if (!next_line(in, line, lineno)) throw ParseError("missing \"V E B\" header", lineno + 1);
  const auto counts = read_fields<long, 3>(line, lineno, "three counts \"V E B\"");
  if (counts[0] < 3 || counts[1] < 1 || counts[2] < 3) {
    throw ParseError("counts must satisfy V >= 3, E >= 1, B >= 3", lineno);
  }
  std::vector<Vec2> vertices;
  for (long i = 0; i < counts[0]; ++i) {
    if (!next_line(in, line, lineno)) throw ParseError("unexpected end of file in vertices", lineno + 1);
    const auto xy = read_fields<double, 2>(line, lineno, "vertex \"x y\"");
    vertices.emplace_back(xy[0], xy[1]);
  }
  std::vector<Mesh::Element> elements;
  for (long i = 0; i < counts[1]; ++i) {
    if (!next_line(in, line, lineno)) throw ParseError("unexpected end of file in elements", lineno + 1);
    const auto ijk = read_fields<int, 3>(line, lineno, "element \"i j k\"");
    for (int v : ijk) {
      if (v < 0 || v >= counts[0]) throw ParseError("vertex index out of range", lineno);
    }
    elements.push_back({ijk[0], ijk[1], ijk[2]});
  }
  std::set<std::pair<int, int>> listed;
  std::vector<int> listed_lines;
  for (long i = 0; i < counts[2]; ++i) {
    if (!next_line(in, line, lineno)) throw ParseError("unexpected end of file in boundary edges", lineno + 1);
    const auto ij = read_fields<int, 2>(line, lineno, "boundary edge \"i j\"");
    if (!listed.emplace(std::min(ij[0], ij[1]), std::max(ij[0], ij[1])).second) {
      throw ParseError("duplicated boundary edge", lineno);
    }
  }
  if (next_line(in, line, lineno)) throw ParseError("unexpected extra content", lineno);

  Mesh mesh(std::move(vertices), std::move(elements));
  std::set<std::pair<int, int>> actual;
  for (const auto& be : mesh.boundary_edges()) {
    actual.emplace(std::min(be[0], be[1]), std::max(be[0], be[1]));
  }
  for (const auto& e : listed) {
    if (!actual.count(e)) {
      throw MeshError("listed boundary edge " + edge_name(e.first, e.second) +
                      " is not owned by exactly one element");
    }
  }
  for (const auto& e : actual) {
    if (!listed.count(e)) {
      throw MeshError("boundary edge " + edge_name(e.first, e.second) + " missing from file");
    }
  }
  return mesh;
}

Mesh load_mesh(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open mesh file " + path);
  return parse_mesh(in);
}

void write_mesh(std::ostream& out, const Mesh& mesh) {
  const auto bedges = mesh.boundary_edges();
  out << mesh.num_vertices() << ' ' << mesh.num_elements() << ' ' << bedges.size() << '\n';
  out.precision(17);
  for (const auto& v : mesh.vertices()) out << v.x() << ' ' << v.y() << '\n';
  for (const auto& el : mesh.elements()) out << el[0] << ' ' << el[1] << ' ' << el[2] << '\n';
  for (const auto& be : bedges) out << be[0] << ' ' << be[1] << '\n';
}

Mesh refine_uniform(const Mesh& mesh) {
  std::vector<Vec2> vertices = mesh.vertices();
  const int nv = mesh.num_vertices();
  for (const auto& ed : mesh.edges()) {
    vertices.push_back(0.5 * (mesh.vertex(ed[0]) + mesh.vertex(ed[1])));
  }
  std::vector<Mesh::Element> elements;
  elements.reserve(4 * mesh.num_elements());
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const auto& v = mesh.element(e);
    const auto& ed = mesh.element_edges(e);
    const int m0 = nv + ed[0], m1 = nv + ed[1], m2 = nv + ed[2];
    elements.push_back({v[0], m2, m1});
    elements.push_back({m2, v[1], m0});
    elements.push_back({m1, m0, v[2]});
    elements.push_back({m0, m1, m2});
  }
  return Mesh(std::move(vertices), std::move(elements));
}

Mesh refine_uniform(const Mesh& mesh, int times) {
  Mesh out = mesh;
  for (int i = 0; i < times; ++i) out = refine_uniform(out);
  return out;
}

double shape_regularity(const Mesh& mesh) {
  double worst = 0.0;
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const double r = mesh.inradius(e);
    if (!(r > 0)) throw MeshError("degenerate element " + std::to_string(e));
    worst = std::max(worst, mesh.diameter(e) / r);
  }
  return worst;
}

std::vector<Patch> patches(const Mesh& mesh) {
  std::vector<Patch> out(mesh.num_elements());
  for (int e = 0; e < mesh.num_elements(); ++e) {
    auto& p = out[e];
    p.center = e;
    for (int v : mesh.element(e)) {
      const auto& ve = mesh.vertex_elements(v);
      p.members.insert(p.members.end(), ve.begin(), ve.end());
    }
    std::sort(p.members.begin(), p.members.end());
    p.members.erase(std::unique(p.members.begin(), p.members.end()), p.members.end());
  }
  return out;
}

Mesh unit_square() {
  return Mesh({Vec2(0, 0), Vec2(1, 0), Vec2(1, 1), Vec2(0, 1)}, {{0, 1, 2}, {0, 2, 3}});
}

Mesh criss_cross_square() {
  return Mesh({Vec2(0, 0), Vec2(1, 0), Vec2(1, 1), Vec2(0, 1), Vec2(0.5, 0.5)},
              {{0, 1, 4}, {1, 2, 4}, {2, 3, 4}, {3, 0, 4}});
}

}  // namespace synfem
