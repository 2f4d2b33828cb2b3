#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace synfem {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

/// x = jacobian * xi + offset, mapping the reference simplex
/// {(0,0), (1,0), (0,1)} onto a physical triangle.
struct AffineMap {
  Mat2 jacobian;
  Vec2 offset;
  Mat2 inverse;
  double determinant = 0.0;

  Vec2 to_physical(const Vec2& ref) const { return jacobian * ref + offset; }
  Vec2 to_reference(const Vec2& x) const { return inverse * (x - offset); }
  /// Transforms a reference gradient (column) into a physical one.
  Vec2 physical_gradient(const Vec2& ref_grad) const {
    return inverse.transpose() * ref_grad;
  }
};

struct Patch {
  int center = -1;
  std::vector<int> members;  // sorted, contains center
};

/// Conforming triangulation of a convex polygon.
///
/// Elements are stored counterclockwise. Local edge k of an element is the
/// edge opposite to local vertex k, i.e. it joins vertices (k+1)%3 and
/// (k+2)%3. Edges are numbered globally in order of first appearance when
/// sweeping elements.
class Mesh {
 public:
  using Element = std::array<int, 3>;
  using Edge = std::array<int, 2>;

  Mesh() = default;
  /// Validates and normalizes orientation. Throws MeshError on degenerate
  /// or non-conforming input, or when the domain is not convex.
  Mesh(std::vector<Vec2> vertices, std::vector<Element> elements);

  int num_vertices() const { return static_cast<int>(vertices_.size()); }
  int num_elements() const { return static_cast<int>(elements_.size()); }
  int num_edges() const { return static_cast<int>(edges_.size()); }

  const std::vector<Vec2>& vertices() const { return vertices_; }
  const Vec2& vertex(int i) const { return vertices_[i]; }
  const std::vector<Element>& elements() const { return elements_; }
  const Element& element(int e) const { return elements_[e]; }
  const std::vector<Edge>& edges() const { return edges_; }
  const Edge& edge(int i) const { return edges_[i]; }

  /// Global edge ids of the three local edges of element e.
  const std::array<int, 3>& element_edges(int e) const { return element_edges_[e]; }
  /// Elements sharing global edge i; second entry is -1 on the boundary.
  const std::array<int, 2>& edge_elements(int i) const { return edge_elements_[i]; }
  /// Neighbor across local edge k, or -1.
  const std::array<int, 3>& element_neighbors(int e) const { return neighbors_[e]; }
  const std::vector<int>& vertex_elements(int v) const { return vertex_elements_[v]; }

  bool is_boundary_edge(int i) const { return edge_elements_[i][1] < 0; }
  bool is_boundary_vertex(int v) const { return boundary_vertex_[v] != 0; }
  /// Boundary edges, each oriented as in its (counterclockwise) owner.
  std::vector<Edge> boundary_edges() const;

  AffineMap affine_map(int e) const;
  double area(int e) const;
  double diameter(int e) const;
  double inradius(int e) const;
  Vec2 centroid(int e) const;
  double h_max() const;
  double total_area() const;
  /// Largest distance between two vertices.
  double domain_diameter() const;

 private:
  void build_topology();
  void check_convex() const;

  std::vector<Vec2> vertices_;
  std::vector<Element> elements_;
  std::vector<Edge> edges_;
  std::vector<std::array<int, 3>> element_edges_;
  std::vector<std::array<int, 2>> edge_elements_;
  std::vector<std::array<int, 3>> neighbors_;
  std::vector<std::vector<int>> vertex_elements_;
  std::vector<char> boundary_vertex_;
};

/// Reads the plain-text format: "V E B" header, V vertex lines "x y",
/// E element lines "i j k", B boundary edge lines "i j". '#' starts a
/// comment. The listed boundary edges must equal the computed ones.
Mesh parse_mesh(std::istream& in);
Mesh load_mesh(const std::string& path);
void write_mesh(std::ostream& out, const Mesh& mesh);

/// Red refinement: each triangle is split into four congruent children.
/// Child 4k+i (i < 3) is the corner child at parent vertex i, child 4k+3
/// the middle one. New vertices are appended in global edge order.
Mesh refine_uniform(const Mesh& mesh);
Mesh refine_uniform(const Mesh& mesh, int times);

/// max over elements of diam(E) / inradius(E).
double shape_regularity(const Mesh& mesh);

/// S_E: all elements sharing at least one vertex with E.
std::vector<Patch> patches(const Mesh& mesh);

/// Unit square split along the (0,0)-(1,1) diagonal into two triangles.
Mesh unit_square();
/// Unit square with both diagonals: 5 vertices, 4 triangles.
Mesh criss_cross_square();

}  // namespace synfem
