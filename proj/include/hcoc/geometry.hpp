#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "hcoc/types.hpp"

namespace hcoc {

// Element region tags: Y1 (soft inclusion) and Y2 (stiff matrix); the same
// tags label inclusion/matrix elements of the macro mesh.
enum class Region : std::uint8_t { inclusion = 1, matrix = 2 };

enum class BoundaryTag : std::uint8_t { gamma0 = 0, gamma1 = 1 };

// Reference-cell inclusion description. The inclusion is centered at
// (0.5, 0.5); `param` is the disk radius or the square half-width.
// param == 0 means "no inclusion" (every element tagged matrix).
struct CellGeometry {
    enum class Shape { square, disk };

    Shape shape = Shape::square;
    double param = 0.25;
    int resolution = 8;  // elements per cell edge, power of two

    // Throws GeometryError when the closure of Y1 cannot stay strictly
    // inside Y with a one-element matrix band.
    void validate() const;
};

std::string to_string(CellGeometry::Shape s);
CellGeometry::Shape shape_from_string(const std::string& s);

// Structured quadrilateral mesh of the unit square, nx elements per side.
// Node (i, j) has id j*(nx+1)+i; element (I, J) has id J*nx+I with
// counterclockwise connectivity [n(I,J), n(I+1,J), n(I+1,J+1), n(I,J+1)].
struct QuadMesh {
    int nx = 0;
    std::vector<double> coords;                 // 2*(nx+1)^2, interleaved x,y
    std::vector<std::array<int, 4>> elems;
    std::vector<Region> region;                 // per element

    int nodes_per_side() const { return nx + 1; }
    int node_count() const { return (nx + 1) * (nx + 1); }
    int elem_count() const { return nx * nx; }
    int dof_count() const { return 2 * node_count(); }
    double h() const { return 1.0 / nx; }

    int node_id(int i, int j) const { return j * (nx + 1) + i; }
    int elem_id(int i, int j) const { return j * nx + i; }
    Vec2 node(int id) const { return {coords[2 * id], coords[2 * id + 1]}; }
    Vec2 elem_center(int e) const;

    bool on_boundary(int node) const;
};

// Slave -> master identification of opposite-face nodes; masters map to
// themselves. reduced_index is a contiguous numbering of the masters.
struct PeriodicMap {
    std::vector<int> master;         // per node
    std::vector<int> reduced_index;  // per node, index of its master class
    int reduced_count = 0;

    bool is_master(int node) const { return master[node] == node; }
};

struct CellMesh : QuadMesh {
    CellGeometry geom;
    PeriodicMap periodic;
    std::vector<int> interface_nodes;  // nodes on the discrete interface
    double area_y1 = 0.0;
    double area_y2 = 0.0;

    std::vector<int> elements_tagged(Region r) const;
    // FNV-1a hash of shape/param/resolution and element tags.
    std::uint64_t geometry_hash() const;
};

// Bitmask of unit-square faces used to select the Dirichlet part Gamma0.
namespace face {
constexpr std::uint8_t left = 1;
constexpr std::uint8_t right = 2;
constexpr std::uint8_t bottom = 4;
constexpr std::uint8_t top = 8;
}  // namespace face

std::string faces_to_string(std::uint8_t mask);
std::uint8_t faces_from_string(const std::string& s);

// eps-periodic mesh of Omega = (0,1)^2 obtained by tiling n x n copies of a
// cell mesh; eps = 1/n, so the tiling is exact and Omega_hat = Omega.
struct MacroMesh : QuadMesh {
    int n = 0;                     // cells per side
    int res = 0;                   // elements per cell edge
    double epsilon = 0.0;
    CellGeometry cell_geom;
    std::uint8_t gamma0_faces = face::left;

    std::vector<int> cell_index;   // per element, k = ky*n + kx
    std::vector<int> local_elem;   // per element, reference element in the cell mesh

    std::vector<BoundaryTag> node_boundary_tag;  // per node; interior nodes gamma1
    std::vector<int> gamma0_nodes;

    std::pair<int, int> cell_of_point(double x, double y) const;
    std::vector<int> elements_tagged(Region r) const;
    double inclusion_area() const;
};

// Builds the reference cell mesh: classifies elements by centroid (exact for
// axis-aligned squares whose half-width is resolved by the grid), computes
// the periodic pairing and the discrete interface.
CellMesh build_cell_mesh(const CellGeometry& geom);

// Tiles n x n copies of the cell; n >= 1 (n == 1 is the degenerate single
// cell). Element tags are inherited from the reference cell, which keeps the
// macro mesh node-for-node congruent to the cell on every eps-cell.
MacroMesh build_macro_mesh(const CellMesh& cell, int n,
                           std::uint8_t gamma0_faces = face::left);

// Plain structured mesh of Omega without microstructure (all matrix);
// used as the macro mesh of the homogenized problem.
MacroMesh plain_macro_mesh(int n, std::uint8_t gamma0_faces = face::left);

// Opposite-face node identification for a structured cell mesh.
// Corners form one class; the map is an involution onto master nodes.
PeriodicMap periodic_pairing(const QuadMesh& mesh);

// Line-oriented text serialization (header, node table, element table).
void write_mesh(std::ostream& os, const CellMesh& mesh);
void write_mesh(std::ostream& os, const MacroMesh& mesh);
void save_mesh(const std::string& path, const CellMesh& mesh);
void save_mesh(const std::string& path, const MacroMesh& mesh);

struct MeshFile {
    bool is_macro = false;
    CellMesh cell;    // always present: the reference cell
    MacroMesh macro;  // valid when is_macro
};

MeshFile load_mesh(const std::string& path);

}  // namespace hcoc
