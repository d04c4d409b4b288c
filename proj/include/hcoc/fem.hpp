#pragma once

#include <array>
#include <functional>

#include "hcoc/geometry.hpp"
#include "hcoc/hooke.hpp"
#include "hcoc/sparse.hpp"

namespace hcoc {

// Nodal vector field over a mesh, interleaved (u1, u2) per node;
// DOF index of (node, comp) is 2*node + comp.
using DisplacementField = Vector;

// Closed-form vector field, evaluated at nodes.
using VectorField = std::function<Vec2(double, double)>;

// 8x8 element stiffness of a bilinear quadrilateral of width h with constant
// Hooke tensor, 2x2 Gauss (exact for this integrand). The kernel of the
// unconstrained matrix is spanned by the two translations and the rotation.
std::array<double, 64> element_stiffness(const HookeTensor& a, double h);

// 8x8 consistent element mass (two components) of a square of width h.
std::array<double, 64> element_mass(double h);

enum class Form {
    stiffness,             // a_eps_delta with the given coefficient field
    mass,                  // L2(Omega) inner product
    mass_on_inclusion,     // L2(Omega_eps^1)
    mass_on_matrix,        // L2(Omega_eps^2)
};

// Global assembly over a tiled macro mesh. The coefficient rule is
// delta^2 * A on inclusion elements, A on matrix elements. No constraints
// are applied here.
SparseOperator assemble(const MacroMesh& mesh, const ContrastField& coeff, Form form);
SparseOperator assemble(const MacroMesh& mesh, const HookeTensor& coeff, Form form);

// Stiffness assembled with the strain inner product e(u):e(w) restricted to
// one region; u^T S u = ||e(u)||^2_{L2(region)}.
SparseOperator assemble_strain_product(const MacroMesh& mesh, Region region);

// Assembly over an explicit element list with a custom DOF map
// (dof_of(node, comp) < 0 drops the entry). Used by the cell-problem
// solvers with periodic / interior DOF numbering.
SparseOperator assemble_generic(const QuadMesh& mesh, const std::vector<int>& elements,
                                int dof_count,
                                const std::function<int(int, int)>& dof_of,
                                const std::function<const HookeTensor*(int)>& tensor_of,
                                bool mass_form);

// Both components of the Gamma0 nodes.
std::vector<int> gamma0_dofs(const MacroMesh& mesh);

DisplacementField interpolate(const QuadMesh& mesh, const VectorField& f);

// Bilinear evaluation of a nodal field at a point of the closed unit square.
Vec2 evaluate(const QuadMesh& mesh, const DisplacementField& u, double x, double y);

inline double m_norm(const SparseOperator& m, const Vector& u) {
    return std::sqrt(std::max(0.0, m.inner(u, u)));
}

// Korn-type diagnostic ratio
//   ||u||_{L2(Omega)} / (eps ||e(u)||_{L2(Omega_eps^1)} + ||e(u)||_{L2(Omega_eps^2)}),
// defined as 0 for u == 0. Callers typically sample it over random
// admissible fields and track the maximum across an (eps, delta) sweep.
double korn_diagnostic(const DisplacementField& u, double eps, const SparseOperator& mass,
                       const SparseOperator& strain_incl, const SparseOperator& strain_matr);
double korn_diagnostic(const DisplacementField& u, const MacroMesh& mesh, double eps);

}  // namespace hcoc
