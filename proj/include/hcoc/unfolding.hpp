#pragma once

#include "hcoc/two_scale.hpp"

namespace hcoc {

// Values of T_eps(u) indexed by (cell k in K_eps, cell-mesh node). On the
// meshes built here the unfolding is an exact re-indexing of nodal values:
// the macro mesh restricted to eps*k + eps*Y is congruent to the cell mesh.
struct UnfoldedField {
    int n = 0;           // cells per side
    int cell_nodes = 0;
    Vector v;            // [(k * cell_nodes + node) * 2 + comp]

    double at(int k, int node, int comp) const {
        return v[(std::size_t(k) * cell_nodes + node) * 2 + comp];
    }
    double& at(int k, int node, int comp) {
        return v[(std::size_t(k) * cell_nodes + node) * 2 + comp];
    }
};

// Throws ValidationError when the macro mesh is not cell-congruent.
UnfoldedField unfold(const DisplacementField& u, const MacroMesh& macro, const CellMesh& cell);

// Inverse re-indexing; fold(unfold(u)) == u exactly.
DisplacementField fold(const UnfoldedField& uf, const MacroMesh& macro, const CellMesh& cell);

// ||T_eps(u)||_{L2(Omega x Y)}; equals ||u||_{L2(Omega)} on exact tilings.
double unfolded_norm(const UnfoldedField& uf, const CellMesh& cell);

// | int_Omega psi dx - int_{Omega x Y} T_eps(psi) dx dy | for a scalar nodal
// field; vanishes to quadrature precision here since Omega_hat = Omega.
double unfold_integral_gap(const Vector& psi, const MacroMesh& macro, const CellMesh& cell);

// || T_eps(u_eps) - (u0 + W-hat/kappa) ||_{L2(Omega x Y)}. The limit macro
// field is sampled at the unfolded coordinates x = eps(k + y) by bilinear
// interpolation; W-hat is looked up per (owning limit element, y).
double two_scale_state_error(const DisplacementField& u_eps, const MacroMesh& micro,
                             const CellMesh& cell, const LimitFieldView& lim,
                             const TwoScaleState& limit_state);

// || T_eps(theta_eps) - Theta_hat ||_{L2(Omega x Y1)}; the same machinery
// applied to control values on inclusion nodes.
double two_scale_control_error(const ControlField& theta, const MacroMesh& micro,
                               const CellMesh& cell, const LimitFieldView& lim,
                               const TwoScaleControl& theta_hat);

}  // namespace hcoc
