#pragma once

#include <memory>

#include "hcoc/cell.hpp"
#include "hcoc/descent.hpp"
#include "hcoc/state.hpp"

namespace hcoc {

// Control on Omega x Y1, piecewise constant in both variables:
// one 2-vector per (macro element, Y1-tagged cell element).
struct TwoScaleControl {
    int macro_elems = 0;
    int y1_elems = 0;
    Vector v;  // [(e * y1_elems + q) * 2 + c]

    static TwoScaleControl zero(int macro_elems, int y1_elems) {
        return {macro_elems, y1_elems,
                Vector(std::size_t(2) * macro_elems * std::max(y1_elems, 0), 0.0)};
    }
    double& at(int e, int q, int c) { return v[(std::size_t(e) * y1_elems + q) * 2 + c]; }
    double at(int e, int q, int c) const { return v[(std::size_t(e) * y1_elems + q) * 2 + c]; }
};

// Limit displacement pair (u0, W-hat). W-hat(x, .) is stored per macro
// element in the inclusion-space layout and is identically absent for
// kappa = inf (the block is never allocated).
struct TwoScaleState {
    DisplacementField u0;
    std::vector<Vector> what;
    double s_star = 0.0;  // ||u0 + W-hat/kappa||_{L2(Omega x Y)}
    double kappa = ScaleParams::infinite;
    int evaluations = 0;
    double phi_residual = 0.0;
    double block_residual = 0.0;

    bool w_allocated() const { return !what.empty(); }
};

struct TwoScaleAdjoint {
    DisplacementField v0;
    std::vector<Vector> zhat;  // same layout/bypass convention as W-hat
};

// Geometry-only view of a limit discretization, enough to evaluate limit
// fields at unfolded coordinates (used by the unfolding error metrics).
struct LimitFieldView {
    const MacroMesh* macro = nullptr;
    const CellMesh* cell = nullptr;
    const InclusionCellSpace* space = nullptr;  // null when kappa = inf
    double kappa = ScaleParams::infinite;
};

// Discretized two-scale limit problem at a fixed kappa in (0, inf].
struct LimitProblem {
    const MacroMesh* macro = nullptr;  // plain structured mesh of Omega
    const CellMesh* cell = nullptr;
    HomogenizedTensor ahom;
    HookeTensor a;  // coefficient of the inclusion cell blocks
    PhysicsParams phys;
    double kappa = ScaleParams::infinite;

    SparseOperator Khom;  // A^hom stiffness, Gamma0 eliminated
    SparseOperator M;     // macro mass
    InclusionCellSpace space;
    Vector f_nodal, ud_nodal;
    Vector load_f;                      // M * f_nodal, Gamma0 zeroed
    std::vector<Vec2> f_mean, ud_mean;  // per-element means of the interpolants
    int y1_elems = 0;
    double cell_elem_area = 0.0;

    LimitProblem(const MacroMesh& macro, const CellMesh& cell, HomogenizedTensor ahom,
                 const HookeTensor& a, PhysicsParams phys, double kappa);

    // Factorizations shared across solves (keyed on s); lazily created.
    CellOperatorCache& operator_cache() const;

    bool kappa_finite() const { return !std::isinf(kappa); }
    TwoScaleControl zero_control() const {
        return TwoScaleControl::zero(macro->elem_count(), y1_elems);
    }
    // L2(Omega x Y1) inner product of piecewise-constant controls.
    double control_inner(const TwoScaleControl& s, const TwoScaleControl& t) const;
    double control_norm(const TwoScaleControl& t) const {
        return std::sqrt(std::max(0.0, control_inner(t, t)));
    }
    double ud_norm() const { return std::sqrt(std::max(0.0, M.inner(ud_nodal, ud_nodal))); }

    LimitFieldView view() const {
        return {macro, cell, kappa_finite() ? &space : nullptr, kappa};
    }

  private:
    mutable std::unique_ptr<CellOperatorCache> cache_;
};

TwoScaleState solve_limit_state(const LimitProblem& prob, const TwoScaleControl& theta_hat);
TwoScaleState solve_limit_state(const LimitProblem& prob, const TwoScaleControl& theta_hat,
                                const TwoScaleState* hint);

// T^hom_kappa at an arbitrary admissible pair; equals m_kappa at the solution.
double limit_energy(const LimitProblem& prob, const TwoScaleState& state,
                    const TwoScaleControl& theta_hat);

// ||u0 + W-hat/kappa||_{L2(Omega x Y)} of stored fields.
double two_scale_field_norm(const LimitProblem& prob, const TwoScaleState& state);

TwoScaleAdjoint solve_limit_adjoint(const LimitProblem& prob, const TwoScaleState& state);

// L2(Omega x Y1) projection of gamma*theta + (v0 + Z-hat/kappa) onto the
// piecewise-constant control space.
TwoScaleControl limit_reduced_gradient(const LimitProblem& prob, const TwoScaleControl& theta_hat,
                                       const TwoScaleState& state, const TwoScaleAdjoint& adj);

struct LimitOcpResult {
    TwoScaleControl Theta;
    TwoScaleState state;
    TwoScaleAdjoint adjoint;
    double cost = 0.0;
    std::vector<double> cost_history;
    double optimality_residual = 0.0;
    int iterations = 0;
    bool converged = false;
};

double limit_cost(const LimitProblem& prob, const TwoScaleControl& theta_hat,
                  const TwoScaleState& state);

LimitOcpResult solve_limit_ocp(const LimitProblem& prob, const TwoScaleControl& theta0,
                               int max_iterations = 400);

// Frechet derivative of the limit control-to-state map in the direction h;
// shares the adjoint operator (derivative probe used by duality checks).
struct TwoScaleLinearized {
    DisplacementField du0;
    std::vector<Vector> dwhat;
};
TwoScaleLinearized solve_limit_linearized(const LimitProblem& prob, const TwoScaleState& state,
                                          const TwoScaleControl& h);

// Sampled Lipschitz ratio of the limit control-to-state map.
double limit_lipschitz_probe(const LimitProblem& prob, const TwoScaleControl& t1,
                             const TwoScaleControl& t2);

// Corrector expansion sum_ij e_ij(u0) chi_ij for a given engineering strain;
// reconstructs U-hat (or V-hat) for reporting.
DisplacementField warping_field(const CorrectorSet& correctors,
                                const std::array<double, 3>& strain);

}  // namespace hcoc
