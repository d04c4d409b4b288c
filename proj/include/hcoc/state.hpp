#pragma once

#include <functional>
#include <optional>
#include <string>

#include "hcoc/fem.hpp"

namespace hcoc {

// Physical data of the semilinear problem: nonlocal term alpha ||u||^p u,
// body force f, desired state u_d and Tikhonov weight gamma.
struct PhysicsParams {
    double alpha = 0.0;
    double p = 2.0;
    double gamma = 1.0;
    VectorField f;
    VectorField u_d;
    double tol_lin = 1e-10;  // relative linear-solver residual
    double tol_fp = 1e-10;   // absolute tolerance on phi(s) = ||u(s)|| - s

    void validate() const;
};

VectorField zero_field();
// "zero" | "preset:const[:cx,cy]" | "preset:trig[:amplitude]"
VectorField parse_field(const std::string& spec);

// Control supported on inclusion-region DOFs, stored as a full-length nodal
// vector that is zero elsewhere (extension by zero is implicit).
struct ControlField {
    Vector v;

    static ControlField zero(const MacroMesh& mesh) {
        return {Vector(std::size_t(mesh.dof_count()), 0.0)};
    }
};

struct EnergyReport {
    double elastic = 0.0;   // (1/2) a(u,u)
    double nonlocal = 0.0;  // alpha/(p+2) ||u||^{p+2}
    double load = 0.0;      // l(u)
    double total = 0.0;     // elastic + nonlocal - load
};

struct StateSolution {
    DisplacementField u;
    double s_star = 0.0;       // ||u||_{L2}
    EnergyReport energy;
    int iterations = 0;        // scalar-reduction evaluations
    double phi_residual = 0.0;
    double lin_residual = 0.0; // linear residual of the final solve
};

// Discretized eps-delta problem on a tiled macro mesh: operators assembled
// once, reused across solves (the OCP loop solves many states).
struct StateProblem {
    const MacroMesh* mesh = nullptr;
    ContrastField contrast;
    PhysicsParams phys;
    double epsilon = 0.0;

    SparseOperator K;        // contrast stiffness, Gamma0 eliminated
    SparseOperator M;        // L2(Omega) mass
    SparseOperator M1;       // L2(Omega_eps^1) mass
    SparseOperator S1, S2;   // strain products on inclusion / matrix
    Vector f_nodal, ud_nodal;
    Vector load_f;           // M * f_nodal, Gamma0 entries zeroed
    std::vector<int> inclusion_dofs;  // DOFs incident to inclusion elements
    bool block_jacobi = false;        // set for contrasts delta <= 1e-3

    StateProblem(const MacroMesh& mesh, ContrastField contrast, PhysicsParams phys);

    Vector rhs(const ControlField& theta) const;
    double control_norm(const ControlField& theta) const;  // L2(Omega_eps^1)
    double ud_norm() const;
};

// Monotone scalar reduction: the fixed point of s = ||u(s)|| where u(s)
// solves the s-linear problem. norm_of_solution must be nonincreasing in s;
// the root of phi(s) = norm_of_solution(s) - s is then unique and bracketed
// by [0, norm_of_solution(0)]. Illinois iteration with bisection fallback.
struct ScalarReductionReport {
    double s_star = 0.0;
    int evaluations = 0;
    double phi_residual = 0.0;
};

// s_hint < 0 starts from the standard bracket [0, norm_of_solution(0)];
// otherwise the bracket is grown around the hint (warm start across nearby
// solves, e.g. consecutive optimizer iterates).
ScalarReductionReport solve_scalar_reduction(const std::function<double(double)>& norm_of_solution,
                                             double tol_fp, int max_evals = 200,
                                             double s_hint = -1.0);

// Solves the semilinear state system for the given control.
StateSolution solve_state(const StateProblem& prob, const ControlField& theta);
StateSolution solve_state(const StateProblem& prob, const ControlField& theta,
                          const StateSolution* hint);
StateSolution solve_state(const MacroMesh& mesh, const ContrastField& contrast,
                          const PhysicsParams& phys, const ControlField& theta);

// Shared kernel: solve (K + alpha s^p M) u = rhs coupled with s = ||u||_M.
// Exposed for surrogate problems (e.g. the 1-DOF cubic).
struct NonlocalSolveResult {
    Vector u;
    double s_star = 0.0;
    int evaluations = 0;
    double phi_residual = 0.0;
    double lin_residual = 0.0;
};
struct NonlocalHints {
    const Vector* u = nullptr;  // warm start for the inner CG
    double s = -1.0;            // warm start for the scalar root find
    bool block_jacobi = false;  // 2x2 node-block preconditioning
};
NonlocalSolveResult nonlocal_solve(const SparseOperator& K, const SparseOperator& M,
                                   const Vector& rhs, double alpha, double p,
                                   double tol_fp, double tol_lin,
                                   const NonlocalHints& hints = {});

EnergyReport total_energy(const StateProblem& prob, const DisplacementField& u,
                          const ControlField& theta);

// ||u1 - u2||_{L2(Omega)} / ||theta1 - theta2||_{L2(Omega_eps^1)};
// theta1 == theta2 is an input error.
double control_to_state_lipschitz_probe(const StateProblem& prob, const ControlField& theta1,
                                        const ControlField& theta2);

// A-priori ratio (delta ||e(u)||_1 + ||e(u)||_2) / (||f|| + ||theta||),
// tracked across sweeps to check eps/delta-independence of the constants.
double apriori_ratio(const StateProblem& prob, const DisplacementField& u,
                     const ControlField& theta);
// Same shape for the adjoint: (delta ||e(v)||_1 + ||e(v)||_2) / ||u - u_d||.
double adjoint_estimate_ratio(const StateProblem& prob, const DisplacementField& v,
                              const DisplacementField& u);

// Residual of the discrete state equation at (u, s, theta), relative to the rhs.
double state_equation_residual(const StateProblem& prob, const DisplacementField& u,
                               double s, const ControlField& theta);

}  // namespace hcoc
