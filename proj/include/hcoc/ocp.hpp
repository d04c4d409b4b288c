#pragma once

#include "hcoc/descent.hpp"
#include "hcoc/state.hpp"

namespace hcoc {

// Result of the eps-delta optimal control solve. For alpha > 0 the reduced
// problem is non-convex; the reported control is a stationary point.
struct OcpResult {
    ControlField Theta;
    StateSolution u;          // state at Theta
    DisplacementField v;      // adjoint at the state
    double cost = 0.0;
    std::vector<double> cost_history;      // nonincreasing over accepted iterates
    std::vector<double> gradient_history;  // reduced-gradient norms per iterate
    double optimality_residual = 0.0;      // ||gamma Theta + v||_{L2(Omega_eps^1)}
    int iterations = 0;
    bool converged = false;
    // Re-substitution residuals of the optimality system
    // (state equation, adjoint equation, gradient relation).
    double state_residual = 0.0;
    double adjoint_residual = 0.0;
    double gradient_residual = 0.0;
    int multistart_replica = -1;  // which start won (multistart runs only)
};

double evaluate_cost(const StateProblem& prob, const ControlField& theta,
                     const StateSolution& state);

// Adjoint solve at a given state: the SPD operator
//   K + alpha s^p M + alpha p s^{p-2} (M u)(M u)^T
// applied matrix-free, with right-hand side M (u - u_d).
DisplacementField solve_adjoint(const StateProblem& prob, const StateSolution& state);
DisplacementField solve_adjoint(const StateProblem& prob, const StateSolution& state,
                                const DisplacementField* hint);

// Residual of the adjoint equation at (v; state), relative to its rhs.
double adjoint_equation_residual(const StateProblem& prob, const DisplacementField& v,
                                 const StateSolution& state);

// L2 reduced gradient gamma*theta + v restricted to the inclusion DOFs.
ControlField reduced_gradient(const StateProblem& prob, const ControlField& theta);
ControlField reduced_gradient(const StateProblem& prob, const ControlField& theta,
                              const StateSolution& state, const DisplacementField& v);

// Termination threshold tol_opt = scale * (1 + ||u_d||), default 1e-8.
double optimality_tolerance(const StateProblem& prob, double scale = 1e-8);

struct OptimizeOptions {
    int max_iterations = 400;
    double tol = 1e-8;         // optimality tolerance scale
    int multistart = 0;        // extra random starts beyond theta0
    unsigned seed = 20240817;
    double start_amplitude = 1.0;
};

// Gradient descent with Armijo backtracking and fixed-point polish.
// Guarantees j(Theta) <= j(theta0) and a nonincreasing cost history.
OcpResult optimize_control(const StateProblem& prob, const ControlField& theta0,
                           const OptimizeOptions& opts = {});

ControlField random_control(const StateProblem& prob, unsigned seed, double amplitude);

}  // namespace hcoc
