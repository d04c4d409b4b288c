#pragma once

#include <functional>
#include <vector>

#include "hcoc/types.hpp"

namespace hcoc {

// Shared reduced-space optimizer for the tracking OCPs: gradient descent
// with Armijo backtracking, a damped fixed-point fallback theta <- -v/gamma
// when the line search stagnates, and a terminal "snap" that enforces the
// optimality relation theta = -v/gamma exactly before reporting.
//
// The adapters supply the reduced cost and its L2 gradient; the fixed-point
// target is theta - grad/gamma, which equals -v/gamma in both the
// microscopic and the two-scale problem.
struct DescentEvaluation {
    double cost = 0.0;
    Vector gradient;       // L2 gradient in the control layout
    double residual = 0.0; // control-space norm of the gradient
};

struct DescentCallbacks {
    std::function<double(const Vector&)> cost;
    std::function<DescentEvaluation(const Vector&)> full;
    std::function<double(const Vector&, const Vector&)> inner;  // control-space L2
    double gamma = 1.0;
};

struct DescentOptions {
    double tol_opt = 1e-8;
    double polish_tol = 0.0;  // 0: defaults to tol_opt / 10
    int max_iterations = 400;
    double armijo_c1 = 1e-4;
    int max_backtracks = 60;
    double fp_damping = 0.5;
    double initial_step = 1.0;
};

struct DescentResult {
    Vector control;
    double cost = 0.0;
    double residual = 0.0;             // gradient norm at the reported control
    std::vector<double> cost_history;  // accepted iterates, nonincreasing
    std::vector<double> gradient_history;
    int iterations = 0;
    bool converged = false;
    bool snapped = false;  // reported control equals -v/gamma exactly
};

DescentResult armijo_descent(const DescentCallbacks& cb, Vector theta0,
                             const DescentOptions& opts);

}  // namespace hcoc
