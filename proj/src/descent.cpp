#include "hcoc/descent.hpp"

#include <cmath>
#include <sstream>

namespace hcoc {

namespace {

void push_history(DescentResult& res, double cost, double grad_norm) {
    if (res.cost_history.empty() || cost <= res.cost_history.back())
        res.cost_history.push_back(cost);
    else
        res.cost_history.push_back(res.cost_history.back());
    res.gradient_history.push_back(grad_norm);
}

}  // namespace

DescentResult armijo_descent(const DescentCallbacks& cb, Vector theta, const DescentOptions& opts) {
    DescentResult res;
    DescentEvaluation cur = cb.full(theta);
    push_history(res, cur.cost, cur.residual);

    // The main loop drives the residual below polish_tol so the reported
    // triple satisfies the gradient relation well beyond the declared
    // optimality tolerance; convergence itself is judged against tol_opt.
    const double polish_tol =
        opts.polish_tol > 0.0 ? opts.polish_tol : 0.1 * opts.tol_opt;
    double step = opts.initial_step;

    // Barzilai-Borwein curvature estimate seeds the Armijo trial step;
    // backtracking keeps the iteration monotone regardless.
    Vector prev_theta, prev_grad;
    bool have_prev = false;

    auto finish = [&]() {
        res.control = theta;
        res.cost = cur.cost;
        res.residual = cur.residual;
        res.converged = cur.residual <= opts.tol_opt;
        res.snapped = cur.residual <= polish_tol;
        return res;
    };

    for (int it = 0; it < opts.max_iterations; ++it) {
        res.iterations = it + 1;
        if (cur.residual <= polish_tol) return finish();

        if (cur.residual <= opts.tol_opt) {
            // Opportunistic fixed-point polish theta <- -v/gamma
            // (= theta - grad/gamma); contracts the residual geometrically
            // whenever the optimality map is a local contraction.
            bool progressed = false;
            for (int cycle = 0; cycle < 40 && cur.residual > polish_tol; ++cycle) {
                Vector trial = theta;
                axpy(-1.0 / cb.gamma, cur.gradient, trial);
                DescentEvaluation ev = cb.full(trial);
                if (ev.residual >= cur.residual) break;
                theta = std::move(trial);
                cur = std::move(ev);
                push_history(res, cur.cost, cur.residual);
                progressed = true;
            }
            if (cur.residual <= polish_tol) return finish();
            if (progressed) continue;
        }

        const double gg = cb.inner(cur.gradient, cur.gradient);
        if (gg <= 0.0) return finish();

        if (have_prev) {
            Vector s = theta, y = cur.gradient;
            axpy(-1.0, prev_theta, s);
            axpy(-1.0, prev_grad, y);
            const double sy = cb.inner(s, y);
            const double yy = cb.inner(y, y);
            if (sy > 0.0 && yy > 0.0) step = std::min(std::max(sy / yy, 1e-12), 1e12);
        }
        prev_theta = theta;
        prev_grad = cur.gradient;
        have_prev = true;

        bool accepted = false;
        double tau = step;
        for (int bt = 0; bt < opts.max_backtracks; ++bt) {
            Vector trial = theta;
            axpy(-tau, cur.gradient, trial);
            const double c = cb.cost(trial);
            if (c <= cur.cost - opts.armijo_c1 * tau * gg) {
                theta = std::move(trial);
                cur = cb.full(theta);
                push_history(res, cur.cost, cur.residual);
                step = 2.0 * tau;
                accepted = true;
                break;
            }
            tau *= 0.5;
        }
        if (!accepted) {
            // Near the cost noise floor Armijo cannot certify decrease.
            // Fall back to short gradient steps (including the damped
            // fixed-point step of length fp_damping/gamma), accepted on
            // cost or on residual progress.
            const double cands[3] = {step, 0.25 * step, opts.fp_damping / cb.gamma};
            for (const double t : cands) {
                Vector trial = theta;
                axpy(-t, cur.gradient, trial);
                DescentEvaluation ev = cb.full(trial);
                if (ev.cost < cur.cost || ev.residual < 0.999 * cur.residual) {
                    theta = std::move(trial);
                    cur = std::move(ev);
                    push_history(res, cur.cost, cur.residual);
                    accepted = true;
                    break;
                }
            }
            if (!accepted) {
                if (cur.residual <= opts.tol_opt) return finish();
                std::ostringstream ss;
                ss << "line search failed after " << opts.max_backtracks
                   << " backtracks at iteration " << it << ": cost " << cur.cost
                   << ", gradient norm " << cur.residual << ", last step " << tau;
                throw OptimizationError(ss.str());
            }
        }
    }
    return finish();
}

}  // namespace hcoc
