#include "hcoc/ocp.hpp"

#include <cmath>
#include <random>

namespace hcoc {

double evaluate_cost(const StateProblem& prob, const ControlField& theta,
                     const StateSolution& state) {
    Vector diff = state.u;
    axpy(-1.0, prob.ud_nodal, diff);
    const double track = m_norm(prob.M, diff);
    const double ctrl = prob.control_norm(theta);
    return 0.5 * track * track + 0.5 * prob.phys.gamma * ctrl * ctrl;
}

namespace {

ShiftedOperator adjoint_operator(const StateProblem& prob, const StateSolution& state,
                                 Vector& mu_storage) {
    const double s = state.s_star;
    const double p = prob.phys.p;
    ShiftedOperator op;
    op.K = &prob.K;
    op.M = &prob.M;
    op.block_jacobi = prob.block_jacobi;
    op.c = prob.phys.alpha * std::pow(s, p);
    const double c1 = (prob.phys.alpha > 0.0 && s > 0.0)
                          ? prob.phys.alpha * p * std::pow(s, p - 2.0)
                          : 0.0;
    if (c1 > 0.0) {
        mu_storage = prob.M.mul(state.u);
        prob.K.zero_constrained(mu_storage);
        op.rank_one = RankOneUpdate{mu_storage, c1};
    }
    return op;
}

Vector adjoint_rhs(const StateProblem& prob, const StateSolution& state) {
    Vector diff = state.u;
    axpy(-1.0, prob.ud_nodal, diff);
    Vector b = prob.M.mul(diff);
    prob.K.zero_constrained(b);
    return b;
}

}  // namespace

DisplacementField solve_adjoint(const StateProblem& prob, const StateSolution& state) {
    return solve_adjoint(prob, state, nullptr);
}

DisplacementField solve_adjoint(const StateProblem& prob, const StateSolution& state,
                                const DisplacementField* hint) {
    Vector mu;
    const ShiftedOperator op = adjoint_operator(prob, state, mu);
    return solve_shifted(op, adjoint_rhs(prob, state), prob.phys.tol_lin, nullptr, hint);
}

double adjoint_equation_residual(const StateProblem& prob, const DisplacementField& v,
                                 const StateSolution& state) {
    Vector mu;
    const ShiftedOperator op = adjoint_operator(prob, state, mu);
    Vector r = apply_shifted(op, v);
    const Vector b = adjoint_rhs(prob, state);
    axpy(-1.0, b, r);
    const double bn = norm2(b);
    return norm2(r) / (bn > 0.0 ? bn : 1.0);
}

ControlField reduced_gradient(const StateProblem& prob, const ControlField& theta,
                              const StateSolution& state, const DisplacementField& v) {
    (void)state;
    ControlField g = ControlField::zero(*prob.mesh);
    for (const int d : prob.inclusion_dofs)
        g.v[d] = prob.phys.gamma * theta.v[d] + v[d];
    return g;
}

ControlField reduced_gradient(const StateProblem& prob, const ControlField& theta) {
    const StateSolution state = solve_state(prob, theta);
    const DisplacementField v = solve_adjoint(prob, state);
    return reduced_gradient(prob, theta, state, v);
}

double optimality_tolerance(const StateProblem& prob, double scale) {
    return scale * (1.0 + prob.ud_norm());
}

ControlField random_control(const StateProblem& prob, unsigned seed, double amplitude) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> dist(-amplitude, amplitude);
    ControlField theta = ControlField::zero(*prob.mesh);
    for (const int d : prob.inclusion_dofs) theta.v[d] = dist(rng);
    return theta;
}

namespace {

OcpResult run_single(const StateProblem& prob, const ControlField& theta0,
                     const OptimizeOptions& opts) {
    // Memoize the last state so the post-line-search gradient evaluation
    // reuses the accepted cost solve.
    struct Cache {
        Vector theta;
        StateSolution state;
        bool valid = false;
    } cache;

    auto state_at = [&](const Vector& tv) -> const StateSolution& {
        if (!cache.valid || cache.theta != tv) {
            ControlField t{tv};
            cache.state = solve_state(prob, t, cache.valid ? &cache.state : nullptr);
            cache.theta = tv;
            cache.valid = true;
        }
        return cache.state;
    };

    DescentCallbacks cb;
    cb.gamma = prob.phys.gamma;
    cb.inner = [&prob](const Vector& a, const Vector& b) { return prob.M1.inner(a, b); };
    cb.cost = [&](const Vector& tv) {
        return evaluate_cost(prob, ControlField{tv}, state_at(tv));
    };
    DisplacementField v_last;
    cb.full = [&](const Vector& tv) {
        const StateSolution& state = state_at(tv);
        const ControlField theta{tv};
        const DisplacementField v =
            solve_adjoint(prob, state, v_last.empty() ? nullptr : &v_last);
        v_last = v;
        const ControlField g = reduced_gradient(prob, theta, state, v);
        DescentEvaluation ev;
        ev.cost = evaluate_cost(prob, theta, state);
        ev.gradient = g.v;
        ev.residual = m_norm(prob.M1, g.v);
        return ev;
    };

    DescentOptions dopts;
    dopts.tol_opt = optimality_tolerance(prob, opts.tol);
    dopts.max_iterations = opts.max_iterations;
    const DescentResult dr = armijo_descent(cb, theta0.v, dopts);

    OcpResult res;
    res.Theta = ControlField{dr.control};
    res.u = state_at(dr.control);
    res.v = solve_adjoint(prob, res.u);
    res.cost = evaluate_cost(prob, res.Theta, res.u);
    res.cost_history = dr.cost_history;
    res.gradient_history = dr.gradient_history;
    res.iterations = dr.iterations;
    res.converged = dr.converged;
    const ControlField g = reduced_gradient(prob, res.Theta, res.u, res.v);
    res.optimality_residual = m_norm(prob.M1, g.v);
    res.state_residual = state_equation_residual(prob, res.u.u, res.u.s_star, res.Theta);
    res.adjoint_residual = adjoint_equation_residual(prob, res.v, res.u);
    res.gradient_residual = res.optimality_residual;
    return res;
}

}  // namespace

OcpResult optimize_control(const StateProblem& prob, const ControlField& theta0,
                           const OptimizeOptions& opts) {
    OcpResult best = run_single(prob, theta0, opts);
    best.multistart_replica = opts.multistart > 0 ? 0 : -1;
    // Replicas are merged deterministically: by cost, ties by replica index.
    for (int k = 1; k <= opts.multistart; ++k) {
        const ControlField start = random_control(prob, opts.seed + unsigned(k), opts.start_amplitude);
        OcpResult r = run_single(prob, start, opts);
        r.multistart_replica = k;
        if (r.cost < best.cost) best = std::move(r);
    }
    return best;
}

}  // namespace hcoc
