#include "hcoc/two_scale.hpp"

#include <cmath>

namespace hcoc {

namespace {

// Hooke tensor built from the Voigt matrix of A^hom.
const HookeTensor& hom_tensor(const LimitProblem& prob) { return prob.ahom.tensor; }

Vec2 elem_mean(const MacroMesh& mesh, const Vector& nodal, int e) {
    const auto& conn = mesh.elems[e];
    Vec2 out{0.0, 0.0};
    for (int a = 0; a < 4; ++a) {
        out.x += 0.25 * nodal[2 * conn[a]];
        out.y += 0.25 * nodal[2 * conn[a] + 1];
    }
    return out;
}

}  // namespace

LimitProblem::LimitProblem(const MacroMesh& macro_in, const CellMesh& cell_in,
                           HomogenizedTensor ahom_in, const HookeTensor& a_in,
                           PhysicsParams phys_in, double kappa_in)
    : macro(&macro_in), cell(&cell_in), ahom(std::move(ahom_in)), a(a_in),
      phys(std::move(phys_in)), kappa(kappa_in) {
    phys.validate();
    if (!(kappa > 0.0)) throw ValidationError("kappa must lie in (0, inf]");
    validate_hom_tensor(ahom);
    if (ahom.geometry_hash != cell->geometry_hash())
        throw ValidationError("A^hom was computed for a different cell geometry");

    Khom = assemble(*macro, hom_tensor(*this), Form::stiffness);
    M = assemble(*macro, hom_tensor(*this), Form::mass);
    Khom.eliminate(gamma0_dofs(*macro));

    f_nodal = phys.f ? interpolate(*macro, phys.f) : Vector(macro->dof_count(), 0.0);
    ud_nodal = phys.u_d ? interpolate(*macro, phys.u_d) : Vector(macro->dof_count(), 0.0);
    load_f = M.mul(f_nodal);
    Khom.zero_constrained(load_f);

    f_mean.resize(macro->elem_count());
    ud_mean.resize(macro->elem_count());
    for (int e = 0; e < macro->elem_count(); ++e) {
        f_mean[e] = elem_mean(*macro, f_nodal, e);
        ud_mean[e] = elem_mean(*macro, ud_nodal, e);
    }

    y1_elems = int(cell->elements_tagged(Region::inclusion).size());
    cell_elem_area = cell->h() * cell->h();
    if (kappa_finite()) {
        space = InclusionCellSpace(*cell, a);
        if (y1_elems > 0 && space.dof_count() == 0)
            throw GeometryError(
                "inclusion has no interior nodes at this resolution; refine the cell mesh");
    }
}

CellOperatorCache& LimitProblem::operator_cache() const {
    if (!cache_)
        cache_ = std::make_unique<CellOperatorCache>(space, kappa, phys.alpha, phys.p);
    return *cache_;
}

double LimitProblem::control_inner(const TwoScaleControl& s, const TwoScaleControl& t) const {
    // Piecewise-constant controls: the weight per entry is |e| * |ce|.
    const double elem_area = 1.0 / macro->elem_count();
    double out = 0.0;
    for (std::size_t i = 0; i < s.v.size(); ++i) out += s.v[i] * t.v[i];
    return out * elem_area * cell_elem_area;
}

namespace {

// Block vector of the coupled (u0, W-hat) system.
struct TsVector {
    Vector mac;
    std::vector<Vector> cells;
};

struct TsWork {
    const LimitProblem* prob;
    CellOperatorCache* cache;
    double s = 0.0;
    double c_mass = 0.0;  // alpha s^p

    double inv_kappa() const {
        return std::isinf(prob->kappa) ? 0.0 : 1.0 / prob->kappa;
    }
};

// Macro load induced by the per-element Y-integrals q_e: node a of element e
// receives (|e|/4) q_e.
Vector scatter_elem_means(const MacroMesh& mesh, const std::vector<Vec2>& q) {
    Vector out(mesh.dof_count(), 0.0);
    const double w = 0.25 / mesh.elem_count();  // |e|/4
    for (int e = 0; e < mesh.elem_count(); ++e)
        for (const int nid : mesh.elems[e]) {
            out[2 * nid] += w * q[e].x;
            out[2 * nid + 1] += w * q[e].y;
        }
    return out;
}

// Per-element integrals of the control over Y1: q_e = sum_q |ce| theta(e,q).
std::vector<Vec2> control_y_integrals(const LimitProblem& prob, const TwoScaleControl& theta) {
    std::vector<Vec2> q(prob.macro->elem_count(), Vec2{0.0, 0.0});
    for (int e = 0; e < prob.macro->elem_count(); ++e)
        for (int k = 0; k < prob.y1_elems; ++k) {
            q[e].x += prob.cell_elem_area * theta.at(e, k, 0);
            q[e].y += prob.cell_elem_area * theta.at(e, k, 1);
        }
    return q;
}

// Cell load of the piecewise-constant control on element e.
Vector control_cell_load(const LimitProblem& prob, const TwoScaleControl& theta, int e) {
    Vector out(prob.space.dof_count(), 0.0);
    const double w = prob.cell_elem_area / 4.0;
    const auto y1 = prob.space.y1_elements;
    for (int k = 0; k < int(y1.size()); ++k) {
        const double tx = theta.at(e, k, 0), ty = theta.at(e, k, 1);
        for (const int nid : prob.cell->elems[y1[std::size_t(k)]]) {
            const int base = prob.space.dof_base[nid];
            if (base < 0) continue;
            out[base] += w * tx;
            out[base + 1] += w * ty;
        }
    }
    return out;
}

struct TsRhs {
    Vector mac;                // macro dual load
    std::vector<Vector> cells; // scaled cell dual loads (per unit macro area)
};

// Right-hand side of the coupled system for the given control.
TsRhs state_rhs(const TsWork& w, const TwoScaleControl& theta) {
    const LimitProblem& p = *w.prob;
    TsRhs rhs;
    rhs.mac = p.load_f;
    const auto q = control_y_integrals(p, theta);
    const Vector tq = scatter_elem_means(*p.macro, q);
    for (std::size_t i = 0; i < rhs.mac.size(); ++i) rhs.mac[i] += tq[i];
    p.Khom.zero_constrained(rhs.mac);
    const double ik = w.inv_kappa();
    if (ik > 0.0) {
        rhs.cells.resize(p.macro->elem_count());
        for (int e = 0; e < p.macro->elem_count(); ++e) {
            Vector le = p.space.const_load(p.f_mean[std::size_t(e)]);
            const Vector lt = control_cell_load(p, theta, e);
            for (std::size_t i = 0; i < le.size(); ++i) le[i] = ik * (le[i] + lt[i]);
            rhs.cells[std::size_t(e)] = std::move(le);
        }
    }
    return rhs;
}

// Macro coupling vector (1/kappa) * scatter(int_Y1 W_e dy).
Vector w_coupling(const TsWork& w, const std::vector<Vector>& cells) {
    const LimitProblem& p = *w.prob;
    std::vector<Vec2> q(p.macro->elem_count(), Vec2{0.0, 0.0});
    for (int e = 0; e < p.macro->elem_count(); ++e)
        q[std::size_t(e)] = p.space.field_integral(cells[std::size_t(e)]);
    Vector out = scatter_elem_means(*p.macro, q);
    const double ik = w.inv_kappa();
    for (double& v : out) v *= ik;
    p.Khom.zero_constrained(out);
    return out;
}

// Block Gauss-Seidel for the fixed-s coupled system; SPD in the block sense,
// so the sweep converges and the final residual is measured on both blocks.
void gs_solve(const TsWork& w, const TsRhs& rhs, TsVector& x, double tol, double* final_res) {
    const LimitProblem& p = *w.prob;
    const double ik = w.inv_kappa();
    const int ne = p.macro->elem_count();
    if (x.mac.size() != std::size_t(p.macro->dof_count()))
        x.mac.assign(p.macro->dof_count(), 0.0);
    if (ik > 0.0 && int(x.cells.size()) != ne)
        x.cells.assign(std::size_t(ne), Vector(p.space.dof_count(), 0.0));

    const InclusionCellOperator* cell_op = nullptr;
    if (ik > 0.0) cell_op = &w.cache->at(w.s);

    double rhs_norm = norm2(rhs.mac);
    if (ik > 0.0) {
        double s2 = rhs_norm * rhs_norm;
        for (const auto& rc : rhs.cells) {
            const double n = norm2(rc);
            s2 += n * n;
        }
        rhs_norm = std::sqrt(s2);
    }
    if (rhs_norm == 0.0) rhs_norm = 1.0;

    const int max_sweeps = 400;
    double res = 0.0;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        // Macro block.
        Vector b = rhs.mac;
        if (ik > 0.0) {
            const Vector cpl = w_coupling(w, x.cells);
            axpy(-w.c_mass, cpl, b);
        }
        ShiftedOperator mop{&p.Khom, &p.M, w.c_mass, std::nullopt};
        x.mac = solve_shifted(mop, b, 0.1 * tol, nullptr, &x.mac);

        if (ik > 0.0) {
            // Cell blocks.
            for (int e = 0; e < ne; ++e) {
                Vector be = rhs.cells[std::size_t(e)];
                const Vec2 u0m = elem_mean(*p.macro, x.mac, e);
                const Vector cu = p.space.const_load(u0m);
                axpy(-w.c_mass * ik, cu, be);
                x.cells[std::size_t(e)] = cell_op->solve(be);
            }
        }

        // Coupled residual.
        Vector rm = rhs.mac;
        {
            ShiftedOperator mop2{&p.Khom, &p.M, w.c_mass, std::nullopt};
            const Vector ax = apply_shifted(mop2, x.mac);
            axpy(-1.0, ax, rm);
            if (ik > 0.0) {
                const Vector cpl = w_coupling(w, x.cells);
                axpy(-w.c_mass, cpl, rm);
            }
        }
        double r2 = dot(rm, rm);
        if (ik > 0.0) {
            for (int e = 0; e < ne; ++e) {
                Vector re = rhs.cells[std::size_t(e)];
                Vector kw = p.space.K.mul(x.cells[std::size_t(e)]);
                axpy(-1.0, kw, re);
                Vector mw = p.space.M.mul(x.cells[std::size_t(e)]);
                axpy(-w.c_mass * ik * ik, mw, re);
                const Vec2 u0m = elem_mean(*p.macro, x.mac, e);
                const Vector cu = p.space.const_load(u0m);
                axpy(-w.c_mass * ik, cu, re);
                r2 += dot(re, re);
            }
        }
        res = std::sqrt(r2) / rhs_norm;
        if (res <= tol) break;
        if (sweep == max_sweeps - 1)
            throw SolverError("two-scale block iteration stalled at residual " +
                              std::to_string(res));
    }
    if (final_res) *final_res = res;
}

// ||u0 + W/kappa||^2 over Omega x Y of a block vector.
double ukappa_norm2(const TsWork& w, const TsVector& x) {
    const LimitProblem& p = *w.prob;
    double out = p.M.inner(x.mac, x.mac);
    const double ik = w.inv_kappa();
    if (ik > 0.0) {
        const double elem_area = 1.0 / p.macro->elem_count();
        for (int e = 0; e < p.macro->elem_count(); ++e) {
            const auto& we = x.cells[std::size_t(e)];
            const Vec2 wbar = p.space.field_integral(we);
            const Vec2 u0m = elem_mean(*p.macro, x.mac, e);
            out += 2.0 * ik * elem_area * (u0m.x * wbar.x + u0m.y * wbar.y);
            out += ik * ik * elem_area * p.space.M.inner(we, we);
        }
    }
    return std::max(out, 0.0);
}

// Dual pairing of a scaled load block with a primal block.
double dual_dot(const LimitProblem& p, const TsRhs& l, const TsVector& x) {
    double out = dot(l.mac, x.mac);
    if (!l.cells.empty()) {
        const double elem_area = 1.0 / p.macro->elem_count();
        for (std::size_t e = 0; e < l.cells.size(); ++e)
            out += elem_area * dot(l.cells[e], x.cells[e]);
    }
    return out;
}

// Dual representation of T -> <u_kappa(X), w_kappa(T)>_{L2(Omega x Y)}.
TsRhs pairing_dual(const TsWork& w, const TsVector& x) {
    const LimitProblem& p = *w.prob;
    TsRhs r;
    r.mac = p.M.mul(x.mac);
    const double ik = w.inv_kappa();
    if (ik > 0.0) {
        std::vector<Vec2> q(p.macro->elem_count());
        for (int e = 0; e < p.macro->elem_count(); ++e)
            q[std::size_t(e)] = p.space.field_integral(x.cells[std::size_t(e)]);
        const Vector cpl = scatter_elem_means(*p.macro, q);
        axpy(ik, cpl, r.mac);
        r.cells.resize(p.macro->elem_count());
        for (int e = 0; e < p.macro->elem_count(); ++e) {
            const Vec2 u0m = elem_mean(*p.macro, x.mac, e);
            Vector ce = p.space.const_load(u0m);
            Vector mw = p.space.M.mul(x.cells[std::size_t(e)]);
            for (std::size_t i = 0; i < ce.size(); ++i) ce[i] = ik * (ce[i] + ik * mw[i]);
            r.cells[std::size_t(e)] = std::move(ce);
        }
    }
    p.Khom.zero_constrained(r.mac);
    return r;
}

// Dual of T -> <u_d, w_kappa(T)>.
TsRhs ud_dual(const TsWork& w) {
    const LimitProblem& p = *w.prob;
    TsRhs r;
    r.mac = p.M.mul(p.ud_nodal);
    const double ik = w.inv_kappa();
    if (ik > 0.0) {
        r.cells.resize(p.macro->elem_count());
        for (int e = 0; e < p.macro->elem_count(); ++e) {
            Vector ce = p.space.const_load(p.ud_mean[std::size_t(e)]);
            for (double& v : ce) v *= ik;
            r.cells[std::size_t(e)] = std::move(ce);
        }
    }
    p.Khom.zero_constrained(r.mac);
    return r;
}

}  // namespace

TwoScaleState solve_limit_state(const LimitProblem& prob, const TwoScaleControl& theta_hat) {
    return solve_limit_state(prob, theta_hat, nullptr);
}

TwoScaleState solve_limit_state(const LimitProblem& prob, const TwoScaleControl& theta_hat,
                                const TwoScaleState* hint) {
    TwoScaleState st;
    st.kappa = prob.kappa;
    if (!prob.kappa_finite()) {
        // Fully scale-separated system: W-hat = 0 and u0 solves the
        // homogenized macro problem with the Y1-mean of the control as load.
        const auto q = control_y_integrals(prob, theta_hat);
        Vector rhs = prob.load_f;
        const Vector tq = scatter_elem_means(*prob.macro, q);
        for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] += tq[i];
        prob.Khom.zero_constrained(rhs);
        NonlocalHints nh;
        if (hint && hint->u0.size() == rhs.size()) {
            nh.u = &hint->u0;
            nh.s = hint->s_star;
        }
        const NonlocalSolveResult r =
            nonlocal_solve(prob.Khom, prob.M, rhs, prob.phys.alpha, prob.phys.p,
                           prob.phys.tol_fp, prob.phys.tol_lin, nh);
        st.u0 = r.u;
        st.s_star = r.s_star;
        st.evaluations = r.evaluations;
        st.phi_residual = r.phi_residual;
        st.block_residual = r.lin_residual;
        return st;
    }

    TsWork work{&prob, &prob.operator_cache(), 0.0, 0.0};
    const TsRhs rhs = state_rhs(work, theta_hat);
    TsVector x;
    double s_hint = -1.0;
    if (hint && hint->u0.size() == std::size_t(prob.macro->dof_count()) &&
        hint->what.size() == std::size_t(prob.macro->elem_count())) {
        x.mac = hint->u0;
        x.cells = hint->what;
        s_hint = hint->s_star;
    }
    double block_res = 0.0;
    double last_s = -1.0;
    auto norm_at = [&](double s) {
        work.s = s;
        work.c_mass = prob.phys.alpha * std::pow(s, prob.phys.p);
        gs_solve(work, rhs, x, prob.phys.tol_lin, &block_res);
        last_s = s;
        return std::sqrt(ukappa_norm2(work, x));
    };

    if (prob.phys.alpha == 0.0) {
        st.s_star = norm_at(0.0);
        st.evaluations = 1;
    } else {
        const ScalarReductionReport rep =
            solve_scalar_reduction(norm_at, prob.phys.tol_fp, 200, s_hint);
        double n_final = rep.s_star + rep.phi_residual;
        if (last_s != rep.s_star) n_final = norm_at(rep.s_star);
        st.s_star = rep.s_star;
        st.phi_residual = std::abs(n_final - rep.s_star);
        st.evaluations = rep.evaluations + 1;
    }
    st.u0 = std::move(x.mac);
    st.what = std::move(x.cells);
    st.block_residual = block_res;
    return st;
}

double two_scale_field_norm(const LimitProblem& prob, const TwoScaleState& state) {
    TsWork work{&prob, nullptr, state.s_star, 0.0};
    TsVector x{state.u0, state.what};
    return std::sqrt(ukappa_norm2(work, x));
}

double limit_energy(const LimitProblem& prob, const TwoScaleState& state,
                    const TwoScaleControl& theta_hat) {
    double energy = 0.5 * prob.Khom.inner(state.u0, state.u0);
    const double ik = prob.kappa_finite() ? 1.0 / prob.kappa : 0.0;
    const double elem_area = 1.0 / prob.macro->elem_count();
    if (ik > 0.0 && state.w_allocated())
        for (int e = 0; e < prob.macro->elem_count(); ++e)
            energy += 0.5 * elem_area *
                      prob.space.K.inner(state.what[std::size_t(e)], state.what[std::size_t(e)]);

    const double s = two_scale_field_norm(prob, state);
    energy += prob.phys.alpha / (prob.phys.p + 2.0) * std::pow(s, prob.phys.p + 2.0);

    // Load term l_kappa(u0, W-hat).
    double load = dot(state.u0, prob.load_f);
    const auto q = control_y_integrals(prob, theta_hat);
    const Vector tq = scatter_elem_means(*prob.macro, q);
    load += dot(state.u0, tq);
    if (ik > 0.0 && state.w_allocated())
        for (int e = 0; e < prob.macro->elem_count(); ++e) {
            Vector le = prob.space.const_load(prob.f_mean[std::size_t(e)]);
            const Vector lt = control_cell_load(prob, theta_hat, e);
            for (std::size_t i = 0; i < le.size(); ++i) le[i] += lt[i];
            load += elem_area * ik * dot(le, state.what[std::size_t(e)]);
        }
    return energy - load;
}

TwoScaleAdjoint solve_limit_adjoint(const LimitProblem& prob, const TwoScaleState& state) {
    TwoScaleAdjoint adj;
    const double s = state.s_star;
    const double p = prob.phys.p;
    const double c_mass = prob.phys.alpha * std::pow(s, p);
    const double c_rank =
        (prob.phys.alpha > 0.0 && s > 0.0) ? prob.phys.alpha * p * std::pow(s, p - 2.0) : 0.0;

    if (!prob.kappa_finite()) {
        ShiftedOperator op{&prob.Khom, &prob.M, c_mass, std::nullopt};
        Vector mu;
        if (c_rank > 0.0) {
            mu = prob.M.mul(state.u0);
            prob.Khom.zero_constrained(mu);
            op.rank_one = RankOneUpdate{mu, c_rank};
        }
        Vector diff = state.u0;
        axpy(-1.0, prob.ud_nodal, diff);
        Vector rhs = prob.M.mul(diff);
        prob.Khom.zero_constrained(rhs);
        adj.v0 = solve_shifted(op, rhs, prob.phys.tol_lin);
        return adj;
    }

    TsWork work{&prob, &prob.operator_cache(), s, c_mass};
    const TsVector xu{state.u0, state.what};
    const TsRhs r = pairing_dual(work, xu);
    TsRhs b = r;
    {
        const TsRhs rd = ud_dual(work);
        axpy(-1.0, rd.mac, b.mac);
        for (std::size_t e = 0; e < b.cells.size(); ++e) axpy(-1.0, rd.cells[e], b.cells[e]);
    }

    TsVector xb, xr;
    gs_solve(work, b, xb, prob.phys.tol_lin, nullptr);
    if (c_rank > 0.0) {
        // Sherman-Morrison over the fixed-s block solve.
        gs_solve(work, r, xr, prob.phys.tol_lin, nullptr);
        const double rb = dual_dot(prob, r, xb);
        const double rr = dual_dot(prob, r, xr);
        const double factor = c_rank * rb / (1.0 + c_rank * rr);
        axpy(-factor, xr.mac, xb.mac);
        for (std::size_t e = 0; e < xb.cells.size(); ++e)
            axpy(-factor, xr.cells[e], xb.cells[e]);
    }
    adj.v0 = std::move(xb.mac);
    adj.zhat = std::move(xb.cells);
    return adj;
}

TwoScaleLinearized solve_limit_linearized(const LimitProblem& prob, const TwoScaleState& state,
                                          const TwoScaleControl& h) {
    const double s = state.s_star;
    const double p = prob.phys.p;
    const double c_mass = prob.phys.alpha * std::pow(s, p);
    const double c_rank =
        (prob.phys.alpha > 0.0 && s > 0.0) ? prob.phys.alpha * p * std::pow(s, p - 2.0) : 0.0;
    TwoScaleLinearized out;

    if (!prob.kappa_finite()) {
        ShiftedOperator op{&prob.Khom, &prob.M, c_mass, std::nullopt};
        Vector mu;
        if (c_rank > 0.0) {
            mu = prob.M.mul(state.u0);
            prob.Khom.zero_constrained(mu);
            op.rank_one = RankOneUpdate{mu, c_rank};
        }
        const auto q = control_y_integrals(prob, h);
        Vector rhs = scatter_elem_means(*prob.macro, q);
        prob.Khom.zero_constrained(rhs);
        out.du0 = solve_shifted(op, rhs, prob.phys.tol_lin);
        return out;
    }

    TsWork work{&prob, &prob.operator_cache(), s, c_mass};
    TsRhs rhs;
    {
        const auto q = control_y_integrals(prob, h);
        rhs.mac = scatter_elem_means(*prob.macro, q);
        prob.Khom.zero_constrained(rhs.mac);
        rhs.cells.resize(prob.macro->elem_count());
        const double ik = work.inv_kappa();
        for (int e = 0; e < prob.macro->elem_count(); ++e) {
            Vector le = control_cell_load(prob, h, e);
            for (double& v : le) v *= ik;
            rhs.cells[std::size_t(e)] = std::move(le);
        }
    }
    TsVector xb, xr;
    gs_solve(work, rhs, xb, prob.phys.tol_lin, nullptr);
    if (c_rank > 0.0) {
        const TsVector xu{state.u0, state.what};
        const TsRhs r = pairing_dual(work, xu);
        gs_solve(work, r, xr, prob.phys.tol_lin, nullptr);
        const double rb = dual_dot(prob, r, xb);
        const double rr = dual_dot(prob, r, xr);
        const double factor = c_rank * rb / (1.0 + c_rank * rr);
        axpy(-factor, xr.mac, xb.mac);
        for (std::size_t e = 0; e < xb.cells.size(); ++e)
            axpy(-factor, xr.cells[e], xb.cells[e]);
    }
    out.du0 = std::move(xb.mac);
    out.dwhat = std::move(xb.cells);
    return out;
}

TwoScaleControl limit_reduced_gradient(const LimitProblem& prob, const TwoScaleControl& theta_hat,
                                       const TwoScaleState& state, const TwoScaleAdjoint& adj) {
    (void)state;
    TwoScaleControl g = prob.zero_control();
    const double ik = prob.kappa_finite() ? 1.0 / prob.kappa : 0.0;
    const auto& y1 = prob.kappa_finite() ? prob.space.y1_elements
                                         : prob.cell->elements_tagged(Region::inclusion);
    for (int e = 0; e < prob.macro->elem_count(); ++e) {
        const Vec2 v0m = elem_mean(*prob.macro, adj.v0, e);
        for (int k = 0; k < prob.y1_elems; ++k) {
            double zx = 0.0, zy = 0.0;
            if (ik > 0.0 && !adj.zhat.empty()) {
                const auto& conn = prob.cell->elems[y1[std::size_t(k)]];
                for (const int nid : conn) {
                    const int base = prob.space.dof_base[nid];
                    if (base < 0) continue;
                    zx += 0.25 * adj.zhat[std::size_t(e)][base];
                    zy += 0.25 * adj.zhat[std::size_t(e)][base + 1];
                }
            }
            g.at(e, k, 0) = prob.phys.gamma * theta_hat.at(e, k, 0) + v0m.x + ik * zx;
            g.at(e, k, 1) = prob.phys.gamma * theta_hat.at(e, k, 1) + v0m.y + ik * zy;
        }
    }
    return g;
}

double limit_cost(const LimitProblem& prob, const TwoScaleControl& theta_hat,
                  const TwoScaleState& state) {
    // ||u_kappa - u_d||^2 = ||u0 - ud||^2_M + cross and cell terms.
    Vector diff = state.u0;
    axpy(-1.0, prob.ud_nodal, diff);
    double track2 = prob.M.inner(diff, diff);
    const double ik = prob.kappa_finite() ? 1.0 / prob.kappa : 0.0;
    if (ik > 0.0 && state.w_allocated()) {
        const double elem_area = 1.0 / prob.macro->elem_count();
        for (int e = 0; e < prob.macro->elem_count(); ++e) {
            const auto& we = state.what[std::size_t(e)];
            const Vec2 wbar = prob.space.field_integral(we);
            const Vec2 dm = elem_mean(*prob.macro, diff, e);
            track2 += 2.0 * ik * elem_area * (dm.x * wbar.x + dm.y * wbar.y);
            track2 += ik * ik * elem_area * prob.space.M.inner(we, we);
        }
    }
    const double cn = prob.control_norm(theta_hat);
    return 0.5 * std::max(track2, 0.0) + 0.5 * prob.phys.gamma * cn * cn;
}

LimitOcpResult solve_limit_ocp(const LimitProblem& prob, const TwoScaleControl& theta0,
                               int max_iterations) {
    struct Cache {
        Vector theta;
        TwoScaleState state;
        bool valid = false;
    } cache;
    auto state_at = [&](const Vector& tv) -> const TwoScaleState& {
        if (!cache.valid || cache.theta != tv) {
            TwoScaleControl t = prob.zero_control();
            t.v = tv;
            cache.state = solve_limit_state(prob, t, cache.valid ? &cache.state : nullptr);
            cache.theta = tv;
            cache.valid = true;
        }
        return cache.state;
    };
    auto wrap = [&](const Vector& tv) {
        TwoScaleControl t = prob.zero_control();
        t.v = tv;
        return t;
    };

    DescentCallbacks cb;
    cb.gamma = prob.phys.gamma;
    cb.inner = [&prob](const Vector& x, const Vector& y) {
        TwoScaleControl a = prob.zero_control(), b = prob.zero_control();
        a.v = x;
        b.v = y;
        return prob.control_inner(a, b);
    };
    cb.cost = [&](const Vector& tv) { return limit_cost(prob, wrap(tv), state_at(tv)); };
    cb.full = [&](const Vector& tv) {
        const TwoScaleState& st = state_at(tv);
        const TwoScaleControl t = wrap(tv);
        const TwoScaleAdjoint adj = solve_limit_adjoint(prob, st);
        const TwoScaleControl g = limit_reduced_gradient(prob, t, st, adj);
        DescentEvaluation ev;
        ev.cost = limit_cost(prob, t, st);
        ev.gradient = g.v;
        ev.residual = prob.control_norm(g);
        return ev;
    };

    DescentOptions dopts;
    dopts.tol_opt = 1e-8 * (1.0 + prob.ud_norm());
    dopts.max_iterations = max_iterations;
    const DescentResult dr = armijo_descent(cb, theta0.v, dopts);

    LimitOcpResult res;
    res.Theta = wrap(dr.control);
    res.state = state_at(dr.control);
    res.adjoint = solve_limit_adjoint(prob, res.state);
    res.cost = limit_cost(prob, res.Theta, res.state);
    res.cost_history = dr.cost_history;
    res.iterations = dr.iterations;
    res.converged = dr.converged;
    const TwoScaleControl g = limit_reduced_gradient(prob, res.Theta, res.state, res.adjoint);
    res.optimality_residual = prob.control_norm(g);
    return res;
}

double limit_lipschitz_probe(const LimitProblem& prob, const TwoScaleControl& t1,
                             const TwoScaleControl& t2) {
    TwoScaleControl d = prob.zero_control();
    for (std::size_t i = 0; i < d.v.size(); ++i) d.v[i] = t1.v[i] - t2.v[i];
    const double dn = prob.control_norm(d);
    if (dn == 0.0) throw ValidationError("limit lipschitz probe requires distinct controls");
    const TwoScaleState s1 = solve_limit_state(prob, t1);
    const TwoScaleState s2 = solve_limit_state(prob, t2);
    // || (u0_1 - u0_2) + (W1 - W2)/kappa ||_{L2(Omega x Y)}
    TwoScaleState diff;
    diff.kappa = prob.kappa;
    diff.u0 = s1.u0;
    axpy(-1.0, s2.u0, diff.u0);
    if (s1.w_allocated()) {
        diff.what = s1.what;
        for (std::size_t e = 0; e < diff.what.size(); ++e)
            axpy(-1.0, s2.what[e], diff.what[e]);
    }
    return two_scale_field_norm(prob, diff) / dn;
}

DisplacementField warping_field(const CorrectorSet& correctors,
                                const std::array<double, 3>& strain) {
    DisplacementField out(correctors.chi[0].size(), 0.0);
    for (int q = 0; q < 3; ++q) axpy(strain[std::size_t(q)], correctors.chi[q], out);
    return out;
}

}  // namespace hcoc
