#include "hcoc/state.hpp"

#include <cmath>
#include <sstream>

namespace hcoc {

void PhysicsParams::validate() const {
    if (!(alpha >= 0.0)) throw ValidationError("alpha must be nonnegative");
    if (!(p >= 2.0)) throw ValidationError("nonlocal exponent p must be >= 2");
    if (!(gamma > 0.0)) throw ValidationError("gamma must be positive");
    if (!(tol_lin > 0.0) || !(tol_fp > 0.0)) throw ValidationError("tolerances must be positive");
}

VectorField zero_field() {
    return [](double, double) { return Vec2{0.0, 0.0}; };
}

VectorField parse_field(const std::string& spec) {
    if (spec == "zero" || spec.empty()) return zero_field();
    if (spec.rfind("preset:", 0) != 0)
        throw ValidationError("unknown field spec '" + spec + "'");
    std::string body = spec.substr(7);
    std::string name = body, args;
    if (const auto colon = body.find(':'); colon != std::string::npos) {
        name = body.substr(0, colon);
        args = body.substr(colon + 1);
    }
    if (name == "const") {
        double cx = 1.0, cy = 0.0;
        if (!args.empty()) {
            std::stringstream ss(args);
            char comma;
            if (!(ss >> cx >> comma >> cy) || comma != ',')
                throw ValidationError("const preset expects 'cx,cy'");
        }
        return [cx, cy](double, double) { return Vec2{cx, cy}; };
    }
    if (name == "trig") {
        double amp = 0.1;
        if (!args.empty()) amp = std::stod(args);
        return [amp](double x, double y) {
            const double pi = 3.14159265358979323846;
            return Vec2{amp * std::sin(pi * x) * std::sin(pi * y),
                        amp * std::sin(2.0 * pi * x) * std::sin(pi * y)};
        };
    }
    throw ValidationError("unknown preset '" + name + "'");
}

StateProblem::StateProblem(const MacroMesh& mesh_in, ContrastField contrast_in,
                           PhysicsParams phys_in)
    : mesh(&mesh_in), contrast(std::move(contrast_in)), phys(std::move(phys_in)) {
    phys.validate();
    contrast.validate();
    epsilon = mesh->epsilon;

    K = assemble(*mesh, contrast, Form::stiffness);
    M = assemble(*mesh, contrast, Form::mass);
    M1 = assemble(*mesh, contrast, Form::mass_on_inclusion);
    S1 = assemble_strain_product(*mesh, Region::inclusion);
    S2 = assemble_strain_product(*mesh, Region::matrix);
    K.eliminate(gamma0_dofs(*mesh));

    f_nodal = phys.f ? interpolate(*mesh, phys.f) : Vector(mesh->dof_count(), 0.0);
    ud_nodal = phys.u_d ? interpolate(*mesh, phys.u_d) : Vector(mesh->dof_count(), 0.0);
    load_f = M.mul(f_nodal);
    K.zero_constrained(load_f);

    block_jacobi = contrast.delta <= 1e-3;

    std::vector<std::uint8_t> incl(mesh->node_count(), 0);
    for (int e = 0; e < mesh->elem_count(); ++e)
        if (mesh->region[e] == Region::inclusion)
            for (const int nid : mesh->elems[e]) incl[nid] = 1;
    for (int nid = 0; nid < mesh->node_count(); ++nid)
        if (incl[nid]) {
            inclusion_dofs.push_back(2 * nid);
            inclusion_dofs.push_back(2 * nid + 1);
        }
}

Vector StateProblem::rhs(const ControlField& theta) const {
    Vector b = M1.mul(theta.v);
    for (std::size_t i = 0; i < b.size(); ++i) b[i] += load_f[i];
    K.zero_constrained(b);
    return b;
}

double StateProblem::control_norm(const ControlField& theta) const {
    return m_norm(M1, theta.v);
}

double StateProblem::ud_norm() const { return m_norm(M, ud_nodal); }

ScalarReductionReport solve_scalar_reduction(const std::function<double(double)>& norm_of_solution,
                                             double tol_fp, int max_evals, double s_hint) {
    ScalarReductionReport rep;
    double a = 0.0, fa = 0.0, b = 0.0, fb = 0.0;
    bool bracketed = false;

    if (s_hint >= 0.0) {
        // Grow a bracket around the hint; phi is strictly decreasing.
        double s = s_hint;
        double fs = norm_of_solution(s) - s;
        ++rep.evaluations;
        if (std::abs(fs) <= tol_fp) {
            rep.s_star = s;
            rep.phi_residual = std::abs(fs);
            return rep;
        }
        if (fs > 0.0) {
            a = s;
            fa = fs;
            double step = std::max(s, tol_fp * 1e4);
            for (int k = 0; k < 60 && rep.evaluations < max_evals; ++k, step *= 2.0) {
                b = a + step;
                fb = norm_of_solution(b) - b;
                ++rep.evaluations;
                if (fb <= 0.0) {
                    bracketed = true;
                    break;
                }
                a = b;
                fa = fb;
            }
        } else {
            b = s;
            fb = fs;
            for (int k = 0; k < 60 && rep.evaluations < max_evals; ++k) {
                const double cand = b * 0.5;
                if (cand <= tol_fp) break;
                const double fc = norm_of_solution(cand) - cand;
                ++rep.evaluations;
                if (fc >= 0.0) {
                    a = cand;
                    fa = fc;
                    bracketed = true;
                    break;
                }
                b = cand;
                fb = fc;
            }
            if (!bracketed) {
                a = 0.0;
                fa = norm_of_solution(0.0);
                ++rep.evaluations;
                bracketed = true;
            }
        }
        if (std::abs(fb) <= tol_fp) {
            rep.s_star = b;
            rep.phi_residual = std::abs(fb);
            return rep;
        }
    }

    if (!bracketed) {
        const double n0 = norm_of_solution(0.0);
        rep.evaluations += 1;
        if (n0 <= tol_fp) {
            rep.s_star = n0;
            rep.phi_residual = 0.0;
            return rep;
        }
        // phi(s) = norm(s) - s is strictly decreasing with phi(0) >= 0 and
        // phi(n0) <= 0 since norm is nonincreasing.
        a = 0.0;
        fa = n0;
        b = n0;
        fb = norm_of_solution(n0) - n0;
        ++rep.evaluations;
        if (fb > tol_fp)
            throw SolverError("scalar reduction bracket failure: phi(" + std::to_string(b) +
                              ") = " + std::to_string(fb) + " > 0");
        if (std::abs(fb) <= tol_fp) {
            rep.s_star = b;
            rep.phi_residual = std::abs(fb);
            return rep;
        }
    }
    int side = 0;
    while (rep.evaluations < max_evals) {
        double x = (a * fb - b * fa) / (fb - fa);
        if (!(x > a) || !(x < b)) x = 0.5 * (a + b);
        const double fx = norm_of_solution(x) - x;
        ++rep.evaluations;
        if (std::abs(fx) <= tol_fp || (b - a) <= 1e-16 * (1.0 + b)) {
            rep.s_star = x;
            rep.phi_residual = std::abs(fx);
            return rep;
        }
        if (fx > 0.0) {
            a = x;
            fa = fx;
            if (side == 1) fb *= 0.5;
            side = 1;
        } else {
            b = x;
            fb = fx;
            if (side == -1) fa *= 0.5;
            side = -1;
        }
    }
    throw SolverError("scalar reduction did not converge within " + std::to_string(max_evals) +
                      " evaluations; bracket [" + std::to_string(a) + ", " + std::to_string(b) +
                      "]");
}

NonlocalSolveResult nonlocal_solve(const SparseOperator& K, const SparseOperator& M,
                                   const Vector& rhs, double alpha, double p,
                                   double tol_fp, double tol_lin, const NonlocalHints& hints) {
    NonlocalSolveResult out;
    Vector u;
    if (hints.u && hints.u->size() == rhs.size()) u = *hints.u;
    CgReport cg;
    double last_s = -1.0;
    auto norm_at = [&](double s) {
        ShiftedOperator op{&K, &M, alpha * std::pow(s, p), std::nullopt, hints.block_jacobi};
        u = solve_shifted(op, rhs, tol_lin, &cg, u.empty() ? nullptr : &u);
        last_s = s;
        return m_norm(M, u);
    };
    if (alpha == 0.0) {
        const double n0 = norm_at(0.0);
        out.u = u;
        out.s_star = n0;
        out.evaluations = 1;
        out.lin_residual = cg.rel_residual;
        return out;
    }
    const ScalarReductionReport rep = solve_scalar_reduction(norm_at, tol_fp, 200, hints.s);
    // Re-solve at the root so the returned pair (u, s) is consistent.
    double n_final = rep.s_star + rep.phi_residual;
    if (last_s != rep.s_star) {
        n_final = norm_at(rep.s_star);
        out.evaluations = 1;
    }
    out.u = u;
    out.s_star = rep.s_star;
    out.evaluations += rep.evaluations;
    out.phi_residual = std::abs(n_final - rep.s_star);
    out.lin_residual = cg.rel_residual;
    return out;
}

StateSolution solve_state(const StateProblem& prob, const ControlField& theta) {
    return solve_state(prob, theta, nullptr);
}

StateSolution solve_state(const StateProblem& prob, const ControlField& theta,
                          const StateSolution* hint) {
    const Vector b = prob.rhs(theta);
    NonlocalHints nh;
    nh.block_jacobi = prob.block_jacobi;
    if (hint) {
        nh.u = &hint->u;
        nh.s = hint->s_star;
    }
    const NonlocalSolveResult r = nonlocal_solve(prob.K, prob.M, b, prob.phys.alpha, prob.phys.p,
                                                 prob.phys.tol_fp, prob.phys.tol_lin, nh);
    StateSolution sol;
    sol.u = r.u;
    sol.s_star = r.s_star;
    sol.iterations = r.evaluations;
    sol.phi_residual = r.phi_residual;
    sol.lin_residual = r.lin_residual;
    sol.energy = total_energy(prob, sol.u, theta);
    return sol;
}

StateSolution solve_state(const MacroMesh& mesh, const ContrastField& contrast,
                          const PhysicsParams& phys, const ControlField& theta) {
    const StateProblem prob(mesh, contrast, phys);
    return solve_state(prob, theta);
}

EnergyReport total_energy(const StateProblem& prob, const DisplacementField& u,
                          const ControlField& theta) {
    EnergyReport e;
    e.elastic = 0.5 * prob.K.inner(u, u);
    const double s = m_norm(prob.M, u);
    e.nonlocal = prob.phys.alpha / (prob.phys.p + 2.0) * std::pow(s, prob.phys.p + 2.0);
    e.load = dot(u, prob.load_f) + prob.M1.inner(theta.v, u);
    e.total = e.elastic + e.nonlocal - e.load;
    return e;
}

double control_to_state_lipschitz_probe(const StateProblem& prob, const ControlField& theta1,
                                        const ControlField& theta2) {
    Vector d = theta1.v;
    axpy(-1.0, theta2.v, d);
    const double dn = m_norm(prob.M1, d);
    if (dn == 0.0) throw ValidationError("lipschitz probe requires theta1 != theta2");
    const StateSolution u1 = solve_state(prob, theta1);
    const StateSolution u2 = solve_state(prob, theta2);
    Vector du = u1.u;
    axpy(-1.0, u2.u, du);
    return m_norm(prob.M, du) / dn;
}

double apriori_ratio(const StateProblem& prob, const DisplacementField& u,
                     const ControlField& theta) {
    const double num = prob.contrast.delta * std::sqrt(std::max(0.0, prob.S1.inner(u, u))) +
                       std::sqrt(std::max(0.0, prob.S2.inner(u, u)));
    const double den = m_norm(prob.M, prob.f_nodal) + prob.control_norm(theta);
    return den > 0.0 ? num / den : 0.0;
}

double adjoint_estimate_ratio(const StateProblem& prob, const DisplacementField& v,
                              const DisplacementField& u) {
    Vector diff = u;
    axpy(-1.0, prob.ud_nodal, diff);
    const double den = m_norm(prob.M, diff);
    const double num = prob.contrast.delta * std::sqrt(std::max(0.0, prob.S1.inner(v, v))) +
                       std::sqrt(std::max(0.0, prob.S2.inner(v, v)));
    return den > 0.0 ? num / den : 0.0;
}

double state_equation_residual(const StateProblem& prob, const DisplacementField& u,
                               double s, const ControlField& theta) {
    Vector r = prob.K.mul(u);
    Vector mu = prob.M.mul(u);
    prob.K.zero_constrained(mu);
    const double c = prob.phys.alpha * std::pow(s, prob.phys.p);
    axpy(c, mu, r);
    const Vector b = prob.rhs(theta);
    axpy(-1.0, b, r);
    const double bn = norm2(b);
    return norm2(r) / (bn > 0.0 ? bn : 1.0);
}

}  // namespace hcoc
