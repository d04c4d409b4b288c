// Command-line driver: mesh generation, state/OCP solves on the eps-delta
// problem, cell problems and the homogenized tensor, two-scale limit solves,
// unfolding error reports, and convergence sweeps.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "hcoc/ocp.hpp"
#include "hcoc/result_io.hpp"
#include "hcoc/sweep.hpp"

namespace {

using namespace hcoc;

double parse_kappa_arg(const std::string& s) {
    return s == "inf" ? ScaleParams::infinite : std::stod(s);
}

ControlField control_from_spec(const MacroMesh& mesh, const StateProblem& prob,
                               const std::string& spec) {
    ControlField theta = ControlField::zero(mesh);
    if (spec == "zero") return theta;
    const DisplacementField full = interpolate(mesh, parse_field(spec));
    for (const int d : prob.inclusion_dofs) theta.v[d] = full[d];
    return theta;
}

struct MeshArgs {
    std::string shape = "square";
    double param = 0.25;
    int res = 8;
    int n = 0;  // 0: write the cell mesh only
    std::string gamma0 = "L";
    std::string out;
};

int cmd_mesh(const MeshArgs& a) {
    CellGeometry g;
    g.shape = a.shape == "none" ? CellGeometry::Shape::square : shape_from_string(a.shape);
    g.param = a.shape == "none" ? 0.0 : a.param;
    g.resolution = a.res;
    const CellMesh cell = build_cell_mesh(g);
    if (a.n <= 0) {
        save_mesh(a.out, cell);
        std::cout << "cell mesh: res " << g.resolution << ", |Y1_h| = " << cell.area_y1
                  << ", written to " << a.out << "\n";
    } else {
        const MacroMesh macro = build_macro_mesh(cell, a.n, faces_from_string(a.gamma0));
        save_mesh(a.out, macro);
        std::cout << "macro mesh: n " << a.n << " (eps = " << macro.epsilon << "), "
                  << macro.elem_count() << " elements, inclusion area "
                  << macro.inclusion_area() << ", written to " << a.out << "\n";
    }
    return 0;
}

struct StateArgs {
    std::string mesh;
    double delta = 1.0;
    double alpha = 0.0, p = 2.0;
    std::string f = "preset:const", theta = "zero";
    std::string a_spec = "iso:lambda=1,mu=1";
    double tol_lin = 1e-10, tol_fp = 1e-10;
    std::string out;
};

int cmd_state(const StateArgs& a) {
    const MeshFile mf = load_mesh(a.mesh);
    if (!mf.is_macro) throw ValidationError("state solve needs a macro mesh");
    PhysicsParams phys;
    phys.alpha = a.alpha;
    phys.p = a.p;
    phys.f = parse_field(a.f);
    phys.tol_lin = a.tol_lin;
    phys.tol_fp = a.tol_fp;
    const ContrastField contrast = ContrastField::uniform(HookeTensor::parse(a.a_spec), a.delta);
    const StateProblem prob(mf.macro, contrast, phys);
    const ControlField theta = control_from_spec(mf.macro, prob, a.theta);
    const StateSolution sol = solve_state(prob, theta);

    StateFile sf;
    sf.mesh_path = a.mesh;
    sf.eps = mf.macro.epsilon;
    sf.delta = a.delta;
    sf.alpha = a.alpha;
    sf.p = a.p;
    sf.u = sol.u;
    sf.s_star = sol.s_star;
    sf.energy = sol.energy;
    write_state_csv(a.out, mf.macro, sf);
    std::cout << "state: s_star = " << sol.s_star << ", total energy = " << sol.energy.total
              << ", " << sol.iterations << " scalar evaluations, written to " << a.out << "\n";
    return 0;
}

struct OcpArgs {
    std::string mesh;
    double delta = 1.0;
    double alpha = 0.0, p = 2.0, gamma = 1e-2;
    std::string f = "preset:const", ud = "preset:trig";
    std::string a_spec = "iso:lambda=1,mu=1";
    double tol = 1e-8;
    int multistart = 0;
    int max_iter = 400;
    std::string out;
    std::string state_out;
};

int cmd_ocp(const OcpArgs& a) {
    const MeshFile mf = load_mesh(a.mesh);
    if (!mf.is_macro) throw ValidationError("ocp solve needs a macro mesh");
    PhysicsParams phys;
    phys.alpha = a.alpha;
    phys.p = a.p;
    phys.gamma = a.gamma;
    phys.f = parse_field(a.f);
    phys.u_d = parse_field(a.ud);
    const ContrastField contrast = ContrastField::uniform(HookeTensor::parse(a.a_spec), a.delta);
    const StateProblem prob(mf.macro, contrast, phys);
    OptimizeOptions opts;
    opts.tol = a.tol;
    opts.multistart = a.multistart;
    opts.max_iterations = a.max_iter;
    const OcpResult res = optimize_control(prob, ControlField::zero(mf.macro), opts);

    std::ofstream os(a.out);
    if (!os) throw IoError("cannot open '" + a.out + "' for writing");
    os.precision(17);
    os << "# hcoc-ocp 1\n# mesh " << a.mesh << "\n";
    os << "# cost " << res.cost << "\n# optimality_residual " << res.optimality_residual
       << "\n# converged " << (res.converged ? 1 : 0) << "\n";
    os << "iteration,cost,grad_norm,opt_residual\n";
    for (std::size_t k = 0; k < res.cost_history.size(); ++k) {
        const double g = k < res.gradient_history.size() ? res.gradient_history[k] : 0.0;
        os << k << "," << res.cost_history[k] << "," << g << "," << g << "\n";
    }
    os << "# theta " << mf.macro.node_count() << "\n";
    for (int id = 0; id < mf.macro.node_count(); ++id)
        os << id << "," << res.Theta.v[2 * id] << "," << res.Theta.v[2 * id + 1] << "\n";

    if (!a.state_out.empty()) {
        StateFile sf;
        sf.mesh_path = a.mesh;
        sf.eps = mf.macro.epsilon;
        sf.delta = a.delta;
        sf.alpha = a.alpha;
        sf.p = a.p;
        sf.u = res.u.u;
        sf.s_star = res.u.s_star;
        sf.energy = res.u.energy;
        sf.has_theta = true;
        sf.theta = res.Theta;
        write_state_csv(a.state_out, mf.macro, sf);
    }
    std::cout << "ocp: cost = " << res.cost << ", residual = " << res.optimality_residual
              << ", " << res.iterations << " iterations, written to " << a.out << "\n";
    return 0;
}

struct CellArgs {
    std::string mesh;
    std::string a_spec = "iso:lambda=1,mu=1";
    std::string out;
};

int cmd_cell(const CellArgs& a) {
    const MeshFile mf = load_mesh(a.mesh);
    const HookeTensor tensor = HookeTensor::parse(a.a_spec);
    const CorrectorSet correctors = solve_correctors(mf.cell, tensor);
    const HomogenizedTensor ahom = homogenized_tensor(correctors, mf.cell, tensor);
    const HomValidationReport rep = validate_hom_tensor(ahom);
    save_hom_tensor(a.out, ahom);
    std::cout << "A^hom written to " << a.out << "; ellipticity constant "
              << rep.ellipticity_constant << ", symmetry residual " << rep.symmetry_residual
              << ", flux/energy gap " << rep.flux_energy_gap << "\n";
    return 0;
}

struct LimitArgs {
    std::string cell;
    int macro_n = 16;
    std::string kappa = "inf";
    double alpha = 0.0, p = 2.0, gamma = 1e-2;
    std::string f = "preset:const", ud = "preset:trig";
    std::string a_spec = "iso:lambda=1,mu=1";
    bool run_ocp = false;
    std::string gamma0 = "L";
    std::string out;
};

int cmd_limit(const LimitArgs& a) {
    const MeshFile mf = load_mesh(a.cell);
    const HookeTensor tensor = HookeTensor::parse(a.a_spec);
    const CorrectorSet correctors = solve_correctors(mf.cell, tensor);
    const HomogenizedTensor ahom = homogenized_tensor(correctors, mf.cell, tensor);
    const MacroMesh macro = plain_macro_mesh(a.macro_n, faces_from_string(a.gamma0));
    PhysicsParams phys;
    phys.alpha = a.alpha;
    phys.p = a.p;
    phys.gamma = a.gamma;
    phys.f = parse_field(a.f);
    phys.u_d = parse_field(a.ud);
    const LimitProblem prob(macro, mf.cell, ahom, tensor, phys, parse_kappa_arg(a.kappa));

    LimitFile lf;
    lf.cell_path = a.cell;
    lf.macro_n = a.macro_n;
    lf.kappa = prob.kappa;
    if (a.run_ocp) {
        const LimitOcpResult res = solve_limit_ocp(prob, prob.zero_control());
        lf.state = res.state;
        lf.value = res.cost;
        lf.has_theta_hat = true;
        lf.theta_hat = res.Theta;
        std::cout << "limit ocp: cost = " << res.cost
                  << ", residual = " << res.optimality_residual << "\n";
    } else {
        const TwoScaleControl theta = prob.zero_control();
        lf.state = solve_limit_state(prob, theta);
        lf.value = limit_energy(prob, lf.state, theta);
        std::cout << "limit state: s_star = " << lf.state.s_star << ", m_kappa = " << lf.value
                  << "\n";
    }
    write_limit_csv(a.out, prob, lf);
    std::cout << "written to " << a.out << "\n";
    return 0;
}

struct UnfoldArgs {
    std::string state;
    std::string limit;
    std::string out;
};

int cmd_unfold(const UnfoldArgs& a) {
    const StateFile sf = read_state_csv(a.state);
    const LimitFile lf = read_limit_csv(a.limit);
    const MeshFile micro = load_mesh(sf.mesh_path);
    if (!micro.is_macro) throw ValidationError("state file references a cell mesh");
    const MeshFile cellf = load_mesh(lf.cell_path);
    const MacroMesh limit_macro = plain_macro_mesh(lf.macro_n, micro.macro.gamma0_faces);

    // Only the DOF layout of the inclusion space is needed to evaluate W-hat.
    InclusionCellSpace space;
    LimitFieldView view{&limit_macro, &cellf.cell, nullptr, lf.kappa};
    if (!std::isinf(lf.kappa) && lf.state.w_allocated()) {
        space = InclusionCellSpace(cellf.cell, HookeTensor::isotropic(1.0, 1.0));
        view.space = &space;
    }

    const double state_err = two_scale_state_error(sf.u, micro.macro, cellf.cell, view, lf.state);
    double control_err = -1.0;
    if (sf.has_theta && lf.has_theta_hat)
        control_err =
            two_scale_control_error(sf.theta, micro.macro, cellf.cell, view, lf.theta_hat);

    std::ofstream os(a.out);
    if (!os) throw IoError("cannot open '" + a.out + "' for writing");
    os.precision(17);
    os << "eps,delta,kappa,state_error,control_error\n";
    os << sf.eps << "," << sf.delta << ","
       << (std::isinf(lf.kappa) ? std::string("inf") : std::to_string(lf.kappa)) << ","
       << state_err << ",";
    if (control_err >= 0.0) os << control_err;
    os << "\n";
    std::cout << "state error " << state_err;
    if (control_err >= 0.0) std::cout << ", control error " << control_err;
    std::cout << ", written to " << a.out << "\n";
    return 0;
}

struct SweepArgs {
    std::string config;
    std::string out_dir;
    bool energy_only = false;
    bool ocp_only = false;
};

int cmd_sweep(const SweepArgs& a) {
    const SweepConfig cfg = SweepConfig::parse_file(a.config);
    std::filesystem::create_directories(a.out_dir);
    std::vector<SweepOutcome> outcomes;
    if (!a.ocp_only) {
        SweepOutcome energy = run_energy_sweep(cfg);
        write_energy_csv(energy, a.out_dir + "/energy.csv");
        std::cout << "energy-sweep " << energy.verdict << "\n";
        outcomes.push_back(std::move(energy));
    }
    if (!a.energy_only) {
        SweepOutcome ocp = run_ocp_sweep(cfg);
        write_ocp_csv(ocp, a.out_dir + "/ocp.csv");
        std::cout << "ocp-sweep " << ocp.verdict << "\n";
        outcomes.push_back(std::move(ocp));
    }
    write_summary(outcomes, a.out_dir + "/summary.txt");
    bool pass = true;
    for (const auto& o : outcomes) pass = pass && o.pass;
    return pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"High-contrast semilinear elasticity: state/OCP solves, periodic "
                 "homogenization, two-scale limits and convergence verification"};
    app.require_subcommand(1);

    MeshArgs mesh_args;
    auto* mesh = app.add_subcommand("mesh", "build cell/macro meshes");
    mesh->add_option("--shape", mesh_args.shape, "square | disk | none");
    mesh->add_option("--radius,--halfwidth,--param", mesh_args.param,
                     "inclusion radius or half-width");
    mesh->add_option("--res", mesh_args.res, "elements per cell edge (power of two)");
    mesh->add_option("--n", mesh_args.n, "cells per side (omit for a cell mesh)");
    mesh->add_option("--gamma0", mesh_args.gamma0, "Dirichlet faces, e.g. L or LB");
    mesh->add_option("--out", mesh_args.out)->required();

    StateArgs state_args;
    auto* state = app.add_subcommand("state", "solve the semilinear state system");
    state->add_option("--mesh", state_args.mesh)->required();
    state->add_option("--delta", state_args.delta, "contrast in (0,1]");
    state->add_option("--alpha", state_args.alpha);
    state->add_option("--p", state_args.p);
    state->add_option("--f", state_args.f, "zero | preset:const[:cx,cy] | preset:trig[:amp]");
    state->add_option("--theta", state_args.theta, "control preset on the inclusion");
    state->add_option("--A", state_args.a_spec, "base tensor, iso:lambda=..,mu=..");
    state->add_option("--tol-lin", state_args.tol_lin);
    state->add_option("--tol-fp", state_args.tol_fp);
    state->add_option("--out", state_args.out)->required();

    OcpArgs ocp_args;
    auto* ocp = app.add_subcommand("ocp", "solve the eps-delta optimal control problem");
    ocp->add_option("--mesh", ocp_args.mesh)->required();
    ocp->add_option("--delta", ocp_args.delta);
    ocp->add_option("--alpha", ocp_args.alpha);
    ocp->add_option("--p", ocp_args.p);
    ocp->add_option("--gamma", ocp_args.gamma);
    ocp->add_option("--f", ocp_args.f);
    ocp->add_option("--ud", ocp_args.ud);
    ocp->add_option("--A", ocp_args.a_spec);
    ocp->add_option("--tol", ocp_args.tol, "optimality tolerance scale (x (1 + ||u_d||))");
    ocp->add_option("--multistart", ocp_args.multistart, "extra random starts");
    ocp->add_option("--max-iter", ocp_args.max_iter);
    ocp->add_option("--out", ocp_args.out)->required();
    ocp->add_option("--state-out", ocp_args.state_out, "also write the optimal state csv");

    CellArgs cell_args;
    auto* cellc = app.add_subcommand("cell", "solve cell problems and compute A^hom");
    cellc->add_option("--mesh", cell_args.mesh)->required();
    cellc->add_option("--A", cell_args.a_spec);
    cellc->add_option("--out", cell_args.out)->required();

    LimitArgs limit_args;
    auto* limit = app.add_subcommand("limit", "solve the two-scale limit problem");
    limit->add_option("--cell", limit_args.cell)->required();
    limit->add_option("--macro-n", limit_args.macro_n);
    limit->add_option("--kappa", limit_args.kappa, "positive number or inf");
    limit->add_option("--alpha", limit_args.alpha);
    limit->add_option("--p", limit_args.p);
    limit->add_option("--gamma", limit_args.gamma);
    limit->add_option("--f", limit_args.f);
    limit->add_option("--ud", limit_args.ud);
    limit->add_option("--A", limit_args.a_spec);
    limit->add_flag("--ocp", limit_args.run_ocp, "solve the limit OCP instead of the state");
    limit->add_option("--gamma0", limit_args.gamma0);
    limit->add_option("--out", limit_args.out)->required();

    UnfoldArgs unfold_args;
    auto* unfold = app.add_subcommand("unfold", "two-scale errors of a state against a limit");
    unfold->add_option("--state", unfold_args.state)->required();
    unfold->add_option("--limit", unfold_args.limit)->required();
    unfold->add_option("--out", unfold_args.out)->required();

    SweepArgs sweep_args;
    auto* sweep = app.add_subcommand(
        "sweep",
        "run (eps, delta) convergence sweeps; writes energy.csv, ocp.csv, summary.txt.\n"
        "Config file keys (key = value, one per line, # comments):\n"
        "  kappa       positive ratio delta/eps, or 'inf' (delta = eps^q)\n"
        "  n_list      comma-separated macro resolutions, e.g. 2,4,8\n"
        "  cell_shape  square | disk        cell_param  inclusion size\n"
        "  cell_res    elements per cell edge (power of two)\n"
        "  macro_n     limit macro resolution    delta_q  exponent for kappa=inf\n"
        "  alpha p gamma   nonlocal strength, exponent, control weight\n"
        "  f ud        field presets (zero | preset:const[:cx,cy] | preset:trig[:amp])\n"
        "  lambda mu   isotropic base tensor\n"
        "  tol_lin tol_fp tol_conv max_opt_iter seed gamma0");
    sweep->add_option("--config", sweep_args.config)->required();
    sweep->add_option("--out", sweep_args.out_dir)->required();
    sweep->add_flag("--energy-only", sweep_args.energy_only);
    sweep->add_flag("--ocp-only", sweep_args.ocp_only);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*mesh) return cmd_mesh(mesh_args);
        if (*state) return cmd_state(state_args);
        if (*ocp) return cmd_ocp(ocp_args);
        if (*cellc) return cmd_cell(cell_args);
        if (*limit) return cmd_limit(limit_args);
        if (*unfold) return cmd_unfold(unfold_args);
        if (*sweep) return cmd_sweep(sweep_args);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
