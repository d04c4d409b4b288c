#include "hcoc/sweep.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace hcoc {

namespace {

double wall_time() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
    return out;
}

}  // namespace

SweepConfig SweepConfig::parse(std::istream& is) {
    SweepConfig cfg;
    std::string line;
    while (std::getline(is, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            const auto b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key.empty()) continue;
        if (key == "kappa") cfg.kappa = (val == "inf") ? ScaleParams::infinite : std::stod(val);
        else if (key == "n_list") cfg.n_list = parse_int_list(val);
        else if (key == "cell_shape") cfg.cell.shape = shape_from_string(val);
        else if (key == "cell_param") cfg.cell.param = std::stod(val);
        else if (key == "cell_res") cfg.cell.resolution = std::stoi(val);
        else if (key == "macro_n") cfg.macro_n = std::stoi(val);
        else if (key == "delta_q") cfg.delta_q = std::stod(val);
        else if (key == "alpha") cfg.alpha = std::stod(val);
        else if (key == "p") cfg.p = std::stod(val);
        else if (key == "gamma") cfg.gamma = std::stod(val);
        else if (key == "f") cfg.f_spec = val;
        else if (key == "ud") cfg.ud_spec = val;
        else if (key == "lambda") cfg.lambda = std::stod(val);
        else if (key == "mu") cfg.mu = std::stod(val);
        else if (key == "tol_lin") cfg.tol_lin = std::stod(val);
        else if (key == "tol_fp") cfg.tol_fp = std::stod(val);
        else if (key == "tol_conv") cfg.tol_conv = std::stod(val);
        else if (key == "max_opt_iter") cfg.max_opt_iter = std::stoi(val);
        else if (key == "seed") cfg.seed = unsigned(std::stoul(val));
        else if (key == "gamma0") cfg.gamma0_faces = faces_from_string(val);
        else throw IoError("unknown sweep config key '" + key + "'");
    }
    cfg.validate();
    return cfg;
}

SweepConfig SweepConfig::parse_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open '" + path + "'");
    return parse(is);
}

void SweepConfig::validate() const {
    cell.validate();
    if (n_list.empty()) throw ValidationError("n_list must not be empty");
    for (std::size_t i = 0; i < n_list.size(); ++i) {
        if (n_list[i] < 1) throw ValidationError("macro n must be >= 1");
        if (i > 0 && n_list[i] <= n_list[i - 1])
            throw ValidationError("n_list must be strictly increasing");
    }
    // Regime certification: delta/eps -> kappa in (0, inf] and eps <= C delta.
    if (std::isinf(kappa)) {
        if (!(delta_q > 0.0 && delta_q < 1.0))
            throw ValidationError(
                "kappa = inf requires delta = eps^q with q in (0,1); got q = " +
                std::to_string(delta_q));
    } else if (!(kappa > 0.0)) {
        throw ValidationError("kappa must be positive or inf");
    }
    for (const int n : n_list) {
        const double d = delta_of(1.0 / n);
        if (!(d > 0.0 && d <= 1.0))
            throw ValidationError("delta rule leaves (0,1] at n = " + std::to_string(n));
    }
    if (!(macro_n >= 1)) throw ValidationError("macro_n must be >= 1");
}

double SweepConfig::delta_of(double eps) const {
    return std::isinf(kappa) ? std::pow(eps, delta_q) : kappa * eps;
}

PhysicsParams SweepConfig::physics() const {
    PhysicsParams phys;
    phys.alpha = alpha;
    phys.p = p;
    phys.gamma = gamma;
    phys.f = parse_field(f_spec);
    phys.u_d = parse_field(ud_spec);
    phys.tol_lin = tol_lin;
    phys.tol_fp = tol_fp;
    return phys;
}

DisplacementField random_smooth_field(const MacroMesh& mesh, std::uint8_t gamma0_faces,
                                      unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    // Random bivariate quadratics per component, multiplied by the product
    // of the Gamma0 face factors so the field is admissible.
    std::array<std::array<double, 9>, 2> coeff;
    for (auto& comp : coeff)
        for (double& c : comp) c = dist(rng);
    auto factor = [gamma0_faces](double x, double y) {
        double f = 1.0;
        if (gamma0_faces & face::left) f *= x;
        if (gamma0_faces & face::right) f *= 1.0 - x;
        if (gamma0_faces & face::bottom) f *= y;
        if (gamma0_faces & face::top) f *= 1.0 - y;
        return f;
    };
    DisplacementField u(mesh.dof_count());
    for (int id = 0; id < mesh.node_count(); ++id) {
        const Vec2 pnt = mesh.node(id);
        const double fac = factor(pnt.x, pnt.y);
        for (int c = 0; c < 2; ++c) {
            double val = 0.0;
            int k = 0;
            for (int i = 0; i <= 2; ++i)
                for (int j = 0; j <= 2; ++j)
                    val += coeff[std::size_t(c)][std::size_t(k++)] * std::pow(pnt.x, i) *
                           std::pow(pnt.y, j);
            u[2 * id + c] = fac * val;
        }
    }
    return u;
}

namespace {

struct LimitArtifacts {
    CellMesh cell;
    MacroMesh limit_macro;
    CorrectorSet correctors;
    HomogenizedTensor ahom;
};

LimitArtifacts build_limit_artifacts(const SweepConfig& cfg) {
    LimitArtifacts art;
    art.cell = build_cell_mesh(cfg.cell);
    art.limit_macro = plain_macro_mesh(cfg.macro_n, cfg.gamma0_faces);
    art.correctors = solve_correctors(art.cell, cfg.base_tensor(), cfg.tol_lin);
    art.ahom = homogenized_tensor(art.correctors, art.cell, cfg.base_tensor());
    return art;
}

double sampled_korn(const StateProblem& prob, const SweepConfig& cfg, int count) {
    double worst = 0.0;
    for (int k = 0; k < count; ++k) {
        DisplacementField u =
            random_smooth_field(*prob.mesh, cfg.gamma0_faces, cfg.seed + 101 * unsigned(k));
        const double r = korn_diagnostic(u, prob.epsilon, prob.M, prob.S1, prob.S2);
        worst = std::max(worst, r);
    }
    return worst;
}

ControlField smooth_control(const StateProblem& prob, unsigned seed) {
    const DisplacementField full = random_smooth_field(*prob.mesh, 0, seed);
    ControlField theta = ControlField::zero(*prob.mesh);
    for (const int d : prob.inclusion_dofs) theta.v[d] = full[d];
    return theta;
}

double sampled_lipschitz(const StateProblem& prob, const SweepConfig& cfg, int pairs) {
    double worst = 0.0;
    for (int k = 0; k < pairs; ++k) {
        const ControlField t1 = smooth_control(prob, cfg.seed + 211 * unsigned(k) + 1);
        const ControlField t2 = smooth_control(prob, cfg.seed + 211 * unsigned(k) + 7);
        worst = std::max(worst, control_to_state_lipschitz_probe(prob, t1, t2));
    }
    return worst;
}

void fit_rates(SweepOutcome& out, const std::vector<int>& n_list) {
    out.rates.clear();
    for (std::size_t i = 0; i + 1 < out.gaps.size(); ++i) {
        if (out.gaps[i] <= 0.0 || out.gaps[i + 1] <= 0.0) {
            out.rates.push_back(0.0);
            continue;
        }
        out.rates.push_back(std::log(out.gaps[i] / out.gaps[i + 1]) /
                            std::log(double(n_list[i + 1]) / n_list[i]));
    }
}

void judge(SweepOutcome& out, double tol_conv) {
    bool decreasing = true;
    for (std::size_t i = 0; i + 1 < out.gaps.size(); ++i)
        if (!(out.gaps[i + 1] < out.gaps[i])) decreasing = false;
    const bool final_ok =
        out.gaps.size() < 2 || out.gaps.back() < tol_conv * out.gaps.front();
    bool ctrl_ok = true;
    if (out.is_ocp)
        for (std::size_t i = 0; i + 1 < out.rows.size(); ++i)
            if (!(out.rows[i + 1].control_error < out.rows[i].control_error)) ctrl_ok = false;
    out.pass = decreasing && final_ok && ctrl_ok;
    std::ostringstream ss;
    ss << (out.pass ? "PASS" : "FAIL") << ": gaps";
    for (const double g : out.gaps) ss << " " << g;
    ss << (decreasing ? " strictly decreasing" : " NOT strictly decreasing");
    if (out.gaps.size() >= 2)
        ss << "; final/first = " << out.gaps.back() / out.gaps.front() << " (target < "
           << tol_conv << ")";
    if (out.is_ocp) ss << (ctrl_ok ? "; control errors decreasing" : "; control errors NOT decreasing");
    out.verdict = ss.str();
}

}  // namespace

SweepOutcome run_energy_sweep(const SweepConfig& cfg) {
    cfg.validate();
    const LimitArtifacts art = build_limit_artifacts(cfg);
    LimitProblem lim(art.limit_macro, art.cell, art.ahom, cfg.base_tensor(), cfg.physics(),
                     cfg.kappa);
    const TwoScaleControl theta_hat = lim.zero_control();
    const TwoScaleState limit_state = solve_limit_state(lim, theta_hat);
    SweepOutcome out;
    out.limit_value = limit_energy(lim, limit_state, theta_hat);

    for (const int n : cfg.n_list) {
        const double t0 = wall_time();
        SweepRow row;
        row.n = n;
        row.eps = 1.0 / n;
        row.delta = cfg.delta_of(row.eps);
        const MacroMesh mesh = build_macro_mesh(art.cell, n, cfg.gamma0_faces);
        const ContrastField contrast = ContrastField::uniform(cfg.base_tensor(), row.delta);
        const StateProblem prob(mesh, contrast, cfg.physics());
        const ControlField theta = ControlField::zero(mesh);
        const StateSolution sol = solve_state(prob, theta);
        row.energy = sol.energy.total;
        row.state_error = two_scale_state_error(sol.u, mesh, art.cell, lim.view(), limit_state);
        row.korn = sampled_korn(prob, cfg, 20);
        row.apriori_state = apriori_ratio(prob, sol.u, theta);
        row.wall_seconds = wall_time() - t0;
        out.rows.push_back(row);
        out.gaps.push_back(std::abs(row.energy - out.limit_value));
    }
    fit_rates(out, cfg.n_list);
    judge(out, cfg.tol_conv);
    return out;
}

SweepOutcome run_ocp_sweep(const SweepConfig& cfg) {
    cfg.validate();
    const LimitArtifacts art = build_limit_artifacts(cfg);
    LimitProblem lim(art.limit_macro, art.cell, art.ahom, cfg.base_tensor(), cfg.physics(),
                     cfg.kappa);
    const LimitOcpResult locp = solve_limit_ocp(lim, lim.zero_control(), cfg.max_opt_iter);
    SweepOutcome out;
    out.is_ocp = true;
    out.limit_value = locp.cost;

    for (const int n : cfg.n_list) {
        const double t0 = wall_time();
        SweepRow row;
        row.n = n;
        row.eps = 1.0 / n;
        row.delta = cfg.delta_of(row.eps);
        const MacroMesh mesh = build_macro_mesh(art.cell, n, cfg.gamma0_faces);
        const ContrastField contrast = ContrastField::uniform(cfg.base_tensor(), row.delta);
        const StateProblem prob(mesh, contrast, cfg.physics());

        const ControlField theta0 = ControlField::zero(mesh);
        {
            const StateSolution at_zero = solve_state(prob, theta0);
            row.cost_at_zero = evaluate_cost(prob, theta0, at_zero);
        }
        OptimizeOptions oopts;
        oopts.max_iterations = cfg.max_opt_iter;
        oopts.seed = cfg.seed;
        const OcpResult ocp = optimize_control(prob, theta0, oopts);
        row.cost = ocp.cost;
        row.opt_residual = ocp.optimality_residual;
        row.control_norm = prob.control_norm(ocp.Theta);
        row.state_error =
            two_scale_state_error(ocp.u.u, mesh, art.cell, lim.view(), locp.state);
        row.control_error =
            two_scale_control_error(ocp.Theta, mesh, art.cell, lim.view(), locp.Theta);
        row.korn = sampled_korn(prob, cfg, 20);
        row.lipschitz = sampled_lipschitz(prob, cfg, 2);
        row.apriori_state = apriori_ratio(prob, ocp.u.u, ocp.Theta);
        row.apriori_adjoint = adjoint_estimate_ratio(prob, ocp.v, ocp.u.u);
        row.wall_seconds = wall_time() - t0;
        out.rows.push_back(row);
        out.gaps.push_back(std::abs(row.cost - out.limit_value));
    }
    fit_rates(out, cfg.n_list);
    judge(out, cfg.tol_conv);
    return out;
}

namespace {

void write_rows(std::ostream& os, const SweepOutcome& out, bool ocp) {
    os.precision(12);
    if (ocp)
        os << "n,eps,delta,i_eps_delta,i_kappa,gap,control_error,state_error,opt_residual,"
              "cost_at_zero,control_norm,korn,lipschitz,apriori_state,apriori_adjoint,"
              "wall_seconds\n";
    else
        os << "n,eps,delta,m_eps_delta,m_kappa,gap,state_error,korn,apriori_state,"
              "wall_seconds\n";
    for (std::size_t i = 0; i < out.rows.size(); ++i) {
        const SweepRow& r = out.rows[i];
        if (ocp)
            os << r.n << "," << r.eps << "," << r.delta << "," << r.cost << ","
               << out.limit_value << "," << out.gaps[i] << "," << r.control_error << ","
               << r.state_error << "," << r.opt_residual << "," << r.cost_at_zero << ","
               << r.control_norm << "," << r.korn << "," << r.lipschitz << ","
               << r.apriori_state << "," << r.apriori_adjoint << "," << r.wall_seconds << "\n";
        else
            os << r.n << "," << r.eps << "," << r.delta << "," << r.energy << ","
               << out.limit_value << "," << out.gaps[i] << "," << r.state_error << ","
               << r.korn << "," << r.apriori_state << "," << r.wall_seconds << "\n";
    }
}

}  // namespace

void write_energy_csv(const SweepOutcome& out, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    write_rows(os, out, false);
}

void write_ocp_csv(const SweepOutcome& out, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    write_rows(os, out, true);
}

void write_summary(const std::vector<SweepOutcome>& outcomes, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    os.precision(12);
    for (const SweepOutcome& out : outcomes) {
        os << (out.is_ocp ? "ocp-sweep " : "energy-sweep ") << out.verdict << "\n";
        os << "  limit value: " << out.limit_value << "\n";
        if (!out.rates.empty()) {
            os << "  empirical orders (informational):";
            for (const double r : out.rates) os << " " << r;
            os << "\n";
        }
    }
}

}  // namespace hcoc
