#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "hcoc/result_io.hpp"
#include "support.hpp"

using namespace hcoc;

namespace {

SweepConfig tiny_config(double kappa) {
    SweepConfig cfg;
    cfg.kappa = kappa;
    cfg.n_list = {2, 4};
    cfg.cell = test::square_cell(0.24, 4);
    cfg.macro_n = 4;
    cfg.alpha = 1.0;
    cfg.p = 2.0;
    cfg.gamma = 0.5;
    cfg.f_spec = "preset:const";
    cfg.ud_spec = "preset:trig";
    return cfg;
}

// File contents with the volatile wall-time column removed.
std::string slurp_stable(const std::string& path) {
    std::ifstream is(path);
    std::string line, out;
    while (std::getline(is, line)) {
        const auto comma = line.rfind(',');
        out += line.substr(0, comma);
        out += '\n';
    }
    return out;
}

}  // namespace

TEST_CASE("config parsing, defaults and regime validation") {
    std::stringstream ss;
    ss << "kappa = inf\n"
          "n_list = 2,4,8\n"
          "cell_shape = disk\n"
          "cell_param = 0.25\n"
          "cell_res = 16\n"
          "macro_n = 8\n"
          "delta_q = 0.5\n"
          "alpha = 1\n"
          "p = 3\n"
          "gamma = 0.25  # regularization\n"
          "f = preset:const:0,1\n"
          "ud = preset:trig:0.2\n";
    const SweepConfig cfg = SweepConfig::parse(ss);
    CHECK(std::isinf(cfg.kappa));
    CHECK(cfg.n_list == std::vector<int>{2, 4, 8});
    CHECK(cfg.cell.shape == CellGeometry::Shape::disk);
    CHECK(cfg.p == 3.0);
    CHECK(cfg.delta_of(0.25) == doctest::Approx(0.5));

    std::stringstream bad("unknown_key = 1\n");
    CHECK_THROWS_AS(SweepConfig::parse(bad), IoError);

    SweepConfig invalid = tiny_config(ScaleParams::infinite);
    invalid.delta_q = 1.0;  // delta/eps would not diverge
    CHECK_THROWS_AS(invalid.validate(), ValidationError);
    invalid.delta_q = 1.5;
    CHECK_THROWS_AS(invalid.validate(), ValidationError);

    SweepConfig neg = tiny_config(-1.0);
    CHECK_THROWS_AS(neg.validate(), ValidationError);

    SweepConfig big_delta = tiny_config(4.0);  // delta = 4 * 1/2 = 2 > 1
    CHECK_THROWS_AS(big_delta.validate(), ValidationError);

    SweepConfig unordered = tiny_config(1.0);
    unordered.n_list = {4, 2};
    CHECK_THROWS_AS(unordered.validate(), ValidationError);
}

TEST_CASE("random smooth fields vanish on the selected Gamma0 faces") {
    const MacroMesh mesh = plain_macro_mesh(4, face::left | face::top);
    const DisplacementField u = random_smooth_field(mesh, face::left | face::top, 3);
    for (int id = 0; id < mesh.node_count(); ++id) {
        const Vec2 p = mesh.node(id);
        if (p.x == 0.0 || p.y == 1.0) {
            CHECK(u[2 * id] == 0.0);
            CHECK(u[2 * id + 1] == 0.0);
        }
    }
    // Deterministic per seed.
    const DisplacementField v = random_smooth_field(mesh, face::left | face::top, 3);
    CHECK(u == v);
}

TEST_CASE("energy sweep rows, gaps and reproducibility") {
    const SweepConfig cfg = tiny_config(1.0);
    const SweepOutcome out = run_energy_sweep(cfg);
    REQUIRE(out.rows.size() == 2);
    for (const SweepRow& r : out.rows) {
        CHECK(std::isfinite(r.energy));
        CHECK(r.state_error >= 0.0);
        CHECK(r.energy <= 0.0);
        CHECK(r.delta == doctest::Approx(r.eps));
    }
    CHECK(out.gaps.size() == 2);
    CHECK(out.rates.size() == 1);

    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "hcoc_sweep_test";
    fs::create_directories(dir);
    write_energy_csv(out, (dir / "a.csv").string());
    const SweepOutcome again = run_energy_sweep(cfg);
    write_energy_csv(again, (dir / "b.csv").string());
    CHECK(slurp_stable((dir / "a.csv").string()) == slurp_stable((dir / "b.csv").string()));
}

TEST_CASE("ocp sweep rows carry the optimality diagnostics") {
    SweepConfig cfg = tiny_config(ScaleParams::infinite);
    cfg.alpha = 0.0;  // cheap linear-quadratic rows
    const SweepOutcome out = run_ocp_sweep(cfg);
    REQUIRE(out.rows.size() == 2);
    for (const SweepRow& r : out.rows) {
        CHECK(std::isfinite(r.cost));
        CHECK(r.cost >= 0.0);
        CHECK(r.cost <= r.cost_at_zero);  // monotone baseline
        CHECK(r.opt_residual <= 1e-8 * (1.0 + 1.0));
        CHECK(r.control_error >= 0.0);
        CHECK(r.korn > 0.0);
        CHECK(r.lipschitz > 0.0);
        CHECK(r.apriori_state > 0.0);
        CHECK(r.apriori_adjoint > 0.0);
    }
}

TEST_CASE("state and limit csv files round-trip") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "hcoc_io_test";
    fs::create_directories(dir);

    const CellMesh cell = build_cell_mesh(test::square_cell(0.24, 4));
    const MacroMesh mesh = build_macro_mesh(cell, 2);
    save_mesh((dir / "mesh.txt").string(), mesh);
    StateFile sf;
    sf.mesh_path = (dir / "mesh.txt").string();
    sf.eps = mesh.epsilon;
    sf.delta = 0.5;
    sf.alpha = 1.0;
    sf.p = 2.0;
    sf.u = test::random_vector(std::size_t(mesh.dof_count()), 5);
    sf.s_star = 0.125;
    sf.energy = {1.0, 2.0, 3.5, -0.5};
    sf.has_theta = true;
    sf.theta.v = test::random_vector(std::size_t(mesh.dof_count()), 6);
    write_state_csv((dir / "state.csv").string(), mesh, sf);
    const StateFile back = read_state_csv((dir / "state.csv").string());
    CHECK(back.mesh_path == sf.mesh_path);
    CHECK(back.u == sf.u);
    CHECK(back.s_star == sf.s_star);
    CHECK(back.theta.v == sf.theta.v);
    CHECK(back.energy.total == sf.energy.total);

    const PhysicsParams phys = test::physics(1.0, 2.0, 1.0, "preset:const", "zero");
    const test::LimitSetup ls(test::square_cell(0.24, 4), 2, phys, 2.0);
    save_mesh((dir / "cell.txt").string(), ls.cell);
    LimitFile lf;
    lf.cell_path = (dir / "cell.txt").string();
    lf.macro_n = 2;
    lf.kappa = 2.0;
    lf.value = -0.25;
    lf.state = solve_limit_state(ls.prob, ls.prob.zero_control());
    lf.has_theta_hat = true;
    lf.theta_hat = test::random_theta_hat(ls.prob, 8);
    write_limit_csv((dir / "limit.csv").string(), ls.prob, lf);
    const LimitFile lback = read_limit_csv((dir / "limit.csv").string());
    CHECK(lback.macro_n == 2);
    CHECK(lback.kappa == 2.0);
    CHECK(lback.state.u0 == lf.state.u0);
    REQUIRE(lback.state.what.size() == lf.state.what.size());
    for (std::size_t e = 0; e < lf.state.what.size(); ++e)
        CHECK(lback.state.what[e] == lf.state.what[e]);
    CHECK(lback.theta_hat.v == lf.theta_hat.v);
}

TEST_CASE("trivial data sweeps: zero energies and zero costs") {
    SweepConfig cfg = tiny_config(1.0);
    cfg.f_spec = "zero";
    cfg.ud_spec = "zero";
    const SweepOutcome energy = run_energy_sweep(cfg);
    CHECK(energy.limit_value == 0.0);
    for (const SweepRow& r : energy.rows) CHECK(r.energy == 0.0);
    const SweepOutcome ocp = run_ocp_sweep(cfg);
    CHECK(ocp.limit_value == 0.0);
    for (const SweepRow& r : ocp.rows) CHECK(r.cost == 0.0);
}
