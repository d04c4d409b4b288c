#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>

#include "oracle.hpp"
#include "support.hpp"

using namespace hcoc;

namespace {

Vector apply64(const std::array<double, 64>& k, const Vector& u) {
    Vector out(8, 0.0);
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) out[i] += k[std::size_t(8) * i + j] * u[std::size_t(j)];
    return out;
}

}  // namespace

TEST_CASE("element stiffness annihilates rigid motions and matches the stretch energy") {
    const auto k = element_stiffness(HookeTensor::isotropic(1.0, 1.0), 1.0);

    const Vector tx = {1, 0, 1, 0, 1, 0, 1, 0};
    for (const double v : apply64(k, tx)) CHECK(std::abs(v) < 1e-14);

    // Rotation (-y, x) at the unit-square corners.
    const Vector rot = {0, 0, 0, 1, -1, 1, -1, 0};
    for (const double v : apply64(k, rot)) CHECK(std::abs(v) < 1e-14);

    // Pure stretch u = (x, 0): energy (lambda + 2 mu) |element| = 3.
    const Vector stretch = {0, 0, 1, 0, 1, 0, 0, 0};
    CHECK(dot(stretch, apply64(k, stretch)) == doctest::Approx(3.0).epsilon(1e-14));

    // Positive semidefinite with kernel dimension exactly 3.
    Eigen::MatrixXd ke(8, 8);
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) ke(i, j) = k[std::size_t(8) * i + j];
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(ke);
    int zero = 0;
    for (int i = 0; i < 8; ++i) {
        CHECK(eig.eigenvalues()(i) > -1e-13);
        if (std::abs(eig.eigenvalues()(i)) < 1e-12) ++zero;
    }
    CHECK(zero == 3);

    CHECK_THROWS_AS(element_stiffness(HookeTensor::isotropic(1.0, 1.0), 0.0), AssemblyError);
}

TEST_CASE("assembled stiffness is symmetric and SPD after constraints") {
    const CellMesh cell = build_cell_mesh(test::square_cell(0.24, 4));
    const MacroMesh mesh = build_macro_mesh(cell, 1);
    const ContrastField contrast =
        ContrastField::uniform(HookeTensor::isotropic(1.0, 1.0), 0.5);
    SparseOperator kmat = assemble(mesh, contrast, Form::stiffness);
    CHECK(kmat.symmetry_gap() == 0.0);
    kmat.eliminate(gamma0_dofs(mesh));
    CHECK(oracle::smallest_eigenvalue(kmat) > 0.0);

    // Unconstrained free elasticity is singular on the rigid motions.
    const SparseOperator kfree = assemble(mesh, contrast, Form::stiffness);
    const oracle::DenseSystem sys = oracle::densify(kfree, Vector(kfree.n, 0.0));
    try {
        oracle::dense_solve(sys, &mesh);
        CHECK(false);
    } catch (const oracle::OracleError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("translation-x") != std::string::npos);
        CHECK(msg.find("translation-y") != std::string::npos);
        CHECK(msg.find("rotation") != std::string::npos);
    }
}

TEST_CASE("mass matrix row sums add up to the domain area per component") {
    const CellMesh cell = build_cell_mesh(test::square_cell(0.24, 4));
    const MacroMesh mesh = build_macro_mesh(cell, 2);
    const SparseOperator m = assemble(mesh, HookeTensor::isotropic(1, 1), Form::mass);
    Vector ones_x(std::size_t(mesh.dof_count()), 0.0), ones_y(std::size_t(mesh.dof_count()), 0.0);
    for (int id = 0; id < mesh.node_count(); ++id) {
        ones_x[2 * id] = 1.0;
        ones_y[2 * id + 1] = 1.0;
    }
    CHECK(m.inner(ones_x, ones_x) == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(m.inner(ones_y, ones_y) == doctest::Approx(1.0).epsilon(1e-13));
    // Region masses add up to the full mass.
    const SparseOperator m1 = assemble(mesh, HookeTensor::isotropic(1, 1), Form::mass_on_inclusion);
    const SparseOperator m2 = assemble(mesh, HookeTensor::isotropic(1, 1), Form::mass_on_matrix);
    CHECK(m1.inner(ones_x, ones_x) + m2.inner(ones_x, ones_x) ==
          doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("contrast scaling is exact") {
    const HookeTensor a = HookeTensor::isotropic(1.0, 1.0);
    const ContrastField cf = ContrastField::uniform(a, 1e-2);
    const HookeTensor scaled = cf.value(Region::inclusion, 0);
    for (int i = 0; i < 9; ++i) CHECK(scaled.voigt[i] == 1e-4 * a.voigt[i]);
    CHECK(cf.value(Region::matrix, 0).voigt == a.voigt);

    // K(delta) = delta^2 K_inclusion + K_matrix entrywise.
    const CellMesh cell = build_cell_mesh(test::square_cell(0.24, 4));
    const MacroMesh mesh = build_macro_mesh(cell, 2);
    const double delta = 1e-2;
    const SparseOperator k_delta =
        assemble(mesh, ContrastField::uniform(a, delta), Form::stiffness);
    const SparseOperator k_one = assemble(mesh, ContrastField::uniform(a, 1.0), Form::stiffness);
    auto strain = assemble_strain_product(mesh, Region::inclusion);
    (void)strain;
    std::vector<int> incl, matr;
    for (int e = 0; e < mesh.elem_count(); ++e)
        (mesh.region[e] == Region::inclusion ? incl : matr).push_back(e);
    auto dof_of = [](int node, int comp) { return 2 * node + comp; };
    auto tensor_of = [&a](int) { return &a; };
    const SparseOperator ki =
        assemble_generic(mesh, incl, mesh.dof_count(), dof_of, tensor_of, false);
    const SparseOperator km =
        assemble_generic(mesh, matr, mesh.dof_count(), dof_of, tensor_of, false);
    for (int i = 0; i < k_delta.n; ++i)
        for (int kk = k_delta.row_ptr[i]; kk < k_delta.row_ptr[i + 1]; ++kk) {
            const int j = k_delta.col[kk];
            const double expect = delta * delta * ki.coeff(i, j) + km.coeff(i, j);
            CHECK(k_delta.val[kk] == doctest::Approx(expect).epsilon(1e-13));
        }
    (void)k_one;
}

TEST_CASE("solve_spd basics and rank-one update against the dense oracle") {
    // rhs = 0 -> solution 0.
    SparseBuilder b3(3);
    b3.add(0, 0, 2.0);
    b3.add(1, 1, 3.0);
    b3.add(2, 2, 4.0);
    b3.add(0, 1, 0.5);
    b3.add(1, 0, 0.5);
    const SparseOperator m3 = b3.compress();
    CHECK(norm2(solve_spd(m3, Vector(3, 0.0))) == 0.0);

    // Identity: returns the rhs.
    SparseBuilder bi(3);
    for (int i = 0; i < 3; ++i) bi.add(i, i, 1.0);
    const SparseOperator id3 = bi.compress();
    const Vector e1 = {1.0, 0.0, 0.0};
    CHECK(norm2(solve_spd(id3, e1)) == doctest::Approx(1.0));

    // Rank-one update against a dense solve of (M + b b^T).
    RankOneUpdate r1{{1.0, 0.0, 0.0}, 1.0};
    const Vector rhs = {1.0, 2.0, -1.0};
    const Vector x = solve_spd(m3, rhs, r1, {1e-13});
    Eigen::MatrixXd dense = oracle::materialize(m3);
    dense(0, 0) += 1.0;
    Eigen::Vector3d br(1.0, 2.0, -1.0);
    const Eigen::Vector3d xd = dense.llt().solve(br);
    for (int i = 0; i < 3; ++i) CHECK(x[i] == doctest::Approx(xd(i)).epsilon(1e-12));
}

TEST_CASE("CG matches the dense factorization on a random SPD system") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    Eigen::MatrixXd g(10, 10);
    for (int i = 0; i < 10; ++i)
        for (int j = 0; j < 10; ++j) g(i, j) = dist(rng);
    Eigen::MatrixXd a = g * g.transpose() + 10.0 * Eigen::MatrixXd::Identity(10, 10);
    SparseBuilder b(10);
    for (int i = 0; i < 10; ++i)
        for (int j = 0; j < 10; ++j) b.add(i, j, a(i, j));
    const SparseOperator op = b.compress();
    Vector rhs(10);
    for (double& v : rhs) v = dist(rng);
    const Vector x = solve_spd(op, rhs, std::nullopt, {1e-12});
    const Vector xd = oracle::dense_solve(oracle::densify(op, rhs));
    Vector diff = x;
    axpy(-1.0, xd, diff);
    CHECK(norm2(diff) <= 1e-9 * norm2(xd));
}

TEST_CASE("linear state solve path matches the dense oracle on a small mesh") {
    const test::TinyProblem tp(test::square_cell(0.24, 4), 1, 0.5,
                               test::physics(0.0, 2.0, 1.0, "preset:const", "zero"));
    const ControlField theta = ControlField::zero(tp.mesh);
    const StateSolution sol = solve_state(tp.prob, theta);
    const Vector xd = oracle::dense_solve(oracle::densify(tp.prob.K, tp.prob.rhs(theta)));
    Vector diff = sol.u;
    axpy(-1.0, xd, diff);
    CHECK(norm2(diff) <= 1e-9 * (1.0 + norm2(xd)));
}

TEST_CASE("korn diagnostic") {
    const CellMesh cell = build_cell_mesh(test::square_cell(0.24, 4));
    const MacroMesh mesh = build_macro_mesh(cell, 4);

    const DisplacementField zero(std::size_t(mesh.dof_count()), 0.0);
    CHECK(korn_diagnostic(zero, mesh, mesh.epsilon) == 0.0);

    // Field supported in the matrix only: the ratio reduces to
    // ||u|| / ||e(u)||_{Omega_2}.
    DisplacementField u(std::size_t(mesh.dof_count()), 0.0);
    std::vector<std::uint8_t> incl(mesh.node_count(), 0);
    for (int e = 0; e < mesh.elem_count(); ++e)
        if (mesh.region[e] == Region::inclusion)
            for (const int nid : mesh.elems[e]) incl[nid] = 1;
    const DisplacementField smooth = random_smooth_field(mesh, mesh.gamma0_faces, 12);
    for (int id = 0; id < mesh.node_count(); ++id)
        if (!incl[id] && !(mesh.node_boundary_tag[id] == BoundaryTag::gamma0)) {
            u[2 * id] = smooth[2 * id];
            u[2 * id + 1] = smooth[2 * id + 1];
        }
    const SparseOperator mass = assemble(mesh, HookeTensor::isotropic(1, 1), Form::mass);
    const SparseOperator s1 = assemble_strain_product(mesh, Region::inclusion);
    const SparseOperator s2 = assemble_strain_product(mesh, Region::matrix);
    const double ratio = korn_diagnostic(u, mesh.epsilon, mass, s1, s2);
    const double manual = m_norm(mass, u) / (mesh.epsilon * std::sqrt(s1.inner(u, u)) +
                                             std::sqrt(s2.inner(u, u)));
    CHECK(ratio == doctest::Approx(manual).epsilon(1e-13));

    // eps-independence within a factor of two between n = 4 and n = 8,
    // sampled over smooth admissible fields.
    auto max_ratio = [](int n) {
        const CellMesh c = build_cell_mesh(test::square_cell(0.24, 4));
        const MacroMesh m = build_macro_mesh(c, n);
        double worst = 0.0;
        for (unsigned k = 0; k < 100; ++k) {
            const DisplacementField f = random_smooth_field(m, m.gamma0_faces, 100 + k);
            worst = std::max(worst, korn_diagnostic(f, m, m.epsilon));
        }
        return worst;
    };
    const double r4 = max_ratio(4), r8 = max_ratio(8);
    CHECK(std::max(r4, r8) / std::min(r4, r8) < 2.0);

    // Dense eigenvalue bound on a tiny mesh: the matrix-supported ratio is
    // dominated by the Korn/Poincare constant sup ||u||/||e(u)||_{Omega_2},
    // the inverse square root of the smallest generalized eigenvalue of
    // (S_2, M) over admissible matrix-supported fields.
    {
        const CellMesh tc = build_cell_mesh(test::square_cell(0.24, 4));
        const MacroMesh tm = build_macro_mesh(tc, 1);
        const SparseOperator tmass = assemble(tm, HookeTensor::isotropic(1, 1), Form::mass);
        const SparseOperator ts2 = assemble_strain_product(tm, Region::matrix);
        std::vector<int> keep;
        std::vector<std::uint8_t> blocked(tm.node_count(), 0);
        for (int e = 0; e < tm.elem_count(); ++e)
            if (tm.region[e] == Region::inclusion)
                for (const int nid : tm.elems[e]) blocked[nid] = 1;
        for (int id = 0; id < tm.node_count(); ++id)
            if (!blocked[id] && tm.node_boundary_tag[id] != BoundaryTag::gamma0) {
                keep.push_back(2 * id);
                keep.push_back(2 * id + 1);
            }
        Eigen::MatrixXd sd = oracle::materialize(ts2), md = oracle::materialize(tmass);
        Eigen::MatrixXd sr(keep.size(), keep.size()), mr(keep.size(), keep.size());
        for (std::size_t i = 0; i < keep.size(); ++i)
            for (std::size_t j = 0; j < keep.size(); ++j) {
                sr(int(i), int(j)) = sd(keep[i], keep[j]);
                mr(int(i), int(j)) = md(keep[i], keep[j]);
            }
        const Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> gev(sr, mr);
        const double bound = 1.0 / std::sqrt(gev.eigenvalues().minCoeff());
        for (unsigned k = 0; k < 20; ++k) {
            DisplacementField w(std::size_t(tm.dof_count()), 0.0);
            const Vector rnd = test::random_vector(std::size_t(tm.dof_count()), 600 + k);
            for (const int d : keep) w[std::size_t(d)] = rnd[std::size_t(d)];
            const SparseOperator s1m = assemble_strain_product(tm, Region::inclusion);
            const double ratio = korn_diagnostic(w, tm.epsilon, tmass, s1m, ts2);
            CHECK(ratio <= bound * (1.0 + 1e-9));
        }
    }
}

TEST_CASE("dense oracle refuses oversized systems") {
    const int n = oracle::kMaxDofs + 2;
    SparseBuilder b(n);
    for (int i = 0; i < n; ++i) b.add(i, i, 1.0);
    CHECK_THROWS_AS(oracle::densify(b.compress(), Vector(n, 0.0)), oracle::OracleError);
}

TEST_CASE("CG reports the final residual when the iteration budget is exhausted") {
    // 1D Laplacian chain: needs about n iterations, so a budget of 2 fails.
    const int n = 60;
    SparseBuilder b(n);
    for (int i = 0; i < n; ++i) {
        b.add(i, i, 2.0);
        if (i > 0) b.add(i, i - 1, -1.0);
        if (i + 1 < n) b.add(i, i + 1, -1.0);
    }
    const SparseOperator op = b.compress();
    Vector rhs(n, 1.0);
    CgOptions opts;
    opts.tol = 1e-12;
    opts.max_iterations = 2;
    try {
        solve_spd(op, rhs, std::nullopt, opts);
        CHECK(false);
    } catch (const SolverError& e) {
        CHECK(std::string(e.what()).find("residual") != std::string::npos);
    }
}

TEST_CASE("coefficient fields may be uniform or periodic per cell element") {
    const CellMesh cell = build_cell_mesh(test::square_cell(0.24, 4));
    const MacroMesh mesh = build_macro_mesh(cell, 2);
    const HookeTensor a = HookeTensor::isotropic(1.0, 1.0);

    // Mismatched per-element table is a tag/coefficient inconsistency.
    ContrastField bad;
    bad.base = {a, a, a};
    bad.delta = 0.5;
    CHECK_THROWS_AS(assemble(mesh, bad, Form::stiffness), AssemblyError);

    // A constant per-element table reproduces the uniform assembly exactly.
    ContrastField periodic;
    periodic.base.assign(std::size_t(cell.elem_count()), a);
    periodic.delta = 0.5;
    const SparseOperator kp = assemble(mesh, periodic, Form::stiffness);
    const SparseOperator ku = assemble(mesh, ContrastField::uniform(a, 0.5), Form::stiffness);
    CHECK(kp.val == ku.val);
}
