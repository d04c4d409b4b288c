#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <filesystem>

#include "oracle.hpp"
#include "support.hpp"

using namespace hcoc;

namespace {

constexpr double kGauss = 0.57735026918962576451;

std::array<double, 3> strain_of(const CellMesh& cell, const DisplacementField& u, int e,
                                double xi, double eta) {
    static const double xs[4] = {-1.0, 1.0, 1.0, -1.0};
    static const double ys[4] = {-1.0, -1.0, 1.0, 1.0};
    const double h = cell.h();
    std::array<double, 3> s{};
    const auto& conn = cell.elems[e];
    for (int a = 0; a < 4; ++a) {
        const double dx = 0.25 * xs[a] * (1.0 + ys[a] * eta) * 2.0 / h;
        const double dy = 0.25 * ys[a] * (1.0 + xs[a] * xi) * 2.0 / h;
        s[0] += dx * u[2 * conn[a]];
        s[1] += dy * u[2 * conn[a] + 1];
        s[2] += dy * u[2 * conn[a]] + dx * u[2 * conn[a] + 1];
    }
    return s;
}

// Quadrature evaluation of int_{Y2} A (m_ij + e(chi)) : e(w) for a nodal w.
double galerkin_pairing(const CellMesh& cell, const HookeTensor& a, const DisplacementField& chi,
                        int ij, const DisplacementField& w) {
    std::array<double, 3> m{};
    m[std::size_t(ij)] = 1.0;
    double out = 0.0;
    const double wq = cell.h() * cell.h() / 4.0;
    for (int e = 0; e < cell.elem_count(); ++e) {
        if (cell.region[e] != Region::matrix) continue;
        for (const double xi : {-kGauss, kGauss})
            for (const double eta : {-kGauss, kGauss}) {
                auto sc = strain_of(cell, chi, e, xi, eta);
                for (int c = 0; c < 3; ++c) sc[c] += m[std::size_t(c)];
                const auto sw = strain_of(cell, w, e, xi, eta);
                out += wq * contract(a, sc, sw);
            }
    }
    return out;
}

// Random periodic field on the Y2-touching nodes (admissible corrector test
// function; zero on inclusion-interior nodes).
DisplacementField random_periodic_y2(const CellMesh& cell, unsigned seed) {
    Vector v = test::random_vector(std::size_t(cell.dof_count()), seed);
    std::vector<std::uint8_t> touch(cell.node_count(), 0);
    for (int e = 0; e < cell.elem_count(); ++e)
        if (cell.region[e] == Region::matrix)
            for (const int nid : cell.elems[e]) touch[nid] = 1;
    for (int id = 0; id < cell.node_count(); ++id) {
        const int m = cell.periodic.master[id];
        v[2 * id] = touch[m] ? v[2 * m] : 0.0;
        v[2 * id + 1] = touch[m] ? v[2 * m + 1] : 0.0;
        if (!touch[id]) {
            v[2 * id] = 0.0;
            v[2 * id + 1] = 0.0;
        }
    }
    return v;
}

double y2_component_mean(const CellMesh& cell, const DisplacementField& u, int comp) {
    double integral = 0.0;
    const double w = cell.h() * cell.h() / 4.0;
    for (int e = 0; e < cell.elem_count(); ++e) {
        if (cell.region[e] != Region::matrix) continue;
        for (const int nid : cell.elems[e]) integral += w * u[2 * nid + comp];
    }
    return integral / cell.area_y2;
}

}  // namespace

TEST_CASE("no inclusion: correctors vanish and A^hom equals A") {
    const CellMesh cell = build_cell_mesh(test::plain_cell(8));
    const HookeTensor a = HookeTensor::isotropic(1.0, 1.0);
    const CorrectorSet set = solve_correctors(cell, a);
    for (const auto& chi : set.chi) CHECK(norm2(chi) <= 1e-12);
    const HomogenizedTensor ahom = homogenized_tensor(set, cell, a);
    for (int i = 0; i < 9; ++i)
        CHECK(std::abs(ahom.tensor.voigt[i] - a.voigt[i]) <= 1e-12 * (1.0 + std::abs(a.voigt[i])));
    const HomValidationReport rep = validate_hom_tensor(ahom);
    CHECK(rep.ellipticity_constant ==
          doctest::Approx(a.kelvin_eigenvalues()[0]).epsilon(1e-12));
}

TEST_CASE("square inclusion: corrector energy decreases and A^hom is admissible") {
    const CellMesh cell = build_cell_mesh(test::square_cell(0.25, 16));
    const HookeTensor a = HookeTensor::isotropic(1.0, 1.0);
    const CorrectorSet set = solve_correctors(cell, a);
    const HomogenizedTensor ahom_diag = homogenized_tensor(set, cell, a);
    for (int q = 0; q < 3; ++q) {
        CHECK(norm2(set.chi[q]) > 1e-3);
        // Corrected unit-strain energy falls below the uncorrected one on Y2.
        std::array<double, 3> m{};
        m[std::size_t(q)] = 1.0;
        const double plain = cell.area_y2 * contract(a, m, m);
        CHECK(ahom_diag.tensor(q, q) < plain);
    }

    const HomogenizedTensor ahom = homogenized_tensor(set, cell, a);
    CHECK(ahom.flux_energy_gap <= 1e-10);
    // Loewner upper bound |Y2| A in the Kelvin basis.
    const auto ka = a.kelvin();
    const auto kh = ahom.tensor.kelvin();
    Eigen::Matrix3d diff;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            diff(i, j) = cell.area_y2 * ka[std::size_t(3 * i + j)] - kh[std::size_t(3 * i + j)];
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(diff);
    CHECK(eig.eigenvalues().minCoeff() > 0.0);

    // Galerkin orthogonality against 20 random admissible test fields.
    for (unsigned k = 0; k < 20; ++k) {
        const DisplacementField w = random_periodic_y2(cell, 300 + k);
        const double scale = std::sqrt(galerkin_pairing(cell, a, set.chi[0], 0, set.chi[0]) + 1.0) *
                             (norm2(w) + 1.0);
        for (int q = 0; q < 3; ++q)
            CHECK(std::abs(galerkin_pairing(cell, a, set.chi[q], q, w)) <= 1e-9 * scale);
    }

    // Zero mean over Y2 and exact periodicity.
    for (int q = 0; q < 3; ++q) {
        CHECK(std::abs(y2_component_mean(cell, set.chi[q], 0)) <= 1e-12);
        CHECK(std::abs(y2_component_mean(cell, set.chi[q], 1)) <= 1e-12);
        for (int id = 0; id < cell.node_count(); ++id) {
            const int m = cell.periodic.master[id];
            CHECK(set.chi[q][2 * id] == set.chi[q][2 * m]);
            CHECK(set.chi[q][2 * id + 1] == set.chi[q][2 * m + 1]);
        }
    }
}

TEST_CASE("normalization does not affect A^hom") {
    const CellMesh cell = build_cell_mesh(test::square_cell(0.25, 8));
    const HookeTensor a = HookeTensor::isotropic(2.0, 0.7);
    const CorrectorSet zm = solve_correctors(cell, a, 1e-11, CorrectorNormalization::zero_mean);
    const CorrectorSet pin = solve_correctors(cell, a, 1e-11, CorrectorNormalization::pin_node);
    const HomogenizedTensor h1 = homogenized_tensor(zm, cell, a);
    const HomogenizedTensor h2 = homogenized_tensor(pin, cell, a);
    for (int i = 0; i < 9; ++i)
        CHECK(std::abs(h1.tensor.voigt[i] - h2.tensor.voigt[i]) <=
              1e-10 * (1.0 + std::abs(h1.tensor.voigt[i])));
}

TEST_CASE("A^hom converges under cell refinement from above") {
    const HookeTensor a = HookeTensor::isotropic(1.0, 1.0);
    const CellMesh c16 = build_cell_mesh(test::square_cell(0.25, 16));
    const CellMesh c32 = build_cell_mesh(test::square_cell(0.25, 32));
    const HomogenizedTensor h16 = homogenized_tensor(solve_correctors(c16, a), c16, a);
    const HomogenizedTensor h32 = homogenized_tensor(solve_correctors(c32, a), c32, a);
    // Richer corrector space lowers the energy: h16 >= h32 in Loewner order.
    const auto k16 = h16.tensor.kelvin(), k32 = h32.tensor.kelvin();
    Eigen::Matrix3d diff;
    for (int i = 0; i < 9; ++i) diff(i / 3, i % 3) = k16[std::size_t(i)] - k32[std::size_t(i)];
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(diff);
    CHECK(eig.eigenvalues().minCoeff() > -1e-12);
    // And the two resolutions agree within 2 percent.
    for (int i = 0; i < 9; ++i)
        CHECK(std::abs(h16.tensor.voigt[i] - h32.tensor.voigt[i]) <=
              0.02 * (1.0 + std::abs(h32.tensor.voigt[i])));
}

TEST_CASE("validation reports the failing entry of a corrupted tensor") {
    const CellMesh cell = build_cell_mesh(test::square_cell(0.25, 8));
    const HookeTensor a = HookeTensor::isotropic(1.0, 1.0);
    HomogenizedTensor ahom = homogenized_tensor(solve_correctors(cell, a), cell, a);
    ahom.tensor(0, 2) += 0.1;  // break A^hom_1112 = A^hom_1211
    CHECK_THROWS_AS(validate_hom_tensor(ahom), ValidationError);
}

TEST_CASE("ellipticity constant decreases with inclusion size") {
    const HookeTensor a = HookeTensor::isotropic(1.0, 1.0);
    double prev = std::numeric_limits<double>::infinity();
    for (const double hw : {0.1, 0.2, 0.3, 0.4}) {
        const CellMesh cell = build_cell_mesh(test::square_cell(hw, 16));
        const HomogenizedTensor ahom = homogenized_tensor(solve_correctors(cell, a), cell, a);
        const double c1 = validate_hom_tensor(ahom).ellipticity_constant;
        CHECK(c1 > 0.0);
        CHECK(c1 < prev);
        prev = c1;
    }
}

TEST_CASE("unit-strain symmetry: the shear corrector is unique") {
    const CellMesh cell = build_cell_mesh(test::square_cell(0.25, 8));
    const HookeTensor a = HookeTensor::isotropic(1.0, 1.0);
    // M^12 and M^21 coincide, so repeated solves give the identical field.
    const DisplacementField c1 = solve_cell_corrector(cell, a, 2);
    const DisplacementField c2 = solve_cell_corrector(cell, a, 2);
    CHECK(c1 == c2);
}

TEST_CASE("A^hom file roundtrip") {
    const CellMesh cell = build_cell_mesh(test::disk_cell(0.25, 8));
    const HookeTensor a = HookeTensor::isotropic(1.0, 1.0);
    const HomogenizedTensor ahom = homogenized_tensor(solve_correctors(cell, a), cell, a);
    const std::string path =
        (std::filesystem::temp_directory_path() / "hcoc_ahom_test.txt").string();
    save_hom_tensor(path, ahom);
    const HomogenizedTensor back = load_hom_tensor(path);
    CHECK(back.geometry_hash == ahom.geometry_hash);
    for (int i = 0; i < 9; ++i) CHECK(back.tensor.voigt[i] == ahom.tensor.voigt[i]);
}

TEST_CASE("inclusion cell operator") {
    const CellMesh cell = build_cell_mesh(test::square_cell(0.24, 4));
    const HookeTensor a = HookeTensor::isotropic(1.0, 1.0);
    const InclusionCellSpace space(cell, a);
    CHECK(space.dof_count() == 2);  // one interior node at this resolution

    // s = 0: pure stiffness; zero rhs gives zero.
    const InclusionCellOperator op0 = make_inclusion_cell_operator(space, 0.0, 1.0, 1.0, 2.0);
    CHECK(norm2(op0.solve(Vector(space.dof_count(), 0.0))) == 0.0);

    // Constant load with alpha = 0: Dirichlet cell problem, dense oracle.
    const InclusionCellOperator opl = make_inclusion_cell_operator(space, 1.0, 1.0, 0.0, 2.0);
    const Vector b = space.const_load({1.0, -2.0});
    const Vector w = opl.solve(b);
    const Vector wd = oracle::dense_solve(oracle::densify(space.K, b));
    Vector diff = w;
    axpy(-1.0, wd, diff);
    CHECK(norm2(diff) <= 1e-10 * (1.0 + norm2(wd)));

    // Doubling kappa scales the mass contribution by exactly 1/4.
    const InclusionCellOperator o1 = make_inclusion_cell_operator(space, 1.0, 2.0, 3.0, 2.0);
    const InclusionCellOperator o2 = make_inclusion_cell_operator(space, 1.0, 4.0, 3.0, 2.0);
    CHECK(o1.mass_coeff == 4.0 * o2.mass_coeff);

    CHECK_THROWS_AS(make_inclusion_cell_operator(space, -1.0, 1.0, 1.0, 2.0), ValidationError);
    CHECK_THROWS_AS(
        make_inclusion_cell_operator(space, 1.0, ScaleParams::infinite, 1.0, 2.0),
        ValidationError);

    // The cache reuses factorizations keyed on s.
    CellOperatorCache cache(space, 1.0, 1.0, 2.0);
    const InclusionCellOperator* p1 = &cache.at(0.5);
    const InclusionCellOperator* p2 = &cache.at(0.5);
    CHECK(p1 == p2);
    cache.at(0.25);
    CHECK(cache.size() == 2);
}
