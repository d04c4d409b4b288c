#pragma once

// Shared builders for the test suites.

#include <random>

#include "hcoc/ocp.hpp"
#include "hcoc/sweep.hpp"

namespace hcoc::test {

inline CellGeometry square_cell(double halfwidth, int res) {
    CellGeometry g;
    g.shape = CellGeometry::Shape::square;
    g.param = halfwidth;
    g.resolution = res;
    return g;
}

inline CellGeometry disk_cell(double radius, int res) {
    CellGeometry g;
    g.shape = CellGeometry::Shape::disk;
    g.param = radius;
    g.resolution = res;
    return g;
}

inline CellGeometry plain_cell(int res) {
    CellGeometry g;
    g.param = 0.0;
    g.resolution = res;
    return g;
}

inline PhysicsParams physics(double alpha, double p, double gamma, const std::string& f,
                             const std::string& ud) {
    PhysicsParams phys;
    phys.alpha = alpha;
    phys.p = p;
    phys.gamma = gamma;
    phys.f = parse_field(f);
    phys.u_d = parse_field(ud);
    return phys;
}

// Tiny eps-delta problem; the default fits the dense-oracle guard.
struct TinyProblem {
    CellMesh cell;
    MacroMesh mesh;
    ContrastField contrast;
    StateProblem prob;

    TinyProblem(const CellGeometry& geom, int n, double delta, const PhysicsParams& phys,
                double lambda = 1.0, double mu = 1.0)
        : cell(build_cell_mesh(geom)),
          mesh(build_macro_mesh(cell, n)),
          contrast(ContrastField::uniform(HookeTensor::isotropic(lambda, mu), delta)),
          prob(mesh, contrast, phys) {}
};

inline Vector random_vector(std::size_t n, unsigned seed, double amp = 1.0) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> dist(-amp, amp);
    Vector v(n);
    for (double& x : v) x = dist(rng);
    return v;
}

// Random admissible displacement (zero on Gamma0).
inline DisplacementField random_admissible(const MacroMesh& mesh, unsigned seed,
                                           double amp = 1.0) {
    Vector v = random_vector(std::size_t(mesh.dof_count()), seed, amp);
    for (const int d : gamma0_dofs(mesh)) v[std::size_t(d)] = 0.0;
    return v;
}

// Random control supported on the inclusion DOFs.
inline ControlField random_theta(const StateProblem& prob, unsigned seed, double amp = 1.0) {
    const Vector full = random_vector(std::size_t(prob.mesh->dof_count()), seed, amp);
    ControlField theta = ControlField::zero(*prob.mesh);
    for (const int d : prob.inclusion_dofs) theta.v[std::size_t(d)] = full[std::size_t(d)];
    return theta;
}

inline TwoScaleControl random_theta_hat(const LimitProblem& prob, unsigned seed,
                                        double amp = 1.0) {
    TwoScaleControl t = prob.zero_control();
    t.v = random_vector(t.v.size(), seed, amp);
    return t;
}

struct LimitSetup {
    CellMesh cell;
    MacroMesh macro;
    CorrectorSet correctors;
    HomogenizedTensor ahom;
    HookeTensor a;
    LimitProblem prob;

    LimitSetup(const CellGeometry& geom, int macro_n, const PhysicsParams& phys, double kappa,
               double lambda = 1.0, double mu = 1.0)
        : cell(build_cell_mesh(geom)),
          macro(plain_macro_mesh(macro_n)),
          correctors(solve_correctors(cell, HookeTensor::isotropic(lambda, mu))),
          ahom(homogenized_tensor(correctors, cell, HookeTensor::isotropic(lambda, mu))),
          a(HookeTensor::isotropic(lambda, mu)),
          prob(macro, cell, ahom, a, phys, kappa) {}
};

}  // namespace hcoc::test
