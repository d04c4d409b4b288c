#pragma once

#include <array>
#include <map>
#include <memory>
#include <string>

#include "hcoc/fem.hpp"

namespace hcoc {

// Periodic cell-problem correctors chi^2_ij on Y2: periodic across the cell
// boundary, zero mean over Y2, zero on inclusion-interior nodes by
// convention. One field per symmetric unit strain (3 in 2D: 11, 22, 12).
struct CorrectorSet {
    std::array<DisplacementField, 3> chi;
    std::uint64_t geometry_hash = 0;
};

// Voigt index pairs of the unit strains M^ij in assembly order.
constexpr std::array<std::pair<int, int>, 3> kStrainPairs = {{{0, 0}, {1, 1}, {0, 1}}};

enum class CorrectorNormalization {
    zero_mean,  // per-component zero mean over Y2 (default)
    pin_node,   // pin one master node; used to check A^hom is normalization-independent
};

// Solves the ij-th cell problem on Y2 with the unit strain M^ij as load.
DisplacementField solve_cell_corrector(const CellMesh& cell, const HookeTensor& a, int ij,
                                       double tol_lin = 1e-10,
                                       CorrectorNormalization norm = CorrectorNormalization::zero_mean);

CorrectorSet solve_correctors(const CellMesh& cell, const HookeTensor& a,
                              double tol_lin = 1e-10,
                              CorrectorNormalization norm = CorrectorNormalization::zero_mean);

struct HomogenizedTensor {
    HookeTensor tensor;            // energy-form assembly (exactly symmetric)
    HookeTensor flux_form;         // stress-average assembly
    double flux_energy_gap = 0.0;  // max entrywise relative gap between the two
    std::uint64_t geometry_hash = 0;
};

// Averages the corrected unit-strain responses over Y2; the flux and energy
// assemblies agree by Galerkin orthogonality and both are retained.
HomogenizedTensor homogenized_tensor(const CorrectorSet& correctors, const CellMesh& cell,
                                     const HookeTensor& a);

struct HomValidationReport {
    double symmetry_residual = 0.0;
    std::array<double, 3> kelvin_eigenvalues{};
    double ellipticity_constant = 0.0;  // smallest Kelvin eigenvalue
    double flux_energy_gap = 0.0;
};

// Checks symmetries and ellipticity; throws ValidationError naming the
// failing entry or eigenvalue.
HomValidationReport validate_hom_tensor(const HomogenizedTensor& ahom,
                                        double sym_tol = 1e-10);

void save_hom_tensor(const std::string& path, const HomogenizedTensor& ahom);
HomogenizedTensor load_hom_tensor(const std::string& path);

// DOF space of cell fields supported on the inclusion and vanishing on Y2
// (hence on the interface): the Y1-interior nodes.
struct InclusionCellSpace {
    const CellMesh* cell = nullptr;
    std::vector<int> nodes;         // Y1-interior node ids
    std::vector<int> dof_base;      // per node: 2*index into `nodes`, or -1
    std::vector<int> y1_elements;
    SparseOperator K;               // stiffness with the base tensor
    SparseOperator M;               // inclusion mass
    Vector phi_integral;            // per dof: integral of the basis function over Y1

    InclusionCellSpace() = default;
    InclusionCellSpace(const CellMesh& cell, const HookeTensor& a);

    int dof_count() const { return 2 * int(nodes.size()); }
    int dof_of(int node, int comp) const {
        const int b = dof_base[node];
        return b < 0 ? -1 : b + comp;
    }
    // integral over Y1 of each component of a coefficient field
    Vec2 field_integral(const Vector& w) const;
    // load vector of a constant field
    Vector const_load(Vec2 c) const;
    // expands inclusion-space dofs to a full nodal cell field
    DisplacementField expand(const Vector& w) const;
};

// Factorized SPD cell operator K + (alpha s^p / kappa^2) M for repeated
// right-hand sides; kappa must be finite (for kappa = inf the block is
// bypassed entirely: W-hat = 0).
struct InclusionCellOperator {
    double s = 0.0;
    double mass_coeff = 0.0;
    DenseCholesky factor;

    Vector solve(const Vector& rhs) const { return factor.solve(rhs); }
};

InclusionCellOperator make_inclusion_cell_operator(const InclusionCellSpace& space, double s,
                                                   double kappa, double alpha, double p);

// Factorizations keyed on s rounded to 12 significant digits; the two-scale
// outer iteration re-uses them across macro elements and bisection steps.
class CellOperatorCache {
public:
    CellOperatorCache(const InclusionCellSpace& space, double kappa, double alpha, double p)
        : space_(&space), kappa_(kappa), alpha_(alpha), p_(p) {}

    const InclusionCellOperator& at(double s);
    std::size_t size() const { return cache_.size(); }

private:
    const InclusionCellSpace* space_;
    double kappa_, alpha_, p_;
    std::map<std::string, std::unique_ptr<InclusionCellOperator>> cache_;
};

}  // namespace hcoc
