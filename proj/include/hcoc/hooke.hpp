#pragma once

#include <array>
#include <string>
#include <vector>

#include "hcoc/geometry.hpp"
#include "hcoc/types.hpp"

namespace hcoc {

// Fourth-order Hooke tensor with minor and major symmetries, stored as the
// symmetric Voigt matrix (3x3 in 2D, engineering shear convention:
// stress (s11, s22, s12) = C * strain (e11, e22, 2*e12)).
//
// Ellipticity is measured in the Kelvin basis (sqrt(2)-scaled shear), where
// the smallest matrix eigenvalue equals the Frobenius coercivity constant
// of the tensor contraction A S : S >= K |S|_F^2.
struct HookeTensor {
    int dim = 2;
    std::array<double, 9> voigt{};  // row-major 3x3

    double& operator()(int i, int j) { return voigt[3 * i + j]; }
    double operator()(int i, int j) const { return voigt[3 * i + j]; }

    static HookeTensor isotropic(double lambda, double mu);
    // Parses "iso:lambda=<v>,mu=<v>".
    static HookeTensor parse(const std::string& spec);

    HookeTensor scaled(double factor) const;
    std::array<double, 9> kelvin() const;
    // Eigenvalues of the Kelvin matrix, ascending.
    std::array<double, 3> kelvin_eigenvalues() const;
    double symmetry_residual() const;  // max |C_ij - C_ji| / max |C_ij|

    // Throws ValidationError unless symmetric and coercive with constant
    // at least k_min.
    void validate(double k_min = 0.0) const;
};

// A S : T for symmetric 2x2 matrices in engineering Voigt vectors.
double contract(const HookeTensor& a, const std::array<double, 3>& s,
                const std::array<double, 3>& t);

// Piecewise Hooke field on a tiled mesh: value is delta^2 * A on inclusion
// elements and A on matrix elements, with A possibly y-periodic (one base
// tensor per reference-cell element).
struct ContrastField {
    std::vector<HookeTensor> base;  // size 1 (uniform) or cell element count
    double delta = 1.0;

    static ContrastField uniform(const HookeTensor& a, double delta);

    const HookeTensor& base_at(int cell_elem) const {
        return base.size() == 1 ? base[0] : base.at(std::size_t(cell_elem));
    }
    HookeTensor value(Region region, int cell_elem) const {
        const HookeTensor& a = base_at(cell_elem);
        return region == Region::inclusion ? a.scaled(delta * delta) : a;
    }

    void validate(double k_min = 0.0) const;
};

// Symmetric eigenvalues of a small dense matrix (ascending), cyclic Jacobi.
std::vector<double> symmetric_eigenvalues(const std::vector<double>& a, int n);

}  // namespace hcoc
