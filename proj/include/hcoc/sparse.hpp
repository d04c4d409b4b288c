#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "hcoc/types.hpp"

namespace hcoc {

// Symmetric sparse matrix in compressed row form, with a list of constrained
// DOFs (eliminated rows/columns carry a unit diagonal).
struct SparseOperator {
    int n = 0;
    std::vector<int> row_ptr;
    std::vector<int> col;
    std::vector<double> val;
    std::vector<int> constrained;            // sorted DOF indices
    std::vector<std::uint8_t> is_constrained;

    void mul(const double* x, double* y) const;
    Vector mul(const Vector& x) const;
    Vector diagonal() const;
    double coeff(int i, int j) const;
    // Max |A_ij - A_ji| over the stored pattern.
    double symmetry_gap() const;

    // x^T A y
    double inner(const Vector& x, const Vector& y) const;

    // Zero rows and columns of the listed DOFs, set unit diagonal.
    void eliminate(const std::vector<int>& dofs);

    void zero_constrained(Vector& v) const;
};

// Deterministic row-map accumulator for symmetric assembly.
class SparseBuilder {
public:
    explicit SparseBuilder(int n);
    void add(int i, int j, double v);
    SparseOperator compress() const;
    int size() const { return n_; }

private:
    int n_;
    std::vector<std::vector<std::pair<int, double>>> rows_;  // unsorted, merged on compress
};

// Matrix-free SPD operator for the CG kernel.
struct LinOp {
    int n = 0;
    std::function<void(const double*, double*)> apply;
};

struct RankOneUpdate {
    Vector b;
    double c = 0.0;  // op + c * b b^T, c >= 0
};

struct CgReport {
    int iterations = 0;
    double rel_residual = 0.0;
    bool converged = false;
};

struct CgOptions {
    double tol = 1e-10;     // relative to ||rhs||
    int max_iterations = 0; // 0: choose from problem size
    bool warm_start = false;
};

// Preconditioned conjugate gradients with diagonal (Jacobi) scaling.
// inv_diag may be empty (identity preconditioner).
CgReport cg_solve(const LinOp& op, const Vector& rhs, Vector& x,
                  const Vector& inv_diag, const CgOptions& opts);
CgReport cg_solve(const LinOp& op, const Vector& rhs, Vector& x,
                  const std::function<void(const Vector&, Vector&)>& precondition,
                  const CgOptions& opts);

// Solves op * x = rhs (optionally op + c b b^T) on the subspace of
// unconstrained DOFs; constrained entries of the solution are exactly zero.
// The rank-one update is applied inside the operator, never formed densely.
Vector solve_spd(const SparseOperator& op, const Vector& rhs,
                 const std::optional<RankOneUpdate>& rank_one = std::nullopt,
                 const CgOptions& opts = {}, CgReport* report = nullptr,
                 const Vector* x0 = nullptr);

// K + c * M restricted to the unconstrained subspace of K, with an optional
// rank-one term r bb^T applied matrix-free. K carries the eliminated
// constraints (unit diagonal); M is raw and gets projected on the fly.
struct ShiftedOperator {
    const SparseOperator* K = nullptr;
    const SparseOperator* M = nullptr;  // may be null when c == 0
    double c = 0.0;
    std::optional<RankOneUpdate> rank_one;
    // 2x2 node-block Jacobi instead of the scalar diagonal; used for very
    // small contrasts, where the inclusion blocks carry the delta^2 scale.
    bool block_jacobi = false;
};

Vector apply_shifted(const ShiftedOperator& op, const Vector& x);
Vector solve_shifted(const ShiftedOperator& op, const Vector& rhs, double tol,
                     CgReport* report = nullptr, const Vector* x0 = nullptr);

// Dense Cholesky for small SPD systems (cell-local operators).
class DenseCholesky {
public:
    DenseCholesky() = default;
    // a: row-major n x n, symmetric positive definite.
    DenseCholesky(std::vector<double> a, int n);
    Vector solve(const Vector& rhs) const;
    int size() const { return n_; }

private:
    int n_ = 0;
    std::vector<double> l_;
};

}  // namespace hcoc
