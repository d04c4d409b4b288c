#include "hcoc/sparse.hpp"

#include <algorithm>
#include <cmath>

namespace hcoc {

void SparseOperator::mul(const double* x, double* y) const {
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int k = row_ptr[i]; k < row_ptr[i + 1]; ++k) s += val[k] * x[col[k]];
        y[i] = s;
    }
}

Vector SparseOperator::mul(const Vector& x) const {
    Vector y(n);
    mul(x.data(), y.data());
    return y;
}

Vector SparseOperator::diagonal() const {
    Vector d(n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int k = row_ptr[i]; k < row_ptr[i + 1]; ++k)
            if (col[k] == i) d[i] = val[k];
    return d;
}

double SparseOperator::coeff(int i, int j) const {
    for (int k = row_ptr[i]; k < row_ptr[i + 1]; ++k)
        if (col[k] == j) return val[k];
    return 0.0;
}

double SparseOperator::symmetry_gap() const {
    double g = 0.0;
    for (int i = 0; i < n; ++i)
        for (int k = row_ptr[i]; k < row_ptr[i + 1]; ++k)
            g = std::max(g, std::abs(val[k] - coeff(col[k], i)));
    return g;
}

double SparseOperator::inner(const Vector& x, const Vector& y) const {
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
        double row = 0.0;
        for (int k = row_ptr[i]; k < row_ptr[i + 1]; ++k) row += val[k] * y[col[k]];
        s += x[i] * row;
    }
    return s;
}

void SparseOperator::eliminate(const std::vector<int>& dofs) {
    if (is_constrained.empty()) is_constrained.assign(n, 0);
    for (const int d : dofs) is_constrained[d] = 1;
    constrained.clear();
    for (int i = 0; i < n; ++i)
        if (is_constrained[i]) constrained.push_back(i);
    for (int i = 0; i < n; ++i)
        for (int k = row_ptr[i]; k < row_ptr[i + 1]; ++k) {
            const int j = col[k];
            if (!is_constrained[i] && !is_constrained[j]) continue;
            val[k] = (i == j) ? 1.0 : 0.0;
        }
}

void SparseOperator::zero_constrained(Vector& v) const {
    for (const int d : constrained) v[d] = 0.0;
}

SparseBuilder::SparseBuilder(int n) : n_(n), rows_(n) {}

void SparseBuilder::add(int i, int j, double v) { rows_[i].emplace_back(j, v); }

SparseOperator SparseBuilder::compress() const {
    SparseOperator op;
    op.n = n_;
    op.row_ptr.assign(n_ + 1, 0);
    std::vector<std::pair<int, double>> row;
    std::vector<std::vector<std::pair<int, double>>> merged(n_);
    for (int i = 0; i < n_; ++i) {
        row.assign(rows_[i].begin(), rows_[i].end());
        std::stable_sort(row.begin(), row.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        auto& out = merged[i];
        for (const auto& [j, v] : row) {
            if (!out.empty() && out.back().first == j) out.back().second += v;
            else out.emplace_back(j, v);
        }
        op.row_ptr[i + 1] = op.row_ptr[i] + int(out.size());
    }
    op.col.resize(op.row_ptr[n_]);
    op.val.resize(op.row_ptr[n_]);
    for (int i = 0; i < n_; ++i) {
        int k = op.row_ptr[i];
        for (const auto& [j, v] : merged[i]) {
            op.col[k] = j;
            op.val[k] = v;
            ++k;
        }
    }
    op.is_constrained.assign(n_, 0);
    return op;
}

CgReport cg_solve(const LinOp& op, const Vector& rhs, Vector& x,
                  const std::function<void(const Vector&, Vector&)>& precondition,
                  const CgOptions& opts) {
    const int n = op.n;
    CgReport rep;
    const double bnorm = norm2(rhs);
    if (bnorm == 0.0 && !opts.warm_start) {
        x.assign(n, 0.0);
        rep.converged = true;
        return rep;
    }
    if (!opts.warm_start || int(x.size()) != n) x.assign(n, 0.0);

    Vector r(n), z(n), p(n), ap(n);
    op.apply(x.data(), ap.data());
    for (int i = 0; i < n; ++i) r[i] = rhs[i] - ap[i];

    const double target = opts.tol * (bnorm > 0.0 ? bnorm : 1.0);
    const int max_it = opts.max_iterations > 0 ? opts.max_iterations : std::max(200, 40 * n);

    precondition(r, z);
    p = z;
    double rz = dot(r, z);
    double rnorm = norm2(r);
    for (int it = 0; it < max_it && rnorm > target; ++it) {
        op.apply(p.data(), ap.data());
        const double pap = dot(p, ap);
        if (!(pap > 0.0)) throw SolverError("CG encountered a non-SPD direction");
        const double a = rz / pap;
        axpy(a, p, x);
        axpy(-a, ap, r);
        precondition(r, z);
        const double rz_next = dot(r, z);
        const double beta = rz_next / rz;
        rz = rz_next;
        for (int i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
        rnorm = norm2(r);
        rep.iterations = it + 1;
    }
    rep.rel_residual = bnorm > 0.0 ? rnorm / bnorm : rnorm;
    rep.converged = rnorm <= target;
    if (!rep.converged)
        throw SolverError("CG did not converge in " + std::to_string(max_it) +
                          " iterations, relative residual " + std::to_string(rep.rel_residual));
    return rep;
}

CgReport cg_solve(const LinOp& op, const Vector& rhs, Vector& x, const Vector& inv_diag,
                  const CgOptions& opts) {
    return cg_solve(
        op, rhs, x,
        [&inv_diag](const Vector& in, Vector& out) {
            if (inv_diag.empty()) out = in;
            else {
                out.resize(in.size());
                for (std::size_t i = 0; i < in.size(); ++i) out[i] = inv_diag[i] * in[i];
            }
        },
        opts);
}

Vector solve_spd(const SparseOperator& op, const Vector& rhs,
                 const std::optional<RankOneUpdate>& rank_one, const CgOptions& opts,
                 CgReport* report, const Vector* x0) {
    if (int(rhs.size()) != op.n) throw SolverError("rhs size does not match operator");
    Vector b = rhs;
    op.zero_constrained(b);

    Vector rb;
    double c = 0.0;
    if (rank_one) {
        if (!(rank_one->c >= 0.0)) throw SolverError("rank-one scale must be nonnegative");
        rb = rank_one->b;
        op.zero_constrained(rb);
        c = rank_one->c;
    }

    LinOp lop;
    lop.n = op.n;
    lop.apply = [&op, &rb, c](const double* x, double* y) {
        op.mul(x, y);
        if (c > 0.0) {
            double s = 0.0;
            for (std::size_t i = 0; i < rb.size(); ++i) s += rb[i] * x[i];
            s *= c;
            for (std::size_t i = 0; i < rb.size(); ++i) y[i] += s * rb[i];
        }
    };

    Vector diag = op.diagonal();
    if (c > 0.0)
        for (int i = 0; i < op.n; ++i) diag[i] += c * rb[i] * rb[i];
    Vector inv_diag(op.n);
    for (int i = 0; i < op.n; ++i) {
        if (!(diag[i] > 0.0)) throw SolverError("nonpositive diagonal at dof " + std::to_string(i));
        inv_diag[i] = 1.0 / diag[i];
    }

    Vector x;
    CgOptions local = opts;
    if (x0) {
        x = *x0;
        op.zero_constrained(x);
        local.warm_start = true;
    }
    const CgReport rep = cg_solve(lop, b, x, inv_diag, local);
    op.zero_constrained(x);
    if (report) *report = rep;
    return x;
}

namespace {

void shifted_apply_raw(const ShiftedOperator& op, const Vector& rb, const double* x,
                       double* y, Vector& tmp) {
    op.K->mul(x, y);
    if (op.c != 0.0 && op.M) {
        tmp.resize(op.K->n);
        op.M->mul(x, tmp.data());
        op.K->zero_constrained(tmp);
        for (int i = 0; i < op.K->n; ++i) y[i] += op.c * tmp[i];
    }
    if (op.rank_one && op.rank_one->c > 0.0) {
        double s = 0.0;
        for (std::size_t i = 0; i < rb.size(); ++i) s += rb[i] * x[i];
        s *= op.rank_one->c;
        for (std::size_t i = 0; i < rb.size(); ++i) y[i] += s * rb[i];
    }
}

}  // namespace

Vector apply_shifted(const ShiftedOperator& op, const Vector& x) {
    Vector rb;
    if (op.rank_one) {
        rb = op.rank_one->b;
        op.K->zero_constrained(rb);
    }
    Vector y(op.K->n), tmp;
    shifted_apply_raw(op, rb, x.data(), y.data(), tmp);
    return y;
}

namespace {

// 2x2 inverses of the paired diagonal blocks of K + c M (+ rank-one).
std::vector<double> block_jacobi_inverse(const ShiftedOperator& op, const Vector& rb,
                                         const Vector& diag) {
    const SparseOperator& K = *op.K;
    std::vector<double> blocks(std::size_t(2) * K.n, 0.0);
    for (int k = 0; 2 * k + 1 < K.n; ++k) {
        const int i = 2 * k, j = 2 * k + 1;
        double off = K.coeff(i, j);
        if (op.c != 0.0 && op.M && !(K.is_constrained[i] || K.is_constrained[j]))
            off += op.c * op.M->coeff(i, j);
        if (op.rank_one && op.rank_one->c > 0.0) off += op.rank_one->c * rb[i] * rb[j];
        const double a = diag[i], d = diag[j];
        const double det = a * d - off * off;
        if (!(det > 0.0)) throw SolverError("indefinite 2x2 block in the preconditioner");
        blocks[std::size_t(4) * k + 0] = d / det;
        blocks[std::size_t(4) * k + 1] = -off / det;
        blocks[std::size_t(4) * k + 2] = -off / det;
        blocks[std::size_t(4) * k + 3] = a / det;
    }
    return blocks;
}

}  // namespace

Vector solve_shifted(const ShiftedOperator& op, const Vector& rhs, double tol,
                     CgReport* report, const Vector* x0) {
    const SparseOperator& K = *op.K;
    Vector rb;
    if (op.rank_one) {
        if (!(op.rank_one->c >= 0.0)) throw SolverError("rank-one scale must be nonnegative");
        rb = op.rank_one->b;
        K.zero_constrained(rb);
    }
    Vector tmp;
    LinOp lop{K.n, [&op, &rb, &tmp](const double* x, double* y) {
                  shifted_apply_raw(op, rb, x, y, tmp);
              }};
    Vector diag = K.diagonal();
    if (op.c != 0.0 && op.M) {
        Vector md = op.M->diagonal();
        K.zero_constrained(md);
        for (int i = 0; i < K.n; ++i) diag[i] += op.c * md[i];
    }
    if (op.rank_one && op.rank_one->c > 0.0)
        for (int i = 0; i < K.n; ++i) diag[i] += op.rank_one->c * rb[i] * rb[i];
    for (int i = 0; i < K.n; ++i)
        if (!(diag[i] > 0.0)) throw SolverError("nonpositive diagonal in shifted operator");

    Vector b = rhs;
    K.zero_constrained(b);
    CgOptions opts;
    opts.tol = tol;
    Vector x;
    if (x0) {
        x = *x0;
        K.zero_constrained(x);
        opts.warm_start = true;
    }
    CgReport rep;
    if (op.block_jacobi && K.n % 2 == 0) {
        const std::vector<double> blocks = block_jacobi_inverse(op, rb, diag);
        rep = cg_solve(lop, b, x,
                       [&blocks](const Vector& r, Vector& z) {
                           z.resize(r.size());
                           for (std::size_t k = 0; 2 * k + 1 < r.size(); ++k) {
                               const double* inv = &blocks[4 * k];
                               z[2 * k] = inv[0] * r[2 * k] + inv[1] * r[2 * k + 1];
                               z[2 * k + 1] = inv[2] * r[2 * k] + inv[3] * r[2 * k + 1];
                           }
                       },
                       opts);
    } else {
        Vector inv_diag(K.n);
        for (int i = 0; i < K.n; ++i) inv_diag[i] = 1.0 / diag[i];
        rep = cg_solve(lop, b, x, inv_diag, opts);
    }
    K.zero_constrained(x);
    if (report) *report = rep;
    return x;
}

DenseCholesky::DenseCholesky(std::vector<double> a, int n) : n_(n), l_(std::move(a)) {
    auto at = [this](int i, int j) -> double& { return l_[std::size_t(i) * n_ + j]; };
    for (int j = 0; j < n_; ++j) {
        for (int k = 0; k < j; ++k) {
            const double ljk = at(j, k);
            for (int i = j; i < n_; ++i) at(i, j) -= at(i, k) * ljk;
        }
        if (!(at(j, j) > 0.0))
            throw SolverError("dense Cholesky: matrix is not positive definite at pivot " +
                              std::to_string(j));
        const double d = std::sqrt(at(j, j));
        at(j, j) = d;
        for (int i = j + 1; i < n_; ++i) at(i, j) /= d;
    }
}

Vector DenseCholesky::solve(const Vector& rhs) const {
    Vector x = rhs;
    auto at = [this](int i, int j) { return l_[std::size_t(i) * n_ + j]; };
    for (int i = 0; i < n_; ++i) {
        double s = x[i];
        for (int k = 0; k < i; ++k) s -= at(i, k) * x[k];
        x[i] = s / at(i, i);
    }
    for (int i = n_ - 1; i >= 0; --i) {
        double s = x[i];
        for (int k = i + 1; k < n_; ++k) s -= at(k, i) * x[k];
        x[i] = s / at(i, i);
    }
    return x;
}

}  // namespace hcoc
