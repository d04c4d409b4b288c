#include "hcoc/unfolding.hpp"

#include <cmath>

namespace hcoc {

namespace {

constexpr double kGauss = 0.57735026918962576451;

void check_congruent(const MacroMesh& macro, const CellMesh& cell) {
    if (macro.res != cell.nx)
        throw ValidationError("macro mesh resolution does not match the cell mesh");
    if (macro.cell_geom.resolution != cell.geom.resolution ||
        macro.cell_geom.shape != cell.geom.shape ||
        std::abs(macro.cell_geom.param - cell.geom.param) > 1e-15)
        throw ValidationError("macro mesh was tiled from a different cell geometry");
}

// Bilinear value of 4 nodal corner values at reference point (xi, eta).
Vec2 corner_eval(const std::array<Vec2, 4>& c, double xi, double eta) {
    static const double xs[4] = {-1.0, 1.0, 1.0, -1.0};
    static const double ys[4] = {-1.0, -1.0, 1.0, 1.0};
    Vec2 out{0.0, 0.0};
    for (int a = 0; a < 4; ++a) {
        const double w = 0.25 * (1.0 + xs[a] * xi) * (1.0 + ys[a] * eta);
        out.x += w * c[a].x;
        out.y += w * c[a].y;
    }
    return out;
}

}  // namespace

UnfoldedField unfold(const DisplacementField& u, const MacroMesh& macro, const CellMesh& cell) {
    check_congruent(macro, cell);
    const int n = macro.n, r = cell.nx;
    UnfoldedField uf;
    uf.n = n;
    uf.cell_nodes = cell.node_count();
    uf.v.assign(std::size_t(n) * n * cell.node_count() * 2, 0.0);
    for (int ky = 0; ky < n; ++ky)
        for (int kx = 0; kx < n; ++kx) {
            const int k = ky * n + kx;
            for (int j = 0; j <= r; ++j)
                for (int i = 0; i <= r; ++i) {
                    const int cn = cell.node_id(i, j);
                    const int mn = macro.node_id(kx * r + i, ky * r + j);
                    uf.at(k, cn, 0) = u[2 * mn];
                    uf.at(k, cn, 1) = u[2 * mn + 1];
                }
        }
    return uf;
}

DisplacementField fold(const UnfoldedField& uf, const MacroMesh& macro, const CellMesh& cell) {
    check_congruent(macro, cell);
    const int n = macro.n, r = cell.nx;
    if (uf.n != n || uf.cell_nodes != cell.node_count())
        throw ValidationError("unfolded field does not match the meshes");
    DisplacementField u(macro.dof_count(), 0.0);
    for (int ky = 0; ky < n; ++ky)
        for (int kx = 0; kx < n; ++kx) {
            const int k = ky * n + kx;
            for (int j = 0; j <= r; ++j)
                for (int i = 0; i <= r; ++i) {
                    const int cn = cell.node_id(i, j);
                    const int mn = macro.node_id(kx * r + i, ky * r + j);
                    u[2 * mn] = uf.at(k, cn, 0);
                    u[2 * mn + 1] = uf.at(k, cn, 1);
                }
        }
    return u;
}

double unfolded_norm(const UnfoldedField& uf, const CellMesh& cell) {
    const double eps2 = 1.0 / (double(uf.n) * uf.n);
    const double w = cell.h() * cell.h() / 4.0;
    double out = 0.0;
    for (int k = 0; k < uf.n * uf.n; ++k)
        for (int e = 0; e < cell.elem_count(); ++e) {
            const auto& conn = cell.elems[e];
            std::array<Vec2, 4> c;
            for (int a = 0; a < 4; ++a)
                c[a] = {uf.at(k, conn[a], 0), uf.at(k, conn[a], 1)};
            for (const double xi : {-kGauss, kGauss})
                for (const double eta : {-kGauss, kGauss}) {
                    const Vec2 v = corner_eval(c, xi, eta);
                    out += eps2 * w * (v.x * v.x + v.y * v.y);
                }
        }
    return std::sqrt(out);
}

double unfold_integral_gap(const Vector& psi, const MacroMesh& macro, const CellMesh& cell) {
    check_congruent(macro, cell);
    if (int(psi.size()) != macro.node_count())
        throw ValidationError("scalar field size does not match the macro mesh");
    // int_Omega of the bilinear interpolant.
    double direct = 0.0;
    const double we = macro.h() * macro.h() / 4.0;
    for (int e = 0; e < macro.elem_count(); ++e)
        for (const int nid : macro.elems[e]) direct += we * psi[nid];
    // Unfolded integral over Omega x Y.
    const double eps2 = 1.0 / (double(macro.n) * macro.n);
    const double wc = cell.h() * cell.h() / 4.0;
    const int r = cell.nx;
    double unfolded = 0.0;
    for (int ky = 0; ky < macro.n; ++ky)
        for (int kx = 0; kx < macro.n; ++kx)
            for (int e = 0; e < cell.elem_count(); ++e) {
                const int i = e % r, j = e / r;
                const int corn[4][2] = {{i, j}, {i + 1, j}, {i + 1, j + 1}, {i, j + 1}};
                for (const auto& c : corn)
                    unfolded += eps2 * wc * psi[macro.node_id(kx * r + c[0], ky * r + c[1])];
            }
    return std::abs(direct - unfolded);
}

namespace {

struct WhatEval {
    const LimitFieldView* lim;
    const TwoScaleState* state;

    bool active() const {
        return !std::isinf(lim->kappa) && lim->space != nullptr && state->w_allocated();
    }
    // W-hat(x, .)/kappa evaluated on cell element ce at reference (xi, eta).
    Vec2 eval(double x, double y, int ce, double xi, double eta) const {
        const auto [ex, ey] = owner(x, y);
        const Vector& we = state->what[std::size_t(ey * lim->macro->nx + ex)];
        const auto& conn = lim->cell->elems[ce];
        std::array<Vec2, 4> c;
        for (int a = 0; a < 4; ++a) {
            const int base = lim->space->dof_base[conn[a]];
            c[a] = base < 0 ? Vec2{0.0, 0.0} : Vec2{we[base], we[base + 1]};
        }
        const Vec2 v = corner_eval(c, xi, eta);
        return {v.x / lim->kappa, v.y / lim->kappa};
    }

    std::pair<int, int> owner(double x, double y) const {
        const int nx = lim->macro->nx;
        auto clamp_elem = [nx](double t) {
            const int k = int(std::floor(t * nx));
            return std::min(std::max(k, 0), nx - 1);
        };
        return {clamp_elem(x), clamp_elem(y)};
    }
};

}  // namespace

double two_scale_state_error(const DisplacementField& u_eps, const MacroMesh& micro,
                             const CellMesh& cell, const LimitFieldView& lim,
                             const TwoScaleState& limit_state) {
    check_congruent(micro, cell);
    const UnfoldedField uf = unfold(u_eps, micro, cell);
    const WhatEval what{&lim, &limit_state};
    const double eps = micro.epsilon;
    const double eps2 = eps * eps;
    const double w = cell.h() * cell.h() / 4.0;
    double err2 = 0.0;
    for (int ky = 0; ky < micro.n; ++ky)
        for (int kx = 0; kx < micro.n; ++kx) {
            const int k = ky * micro.n + kx;
            for (int e = 0; e < cell.elem_count(); ++e) {
                const auto& conn = cell.elems[e];
                std::array<Vec2, 4> c;
                for (int a = 0; a < 4; ++a)
                    c[a] = {uf.at(k, conn[a], 0), uf.at(k, conn[a], 1)};
                const Vec2 y0 = cell.node(conn[0]);
                const double h = cell.h();
                for (const double xi : {-kGauss, kGauss})
                    for (const double eta : {-kGauss, kGauss}) {
                        const double yx = y0.x + 0.5 * h * (1.0 + xi);
                        const double yy = y0.y + 0.5 * h * (1.0 + eta);
                        const double x = eps * (kx + yx), y = eps * (ky + yy);
                        Vec2 limit_v = evaluate(*lim.macro, limit_state.u0, x, y);
                        if (what.active() && cell.region[e] == Region::inclusion) {
                            const Vec2 wv = what.eval(x, y, e, xi, eta);
                            limit_v.x += wv.x;
                            limit_v.y += wv.y;
                        }
                        const Vec2 uv = corner_eval(c, xi, eta);
                        const double dx = uv.x - limit_v.x, dy = uv.y - limit_v.y;
                        err2 += eps2 * w * (dx * dx + dy * dy);
                    }
            }
        }
    return std::sqrt(err2);
}

double two_scale_control_error(const ControlField& theta, const MacroMesh& micro,
                               const CellMesh& cell, const LimitFieldView& lim,
                               const TwoScaleControl& theta_hat) {
    check_congruent(micro, cell);
    const UnfoldedField uf = unfold(theta.v, micro, cell);
    const double eps = micro.epsilon;
    const double eps2 = eps * eps;
    const double w = cell.h() * cell.h() / 4.0;
    const auto y1 = cell.elements_tagged(Region::inclusion);
    const int nx_lim = lim.macro->nx;
    double err2 = 0.0;
    for (int ky = 0; ky < micro.n; ++ky)
        for (int kx = 0; kx < micro.n; ++kx) {
            const int k = ky * micro.n + kx;
            for (int q = 0; q < int(y1.size()); ++q) {
                const int e = y1[std::size_t(q)];
                const auto& conn = cell.elems[e];
                std::array<Vec2, 4> c;
                for (int a = 0; a < 4; ++a)
                    c[a] = {uf.at(k, conn[a], 0), uf.at(k, conn[a], 1)};
                const Vec2 y0 = cell.node(conn[0]);
                const double h = cell.h();
                for (const double xi : {-kGauss, kGauss})
                    for (const double eta : {-kGauss, kGauss}) {
                        const double yx = y0.x + 0.5 * h * (1.0 + xi);
                        const double yy = y0.y + 0.5 * h * (1.0 + eta);
                        const double x = eps * (kx + yx), y = eps * (ky + yy);
                        auto clamp_elem = [nx_lim](double t) {
                            const int kk = int(std::floor(t * nx_lim));
                            return std::min(std::max(kk, 0), nx_lim - 1);
                        };
                        const int le = clamp_elem(y) * nx_lim + clamp_elem(x);
                        const Vec2 tv = corner_eval(c, xi, eta);
                        const double dx = tv.x - theta_hat.at(le, q, 0);
                        const double dy = tv.y - theta_hat.at(le, q, 1);
                        err2 += eps2 * w * (dx * dx + dy * dy);
                    }
            }
        }
    return std::sqrt(err2);
}

}  // namespace hcoc
