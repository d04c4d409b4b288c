#include "hcoc/cell.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace hcoc {

namespace {

constexpr double kGauss = 0.57735026918962576451;

// Reduced periodic DOF numbering of the nodes touching Y2 elements.
struct Y2Space {
    std::vector<int> dof_base;  // per node, -1 if not in the space
    std::vector<int> master_nodes;
    std::vector<int> y2_elements;
    int dof_count = 0;
};

Y2Space build_y2_space(const CellMesh& cell) {
    Y2Space sp;
    sp.dof_base.assign(cell.node_count(), -1);
    std::vector<std::uint8_t> touches(cell.node_count(), 0);
    for (int e = 0; e < cell.elem_count(); ++e) {
        if (cell.region[e] != Region::matrix) continue;
        sp.y2_elements.push_back(e);
        for (const int nid : cell.elems[e]) touches[nid] = 1;
    }
    if (sp.y2_elements.empty()) throw GeometryError("cell problem needs a nonempty Y2");
    for (int nid = 0; nid < cell.node_count(); ++nid) {
        if (!touches[nid]) continue;
        const int m = cell.periodic.master[nid];
        // With Y1 strictly interior, boundary nodes and their masters all
        // touch Y2; anything else indicates a corrupt mesh.
        if (!touches[m]) throw GeometryError("periodic master of a Y2 node does not touch Y2");
        if (sp.dof_base[m] < 0) {
            sp.dof_base[m] = 2 * int(sp.master_nodes.size());
            sp.master_nodes.push_back(m);
        }
    }
    // Slaves share their master's dofs.
    for (int nid = 0; nid < cell.node_count(); ++nid)
        if (touches[nid]) sp.dof_base[nid] = sp.dof_base[cell.periodic.master[nid]];
    sp.dof_count = 2 * int(sp.master_nodes.size());
    return sp;
}

// Unit-strain load: rhs_i = -int_{Y2} A M^ij : e(phi_i).
Vector unit_strain_load(const CellMesh& cell, const Y2Space& sp, const HookeTensor& a, int ij) {
    std::array<double, 3> m{};
    if (ij == 0) m = {1.0, 0.0, 0.0};
    else if (ij == 1) m = {0.0, 1.0, 0.0};
    else m = {0.0, 0.0, 1.0};

    Vector rhs(sp.dof_count, 0.0);
    const double h = cell.h();
    const double w = (h / 2.0) * (h / 2.0);
    static const double xs[4] = {-1.0, 1.0, 1.0, -1.0};
    static const double ys[4] = {-1.0, -1.0, 1.0, 1.0};
    for (const int e : sp.y2_elements) {
        const auto& conn = cell.elems[e];
        for (const double xi : {-kGauss, kGauss})
            for (const double eta : {-kGauss, kGauss})
                for (int aidx = 0; aidx < 4; ++aidx) {
                    const double dx = 0.25 * xs[aidx] * (1.0 + ys[aidx] * eta) * 2.0 / h;
                    const double dy = 0.25 * ys[aidx] * (1.0 + xs[aidx] * xi) * 2.0 / h;
                    const std::array<double, 3> bx{dx, 0.0, dy};
                    const std::array<double, 3> by{0.0, dy, dx};
                    const int base = sp.dof_base[conn[aidx]];
                    if (base < 0) continue;
                    rhs[base] -= w * contract(a, m, bx);
                    rhs[base + 1] -= w * contract(a, m, by);
                }
    }
    return rhs;
}

// Component integrals int_{Y2} phi_i dy in the reduced numbering.
std::array<Vector, 2> component_masses(const CellMesh& cell, const Y2Space& sp) {
    std::array<Vector, 2> b{Vector(sp.dof_count, 0.0), Vector(sp.dof_count, 0.0)};
    const double w = cell.h() * cell.h() / 4.0;
    for (const int e : sp.y2_elements)
        for (const int nid : cell.elems[e]) {
            const int base = sp.dof_base[nid];
            b[0][base] += w;
            b[1][base + 1] += w;
        }
    return b;
}

}  // namespace

DisplacementField solve_cell_corrector(const CellMesh& cell, const HookeTensor& a, int ij,
                                       double tol_lin, CorrectorNormalization norm) {
    if (ij < 0 || ij > 2) throw ValidationError("corrector index must be 0, 1 or 2");
    a.validate();
    const Y2Space sp = build_y2_space(cell);

    SparseOperator K = assemble_generic(
        cell, sp.y2_elements, sp.dof_count,
        [&sp](int node, int comp) {
            const int b = sp.dof_base[node];
            return b < 0 ? -1 : b + comp;
        },
        [&a](int) { return &a; }, false);

    Vector rhs = unit_strain_load(cell, sp, a, ij);
    Vector x;

    if (norm == CorrectorNormalization::pin_node) {
        K.eliminate({sp.dof_base[sp.master_nodes[0]], sp.dof_base[sp.master_nodes[0]] + 1});
        CgOptions opts;
        opts.tol = tol_lin;
        x = solve_spd(K, rhs, std::nullopt, opts);
    } else {
        // The periodic operator is singular exactly on the two translations;
        // augment with normalized rank-one mean constraints to restore SPD,
        // then project the translation components out of the solution.
        const auto b = component_masses(cell, sp);
        const Vector diag = K.diagonal();
        double scale = 0.0;
        for (const double d : diag) scale += d;
        scale /= sp.dof_count;
        const double bb0 = dot(b[0], b[0]), bb1 = dot(b[1], b[1]);
        LinOp op{sp.dof_count, [&](const double* in, double* out) {
                     K.mul(in, out);
                     double s0 = 0.0, s1 = 0.0;
                     for (int i = 0; i < sp.dof_count; ++i) {
                         s0 += b[0][i] * in[i];
                         s1 += b[1][i] * in[i];
                     }
                     s0 *= scale / bb0;
                     s1 *= scale / bb1;
                     for (int i = 0; i < sp.dof_count; ++i)
                         out[i] += s0 * b[0][i] + s1 * b[1][i];
                 }};
        Vector inv_diag(sp.dof_count);
        for (int i = 0; i < sp.dof_count; ++i) {
            const double d = diag[i] + scale * (b[0][i] * b[0][i] / bb0 + b[1][i] * b[1][i] / bb1);
            inv_diag[i] = 1.0 / d;
        }
        CgOptions opts;
        opts.tol = tol_lin;
        cg_solve(op, rhs, x, inv_diag, opts);
        // Exact zero-mean normalization over Y2.
        const double area = cell.area_y2;
        const double m0 = dot(b[0], x) / area, m1 = dot(b[1], x) / area;
        for (std::size_t i = 0; i < x.size(); i += 2) x[i] -= m0;
        for (std::size_t i = 1; i < x.size(); i += 2) x[i] -= m1;
    }

    DisplacementField chi(cell.dof_count(), 0.0);
    for (int nid = 0; nid < cell.node_count(); ++nid) {
        const int base = sp.dof_base[nid];
        if (base < 0) continue;
        chi[2 * nid] = x[base];
        chi[2 * nid + 1] = x[base + 1];
    }
    return chi;
}

CorrectorSet solve_correctors(const CellMesh& cell, const HookeTensor& a, double tol_lin,
                              CorrectorNormalization norm) {
    CorrectorSet set;
    for (int ij = 0; ij < 3; ++ij) set.chi[ij] = solve_cell_corrector(cell, a, ij, tol_lin, norm);
    set.geometry_hash = cell.geometry_hash();
    return set;
}

namespace {

// Engineering strain of a nodal field at a Gauss point of element e.
std::array<double, 3> strain_at(const CellMesh& cell, const DisplacementField& u, int e,
                                double xi, double eta) {
    static const double xs[4] = {-1.0, 1.0, 1.0, -1.0};
    static const double ys[4] = {-1.0, -1.0, 1.0, 1.0};
    const double h = cell.h();
    std::array<double, 3> s{};
    const auto& conn = cell.elems[e];
    for (int a = 0; a < 4; ++a) {
        const double dx = 0.25 * xs[a] * (1.0 + ys[a] * eta) * 2.0 / h;
        const double dy = 0.25 * ys[a] * (1.0 + xs[a] * xi) * 2.0 / h;
        const double ux = u[2 * conn[a]], uy = u[2 * conn[a] + 1];
        s[0] += dx * ux;
        s[1] += dy * uy;
        s[2] += dy * ux + dx * uy;
    }
    return s;
}

}  // namespace

HomogenizedTensor homogenized_tensor(const CorrectorSet& correctors, const CellMesh& cell,
                                     const HookeTensor& a) {
    if (correctors.geometry_hash != cell.geometry_hash())
        throw ValidationError("correctors were solved on a different cell geometry");
    static const std::array<std::array<double, 3>, 3> units = {
        {{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}}};

    HookeTensor energy, flux;
    const double w = cell.h() * cell.h() / 4.0;
    for (int e = 0; e < cell.elem_count(); ++e) {
        if (cell.region[e] != Region::matrix) continue;
        for (const double xi : {-kGauss, kGauss})
            for (const double eta : {-kGauss, kGauss}) {
                std::array<std::array<double, 3>, 3> corrected;
                for (int q = 0; q < 3; ++q) {
                    const auto eps = strain_at(cell, correctors.chi[q], e, xi, eta);
                    for (int c = 0; c < 3; ++c) corrected[q][c] = units[q][c] + eps[c];
                }
                for (int q = 0; q < 3; ++q) {
                    // Stress response columns.
                    for (int r = 0; r < 3; ++r) {
                        double stress = 0.0;
                        for (int c = 0; c < 3; ++c) stress += a(r, c) * corrected[q][c];
                        flux(r, q) += w * stress;
                    }
                    for (int r = q; r < 3; ++r) {
                        const double v = w * contract(a, corrected[r], corrected[q]);
                        energy(r, q) += v;
                        if (r != q) energy(q, r) += v;
                    }
                }
            }
    }

    HomogenizedTensor out;
    out.tensor = energy;
    out.flux_form = flux;
    out.geometry_hash = cell.geometry_hash();
    double gap = 0.0, scale = 0.0;
    for (int i = 0; i < 9; ++i) {
        gap = std::max(gap, std::abs(energy.voigt[i] - flux.voigt[i]));
        scale = std::max(scale, std::abs(energy.voigt[i]));
    }
    out.flux_energy_gap = scale > 0.0 ? gap / scale : gap;
    return out;
}

HomValidationReport validate_hom_tensor(const HomogenizedTensor& ahom, double sym_tol) {
    HomValidationReport rep;
    rep.symmetry_residual = ahom.tensor.symmetry_residual();
    rep.flux_energy_gap = ahom.flux_energy_gap;
    // Also check the flux form, whose symmetry is not structural.
    rep.symmetry_residual = std::max(rep.symmetry_residual, ahom.flux_form.symmetry_residual());
    if (rep.symmetry_residual > sym_tol) {
        for (int i = 0; i < 3; ++i)
            for (int j = i + 1; j < 3; ++j)
                if (std::abs(ahom.tensor(i, j) - ahom.tensor(j, i)) >
                    sym_tol * std::abs(ahom.tensor(i, j)))
                    throw ValidationError("homogenized tensor symmetry failure at Voigt (" +
                                          std::to_string(i) + "," + std::to_string(j) + ")");
        throw ValidationError("homogenized tensor flux-form symmetry failure");
    }
    rep.kelvin_eigenvalues = ahom.tensor.kelvin_eigenvalues();
    rep.ellipticity_constant = rep.kelvin_eigenvalues[0];
    if (!(rep.ellipticity_constant > 0.0))
        throw ValidationError("homogenized tensor is not elliptic: smallest eigenvalue " +
                              std::to_string(rep.ellipticity_constant));
    return rep;
}

void save_hom_tensor(const std::string& path, const HomogenizedTensor& ahom) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    os.precision(17);
    os << "hcoc-ahom 1\n";
    os << "hash " << std::hex << ahom.geometry_hash << std::dec << "\n";
    os << "flux_energy_gap " << ahom.flux_energy_gap << "\n";
    os << "voigt\n";
    for (int i = 0; i < 3; ++i)
        os << ahom.tensor(i, 0) << " " << ahom.tensor(i, 1) << " " << ahom.tensor(i, 2) << "\n";
    os << "flux\n";
    for (int i = 0; i < 3; ++i)
        os << ahom.flux_form(i, 0) << " " << ahom.flux_form(i, 1) << " " << ahom.flux_form(i, 2)
           << "\n";
    os << "end\n";
}

HomogenizedTensor load_hom_tensor(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open '" + path + "'");
    std::string magic, key;
    int version = 0;
    is >> magic >> version;
    if (magic != "hcoc-ahom" || version != 1) throw IoError(path + ": not an A^hom file");
    HomogenizedTensor t;
    is >> key >> std::hex >> t.geometry_hash >> std::dec;
    is >> key >> t.flux_energy_gap;
    is >> key;
    for (int i = 0; i < 3; ++i)
        is >> t.tensor(i, 0) >> t.tensor(i, 1) >> t.tensor(i, 2);
    is >> key;
    for (int i = 0; i < 3; ++i)
        is >> t.flux_form(i, 0) >> t.flux_form(i, 1) >> t.flux_form(i, 2);
    is >> key;
    if (!is || key != "end") throw IoError(path + ": truncated A^hom file");
    return t;
}

InclusionCellSpace::InclusionCellSpace(const CellMesh& cell_in, const HookeTensor& a)
    : cell(&cell_in) {
    dof_base.assign(cell->node_count(), -1);
    std::vector<std::uint8_t> touch(cell->node_count(), 0);
    for (int e = 0; e < cell->elem_count(); ++e) {
        if (cell->region[e] != Region::inclusion) continue;
        y1_elements.push_back(e);
        for (const int nid : cell->elems[e]) touch[nid] |= 1;
    }
    for (int e = 0; e < cell->elem_count(); ++e)
        if (cell->region[e] == Region::matrix)
            for (const int nid : cell->elems[e]) touch[nid] |= 2;
    for (int nid = 0; nid < cell->node_count(); ++nid)
        if (touch[nid] == 1) {
            dof_base[nid] = 2 * int(nodes.size());
            nodes.push_back(nid);
        }
    if (y1_elements.empty()) return;  // empty space: kappa-infinite style bypass

    auto dof = [this](int node, int comp) { return dof_of(node, comp); };
    K = assemble_generic(*cell, y1_elements, dof_count(), dof, [&a](int) { return &a; }, false);
    M = assemble_generic(*cell, y1_elements, dof_count(), dof, [](int) -> const HookeTensor* {
        return nullptr;
    }, true);

    phi_integral.assign(dof_count(), 0.0);
    const double w = cell->h() * cell->h() / 4.0;
    for (const int e : y1_elements)
        for (const int nid : cell->elems[e]) {
            const int base = dof_base[nid];
            if (base < 0) continue;
            phi_integral[base] += w;
            phi_integral[base + 1] += w;
        }
}

Vec2 InclusionCellSpace::field_integral(const Vector& w) const {
    Vec2 out{0.0, 0.0};
    for (std::size_t i = 0; i < w.size(); i += 2) out.x += phi_integral[i] * w[i];
    for (std::size_t i = 1; i < w.size(); i += 2) out.y += phi_integral[i] * w[i];
    return out;
}

Vector InclusionCellSpace::const_load(Vec2 c) const {
    Vector out(dof_count(), 0.0);
    for (int i = 0; i < dof_count(); i += 2) out[i] = phi_integral[i] * c.x;
    for (int i = 1; i < dof_count(); i += 2) out[i] = phi_integral[i] * c.y;
    return out;
}

DisplacementField InclusionCellSpace::expand(const Vector& w) const {
    DisplacementField out(cell->dof_count(), 0.0);
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        out[2 * nodes[k]] = w[2 * k];
        out[2 * nodes[k] + 1] = w[2 * k + 1];
    }
    return out;
}

InclusionCellOperator make_inclusion_cell_operator(const InclusionCellSpace& space, double s,
                                                   double kappa, double alpha, double p) {
    if (!(s >= 0.0)) throw ValidationError("cell operator requires s >= 0");
    if (!(kappa > 0.0) || std::isinf(kappa))
        throw ValidationError("cell operator requires finite kappa > 0 (kappa = inf bypasses it)");
    const int n = space.dof_count();
    InclusionCellOperator op;
    op.s = s;
    op.mass_coeff = alpha * std::pow(s, p) / (kappa * kappa);
    std::vector<double> dense(std::size_t(n) * n, 0.0);
    for (int i = 0; i < n; ++i) {
        for (int k = space.K.row_ptr[i]; k < space.K.row_ptr[i + 1]; ++k)
            dense[std::size_t(i) * n + space.K.col[k]] += space.K.val[k];
        for (int k = space.M.row_ptr[i]; k < space.M.row_ptr[i + 1]; ++k)
            dense[std::size_t(i) * n + space.M.col[k]] += op.mass_coeff * space.M.val[k];
    }
    op.factor = DenseCholesky(std::move(dense), n);
    return op;
}

const InclusionCellOperator& CellOperatorCache::at(double s) {
    char key[32];
    std::snprintf(key, sizeof key, "%.12e", s);
    auto it = cache_.find(key);
    if (it == cache_.end()) {
        auto op = std::make_unique<InclusionCellOperator>(
            make_inclusion_cell_operator(*space_, s, kappa_, alpha_, p_));
        it = cache_.emplace(key, std::move(op)).first;
    }
    return *it->second;
}

}  // namespace hcoc
