#include "hcoc/fem.hpp"

#include <cmath>

namespace hcoc {

namespace {

constexpr double kGauss = 0.57735026918962576451;  // 1/sqrt(3)

struct ShapeEval {
    std::array<double, 4> n;
    std::array<double, 4> dx;  // physical derivatives
    std::array<double, 4> dy;
};

ShapeEval shape_at(double xi, double eta, double h) {
    static const double xs[4] = {-1.0, 1.0, 1.0, -1.0};
    static const double ys[4] = {-1.0, -1.0, 1.0, 1.0};
    ShapeEval s;
    const double scale = 2.0 / h;
    for (int a = 0; a < 4; ++a) {
        s.n[a] = 0.25 * (1.0 + xs[a] * xi) * (1.0 + ys[a] * eta);
        s.dx[a] = 0.25 * xs[a] * (1.0 + ys[a] * eta) * scale;
        s.dy[a] = 0.25 * ys[a] * (1.0 + xs[a] * xi) * scale;
    }
    return s;
}

// Engineering-strain B matrix column for (node a, component c).
std::array<double, 3> b_column(const ShapeEval& s, int a, int c) {
    if (c == 0) return {s.dx[a], 0.0, s.dy[a]};
    return {0.0, s.dy[a], s.dx[a]};
}

}  // namespace

std::array<double, 64> element_stiffness(const HookeTensor& a, double h) {
    if (!(h > 0.0)) throw AssemblyError("degenerate element width");
    std::array<double, 64> k{};
    const double w = (h / 2.0) * (h / 2.0);
    for (const double xi : {-kGauss, kGauss})
        for (const double eta : {-kGauss, kGauss}) {
            const ShapeEval s = shape_at(xi, eta, h);
            for (int i = 0; i < 8; ++i) {
                const auto bi = b_column(s, i / 2, i % 2);
                for (int j = 0; j < 8; ++j) {
                    const auto bj = b_column(s, j / 2, j % 2);
                    k[std::size_t(8) * i + j] += w * contract(a, bi, bj);
                }
            }
        }
    return k;
}

std::array<double, 64> element_mass(double h) {
    if (!(h > 0.0)) throw AssemblyError("degenerate element width");
    std::array<double, 64> m{};
    const double w = (h / 2.0) * (h / 2.0);
    for (const double xi : {-kGauss, kGauss})
        for (const double eta : {-kGauss, kGauss}) {
            const ShapeEval s = shape_at(xi, eta, h);
            for (int i = 0; i < 8; ++i)
                for (int j = 0; j < 8; ++j)
                    if (i % 2 == j % 2)
                        m[std::size_t(8) * i + j] += w * s.n[i / 2] * s.n[j / 2];
        }
    return m;
}

namespace {

void scatter(SparseBuilder& builder, const QuadMesh& mesh, int e,
             const std::array<double, 64>& ke) {
    const auto& conn = mesh.elems[e];
    for (int i = 0; i < 8; ++i) {
        const int gi = 2 * conn[i / 2] + i % 2;
        for (int j = 0; j < 8; ++j) {
            const int gj = 2 * conn[j / 2] + j % 2;
            builder.add(gi, gj, ke[std::size_t(8) * i + j]);
        }
    }
}

SparseOperator assemble_impl(const MacroMesh& mesh,
                             const std::function<HookeTensor(int)>& tensor_of_elem,
                             Form form) {
    SparseBuilder builder(mesh.dof_count());
    const double h = mesh.h();
    const auto me = element_mass(h);
    // Element stiffness depends only on the local tensor; cache per
    // (region, cell element) since the tiling repeats them.
    std::vector<std::array<double, 64>> cache;
    std::vector<int> cache_key;
    for (int e = 0; e < mesh.elem_count(); ++e) {
        switch (form) {
            case Form::stiffness: {
                const int key = 2 * mesh.local_elem[e] + (mesh.region[e] == Region::inclusion);
                int slot = -1;
                for (std::size_t q = 0; q < cache_key.size(); ++q)
                    if (cache_key[q] == key) slot = int(q);
                if (slot < 0) {
                    cache.push_back(element_stiffness(tensor_of_elem(e), h));
                    cache_key.push_back(key);
                    slot = int(cache.size()) - 1;
                }
                scatter(builder, mesh, e, cache[std::size_t(slot)]);
                break;
            }
            case Form::mass:
                scatter(builder, mesh, e, me);
                break;
            case Form::mass_on_inclusion:
                if (mesh.region[e] == Region::inclusion) scatter(builder, mesh, e, me);
                break;
            case Form::mass_on_matrix:
                if (mesh.region[e] == Region::matrix) scatter(builder, mesh, e, me);
                break;
        }
    }
    return builder.compress();
}

}  // namespace

SparseOperator assemble(const MacroMesh& mesh, const ContrastField& coeff, Form form) {
    if (coeff.base.size() != 1 && int(coeff.base.size()) != mesh.res * mesh.res)
        throw AssemblyError("coefficient field does not match the reference cell tags");
    return assemble_impl(
        mesh,
        [&](int e) { return coeff.value(mesh.region[e], mesh.local_elem[e]); }, form);
}

SparseOperator assemble(const MacroMesh& mesh, const HookeTensor& coeff, Form form) {
    return assemble_impl(mesh, [&](int) { return coeff; }, form);
}

SparseOperator assemble_strain_product(const MacroMesh& mesh, Region region) {
    // e(u):e(w) corresponds to the Voigt matrix diag(1, 1, 1/2).
    HookeTensor frob;
    frob(0, 0) = 1.0;
    frob(1, 1) = 1.0;
    frob(2, 2) = 0.5;
    SparseBuilder builder(mesh.dof_count());
    const auto ke = element_stiffness(frob, mesh.h());
    for (int e = 0; e < mesh.elem_count(); ++e)
        if (mesh.region[e] == region) scatter(builder, mesh, e, ke);
    return builder.compress();
}

SparseOperator assemble_generic(const QuadMesh& mesh, const std::vector<int>& elements,
                                int dof_count,
                                const std::function<int(int, int)>& dof_of,
                                const std::function<const HookeTensor*(int)>& tensor_of,
                                bool mass_form) {
    SparseBuilder builder(dof_count);
    const double h = mesh.h();
    const auto me = element_mass(h);
    for (const int e : elements) {
        std::array<double, 64> ke;
        if (mass_form) ke = me;
        else {
            const HookeTensor* t = tensor_of(e);
            if (!t) throw AssemblyError("missing tensor for element " + std::to_string(e));
            ke = element_stiffness(*t, h);
        }
        const auto& conn = mesh.elems[e];
        for (int i = 0; i < 8; ++i) {
            const int gi = dof_of(conn[i / 2], i % 2);
            if (gi < 0) continue;
            for (int j = 0; j < 8; ++j) {
                const int gj = dof_of(conn[j / 2], j % 2);
                if (gj < 0) continue;
                builder.add(gi, gj, ke[std::size_t(8) * i + j]);
            }
        }
    }
    return builder.compress();
}

std::vector<int> gamma0_dofs(const MacroMesh& mesh) {
    std::vector<int> dofs;
    dofs.reserve(2 * mesh.gamma0_nodes.size());
    for (const int n : mesh.gamma0_nodes) {
        dofs.push_back(2 * n);
        dofs.push_back(2 * n + 1);
    }
    return dofs;
}

DisplacementField interpolate(const QuadMesh& mesh, const VectorField& f) {
    DisplacementField u(mesh.dof_count());
    for (int id = 0; id < mesh.node_count(); ++id) {
        const Vec2 p = mesh.node(id);
        const Vec2 v = f(p.x, p.y);
        u[2 * id] = v.x;
        u[2 * id + 1] = v.y;
    }
    return u;
}

Vec2 evaluate(const QuadMesh& mesh, const DisplacementField& u, double x, double y) {
    const int nx = mesh.nx;
    auto clamp_elem = [nx](double t) {
        const int k = int(std::floor(t * nx));
        return std::min(std::max(k, 0), nx - 1);
    };
    const int i = clamp_elem(x), j = clamp_elem(y);
    const double h = mesh.h();
    const double xi = 2.0 * (x - i * h) / h - 1.0;
    const double eta = 2.0 * (y - j * h) / h - 1.0;
    const ShapeEval s = shape_at(xi, eta, h);
    const auto& conn = mesh.elems[mesh.elem_id(i, j)];
    Vec2 out{0.0, 0.0};
    for (int a = 0; a < 4; ++a) {
        out.x += s.n[a] * u[2 * conn[a]];
        out.y += s.n[a] * u[2 * conn[a] + 1];
    }
    return out;
}

double korn_diagnostic(const DisplacementField& u, double eps, const SparseOperator& mass,
                       const SparseOperator& strain_incl, const SparseOperator& strain_matr) {
    const double num = m_norm(mass, u);
    const double den = eps * std::sqrt(std::max(0.0, strain_incl.inner(u, u))) +
                       std::sqrt(std::max(0.0, strain_matr.inner(u, u)));
    if (num == 0.0) return 0.0;
    if (den == 0.0) return std::numeric_limits<double>::infinity();
    return num / den;
}

double korn_diagnostic(const DisplacementField& u, const MacroMesh& mesh, double eps) {
    const auto mass = assemble(mesh, HookeTensor::isotropic(1, 1), Form::mass);
    const auto s1 = assemble_strain_product(mesh, Region::inclusion);
    const auto s2 = assemble_strain_product(mesh, Region::matrix);
    return korn_diagnostic(u, eps, mass, s1, s2);
}

}  // namespace hcoc
