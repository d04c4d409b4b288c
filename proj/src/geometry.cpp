#include "hcoc/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <queue>
#include <sstream>

namespace hcoc {

namespace {

bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

// Centroid classification of element (i, j) on an r x r grid.
bool centroid_in_inclusion(const CellGeometry& g, int i, int j) {
    if (g.param <= 0.0) return false;
    const double cx = (i + 0.5) / g.resolution - 0.5;
    const double cy = (j + 0.5) / g.resolution - 0.5;
    if (g.shape == CellGeometry::Shape::square)
        return std::max(std::abs(cx), std::abs(cy)) < g.param;
    return cx * cx + cy * cy < g.param * g.param;
}

void build_grid(QuadMesh& m, int nx) {
    m.nx = nx;
    const int nps = nx + 1;
    m.coords.resize(2 * nps * nps);
    for (int j = 0; j < nps; ++j)
        for (int i = 0; i < nps; ++i) {
            const int id = m.node_id(i, j);
            m.coords[2 * id] = double(i) / nx;
            m.coords[2 * id + 1] = double(j) / nx;
        }
    m.elems.resize(std::size_t(nx) * nx);
    for (int j = 0; j < nx; ++j)
        for (int i = 0; i < nx; ++i)
            m.elems[m.elem_id(i, j)] = {m.node_id(i, j), m.node_id(i + 1, j),
                                        m.node_id(i + 1, j + 1), m.node_id(i, j + 1)};
    m.region.assign(m.elems.size(), Region::matrix);
}

void check_y2_connected(const QuadMesh& m) {
    const int n = m.nx;
    std::vector<int> seen(m.elem_count(), 0);
    int start = -1, total = 0;
    for (int e = 0; e < m.elem_count(); ++e)
        if (m.region[e] == Region::matrix) {
            if (start < 0) start = e;
            ++total;
        }
    if (start < 0) throw GeometryError("discrete Y2 is empty");
    std::queue<int> q;
    q.push(start);
    seen[start] = 1;
    int reached = 0;
    while (!q.empty()) {
        const int e = q.front();
        q.pop();
        ++reached;
        const int i = e % n, j = e / n;
        const int di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
        for (int k = 0; k < 4; ++k) {
            const int ii = i + di[k], jj = j + dj[k];
            if (ii < 0 || jj < 0 || ii >= n || jj >= n) continue;
            const int ee = m.elem_id(ii, jj);
            if (!seen[ee] && m.region[ee] == Region::matrix) {
                seen[ee] = 1;
                q.push(ee);
            }
        }
    }
    if (reached != total) throw GeometryError("discrete Y2 is disconnected");
}

}  // namespace

void CellGeometry::validate() const {
    if (!is_power_of_two(resolution))
        throw GeometryError("cell resolution must be a power of two, got " +
                            std::to_string(resolution));
    if (param < 0.0 || param >= 0.5)
        throw GeometryError("inclusion parameter must lie in [0, 0.5)");
    if (param > 0.0) {
        const double band = 1.0 / resolution;
        if (param >= 0.5 - band)
            throw GeometryError(
                "inclusion closure must stay one element band inside the cell: "
                "param " + std::to_string(param) + " >= 0.5 - 1/" +
                std::to_string(resolution));
    }
}

std::string to_string(CellGeometry::Shape s) {
    return s == CellGeometry::Shape::square ? "square" : "disk";
}

CellGeometry::Shape shape_from_string(const std::string& s) {
    if (s == "square") return CellGeometry::Shape::square;
    if (s == "disk") return CellGeometry::Shape::disk;
    throw GeometryError("unknown inclusion shape '" + s + "'");
}

Vec2 QuadMesh::elem_center(int e) const {
    const auto& c = elems[e];
    Vec2 p{0.0, 0.0};
    for (int a = 0; a < 4; ++a) p = p + 0.25 * node(c[a]);
    return p;
}

bool QuadMesh::on_boundary(int id) const {
    const int nps = nx + 1;
    const int i = id % nps, j = id / nps;
    return i == 0 || j == 0 || i == nx || j == nx;
}

std::vector<int> CellMesh::elements_tagged(Region r) const {
    std::vector<int> out;
    for (int e = 0; e < elem_count(); ++e)
        if (region[e] == r) out.push_back(e);
    return out;
}

std::uint64_t CellMesh::geometry_hash() const {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](std::uint64_t v) {
        for (int b = 0; b < 8; ++b) {
            h ^= (v >> (8 * b)) & 0xff;
            h *= 1099511628211ull;
        }
    };
    mix(static_cast<std::uint64_t>(geom.shape));
    std::uint64_t bits;
    static_assert(sizeof(double) == 8);
    std::memcpy(&bits, &geom.param, 8);
    mix(bits);
    mix(std::uint64_t(geom.resolution));
    for (const Region r : region) mix(static_cast<std::uint64_t>(r));
    return h;
}

PeriodicMap periodic_pairing(const QuadMesh& mesh) {
    const int nx = mesh.nx;
    const int nps = nx + 1;
    PeriodicMap map;
    map.master.resize(mesh.node_count());
    map.reduced_index.assign(mesh.node_count(), -1);
    for (int j = 0; j < nps; ++j)
        for (int i = 0; i < nps; ++i) {
            const int id = j * nps + i;
            const int mi = i % nx, mj = j % nx;
            map.master[id] = mj * nps + mi;
        }
    // Guard: masters must map to themselves and carry matching coordinates
    // modulo 1 (always true on a structured grid).
    for (int id = 0; id < mesh.node_count(); ++id) {
        const int m = map.master[id];
        if (map.master[m] != m) throw GeometryError("periodic pairing is not idempotent");
        const Vec2 a = mesh.node(id), b = mesh.node(m);
        const double dx = std::abs(std::fmod(a.x - b.x, 1.0));
        const double dy = std::abs(std::fmod(a.y - b.y, 1.0));
        if (std::min(dx, 1.0 - dx) > 1e-12 || std::min(dy, 1.0 - dy) > 1e-12)
            throw GeometryError("periodic pairing matched non-opposite nodes");
    }
    int next = 0;
    for (int id = 0; id < mesh.node_count(); ++id)
        if (map.master[id] == id) map.reduced_index[id] = next++;
    for (int id = 0; id < mesh.node_count(); ++id)
        map.reduced_index[id] = map.reduced_index[map.master[id]];
    map.reduced_count = next;
    return map;
}

CellMesh build_cell_mesh(const CellGeometry& geom) {
    geom.validate();
    CellMesh mesh;
    mesh.geom = geom;
    build_grid(mesh, geom.resolution);

    const int r = geom.resolution;
    int lo = r, hi = -1;
    for (int j = 0; j < r; ++j)
        for (int i = 0; i < r; ++i)
            if (centroid_in_inclusion(geom, i, j)) {
                mesh.region[mesh.elem_id(i, j)] = Region::inclusion;
                lo = std::min({lo, i, j});
                hi = std::max({hi, i, j});
            }
    if (hi >= 0 && (lo < 1 || hi > r - 2))
        throw GeometryError("discrete inclusion touches the boundary band");

    check_y2_connected(mesh);

    const double ea = 1.0 / (double(r) * r);
    int n1 = 0;
    for (const Region reg : mesh.region)
        if (reg == Region::inclusion) ++n1;
    mesh.area_y1 = n1 * ea;
    mesh.area_y2 = (mesh.elem_count() - n1) * ea;

    // Interface nodes: incident to both regions.
    std::vector<std::uint8_t> touch(mesh.node_count(), 0);
    for (int e = 0; e < mesh.elem_count(); ++e)
        for (const int nid : mesh.elems[e])
            touch[nid] |= (mesh.region[e] == Region::inclusion) ? 1 : 2;
    for (int id = 0; id < mesh.node_count(); ++id)
        if (touch[id] == 3) mesh.interface_nodes.push_back(id);

    mesh.periodic = periodic_pairing(mesh);
    return mesh;
}

MacroMesh build_macro_mesh(const CellMesh& cell, int n, std::uint8_t gamma0_faces) {
    if (n < 1) throw GeometryError("macro tiling requires n >= 1");
    if (gamma0_faces == 0)
        throw GeometryError("Gamma0 must contain at least one face");
    MacroMesh mesh;
    const int r = cell.nx;
    build_grid(mesh, n * r);
    mesh.n = n;
    mesh.res = r;
    mesh.epsilon = 1.0 / n;
    mesh.cell_geom = cell.geom;
    mesh.gamma0_faces = gamma0_faces;

    mesh.cell_index.resize(mesh.elem_count());
    mesh.local_elem.resize(mesh.elem_count());
    for (int J = 0; J < mesh.nx; ++J)
        for (int I = 0; I < mesh.nx; ++I) {
            const int e = mesh.elem_id(I, J);
            const int kx = I / r, ky = J / r;
            const int li = I % r, lj = J % r;
            mesh.cell_index[e] = ky * n + kx;
            mesh.local_elem[e] = cell.elem_id(li, lj);
            mesh.region[e] = cell.region[mesh.local_elem[e]];
        }

    mesh.node_boundary_tag.assign(mesh.node_count(), BoundaryTag::gamma1);
    const int nps = mesh.nx + 1;
    for (int id = 0; id < mesh.node_count(); ++id) {
        if (!mesh.on_boundary(id)) continue;
        const int i = id % nps, j = id / nps;
        const bool g0 = ((gamma0_faces & face::left) && i == 0) ||
                        ((gamma0_faces & face::right) && i == mesh.nx) ||
                        ((gamma0_faces & face::bottom) && j == 0) ||
                        ((gamma0_faces & face::top) && j == mesh.nx);
        if (g0) {
            mesh.node_boundary_tag[id] = BoundaryTag::gamma0;
            mesh.gamma0_nodes.push_back(id);
        }
    }
    return mesh;
}

MacroMesh plain_macro_mesh(int n, std::uint8_t gamma0_faces) {
    CellGeometry g;
    g.param = 0.0;
    g.resolution = 1;
    return build_macro_mesh(build_cell_mesh(g), n, gamma0_faces);
}

std::pair<int, int> MacroMesh::cell_of_point(double x, double y) const {
    auto clamp_cell = [this](double t) {
        int k = int(std::floor(t * n));
        return std::min(std::max(k, 0), n - 1);
    };
    return {clamp_cell(x), clamp_cell(y)};
}

std::vector<int> MacroMesh::elements_tagged(Region r) const {
    std::vector<int> out;
    for (int e = 0; e < elem_count(); ++e)
        if (region[e] == r) out.push_back(e);
    return out;
}

double MacroMesh::inclusion_area() const {
    const double ea = h() * h();
    double a = 0.0;
    for (const Region r : region)
        if (r == Region::inclusion) a += ea;
    return a;
}

namespace {

void write_tables(std::ostream& os, const QuadMesh& m) {
    os << "nodes " << m.node_count() << "\n";
    os.precision(17);
    for (int id = 0; id < m.node_count(); ++id)
        os << id << " " << m.coords[2 * id] << " " << m.coords[2 * id + 1] << "\n";
    os << "elements " << m.elem_count() << "\n";
    for (int e = 0; e < m.elem_count(); ++e) {
        const auto& c = m.elems[e];
        os << e << " " << c[0] << " " << c[1] << " " << c[2] << " " << c[3] << " "
           << int(m.region[e]) << "\n";
    }
    os << "end\n";
}

// Verifies the serialized tables against the regenerated mesh; the "nodes"
// keyword has already been consumed by the header scan.
void check_tables(std::istream& is, const QuadMesh& rebuilt, const std::string& path) {
    std::string key;
    int count = 0;
    is >> count;
    if (count != rebuilt.node_count())
        throw IoError(path + ": node table does not match header");
    for (int k = 0; k < count; ++k) {
        int id;
        double x, y;
        is >> id >> x >> y;
        if (id != k || std::abs(x - rebuilt.coords[2 * k]) > 1e-12 ||
            std::abs(y - rebuilt.coords[2 * k + 1]) > 1e-12)
            throw IoError(path + ": node table corrupt at row " + std::to_string(k));
    }
    is >> key >> count;
    if (key != "elements" || count != rebuilt.elem_count())
        throw IoError(path + ": element table does not match header");
    for (int k = 0; k < count; ++k) {
        int id, a, b, c, d, tag;
        is >> id >> a >> b >> c >> d >> tag;
        const auto& e = rebuilt.elems[k];
        if (id != k || a != e[0] || b != e[1] || c != e[2] || d != e[3] ||
            tag != int(rebuilt.region[k]))
            throw IoError(path + ": element table corrupt at row " + std::to_string(k));
    }
    is >> key;
    if (key != "end") throw IoError(path + ": missing end marker");
}

}  // namespace

void write_mesh(std::ostream& os, const CellMesh& mesh) {
    os << "hcoc-mesh 1\n";
    os << "kind cell\n";
    os << "dim 2\n";
    os << "res " << mesh.geom.resolution << "\n";
    os << "shape " << (mesh.geom.param > 0.0 ? to_string(mesh.geom.shape) : std::string("none"))
       << "\n";
    os.precision(17);
    os << "param " << mesh.geom.param << "\n";
    write_tables(os, mesh);
}

void write_mesh(std::ostream& os, const MacroMesh& mesh) {
    os << "hcoc-mesh 1\n";
    os << "kind macro\n";
    os << "dim 2\n";
    os << "n " << mesh.n << "\n";
    os << "res " << mesh.res << "\n";
    os << "shape "
       << (mesh.cell_geom.param > 0.0 ? to_string(mesh.cell_geom.shape) : std::string("none"))
       << "\n";
    os.precision(17);
    os << "param " << mesh.cell_geom.param << "\n";
    os << "gamma0 " << faces_to_string(mesh.gamma0_faces) << "\n";
    write_tables(os, mesh);
}

void save_mesh(const std::string& path, const CellMesh& mesh) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    write_mesh(os, mesh);
}

void save_mesh(const std::string& path, const MacroMesh& mesh) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    write_mesh(os, mesh);
}

std::string faces_to_string(std::uint8_t mask) {
    std::string s;
    if (mask & face::left) s += 'L';
    if (mask & face::right) s += 'R';
    if (mask & face::bottom) s += 'B';
    if (mask & face::top) s += 'T';
    return s.empty() ? "-" : s;
}

std::uint8_t faces_from_string(const std::string& s) {
    std::uint8_t mask = 0;
    for (const char c : s) {
        switch (c) {
            case 'L': mask |= face::left; break;
            case 'R': mask |= face::right; break;
            case 'B': mask |= face::bottom; break;
            case 'T': mask |= face::top; break;
            case '-': break;
            default: throw IoError(std::string("unknown face letter '") + c + "'");
        }
    }
    return mask;
}

MeshFile load_mesh(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open '" + path + "'");
    std::string magic;
    int version;
    is >> magic >> version;
    if (magic != "hcoc-mesh" || version != 1)
        throw IoError(path + ": not an hcoc mesh file");
    std::string key, kind, shape, faces = "L";
    int dim = 0, n = 1, res = 0;
    double param = 0.0;
    is >> key >> kind;
    while (is >> key && key != "nodes") {
        if (key == "dim") is >> dim;
        else if (key == "n") is >> n;
        else if (key == "res") is >> res;
        else if (key == "shape") is >> shape;
        else if (key == "param") is >> param;
        else if (key == "gamma0") is >> faces;
        else throw IoError(path + ": unknown header key '" + key + "'");
    }
    if (dim != 2) throw IoError(path + ": only dim 2 is supported");
    if (key != "nodes") throw IoError(path + ": missing node table");

    CellGeometry g;
    g.resolution = res;
    g.param = (shape == "none") ? 0.0 : param;
    if (shape != "none") g.shape = shape_from_string(shape);

    MeshFile out;
    out.cell = build_cell_mesh(g);
    if (kind == "cell") {
        check_tables(is, out.cell, path);
        return out;
    }
    if (kind != "macro") throw IoError(path + ": unknown mesh kind '" + kind + "'");
    out.is_macro = true;
    out.macro = build_macro_mesh(out.cell, n, faces_from_string(faces));
    check_tables(is, out.macro, path);
    return out;
}

}  // namespace hcoc
