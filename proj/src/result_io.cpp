#include "hcoc/result_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace hcoc {

namespace {

std::string kappa_str(double kappa) {
    if (std::isinf(kappa)) return "inf";
    std::ostringstream ss;
    ss.precision(17);
    ss << kappa;
    return ss.str();
}

double parse_kappa(const std::string& s) {
    return s == "inf" ? ScaleParams::infinite : std::stod(s);
}

}  // namespace

void write_state_csv(const std::string& path, const MacroMesh& mesh, const StateFile& sf) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    os.precision(17);
    os << "# hcoc-state 1\n";
    os << "# mesh " << sf.mesh_path << "\n";
    os << "# eps " << sf.eps << "\n# delta " << sf.delta << "\n# alpha " << sf.alpha
       << "\n# p " << sf.p << "\n";
    os << "node,x,y,u1,u2\n";
    for (int id = 0; id < mesh.node_count(); ++id) {
        const Vec2 pnt = mesh.node(id);
        os << id << "," << pnt.x << "," << pnt.y << "," << sf.u[2 * id] << ","
           << sf.u[2 * id + 1] << "\n";
    }
    os << "# s_star " << sf.s_star << "\n";
    os << "# energy " << sf.energy.elastic << " " << sf.energy.nonlocal << " "
       << sf.energy.load << " " << sf.energy.total << "\n";
    if (sf.has_theta) {
        os << "# theta " << mesh.node_count() << "\n";
        for (int id = 0; id < mesh.node_count(); ++id)
            os << id << "," << sf.theta.v[2 * id] << "," << sf.theta.v[2 * id + 1] << "\n";
    }
}

StateFile read_state_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open '" + path + "'");
    StateFile sf;
    std::string line;
    if (!std::getline(is, line) || line.rfind("# hcoc-state", 0) != 0)
        throw IoError(path + ": not a state csv");
    int node_count = -1;
    std::vector<double> u, theta;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::stringstream ss(line.substr(1));
            std::string key;
            ss >> key;
            if (key == "mesh") ss >> sf.mesh_path;
            else if (key == "eps") ss >> sf.eps;
            else if (key == "delta") ss >> sf.delta;
            else if (key == "alpha") ss >> sf.alpha;
            else if (key == "p") ss >> sf.p;
            else if (key == "s_star") ss >> sf.s_star;
            else if (key == "energy")
                ss >> sf.energy.elastic >> sf.energy.nonlocal >> sf.energy.load >>
                    sf.energy.total;
            else if (key == "theta") {
                ss >> node_count;
                sf.has_theta = true;
            }
            continue;
        }
        if (line.rfind("node,", 0) == 0) continue;
        std::stringstream ss(line);
        std::string item;
        std::vector<double> vals;
        while (std::getline(ss, item, ',')) vals.push_back(std::stod(item));
        if (!sf.has_theta) {
            if (vals.size() != 5) throw IoError(path + ": bad node row");
            u.push_back(vals[3]);
            u.push_back(vals[4]);
        } else {
            if (vals.size() != 3) throw IoError(path + ": bad theta row");
            theta.push_back(vals[1]);
            theta.push_back(vals[2]);
        }
    }
    sf.u = u;
    if (sf.has_theta) {
        if (int(theta.size()) != int(u.size()))
            throw IoError(path + ": theta block does not match node table");
        sf.theta.v = theta;
    }
    return sf;
}

void write_limit_csv(const std::string& path, const LimitProblem& prob, const LimitFile& lf) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    os.precision(17);
    os << "# hcoc-limit 1\n";
    os << "# cell " << lf.cell_path << "\n";
    os << "# macro_n " << lf.macro_n << "\n";
    os << "# kappa " << kappa_str(lf.kappa) << "\n";
    os << "# s_star " << lf.state.s_star << "\n";
    os << "# value " << lf.value << "\n";
    os << "node,x,y,u1,u2\n";
    const MacroMesh& m = *prob.macro;
    for (int id = 0; id < m.node_count(); ++id) {
        const Vec2 pnt = m.node(id);
        os << id << "," << pnt.x << "," << pnt.y << "," << lf.state.u0[2 * id] << ","
           << lf.state.u0[2 * id + 1] << "\n";
    }
    if (lf.state.w_allocated()) {
        const int dofs = prob.space.dof_count();
        os << "# what " << lf.state.what.size() << " " << dofs << "\n";
        for (std::size_t e = 0; e < lf.state.what.size(); ++e)
            for (int d = 0; d < dofs; ++d) os << e << "," << d << "," << lf.state.what[e][d] << "\n";
        os << "# what_norms " << lf.state.what.size() << "\n";
        for (std::size_t e = 0; e < lf.state.what.size(); ++e) {
            const double n2 = prob.space.M.inner(lf.state.what[e], lf.state.what[e]);
            os << e << "," << std::sqrt(std::max(0.0, n2)) << "\n";
        }
    }
    if (lf.has_theta_hat) {
        os << "# theta_hat " << lf.theta_hat.macro_elems << " " << lf.theta_hat.y1_elems << "\n";
        for (int e = 0; e < lf.theta_hat.macro_elems; ++e)
            for (int q = 0; q < lf.theta_hat.y1_elems; ++q)
                os << e << "," << q << "," << lf.theta_hat.at(e, q, 0) << ","
                   << lf.theta_hat.at(e, q, 1) << "\n";
    }
}

LimitFile read_limit_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open '" + path + "'");
    LimitFile lf;
    std::string line;
    if (!std::getline(is, line) || line.rfind("# hcoc-limit", 0) != 0)
        throw IoError(path + ": not a limit csv");
    enum class Block { u0, what, what_norms, theta } block = Block::u0;
    int what_elems = 0, what_dofs = 0, th_elems = 0, th_y1 = 0;
    std::vector<double> u0;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::stringstream ss(line.substr(1));
            std::string key;
            ss >> key;
            if (key == "cell") ss >> lf.cell_path;
            else if (key == "macro_n") ss >> lf.macro_n;
            else if (key == "kappa") {
                std::string v;
                ss >> v;
                lf.kappa = parse_kappa(v);
                lf.state.kappa = lf.kappa;
            } else if (key == "s_star") ss >> lf.state.s_star;
            else if (key == "value") ss >> lf.value;
            else if (key == "what") {
                ss >> what_elems >> what_dofs;
                lf.state.what.assign(std::size_t(what_elems), Vector(what_dofs, 0.0));
                block = Block::what;
            } else if (key == "what_norms") block = Block::what_norms;
            else if (key == "theta_hat") {
                ss >> th_elems >> th_y1;
                lf.theta_hat = TwoScaleControl::zero(th_elems, th_y1);
                lf.has_theta_hat = true;
                block = Block::theta;
            }
            continue;
        }
        if (line.rfind("node,", 0) == 0) continue;
        std::stringstream ss(line);
        std::string item;
        std::vector<double> vals;
        while (std::getline(ss, item, ',')) vals.push_back(std::stod(item));
        switch (block) {
            case Block::u0:
                if (vals.size() != 5) throw IoError(path + ": bad u0 row");
                u0.push_back(vals[3]);
                u0.push_back(vals[4]);
                break;
            case Block::what: {
                if (vals.size() != 3) throw IoError(path + ": bad what row");
                lf.state.what.at(std::size_t(vals[0]))[std::size_t(vals[1])] = vals[2];
                break;
            }
            case Block::what_norms:
                break;  // derived data, recomputed on demand
            case Block::theta: {
                if (vals.size() != 4) throw IoError(path + ": bad theta_hat row");
                const int e = int(vals[0]), q = int(vals[1]);
                lf.theta_hat.at(e, q, 0) = vals[2];
                lf.theta_hat.at(e, q, 1) = vals[3];
                break;
            }
        }
    }
    lf.state.u0 = u0;
    return lf;
}

}  // namespace hcoc
