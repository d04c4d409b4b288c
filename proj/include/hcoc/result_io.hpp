#pragma once

#include <string>

#include "hcoc/state.hpp"
#include "hcoc/two_scale.hpp"

namespace hcoc {

// CSV with a commented header: node table x, y, u1, u2, a footer with s_star
// and the energy components, and an optional control block on inclusion nodes.
struct StateFile {
    std::string mesh_path;
    double eps = 0.0, delta = 0.0, alpha = 0.0, p = 2.0;
    DisplacementField u;
    double s_star = 0.0;
    EnergyReport energy;
    bool has_theta = false;
    ControlField theta;
};

void write_state_csv(const std::string& path, const MacroMesh& mesh, const StateFile& sf);
StateFile read_state_csv(const std::string& path);

// u0 nodal table plus, for finite kappa, the per-element W-hat values and
// norms, and optionally the two-scale control.
struct LimitFile {
    std::string cell_path;
    int macro_n = 0;
    double kappa = ScaleParams::infinite;
    double value = 0.0;  // energy at the written control, or the OCP cost
    TwoScaleState state;
    bool has_theta_hat = false;
    TwoScaleControl theta_hat;
};

void write_limit_csv(const std::string& path, const LimitProblem& prob, const LimitFile& lf);
LimitFile read_limit_csv(const std::string& path);

}  // namespace hcoc
