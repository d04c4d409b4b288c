#pragma once

#include <iosfwd>

#include "hcoc/ocp.hpp"
#include "hcoc/unfolding.hpp"

namespace hcoc {

// (eps, delta)-sweep at fixed kappa. For finite kappa the rule is
// delta = kappa * eps; for kappa = inf it is delta = eps^q with q in (0, 1),
// so delta/eps -> inf while eps <= C delta stays certified.
struct SweepConfig {
    double kappa = 1.0;  // ScaleParams::infinite allowed
    std::vector<int> n_list = {2, 4, 8};
    CellGeometry cell;
    int macro_n = 16;     // limit macro resolution
    double delta_q = 0.5; // exponent of the kappa = inf rule
    double alpha = 1.0;
    double p = 2.0;
    double gamma = 1.0;
    std::string f_spec = "preset:const";
    std::string ud_spec = "preset:trig";
    double lambda = 1.0, mu = 1.0;  // isotropic base tensor
    double tol_lin = 1e-10;
    double tol_fp = 1e-10;
    double tol_conv = 0.5;  // final gap must be below tol_conv * first gap
    int max_opt_iter = 400;
    unsigned seed = 20240817;
    std::uint8_t gamma0_faces = face::left;

    static SweepConfig parse(std::istream& is);
    static SweepConfig parse_file(const std::string& path);
    void validate() const;
    double delta_of(double eps) const;
    PhysicsParams physics() const;
    HookeTensor base_tensor() const { return HookeTensor::isotropic(lambda, mu); }
};

struct SweepRow {
    int n = 0;
    double eps = 0.0, delta = 0.0;
    double energy = 0.0;         // m_eps_delta (energy sweeps)
    double cost = 0.0;           // i_eps_delta (OCP sweeps)
    double cost_at_zero = 0.0;
    double state_error = 0.0;    // ||T_eps(u) - (u0 + W/kappa)||
    double control_error = 0.0;  // ||T_eps(Theta) - Theta_hat||
    double opt_residual = 0.0;
    double korn = 0.0;           // max sampled Korn-type ratio
    double lipschitz = 0.0;      // max sampled control-to-state ratio
    double apriori_state = 0.0;  // (delta||e(u)||_1 + ||e(u)||_2)/(||f||+||theta||)
    double apriori_adjoint = 0.0;
    double control_norm = 0.0;
    double wall_seconds = 0.0;
};

struct SweepOutcome {
    bool is_ocp = false;
    std::vector<SweepRow> rows;
    double limit_value = 0.0;   // m_kappa or i_kappa
    std::vector<double> gaps;   // |row value - limit_value|
    std::vector<double> rates;  // empirical orders from consecutive gaps (informational)
    bool pass = false;
    std::string verdict;
};

// Energy convergence m_eps_delta -> m_kappa at zero control, with the
// two-scale state error tracked per row.
SweepOutcome run_energy_sweep(const SweepConfig& cfg);

// OCP convergence i_eps_delta -> i_kappa plus unfolded control errors and
// the uniformity diagnostics.
SweepOutcome run_ocp_sweep(const SweepConfig& cfg);

void write_energy_csv(const SweepOutcome& out, const std::string& path);
void write_ocp_csv(const SweepOutcome& out, const std::string& path);
void write_summary(const std::vector<SweepOutcome>& outcomes, const std::string& path);

// Smooth random field vanishing on the Gamma0 faces; the coefficient draw is
// mesh-independent so sampled ratios are comparable across resolutions.
DisplacementField random_smooth_field(const MacroMesh& mesh, std::uint8_t gamma0_faces,
                                      unsigned seed);

}  // namespace hcoc
