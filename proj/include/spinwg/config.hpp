#ifndef SPINWG_CONFIG_HPP
#define SPINWG_CONFIG_HPP

#include "spinwg/coefficients.hpp"
#include "spinwg/probes.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace spinwg {

/// Whole-experiment configuration; sections mirror the owning modules.
/// Defaults describe the baseline desk-scale setup.
struct ExperimentConfig {
    // [grid]
    double extent = 1.0;
    int transverse_nodes = 129;
    double half_length = 8.0;
    int axial_nodes = 257;
    double horizon = 1.0;
    int steps = 1024;

    // [class]
    double sup_budget = 1.0;
    double decay_rate = 1.0;
    double decay_power = 1.0;
    double amp_a = 0.1, amp_p = 0.1, amp_q = 0.1;
    double agreement_radius = 1.0;

    // [probe]
    double epsilon = 0.5;
    std::string probe_mode = "cutoff"; ///< "cutoff" | "analytic-trace"
    double transverse_margin = 0.05;
    double transverse_rise = 0.10;
    double axial_plateau = 4.0;
    double axial_rise = 2.0;

    // [carleman]
    double center = -1.0; ///< x0', outside the closed cross-section
    double r = 1.5;
    std::vector<double> s_grid{1, 2, 4, 8, 16, 32, 64, 128, 256};
    double lambda = 1e-3;
    double alpha_scale = 0.005; ///< scale applied to alpha for weight bundles

    // [harness]
    double theta = 0.49;
    std::vector<double> theta_sweep{0.1, 0.25, 0.49};
    std::vector<double> amplitudes{1e-3, 1e-2, 1e-1};
    std::vector<std::uint64_t> seeds{1, 2, 3};
    std::vector<double> y_list{1, 2, 4};
    std::vector<std::string> families{"p_only", "mixed"};
    bool with_b2 = true;

    // [pair] single-pair subcommands (forward, invert)
    double pair_amplitude = 0.01;
    std::uint64_t pair_seed = 1;
    std::string pair_family = "mixed";
    bool dump_full_trajectory = false;

    // [mms]
    int mms_levels = 3;
    int mms_base_steps = 32;
    int mms_base_transverse = 17;
    int mms_base_axial = 33;
    double mms_half_length = 4.0;
    int mms_fine_steps = 512; ///< fixed dt for the spatial ladder
    int mms_time_transverse = 33;
    int mms_time_axial = 65; ///< fixed grid for the temporal ladder

    // [solver]
    double rel_residual = 1e-10;
    double parity_tolerance = 1e-3;

    // [output]
    std::string directory = "out";
    int threads = 0; ///< 0: SPINWG_THREADS env var, else 1

    // ---- derived builders -------------------------------------------------
    CrossSection cross_section() const;
    WaveguideGrid grid() const;
    AdmissibleClassParams class_params() const;
    CutoffSpec cutoff() const;
    BoundaryMode boundary_mode() const;
    ProbeSet probe_set() const;
    std::vector<PerturbationFamily> family_list() const;
    PerturbationFamily pair_family_value() const;
    int effective_threads() const;
};

/// Parse + cross-validate. Unknown sections or keys are errors.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const std::string& text, const std::string& origin = "<string>");

/// Re-validates the cross-field constraints (also applied after CLI overrides).
void validate_config(const ExperimentConfig& cfg);

/// Canonical echo of the full configuration, defaults filled in.
std::string echo_config(const ExperimentConfig& cfg);

} // namespace spinwg

#endif
