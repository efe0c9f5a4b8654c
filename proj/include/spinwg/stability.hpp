#ifndef SPINWG_STABILITY_HPP
#define SPINWG_STABILITY_HPP

#include "spinwg/carleman.hpp"
#include "spinwg/coefficients.hpp"
#include "spinwg/inversion.hpp"
#include "spinwg/probes.hpp"
#include "spinwg/solver.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace spinwg {

/// mu = || e^{-s eta0} phi^{1/2} |d_nu beta|^{1/2} d_nu v ||^2 over
/// Gamma* x (-T, T). The trace must be conjugate-extended (derivative parity).
double mu_functional(const WaveguideGrid& g, const NeumannTrace& extended_trace,
                     const WeightBundle& weights, int component);

/// Both Neumann trace series of the probe solves under one coefficient pair.
struct PairTraces {
    std::vector<NeumannTrace> first, second; ///< per probe, over [0, T]
};

PairTraces solve_pair_traces(const WaveguideGrid& g, const CoefficientSet& c1,
                             const CoefficientSet& c2, const ProbeSet& probes,
                             const SubBoundary& gamma_star, const SolverOptions& opts);

struct SeSides {
    double lhs = 0.0;            ///< Theta over the full cylinder
    double rhs_raw = 0.0;        ///< sum of theta-powers of the trace-difference norms
    double trace_norm_sum = 0.0; ///< same norms before the theta power (slope diagnostics)
    std::array<std::array<double, 2>, 3> trace_norms{}; ///< [probe][component]
};

/// Evaluates both sides of the Holder estimate from precomputed traces.
SeSides se_sides_from_traces(const WaveguideGrid& g, const CoefficientSet& c1,
                             const CoefficientSet& c2, const PairTraces& traces, double theta);

/// Full evaluation: runs the 2(n+1) forward solves and reduces.
SeSides se_sides(const WaveguideGrid& g, const CoefficientSet& c1, const CoefficientSet& c2,
                 const ProbeSet& probes, const SubBoundary& gamma_star, double theta,
                 const SolverOptions& opts = {});

/// Tail bound 4 (a^2 + p^2 + 2 q^2) |omega| * int_{|x_n| > y} e^{-2 kappa <x_n>^rho},
/// by adaptive quadrature.
double decay_budget(const AdmissibleClassParams& params, double omega_measure, double y);

/// int_{|x|>y} e^{-2 kappa <x>^rho} dx alone (test oracle hook).
double decay_tail_integral(double kappa, double rho, double y);

struct B2Row {
    int probe = 0;
    double s = 0.0;
    double lhs = 0.0;         ///< weighted norm of the t = 0 bracket pair
    double rhs_content = 0.0; ///< weighted coefficient norms + s (mu+ + mu-)
    double ratio = 0.0;       ///< lhs / (s^{-3/2} rhs_content)
    bool defined = false;     ///< false for the zero pair (null row)
};

/// Ratio table for the linearized weighted inequality: the empirical
/// stand-in for its unknowable constant, reported per probe and s.
std::vector<B2Row> inequality_b2_diagnostic(const WaveguideGrid& g, const CoefficientSet& delta,
                                            const LinearizedInitialData& exact,
                                            const std::vector<NeumannTrace>& v_traces,
                                            const CrossSection& cs, const TransverseField& alpha,
                                            double r, const std::vector<double>& s_grid);

// ---------------------------------------------------------------------------
// Sweep experiment

struct StabilitySetup {
    WaveguideGrid grid;
    AdmissibleClassParams params;
    ProbeSet probes;
    SubBoundary gamma_star;
    TransverseField alpha; ///< already scaled for the weight bundles
    double r = 1.5;
    std::vector<double> s_grid{1, 2, 4, 8, 16, 32, 64, 128, 256};
    double theta = 0.49;
    std::vector<double> amplitudes{1e-3, 1e-2, 1e-1};
    std::vector<std::uint64_t> seeds{1, 2, 3};
    std::vector<double> y_list{1, 2, 4};
    std::vector<PerturbationFamily> families{PerturbationFamily::p_only,
                                             PerturbationFamily::mixed};
    std::vector<double> theta_sweep; ///< extra thetas for the fit tables
    SolverOptions solver;
    double parity_tolerance = 1e-3;
    int threads = 1;
    bool with_b2 = true; ///< b2 rows for the largest-amplitude, first-seed pairs
};

struct SweepPoint {
    std::string family;
    double amplitude = 0.0;
    std::uint64_t seed = 0;
    double theta_omega = 0.0;    ///< lhs of the estimate
    double rhs_raw = 0.0;        ///< at the primary theta
    double trace_norm_sum = 0.0;
    std::array<std::array<double, 2>, 3> trace_norms{}; ///< [probe][component] L2 norms
    std::vector<double> theta_inside;  ///< per y
    std::vector<double> theta_outside; ///< per y
    std::vector<double> budget;        ///< decay budget per y
    std::vector<std::array<std::array<double, 2>, 3>> mu; ///< [s][probe][component]
    std::vector<double> xi;            ///< per s
    std::vector<std::vector<double>> e2_ratio; ///< [y][s] diagnostic ratio
};

struct FamilyFit {
    double theta = 0.0;
    std::string family;
    double lhs_slope = 0.0;        ///< d log lhs / d log amplitude
    double trace_norm_slope = 0.0; ///< d log trace_norm_sum / d log amplitude
    double c_hat = 0.0;            ///< max lhs / rhs(theta) over the family
    double c_hat_amplitude = 0.0;  ///< amplitude attaining the max
    bool max_at_largest_amplitude = false;
};

struct StabilityReport {
    double theta = 0.0;
    double epsilon = 0.0;
    std::vector<double> s_grid, y_list, amplitudes;
    std::vector<std::uint64_t> seeds;
    std::vector<SweepPoint> points;
    std::vector<FamilyFit> fits;
    double c_hat = 0.0; ///< global max lhs / rhs_raw
    double c_hat_amplitude = 0.0;
    std::vector<B2Row> b2;
};

StabilityReport run_stability_experiment(const StabilitySetup& setup);

const char* family_name(PerturbationFamily family);

} // namespace spinwg

#endif
