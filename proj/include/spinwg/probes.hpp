#ifndef SPINWG_PROBES_HPP
#define SPINWG_PROBES_HPP

#include "spinwg/fields.hpp"
#include "spinwg/geometry.hpp"

#include <utility>
#include <vector>

namespace spinwg {

struct CoefficientSet; // coefficients.hpp

/// Axial decay profile w(x_n) = <x_n>^{-(1+eps)/2} and its derivative.
/// Requires eps in (0, 1).
struct AxialProfile {
    double value;
    double derivative;
};
AxialProfile axial_profile(double x_n, double epsilon);

/// C^3 polynomial smoothstep on [0, 1] (0 below, 1 above) and its derivative.
double smoothstep3(double t);
double smoothstep3_derivative(double t);

/// Cutoff geometry, in length units. chi = chi1(x') * chi2(x_n) equals 1 on
/// the plateau and 0 on a collar along gamma and near +-X.
struct CutoffSpec {
    double transverse_margin = 0.05; ///< zero collar width at each end of omega
    double transverse_rise = 0.10;   ///< transition width of chi1
    double axial_plateau = 4.0;      ///< half-length of the chi2 == 1 region
    double axial_rise = 2.0;         ///< transition width of chi2

    double chi1(double x, double extent) const;
    double chi1_derivative(double x, double extent) const;
    double chi2(double x_n) const;
    double chi2_derivative(double x_n) const;
};

/// Box where the cutoff is identically 1. Coefficient perturbations are
/// supported here, and reconstruction masks live inside it.
struct PlateauBox {
    double x1_lo = 0.0, x1_hi = 0.0; ///< transverse plateau interval
    double xn_half = 0.0;            ///< axial plateau half-length

    bool contains(double x1, double x_n) const {
        return x1 >= x1_lo && x1 <= x1_hi && std::abs(x_n) <= xn_half;
    }
};

enum class BoundaryMode {
    homogeneous_cutoff, ///< probe profiles multiplied by chi; g == 0 exactly compatible
    analytic_trace,     ///< uncut profiles; g = trace of the static initial state
};

/// One initial state (u0+, u0-) with analytic gradients of both components.
struct Probe {
    ScalarField u0_plus, u0_minus;
    VectorField grad_plus, grad_minus;
    BoundaryMode mode = BoundaryMode::homogeneous_cutoff;
    double tail_fraction = 0.0; ///< |u0|^2 mass beyond the axial plateau / total

    TwoStateField initial_state() const;
};

/// The n+1 probe initial states of the probing scheme.
struct ProbeSet {
    double epsilon = 0.5;
    CutoffSpec cutoff;
    BoundaryMode mode = BoundaryMode::homogeneous_cutoff;
    std::vector<Probe> probes;

    PlateauBox plateau(const WaveguideGrid& g) const;
};

/// Builds the n+1 probes: (0, chi w), the component swap, and x_k chi w pairs.
ProbeSet make_probe_set(const WaveguideGrid& g, double epsilon, const CutoffSpec& cutoff,
                        BoundaryMode mode = BoundaryMode::homogeneous_cutoff);

/// Max over gamma nodes of |H0^ell u0| for the discrete background Hamiltonian,
/// one row per component. In cutoff mode this is zero to round-off as long as
/// ell does not exceed the zero collar width.
double compatibility_residual(const WaveguideGrid& g, const Probe& probe,
                              const CoefficientSet& background, int ell);

} // namespace spinwg

#endif
