#ifndef SPINWG_COEFFICIENTS_HPP
#define SPINWG_COEFFICIENTS_HPP

#include "spinwg/fields.hpp"
#include "spinwg/geometry.hpp"
#include "spinwg/probes.hpp"

#include <cstdint>
#include <string>

namespace spinwg {

/// The unknown quadruple (A, p, q+, q-) as grid fields.
struct CoefficientSet {
    VectorField A;
    ScalarField p, q_plus, q_minus;

    CoefficientSet() = default;
    explicit CoefficientSet(const WaveguideGrid& g) : A(2, g), p(g), q_plus(g), q_minus(g) {}

    bool same_shape(const CoefficientSet& o) const;
};

/// Parameters of the admissible coefficient classes: sup-norm budget, decay
/// envelope, axial agreement radius for a_n, and the known background.
struct AdmissibleClassParams {
    double sup_budget = 1.0;       ///< M
    double decay_rate = 1.0;       ///< kappa > 0
    double decay_power = 1.0;      ///< rho > 0
    double amp_a = 0.1, amp_p = 0.1, amp_q = 0.1; ///< envelope amplitudes
    double agreement_radius = 1.0; ///< y* > 0: a_n matches the background on (-y*, y*)
    CoefficientSet background;
    int regularity_index = 2;           ///< N, metadata only
    int boundary_vanishing_order = 2;   ///< 2(N-1), metadata only
    double div_tolerance = 1e-12;       ///< absolute bound on the discrete divergence

    /// Decay envelope e^{-kappa <x_n>^rho}.
    double envelope(double x_n) const;
};

/// <x> = (1 + x^2)^{1/2}. Every decay envelope and probe profile routes
/// through here so the bracket convention lives in one place.
double japanese_bracket(double x);

/// Centered second-order divergence, one-sided at domain edges.
ScalarField divergence(const VectorField& A, const WaveguideGrid& g);

/// Vector field (D_n psi, -D_1 psi) from grid samples of a stream function,
/// using the same difference stencils as `divergence`; its discrete
/// divergence vanishes identically because the per-axis stencils commute.
VectorField stream_function_field(const ScalarField& psi, const WaveguideGrid& g);

enum class PerturbationFamily { p_only, mixed };

/// Background plus an in-class perturbation supported in the plateau.
/// The A part comes from a stream function supported in {|x_n| > y*}, so
/// delta a_n vanishes on (-y*, y*) and the discrete divergence is exact zero.
CoefficientSet make_perturbation(const WaveguideGrid& g, const AdmissibleClassParams& params,
                                 const PlateauBox& plateau, double amplitude, std::uint64_t seed,
                                 PerturbationFamily family = PerturbationFamily::mixed);

/// Per-condition admissibility report. Failures are entries, not errors.
struct ValidationReport {
    bool sup_norm_ok = false;
    bool envelope_ok = false;
    bool boundary_ok = false;
    bool divergence_ok = false;
    bool axial_agreement_ok = false;

    double worst_sup_norm = 0.0;        ///< max of the component sup-norms
    double worst_envelope_ratio = 0.0;  ///< max |delta| / (amp * envelope)
    double worst_boundary_value = 0.0;  ///< max |delta| on boundary nodes
    double worst_divergence = 0.0;      ///< max |div A|
    double worst_axial_mismatch = 0.0;  ///< max |a_n - a_n0| on (-y*, y*)

    bool all_ok() const {
        return sup_norm_ok && envelope_ok && boundary_ok && divergence_ok && axial_agreement_ok;
    }
};

ValidationReport validate_admissible(const WaveguideGrid& g, const CoefficientSet& c,
                                     const AdmissibleClassParams& params);

/// Theta over the region: sum of squared L2 norms of the component
/// differences (all A components, p, q+, q-), by the grid trapezoid rule.
double theta_norm(const WaveguideGrid& g, const CoefficientSet& c1, const CoefficientSet& c2,
                  const Region& region = Region::full());

} // namespace spinwg

#endif
