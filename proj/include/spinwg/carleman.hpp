#ifndef SPINWG_CARLEMAN_HPP
#define SPINWG_CARLEMAN_HPP

#include "spinwg/fields.hpp"
#include "spinwg/geometry.hpp"

#include <vector>

namespace spinwg {

/// Scalar field on the cross-section nodes.
using TransverseField = std::vector<double>;

/// alpha(x') = |x' - x0'|^2 for an exterior center x0'.
TransverseField quadratic_alpha(const CrossSection& cs, double x0_prime);

/// Pseudoconvexity report for the weight generator alpha: gradient lower
/// bound, boundary sign on gamma \ gamma*, and the bilinear lower bound.
struct AssumptionReport {
    bool gradient_ok = false;      ///< (i)  |grad' alpha| >= c > 0 on omega
    bool boundary_sign_ok = false; ///< (ii) d_nu alpha < 0 on gamma \ gamma*
    bool convexity_ok = false;     ///< (iii) lambda |grad' alpha . z|^2 + D^2 alpha(z,z) >= c|z|^2

    double gradient_lower = 0.0; ///< c_i, min over interior nodes
    int gradient_witness = -1;
    double boundary_worst = 0.0; ///< max of d_nu alpha over gamma \ gamma* (negative iff ok)
    int boundary_witness = -1;   ///< -1 when gamma \ gamma* is empty
    double convexity_lower = 0.0; ///< c_iii, min over all nodes
    int convexity_witness = -1;
    double lambda = 0.0;

    bool all_ok() const { return gradient_ok && boundary_sign_ok && convexity_ok; }
};

AssumptionReport check_pseudoconvexity(const CrossSection& cs, const TransverseField& alpha,
                                       const SubBoundary& gamma_star, double lambda);

/// Carleman weight ingredients: beta = alpha + K with K = r ||alpha||_inf,
/// phi = e^{2 beta} / ((T+t)(T-t)), eta = (e^{2K} - e^{beta}) / ((T+t)(T-t)),
/// eta0 = eta at t = 0.
struct WeightBundle {
    CrossSection cs;
    TransverseField alpha;
    double alpha_max = 0.0;
    double r = 1.5;
    double K = 0.0;
    double horizon = 0.0; ///< T
    double s = 1.0;       ///< Carleman parameter

    std::vector<double> exp_beta; ///< e^{beta(x')} per node
    double exp_2k = 0.0;          ///< e^{2K}

    double beta(int i) const { return alpha[i] + K; }
    double eta0(int i) const { return (exp_2k - exp_beta[i]) / (horizon * horizon); }
    double eta(int i, double t) const {
        return (exp_2k - exp_beta[i]) / ((horizon + t) * (horizon - t));
    }
    double phi(int i, double t) const {
        return exp_beta[i] * exp_beta[i] / ((horizon + t) * (horizon - t));
    }
    /// e^{-s eta(x, t)}, extended by its limit 0 at t = +-T (1 when s = 0).
    double damp(int i, double t) const {
        if (s == 0.0) return 1.0;
        if (std::abs(t) >= horizon) return 0.0;
        return std::exp(-s * eta(i, t));
    }
    /// d_nu beta = d_nu alpha at a boundary node, one-sided second order.
    double normal_derivative_alpha(int boundary_node) const;
};

WeightBundle build_weights(const CrossSection& cs, const TransverseField& alpha, double r,
                           double horizon, double s);

/// Interior norm  || e^{-s eta} f ||^2  over Omega x (-T, T). `frames` holds
/// the 2M+1 time slices from -T to T; the endpoint slices are excluded from
/// the quadrature (the weight extends by zero there).
double weighted_interior_norm_sq(const WaveguideGrid& g, const std::vector<ComplexField>& frames,
                                 const WeightBundle& w);

/// Initial norm  || e^{-s eta0} f ||^2  over Omega.
double weighted_initial_norm_sq(const WaveguideGrid& g, const ComplexField& f,
                                const WeightBundle& w);
double weighted_initial_norm_sq(const WaveguideGrid& g, const ScalarField& f,
                                const WeightBundle& w);

/// Boundary norm  || e^{-s eta0} phi^{1/2} |d_nu beta|^{1/2} f ||^2  over
/// Gamma* x (-T, T), with f given per (boundary node, axial node, time node).
/// Time nodes run from -T to T; the endpoint nodes are excluded (phi is
/// singular there).
template <class Value>
double weighted_boundary_norm_sq(const WaveguideGrid& g, const WeightBundle& w,
                                 const std::vector<int>& boundary_nodes, int time_nodes,
                                 Value&& value) {
    if (time_nodes < 3) throw ContractError("weighted_boundary_norm_sq: need at least 3 time nodes");
    const double dt = 2.0 * w.horizon / (time_nodes - 1);
    double acc = 0.0;
    for (size_t b = 0; b < boundary_nodes.size(); ++b) {
        const int node = boundary_nodes[b];
        const double e0 = std::exp(-w.s * w.eta0(node));
        const double dnb = std::abs(w.normal_derivative_alpha(node));
        for (int m = 1; m + 1 < time_nodes; ++m) {
            const double t = -w.horizon + m * dt;
            const double wt = e0 * e0 * w.phi(node, t) * dnb * dt;
            double row = 0.0;
            for (int j = 0; j < g.axis_nodes; ++j) {
                const double wj = (j == 0 || j == g.axis_nodes - 1) ? 0.5 : 1.0;
                row += wj * std::norm(value((int)b, j, m));
            }
            acc += wt * row * g.axial_spacing();
        }
    }
    return acc;
}

} // namespace spinwg

#endif
