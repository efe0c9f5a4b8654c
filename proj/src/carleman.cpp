#include "spinwg/carleman.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace spinwg {

TransverseField quadratic_alpha(const CrossSection& cs, double x0_prime) {
    if (x0_prime >= 0.0 && x0_prime <= cs.extent)
        throw ContractError("quadratic_alpha: center " + std::to_string(x0_prime) +
                            " lies inside the closed cross-section");
    TransverseField a((size_t)cs.nodes);
    for (int i = 0; i < cs.nodes; ++i) {
        const double d = cs.coord(i) - x0_prime;
        a[i] = d * d;
    }
    return a;
}

namespace {

double one_sided_first(const TransverseField& a, int node, int nt, double h) {
    if (node == 0) return (-3.0 * a[0] + 4.0 * a[1] - a[2]) / (2.0 * h);
    return (3.0 * a[nt - 1] - 4.0 * a[nt - 2] + a[nt - 3]) / (2.0 * h);
}

double first_derivative(const TransverseField& a, int i, int nt, double h) {
    if (i == 0 || i == nt - 1) return one_sided_first(a, i, nt, h);
    return (a[i + 1] - a[i - 1]) / (2.0 * h);
}

double second_derivative(const TransverseField& a, int i, int nt, double h) {
    if (i == 0) return (2.0 * a[0] - 5.0 * a[1] + 4.0 * a[2] - a[3]) / (h * h);
    if (i == nt - 1)
        return (2.0 * a[nt - 1] - 5.0 * a[nt - 2] + 4.0 * a[nt - 3] - a[nt - 4]) / (h * h);
    return (a[i + 1] - 2.0 * a[i] + a[i - 1]) / (h * h);
}

} // namespace

AssumptionReport check_pseudoconvexity(const CrossSection& cs, const TransverseField& alpha,
                                       const SubBoundary& gamma_star, double lambda) {
    if (lambda < 0.0) throw ContractError("check_pseudoconvexity: lambda must be >= 0");
    if ((int)alpha.size() != cs.nodes)
        throw ContractError("check_pseudoconvexity: alpha size does not match the cross-section");
    const int nt = cs.nodes;
    const double h = cs.spacing();

    AssumptionReport rep;
    rep.lambda = lambda;

    double scale = 0.0;
    for (double a : alpha) scale = std::max(scale, std::abs(a));
    const double margin = 1e-10 * std::max(1.0, scale);

    // (i) gradient lower bound over interior nodes.
    rep.gradient_lower = std::numeric_limits<double>::infinity();
    for (int i = 1; i < nt - 1; ++i) {
        const double grad = std::abs(first_derivative(alpha, i, nt, h));
        if (grad < rep.gradient_lower) {
            rep.gradient_lower = grad;
            rep.gradient_witness = i;
        }
    }
    rep.gradient_ok = rep.gradient_lower > margin;

    // (ii) outgoing derivative negative on gamma \ gamma*.
    rep.boundary_worst = -std::numeric_limits<double>::infinity();
    for (const BoundaryNode& b : cs.boundary) {
        if (std::find(gamma_star.nodes.begin(), gamma_star.nodes.end(), b.node) !=
            gamma_star.nodes.end())
            continue;
        const double dnu = one_sided_first(alpha, b.node, nt, h) * b.normal;
        if (dnu > rep.boundary_worst) {
            rep.boundary_worst = dnu;
            rep.boundary_witness = b.node;
        }
    }
    rep.boundary_sign_ok = rep.boundary_witness < 0 || rep.boundary_worst < 0.0;

    // (iii) lambda (alpha')^2 + alpha'' over all nodes (scalar case n = 2).
    rep.convexity_lower = std::numeric_limits<double>::infinity();
    for (int i = 0; i < nt; ++i) {
        const double g1 = first_derivative(alpha, i, nt, h);
        const double val = lambda * g1 * g1 + second_derivative(alpha, i, nt, h);
        if (val < rep.convexity_lower) {
            rep.convexity_lower = val;
            rep.convexity_witness = i;
        }
    }
    rep.convexity_ok = rep.convexity_lower > margin;

    return rep;
}

WeightBundle build_weights(const CrossSection& cs, const TransverseField& alpha, double r,
                           double horizon, double s) {
    if (!(r > 1.0))
        throw ContractError("build_weights: r must exceed 1 (eta positivity), got " +
                            std::to_string(r));
    if (!(horizon > 0.0)) throw ContractError("build_weights: horizon must be positive");
    if (s < 0.0) throw ContractError("build_weights: s must be >= 0");
    if ((int)alpha.size() != cs.nodes)
        throw ContractError("build_weights: alpha size does not match the cross-section");

    WeightBundle w;
    w.cs = cs;
    w.alpha = alpha;
    w.alpha_max = *std::max_element(alpha.begin(), alpha.end());
    w.r = r;
    w.K = r * w.alpha_max;
    w.horizon = horizon;
    w.s = s;
    w.exp_2k = std::exp(2.0 * w.K);
    w.exp_beta.resize(alpha.size());
    for (size_t i = 0; i < alpha.size(); ++i) w.exp_beta[i] = std::exp(alpha[i] + w.K);
    return w;
}

double WeightBundle::normal_derivative_alpha(int boundary_node) const {
    for (const BoundaryNode& b : cs.boundary)
        if (b.node == boundary_node)
            return one_sided_first(alpha, b.node, cs.nodes, cs.spacing()) * b.normal;
    throw ContractError("normal_derivative_alpha: node " + std::to_string(boundary_node) +
                        " is not a boundary node");
}

double weighted_interior_norm_sq(const WaveguideGrid& g, const std::vector<ComplexField>& frames,
                                 const WeightBundle& w) {
    if (frames.size() < 3 || frames.size() % 2 == 0)
        throw ContractError("weighted_interior_norm_sq: frames must cover -T..T (odd count >= 3)");
    const int n_time = (int)frames.size();
    const double dt = 2.0 * w.horizon / (n_time - 1);
    double acc = 0.0;
    for (int m = 0; m < n_time; ++m) {
        const double t = -w.horizon + m * dt;
        const ComplexField& f = frames[m];
        if (f.nt != g.transverse_nodes() || f.na != g.axis_nodes)
            throw ContractError("weighted_interior_norm_sq: frame shape mismatch");
        const double wt = (m == 0 || m == n_time - 1) ? 0.5 : 1.0;
        double slice = 0.0;
        for (int j = 0; j < g.axis_nodes; ++j)
            for (int i = 0; i < g.transverse_nodes(); ++i) {
                const double weight = w.damp(i, t);
                slice += quad_weight(g, i, j) * weight * weight * std::norm(f.at(i, j));
            }
        acc += wt * dt * slice;
    }
    return acc;
}

double weighted_initial_norm_sq(const WaveguideGrid& g, const ComplexField& f,
                                const WeightBundle& w) {
    if (f.nt != g.transverse_nodes() || f.na != g.axis_nodes)
        throw ContractError("weighted_initial_norm_sq: shape mismatch");
    double acc = 0.0;
    for (int j = 0; j < g.axis_nodes; ++j)
        for (int i = 0; i < g.transverse_nodes(); ++i) {
            const double weight = std::exp(-w.s * w.eta0(i));
            acc += quad_weight(g, i, j) * weight * weight * std::norm(f.at(i, j));
        }
    return acc;
}

double weighted_initial_norm_sq(const WaveguideGrid& g, const ScalarField& f,
                                const WeightBundle& w) {
    ComplexField c(f.nt, f.na);
    for (size_t n = 0; n < f.v.size(); ++n) c.v[n] = f.v[n];
    return weighted_initial_norm_sq(g, c, w);
}

} // namespace spinwg
