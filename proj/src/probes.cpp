#include "spinwg/probes.hpp"

#include "spinwg/coefficients.hpp"

#include <cmath>
#include <string>

namespace spinwg {

AxialProfile axial_profile(double x_n, double epsilon) {
    if (!(epsilon > 0.0 && epsilon < 1.0))
        throw ContractError("axial_profile: epsilon must lie in (0, 1), got " +
                            std::to_string(epsilon));
    const double br = japanese_bracket(x_n);
    const double w = std::pow(br, -(1.0 + epsilon) / 2.0);
    const double dw = -((1.0 + epsilon) / 2.0) * x_n * std::pow(br, -(5.0 + epsilon) / 2.0);
    return {w, dw};
}

double smoothstep3(double t) {
    if (t <= 0.0) return 0.0;
    if (t >= 1.0) return 1.0;
    // 35 t^4 - 84 t^5 + 70 t^6 - 20 t^7; first three derivatives vanish at 0 and 1.
    return ((((-20.0 * t + 70.0) * t - 84.0) * t + 35.0) * t) * t * t * t;
}

double smoothstep3_derivative(double t) {
    if (t <= 0.0 || t >= 1.0) return 0.0;
    const double u = t * (1.0 - t);
    return 140.0 * u * u * u;
}

double CutoffSpec::chi1(double x, double extent) const {
    const double m = transverse_margin, r = transverse_rise;
    const double lo = smoothstep3((x - m) / r);
    const double hi = smoothstep3((extent - m - x) / r);
    return std::min(lo, hi);
}

double CutoffSpec::chi1_derivative(double x, double extent) const {
    const double m = transverse_margin, r = transverse_rise;
    const double tl = (x - m) / r, th = (extent - m - x) / r;
    if (tl < th) return smoothstep3_derivative(tl) / r;
    if (th < tl) return -smoothstep3_derivative(th) / r;
    return 0.0; // midpoint of a symmetric profile
}

double CutoffSpec::chi2(double x_n) const {
    return smoothstep3((axial_plateau + axial_rise - std::abs(x_n)) / axial_rise);
}

double CutoffSpec::chi2_derivative(double x_n) const {
    const double t = (axial_plateau + axial_rise - std::abs(x_n)) / axial_rise;
    const double s = x_n >= 0.0 ? 1.0 : -1.0;
    return -s * smoothstep3_derivative(t) / axial_rise;
}

TwoStateField Probe::initial_state() const {
    TwoStateField u(u0_plus.nt, u0_plus.na);
    for (size_t n = 0; n < u0_plus.v.size(); ++n) {
        u.u_plus.v[n] = cplx(u0_plus.v[n], 0.0);
        u.u_minus.v[n] = cplx(u0_minus.v[n], 0.0);
    }
    return u;
}

PlateauBox ProbeSet::plateau(const WaveguideGrid& g) const {
    PlateauBox box;
    box.x1_lo = cutoff.transverse_margin + cutoff.transverse_rise;
    box.x1_hi = g.cs.extent - cutoff.transverse_margin - cutoff.transverse_rise;
    box.xn_half = cutoff.axial_plateau;
    return box;
}

namespace {

// sigma in {0, 1}: probe profile x1^sigma * chi * w with analytic gradient.
void fill_profile(const WaveguideGrid& g, double epsilon, const CutoffSpec& cut, bool cut_active,
                  int sigma, ScalarField& value, VectorField& grad) {
    const double extent = g.cs.extent;
    for (int j = 0; j < g.axis_nodes; ++j) {
        const double x_n = g.axial_coord(j);
        const AxialProfile w = axial_profile(x_n, epsilon);
        const double c2 = cut_active ? cut.chi2(x_n) : 1.0;
        const double dc2 = cut_active ? cut.chi2_derivative(x_n) : 0.0;
        for (int i = 0; i < g.transverse_nodes(); ++i) {
            const double x1 = g.transverse_coord(i);
            const double c1 = cut_active ? cut.chi1(x1, extent) : 1.0;
            const double dc1 = cut_active ? cut.chi1_derivative(x1, extent) : 0.0;
            const double xs = (sigma == 0) ? 1.0 : x1;
            value.at(i, j) = xs * c1 * c2 * w.value;
            grad.components[0].at(i, j) =
                ((sigma == 0 ? 0.0 : c1) + xs * dc1) * c2 * w.value;
            grad.components[1].at(i, j) = xs * c1 * (dc2 * w.value + c2 * w.derivative);
        }
    }
}

double tail_fraction_of(const WaveguideGrid& g, const Probe& p, double plateau_half) {
    double tail = 0.0, total = 0.0;
    for (int j = 0; j < g.axis_nodes; ++j) {
        const bool beyond = std::abs(g.axial_coord(j)) > plateau_half;
        for (int i = 0; i < g.transverse_nodes(); ++i) {
            const double m = quad_weight(g, i, j) * (p.u0_plus.at(i, j) * p.u0_plus.at(i, j) +
                                                     p.u0_minus.at(i, j) * p.u0_minus.at(i, j));
            total += m;
            if (beyond) tail += m;
        }
    }
    return total > 0.0 ? tail / total : 0.0;
}

// Number of node layers next to the lateral/axial boundary on which both
// probe components vanish identically.
int zero_collar_depth(const Probe& p) {
    const int nt = p.u0_plus.nt, na = p.u0_plus.na;
    auto layer_zero = [&](int d) {
        for (int j = 0; j < na; ++j)
            for (int i = 0; i < nt; ++i) {
                const int dist = std::min(std::min(i, nt - 1 - i), std::min(j, na - 1 - j));
                if (dist == d && (p.u0_plus.at(i, j) != 0.0 || p.u0_minus.at(i, j) != 0.0))
                    return false;
            }
        return true;
    };
    int depth = -1;
    const int max_d = std::min(nt, na) / 2;
    while (depth + 1 <= max_d && layer_zero(depth + 1)) ++depth;
    return depth;
}

// Full-grid background Hamiltonian with exterior (ghost) values taken as 0,
// matching the boundary rows of the assembled operator. Real-field variant:
// probes and background coefficients are real.
void apply_hamiltonian_ghost0(const WaveguideGrid& g, const CoefficientSet& c,
                              const ScalarField& up, const ScalarField& um, ScalarField& out_p,
                              ScalarField& out_m) {
    const int nt = g.transverse_nodes(), na = g.axis_nodes;
    const double h1 = g.transverse_spacing(), hn = g.axial_spacing();
    const double ih1 = 1.0 / (h1 * h1), ihn = 1.0 / (hn * hn);
    const ScalarField& a1 = c.A.components[0];
    const ScalarField& an = c.A.components[1];

    auto val = [&](const ScalarField& f, int i, int j) {
        return (i < 0 || i >= nt || j < 0 || j >= na) ? 0.0 : f.at(i, j);
    };
    auto lap = [&](const ScalarField& f, int i, int j) {
        return (2.0 * ih1 + 2.0 * ihn) * f.at(i, j) - ih1 * (val(f, i - 1, j) + val(f, i + 1, j)) -
               ihn * (val(f, i, j - 1) + val(f, i, j + 1));
    };
    // Skew form (A . grad + grad . (A .)) / 2 by centered differences.
    auto skew = [&](const ScalarField& f, int i, int j) {
        double s = 0.0;
        if (i + 1 < nt) s += (a1.at(i, j) + a1.at(i + 1, j)) / (4.0 * h1) * f.at(i + 1, j);
        if (i - 1 >= 0) s -= (a1.at(i, j) + a1.at(i - 1, j)) / (4.0 * h1) * f.at(i - 1, j);
        if (j + 1 < na) s += (an.at(i, j) + an.at(i, j + 1)) / (4.0 * hn) * f.at(i, j + 1);
        if (j - 1 >= 0) s -= (an.at(i, j) + an.at(i, j - 1)) / (4.0 * hn) * f.at(i, j - 1);
        return s;
    };

    for (int j = 0; j < na; ++j)
        for (int i = 0; i < nt; ++i) {
            out_p.at(i, j) = lap(up, i, j) + c.q_plus.at(i, j) * up.at(i, j) + skew(um, i, j) +
                            c.p.at(i, j) * um.at(i, j);
            out_m.at(i, j) = lap(um, i, j) + c.q_minus.at(i, j) * um.at(i, j) - skew(up, i, j) +
                            c.p.at(i, j) * up.at(i, j);
        }
}

} // namespace

ProbeSet make_probe_set(const WaveguideGrid& g, double epsilon, const CutoffSpec& cutoff,
                        BoundaryMode mode) {
    if (!(epsilon > 0.0 && epsilon < 1.0))
        throw ContractError("make_probe_set: epsilon must lie in (0, 1)");

    ProbeSet set;
    set.epsilon = epsilon;
    set.cutoff = cutoff;
    set.mode = mode;

    const bool cut_active = (mode == BoundaryMode::homogeneous_cutoff);
    if (cut_active) {
        const PlateauBox box = set.plateau(g);
        const double h1 = g.transverse_spacing(), hn = g.axial_spacing();
        bool has_x1 = false, has_xn = false;
        for (int i = 0; i < g.transverse_nodes(); ++i)
            if (g.transverse_coord(i) >= box.x1_lo && g.transverse_coord(i) <= box.x1_hi)
                has_x1 = true;
        for (int j = 0; j < g.axis_nodes; ++j)
            if (std::abs(g.axial_coord(j)) <= box.xn_half) has_xn = true;
        if (box.x1_lo >= box.x1_hi || !has_x1 || !has_xn)
            throw ContractError("make_probe_set: cutoff plateau is empty on this grid");
        if (cutoff.transverse_margin < 2.0 * h1 ||
            g.half_length - (cutoff.axial_plateau + cutoff.axial_rise) < 2.0 * hn)
            throw ContractError(
                "make_probe_set: cutoff must vanish on a collar of at least 2 nodes "
                "inside the lateral boundary and near +-X");
    }

    const int n = g.cs.dimension + 1; // space dimension
    for (int k = 0; k < n + 1; ++k) {
        Probe p;
        p.mode = mode;
        p.u0_plus = ScalarField(g);
        p.u0_minus = ScalarField(g);
        p.grad_plus = VectorField(2, g);
        p.grad_minus = VectorField(2, g);

        if (k == 0) {
            fill_profile(g, epsilon, cutoff, cut_active, 0, p.u0_minus, p.grad_minus);
        } else if (k == 1) {
            fill_profile(g, epsilon, cutoff, cut_active, 0, p.u0_plus, p.grad_plus);
        } else {
            fill_profile(g, epsilon, cutoff, cut_active, 1, p.u0_plus, p.grad_plus);
            p.u0_minus = p.u0_plus;
            p.grad_minus = p.grad_plus;
        }
        p.tail_fraction = tail_fraction_of(g, p, cutoff.axial_plateau);
        set.probes.push_back(std::move(p));
    }
    return set;
}

double compatibility_residual(const WaveguideGrid& g, const Probe& probe,
                              const CoefficientSet& background, int ell) {
    if (ell < 0 || ell > 2)
        throw ContractError("compatibility_residual: order must be 0, 1 or 2");
    if (probe.mode == BoundaryMode::homogeneous_cutoff) {
        const int collar = zero_collar_depth(probe);
        if (ell > collar)
            throw ContractError("compatibility_residual: order " + std::to_string(ell) +
                                " exceeds the zero collar depth " + std::to_string(collar) +
                                " (stencil reach)");
    }

    ScalarField up = probe.u0_plus, um = probe.u0_minus;
    ScalarField tp(g), tm(g);
    for (int pass = 0; pass < ell; ++pass) {
        apply_hamiltonian_ghost0(g, background, up, um, tp, tm);
        std::swap(up, tp);
        std::swap(um, tm);
    }

    double worst = 0.0;
    const int nt = g.transverse_nodes();
    for (const BoundaryNode& b : g.cs.boundary)
        for (int j = 0; j < g.axis_nodes; ++j)
            worst = std::max({worst, std::abs(up.at(b.node, j)), std::abs(um.at(b.node, j))});
    // Axial truncation ends are Dirichlet-closed as well.
    for (int i = 0; i < nt; ++i)
        worst = std::max({worst, std::abs(up.at(i, 0)), std::abs(um.at(i, 0)),
                          std::abs(up.at(i, g.axis_nodes - 1)),
                          std::abs(um.at(i, g.axis_nodes - 1))});
    return worst;
}

} // namespace spinwg
