#include "spinwg/mms_cases.hpp"

#include <algorithm>
#include <cmath>

namespace spinwg {

ManufacturedSolution standard_candidate(double extent) {
    const double k1 = M_PI / extent;
    const double k2 = 2.0 * M_PI / extent;

    // u+ = e^{i t}   sin(k1 x1) e^{-xn^2}
    // u- = e^{-2 i t} sin(k2 x1) xn e^{-xn^2}
    auto phase_p = [](double t) { return std::polar(1.0, t); };
    auto phase_m = [](double t) { return std::polar(1.0, -2.0 * t); };
    auto gp = [](double xn) { return std::exp(-xn * xn); };
    auto gp1 = [gp](double xn) { return -2.0 * xn * gp(xn); };
    auto gp2 = [gp](double xn) { return (4.0 * xn * xn - 2.0) * gp(xn); };
    auto gm = [gp](double xn) { return xn * gp(xn); };
    auto gm1 = [gp](double xn) { return (1.0 - 2.0 * xn * xn) * gp(xn); };
    auto gm2 = [gp](double xn) { return (4.0 * xn * xn * xn - 6.0 * xn) * gp(xn); };

    ManufacturedSolution m;
    m.u_plus = [=](double x1, double xn, double t) {
        return phase_p(t) * std::sin(k1 * x1) * gp(xn);
    };
    m.u_minus = [=](double x1, double xn, double t) {
        return phase_m(t) * std::sin(k2 * x1) * gm(xn);
    };
    m.dt_plus = [=](double x1, double xn, double t) {
        return cplx(0.0, 1.0) * phase_p(t) * std::sin(k1 * x1) * gp(xn);
    };
    m.dt_minus = [=](double x1, double xn, double t) {
        return cplx(0.0, -2.0) * phase_m(t) * std::sin(k2 * x1) * gm(xn);
    };
    m.lap_plus = [=](double x1, double xn, double t) {
        return phase_p(t) * (-k1 * k1 * std::sin(k1 * x1) * gp(xn) +
                             std::sin(k1 * x1) * gp2(xn));
    };
    m.lap_minus = [=](double x1, double xn, double t) {
        return phase_m(t) * (-k2 * k2 * std::sin(k2 * x1) * gm(xn) +
                             std::sin(k2 * x1) * gm2(xn));
    };
    m.d1_plus = [=](double x1, double xn, double t) {
        return phase_p(t) * k1 * std::cos(k1 * x1) * gp(xn);
    };
    m.dn_plus = [=](double x1, double xn, double t) {
        return phase_p(t) * std::sin(k1 * x1) * gp1(xn);
    };
    m.d1_minus = [=](double x1, double xn, double t) {
        return phase_m(t) * k2 * std::cos(k2 * x1) * gm(xn);
    };
    m.dn_minus = [=](double x1, double xn, double t) {
        return phase_m(t) * std::sin(k2 * x1) * gm1(xn);
    };
    return m;
}

CoefficientSet smooth_test_coefficients(const WaveguideGrid& g) {
    CoefficientSet c(g);
    const double k = M_PI / g.cs.extent;
    for (int j = 0; j < g.axis_nodes; ++j) {
        const double xn = g.axial_coord(j);
        const double env = std::exp(-xn * xn / 4.0);
        for (int i = 0; i < g.transverse_nodes(); ++i) {
            const double x1 = g.transverse_coord(i);
            // A = (d_n psi, -d_1 psi) for psi = 0.25 sin(k x1) e^{-xn^2/4}
            c.A.components[0].at(i, j) = 0.25 * std::sin(k * x1) * (-0.5 * xn) * env;
            c.A.components[1].at(i, j) = -0.25 * k * std::cos(k * x1) * env;
            c.p.at(i, j) = 0.2 * std::cos(k * x1) * std::exp(-xn * xn / 3.0);
            c.q_plus.at(i, j) = 0.15 * std::sin(k * x1) * env;
            c.q_minus.at(i, j) = -0.1 * std::cos(2.0 * k * x1) * env;
        }
    }
    return c;
}

double MmsLadder::min_order() const {
    return orders.empty() ? 0.0 : *std::min_element(orders.begin(), orders.end());
}

double MmsLadder::max_order() const {
    return orders.empty() ? 0.0 : *std::max_element(orders.begin(), orders.end());
}

namespace {

void fill_orders(MmsLadder& ladder) {
    for (size_t l = 0; l + 1 < ladder.levels.size(); ++l)
        ladder.orders.push_back(std::log2(ladder.levels[l].l2_space_time_error /
                                          ladder.levels[l + 1].l2_space_time_error));
}

} // namespace

MmsLadder mms_temporal_ladder(int transverse_nodes, int axial_nodes, double half_length,
                              double horizon, int base_steps, int levels, SolverOptions opts) {
    const CrossSection cs = build_cross_section(1.0, transverse_nodes);
    const ManufacturedSolution exact = standard_candidate(cs.extent);
    MmsLadder ladder;
    for (int l = 0; l < levels; ++l) {
        const int steps = base_steps << l;
        const WaveguideGrid g = build_grid(cs, half_length, axial_nodes, horizon, steps);
        const CoefficientSet c = smooth_test_coefficients(g);
        ladder.levels.push_back(mms_run(g, c, exact, MmsSourceMode::discrete_operator, opts));
    }
    fill_orders(ladder);
    return ladder;
}

MmsLadder mms_spatial_ladder(int base_transverse, int base_axial, double half_length,
                             double horizon, int fine_steps, int levels, SolverOptions opts) {
    const ManufacturedSolution exact = standard_candidate(1.0);
    MmsLadder ladder;
    for (int l = 0; l < levels; ++l) {
        const int nt = ((base_transverse - 1) << l) + 1;
        const int na = ((base_axial - 1) << l) + 1;
        const CrossSection cs = build_cross_section(1.0, nt);
        const WaveguideGrid g = build_grid(cs, half_length, na, horizon, fine_steps);
        const CoefficientSet c = smooth_test_coefficients(g);
        ladder.levels.push_back(mms_run(g, c, exact, MmsSourceMode::analytic_operator, opts));
    }
    fill_orders(ladder);
    return ladder;
}

} // namespace spinwg
