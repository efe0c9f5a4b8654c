#include "spinwg/inversion.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <string>

namespace spinwg {

namespace {

constexpr cplx kMinusI{0.0, -1.0};

void require_probe_count(const ProbeSet& probes) {
    if (probes.probes.size() != 3)
        throw ContractError("inversion: expected the n + 1 = 3 probes of the n = 2 target");
}

} // namespace

LinearizedInitialData exact_initial_v(const WaveguideGrid& g, const CoefficientSet& delta,
                                      const ProbeSet& probes) {
    require_probe_count(probes);
    if (delta.p.nt != g.transverse_nodes() || delta.p.na != g.axis_nodes)
        throw ContractError("exact_initial_v: delta shape mismatch");

    LinearizedInitialData data;
    data.provenance = LinearizedInitialData::Provenance::oracle;
    for (const Probe& probe : probes.probes) {
        TwoStateField v(g);
        for (int j = 0; j < g.axis_nodes; ++j)
            for (int i = 0; i < g.transverse_nodes(); ++i) {
                const double a1 = delta.A.components[0].at(i, j);
                const double an = delta.A.components[1].at(i, j);
                const double adg_minus = a1 * probe.grad_minus.components[0].at(i, j) +
                                         an * probe.grad_minus.components[1].at(i, j);
                const double adg_plus = a1 * probe.grad_plus.components[0].at(i, j) +
                                        an * probe.grad_plus.components[1].at(i, j);
                v.u_plus.at(i, j) =
                    kMinusI * (adg_minus + delta.q_plus.at(i, j) * probe.u0_plus.at(i, j) +
                               delta.p.at(i, j) * probe.u0_minus.at(i, j));
                v.u_minus.at(i, j) =
                    kMinusI * (-adg_plus + delta.q_minus.at(i, j) * probe.u0_minus.at(i, j) +
                               delta.p.at(i, j) * probe.u0_plus.at(i, j));
            }
        data.v0.push_back(std::move(v));
    }
    return data;
}

LinearizedInitialData simulated_initial_v(const WaveguideGrid& g, const CoefficientSet& c1,
                                          const CoefficientSet& c2, const ProbeSet& probes,
                                          SolverOptions opts) {
    require_probe_count(probes);
    const ForwardSolver solver1(g, c1, opts);
    const ForwardSolver solver2(g, c2, opts);
    const double dt = solver1.dt();

    LinearizedInitialData data;
    data.provenance = LinearizedInitialData::Provenance::simulated;
    for (const Probe& probe : probes.probes) {
        const TwoStateField u0 = probe.initial_state();
        LeadingSnapshotsSink s1(3), s2(3);
        if (probe.mode == BoundaryMode::homogeneous_cutoff) {
            solver1.run(u0, 2, s1);
            solver2.run(u0, 2, s2);
        } else {
            solver1.run_lifted(u0, 2, s1);
            solver2.run_lifted(u0, 2, s2);
        }
        // u(., 0) difference is exactly zero, so the one-sided stencil reduces
        // to (4 du^1 - du^2) / (2 dt).
        TwoStateField v(g);
        for (int comp = 0; comp < 2; ++comp) {
            auto member = comp == 0 ? &TwoStateField::u_plus : &TwoStateField::u_minus;
            const auto& d1a = s1.fields()[1].*member;
            const auto& d2a = s1.fields()[2].*member;
            const auto& d1b = s2.fields()[1].*member;
            const auto& d2b = s2.fields()[2].*member;
            auto& dst = v.*member;
            for (size_t n = 0; n < dst.v.size(); ++n)
                dst.v[n] =
                    (4.0 * (d1a.v[n] - d1b.v[n]) - (d2a.v[n] - d2b.v[n])) / (2.0 * dt);
        }
        data.v0.push_back(std::move(v));
    }
    return data;
}

Masks make_masks(const WaveguideGrid& g, const ProbeSet& probes, double agreement_radius,
                 double w_prime_floor) {
    if (!(agreement_radius > 0.0))
        throw ContractError("make_masks: agreement radius y* must be positive");
    const PlateauBox box = probes.plateau(g);

    double w_prime_max = 0.0;
    for (int j = 0; j < g.axis_nodes; ++j)
        w_prime_max = std::max(
            w_prime_max, std::abs(axial_profile(g.axial_coord(j), probes.epsilon).derivative));

    // X_far: outermost |x_n| where |w'| still clears the floor.
    double x_far = 0.0;
    for (int j = 0; j < g.axis_nodes; ++j) {
        const double xn = g.axial_coord(j);
        if (std::abs(axial_profile(xn, probes.epsilon).derivative) >= w_prime_floor * w_prime_max)
            x_far = std::max(x_far, std::abs(xn));
    }
    const double outer = std::min(box.xn_half, x_far);

    Masks m;
    m.nt = g.transverse_nodes();
    m.na = g.axis_nodes;
    m.plateau.assign((size_t)m.nt * m.na, 0);
    m.annulus.assign((size_t)m.nt * m.na, 0);
    for (int j = 0; j < g.axis_nodes; ++j) {
        const double xn = g.axial_coord(j);
        for (int i = 0; i < g.transverse_nodes(); ++i) {
            const double x1 = g.transverse_coord(i);
            if (!box.contains(x1, xn)) continue;
            m.plateau[(size_t)j * m.nt + i] = 1;
            if (std::abs(xn) >= agreement_radius && std::abs(xn) <= outer)
                m.annulus[(size_t)j * m.nt + i] = 1;
        }
    }
    return m;
}

namespace {

struct ResidueTracker {
    double max_imag = 0.0;
    double max_real = 0.0;

    double take(cplx estimate) {
        max_imag = std::max(max_imag, std::abs(estimate.imag()));
        max_real = std::max(max_real, std::abs(estimate.real()));
        return estimate.real();
    }
    double relative() const { return max_real > 0.0 ? max_imag / max_real : 0.0; }
};

void check_masks(const WaveguideGrid& g, const Masks& masks) {
    if (masks.nt != g.transverse_nodes() || masks.na != g.axis_nodes)
        throw ContractError("reconstruct: mask shape mismatch");
}

} // namespace

ReconstructionResult reconstruct_pointwise(const WaveguideGrid& g,
                                           const LinearizedInitialData& data,
                                           const ProbeSet& probes, const Masks& masks) {
    require_probe_count(probes);
    check_masks(g, masks);
    if (data.v0.size() != probes.probes.size())
        throw ContractError("reconstruct_pointwise: data/probe count mismatch");

    double w_prime_max = 0.0;
    for (int j = 0; j < g.axis_nodes; ++j)
        w_prime_max = std::max(
            w_prime_max, std::abs(axial_profile(g.axial_coord(j), probes.epsilon).derivative));
    const double w_prime_guard = 1e-6 * w_prime_max;

    ReconstructionResult res;
    res.delta = CoefficientSet(g);
    ResidueTracker residue;
    constexpr cplx kI{0.0, 1.0};

    const TwoStateField& v1 = data.v0[0]; // probe (0, chi w)
    const TwoStateField& v2 = data.v0[1]; // probe (chi w, 0)
    const TwoStateField& v3 = data.v0[2]; // probe x_1 (chi w, chi w)

    for (int j = 0; j < g.axis_nodes; ++j) {
        const double xn = g.axial_coord(j);
        const AxialProfile w = axial_profile(xn, probes.epsilon);
        for (int i = 0; i < g.transverse_nodes(); ++i) {
            if (!masks.in_plateau(i, j)) continue;
            const double x1 = g.transverse_coord(i);

            const cplx dq_minus = kI * v1.u_minus.at(i, j) / w.value;
            const cplx dq_plus = kI * v2.u_plus.at(i, j) / w.value;
            const cplx dp = kI * (v1.u_plus.at(i, j) + v2.u_minus.at(i, j)) / (2.0 * w.value);

            cplx dan = 0.0;
            if (masks.in_annulus(i, j)) {
                if (std::abs(w.derivative) < w_prime_guard)
                    throw ContractError("reconstruct_pointwise: |w'| below threshold inside "
                                        "the annulus mask (mask violation at x_n = " +
                                        std::to_string(xn) + ")");
                dan = kI * (v1.u_plus.at(i, j) - v2.u_minus.at(i, j)) / (2.0 * w.derivative);
            }

            // x_k probe: both component formulas, averaged.
            const cplx da1_plus = (kI * v3.u_plus.at(i, j) - dan * x1 * w.derivative -
                                   (dq_plus + dp) * x1 * w.value) /
                                  w.value;
            const cplx da1_minus = (-kI * v3.u_minus.at(i, j) - dan * x1 * w.derivative +
                                    (dq_minus + dp) * x1 * w.value) /
                                   w.value;
            const cplx da1 = 0.5 * (da1_plus + da1_minus);

            res.delta.q_minus.at(i, j) = residue.take(dq_minus);
            res.delta.q_plus.at(i, j) = residue.take(dq_plus);
            res.delta.p.at(i, j) = residue.take(dp);
            res.delta.A.components[1].at(i, j) = residue.take(dan);
            res.delta.A.components[0].at(i, j) = residue.take(da1);
        }
    }
    res.max_imag_residue = residue.relative();
    return res;
}

ReconstructionResult reconstruct_least_squares(const WaveguideGrid& g,
                                               const LinearizedInitialData& data,
                                               const ProbeSet& probes, const Masks& masks) {
    require_probe_count(probes);
    check_masks(g, masks);
    if (data.v0.size() != probes.probes.size())
        throw ContractError("reconstruct_least_squares: data/probe count mismatch");

    ReconstructionResult res;
    res.delta = CoefficientSet(g);
    ResidueTracker residue;

    Eigen::MatrixXd a(6, 5); // unknowns: (a1, an, p, q+, q-)
    Eigen::VectorXd b(6);

    for (int j = 0; j < g.axis_nodes; ++j)
        for (int i = 0; i < g.transverse_nodes(); ++i) {
            if (!masks.in_plateau(i, j)) continue;

            for (int k = 0; k < 3; ++k) {
                const Probe& probe = probes.probes[k];
                const double u0p = probe.u0_plus.at(i, j), u0m = probe.u0_minus.at(i, j);
                const double g1p = probe.grad_plus.components[0].at(i, j);
                const double gnp = probe.grad_plus.components[1].at(i, j);
                const double g1m = probe.grad_minus.components[0].at(i, j);
                const double gnm = probe.grad_minus.components[1].at(i, j);
                // i v+ = a1 d1u0- + an dnu0- + p u0- + q+ u0+
                a.row(2 * k) << g1m, gnm, u0m, u0p, 0.0;
                // i v- = -a1 d1u0+ - an dnu0+ + p u0+ + q- u0-
                a.row(2 * k + 1) << -g1p, -gnp, u0p, 0.0, u0m;
                const cplx ivp = cplx(0.0, 1.0) * data.v0[k].u_plus.at(i, j);
                const cplx ivm = cplx(0.0, 1.0) * data.v0[k].u_minus.at(i, j);
                b[2 * k] = ivp.real();
                b[2 * k + 1] = ivm.real();
                residue.max_imag = std::max({residue.max_imag, std::abs(ivp.imag()),
                                             std::abs(ivm.imag())});
            }

            Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
            const double smax = svd.singularValues()[0];
            const double smin = svd.singularValues()[4];
            svd.setThreshold(1e-10);
            if (svd.rank() < 5)
                res.flagged.emplace_back(i, j); // x_n = 0 line: the a_n column degenerates
            else if (smax > 0.0)
                res.max_condition = std::max(res.max_condition, smax / smin);
            const Eigen::VectorXd x = svd.solve(b); // minimum-norm on flagged points

            res.delta.A.components[0].at(i, j) = x[0];
            res.delta.A.components[1].at(i, j) = x[1];
            res.delta.p.at(i, j) = x[2];
            res.delta.q_plus.at(i, j) = x[3];
            res.delta.q_minus.at(i, j) = x[4];
            for (int c = 0; c < 5; ++c)
                residue.max_real = std::max(residue.max_real, std::abs(x[c]));
        }

    res.max_imag_residue = residue.relative();
    return res;
}

namespace {

double masked_rel_l2(const WaveguideGrid& g, const ScalarField& estimate, const ScalarField& truth,
                     const std::vector<std::uint8_t>& mask, int nt) {
    double err = 0.0, ref = 0.0;
    for (int j = 0; j < g.axis_nodes; ++j)
        for (int i = 0; i < g.transverse_nodes(); ++i) {
            if (!mask[(size_t)j * nt + i]) continue;
            const double w = quad_weight(g, i, j);
            const double d = estimate.at(i, j) - truth.at(i, j);
            err += w * d * d;
            ref += w * truth.at(i, j) * truth.at(i, j);
        }
    if (ref == 0.0) return std::sqrt(err);
    return std::sqrt(err / ref);
}

} // namespace

void attach_truth_errors(const WaveguideGrid& g, ReconstructionResult& result,
                         const CoefficientSet& truth_delta, const Masks& masks) {
    result.has_truth = true;
    result.err_a1 =
        masked_rel_l2(g, result.delta.A.components[0], truth_delta.A.components[0], masks.plateau,
                      masks.nt);
    result.err_an =
        masked_rel_l2(g, result.delta.A.components[1], truth_delta.A.components[1], masks.annulus,
                      masks.nt);
    result.err_p = masked_rel_l2(g, result.delta.p, truth_delta.p, masks.plateau, masks.nt);
    result.err_q_plus =
        masked_rel_l2(g, result.delta.q_plus, truth_delta.q_plus, masks.plateau, masks.nt);
    result.err_q_minus =
        masked_rel_l2(g, result.delta.q_minus, truth_delta.q_minus, masks.plateau, masks.nt);
}

} // namespace spinwg
