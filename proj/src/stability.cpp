#include "spinwg/stability.hpp"

#include "spinwg/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace spinwg {

double mu_functional(const WaveguideGrid& g, const NeumannTrace& extended_trace,
                     const WeightBundle& weights, int component) {
    if (!extended_trace.extended)
        throw ContractError("mu_functional: trace must be conjugate-extended to (-T, T)");
    const double span = extended_trace.dt * (extended_trace.time_nodes - 1);
    if (std::abs(span - 2.0 * weights.horizon) > 1e-9 * weights.horizon)
        throw ContractError("mu_functional: trace span does not match the weight horizon");
    return weighted_boundary_norm_sq(
        g, weights, extended_trace.boundary_nodes, extended_trace.time_nodes,
        [&](int b, int j, int m) { return extended_trace.at(component, b, m, j); });
}

PairTraces solve_pair_traces(const WaveguideGrid& g, const CoefficientSet& c1,
                             const CoefficientSet& c2, const ProbeSet& probes,
                             const SubBoundary& gamma_star, const SolverOptions& opts) {
    PairTraces out;
    for (int which = 0; which < 2; ++which) {
        const ForwardSolver solver(g, which == 0 ? c1 : c2, opts);
        for (const Probe& probe : probes.probes) {
            TraceSink sink(g, gamma_star, g.steps, solver.dt());
            if (probe.mode == BoundaryMode::homogeneous_cutoff)
                solver.run(probe.initial_state(), g.steps, sink);
            else
                solver.run_lifted(probe.initial_state(), g.steps, sink);
            (which == 0 ? out.first : out.second).push_back(std::move(sink.trace()));
        }
    }
    return out;
}

SeSides se_sides_from_traces(const WaveguideGrid& g, const CoefficientSet& c1,
                             const CoefficientSet& c2, const PairTraces& traces, double theta) {
    if (!(theta > 0.0 && theta < 0.5))
        throw ContractError("se_sides: theta must lie in (0, 1/2), got " + std::to_string(theta));
    SeSides sides;
    sides.lhs = theta_norm(g, c1, c2, Region::full());
    for (size_t k = 0; k < traces.first.size(); ++k) {
        const NeumannTrace diff = trace_difference(traces.first[k], traces.second[k]);
        const NeumannTrace ddt = trace_time_derivative(diff);
        for (int comp : {1, 0}) { // the minus component is listed first in the estimate
            const double norm = std::sqrt(sigma_star_norm_sq(g, ddt, comp));
            if (k < 3) sides.trace_norms[k][comp] = norm;
            sides.trace_norm_sum += norm;
            sides.rhs_raw += std::pow(norm, theta);
        }
    }
    return sides;
}

SeSides se_sides(const WaveguideGrid& g, const CoefficientSet& c1, const CoefficientSet& c2,
                 const ProbeSet& probes, const SubBoundary& gamma_star, double theta,
                 const SolverOptions& opts) {
    if (!(theta > 0.0 && theta < 0.5))
        throw ContractError("se_sides: theta must lie in (0, 1/2), got " + std::to_string(theta));
    const PairTraces traces = solve_pair_traces(g, c1, c2, probes, gamma_star, opts);
    return se_sides_from_traces(g, c1, c2, traces, theta);
}

namespace {

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double fa,
                        double fm, double fb, double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
    return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

double integrate(const std::function<double(double)>& f, double a, double b, double tol) {
    if (b <= a) return 0.0;
    const double m = 0.5 * (a + b);
    const double fa = f(a), fm = f(m), fb = f(b);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return adaptive_simpson(f, a, b, fa, fm, fb, whole, tol, 48);
}

} // namespace

double decay_tail_integral(double kappa, double rho, double y) {
    if (!(kappa > 0.0) || !(rho > 0.0))
        throw ContractError("decay_tail_integral: kappa and rho must be positive");
    if (!(y > 0.0)) throw ContractError("decay_tail_integral: y must be positive");
    auto f = [&](double x) {
        return std::exp(-2.0 * kappa * std::pow(japanese_bracket(x), rho));
    };
    // Upper cutoff where the integrand underflows.
    const double t = 745.0 / (2.0 * kappa);
    const double bracket = std::pow(t, 1.0 / rho);
    const double cutoff = bracket > 1.0 ? std::sqrt(bracket * bracket - 1.0) + 1.0 : y + 1.0;
    const double upper = std::max(y + 1.0, cutoff);
    const double one_side = integrate(f, y, upper, 1e-14 * std::max(f(y), 1e-300) * (upper - y));
    return 2.0 * one_side;
}

double decay_budget(const AdmissibleClassParams& params, double omega_measure, double y) {
    const double amps = params.amp_a * params.amp_a + params.amp_p * params.amp_p +
                        2.0 * params.amp_q * params.amp_q;
    return 4.0 * amps * omega_measure *
           decay_tail_integral(params.decay_rate, params.decay_power, y);
}

std::vector<B2Row> inequality_b2_diagnostic(const WaveguideGrid& g, const CoefficientSet& delta,
                                            const LinearizedInitialData& exact,
                                            const std::vector<NeumannTrace>& v_traces,
                                            const CrossSection& cs, const TransverseField& alpha,
                                            double r, const std::vector<double>& s_grid) {
    if (exact.v0.size() != v_traces.size())
        throw ContractError("inequality_b2_diagnostic: probe count mismatch");
    std::vector<B2Row> rows;
    for (double s : s_grid) {
        const WeightBundle w = build_weights(cs, alpha, r, g.horizon, s);
        // Weighted coefficient norms are shared across probes at fixed s.
        double coef = weighted_initial_norm_sq(g, delta.p, w) +
                      weighted_initial_norm_sq(g, delta.q_plus, w) +
                      weighted_initial_norm_sq(g, delta.q_minus, w);
        for (int d = 0; d < delta.A.dimension(); ++d)
            coef += weighted_initial_norm_sq(g, delta.A.components[d], w);
        for (size_t k = 0; k < exact.v0.size(); ++k) {
            B2Row row;
            row.probe = (int)k;
            row.s = s;
            row.lhs = weighted_initial_norm_sq(g, exact.v0[k].u_plus, w) +
                      weighted_initial_norm_sq(g, exact.v0[k].u_minus, w);
            const double mu_plus = mu_functional(g, v_traces[k], w, 0);
            const double mu_minus = mu_functional(g, v_traces[k], w, 1);
            row.rhs_content = coef + s * (mu_plus + mu_minus);
            if (row.lhs > 0.0 && row.rhs_content > 0.0) {
                row.ratio = row.lhs / (std::pow(s, -1.5) * row.rhs_content);
                row.defined = true;
            }
            rows.push_back(row);
        }
    }
    return rows;
}

const char* family_name(PerturbationFamily family) {
    return family == PerturbationFamily::p_only ? "p_only" : "mixed";
}

namespace {

// Least-squares slope of log(value) against log(amplitude).
double loglog_slope(const std::vector<std::pair<double, double>>& samples) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (const auto& [a, v] : samples) {
        if (a <= 0.0 || v <= 0.0) continue; // zero-amplitude rows are excluded from fits
        const double x = std::log(a), y = std::log(v);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++n;
    }
    if (n < 2) return 0.0;
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

} // namespace

StabilityReport run_stability_experiment(const StabilitySetup& setup) {
    const WaveguideGrid& g = setup.grid;
    if (!(setup.theta > 0.0 && setup.theta < 0.5))
        throw ContractError("run_stability_experiment: theta must lie in (0, 1/2)");
    for (double y : setup.y_list)
        if (y < setup.params.agreement_radius)
            throw ContractError("run_stability_experiment: y list entries must be >= y*");

    CoefficientSet background = setup.params.background;
    if (background.p.size() == 0) background = CoefficientSet(g);
    const PlateauBox plateau = setup.probes.plateau(g);
    const double omega_measure = g.cs.extent;
    const double exponent = 2.0 * (5.0 + setup.probes.epsilon) / 3.0;

    StabilityReport report;
    report.theta = setup.theta;
    report.epsilon = setup.probes.epsilon;
    report.s_grid = setup.s_grid;
    report.y_list = setup.y_list;
    report.amplitudes = setup.amplitudes;
    report.seeds = setup.seeds;

    struct Job {
        PerturbationFamily family;
        double amplitude;
        std::uint64_t seed;
        bool b2 = false;
    };
    std::vector<Job> jobs;
    const double largest = *std::max_element(setup.amplitudes.begin(), setup.amplitudes.end());
    for (PerturbationFamily family : setup.families)
        for (double amplitude : setup.amplitudes)
            for (std::uint64_t seed : setup.seeds)
                jobs.push_back({family, amplitude, seed,
                                setup.with_b2 && amplitude == largest && seed == setup.seeds[0]});

    std::vector<SweepPoint> points(jobs.size());
    std::vector<std::vector<B2Row>> b2_rows(jobs.size());

    run_parallel(setup.threads, (int)jobs.size(), [&](int idx) {
        const Job& job = jobs[idx];
        SweepPoint& pt = points[idx];
        pt.family = family_name(job.family);
        pt.amplitude = job.amplitude;
        pt.seed = job.seed;

        const CoefficientSet c1 = make_perturbation(g, setup.params, plateau, job.amplitude,
                                                    job.seed, job.family);
        const CoefficientSet& c2 = background;

        const PairTraces traces =
            solve_pair_traces(g, c1, c2, setup.probes, setup.gamma_star, setup.solver);
        const SeSides sides = se_sides_from_traces(g, c1, c2, traces, setup.theta);
        pt.theta_omega = sides.lhs;
        pt.rhs_raw = sides.rhs_raw;
        pt.trace_norm_sum = sides.trace_norm_sum;
        pt.trace_norms = sides.trace_norms;

        for (double y : setup.y_list) {
            pt.theta_inside.push_back(theta_norm(g, c1, c2, Region::inside(y)));
            pt.theta_outside.push_back(theta_norm(g, c1, c2, Region::outside(y)));
            pt.budget.push_back(decay_budget(setup.params, omega_measure, y));
        }

        // Weighted boundary functionals of the time-differentiated differences.
        std::vector<NeumannTrace> v_traces;
        for (size_t k = 0; k < traces.first.size(); ++k) {
            const NeumannTrace diff = trace_difference(traces.first[k], traces.second[k]);
            v_traces.push_back(conjugate_extend(trace_time_derivative(diff),
                                                TimeParity::derivative, setup.parity_tolerance));
        }
        for (double s : setup.s_grid) {
            const WeightBundle w = build_weights(setup.grid.cs, setup.alpha, setup.r, g.horizon, s);
            std::array<std::array<double, 2>, 3> mu_row{};
            double xi = 0.0;
            for (size_t k = 0; k < v_traces.size(); ++k)
                for (int comp = 0; comp < 2; ++comp) {
                    const double mu = mu_functional(g, v_traces[k], w, comp);
                    mu_row[k][comp] = mu;
                    xi += mu;
                }
            pt.mu.push_back(mu_row);
            pt.xi.push_back(xi);
        }

        // Diagnostic ratio of the Theta splitting inequality per (y, s).
        for (size_t yi = 0; yi < setup.y_list.size(); ++yi) {
            std::vector<double> row;
            for (size_t si = 0; si < setup.s_grid.size(); ++si) {
                const double bound = pt.theta_outside[yi] +
                                     std::pow(japanese_bracket(setup.y_list[yi]), exponent) *
                                         pt.xi[si];
                row.push_back(bound > 0.0 ? pt.theta_inside[yi] / bound : 0.0);
            }
            pt.e2_ratio.push_back(row);
        }

        if (job.b2) {
            CoefficientSet delta(g);
            for (int d = 0; d < 2; ++d)
                for (size_t n = 0; n < delta.A.components[d].v.size(); ++n)
                    delta.A.components[d].v[n] =
                        c1.A.components[d].v[n] - c2.A.components[d].v[n];
            for (size_t n = 0; n < delta.p.v.size(); ++n) {
                delta.p.v[n] = c1.p.v[n] - c2.p.v[n];
                delta.q_plus.v[n] = c1.q_plus.v[n] - c2.q_plus.v[n];
                delta.q_minus.v[n] = c1.q_minus.v[n] - c2.q_minus.v[n];
            }
            const LinearizedInitialData exact = exact_initial_v(g, delta, setup.probes);
            b2_rows[idx] = inequality_b2_diagnostic(g, delta, exact, v_traces, setup.grid.cs,
                                                    setup.alpha, setup.r, setup.s_grid);
        }
    });

    report.points = std::move(points);
    for (auto& rows : b2_rows)
        report.b2.insert(report.b2.end(), rows.begin(), rows.end());

    // Per-(theta, family) fits and fitted constants; slopes do not depend on
    // theta, the Holder ratio does.
    std::vector<double> thetas{setup.theta};
    for (double t : setup.theta_sweep)
        if (std::find(thetas.begin(), thetas.end(), t) == thetas.end()) thetas.push_back(t);

    for (double theta : thetas)
        for (PerturbationFamily family : setup.families) {
            FamilyFit fit;
            fit.theta = theta;
            fit.family = family_name(family);
            std::vector<std::pair<double, double>> lhs_samples, trace_samples;
            for (const SweepPoint& pt : report.points) {
                if (pt.family != fit.family) continue;
                lhs_samples.emplace_back(pt.amplitude, pt.theta_omega);
                trace_samples.emplace_back(pt.amplitude, pt.trace_norm_sum);
                double rhs = 0.0;
                for (int k = 0; k < 3; ++k)
                    for (int comp = 0; comp < 2; ++comp)
                        if (pt.trace_norms[k][comp] > 0.0)
                            rhs += std::pow(pt.trace_norms[k][comp], theta);
                if (rhs > 0.0) {
                    const double ratio = pt.theta_omega / rhs;
                    if (ratio > fit.c_hat) {
                        fit.c_hat = ratio;
                        fit.c_hat_amplitude = pt.amplitude;
                    }
                }
            }
            fit.lhs_slope = loglog_slope(lhs_samples);
            fit.trace_norm_slope = loglog_slope(trace_samples);
            fit.max_at_largest_amplitude = (fit.c_hat_amplitude == largest);
            report.fits.push_back(fit);
            if (theta == setup.theta && fit.c_hat > report.c_hat) {
                report.c_hat = fit.c_hat;
                report.c_hat_amplitude = fit.c_hat_amplitude;
            }
        }
    return report;
}

} // namespace spinwg
