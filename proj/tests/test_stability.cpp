#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "spinwg/stability.hpp"

#include <cmath>

using namespace spinwg;

namespace {

struct Lab {
    WaveguideGrid grid;
    ProbeSet probes;
    AdmissibleClassParams params;
    SubBoundary gamma_star;
    TransverseField alpha_scaled;
};

Lab make_lab(int nt = 17, int na = 33, int steps = 64) {
    Lab lab{build_grid(build_cross_section(1.0, nt), 4.0, na, 1.0, steps), {}, {}, {}, {}};
    CutoffSpec cut;
    cut.transverse_margin = 0.15;
    cut.transverse_rise = 0.2;
    cut.axial_plateau = 2.0;
    cut.axial_rise = 1.0;
    lab.probes = make_probe_set(lab.grid, 0.5, cut);
    lab.params.agreement_radius = 0.75;
    lab.gamma_star = select_observation_boundary(lab.grid.cs, -1.0);
    lab.alpha_scaled = quadratic_alpha(lab.grid.cs, -1.0);
    for (double& a : lab.alpha_scaled) a *= 0.005;
    return lab;
}

NeumannTrace synthetic_extended_trace(const Lab& lab, cplx fill, int time_nodes = 17) {
    NeumannTrace t;
    t.boundary_nodes = lab.gamma_star.nodes;
    t.normals = {1.0};
    t.na = lab.grid.axis_nodes;
    t.time_nodes = time_nodes;
    t.dt = 2.0 * lab.grid.horizon / (time_nodes - 1);
    t.extended = true;
    const size_t total = (size_t)time_nodes * t.na;
    t.plus.assign(total, fill);
    t.minus.assign(total, fill);
    return t;
}

} // namespace

TEST_CASE("mu functional: zeros, quadratic scaling, monotone decay in s") {
    const Lab lab = make_lab();
    auto mu_at = [&](double s, cplx fill) {
        const WeightBundle w =
            build_weights(lab.grid.cs, lab.alpha_scaled, 1.5, lab.grid.horizon, s);
        return mu_functional(lab.grid, synthetic_extended_trace(lab, fill), w, 0);
    };
    CHECK(mu_at(1.0, cplx{}) == 0.0);
    CHECK(mu_at(1.0, cplx{2.0, 0.0}) == doctest::Approx(4.0 * mu_at(1.0, cplx{1.0, 0.0})));
    CHECK(mu_at(2.0, cplx{1.0, 0.0}) < mu_at(1.0, cplx{1.0, 0.0}));
    CHECK(mu_at(4.0, cplx{1.0, 0.0}) < mu_at(2.0, cplx{1.0, 0.0}));

    // non-extended traces are a contract violation
    NeumannTrace half = synthetic_extended_trace(lab, cplx{1.0, 0.0});
    half.extended = false;
    const WeightBundle w = build_weights(lab.grid.cs, lab.alpha_scaled, 1.5, lab.grid.horizon, 1.0);
    CHECK_THROWS_AS(mu_functional(lab.grid, half, w, 0), ContractError);
}

TEST_CASE("decay budget: monotone tail, asymptotics, domination of generated pairs") {
    AdmissibleClassParams params;
    params.agreement_radius = 0.75;
    double previous = 1e300;
    for (double y : {1.0, 2.0, 4.0, 8.0}) {
        const double b = decay_budget(params, 1.0, y);
        CHECK(b > 0.0);
        CHECK(b < previous);
        previous = b;
    }

    // kappa = rho = 1, large y: integral ~ e^{-2 kappa <y>} / kappa (both tails)
    const double asym = std::exp(-2.0 * japanese_bracket(8.0));
    CHECK(decay_tail_integral(1.0, 1.0, 8.0) == doctest::Approx(asym).epsilon(0.05));

    const Lab lab = make_lab();
    const CoefficientSet background(lab.grid);
    for (std::uint64_t seed : {1ull, 5ull, 9ull})
        for (double amplitude : {0.01, 0.1}) {
            const CoefficientSet c1 =
                make_perturbation(lab.grid, lab.params, lab.probes.plateau(lab.grid), amplitude,
                                  seed, PerturbationFamily::mixed);
            for (double y : {1.0, 1.5}) {
                const double theta_out =
                    theta_norm(lab.grid, c1, background, Region::outside(y));
                CHECK(theta_out <= decay_budget(lab.params, lab.grid.cs.extent, y));
            }
        }
}

TEST_CASE("se sides: degenerate pair, theta range, boundary monotonicity") {
    const Lab lab = make_lab();
    const CoefficientSet background(lab.grid);

    CHECK_THROWS_AS(se_sides(lab.grid, background, background, lab.probes, lab.gamma_star, 0.6),
                    ContractError);
    CHECK_THROWS_AS(se_sides(lab.grid, background, background, lab.probes, lab.gamma_star, -0.1),
                    ContractError);

    const SeSides zero =
        se_sides(lab.grid, background, background, lab.probes, lab.gamma_star, 0.49);
    CHECK(zero.lhs == 0.0);
    CHECK(zero.rhs_raw <= 1e-12); // round-off traces only
    CHECK(zero.trace_norm_sum <= 1e-12);

    // enlarging gamma* never decreases the raw side
    const CoefficientSet c1 = make_perturbation(
        lab.grid, lab.params, lab.probes.plateau(lab.grid), 0.05, 3, PerturbationFamily::mixed);
    SubBoundary both;
    both.nodes = {0, lab.grid.transverse_nodes() - 1};
    const SeSides one = se_sides(lab.grid, c1, background, lab.probes, lab.gamma_star, 0.49);
    const SeSides two = se_sides(lab.grid, c1, background, lab.probes, both, 0.49);
    CHECK(two.rhs_raw >= one.rhs_raw);
    CHECK(one.rhs_raw > 0.0);
}

TEST_CASE("stability sweep: slopes, Holder constant, determinism") {
    Lab lab = make_lab(17, 33, 128);
    StabilitySetup setup;
    setup.grid = lab.grid;
    setup.params = lab.params;
    setup.probes = lab.probes;
    setup.gamma_star = lab.gamma_star;
    setup.alpha = lab.alpha_scaled;
    setup.s_grid = {1, 4, 16};
    setup.theta = 0.49;
    setup.theta_sweep = {0.25, 0.49};
    setup.amplitudes = {1e-3, 1e-2, 1e-1};
    setup.seeds = {1, 2};
    setup.y_list = {1.0, 1.5};
    setup.families = {PerturbationFamily::p_only, PerturbationFamily::mixed};
    setup.parity_tolerance = 0.2; // coarse dt leaves a visible one-sided residue
    setup.threads = 2;

    const StabilityReport rep = run_stability_experiment(setup);
    REQUIRE(rep.points.size() == 12);
    REQUIRE(rep.fits.size() == 4); // two thetas x two families

    for (const FamilyFit& fit : rep.fits) {
        CHECK(fit.lhs_slope == doctest::Approx(2.0).epsilon(0.06));
        CHECK(fit.trace_norm_slope == doctest::Approx(1.0).epsilon(0.08));
        CHECK(fit.c_hat > 0.0);
        CHECK(std::isfinite(fit.c_hat));
        CHECK(fit.max_at_largest_amplitude);
        CHECK(fit.c_hat_amplitude == 0.1);
    }
    CHECK(rep.c_hat > 0.0);

    // the Holder inequality holds across the sweep with the fitted constant
    for (const SweepPoint& pt : rep.points)
        CHECK(pt.theta_omega <= rep.c_hat * pt.rhs_raw * (1.0 + 1e-12));

    // mu decreases in s; xi aggregates mu
    for (const SweepPoint& pt : rep.points) {
        for (size_t si = 0; si + 1 < setup.s_grid.size(); ++si) {
            CHECK(pt.xi[si + 1] <= pt.xi[si]);
            double total = 0.0;
            for (int k = 0; k < 3; ++k)
                for (int comp = 0; comp < 2; ++comp) total += pt.mu[si][k][comp];
            CHECK(pt.xi[si] == doctest::Approx(total));
        }
        // theta splitting is consistent
        for (size_t yi = 0; yi < setup.y_list.size(); ++yi)
            CHECK(pt.theta_inside[yi] + pt.theta_outside[yi] ==
                  doctest::Approx(pt.theta_omega).epsilon(1e-12));
    }

    // shrinking the sweep never increases the fitted constant
    for (const FamilyFit& fit : rep.fits) {
        double sub_c_hat = 0.0;
        for (const SweepPoint& pt : rep.points) {
            if (pt.family != fit.family || pt.amplitude > 0.02) continue;
            double rhs = 0.0;
            for (int k = 0; k < 3; ++k)
                for (int comp = 0; comp < 2; ++comp)
                    if (pt.trace_norms[k][comp] > 0.0)
                        rhs += std::pow(pt.trace_norms[k][comp], fit.theta);
            if (rhs > 0.0) sub_c_hat = std::max(sub_c_hat, pt.theta_omega / rhs);
        }
        CHECK(sub_c_hat <= fit.c_hat);
    }

    // byte-level determinism of a repeated run
    const StabilityReport rep2 = run_stability_experiment(setup);
    REQUIRE(rep2.points.size() == rep.points.size());
    for (size_t n = 0; n < rep.points.size(); ++n) {
        CHECK(rep.points[n].theta_omega == rep2.points[n].theta_omega);
        CHECK(rep.points[n].rhs_raw == rep2.points[n].rhs_raw);
        CHECK(rep.points[n].xi == rep2.points[n].xi);
    }
}

TEST_CASE("b2 diagnostic: null rows for the zero pair, bounded ratios, scaling") {
    Lab lab = make_lab(17, 33, 256);
    const CoefficientSet background(lab.grid);
    const std::vector<double> s_grid{1, 2, 4, 8};

    // zero pair: all rows undefined
    {
        CoefficientSet zero(lab.grid);
        const LinearizedInitialData exact = exact_initial_v(lab.grid, zero, lab.probes);
        std::vector<NeumannTrace> traces;
        const PairTraces pair = solve_pair_traces(lab.grid, background, background, lab.probes,
                                                  lab.gamma_star, SolverOptions{});
        for (size_t k = 0; k < pair.first.size(); ++k)
            traces.push_back(conjugate_extend(
                trace_time_derivative(trace_difference(pair.first[k], pair.second[k])),
                TimeParity::derivative, 1e9));
        const auto rows = inequality_b2_diagnostic(lab.grid, zero, exact, traces, lab.grid.cs,
                                                   lab.alpha_scaled, 1.5, s_grid);
        for (const B2Row& r : rows) CHECK(!r.defined);
    }

    auto rows_for = [&](double amplitude) {
        const CoefficientSet c1 =
            make_perturbation(lab.grid, lab.params, lab.probes.plateau(lab.grid), amplitude, 7,
                              PerturbationFamily::mixed);
        const PairTraces pair =
            solve_pair_traces(lab.grid, c1, background, lab.probes, lab.gamma_star,
                              SolverOptions{});
        std::vector<NeumannTrace> traces;
        for (size_t k = 0; k < pair.first.size(); ++k)
            traces.push_back(conjugate_extend(
                trace_time_derivative(trace_difference(pair.first[k], pair.second[k])),
                TimeParity::derivative, 0.2));
        const LinearizedInitialData exact = exact_initial_v(lab.grid, c1, lab.probes);
        return inequality_b2_diagnostic(lab.grid, c1, exact, traces, lab.grid.cs,
                                        lab.alpha_scaled, 1.5, s_grid);
    };

    const auto rows = rows_for(1e-3);
    REQUIRE(rows.size() == s_grid.size() * 3);
    // per probe: ratio stays under a generous cap fitted at the smallest s
    for (int probe = 0; probe < 3; ++probe) {
        double first = 0.0;
        for (const B2Row& r : rows)
            if (r.probe == probe && r.s == s_grid.front()) first = r.ratio;
        CHECK(first > 0.0);
        for (const B2Row& r : rows)
            if (r.probe == probe) {
                CHECK(r.defined);
                CHECK(r.ratio <= 10.0 * first);
            }
    }

    // scaling the pair leaves the ratio nearly invariant (linearized regime)
    const auto doubled = rows_for(2e-3);
    for (size_t n = 0; n < rows.size(); ++n)
        CHECK(doubled[n].ratio == doctest::Approx(rows[n].ratio).epsilon(0.05));
}

TEST_CASE("sweep rejects y below the agreement radius and bad theta") {
    Lab lab = make_lab();
    StabilitySetup setup;
    setup.grid = lab.grid;
    setup.params = lab.params;
    setup.probes = lab.probes;
    setup.gamma_star = lab.gamma_star;
    setup.alpha = lab.alpha_scaled;
    setup.amplitudes = {1e-2};
    setup.seeds = {1};
    setup.y_list = {0.1}; // below y* = 0.75
    CHECK_THROWS_AS(run_stability_experiment(setup), ContractError);
    setup.y_list = {1.0};
    setup.theta = 0.7;
    CHECK_THROWS_AS(run_stability_experiment(setup), ContractError);
}
