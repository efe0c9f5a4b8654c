#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "spinwg/mms_cases.hpp"
#include "spinwg/probes.hpp"
#include "spinwg/solver.hpp"

#include <Eigen/SparseLU>

#include <cmath>

using namespace spinwg;

namespace {

WaveguideGrid debug_grid() {
    return build_grid(build_cross_section(1.0, 17), 4.0, 33, 1.0, 32);
}

CutoffSpec debug_cutoff() {
    CutoffSpec c;
    c.transverse_margin = 0.15;
    c.transverse_rise = 0.2;
    c.axial_plateau = 2.0;
    c.axial_rise = 1.0;
    return c;
}

CoefficientSet stream_coefficients(const WaveguideGrid& g) {
    ScalarField psi(g);
    for (int j = 0; j < g.axis_nodes; ++j)
        for (int i = 0; i < g.transverse_nodes(); ++i)
            psi.at(i, j) = 0.2 * std::sin(M_PI * g.transverse_coord(i)) *
                           std::exp(-g.axial_coord(j) * g.axial_coord(j));
    CoefficientSet c(g);
    c.A = stream_function_field(psi, g);
    for (int j = 0; j < g.axis_nodes; ++j)
        for (int i = 0; i < g.transverse_nodes(); ++i) {
            c.p.at(i, j) = 0.1 * std::cos(M_PI * g.transverse_coord(i));
            c.q_plus.at(i, j) = 0.05;
            c.q_minus.at(i, j) = -0.05;
        }
    return c;
}

TwoStateField smooth_state(const WaveguideGrid& g) {
    TwoStateField u(g);
    for (int j = 1; j < g.axis_nodes - 1; ++j)
        for (int i = 1; i < g.transverse_nodes() - 1; ++i) {
            const double x1 = g.transverse_coord(i), xn = g.axial_coord(j);
            u.u_plus.at(i, j) = std::sin(M_PI * x1) * std::exp(-xn * xn);
            u.u_minus.at(i, j) = std::sin(2.0 * M_PI * x1) * xn * std::exp(-xn * xn);
        }
    return u;
}

} // namespace

TEST_CASE("hamiltonian: zero coupling is block diagonal with the box Laplacian") {
    const WaveguideGrid g = debug_grid();
    const CoefficientSet c(g);
    const HamiltonianOperator ham(g, c);
    const int ni = ham.interior_count();

    // no entries couple the two components
    const auto& h = ham.matrix();
    for (int k = 0; k < h.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(h, k); it; ++it) {
            const bool row_plus = it.row() < ni, col_plus = it.col() < ni;
            if (row_plus != col_plus) CHECK(it.value() == 0.0);
        }

    // lowest eigenvalue approaches pi^2 (1/l^2 + 1/(2X)^2); inverse iteration oracle
    auto lowest_eigenvalue = [](const WaveguideGrid& gg) {
        const HamiltonianOperator hh(gg, CoefficientSet(gg));
        Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
        lu.compute(hh.matrix());
        REQUIRE(lu.info() == Eigen::Success);
        Eigen::VectorXd v = Eigen::VectorXd::Ones(hh.size());
        double lambda = 0.0;
        for (int it = 0; it < 60; ++it) {
            v = lu.solve(v);
            v /= v.norm();
            lambda = v.dot(hh.matrix() * v);
        }
        return lambda;
    };
    const double exact = M_PI * M_PI * (1.0 + 1.0 / 64.0); // l = 1, X = 4
    const double coarse = std::abs(lowest_eigenvalue(debug_grid()) - exact);
    const WaveguideGrid fine_grid = build_grid(build_cross_section(1.0, 33), 4.0, 65, 1.0, 32);
    const double fine = std::abs(lowest_eigenvalue(fine_grid) - exact);
    CHECK(coarse / fine > 3.0);
    CHECK(coarse / fine < 5.0);
}

TEST_CASE("hamiltonian: multiplication coupling and exact symmetry") {
    const WaveguideGrid g = debug_grid();
    CoefficientSet c = stream_coefficients(g);
    const HamiltonianOperator ham(g, c);
    CHECK(ham.symmetry_defect() <= 1e-12);

    // p-only coupling: the off-diagonal block is the multiplication by p
    CoefficientSet cp(g);
    for (int j = 0; j < g.axis_nodes; ++j)
        for (int i = 0; i < g.transverse_nodes(); ++i)
            cp.p.at(i, j) = 0.3 + 0.1 * g.transverse_coord(i);
    const HamiltonianOperator hp(g, cp);
    CHECK(hp.symmetry_defect() <= 1e-14);
    const int ni = hp.interior_count();
    const auto& h = hp.matrix();
    for (int k = 0; k < h.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(h, k); it; ++it) {
            const bool row_plus = it.row() < ni, col_plus = it.col() < ni;
            if (row_plus != col_plus) {
                CHECK(it.row() % ni == it.col() % ni); // diagonal of the block
                CHECK(it.value() > 0.29);              // the p values
            }
        }
}

TEST_CASE("forward solve: zeros, block decoupling, unitarity") {
    const WaveguideGrid g = debug_grid();
    const CoefficientSet zero(g);
    const ForwardSolver solver(g, zero);

    const Trajectory z = solver.run_trajectory(TwoStateField(g), 8);
    for (const TwoStateField& f : z.snapshots)
        for (const cplx& v : f.u_plus.v) CHECK(v == cplx{});

    TwoStateField u0 = smooth_state(g);
    for (cplx& v : u0.u_minus.v) v = 0.0;
    const Trajectory t = solver.run_trajectory(u0, 8);
    for (const TwoStateField& f : t.snapshots)
        for (const cplx& v : f.u_minus.v) CHECK(std::abs(v) == 0.0);

    const CoefficientSet c = stream_coefficients(g);
    const ForwardSolver coupled(g, c);
    NormSink norms(g);
    coupled.run(smooth_state(g), g.steps, norms);
    CHECK(norms.max_relative_drift() <= 1e-10);
}

TEST_CASE("forward solve: exact eigenmode propagation of the Crank-Nicolson map") {
    const WaveguideGrid g = debug_grid();
    const CoefficientSet zero(g);
    const ForwardSolver solver(g, zero);
    const int nt = g.transverse_nodes(), na = g.axis_nodes;
    const double h1 = g.transverse_spacing(), hn = g.axial_spacing();

    // discrete Dirichlet eigenmode of the 5-point Laplacian
    const int k = 2, l = 3;
    TwoStateField u0(g);
    for (int j = 1; j < na - 1; ++j)
        for (int i = 1; i < nt - 1; ++i)
            u0.u_plus.at(i, j) = std::sin(k * M_PI * i / (nt - 1.0)) *
                                 std::sin(l * M_PI * j / (na - 1.0));
    const double lambda =
        4.0 / (h1 * h1) * std::pow(std::sin(k * M_PI / (2.0 * (nt - 1))), 2) +
        4.0 / (hn * hn) * std::pow(std::sin(l * M_PI / (2.0 * (na - 1))), 2);

    const int steps = 16;
    const Trajectory traj = solver.run_trajectory(u0, steps);
    const cplx tau(0.0, 0.5 * solver.dt());
    const cplx rho = (1.0 - tau * lambda) / (1.0 + tau * lambda);
    cplx factor = 1.0;
    for (int m = 0; m <= steps; ++m) {
        double worst = 0.0;
        for (int j = 1; j < na - 1; ++j)
            for (int i = 1; i < nt - 1; ++i)
                worst = std::max(worst, std::abs(traj.snapshots[m].u_plus.at(i, j) -
                                                 factor * u0.u_plus.at(i, j)));
        CHECK(worst <= 1e-12);
        factor *= rho;
    }
}

TEST_CASE("forward solve: reversibility") {
    const WaveguideGrid g = debug_grid();
    const CoefficientSet c = stream_coefficients(g);
    const ForwardSolver solver(g, c);
    const TwoStateField u0 = smooth_state(g);
    const Eigen::VectorXcd start = solver.interior_vector(u0);

    TrajectorySink sink(g, 10, solver.dt());
    solver.run(u0, 10, sink);
    Eigen::VectorXcd state = solver.interior_vector(sink.trajectory().snapshots.back());
    for (int m = 0; m < 10; ++m) solver.step_back(state);
    CHECK((state - start).norm() / start.norm() <= 1e-9);
}

TEST_CASE("forward solve: residual contract is enforced") {
    const WaveguideGrid g = debug_grid();
    SolverOptions opts;
    opts.rel_residual = 1e-30; // unattainable
    const ForwardSolver solver(g, CoefficientSet(g), opts);
    NormSink sink(g);
    CHECK_THROWS_AS(solver.run(smooth_state(g), 2, sink), SolverError);
}

TEST_CASE("mms: temporal and spatial convergence orders") {
    SolverOptions opts;
    const MmsLadder temporal = mms_temporal_ladder(17, 33, 4.0, 1.0, 8, 3, opts);
    REQUIRE(temporal.levels.size() == 3);
    CHECK(temporal.levels[0].l2_space_time_error > temporal.levels[2].l2_space_time_error);
    for (double order : temporal.orders) {
        CHECK(order > 1.7);
        CHECK(order < 2.3);
    }

    const MmsLadder spatial = mms_spatial_ladder(9, 17, 4.0, 1.0, 256, 3, opts);
    for (double order : spatial.orders) {
        CHECK(order > 1.7);
        CHECK(order < 2.3);
    }
}

TEST_CASE("mms: lateral boundary violation is rejected") {
    const WaveguideGrid g = debug_grid();
    ManufacturedSolution bad = standard_candidate(1.0);
    bad.u_plus = [](double, double, double) { return cplx{1.0, 0.0}; }; // nonzero on gamma
    CHECK_THROWS_AS(mms_run(g, CoefficientSet(g), bad, MmsSourceMode::analytic_operator),
                    ContractError);
}

TEST_CASE("neumann trace: analytic profile, zeros, linearity") {
    const WaveguideGrid g = build_grid(build_cross_section(1.0, 129), 4.0, 65, 1.0, 16);
    Trajectory traj;
    traj.dt = g.dt();
    traj.nt = g.transverse_nodes();
    traj.na = g.axis_nodes;
    TwoStateField f(g);
    for (int j = 0; j < g.axis_nodes; ++j)
        for (int i = 0; i < g.transverse_nodes(); ++i)
            f.u_plus.at(i, j) = std::sin(M_PI * g.transverse_coord(i)) *
                                std::exp(-std::abs(g.axial_coord(j)));
    traj.snapshots = {f, f, f};

    const SubBoundary right{{g.transverse_nodes() - 1}};
    const NeumannTrace trace = neumann_trace(g, traj, right);
    // d_nu sin(pi x) at x = 1 is -pi (outward derivative)
    for (int j = 0; j < g.axis_nodes; ++j) {
        const double expected = -M_PI * std::exp(-std::abs(g.axial_coord(j)));
        CHECK(trace.at(0, 0, 1, j).real() == doctest::Approx(expected).epsilon(2e-4));
        CHECK(trace.at(1, 0, 1, j) == cplx{});
    }

    Trajectory zero = traj;
    for (auto& s : zero.snapshots) {
        s.u_plus = ComplexField(g);
        s.u_minus = ComplexField(g);
    }
    const NeumannTrace zt = neumann_trace(g, zero, right);
    for (const cplx& v : zt.plus) CHECK(v == cplx{});
    const NeumannTrace diff = trace_difference(trace, zt);
    for (size_t n = 0; n < diff.plus.size(); ++n) CHECK(diff.plus[n] == trace.plus[n]);

    SubBoundary bogus{{7}};
    CHECK_THROWS_AS(neumann_trace(g, traj, bogus), ContractError);
}

TEST_CASE("time derivative: exactness classes and the analytic phase") {
    const WaveguideGrid g = debug_grid();
    const TwoStateField base = smooth_state(g);

    auto make_traj = [&](auto value_at) {
        Trajectory traj;
        traj.dt = 0.05;
        traj.nt = g.transverse_nodes();
        traj.na = g.axis_nodes;
        for (int m = 0; m <= 8; ++m) {
            TwoStateField f(g);
            const cplx scale = value_at(m * 0.05);
            for (size_t n = 0; n < f.u_plus.v.size(); ++n) {
                f.u_plus.v[n] = scale * base.u_plus.v[n];
                f.u_minus.v[n] = scale * base.u_minus.v[n];
            }
            traj.snapshots.push_back(std::move(f));
        }
        return traj;
    };

    // constant in time -> exactly zero derivative
    const Trajectory c = time_derivative(make_traj([](double) { return cplx{2.0, 1.0}; }));
    for (const auto& s : c.snapshots)
        for (const cplx& v : s.u_plus.v) CHECK(std::abs(v) <= 1e-13);

    // linear in time -> exact (stencils are exact on degree <= 2)
    const Trajectory lin = time_derivative(make_traj([](double t) { return cplx{3.0 * t, 0.0}; }));
    for (const auto& s : lin.snapshots)
        for (size_t n = 0; n < s.u_plus.v.size(); ++n)
            CHECK(std::abs(s.u_plus.v[n] - 3.0 * base.u_plus.v[n]) <= 1e-12);

    // e^{it}: derivative = i u + O(dt^2)
    const Trajectory osc = make_traj([](double t) { return std::polar(1.0, t); });
    const Trajectory dosc = time_derivative(osc);
    double worst = 0.0;
    for (size_t m = 0; m < dosc.snapshots.size(); ++m)
        for (size_t n = 0; n < base.u_plus.v.size(); ++n)
            worst = std::max(worst,
                             std::abs(dosc.snapshots[m].u_plus.v[n] -
                                      cplx(0.0, 1.0) * osc.snapshots[m].u_plus.v[n]));
    CHECK(worst < 3e-3); // dt^2 scale

    Trajectory two;
    two.dt = 0.1;
    two.nt = g.transverse_nodes();
    two.na = g.axis_nodes;
    two.snapshots = {base, base};
    CHECK_THROWS_AS(time_derivative(two), ContractError);
}

TEST_CASE("conjugate extension: parities, shared t = 0 sample, violation check") {
    const WaveguideGrid g = debug_grid();
    TwoStateField real_field(g);
    for (int j = 1; j < g.axis_nodes - 1; ++j)
        for (int i = 1; i < g.transverse_nodes() - 1; ++i)
            real_field.u_plus.at(i, j) = std::sin(M_PI * g.transverse_coord(i));

    auto sampled = [&](auto phase) {
        Trajectory traj;
        traj.dt = 0.1;
        traj.nt = g.transverse_nodes();
        traj.na = g.axis_nodes;
        for (int m = 0; m <= 4; ++m) {
            TwoStateField f(g);
            const cplx scale = phase(0.1 * m);
            for (size_t n = 0; n < f.u_plus.v.size(); ++n)
                f.u_plus.v[n] = scale * real_field.u_plus.v[n];
            traj.snapshots.push_back(std::move(f));
        }
        return traj;
    };

    // state parity on e^{it} (real spatial factor): extension stays e^{it}
    const Trajectory ext =
        conjugate_extend(sampled([](double t) { return std::polar(1.0, t); }), TimeParity::state);
    REQUIRE(ext.snapshots.size() == 9);
    for (int m = 0; m < 9; ++m) {
        const double t = 0.1 * (m - 4);
        const cplx expected = std::polar(1.0, t);
        for (size_t n = 0; n < real_field.u_plus.v.size(); ++n)
            CHECK(std::abs(ext.snapshots[m].u_plus.v[n] -
                           expected * real_field.u_plus.v[n]) <= 1e-14);
    }

    // derivative parity on i cos(t): purely imaginary even extension
    const Trajectory dext = conjugate_extend(
        sampled([](double t) { return cplx(0.0, std::cos(t)); }), TimeParity::derivative);
    for (int m = 0; m < 9; ++m) {
        const double t = 0.1 * (m - 4);
        for (size_t n = 0; n < real_field.u_plus.v.size(); ++n)
            CHECK(std::abs(dext.snapshots[m].u_plus.v[n] -
                           cplx(0.0, std::cos(t)) * real_field.u_plus.v[n]) <= 1e-14);
    }

    // derivative parity with a real t = 0 slice must throw
    CHECK_THROWS_AS(conjugate_extend(sampled([](double t) { return cplx(std::cos(t), 0.0); }),
                                     TimeParity::derivative),
                    ContractError);
}

TEST_CASE("pipeline: derivative trace of a solution difference extends cleanly") {
    const WaveguideGrid g = debug_grid();
    const ProbeSet probes = make_probe_set(g, 0.5, debug_cutoff());

    AdmissibleClassParams params;
    params.agreement_radius = 0.75;
    const CoefficientSet c1 =
        make_perturbation(g, params, probes.plateau(g), 0.05, 3, PerturbationFamily::mixed);
    const CoefficientSet c2(g);

    const SubBoundary gs{{g.transverse_nodes() - 1}};
    const ForwardSolver s1(g, c1), s2(g, c2);
    TraceSink t1(g, gs, g.steps, s1.dt()), t2(g, gs, g.steps, s2.dt());
    s1.run(probes.probes[0].initial_state(), g.steps, t1);
    s2.run(probes.probes[0].initial_state(), g.steps, t2);
    const NeumannTrace ddt = trace_time_derivative(trace_difference(t1.trace(), t2.trace()));
    // dt = 1/32 here, so the one-sided stencil leaves an O(dt^3 |H|^3) real
    // residue at t = 0; production grids run dt = 1/512 where it is ~1e-5.
    const NeumannTrace ext = conjugate_extend(ddt, TimeParity::derivative, 0.08);
    CHECK(ext.extended);
    CHECK(ext.time_nodes == 2 * g.steps + 1);
    CHECK_THROWS_AS(conjugate_extend(ext, TimeParity::derivative), ContractError);
    CHECK_THROWS_AS(sigma_star_norm_sq(g, ext, 0), ContractError);
}

TEST_CASE("axial truncation: solutions converge as X grows") {
    const CutoffSpec cut = debug_cutoff();

    auto final_state = [&](double X, int na) {
        const WaveguideGrid g = build_grid(build_cross_section(1.0, 17), X, na, 0.5, 32);
        const ProbeSet probes = make_probe_set(g, 0.5, cut);
        const ForwardSolver solver(g, stream_coefficients(g));
        TrajectorySink sink(g, 32, solver.dt());
        solver.run(probes.probes[0].initial_state(), 32, sink);
        return std::make_pair(g, sink.trajectory().snapshots.back());
    };

    auto [g6, u6] = final_state(6.0, 49);
    auto [g8, u8] = final_state(8.0, 65);
    auto [g10, u10] = final_state(10.0, 81);

    // compare on the common region |x_n| <= 4 (axial spacing 0.25 in all three)
    auto diff_on_core = [&](const WaveguideGrid& ga, const TwoStateField& ua,
                            const WaveguideGrid& gb, const TwoStateField& ub) {
        double worst = 0.0;
        for (int j = 0; j < ga.axis_nodes; ++j) {
            const double xn = ga.axial_coord(j);
            if (std::abs(xn) > 4.0) continue;
            const int jb = (int)std::lround((xn + gb.half_length) / gb.axial_spacing());
            for (int i = 0; i < ga.transverse_nodes(); ++i)
                worst = std::max(worst, std::abs(ua.u_plus.at(i, j) - ub.u_plus.at(i, jb)));
        }
        return worst;
    };
    const double d6 = diff_on_core(g6, u6, g10, u10);
    const double d8 = diff_on_core(g8, u8, g10, u10);
    CHECK(d6 < 1e-5);
    CHECK(d8 < d6);
}

TEST_CASE("solution stays bounded under refinement (max-norm plateau)") {
    auto max_norm = [](int nt, int na, int steps) {
        const WaveguideGrid g = build_grid(build_cross_section(1.0, nt), 4.0, na, 0.5, steps);
        CutoffSpec cut;
        cut.transverse_margin = 0.15;
        cut.transverse_rise = 0.2;
        cut.axial_plateau = 2.0;
        cut.axial_rise = 1.0;
        const ProbeSet probes = make_probe_set(g, 0.5, cut);
        const ForwardSolver solver(g, stream_coefficients(g));
        struct MaxSink : StepSink {
            const WaveguideGrid* g;
            double worst = 0.0;
            void on_state(int, const StateView& v) override {
                for (int j = 1; j < g->axis_nodes - 1; ++j)
                    for (int i = 1; i < g->transverse_nodes() - 1; ++i)
                        worst = std::max({worst, std::abs(v.u_plus(i, j)),
                                          std::abs(v.u_minus(i, j))});
            }
        } sink;
        sink.g = &g;
        solver.run(probes.probes[0].initial_state(), steps, sink);
        return sink.worst;
    };
    const double coarse = max_norm(17, 33, 16);
    const double fine = max_norm(33, 65, 32);
    CHECK(coarse == doctest::Approx(fine).epsilon(0.1));
    CHECK(fine < 2.0); // data has max 1
}

TEST_CASE("lifted solve: static boundary data is reproduced at every step") {
    const WaveguideGrid g = debug_grid();
    const CoefficientSet zero(g);
    const ForwardSolver solver(g, zero);

    TwoStateField lift(g);
    for (int j = 0; j < g.axis_nodes; ++j)
        for (int i = 0; i < g.transverse_nodes(); ++i)
            lift.u_plus.at(i, j) = 1.0 + 0.5 * g.transverse_coord(i);
    TrajectorySink sink(g, 4, solver.dt());
    solver.run_lifted(lift, 4, sink);
    for (const TwoStateField& f : sink.trajectory().snapshots)
        for (int j = 0; j < g.axis_nodes; ++j) {
            CHECK(f.u_plus.at(0, j) == lift.u_plus.at(0, j));
            CHECK(f.u_plus.at(g.transverse_nodes() - 1, j) ==
                  lift.u_plus.at(g.transverse_nodes() - 1, j));
        }
}
