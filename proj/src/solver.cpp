#include "spinwg/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

namespace spinwg {

namespace {

void check_field_shape(const WaveguideGrid& g, const ComplexField& f, const char* name) {
    if (f.nt != g.transverse_nodes() || f.na != g.axis_nodes)
        throw ContractError(std::string(name) + ": field shape does not match the grid");
}

// One-sided second-order outward normal derivative at a lateral boundary node.
template <class Access>
cplx normal_derivative(Access&& u, int node, double normal, int j, int nt, double h1) {
    if (node == 0) {
        const cplx d1 = (-3.0 * u(0, j) + 4.0 * u(1, j) - u(2, j)) / (2.0 * h1);
        return normal * d1;
    }
    const cplx d1 = (3.0 * u(nt - 1, j) - 4.0 * u(nt - 2, j) + u(nt - 3, j)) / (2.0 * h1);
    return normal * d1;
}

} // namespace

// ---------------------------------------------------------------------------
// HamiltonianOperator

HamiltonianOperator::HamiltonianOperator(const WaveguideGrid& g, const CoefficientSet& c) {
    const int nt = g.transverse_nodes(), na = g.axis_nodes;
    if (c.p.nt != nt || c.p.na != na)
        throw ContractError("HamiltonianOperator: coefficient shape does not match the grid");
    if (c.A.dimension() != 2)
        throw ContractError("HamiltonianOperator: expected a 2-component coupling field");

    nti_ = nt - 2;
    nai_ = na - 2;
    const int ni = interior_count();
    const double h1 = g.transverse_spacing(), hn = g.axial_spacing();
    const double ih1 = 1.0 / (h1 * h1), ihn = 1.0 / (hn * hn);
    const ScalarField& a1 = c.A.components[0];
    const ScalarField& an = c.A.components[1];

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve((size_t)ni * 18);

    for (int j = 1; j <= nai_; ++j)
        for (int i = 1; i <= nti_; ++i) {
            const int rp = index(i, j, 0);
            const int rm = index(i, j, 1);

            trip.emplace_back(rp, rp, 2.0 * ih1 + 2.0 * ihn + c.q_plus.at(i, j));
            trip.emplace_back(rm, rm, 2.0 * ih1 + 2.0 * ihn + c.q_minus.at(i, j));
            trip.emplace_back(rp, rm, c.p.at(i, j));
            trip.emplace_back(rm, rp, c.p.at(i, j));

            struct Neighbor {
                int di, dj;
                double lap;
                double skew; // signed coupling weight for the + row
            };
            const Neighbor nb[4] = {
                {-1, 0, ih1, -(a1.at(i, j) + a1.at(i - 1, j)) / (4.0 * h1)},
                {+1, 0, ih1, +(a1.at(i, j) + a1.at(i + 1, j)) / (4.0 * h1)},
                {0, -1, ihn, -(an.at(i, j) + an.at(i, j - 1)) / (4.0 * hn)},
                {0, +1, ihn, +(an.at(i, j) + an.at(i, j + 1)) / (4.0 * hn)},
            };
            for (const Neighbor& n : nb) {
                const int ii = i + n.di, jj = j + n.dj;
                if (ii < 1 || ii > nti_ || jj < 1 || jj > nai_) continue; // Dirichlet neighbor
                const int cp = index(ii, jj, 0);
                const int cm = index(ii, jj, 1);
                trip.emplace_back(rp, cp, -n.lap);
                trip.emplace_back(rm, cm, -n.lap);
                if (n.skew != 0.0) {
                    trip.emplace_back(rp, cm, n.skew);  // (S + P) block
                    trip.emplace_back(rm, cp, -n.skew); // (-S + P) block
                }
            }
        }

    h_.resize(2 * ni, 2 * ni);
    h_.setFromTriplets(trip.begin(), trip.end());
    h_.makeCompressed();
}

double HamiltonianOperator::symmetry_defect() const {
    Eigen::SparseMatrix<double> ht = h_.transpose();
    Eigen::SparseMatrix<double> d = h_ - ht;
    double worst = 0.0;
    for (int k = 0; k < d.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(d, k); it; ++it)
            worst = std::max(worst, std::abs(it.value()));
    return worst;
}

double HamiltonianOperator::inf_norm() const {
    std::vector<double> row_sums((size_t)h_.rows(), 0.0);
    for (int k = 0; k < h_.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(h_, k); it; ++it)
            row_sums[(size_t)it.row()] += std::abs(it.value());
    return *std::max_element(row_sums.begin(), row_sums.end());
}

// ---------------------------------------------------------------------------
// StateView

TwoStateField StateView::to_field() const {
    TwoStateField f(*g_);
    const int nt = g_->transverse_nodes(), na = g_->axis_nodes;
    for (int j = 0; j < na; ++j)
        for (int i = 0; i < nt; ++i) {
            f.u_plus.at(i, j) = u_plus(i, j);
            f.u_minus.at(i, j) = u_minus(i, j);
        }
    return f;
}

// ---------------------------------------------------------------------------
// ForwardSolver

ForwardSolver::ForwardSolver(const WaveguideGrid& g, const CoefficientSet& c, SolverOptions opts)
    : grid_(g), ham_(g, c), coeff_(c), opts_(opts) {
    dt_ = opts.dt_override > 0.0 ? opts.dt_override : g.dt();
    const double product = dt_ * ham_.inf_norm();
    if (product > opts.norm_warn_product)
        std::fprintf(stderr, "note: dt * |H|_inf = %g; high modes are unresolved\n", product);

    const int n = ham_.size();
    Eigen::SparseMatrix<cplx> h_c = ham_.matrix().cast<cplx>();
    Eigen::SparseMatrix<cplx> identity(n, n);
    identity.setIdentity();
    const cplx half_step(0.0, 0.5 * dt_);
    backward_matrix_ = identity + half_step * h_c;
    forward_matrix_ = identity - half_step * h_c;
    backward_matrix_.makeCompressed();
    forward_matrix_.makeCompressed();

    lu_ = std::make_unique<Eigen::SparseLU<Eigen::SparseMatrix<cplx>>>();
    lu_->compute(backward_matrix_);
    if (lu_->info() != Eigen::Success)
        throw SolverError("ForwardSolver: factorization of I + i dt/2 H failed");
}

ForwardSolver::~ForwardSolver() = default;

Eigen::VectorXcd ForwardSolver::interior_vector(const TwoStateField& u) const {
    check_field_shape(grid_, u.u_plus, "interior_vector: u_plus");
    check_field_shape(grid_, u.u_minus, "interior_vector: u_minus");
    Eigen::VectorXcd v(ham_.size());
    for (int j = 1; j <= ham_.interior_axial(); ++j)
        for (int i = 1; i <= ham_.interior_transverse(); ++i) {
            v[ham_.index(i, j, 0)] = u.u_plus.at(i, j);
            v[ham_.index(i, j, 1)] = u.u_minus.at(i, j);
        }
    return v;
}

void ForwardSolver::run_core(Eigen::VectorXcd state, int steps, const SourceFn* source,
                             const TwoStateField* lift, StepSink& sink) const {
    if (steps < 1) throw ContractError("ForwardSolver: need at least one step");
    sink.on_state(0, StateView(grid_, state, lift));

    const cplx i_dt(0.0, dt_);
    Eigen::VectorXcd rhs(state.size());
    for (int m = 0; m < steps; ++m) {
        rhs.noalias() = forward_matrix_ * state;
        if (source) {
            const TwoStateField f = (*source)((m + 0.5) * dt_);
            rhs += i_dt * interior_vector(f);
        }
        state = lu_->solve(rhs);
        if (lu_->info() != Eigen::Success) throw SolverError("ForwardSolver: linear solve failed");
        if (opts_.check_residual) {
            const double rhs_norm = rhs.norm();
            if (rhs_norm > 0.0) {
                const double rel = (backward_matrix_ * state - rhs).norm() / rhs_norm;
                if (rel > opts_.rel_residual)
                    throw SolverError("ForwardSolver: step residual " + std::to_string(rel) +
                                      " exceeds the contract " +
                                      std::to_string(opts_.rel_residual));
            }
        }
        sink.on_state(m + 1, StateView(grid_, state, lift));
    }
}

void ForwardSolver::run(const TwoStateField& u0, int steps, StepSink& sink) const {
    run_core(interior_vector(u0), steps, nullptr, nullptr, sink);
}

Trajectory ForwardSolver::run_trajectory(const TwoStateField& u0, int steps) const {
    TrajectorySink sink(grid_, steps, dt_);
    run(u0, steps, sink);
    return std::move(sink.trajectory());
}

void ForwardSolver::run_with_source(const TwoStateField& u0, int steps, const SourceFn& source,
                                    StepSink& sink) const {
    run_core(interior_vector(u0), steps, &source, nullptr, sink);
}

void ForwardSolver::run_lifted(const TwoStateField& u0, int steps, StepSink& sink) const {
    check_field_shape(grid_, u0.u_plus, "run_lifted: u0");
    // u = w + u0 with w(0) = 0, zero Dirichlet data and source -H u0, with H
    // applied by the full-grid stencil so the lift's boundary values enter.
    const int nt = grid_.transverse_nodes(), na = grid_.axis_nodes;
    const double h1 = grid_.transverse_spacing(), hn = grid_.axial_spacing();
    const double ih1 = 1.0 / (h1 * h1), ihn = 1.0 / (hn * hn);
    const ScalarField& a1 = coeff_.A.components[0];
    const ScalarField& an = coeff_.A.components[1];

    auto lap = [&](const ComplexField& f, int i, int j) {
        return (2.0 * ih1 + 2.0 * ihn) * f.at(i, j) - ih1 * (f.at(i - 1, j) + f.at(i + 1, j)) -
               ihn * (f.at(i, j - 1) + f.at(i, j + 1));
    };
    auto skew = [&](const ComplexField& f, int i, int j) {
        return (a1.at(i, j) + a1.at(i + 1, j)) / (4.0 * h1) * f.at(i + 1, j) -
               (a1.at(i, j) + a1.at(i - 1, j)) / (4.0 * h1) * f.at(i - 1, j) +
               (an.at(i, j) + an.at(i, j + 1)) / (4.0 * hn) * f.at(i, j + 1) -
               (an.at(i, j) + an.at(i, j - 1)) / (4.0 * hn) * f.at(i, j - 1);
    };

    TwoStateField source_field(grid_);
    for (int j = 1; j < na - 1; ++j)
        for (int i = 1; i < nt - 1; ++i) {
            source_field.u_plus.at(i, j) =
                -(lap(u0.u_plus, i, j) + coeff_.q_plus.at(i, j) * u0.u_plus.at(i, j) +
                  skew(u0.u_minus, i, j) + coeff_.p.at(i, j) * u0.u_minus.at(i, j));
            source_field.u_minus.at(i, j) =
                -(lap(u0.u_minus, i, j) + coeff_.q_minus.at(i, j) * u0.u_minus.at(i, j) -
                  skew(u0.u_plus, i, j) + coeff_.p.at(i, j) * u0.u_plus.at(i, j));
        }
    SourceFn src = [source_field](double) { return source_field; };
    Eigen::VectorXcd zero = Eigen::VectorXcd::Zero(ham_.size());
    run_core(std::move(zero), steps, &src, &u0, sink);
}

void ForwardSolver::step_back(Eigen::VectorXcd& state) const {
    // (I - i dt/2 H) u^m = (I + i dt/2 H) u^{m+1}; with H real the left matrix
    // is the conjugate of the factored one, so reuse the factorization.
    Eigen::VectorXcd rhs = backward_matrix_ * state;
    state = lu_->solve(rhs.conjugate()).conjugate();
    if (lu_->info() != Eigen::Success) throw SolverError("step_back: linear solve failed");
}

// ---------------------------------------------------------------------------
// Traces

namespace {

void fill_trace_row(const WaveguideGrid& g, NeumannTrace& trace, int m, const StateView& view) {
    const int nt = g.transverse_nodes();
    const double h1 = g.transverse_spacing();
    for (size_t b = 0; b < trace.boundary_nodes.size(); ++b) {
        const int node = trace.boundary_nodes[b];
        const double normal = trace.normals[b];
        for (int j = 0; j < g.axis_nodes; ++j) {
            trace.at(0, (int)b, m, j) = normal_derivative(
                [&](int i, int jj) { return view.u_plus(i, jj); }, node, normal, j, nt, h1);
            trace.at(1, (int)b, m, j) = normal_derivative(
                [&](int i, int jj) { return view.u_minus(i, jj); }, node, normal, j, nt, h1);
        }
    }
}

NeumannTrace make_trace_shell(const WaveguideGrid& g, const SubBoundary& gamma_star,
                              int time_nodes, double dt) {
    NeumannTrace trace;
    for (int node : gamma_star.nodes) {
        bool found = false;
        for (const BoundaryNode& b : g.cs.boundary)
            if (b.node == node) {
                trace.boundary_nodes.push_back(node);
                trace.normals.push_back(b.normal);
                found = true;
            }
        if (!found)
            throw ContractError("neumann_trace: node " + std::to_string(node) +
                                " is not on the grid boundary");
    }
    trace.na = g.axis_nodes;
    trace.time_nodes = time_nodes;
    trace.dt = dt;
    const size_t total = trace.boundary_nodes.size() * (size_t)time_nodes * g.axis_nodes;
    trace.plus.assign(total, cplx{});
    trace.minus.assign(total, cplx{});
    return trace;
}

} // namespace

NeumannTrace neumann_trace(const WaveguideGrid& g, const Trajectory& traj,
                           const SubBoundary& gamma_star) {
    NeumannTrace trace = make_trace_shell(g, gamma_star, (int)traj.snapshots.size(), traj.dt);
    const int nt = g.transverse_nodes();
    const double h1 = g.transverse_spacing();
    for (int m = 0; m < (int)traj.snapshots.size(); ++m) {
        const TwoStateField& f = traj.snapshots[m];
        for (size_t b = 0; b < trace.boundary_nodes.size(); ++b) {
            const int node = trace.boundary_nodes[b];
            const double normal = trace.normals[b];
            for (int j = 0; j < g.axis_nodes; ++j) {
                trace.at(0, (int)b, m, j) = normal_derivative(
                    [&](int i, int jj) { return f.u_plus.at(i, jj); }, node, normal, j, nt, h1);
                trace.at(1, (int)b, m, j) = normal_derivative(
                    [&](int i, int jj) { return f.u_minus.at(i, jj); }, node, normal, j, nt, h1);
            }
        }
    }
    return trace;
}

TraceSink::TraceSink(const WaveguideGrid& g, const SubBoundary& gamma_star, int steps, double dt)
    : g_(&g), trace_(make_trace_shell(g, gamma_star, steps + 1, dt)) {}

void TraceSink::on_state(int m, const StateView& view) { fill_trace_row(*g_, trace_, m, view); }

TrajectorySink::TrajectorySink(const WaveguideGrid& g, int steps, double dt) {
    traj_.dt = dt;
    traj_.nt = g.transverse_nodes();
    traj_.na = g.axis_nodes;
    traj_.snapshots.reserve((size_t)steps + 1);
}

void TrajectorySink::on_state(int, const StateView& view) {
    traj_.snapshots.push_back(view.to_field());
}

void NormSink::on_state(int, const StateView& view) {
    const int nt = g_->transverse_nodes(), na = g_->axis_nodes;
    const double cell = g_->transverse_spacing() * g_->axial_spacing();
    double acc = 0.0;
    for (int j = 1; j < na - 1; ++j)
        for (int i = 1; i < nt - 1; ++i)
            acc += std::norm(view.u_plus(i, j)) + std::norm(view.u_minus(i, j));
    norms_.push_back(std::sqrt(cell * acc));
}

double NormSink::max_relative_drift() const {
    if (norms_.empty() || norms_.front() == 0.0) return 0.0;
    double worst = 0.0;
    for (double n : norms_) worst = std::max(worst, std::abs(n - norms_.front()));
    return worst / norms_.front();
}

// ---------------------------------------------------------------------------
// Time derivative and conjugate extension

Trajectory time_derivative(const Trajectory& traj) {
    const int count = (int)traj.snapshots.size();
    if (count < 3) throw ContractError("time_derivative: need at least 3 snapshots");
    const double dt = traj.dt;
    Trajectory out;
    out.dt = dt;
    out.nt = traj.nt;
    out.na = traj.na;
    out.snapshots.resize(traj.snapshots.size(), TwoStateField(traj.nt, traj.na));

    auto each = [&](auto member) {
        for (int m = 0; m < count; ++m) {
            auto& dst = out.snapshots[m].*member;
            for (size_t n = 0; n < dst.v.size(); ++n) {
                if (m == 0)
                    dst.v[n] = (-3.0 * (traj.snapshots[0].*member).v[n] +
                                4.0 * (traj.snapshots[1].*member).v[n] -
                                (traj.snapshots[2].*member).v[n]) /
                               (2.0 * dt);
                else if (m == count - 1)
                    dst.v[n] = (3.0 * (traj.snapshots[m].*member).v[n] -
                                4.0 * (traj.snapshots[m - 1].*member).v[n] +
                                (traj.snapshots[m - 2].*member).v[n]) /
                               (2.0 * dt);
                else
                    dst.v[n] = ((traj.snapshots[m + 1].*member).v[n] -
                                (traj.snapshots[m - 1].*member).v[n]) /
                               (2.0 * dt);
            }
        }
    };
    each(&TwoStateField::u_plus);
    each(&TwoStateField::u_minus);
    return out;
}

NeumannTrace trace_time_derivative(const NeumannTrace& trace) {
    if (trace.time_nodes < 3) throw ContractError("trace_time_derivative: need 3 time nodes");
    NeumannTrace out = trace;
    const double dt = trace.dt;
    const int count = trace.time_nodes;
    for (int comp = 0; comp < 2; ++comp)
        for (size_t b = 0; b < trace.boundary_nodes.size(); ++b)
            for (int j = 0; j < trace.na; ++j)
                for (int m = 0; m < count; ++m) {
                    cplx val;
                    if (m == 0)
                        val = (-3.0 * trace.at(comp, (int)b, 0, j) +
                               4.0 * trace.at(comp, (int)b, 1, j) - trace.at(comp, (int)b, 2, j)) /
                              (2.0 * dt);
                    else if (m == count - 1)
                        val = (3.0 * trace.at(comp, (int)b, m, j) -
                               4.0 * trace.at(comp, (int)b, m - 1, j) +
                               trace.at(comp, (int)b, m - 2, j)) /
                              (2.0 * dt);
                    else
                        val = (trace.at(comp, (int)b, m + 1, j) -
                               trace.at(comp, (int)b, m - 1, j)) /
                              (2.0 * dt);
                    out.at(comp, (int)b, m, j) = val;
                }
    return out;
}

NeumannTrace trace_difference(const NeumannTrace& a, const NeumannTrace& b) {
    if (a.boundary_nodes != b.boundary_nodes || a.time_nodes != b.time_nodes || a.na != b.na)
        throw ContractError("trace_difference: shape mismatch");
    NeumannTrace out = a;
    for (size_t n = 0; n < out.plus.size(); ++n) {
        out.plus[n] -= b.plus[n];
        out.minus[n] -= b.minus[n];
    }
    return out;
}

namespace {

void parity_check(double max_real, double max_abs, double tol, const char* what) {
    if (max_real > tol * max_abs && max_abs > 0.0)
        throw ContractError(std::string(what) +
                            ": derivative-parity extension requires a purely imaginary t = 0 "
                            "slice; max |Re| = " +
                            std::to_string(max_real) + " vs scale " + std::to_string(max_abs));
}

} // namespace

Trajectory conjugate_extend(const Trajectory& traj, TimeParity parity, double parity_tolerance) {
    const int count = (int)traj.snapshots.size();
    if (count < 2) throw ContractError("conjugate_extend: need at least 2 snapshots");
    if (parity == TimeParity::derivative) {
        // Re f(., 0) must vanish relative to the scale of the whole series
        // (the t = 0 slice itself can be close to zero).
        double max_real = 0.0, max_abs = 0.0;
        for (const auto* f : {&traj.snapshots[0].u_plus, &traj.snapshots[0].u_minus})
            for (const cplx& z : f->v) max_real = std::max(max_real, std::abs(z.real()));
        for (const TwoStateField& s : traj.snapshots)
            for (const auto* f : {&s.u_plus, &s.u_minus})
                for (const cplx& z : f->v) max_abs = std::max(max_abs, std::abs(z));
        parity_check(max_real, max_abs, parity_tolerance, "conjugate_extend");
    }
    Trajectory out;
    out.dt = traj.dt;
    out.nt = traj.nt;
    out.na = traj.na;
    out.snapshots.resize((size_t)2 * count - 1, TwoStateField(traj.nt, traj.na));
    const double sign = (parity == TimeParity::state) ? 1.0 : -1.0;
    for (int m = 0; m < count; ++m) {
        out.snapshots[count - 1 + m] = traj.snapshots[m];
        if (m == 0) continue;
        auto& dst = out.snapshots[count - 1 - m];
        for (size_t n = 0; n < dst.u_plus.v.size(); ++n) {
            dst.u_plus.v[n] = sign * std::conj(traj.snapshots[m].u_plus.v[n]);
            dst.u_minus.v[n] = sign * std::conj(traj.snapshots[m].u_minus.v[n]);
        }
    }
    return out;
}

NeumannTrace conjugate_extend(const NeumannTrace& trace, TimeParity parity,
                              double parity_tolerance) {
    if (trace.extended) throw ContractError("conjugate_extend: trace already extended");
    if (trace.time_nodes < 2) throw ContractError("conjugate_extend: need at least 2 time nodes");
    if (parity == TimeParity::derivative) {
        double max_real = 0.0, max_abs = 0.0;
        for (int comp = 0; comp < 2; ++comp)
            for (size_t b = 0; b < trace.boundary_nodes.size(); ++b)
                for (int j = 0; j < trace.na; ++j)
                    max_real =
                        std::max(max_real, std::abs(trace.at(comp, (int)b, 0, j).real()));
        for (const auto* series : {&trace.plus, &trace.minus})
            for (const cplx& z : *series) max_abs = std::max(max_abs, std::abs(z));
        parity_check(max_real, max_abs, parity_tolerance, "conjugate_extend(trace)");
    }
    NeumannTrace out;
    out.boundary_nodes = trace.boundary_nodes;
    out.normals = trace.normals;
    out.na = trace.na;
    out.dt = trace.dt;
    out.time_nodes = 2 * trace.time_nodes - 1;
    out.extended = true;
    const size_t total = trace.boundary_nodes.size() * (size_t)out.time_nodes * trace.na;
    out.plus.assign(total, cplx{});
    out.minus.assign(total, cplx{});
    const double sign = (parity == TimeParity::state) ? 1.0 : -1.0;
    const int mid = trace.time_nodes - 1;
    for (int comp = 0; comp < 2; ++comp)
        for (size_t b = 0; b < trace.boundary_nodes.size(); ++b)
            for (int m = 0; m < trace.time_nodes; ++m)
                for (int j = 0; j < trace.na; ++j) {
                    const cplx z = trace.at(comp, (int)b, m, j);
                    out.at(comp, (int)b, mid + m, j) = z;
                    if (m > 0) out.at(comp, (int)b, mid - m, j) = sign * std::conj(z);
                }
    return out;
}

double sigma_star_norm_sq(const WaveguideGrid& g, const NeumannTrace& trace, int comp) {
    if (trace.extended)
        throw ContractError("sigma_star_norm_sq: expected a [0, T] trace, got an extended one");
    double acc = 0.0;
    for (size_t b = 0; b < trace.boundary_nodes.size(); ++b)
        for (int m = 0; m < trace.time_nodes; ++m) {
            const double wt = (m == 0 || m == trace.time_nodes - 1) ? 0.5 : 1.0;
            double row = 0.0;
            for (int j = 0; j < trace.na; ++j) {
                const double wj = (j == 0 || j == trace.na - 1) ? 0.5 : 1.0;
                row += wj * std::norm(trace.at(comp, (int)b, m, j));
            }
            acc += wt * row;
        }
    return acc * g.axial_spacing() * trace.dt;
}

// ---------------------------------------------------------------------------
// Manufactured solutions

MmsReport mms_run(const WaveguideGrid& g, const CoefficientSet& c,
                  const ManufacturedSolution& exact, MmsSourceMode mode, SolverOptions opts) {
    const int nt = g.transverse_nodes(), na = g.axis_nodes;
    const double dt = opts.dt_override > 0.0 ? opts.dt_override : g.dt();
    const int steps = (int)std::lround(g.horizon / dt);

    auto sample = [&](double t) {
        TwoStateField f(g);
        for (int j = 0; j < na; ++j)
            for (int i = 0; i < nt; ++i) {
                const double x1 = g.transverse_coord(i), xn = g.axial_coord(j);
                f.u_plus.at(i, j) = exact.u_plus(x1, xn, t);
                f.u_minus.at(i, j) = exact.u_minus(x1, xn, t);
            }
        return f;
    };

    // The candidate must vanish on the lateral boundary (the axial truncation
    // only has to be reached by a negligible tail).
    {
        const TwoStateField f0 = sample(0.0);
        double scale = 0.0, lateral = 0.0;
        for (const cplx& z : f0.u_plus.v) scale = std::max(scale, std::abs(z));
        for (const cplx& z : f0.u_minus.v) scale = std::max(scale, std::abs(z));
        for (int j = 0; j < na; ++j)
            for (int i : {0, nt - 1})
                lateral = std::max({lateral, std::abs(f0.u_plus.at(i, j)),
                                    std::abs(f0.u_minus.at(i, j))});
        if (lateral > 1e-10 * std::max(scale, 1e-300))
            throw ContractError("mms_run: candidate does not vanish on the lateral boundary");
    }

    ForwardSolver solver(g, c, [&] {
        SolverOptions o = opts;
        o.dt_override = dt;
        return o;
    }());

    SourceFn source;
    if (mode == MmsSourceMode::analytic_operator) {
        source = [&](double t) {
            TwoStateField f(g);
            for (int j = 1; j < na - 1; ++j)
                for (int i = 1; i < nt - 1; ++i) {
                    const double x1 = g.transverse_coord(i), xn = g.axial_coord(j);
                    const double a1 = c.A.components[0].at(i, j), an = c.A.components[1].at(i, j);
                    const cplx mi(0.0, -1.0);
                    f.u_plus.at(i, j) = mi * exact.dt_plus(x1, xn, t) - exact.lap_plus(x1, xn, t) +
                                        c.q_plus.at(i, j) * exact.u_plus(x1, xn, t) +
                                        a1 * exact.d1_minus(x1, xn, t) +
                                        an * exact.dn_minus(x1, xn, t) +
                                        c.p.at(i, j) * exact.u_minus(x1, xn, t);
                    f.u_minus.at(i, j) = mi * exact.dt_minus(x1, xn, t) -
                                         exact.lap_minus(x1, xn, t) +
                                         c.q_minus.at(i, j) * exact.u_minus(x1, xn, t) -
                                         a1 * exact.d1_plus(x1, xn, t) -
                                         an * exact.dn_plus(x1, xn, t) +
                                         c.p.at(i, j) * exact.u_plus(x1, xn, t);
                }
            return f;
        };
    } else {
        // f = -i du/dt + H_h u on grid samples; the semi-discrete system then
        // has the sampled candidate as its exact solution, so the measured
        // error is purely temporal.
        const auto* ham = &solver.hamiltonian();
        source = [&g, &exact, &solver, ham, nt, na](double t) {
            TwoStateField u(g);
            TwoStateField f(g);
            for (int j = 0; j < na; ++j)
                for (int i = 0; i < nt; ++i) {
                    const double x1 = g.transverse_coord(i), xn = g.axial_coord(j);
                    u.u_plus.at(i, j) = exact.u_plus(x1, xn, t);
                    u.u_minus.at(i, j) = exact.u_minus(x1, xn, t);
                }
            // Interior operator: boundary samples are dropped, matching the solve.
            Eigen::VectorXcd hu = ham->matrix().cast<cplx>() * solver.interior_vector(u);
            const cplx mi(0.0, -1.0);
            for (int j = 1; j < na - 1; ++j)
                for (int i = 1; i < nt - 1; ++i) {
                    const double x1 = g.transverse_coord(i), xn = g.axial_coord(j);
                    f.u_plus.at(i, j) = mi * exact.dt_plus(x1, xn, t) + hu[ham->index(i, j, 0)];
                    f.u_minus.at(i, j) = mi * exact.dt_minus(x1, xn, t) + hu[ham->index(i, j, 1)];
                }
            return f;
        };
    }

    struct ErrorSink : StepSink {
        const WaveguideGrid* g;
        std::function<TwoStateField(double)> sample;
        double dt;
        int steps;
        double err_acc = 0.0, ref_acc = 0.0, final_err = 0.0, final_ref = 0.0;

        void on_state(int m, const StateView& view) override {
            const TwoStateField ex = sample(m * dt);
            double e = 0.0, r = 0.0;
            for (int j = 1; j < g->axis_nodes - 1; ++j)
                for (int i = 1; i < g->transverse_nodes() - 1; ++i) {
                    const double w = quad_weight(*g, i, j);
                    e += w * (std::norm(view.u_plus(i, j) - ex.u_plus.at(i, j)) +
                              std::norm(view.u_minus(i, j) - ex.u_minus.at(i, j)));
                    r += w * (std::norm(ex.u_plus.at(i, j)) + std::norm(ex.u_minus.at(i, j)));
                }
            const double wt = (m == 0 || m == steps) ? 0.5 : 1.0;
            err_acc += wt * dt * e;
            ref_acc += wt * dt * r;
            if (m == steps) {
                final_err = e;
                final_ref = r;
            }
        }
    } sink;
    sink.g = &g;
    sink.sample = sample;
    sink.dt = dt;
    sink.steps = steps;

    solver.run_with_source(sample(0.0), steps, source, sink);

    MmsReport rep;
    rep.steps = steps;
    rep.transverse_nodes = nt;
    rep.axial_nodes = na;
    rep.l2_space_time_error = std::sqrt(sink.err_acc / std::max(sink.ref_acc, 1e-300));
    rep.final_time_error = std::sqrt(sink.final_err / std::max(sink.final_ref, 1e-300));
    return rep;
}

} // namespace spinwg
