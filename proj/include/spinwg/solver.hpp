#ifndef SPINWG_SOLVER_HPP
#define SPINWG_SOLVER_HPP

#include "spinwg/coefficients.hpp"
#include "spinwg/fields.hpp"
#include "spinwg/geometry.hpp"

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <functional>
#include <memory>
#include <vector>

namespace spinwg {

/// Discrete Hamiltonian on the interior nodes with homogeneous Dirichlet
/// closure at gamma and at the axial truncation +-X. The Laplacian uses the
/// standard 5-point stencil; A . grad is discretized in skew form
/// (A . grad + grad . (A .)) / 2, which is exactly antisymmetric, so the
/// assembled block operator is symmetric for any A.
class HamiltonianOperator {
  public:
    HamiltonianOperator(const WaveguideGrid& g, const CoefficientSet& c);

    const Eigen::SparseMatrix<double>& matrix() const { return h_; }
    int interior_transverse() const { return nti_; }
    int interior_axial() const { return nai_; }
    int interior_count() const { return nti_ * nai_; }
    int size() const { return 2 * interior_count(); }

    int index(int i, int j, int component) const {
        return component * interior_count() + (j - 1) * nti_ + (i - 1);
    }

    /// max |H - H^T| over the sparsity pattern.
    double symmetry_defect() const;
    /// max absolute row sum.
    double inf_norm() const;

  private:
    Eigen::SparseMatrix<double> h_;
    int nti_ = 0, nai_ = 0;
};

/// Read access to one time level of a solve, full-grid indexed. Boundary
/// nodes return the Dirichlet data (zero, or the static lift).
class StateView {
  public:
    StateView(const WaveguideGrid& g, const Eigen::VectorXcd& interior, const TwoStateField* lift)
        : g_(&g), v_(&interior), lift_(lift) {}

    cplx u_plus(int i, int j) const { return component(0, i, j); }
    cplx u_minus(int i, int j) const { return component(1, i, j); }
    TwoStateField to_field() const;

  private:
    cplx component(int c, int i, int j) const {
        const int nt = g_->transverse_nodes(), na = g_->axis_nodes;
        cplx val = 0.0;
        if (i > 0 && i < nt - 1 && j > 0 && j < na - 1)
            val = (*v_)[c * (nt - 2) * (na - 2) + (j - 1) * (nt - 2) + (i - 1)];
        if (lift_) val += (c == 0 ? lift_->u_plus : lift_->u_minus).at(i, j);
        return val;
    }

    const WaveguideGrid* g_;
    const Eigen::VectorXcd* v_;
    const TwoStateField* lift_;
};

/// Per-step observer; m = 0 is the initial state.
struct StepSink {
    virtual void on_state(int m, const StateView& view) = 0;
    virtual ~StepSink() = default;
};

/// Complex samples of the outward normal derivative on Sigma* (one-sided
/// second-order stencil), per boundary node, axial node and time node.
struct NeumannTrace {
    static constexpr int stencil_order = 2;

    std::vector<int> boundary_nodes; ///< gamma* transverse node indices
    std::vector<double> normals;
    int na = 0;
    int time_nodes = 0;
    double dt = 0.0;
    bool extended = false; ///< covers (-T, T) instead of [0, T]

    std::vector<cplx> plus, minus; ///< layout [b][m][j]

    cplx& at(int comp, int b, int m, int j) {
        return (comp == 0 ? plus : minus)[((size_t)b * time_nodes + m) * na + j];
    }
    cplx at(int comp, int b, int m, int j) const {
        return (comp == 0 ? plus : minus)[((size_t)b * time_nodes + m) * na + j];
    }
};

struct SolverOptions {
    double rel_residual = 1e-10; ///< per-step solve contract
    bool check_residual = true;
    double dt_override = 0.0;    ///< 0: use grid.dt()
    double norm_warn_product = 1e3; ///< warn when dt * ||H||_inf exceeds this
};

/// Source term sampled at a midpoint time; returns interior-shaped fields.
using SourceFn = std::function<TwoStateField(double t_mid)>;

/// Crank-Nicolson stepper for -i du/dt + H u = f. The system matrix
/// I + i (dt/2) H is factored once per coefficient set and reused each step;
/// the scheme preserves the discrete L2 norm exactly for the homogeneous
/// problem since H is symmetric.
class ForwardSolver {
  public:
    ForwardSolver(const WaveguideGrid& g, const CoefficientSet& c, SolverOptions opts = {});
    ~ForwardSolver();

    /// Homogeneous boundary data; u0 must carry the Dirichlet trace (zero in
    /// cutoff mode) on gamma and near +-X.
    void run(const TwoStateField& u0, int steps, StepSink& sink) const;
    Trajectory run_trajectory(const TwoStateField& u0, int steps) const;

    /// Inhomogeneous variant: -i du/dt + H u = f with f sampled at midpoints.
    void run_with_source(const TwoStateField& u0, int steps, const SourceFn& source,
                         StepSink& sink) const;

    /// Nonzero static Dirichlet data by a lifted-source formulation: solves
    /// for u - u0 with source -H u0 and adds the lift back in the views.
    void run_lifted(const TwoStateField& u0, int steps, StepSink& sink) const;

    /// One reverse Crank-Nicolson step (the exact inverse of a forward step).
    void step_back(Eigen::VectorXcd& state) const;

    Eigen::VectorXcd interior_vector(const TwoStateField& u) const;
    const HamiltonianOperator& hamiltonian() const { return ham_; }
    const WaveguideGrid& grid() const { return grid_; }
    double dt() const { return dt_; }

  private:
    void run_core(Eigen::VectorXcd state, int steps, const SourceFn* source,
                  const TwoStateField* lift, StepSink& sink) const;

    WaveguideGrid grid_;
    HamiltonianOperator ham_;
    CoefficientSet coeff_;
    double dt_;
    SolverOptions opts_;
    Eigen::SparseMatrix<cplx> forward_matrix_;  // I - i dt/2 H
    Eigen::SparseMatrix<cplx> backward_matrix_; // I + i dt/2 H (factored)
    std::unique_ptr<Eigen::SparseLU<Eigen::SparseMatrix<cplx>>> lu_;
};

/// Neumann trace of every snapshot of a trajectory on gamma*.
NeumannTrace neumann_trace(const WaveguideGrid& g, const Trajectory& traj,
                           const SubBoundary& gamma_star);

/// Records the Neumann trace on the fly, without storing snapshots.
class TraceSink : public StepSink {
  public:
    TraceSink(const WaveguideGrid& g, const SubBoundary& gamma_star, int steps, double dt);
    void on_state(int m, const StateView& view) override;
    NeumannTrace& trace() { return trace_; }

  private:
    const WaveguideGrid* g_;
    NeumannTrace trace_;
};

/// Stores full snapshots (small runs only).
class TrajectorySink : public StepSink {
  public:
    TrajectorySink(const WaveguideGrid& g, int steps, double dt);
    void on_state(int m, const StateView& view) override;
    Trajectory& trajectory() { return traj_; }

  private:
    Trajectory traj_;
};

/// Keeps the first `keep` snapshots (linearized initial data only needs 3).
class LeadingSnapshotsSink : public StepSink {
  public:
    explicit LeadingSnapshotsSink(int keep) : keep_(keep) {}
    void on_state(int m, const StateView& view) override {
        if (m < keep_) fields_.push_back(view.to_field());
    }
    const std::vector<TwoStateField>& fields() const { return fields_; }

  private:
    int keep_;
    std::vector<TwoStateField> fields_;
};

/// Records the plain discrete L2 norm of every time level.
class NormSink : public StepSink {
  public:
    NormSink(const WaveguideGrid& g) : g_(&g) {}
    void on_state(int m, const StateView& view) override;
    const std::vector<double>& norms() const { return norms_; }
    double max_relative_drift() const;

  private:
    const WaveguideGrid* g_;
    std::vector<double> norms_;
};

/// Broadcast to several sinks.
class MultiSink : public StepSink {
  public:
    explicit MultiSink(std::vector<StepSink*> sinks) : sinks_(std::move(sinks)) {}
    void on_state(int m, const StateView& view) override {
        for (StepSink* s : sinks_) s->on_state(m, view);
    }

  private:
    std::vector<StepSink*> sinks_;
};

/// Second-order time derivative of a trajectory (centered inside, one-sided
/// at t = 0 and t = T).
Trajectory time_derivative(const Trajectory& traj);

/// Same stencils applied to a trace time series.
NeumannTrace trace_time_derivative(const NeumannTrace& trace);

NeumannTrace trace_difference(const NeumannTrace& a, const NeumannTrace& b);

enum class TimeParity {
    state,      ///< f(-t) = conj f(t)
    derivative, ///< f(-t) = -conj f(t); forces Re f(., 0) = 0
};

/// Extends an object from [0, T] to (-T, T). Derivative parity checks that
/// the t = 0 slice is purely imaginary within `parity_tolerance` (relative).
Trajectory conjugate_extend(const Trajectory& traj, TimeParity parity,
                            double parity_tolerance = 1e-3);
NeumannTrace conjugate_extend(const NeumannTrace& trace, TimeParity parity,
                              double parity_tolerance = 1e-3);

/// L2(Sigma*) norm of one trace component over gamma* x (-X, X) x [0, T].
double sigma_star_norm_sq(const WaveguideGrid& g, const NeumannTrace& trace, int comp);

// ---------------------------------------------------------------------------
// Method of manufactured solutions.

struct ManufacturedSolution {
    using Fn = std::function<cplx(double x1, double xn, double t)>;
    Fn u_plus, u_minus;
    Fn dt_plus, dt_minus;   ///< time derivatives
    Fn lap_plus, lap_minus; ///< Laplacians
    Fn d1_plus, dn_plus, d1_minus, dn_minus; ///< spatial gradients
};

enum class MmsSourceMode {
    analytic_operator, ///< f from the continuous operator; measures space + time error
    discrete_operator, ///< f from the assembled H on grid samples; isolates time error
};

struct MmsReport {
    double l2_space_time_error = 0.0; ///< relative L2(Q) error
    double final_time_error = 0.0;    ///< relative L2 error at t = T
    int steps = 0;
    int transverse_nodes = 0, axial_nodes = 0;
};

MmsReport mms_run(const WaveguideGrid& g, const CoefficientSet& c,
                  const ManufacturedSolution& exact, MmsSourceMode mode,
                  SolverOptions opts = {});

} // namespace spinwg

#endif
