#ifndef SPINWG_INVERSION_HPP
#define SPINWG_INVERSION_HPP

#include "spinwg/coefficients.hpp"
#include "spinwg/fields.hpp"
#include "spinwg/probes.hpp"
#include "spinwg/solver.hpp"

#include <cstdint>
#include <vector>

namespace spinwg {

/// Initial time derivatives v^{+-,k}(., 0) of the solution difference, one
/// TwoStateField per probe (u_plus slot = v+, u_minus slot = v-). With real
/// coefficients and probes these fields are purely imaginary.
struct LinearizedInitialData {
    enum class Provenance { oracle, simulated };
    Provenance provenance = Provenance::oracle;
    std::vector<TwoStateField> v0; ///< per probe
};

/// Evaluates the t = 0 relations directly:
///   v+ = -i (dA . grad u0- + dq+ u0+ + dp u0-)
///   v- = -i (-dA . grad u0+ + dq- u0- + dp u0+)
/// with the probes' analytic gradients. `delta` holds the coefficient
/// difference in its (A, p, q+, q-) slots.
LinearizedInitialData exact_initial_v(const WaveguideGrid& g, const CoefficientSet& delta,
                                      const ProbeSet& probes);

/// Solves forward under both coefficient sets per probe and forms v(., 0)
/// by the one-sided stencil (4 du(dt) - du(2dt)) / (2 dt); only two
/// Crank-Nicolson steps per solve are needed.
LinearizedInitialData simulated_initial_v(const WaveguideGrid& g, const CoefficientSet& c1,
                                          const CoefficientSet& c2, const ProbeSet& probes,
                                          SolverOptions opts = {});

/// Node masks for the reconstruction: the cutoff plateau, and the axial
/// annulus y* <= |x_n| <= min(plateau, X_far) where the a_n formula is
/// well conditioned (w' bounded away from 0).
struct Masks {
    int nt = 0, na = 0;
    std::vector<std::uint8_t> plateau; ///< 1 inside the cutoff plateau
    std::vector<std::uint8_t> annulus; ///< 1 on the a_n annulus

    bool in_plateau(int i, int j) const { return plateau[(size_t)j * nt + i] != 0; }
    bool in_annulus(int i, int j) const { return annulus[(size_t)j * nt + i] != 0; }
};

/// w'-threshold factor fixing X_far: the annulus ends where |w'| falls below
/// `w_prime_floor` times its maximum over the grid.
Masks make_masks(const WaveguideGrid& g, const ProbeSet& probes, double agreement_radius,
                 double w_prime_floor = 1e-3);

struct ReconstructionResult {
    CoefficientSet delta; ///< estimated difference; zero outside the masks
    double max_imag_residue = 0.0; ///< max |Im| / max |Re| before truncation
    double max_condition = 0.0;    ///< least-squares path only
    std::vector<std::pair<int, int>> flagged; ///< rank-deficient points (x_n = 0 line)

    bool has_truth = false;
    double err_a1 = 0.0, err_an = 0.0, err_p = 0.0, err_q_plus = 0.0, err_q_minus = 0.0;
};

/// Closed-form pointwise inversion of the t = 0 relations on the plateau:
///   dq- = i v^{-,1}/w,  dq+ = i v^{+,2}/w,  dp = i (v^{+,1} + v^{-,2})/(2w),
///   da_n = i (v^{+,1} - v^{-,2})/(2w') on the annulus (0 inside |x_n| < y*),
///   da_k from the x_k probes, averaged over the two component formulas.
ReconstructionResult reconstruct_pointwise(const WaveguideGrid& g,
                                           const LinearizedInitialData& data,
                                           const ProbeSet& probes, const Masks& masks);

/// General pointwise solver: stacks the real parts of all t = 0 relations
/// into an overdetermined system per node and solves it in the least-squares
/// sense. Rank deficiency on the x_n = 0 line is flagged, not fatal.
ReconstructionResult reconstruct_least_squares(const WaveguideGrid& g,
                                               const LinearizedInitialData& data,
                                               const ProbeSet& probes, const Masks& masks);

/// Fills the per-component relative L2 errors against a known truth
/// (da_n over the annulus, everything else over the plateau).
void attach_truth_errors(const WaveguideGrid& g, ReconstructionResult& result,
                         const CoefficientSet& truth_delta, const Masks& masks);

} // namespace spinwg

#endif
