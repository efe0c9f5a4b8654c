#ifndef SPINWG_MMS_CASES_HPP
#define SPINWG_MMS_CASES_HPP

#include "spinwg/solver.hpp"

#include <vector>

namespace spinwg {

/// Smooth two-component candidate with closed-form derivatives: sine profiles
/// across the section, Gaussian decay along the axis.
ManufacturedSolution standard_candidate(double extent);

/// Smooth bounded coefficients with a stream-function coupling vector,
/// sampled from fixed analytic formulas (ladder grids see the same fields).
CoefficientSet smooth_test_coefficients(const WaveguideGrid& g);

struct MmsLadder {
    std::vector<MmsReport> levels;
    std::vector<double> orders; ///< log2 of consecutive error ratios

    double min_order() const;
    double max_order() const;
};

/// Halves dt on a fixed grid; the discrete-operator source isolates the
/// temporal error.
MmsLadder mms_temporal_ladder(int transverse_nodes, int axial_nodes, double half_length,
                              double horizon, int base_steps, int levels,
                              SolverOptions opts = {});

/// Halves h at a small fixed dt with the analytic-operator source.
MmsLadder mms_spatial_ladder(int base_transverse, int base_axial, double half_length,
                             double horizon, int fine_steps, int levels, SolverOptions opts = {});

} // namespace spinwg

#endif
