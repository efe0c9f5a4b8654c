#include "spinwg/geometry.hpp"

#include "spinwg/errors.hpp"

#include <cmath>
#include <string>

namespace spinwg {

CrossSection build_cross_section(double extent, int nodes) {
    if (!(extent > 0.0))
        throw ConfigError("cross-section extent must be positive, got " + std::to_string(extent));
    if (nodes < 3)
        throw ConfigError("cross-section needs at least 3 nodes, got " + std::to_string(nodes));
    CrossSection cs;
    cs.dimension = 1;
    cs.extent = extent;
    cs.nodes = nodes;
    cs.boundary = {{0, -1.0}, {nodes - 1, +1.0}};
    return cs;
}

SubBoundary select_observation_boundary(const CrossSection& cs, double x0_prime) {
    if (x0_prime >= 0.0 && x0_prime <= cs.extent)
        throw ContractError("observation center x0' = " + std::to_string(x0_prime) +
                            " lies inside the closed cross-section [0, " +
                            std::to_string(cs.extent) + "]");
    SubBoundary sb;
    for (const BoundaryNode& b : cs.boundary) {
        const double x = cs.coord(b.node);
        if ((x - x0_prime) * b.normal >= 0.0) sb.nodes.push_back(b.node);
    }
    if (sb.nodes.empty())
        throw ContractError("observation boundary is empty");
    return sb;
}

WaveguideGrid build_grid(const CrossSection& cs, double half_length, int axis_nodes,
                         double horizon, int steps) {
    if (!(half_length > 0.0)) throw ConfigError("axis half-length must be positive");
    if (!(horizon > 0.0)) throw ConfigError("time horizon must be positive");
    if (axis_nodes < 3) throw ConfigError("need at least 3 axial nodes");
    if (steps < 3) throw ConfigError("need at least 3 time steps");
    if (axis_nodes % 2 == 0)
        throw ConfigError("axis_nodes must be odd so that x_n = 0 is a grid node, got " +
                          std::to_string(axis_nodes));
    WaveguideGrid g;
    g.cs = cs;
    g.half_length = half_length;
    g.axis_nodes = axis_nodes;
    g.horizon = horizon;
    g.steps = steps;
    return g;
}

} // namespace spinwg
