#ifndef SPINWG_GEOMETRY_HPP
#define SPINWG_GEOMETRY_HPP

#include <cstddef>
#include <vector>

namespace spinwg {

/// One boundary node of the cross-section with its outward unit normal.
struct BoundaryNode {
    int node;      ///< node index into the transverse grid
    double normal; ///< outward unit normal (interval case: -1 or +1)
};

/// Uniform grid on the bounded cross-section omega.
///
/// The mandatory target is the interval (0, extent) in one transverse
/// dimension; the dimension field is the extension hook for rectangular
/// cross-sections.
struct CrossSection {
    int dimension = 1;              ///< number of transverse dimensions (n-1)
    double extent = 0.0;            ///< interval length
    int nodes = 0;                  ///< node count including endpoints
    std::vector<BoundaryNode> boundary; ///< gamma with outward normals

    double spacing() const { return extent / (nodes - 1); }
    double coord(int i) const { return i * spacing(); }
    bool is_boundary(int i) const { return i == 0 || i == nodes - 1; }
};

/// Subset of the cross-section boundary where Neumann data are observed.
struct SubBoundary {
    std::vector<int> nodes; ///< transverse node indices, subset of gamma
};

/// Tensor grid for the truncated waveguide omega x (-X, X) and time [0, T].
struct WaveguideGrid {
    CrossSection cs;
    double half_length = 0.0; ///< X: axis truncated to (-X, X)
    int axis_nodes = 0;       ///< odd, so x_n = 0 is a node
    double horizon = 0.0;     ///< T
    int steps = 0;            ///< time step count

    double transverse_spacing() const { return cs.spacing(); }
    double axial_spacing() const { return 2.0 * half_length / (axis_nodes - 1); }
    double dt() const { return horizon / steps; }
    double axial_coord(int j) const { return -half_length + j * axial_spacing(); }
    double transverse_coord(int i) const { return cs.coord(i); }
    int transverse_nodes() const { return cs.nodes; }

    /// Index of the axial node at x_n = 0.
    int axial_center() const { return (axis_nodes - 1) / 2; }
};

/// Uniform grid on (0, extent); gamma = the two endpoint nodes.
CrossSection build_cross_section(double extent, int nodes);

/// Boundary nodes where (x' - x0') . nu' >= 0, for an exterior center x0'.
SubBoundary select_observation_boundary(const CrossSection& cs, double x0_prime);

WaveguideGrid build_grid(const CrossSection& cs, double half_length, int axis_nodes,
                         double horizon, int steps);

} // namespace spinwg

#endif
