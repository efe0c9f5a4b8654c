#include "spinwg/fields.hpp"

#include <cmath>

namespace spinwg {

namespace {

template <class Field, class Sq>
double accumulate_sq(const WaveguideGrid& g, const Field& f, const Region& r, Sq sq) {
    // Fixed (j, i) traversal order for reproducible reductions.
    double acc = 0.0;
    for (int j = 0; j < g.axis_nodes; ++j) {
        if (!r.contains(g.axial_coord(j))) continue;
        for (int i = 0; i < g.transverse_nodes(); ++i)
            acc += quad_weight(g, i, j) * sq(f.at(i, j));
    }
    return acc;
}

} // namespace

double l2_norm_sq(const WaveguideGrid& g, const ScalarField& f, const Region& r) {
    return accumulate_sq(g, f, r, [](double x) { return x * x; });
}

double l2_norm_sq(const WaveguideGrid& g, const ComplexField& f, const Region& r) {
    return accumulate_sq(g, f, r, [](cplx z) { return std::norm(z); });
}

double l2_norm_sq(const WaveguideGrid& g, const TwoStateField& f, const Region& r) {
    return l2_norm_sq(g, f.u_plus, r) + l2_norm_sq(g, f.u_minus, r);
}

int region_node_count(const WaveguideGrid& g, const Region& r) {
    int count = 0;
    for (int j = 0; j < g.axis_nodes; ++j)
        if (r.contains(g.axial_coord(j))) count += g.transverse_nodes();
    return count;
}

} // namespace spinwg
