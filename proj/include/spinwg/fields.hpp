#ifndef SPINWG_FIELDS_HPP
#define SPINWG_FIELDS_HPP

#include "spinwg/errors.hpp"
#include "spinwg/geometry.hpp"

#include <complex>
#include <vector>

namespace spinwg {

using cplx = std::complex<double>;

/// Real scalar field on the full space grid (transverse index fastest).
struct ScalarField {
    int nt = 0; ///< transverse node count
    int na = 0; ///< axial node count
    std::vector<double> v;

    ScalarField() = default;
    ScalarField(int nt_, int na_, double fill = 0.0) : nt(nt_), na(na_), v((size_t)nt_ * na_, fill) {}
    explicit ScalarField(const WaveguideGrid& g, double fill = 0.0)
        : ScalarField(g.transverse_nodes(), g.axis_nodes, fill) {}

    double& at(int i, int j) { return v[(size_t)j * nt + i]; }
    double at(int i, int j) const { return v[(size_t)j * nt + i]; }
    size_t size() const { return v.size(); }
    bool same_shape(const ScalarField& o) const { return nt == o.nt && na == o.na; }
};

/// Complex scalar field, same layout as ScalarField.
struct ComplexField {
    int nt = 0;
    int na = 0;
    std::vector<cplx> v;

    ComplexField() = default;
    ComplexField(int nt_, int na_, cplx fill = {}) : nt(nt_), na(na_), v((size_t)nt_ * na_, fill) {}
    explicit ComplexField(const WaveguideGrid& g, cplx fill = {})
        : ComplexField(g.transverse_nodes(), g.axis_nodes, fill) {}

    cplx& at(int i, int j) { return v[(size_t)j * nt + i]; }
    cplx at(int i, int j) const { return v[(size_t)j * nt + i]; }
    size_t size() const { return v.size(); }
    bool same_shape(const ComplexField& o) const { return nt == o.nt && na == o.na; }
};

/// Real vector field with n components; components[n-1] is the axial one.
struct VectorField {
    std::vector<ScalarField> components;

    VectorField() = default;
    VectorField(int n, int nt, int na) : components((size_t)n, ScalarField(nt, na)) {}
    VectorField(int n, const WaveguideGrid& g) : components((size_t)n, ScalarField(g)) {}

    int dimension() const { return (int)components.size(); }
    ScalarField& axial() { return components.back(); }
    const ScalarField& axial() const { return components.back(); }
};

/// Complex pair (u+, u-) on the space grid.
struct TwoStateField {
    ComplexField u_plus, u_minus;

    TwoStateField() = default;
    explicit TwoStateField(const WaveguideGrid& g) : u_plus(g), u_minus(g) {}
    TwoStateField(int nt, int na) : u_plus(nt, na), u_minus(nt, na) {}
};

/// Ordered snapshots of a TwoStateField at t = 0, dt, ..., steps*dt.
struct Trajectory {
    std::vector<TwoStateField> snapshots;
    double dt = 0.0;
    int nt = 0, na = 0;

    int steps() const { return (int)snapshots.size() - 1; }
};

/// Axial region selector for quadratures: full cylinder, |x_n| <= y, or |x_n| > y.
struct Region {
    enum class Kind { full, inside, outside } kind = Kind::full;
    double y = 0.0;

    static Region full() { return {Kind::full, 0.0}; }
    static Region inside(double y) { return {Kind::inside, y}; }
    static Region outside(double y) { return {Kind::outside, y}; }

    bool contains(double x_n) const {
        switch (kind) {
            case Kind::full: return true;
            case Kind::inside: return std::abs(x_n) <= y;
            case Kind::outside: return std::abs(x_n) > y;
        }
        return false;
    }
};

/// Trapezoid weight of one grid node (area element, halved on edges).
inline double quad_weight(const WaveguideGrid& g, int i, int j) {
    const double wi = (i == 0 || i == g.transverse_nodes() - 1) ? 0.5 : 1.0;
    const double wj = (j == 0 || j == g.axis_nodes - 1) ? 0.5 : 1.0;
    return wi * wj * g.transverse_spacing() * g.axial_spacing();
}

double l2_norm_sq(const WaveguideGrid& g, const ScalarField& f, const Region& r = Region::full());
double l2_norm_sq(const WaveguideGrid& g, const ComplexField& f, const Region& r = Region::full());
double l2_norm_sq(const WaveguideGrid& g, const TwoStateField& f, const Region& r = Region::full());

/// Count of grid nodes inside the region (empty-region guard for callers).
int region_node_count(const WaveguideGrid& g, const Region& r);

} // namespace spinwg

#endif
