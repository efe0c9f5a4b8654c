#include "spinwg/coefficients.hpp"

#include "spinwg/rng.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace spinwg {

bool CoefficientSet::same_shape(const CoefficientSet& o) const {
    if (A.dimension() != o.A.dimension()) return false;
    for (int d = 0; d < A.dimension(); ++d)
        if (!A.components[d].same_shape(o.A.components[d])) return false;
    return p.same_shape(o.p) && q_plus.same_shape(o.q_plus) && q_minus.same_shape(o.q_minus);
}

double japanese_bracket(double x) { return std::sqrt(1.0 + x * x); }

double AdmissibleClassParams::envelope(double x_n) const {
    return std::exp(-decay_rate * std::pow(japanese_bracket(x_n), decay_power));
}

namespace {

void check_shape(const WaveguideGrid& g, const ScalarField& f, const char* name) {
    if (f.nt != g.transverse_nodes() || f.na != g.axis_nodes)
        throw ContractError(std::string(name) + ": field shape does not match the grid");
}

// Second-order derivative along one axis; one-sided at the two edges.
double d_transverse(const ScalarField& f, int i, int j, double h, int nt) {
    if (i == 0) return (-3.0 * f.at(0, j) + 4.0 * f.at(1, j) - f.at(2, j)) / (2.0 * h);
    if (i == nt - 1)
        return (3.0 * f.at(nt - 1, j) - 4.0 * f.at(nt - 2, j) + f.at(nt - 3, j)) / (2.0 * h);
    return (f.at(i + 1, j) - f.at(i - 1, j)) / (2.0 * h);
}

double d_axial(const ScalarField& f, int i, int j, double h, int na) {
    if (j == 0) return (-3.0 * f.at(i, 0) + 4.0 * f.at(i, 1) - f.at(i, 2)) / (2.0 * h);
    if (j == na - 1)
        return (3.0 * f.at(i, na - 1) - 4.0 * f.at(i, na - 2) + f.at(i, na - 3)) / (2.0 * h);
    return (f.at(i, j + 1) - f.at(i, j - 1)) / (2.0 * h);
}

// C^3 window on (0, 1). sin^4 = (3 - 4 cos 2pi t + cos 4pi t)/8 is the
// lowest-harmonic trig window with four vanishing derivatives at the edges;
// low harmonic content keeps the time-stepping error constant of linearized
// experiments down.
double window4(double t) {
    if (t <= 0.0 || t >= 1.0) return 0.0;
    const double s = std::sin(M_PI * t);
    return s * s * s * s;
}

struct BumpSpec {
    double cn, rn;  // axial center/half-width
    double sign;
    double skewing; // low-frequency transverse asymmetry in [-1, 1]
};

// sign * T(x1) * W(x_n): T spans the whole transverse plateau, W the drawn
// axial window.
ScalarField render_bumps(const WaveguideGrid& g, const PlateauBox& plateau,
                         const std::vector<BumpSpec>& specs) {
    ScalarField f(g);
    const double width1 = plateau.x1_hi - plateau.x1_lo;
    for (const BumpSpec& b : specs)
        for (int j = 0; j < g.axis_nodes; ++j) {
            const double wn = window4((g.axial_coord(j) - (b.cn - b.rn)) / (2.0 * b.rn));
            if (wn == 0.0) continue;
            for (int i = 0; i < g.transverse_nodes(); ++i) {
                const double t1 = (g.transverse_coord(i) - plateau.x1_lo) / width1;
                const double shape =
                    window4(t1) * (1.0 + 0.25 * b.skewing * std::cos(M_PI * t1));
                f.at(i, j) += b.sign * wn * shape;
            }
        }
    return f;
}

// Rescales f so that max |f| / envelope == 1; zero fields stay zero.
void normalize_to_envelope(const WaveguideGrid& g, const AdmissibleClassParams& params,
                           ScalarField& f) {
    double worst = 0.0;
    for (int j = 0; j < g.axis_nodes; ++j) {
        const double env = params.envelope(g.axial_coord(j));
        for (int i = 0; i < g.transverse_nodes(); ++i)
            worst = std::max(worst, std::abs(f.at(i, j)) / env);
    }
    if (worst == 0.0) return;
    for (double& x : f.v) x /= worst;
}

BumpSpec draw_scalar_bump(SplitMix64& rng, const PlateauBox& plateau) {
    BumpSpec b;
    b.rn = plateau.xn_half * rng.uniform(0.55, 0.8);
    b.cn = rng.uniform(-1.0, 1.0) * (plateau.xn_half - b.rn);
    b.sign = rng.sign();
    b.skewing = rng.uniform(-1.0, 1.0);
    return b;
}

} // namespace

ScalarField divergence(const VectorField& A, const WaveguideGrid& g) {
    if (A.dimension() != 2)
        throw ContractError("divergence: expected a 2-component field, got " +
                            std::to_string(A.dimension()));
    check_shape(g, A.components[0], "divergence: a_1");
    check_shape(g, A.components[1], "divergence: a_n");
    const int nt = g.transverse_nodes(), na = g.axis_nodes;
    const double h1 = g.transverse_spacing(), hn = g.axial_spacing();
    ScalarField div(g);
    for (int j = 0; j < na; ++j)
        for (int i = 0; i < nt; ++i)
            div.at(i, j) = d_transverse(A.components[0], i, j, h1, nt) +
                           d_axial(A.components[1], i, j, hn, na);
    return div;
}

VectorField stream_function_field(const ScalarField& psi, const WaveguideGrid& g) {
    check_shape(g, psi, "stream_function_field: psi");
    const int nt = g.transverse_nodes(), na = g.axis_nodes;
    const double h1 = g.transverse_spacing(), hn = g.axial_spacing();
    VectorField A(2, g);
    for (int j = 0; j < na; ++j)
        for (int i = 0; i < nt; ++i) {
            A.components[0].at(i, j) = d_axial(psi, i, j, hn, na);
            A.components[1].at(i, j) = -d_transverse(psi, i, j, h1, nt);
        }
    return A;
}

CoefficientSet make_perturbation(const WaveguideGrid& g, const AdmissibleClassParams& params,
                                 const PlateauBox& plateau, double amplitude, std::uint64_t seed,
                                 PerturbationFamily family) {
    if (amplitude < 0.0) throw ContractError("make_perturbation: amplitude must be >= 0");
    if (plateau.x1_hi <= plateau.x1_lo || plateau.xn_half <= 0.0)
        throw ContractError("make_perturbation: empty plateau");

    CoefficientSet c = params.background;
    if (c.p.size() == 0) c = CoefficientSet(g); // zero background shortcut
    check_shape(g, c.p, "make_perturbation: background p");

    SplitMix64 rng(seed * 0x9e3779b97f4a7c15ULL + 0x243f6a8885a308d3ULL);

    const bool with_all = (family == PerturbationFamily::mixed);

    // Scalar components: one or two envelope-normalized bumps each.
    auto add_scalar = [&](ScalarField& target, double amp_budget, bool enabled) {
        std::vector<BumpSpec> specs;
        const int count = 1 + (int)(rng.next() % 2);
        for (int k = 0; k < count; ++k) specs.push_back(draw_scalar_bump(rng, plateau));
        if (!enabled || amplitude == 0.0) return; // draws consumed either way, for seed stability
        if (amplitude > amp_budget)
            throw ContractError("make_perturbation: amplitude " + std::to_string(amplitude) +
                                " exceeds the envelope budget " + std::to_string(amp_budget));
        ScalarField shape = render_bumps(g, plateau, specs);
        normalize_to_envelope(g, params, shape);
        for (size_t n = 0; n < target.v.size(); ++n) target.v[n] += amplitude * shape.v[n];
    };

    add_scalar(c.p, params.amp_p, true);
    add_scalar(c.q_plus, params.amp_q, with_all);
    add_scalar(c.q_minus, params.amp_q, with_all);

    // A: discrete curl of a stream function held in {|x_n| > y*} inside the
    // plateau, two mirrored lobes with independent draws.
    {
        const double y_star = params.agreement_radius;
        const double gap = plateau.xn_half - y_star;
        if (with_all && gap <= 0.0)
            throw ContractError("make_perturbation: no room between y* and the axial plateau");
        // Wide lobes keep the curvature (and with it the linearization error
        // constant of simulated data) low.
        std::vector<BumpSpec> specs;
        for (int side = 0; side < 2; ++side) {
            BumpSpec b;
            b.rn = gap * rng.uniform(0.46, 0.5);
            const double lo = y_star + b.rn, hi = plateau.xn_half - b.rn;
            b.cn = (side == 0 ? 1.0 : -1.0) * (lo >= hi ? lo : rng.uniform(lo, hi));
            b.sign = rng.sign();
            b.skewing = 0.0;
            rng.uniform(); // keep the draw budget of earlier layouts
            specs.push_back(b);
        }
        if (with_all && amplitude > 0.0) {
            if (amplitude > params.amp_a)
                throw ContractError("make_perturbation: amplitude " + std::to_string(amplitude) +
                                    " exceeds the envelope budget " + std::to_string(params.amp_a));
            ScalarField psi = render_bumps(g, plateau, specs);
            VectorField dA = stream_function_field(psi, g);
            // Normalize the vector magnitude against the envelope.
            double worst = 0.0;
            for (int j = 0; j < g.axis_nodes; ++j) {
                const double env = params.envelope(g.axial_coord(j));
                for (int i = 0; i < g.transverse_nodes(); ++i)
                    worst = std::max(worst, std::hypot(dA.components[0].at(i, j),
                                                       dA.components[1].at(i, j)) /
                                                env);
            }
            if (worst > 0.0)
                for (int d = 0; d < 2; ++d)
                    for (double& x : dA.components[d].v) x *= amplitude / worst;
            for (int d = 0; d < 2; ++d)
                for (size_t n = 0; n < c.A.components[d].v.size(); ++n)
                    c.A.components[d].v[n] += dA.components[d].v[n];
        }
    }

    // Sup-norm budget check on the assembled set.
    double sup = 0.0;
    for (size_t n = 0; n < c.p.v.size(); ++n) {
        sup = std::max(sup, std::abs(c.p.v[n]));
        sup = std::max(sup, std::abs(c.q_plus.v[n]));
        sup = std::max(sup, std::abs(c.q_minus.v[n]));
        sup = std::max(sup, std::hypot(c.A.components[0].v[n], c.A.components[1].v[n]));
    }
    if (sup > params.sup_budget)
        throw ContractError("make_perturbation: sup-norm " + std::to_string(sup) +
                            " exceeds the budget M = " + std::to_string(params.sup_budget));
    return c;
}

ValidationReport validate_admissible(const WaveguideGrid& g, const CoefficientSet& c,
                                     const AdmissibleClassParams& params) {
    check_shape(g, c.p, "validate_admissible: p");
    CoefficientSet bg = params.background;
    if (bg.p.size() == 0) bg = CoefficientSet(g);
    if (!c.same_shape(bg)) throw ContractError("validate_admissible: background shape mismatch");

    const int nt = g.transverse_nodes(), na = g.axis_nodes;
    ValidationReport rep;
    const double slack = 1.0 + 1e-12; // round-off guard on the envelope equality case

    double sup = 0.0, env_ratio = 0.0, boundary = 0.0, axial_mismatch = 0.0;
    for (int j = 0; j < na; ++j) {
        const double x_n = g.axial_coord(j);
        const double env = params.envelope(x_n);
        for (int i = 0; i < nt; ++i) {
            const double dp = c.p.at(i, j) - bg.p.at(i, j);
            const double dqp = c.q_plus.at(i, j) - bg.q_plus.at(i, j);
            const double dqm = c.q_minus.at(i, j) - bg.q_minus.at(i, j);
            const double da1 = c.A.components[0].at(i, j) - bg.A.components[0].at(i, j);
            const double dan = c.A.components[1].at(i, j) - bg.A.components[1].at(i, j);
            const double da = std::hypot(da1, dan);

            sup = std::max({sup, std::abs(c.p.at(i, j)), std::abs(c.q_plus.at(i, j)),
                            std::abs(c.q_minus.at(i, j)),
                            std::hypot(c.A.components[0].at(i, j), c.A.components[1].at(i, j))});

            env_ratio = std::max({env_ratio, std::abs(dp) / (params.amp_p * env),
                                  std::abs(dqp) / (params.amp_q * env),
                                  std::abs(dqm) / (params.amp_q * env),
                                  da / (params.amp_a * env)});

            if (i == 0 || i == nt - 1 || j == 0 || j == na - 1)
                boundary = std::max({boundary, std::abs(dp), std::abs(dqp), std::abs(dqm), da});

            if (std::abs(x_n) < params.agreement_radius - 1e-12)
                axial_mismatch = std::max(axial_mismatch, std::abs(dan));
        }
    }

    ScalarField div = divergence(c.A, g);
    double worst_div = 0.0;
    for (double x : div.v) worst_div = std::max(worst_div, std::abs(x));

    rep.worst_sup_norm = sup;
    rep.worst_envelope_ratio = env_ratio;
    rep.worst_boundary_value = boundary;
    rep.worst_divergence = worst_div;
    rep.worst_axial_mismatch = axial_mismatch;

    rep.sup_norm_ok = sup <= params.sup_budget * slack;
    rep.envelope_ok = env_ratio <= slack;
    rep.boundary_ok = boundary <= 1e-14;
    rep.divergence_ok = worst_div <= params.div_tolerance;
    rep.axial_agreement_ok = axial_mismatch <= 1e-14;
    return rep;
}

double theta_norm(const WaveguideGrid& g, const CoefficientSet& c1, const CoefficientSet& c2,
                  const Region& region) {
    if (!c1.same_shape(c2)) throw ContractError("theta_norm: shape mismatch");
    check_shape(g, c1.p, "theta_norm");
    if (region_node_count(g, region) == 0) throw ContractError("theta_norm: empty region");

    double acc = 0.0;
    for (int j = 0; j < g.axis_nodes; ++j) {
        if (!region.contains(g.axial_coord(j))) continue;
        for (int i = 0; i < g.transverse_nodes(); ++i) {
            const double w = quad_weight(g, i, j);
            double sq = 0.0;
            for (int d = 0; d < c1.A.dimension(); ++d) {
                const double da = c1.A.components[d].at(i, j) - c2.A.components[d].at(i, j);
                sq += da * da;
            }
            const double dp = c1.p.at(i, j) - c2.p.at(i, j);
            const double dqp = c1.q_plus.at(i, j) - c2.q_plus.at(i, j);
            const double dqm = c1.q_minus.at(i, j) - c2.q_minus.at(i, j);
            acc += w * (sq + dp * dp + dqp * dqp + dqm * dqm);
        }
    }
    return acc;
}

} // namespace spinwg
