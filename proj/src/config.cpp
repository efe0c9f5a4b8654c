#include "spinwg/config.hpp"

#include "spinwg/io.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

namespace spinwg {

CrossSection ExperimentConfig::cross_section() const {
    return build_cross_section(extent, transverse_nodes);
}

WaveguideGrid ExperimentConfig::grid() const {
    return build_grid(cross_section(), half_length, axial_nodes, horizon, steps);
}

AdmissibleClassParams ExperimentConfig::class_params() const {
    AdmissibleClassParams p;
    p.sup_budget = sup_budget;
    p.decay_rate = decay_rate;
    p.decay_power = decay_power;
    p.amp_a = amp_a;
    p.amp_p = amp_p;
    p.amp_q = amp_q;
    p.agreement_radius = agreement_radius;
    return p;
}

CutoffSpec ExperimentConfig::cutoff() const {
    CutoffSpec c;
    c.transverse_margin = transverse_margin;
    c.transverse_rise = transverse_rise;
    c.axial_plateau = axial_plateau;
    c.axial_rise = axial_rise;
    return c;
}

BoundaryMode ExperimentConfig::boundary_mode() const {
    return probe_mode == "cutoff" ? BoundaryMode::homogeneous_cutoff
                                  : BoundaryMode::analytic_trace;
}

ProbeSet ExperimentConfig::probe_set() const {
    return make_probe_set(grid(), epsilon, cutoff(), boundary_mode());
}

std::vector<PerturbationFamily> ExperimentConfig::family_list() const {
    std::vector<PerturbationFamily> out;
    for (const std::string& f : families)
        out.push_back(f == "p_only" ? PerturbationFamily::p_only : PerturbationFamily::mixed);
    return out;
}

PerturbationFamily ExperimentConfig::pair_family_value() const {
    return pair_family == "p_only" ? PerturbationFamily::p_only : PerturbationFamily::mixed;
}

int ExperimentConfig::effective_threads() const {
    if (threads > 0) return threads;
    if (const char* env = std::getenv("SPINWG_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    return 1;
}

// ---------------------------------------------------------------------------
// Parser: [section] headers, key = value lines, comma-separated lists.

namespace {

struct Parser {
    std::map<std::string, std::string> values; // "section.key" -> raw value
    std::map<std::string, int> lines;
    std::string origin;

    [[noreturn]] void fail(int line, const std::string& what) const {
        throw ConfigError(origin + ":" + std::to_string(line) + ": " + what);
    }

    static std::string trim(const std::string& s) {
        size_t a = 0, b = s.size();
        while (a < b && std::isspace((unsigned char)s[a])) ++a;
        while (b > a && std::isspace((unsigned char)s[b - 1])) --b;
        return s.substr(a, b - a);
    }

    void parse(const std::string& text) {
        std::istringstream in(text);
        std::string line;
        std::string section;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const size_t comment = line.find_first_of("#;");
            if (comment != std::string::npos) line.erase(comment);
            line = trim(line);
            if (line.empty()) continue;
            if (line.front() == '[') {
                if (line.back() != ']') fail(lineno, "unterminated section header");
                section = trim(line.substr(1, line.size() - 2));
                if (section.empty()) fail(lineno, "empty section name");
                continue;
            }
            const size_t eq = line.find('=');
            if (eq == std::string::npos) fail(lineno, "expected key = value");
            const std::string key = trim(line.substr(0, eq));
            const std::string value = trim(line.substr(eq + 1));
            if (key.empty()) fail(lineno, "empty key");
            if (section.empty()) fail(lineno, "key outside any [section]");
            const std::string full = section + "." + key;
            if (values.count(full)) fail(lineno, "duplicate key " + full);
            values[full] = value;
            lines[full] = lineno;
        }
    }

    bool consume(const std::string& full, std::string& out) {
        auto it = values.find(full);
        if (it == values.end()) return false;
        out = it->second;
        values.erase(it);
        return true;
    }

    void take(const std::string& full, double& target) {
        std::string raw;
        if (!consume(full, raw)) return;
        try {
            size_t used = 0;
            target = std::stod(raw, &used);
            if (used != raw.size()) throw std::invalid_argument("");
        } catch (...) {
            fail(lines[full], full + ": expected a number, got '" + raw + "'");
        }
    }

    void take(const std::string& full, int& target) {
        std::string raw;
        if (!consume(full, raw)) return;
        try {
            size_t used = 0;
            target = std::stoi(raw, &used);
            if (used != raw.size()) throw std::invalid_argument("");
        } catch (...) {
            fail(lines[full], full + ": expected an integer, got '" + raw + "'");
        }
    }

    void take(const std::string& full, std::uint64_t& target) {
        std::string raw;
        if (!consume(full, raw)) return;
        try {
            size_t used = 0;
            target = std::stoull(raw, &used);
            if (used != raw.size()) throw std::invalid_argument("");
        } catch (...) {
            fail(lines[full], full + ": expected an unsigned integer, got '" + raw + "'");
        }
    }

    void take(const std::string& full, bool& target) {
        std::string raw;
        if (!consume(full, raw)) return;
        if (raw == "true" || raw == "1")
            target = true;
        else if (raw == "false" || raw == "0")
            target = false;
        else
            fail(lines[full], full + ": expected true/false");
    }

    void take(const std::string& full, std::string& target) {
        std::string raw;
        if (consume(full, raw)) target = raw;
    }

    template <class T>
    void take_list(const std::string& full, std::vector<T>& target) {
        std::string raw;
        if (!consume(full, raw)) return;
        std::vector<T> out;
        std::istringstream in(raw);
        std::string item;
        while (std::getline(in, item, ',')) {
            item = trim(item);
            if (item.empty()) fail(lines[full], full + ": empty list entry");
            try {
                if constexpr (std::is_same_v<T, double>) {
                    size_t used = 0;
                    out.push_back(std::stod(item, &used));
                    if (used != item.size()) throw std::invalid_argument("");
                } else if constexpr (std::is_same_v<T, std::uint64_t>) {
                    size_t used = 0;
                    out.push_back(std::stoull(item, &used));
                    if (used != item.size()) throw std::invalid_argument("");
                } else {
                    out.push_back(item);
                }
            } catch (...) {
                fail(lines[full], full + ": bad list entry '" + item + "'");
            }
        }
        if (out.empty()) fail(lines[full], full + ": empty list");
        target = std::move(out);
    }
};

} // namespace

ExperimentConfig parse_config(const std::string& text, const std::string& origin) {
    Parser p;
    p.origin = origin;
    p.parse(text);

    ExperimentConfig cfg;
    p.take("grid.extent", cfg.extent);
    p.take("grid.transverse_nodes", cfg.transverse_nodes);
    p.take("grid.half_length", cfg.half_length);
    p.take("grid.axial_nodes", cfg.axial_nodes);
    p.take("grid.horizon", cfg.horizon);
    p.take("grid.steps", cfg.steps);

    p.take("class.sup_budget", cfg.sup_budget);
    p.take("class.decay_rate", cfg.decay_rate);
    p.take("class.decay_power", cfg.decay_power);
    p.take("class.amp_a", cfg.amp_a);
    p.take("class.amp_p", cfg.amp_p);
    p.take("class.amp_q", cfg.amp_q);
    p.take("class.agreement_radius", cfg.agreement_radius);

    p.take("probe.epsilon", cfg.epsilon);
    p.take("probe.mode", cfg.probe_mode);
    p.take("probe.transverse_margin", cfg.transverse_margin);
    p.take("probe.transverse_rise", cfg.transverse_rise);
    p.take("probe.axial_plateau", cfg.axial_plateau);
    p.take("probe.axial_rise", cfg.axial_rise);

    p.take("carleman.center", cfg.center);
    p.take("carleman.r", cfg.r);
    p.take_list("carleman.s_grid", cfg.s_grid);
    p.take("carleman.lambda", cfg.lambda);
    p.take("carleman.alpha_scale", cfg.alpha_scale);

    p.take("harness.theta", cfg.theta);
    p.take_list("harness.theta_sweep", cfg.theta_sweep);
    p.take_list("harness.amplitudes", cfg.amplitudes);
    p.take_list("harness.seeds", cfg.seeds);
    p.take_list("harness.y_list", cfg.y_list);
    p.take_list("harness.families", cfg.families);
    p.take("harness.with_b2", cfg.with_b2);

    p.take("pair.amplitude", cfg.pair_amplitude);
    p.take("pair.seed", cfg.pair_seed);
    p.take("pair.family", cfg.pair_family);
    p.take("pair.dump_full_trajectory", cfg.dump_full_trajectory);

    p.take("mms.levels", cfg.mms_levels);
    p.take("mms.base_steps", cfg.mms_base_steps);
    p.take("mms.base_transverse", cfg.mms_base_transverse);
    p.take("mms.base_axial", cfg.mms_base_axial);
    p.take("mms.half_length", cfg.mms_half_length);
    p.take("mms.fine_steps", cfg.mms_fine_steps);
    p.take("mms.time_transverse", cfg.mms_time_transverse);
    p.take("mms.time_axial", cfg.mms_time_axial);

    p.take("solver.rel_residual", cfg.rel_residual);
    p.take("solver.parity_tolerance", cfg.parity_tolerance);

    p.take("output.directory", cfg.directory);
    p.take("output.threads", cfg.threads);

    if (!p.values.empty()) {
        const auto& [key, value] = *p.values.begin();
        p.fail(p.lines[key], "unknown key " + key);
    }

    validate_config(cfg);
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path);
}

void validate_config(const ExperimentConfig& cfg) {
    auto fail = [](const std::string& field, const std::string& what) {
        throw ConfigError(field + ": " + what);
    };
    if (!(cfg.extent > 0.0)) fail("grid.extent", "must be positive");
    if (cfg.transverse_nodes < 3) fail("grid.transverse_nodes", "must be >= 3");
    if (!(cfg.half_length > 0.0)) fail("grid.half_length", "must be positive");
    if (cfg.axial_nodes < 3) fail("grid.axial_nodes", "must be >= 3");
    if (cfg.axial_nodes % 2 == 0)
        fail("grid.axial_nodes", "must be odd so that x_n = 0 is a grid node");
    if (!(cfg.horizon > 0.0)) fail("grid.horizon", "must be positive");
    if (cfg.steps < 3) fail("grid.steps", "must be >= 3");

    if (!(cfg.sup_budget > 0.0)) fail("class.sup_budget", "must be positive");
    if (!(cfg.decay_rate > 0.0)) fail("class.decay_rate", "must be positive");
    if (!(cfg.decay_power > 0.0)) fail("class.decay_power", "must be positive");
    if (!(cfg.amp_a > 0.0 && cfg.amp_p > 0.0 && cfg.amp_q > 0.0))
        fail("class.amp_*", "envelope amplitudes must be positive");
    if (!(cfg.agreement_radius > 0.0)) fail("class.agreement_radius", "must be positive");

    if (!(cfg.epsilon > 0.0 && cfg.epsilon < 1.0)) fail("probe.epsilon", "must lie in (0, 1)");
    if (cfg.probe_mode != "cutoff" && cfg.probe_mode != "analytic-trace")
        fail("probe.mode", "must be 'cutoff' or 'analytic-trace'");
    if (!(cfg.transverse_margin > 0.0 && cfg.transverse_rise > 0.0))
        fail("probe.transverse_*", "must be positive");
    if (!(cfg.axial_plateau > 0.0 && cfg.axial_rise > 0.0))
        fail("probe.axial_*", "must be positive");
    if (cfg.axial_plateau + cfg.axial_rise >= cfg.half_length)
        fail("probe.axial_plateau", "plateau + rise must stay inside (-X, X)");
    if (cfg.agreement_radius >= cfg.axial_plateau)
        fail("class.agreement_radius", "y* must be smaller than the axial plateau");

    if (cfg.center >= 0.0 && cfg.center <= cfg.extent)
        fail("carleman.center", "x0' must lie outside the closed cross-section");
    if (!(cfg.r > 1.0)) fail("carleman.r", "must exceed 1");
    for (double s : cfg.s_grid)
        if (s < 0.0) fail("carleman.s_grid", "entries must be >= 0");
    if (cfg.lambda < 0.0) fail("carleman.lambda", "must be >= 0");
    if (!(cfg.alpha_scale > 0.0)) fail("carleman.alpha_scale", "must be positive");

    auto check_theta = [&](double t, const std::string& field) {
        if (!(t > 0.0 && t < 0.5)) fail(field, "must lie in (0, 1/2)");
    };
    check_theta(cfg.theta, "harness.theta");
    for (double t : cfg.theta_sweep) check_theta(t, "harness.theta_sweep");
    for (double a : cfg.amplitudes)
        if (a < 0.0) fail("harness.amplitudes", "must be >= 0");
    if (cfg.seeds.empty()) fail("harness.seeds", "need at least one seed");
    for (double y : cfg.y_list)
        if (y < cfg.agreement_radius) fail("harness.y_list", "entries must be >= y*");
    for (const std::string& f : cfg.families)
        if (f != "p_only" && f != "mixed") fail("harness.families", "unknown family '" + f + "'");

    if (cfg.pair_family != "p_only" && cfg.pair_family != "mixed")
        fail("pair.family", "unknown family '" + cfg.pair_family + "'");
    if (cfg.pair_amplitude < 0.0) fail("pair.amplitude", "must be >= 0");

    if (cfg.mms_levels < 2) fail("mms.levels", "need at least 2 levels");
    if (cfg.mms_base_transverse < 5 || cfg.mms_base_axial < 5)
        fail("mms.base_*", "ladder base grids must have at least 5 nodes");
    if (cfg.mms_base_axial % 2 == 0 || cfg.mms_time_axial % 2 == 0)
        fail("mms.*_axial", "axial node counts must be odd");

    if (!(cfg.rel_residual > 0.0)) fail("solver.rel_residual", "must be positive");
    if (!(cfg.parity_tolerance > 0.0)) fail("solver.parity_tolerance", "must be positive");
    if (cfg.threads < 0) fail("output.threads", "must be >= 0");
}

// ---------------------------------------------------------------------------
// Canonical echo

namespace {

template <class T>
std::string join(const std::vector<T>& xs) {
    std::string out;
    for (size_t i = 0; i < xs.size(); ++i) {
        if (i) out += ",";
        if constexpr (std::is_same_v<T, double>)
            out += format_double(xs[i]);
        else if constexpr (std::is_same_v<T, std::uint64_t>)
            out += std::to_string(xs[i]);
        else
            out += xs[i];
    }
    return out;
}

} // namespace

std::string echo_config(const ExperimentConfig& c) {
    std::ostringstream o;
    o << "[grid]\n";
    o << "extent = " << format_double(c.extent) << "\n";
    o << "transverse_nodes = " << c.transverse_nodes << "\n";
    o << "half_length = " << format_double(c.half_length) << "\n";
    o << "axial_nodes = " << c.axial_nodes << "\n";
    o << "horizon = " << format_double(c.horizon) << "\n";
    o << "steps = " << c.steps << "\n";
    o << "\n[class]\n";
    o << "sup_budget = " << format_double(c.sup_budget) << "\n";
    o << "decay_rate = " << format_double(c.decay_rate) << "\n";
    o << "decay_power = " << format_double(c.decay_power) << "\n";
    o << "amp_a = " << format_double(c.amp_a) << "\n";
    o << "amp_p = " << format_double(c.amp_p) << "\n";
    o << "amp_q = " << format_double(c.amp_q) << "\n";
    o << "agreement_radius = " << format_double(c.agreement_radius) << "\n";
    o << "\n[probe]\n";
    o << "epsilon = " << format_double(c.epsilon) << "\n";
    o << "mode = " << c.probe_mode << "\n";
    o << "transverse_margin = " << format_double(c.transverse_margin) << "\n";
    o << "transverse_rise = " << format_double(c.transverse_rise) << "\n";
    o << "axial_plateau = " << format_double(c.axial_plateau) << "\n";
    o << "axial_rise = " << format_double(c.axial_rise) << "\n";
    o << "\n[carleman]\n";
    o << "center = " << format_double(c.center) << "\n";
    o << "r = " << format_double(c.r) << "\n";
    o << "s_grid = " << join(c.s_grid) << "\n";
    o << "lambda = " << format_double(c.lambda) << "\n";
    o << "alpha_scale = " << format_double(c.alpha_scale) << "\n";
    o << "\n[harness]\n";
    o << "theta = " << format_double(c.theta) << "\n";
    o << "theta_sweep = " << join(c.theta_sweep) << "\n";
    o << "amplitudes = " << join(c.amplitudes) << "\n";
    o << "seeds = " << join(c.seeds) << "\n";
    o << "y_list = " << join(c.y_list) << "\n";
    o << "families = " << join(c.families) << "\n";
    o << "with_b2 = " << (c.with_b2 ? "true" : "false") << "\n";
    o << "\n[pair]\n";
    o << "amplitude = " << format_double(c.pair_amplitude) << "\n";
    o << "seed = " << c.pair_seed << "\n";
    o << "family = " << c.pair_family << "\n";
    o << "dump_full_trajectory = " << (c.dump_full_trajectory ? "true" : "false") << "\n";
    o << "\n[mms]\n";
    o << "levels = " << c.mms_levels << "\n";
    o << "base_steps = " << c.mms_base_steps << "\n";
    o << "base_transverse = " << c.mms_base_transverse << "\n";
    o << "base_axial = " << c.mms_base_axial << "\n";
    o << "half_length = " << format_double(c.mms_half_length) << "\n";
    o << "fine_steps = " << c.mms_fine_steps << "\n";
    o << "time_transverse = " << c.mms_time_transverse << "\n";
    o << "time_axial = " << c.mms_time_axial << "\n";
    o << "\n[solver]\n";
    o << "rel_residual = " << format_double(c.rel_residual) << "\n";
    o << "parity_tolerance = " << format_double(c.parity_tolerance) << "\n";
    o << "\n[output]\n";
    o << "directory = " << c.directory << "\n";
    o << "threads = " << c.threads << "\n";
    return o.str();
}

} // namespace spinwg
