#include "spinwg/io.hpp"

#include <bit>
#include <charconv>
#include <cstdlib>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>

namespace spinwg {

static_assert(std::endian::native == std::endian::little,
              "field and trajectory files are little-endian");

std::string format_double(double x) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

std::string fnv1a64_hex(const void* data, size_t bytes) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (size_t i = 0; i < bytes; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", (unsigned long long)h);
    return buf;
}

std::string fnv1a64_hex(const std::string& s) { return fnv1a64_hex(s.data(), s.size()); }

// ---------------------------------------------------------------------------
// Low-level binary helpers

namespace {

constexpr char kFieldMagic[8] = {'W', 'G', 'F', 'L', 'D', '0', '1', '\n'};
constexpr char kTrajMagic[8] = {'W', 'G', 'T', 'R', 'J', '0', '1', '\n'};

void put_bytes(std::ofstream& out, const void* data, size_t bytes) {
    out.write(static_cast<const char*>(data), (std::streamsize)bytes);
}
template <class T>
void put(std::ofstream& out, T value) {
    put_bytes(out, &value, sizeof(T));
}
void get_bytes(std::ifstream& in, void* data, size_t bytes, const std::string& path) {
    in.read(static_cast<char*>(data), (std::streamsize)bytes);
    if (!in) throw IoError("truncated file " + path);
}
template <class T>
T get(std::ifstream& in, const std::string& path) {
    T value;
    get_bytes(in, &value, sizeof(T), path);
    return value;
}

std::ofstream open_out(const std::string& path, std::ios::openmode mode = std::ios::binary) {
    std::ofstream out(path, mode);
    if (!out) throw IoError("cannot open " + path + " for writing");
    return out;
}

} // namespace

void write_field_file(const std::string& path, const WaveguideGrid& g,
                      const std::vector<std::pair<std::string, const ScalarField*>>& components) {
    std::ofstream out = open_out(path);
    put_bytes(out, kFieldMagic, 8);
    put<std::uint32_t>(out, 1); // version
    put<std::uint32_t>(out, (std::uint32_t)components.size());
    put<std::uint64_t>(out, (std::uint64_t)g.transverse_nodes());
    put<std::uint64_t>(out, (std::uint64_t)g.axis_nodes);
    put<double>(out, g.cs.extent);
    put<double>(out, g.half_length);
    for (const auto& [name, field] : components) {
        char label[16] = {};
        std::strncpy(label, name.c_str(), sizeof(label) - 1);
        put_bytes(out, label, sizeof(label));
        if (field->nt != g.transverse_nodes() || field->na != g.axis_nodes)
            throw ContractError("write_field_file: component shape mismatch");
        put_bytes(out, field->v.data(), field->v.size() * sizeof(double));
    }
    if (!out) throw IoError("write failed for " + path);
}

FieldFile read_field_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    char magic[8];
    get_bytes(in, magic, 8, path);
    if (std::memcmp(magic, kFieldMagic, 8) != 0)
        throw IoError(path + ": not a field file (bad magic)");
    const auto version = get<std::uint32_t>(in, path);
    if (version != 1) throw IoError(path + ": unsupported field file version");
    const auto ncomp = get<std::uint32_t>(in, path);
    FieldFile f;
    f.nt = (int)get<std::uint64_t>(in, path);
    f.na = (int)get<std::uint64_t>(in, path);
    f.extent = get<double>(in, path);
    f.half_length = get<double>(in, path);
    for (std::uint32_t c = 0; c < ncomp; ++c) {
        char label[16];
        get_bytes(in, label, sizeof(label), path);
        label[15] = 0;
        f.names.emplace_back(label);
        std::vector<double> data((size_t)f.nt * f.na);
        get_bytes(in, data.data(), data.size() * sizeof(double), path);
        f.components.push_back(std::move(data));
    }
    return f;
}

void write_coefficients(const std::string& path, const WaveguideGrid& g, const CoefficientSet& c) {
    write_field_file(path, g,
                     {{"a_1", &c.A.components[0]},
                      {"a_n", &c.A.components[1]},
                      {"p", &c.p},
                      {"q_plus", &c.q_plus},
                      {"q_minus", &c.q_minus}});
}

CoefficientSet read_coefficients(const std::string& path, const WaveguideGrid& g) {
    const FieldFile f = read_field_file(path);
    if (f.nt != g.transverse_nodes() || f.na != g.axis_nodes)
        throw IoError(path + ": grid shape mismatch");
    if (f.components.size() != 5) throw IoError(path + ": expected 5 coefficient components");
    CoefficientSet c(g);
    c.A.components[0].v = f.components[0];
    c.A.components[1].v = f.components[1];
    c.p.v = f.components[2];
    c.q_plus.v = f.components[3];
    c.q_minus.v = f.components[4];
    return c;
}

void write_coefficients_csv(const std::string& path, const WaveguideGrid& g,
                            const CoefficientSet& c) {
    std::ofstream out = open_out(path, std::ios::out);
    out << "x1,xn,a_1,a_n,p,q_plus,q_minus\n";
    for (int j = 0; j < g.axis_nodes; ++j)
        for (int i = 0; i < g.transverse_nodes(); ++i)
            out << format_double(g.transverse_coord(i)) << "," << format_double(g.axial_coord(j))
                << "," << format_double(c.A.components[0].at(i, j)) << ","
                << format_double(c.A.components[1].at(i, j)) << ","
                << format_double(c.p.at(i, j)) << "," << format_double(c.q_plus.at(i, j)) << ","
                << format_double(c.q_minus.at(i, j)) << "\n";
    if (!out) throw IoError("write failed for " + path);
}

void write_trajectory(const std::string& path, const Trajectory& traj) {
    std::ofstream out = open_out(path);
    put_bytes(out, kTrajMagic, 8);
    put<std::uint32_t>(out, 1);
    put<std::uint64_t>(out, (std::uint64_t)traj.nt);
    put<std::uint64_t>(out, (std::uint64_t)traj.na);
    put<double>(out, traj.dt);
    put<std::uint64_t>(out, (std::uint64_t)traj.snapshots.size());
    for (const TwoStateField& f : traj.snapshots) {
        put_bytes(out, f.u_plus.v.data(), f.u_plus.v.size() * sizeof(cplx));
        put_bytes(out, f.u_minus.v.data(), f.u_minus.v.size() * sizeof(cplx));
    }
    if (!out) throw IoError("write failed for " + path);
}

Trajectory read_trajectory(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    char magic[8];
    get_bytes(in, magic, 8, path);
    if (std::memcmp(magic, kTrajMagic, 8) != 0)
        throw IoError(path + ": not a trajectory file (bad magic)");
    if (get<std::uint32_t>(in, path) != 1)
        throw IoError(path + ": unsupported trajectory version");
    Trajectory traj;
    traj.nt = (int)get<std::uint64_t>(in, path);
    traj.na = (int)get<std::uint64_t>(in, path);
    traj.dt = get<double>(in, path);
    const auto count = get<std::uint64_t>(in, path);
    for (std::uint64_t m = 0; m < count; ++m) {
        TwoStateField f(traj.nt, traj.na);
        get_bytes(in, f.u_plus.v.data(), f.u_plus.v.size() * sizeof(cplx), path);
        get_bytes(in, f.u_minus.v.data(), f.u_minus.v.size() * sizeof(cplx), path);
        traj.snapshots.push_back(std::move(f));
    }
    return traj;
}

void write_trace_csv(const std::string& path, const WaveguideGrid& g, const NeumannTrace& trace) {
    std::ofstream out = open_out(path, std::ios::out);
    out << "node,x_n,t,re_plus,im_plus,re_minus,im_minus\n";
    const double t0 = trace.extended ? -(trace.time_nodes - 1) / 2.0 * trace.dt : 0.0;
    for (size_t b = 0; b < trace.boundary_nodes.size(); ++b)
        for (int m = 0; m < trace.time_nodes; ++m)
            for (int j = 0; j < trace.na; ++j) {
                const cplx zp = trace.at(0, (int)b, m, j);
                const cplx zm = trace.at(1, (int)b, m, j);
                out << trace.boundary_nodes[b] << "," << format_double(g.axial_coord(j)) << ","
                    << format_double(t0 + m * trace.dt) << "," << format_double(zp.real()) << ","
                    << format_double(zp.imag()) << "," << format_double(zm.real()) << ","
                    << format_double(zm.imag()) << "\n";
            }
    if (!out) throw IoError("write failed for " + path);
}

// ---------------------------------------------------------------------------
// JSON reports

nlohmann::ordered_json to_json(const AssumptionReport& rep) {
    nlohmann::ordered_json j;
    j["pass"] = rep.all_ok();
    j["gradient"] = {{"ok", rep.gradient_ok},
                     {"lower_bound", rep.gradient_lower},
                     {"witness_node", rep.gradient_witness}};
    j["boundary_sign"] = {{"ok", rep.boundary_sign_ok},
                          {"worst", rep.boundary_worst},
                          {"witness_node", rep.boundary_witness}};
    j["convexity"] = {{"ok", rep.convexity_ok},
                      {"lower_bound", rep.convexity_lower},
                      {"witness_node", rep.convexity_witness},
                      {"lambda", rep.lambda}};
    return j;
}

nlohmann::ordered_json to_json(const ValidationReport& rep) {
    nlohmann::ordered_json j;
    j["pass"] = rep.all_ok();
    j["sup_norm"] = {{"ok", rep.sup_norm_ok}, {"worst", rep.worst_sup_norm}};
    j["envelope"] = {{"ok", rep.envelope_ok}, {"worst_ratio", rep.worst_envelope_ratio}};
    j["boundary"] = {{"ok", rep.boundary_ok}, {"worst", rep.worst_boundary_value}};
    j["divergence"] = {{"ok", rep.divergence_ok}, {"worst", rep.worst_divergence}};
    j["axial_agreement"] = {{"ok", rep.axial_agreement_ok}, {"worst", rep.worst_axial_mismatch}};
    return j;
}

nlohmann::ordered_json to_json(const ReconstructionResult& res) {
    nlohmann::ordered_json j;
    j["max_imag_residue"] = res.max_imag_residue;
    j["max_condition"] = res.max_condition;
    j["flagged_points"] = res.flagged.size();
    if (res.has_truth)
        j["relative_l2_error"] = {{"a_1", res.err_a1},
                                  {"a_n", res.err_an},
                                  {"p", res.err_p},
                                  {"q_plus", res.err_q_plus},
                                  {"q_minus", res.err_q_minus}};
    return j;
}

nlohmann::ordered_json to_json(const MmsReport& rep) {
    nlohmann::ordered_json j;
    j["l2_space_time_error"] = rep.l2_space_time_error;
    j["final_time_error"] = rep.final_time_error;
    j["steps"] = rep.steps;
    j["transverse_nodes"] = rep.transverse_nodes;
    j["axial_nodes"] = rep.axial_nodes;
    return j;
}

nlohmann::ordered_json to_json(const StabilityReport& rep) {
    nlohmann::ordered_json j;
    j["theta"] = rep.theta;
    j["epsilon"] = rep.epsilon;
    j["s_grid"] = rep.s_grid;
    j["y_list"] = rep.y_list;
    j["amplitudes"] = rep.amplitudes;
    j["seeds"] = rep.seeds;
    j["c_hat"] = rep.c_hat;
    j["c_hat_amplitude"] = rep.c_hat_amplitude;
    j["fits"] = nlohmann::ordered_json::array();
    for (const FamilyFit& f : rep.fits)
        j["fits"].push_back({{"theta", f.theta},
                             {"family", f.family},
                             {"lhs_slope", f.lhs_slope},
                             {"trace_norm_slope", f.trace_norm_slope},
                             {"c_hat", f.c_hat},
                             {"c_hat_amplitude", f.c_hat_amplitude},
                             {"max_at_largest_amplitude", f.max_at_largest_amplitude}});
    j["points"] = nlohmann::ordered_json::array();
    for (const SweepPoint& p : rep.points) {
        nlohmann::ordered_json row;
        row["family"] = p.family;
        row["amplitude"] = p.amplitude;
        row["seed"] = p.seed;
        row["theta_omega"] = p.theta_omega;
        row["rhs_raw"] = p.rhs_raw;
        row["trace_norm_sum"] = p.trace_norm_sum;
        {
            nlohmann::ordered_json norms = nlohmann::ordered_json::array();
            for (const auto& probe : p.trace_norms) norms.push_back({probe[0], probe[1]});
            row["trace_norms"] = norms;
        }
        row["theta_inside"] = p.theta_inside;
        row["theta_outside"] = p.theta_outside;
        row["decay_budget"] = p.budget;
        row["xi"] = p.xi;
        nlohmann::ordered_json mu = nlohmann::ordered_json::array();
        for (const auto& per_s : p.mu) {
            nlohmann::ordered_json srow = nlohmann::ordered_json::array();
            for (const auto& probe : per_s) srow.push_back({probe[0], probe[1]});
            mu.push_back(srow);
        }
        row["mu"] = mu;
        row["e2_ratio"] = p.e2_ratio;
        j["points"].push_back(row);
    }
    j["b2"] = nlohmann::ordered_json::array();
    for (const B2Row& r : rep.b2)
        j["b2"].push_back({{"probe", r.probe},
                           {"s", r.s},
                           {"lhs", r.lhs},
                           {"rhs_content", r.rhs_content},
                           {"ratio", r.ratio},
                           {"defined", r.defined}});
    return j;
}

std::string stability_csv(const StabilityReport& rep) {
    std::string out = "family,amplitude,seed,theta_omega,rhs_raw,trace_norm_sum";
    for (double y : rep.y_list)
        out += ",theta_inside_y" + format_double(y) + ",theta_outside_y" + format_double(y) +
               ",budget_y" + format_double(y);
    out += "\n";
    for (const SweepPoint& p : rep.points) {
        out += p.family + "," + format_double(p.amplitude) + "," + std::to_string(p.seed) + "," +
               format_double(p.theta_omega) + "," + format_double(p.rhs_raw) + "," +
               format_double(p.trace_norm_sum);
        for (size_t yi = 0; yi < rep.y_list.size(); ++yi)
            out += "," + format_double(p.theta_inside[yi]) + "," +
                   format_double(p.theta_outside[yi]) + "," + format_double(p.budget[yi]);
        out += "\n";
    }
    return out;
}

std::string stability_mu_csv(const StabilityReport& rep) {
    std::string out = "family,amplitude,seed,s,xi,mu_plus_1,mu_minus_1,mu_plus_2,mu_minus_2,"
                      "mu_plus_3,mu_minus_3\n";
    for (const SweepPoint& p : rep.points)
        for (size_t si = 0; si < rep.s_grid.size(); ++si) {
            out += p.family + "," + format_double(p.amplitude) + "," + std::to_string(p.seed) +
                   "," + format_double(rep.s_grid[si]) + "," + format_double(p.xi[si]);
            for (int k = 0; k < 3; ++k)
                for (int comp = 0; comp < 2; ++comp)
                    out += "," + format_double(p.mu[si][k][comp]);
            out += "\n";
        }
    return out;
}

// ---------------------------------------------------------------------------
// Manifest

namespace {

std::string iso_timestamp() {
    std::time_t t;
    if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH"))
        t = (std::time_t)std::atoll(epoch);
    else
        t = std::time(nullptr);
    char buf[32];
    std::tm tm_utc{};
    gmtime_r(&t, &tm_utc);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

} // namespace

void ensure_directory(const std::string& path) {
    std::error_code ec;
    std::filesystem::create_directories(path, ec);
    if (ec) throw IoError("cannot create directory " + path + ": " + ec.message());
}

std::string write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out = open_out(path, std::ios::binary);
    out.write(text.data(), (std::streamsize)text.size());
    if (!out) throw IoError("write failed for " + path);
    return fnv1a64_hex(text);
}

RunManifest::RunManifest(std::string subcommand, std::string config_hash) {
    doc_["artifact"] = "spinwg";
    doc_["version"] = "1.0.0";
    doc_["subcommand"] = std::move(subcommand);
    doc_["config_hash"] = std::move(config_hash);
    doc_["timestamp"] = iso_timestamp();
    doc_["status"] = "ok";
}

void RunManifest::emit_text(const std::string& directory, const std::string& name,
                            const std::string& text) {
    ensure_directory(directory);
    const std::string checksum = write_text_file(directory + "/" + name, text);
    outputs_.push_back({{"path", name}, {"bytes", text.size()}, {"checksum", checksum}});
}

void RunManifest::record_file(const std::string& directory, const std::string& name) {
    std::ifstream in(directory + "/" + name, std::ios::binary);
    if (!in) throw IoError("manifest: missing output " + name);
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    outputs_.push_back({{"path", name}, {"bytes", data.size()}, {"checksum", fnv1a64_hex(data)}});
}

void RunManifest::mark_failed(const std::string& reason) {
    doc_["status"] = "failed";
    doc_["failure"] = reason;
}

void RunManifest::write(const std::string& directory) {
    ensure_directory(directory);
    doc_["outputs"] = outputs_;
    write_text_file(directory + "/manifest.json", doc_.dump(2) + "\n");
}

} // namespace spinwg
