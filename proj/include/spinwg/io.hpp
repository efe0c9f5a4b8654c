#ifndef SPINWG_IO_HPP
#define SPINWG_IO_HPP

#include "spinwg/carleman.hpp"
#include "spinwg/coefficients.hpp"
#include "spinwg/inversion.hpp"
#include "spinwg/solver.hpp"
#include "spinwg/stability.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace spinwg {

/// Shortest round-trip decimal representation (std::to_chars).
std::string format_double(double x);

/// FNV-1a 64-bit, hex-encoded. Used for config hashes and file checksums.
std::string fnv1a64_hex(const void* data, size_t bytes);
std::string fnv1a64_hex(const std::string& s);

// ---------------------------------------------------------------------------
// Binary field files: header + little-endian float64 components
// (transverse index fastest). Coefficient sets use the component order
// a_1 ... a_n, p, q+, q-.

struct FieldFile {
    int nt = 0, na = 0;
    double extent = 0.0, half_length = 0.0;
    std::vector<std::string> names;
    std::vector<std::vector<double>> components;
};

void write_field_file(const std::string& path, const WaveguideGrid& g,
                      const std::vector<std::pair<std::string, const ScalarField*>>& components);
FieldFile read_field_file(const std::string& path);

void write_coefficients(const std::string& path, const WaveguideGrid& g, const CoefficientSet& c);
CoefficientSet read_coefficients(const std::string& path, const WaveguideGrid& g);

/// CSV flavor for small grids: x1, xn, then one column per component.
void write_coefficients_csv(const std::string& path, const WaveguideGrid& g,
                            const CoefficientSet& c);

// ---------------------------------------------------------------------------
// Trajectory dumps: header (shape, dt, snapshot count) + row-major complex128
// snapshots (u+ then u- per snapshot).

void write_trajectory(const std::string& path, const Trajectory& traj);
Trajectory read_trajectory(const std::string& path);

/// CSV trace: boundary-node id, x_n, t, Re/Im per component.
void write_trace_csv(const std::string& path, const WaveguideGrid& g, const NeumannTrace& trace);

// ---------------------------------------------------------------------------
// JSON reports.

nlohmann::ordered_json to_json(const AssumptionReport& rep);
nlohmann::ordered_json to_json(const ValidationReport& rep);
nlohmann::ordered_json to_json(const ReconstructionResult& res);
nlohmann::ordered_json to_json(const StabilityReport& rep);
nlohmann::ordered_json to_json(const MmsReport& rep);

/// Sweep table as CSV rows for plotting.
std::string stability_csv(const StabilityReport& rep);
std::string stability_mu_csv(const StabilityReport& rep);

// ---------------------------------------------------------------------------
// Run manifests: everything a run wrote, with checksums. The timestamp
// honors SOURCE_DATE_EPOCH so identical runs produce identical bytes.

class RunManifest {
  public:
    RunManifest(std::string subcommand, std::string config_hash);

    /// Writes `text` to directory/name and records it.
    void emit_text(const std::string& directory, const std::string& name,
                   const std::string& text);
    /// Records a file that was already written.
    void record_file(const std::string& directory, const std::string& name);
    void mark_failed(const std::string& reason);
    void write(const std::string& directory);

  private:
    nlohmann::ordered_json doc_;
    nlohmann::ordered_json outputs_ = nlohmann::ordered_json::array();
};

std::string write_text_file(const std::string& path, const std::string& text);
void ensure_directory(const std::string& path);

} // namespace spinwg

#endif
