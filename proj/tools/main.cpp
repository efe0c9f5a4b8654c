#include "spinwg/config.hpp"
#include "spinwg/io.hpp"
#include "spinwg/mms_cases.hpp"
#include "spinwg/parallel.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

using namespace spinwg;

namespace {

// Streams snapshots straight to a trajectory dump; full runs never sit in
// memory.
class DumpSink : public StepSink {
  public:
    DumpSink(const std::string& path, const WaveguideGrid& g, double dt, int snapshots)
        : path_(path), keep_(snapshots), out_(path, std::ios::binary) {
        if (!out_) throw IoError("cannot open " + path + " for writing");
        const char magic[8] = {'W', 'G', 'T', 'R', 'J', '0', '1', '\n'};
        out_.write(magic, 8);
        write_pod<std::uint32_t>(1);
        write_pod<std::uint64_t>((std::uint64_t)g.transverse_nodes());
        write_pod<std::uint64_t>((std::uint64_t)g.axis_nodes);
        write_pod<double>(dt);
        write_pod<std::uint64_t>((std::uint64_t)snapshots);
    }

    void on_state(int m, const StateView& view) override {
        if (m >= keep_) return;
        const TwoStateField f = view.to_field();
        out_.write(reinterpret_cast<const char*>(f.u_plus.v.data()),
                   (std::streamsize)(f.u_plus.v.size() * sizeof(cplx)));
        out_.write(reinterpret_cast<const char*>(f.u_minus.v.data()),
                   (std::streamsize)(f.u_minus.v.size() * sizeof(cplx)));
        if (!out_) throw IoError("write failed for " + path_);
    }

  private:
    template <class T>
    void write_pod(T v) {
        out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
    }
    std::string path_;
    int keep_;
    std::ofstream out_;
};

CoefficientSet zero_background(const WaveguideGrid& g) { return CoefficientSet(g); }

struct PairSets {
    CoefficientSet c1, c2;
};

PairSets build_pair(const ExperimentConfig& cfg, const WaveguideGrid& g, const ProbeSet& probes) {
    const AdmissibleClassParams params = cfg.class_params();
    PairSets pair{make_perturbation(g, params, probes.plateau(g), cfg.pair_amplitude,
                                    cfg.pair_seed, cfg.pair_family_value()),
                  zero_background(g)};
    const ValidationReport v1 = validate_admissible(g, pair.c1, params);
    if (!v1.all_ok()) throw ContractError("forward: generated pair is not admissible");
    return pair;
}

// ---------------------------------------------------------------------------

int run_carleman_check(const ExperimentConfig& cfg, RunManifest& manifest) {
    const CrossSection cs = cfg.cross_section();
    const SubBoundary gamma_star = select_observation_boundary(cs, cfg.center);
    const TransverseField alpha = quadratic_alpha(cs, cfg.center);
    const AssumptionReport report = check_pseudoconvexity(cs, alpha, gamma_star, cfg.lambda);

    nlohmann::ordered_json j = to_json(report);
    j["gamma_star"] = gamma_star.nodes;

    // Weight positivity at every node: eta > 0, eta >= eta0, eta0 <= e^{2K}/T^2.
    auto weight_block = [&](double scale) {
        TransverseField scaled = alpha;
        for (double& a : scaled) a *= scale;
        const WeightBundle w = build_weights(cs, scaled, cfg.r, cfg.horizon, 1.0);
        double eta0_min = 1e300, gap_min = 1e300, cap_max = 0.0;
        const int time_nodes = 2 * cfg.steps + 1;
        const double dt = 2.0 * cfg.horizon / (time_nodes - 1);
        for (int i = 0; i < cs.nodes; ++i) {
            eta0_min = std::min(eta0_min, w.eta0(i));
            cap_max = std::max(cap_max, w.eta0(i) * cfg.horizon * cfg.horizon / w.exp_2k);
            for (int m = 1; m + 1 < time_nodes; ++m) {
                const double t = -cfg.horizon + m * dt;
                gap_min = std::min(gap_min, w.eta(i, t) - w.eta0(i));
            }
        }
        nlohmann::ordered_json b;
        b["K"] = w.K;
        b["eta0_min"] = eta0_min;
        b["eta_minus_eta0_min"] = gap_min;
        b["eta0_cap_ratio_max"] = cap_max;
        b["ok"] = eta0_min > 0.0 && gap_min >= -1e-12 && cap_max <= 1.0 + 1e-12;
        return b;
    };
    j["weights"] = weight_block(1.0);
    j["weights_scaled"] = weight_block(cfg.alpha_scale);

    const bool ok = report.all_ok() && j["weights"]["ok"].get<bool>() &&
                    j["weights_scaled"]["ok"].get<bool>();
    j["pass"] = ok;

    const std::string text = j.dump(2) + "\n";
    std::fputs(text.c_str(), stdout);
    manifest.emit_text(cfg.directory, "carleman_check.json", text);
    return ok ? 0 : (int)ExitCode::contract;
}

int run_probes(const ExperimentConfig& cfg, RunManifest& manifest) {
    const WaveguideGrid g = cfg.grid();
    const ProbeSet probes = cfg.probe_set();
    const CoefficientSet background = zero_background(g);

    nlohmann::ordered_json j;
    j["epsilon"] = probes.epsilon;
    j["mode"] = cfg.probe_mode;
    j["probes"] = nlohmann::ordered_json::array();
    ensure_directory(cfg.directory);

    for (size_t k = 0; k < probes.probes.size(); ++k) {
        const Probe& p = probes.probes[k];
        const std::string name = "probe_" + std::to_string(k + 1) + ".bin";
        write_field_file(cfg.directory + "/" + name, g,
                         {{"u0_plus", &p.u0_plus},
                          {"u0_minus", &p.u0_minus},
                          {"d1_u0_plus", &p.grad_plus.components[0]},
                          {"dn_u0_plus", &p.grad_plus.components[1]},
                          {"d1_u0_minus", &p.grad_minus.components[0]},
                          {"dn_u0_minus", &p.grad_minus.components[1]}});
        manifest.record_file(cfg.directory, name);

        nlohmann::ordered_json row;
        row["index"] = k + 1;
        row["tail_fraction"] = p.tail_fraction;
        nlohmann::ordered_json residuals = nlohmann::ordered_json::array();
        for (int ell = 0; ell <= 2; ++ell)
            residuals.push_back(compatibility_residual(g, p, background, ell));
        row["compatibility_residuals"] = residuals;
        j["probes"].push_back(row);
    }
    manifest.emit_text(cfg.directory, "probes.json", j.dump(2) + "\n");
    return 0;
}

int run_forward(const ExperimentConfig& cfg, RunManifest& manifest) {
    const WaveguideGrid g = cfg.grid();
    const ProbeSet probes = cfg.probe_set();
    const SubBoundary gamma_star = select_observation_boundary(g.cs, cfg.center);
    const PairSets pair = build_pair(cfg, g, probes);

    SolverOptions opts;
    opts.rel_residual = cfg.rel_residual;

    ensure_directory(cfg.directory);
    write_coefficients(cfg.directory + "/c1.bin", g, pair.c1);
    write_coefficients(cfg.directory + "/c2.bin", g, pair.c2);
    manifest.record_file(cfg.directory, "c1.bin");
    manifest.record_file(cfg.directory, "c2.bin");

    nlohmann::ordered_json j;
    j["amplitude"] = cfg.pair_amplitude;
    j["seed"] = cfg.pair_seed;
    j["family"] = cfg.pair_family;
    j["solves"] = nlohmann::ordered_json::array();

    for (int which = 0; which < 2; ++which) {
        const ForwardSolver solver(g, which == 0 ? pair.c1 : pair.c2, opts);
        for (size_t k = 0; k < probes.probes.size(); ++k) {
            const Probe& probe = probes.probes[k];
            const std::string tag =
                "s" + std::to_string(which + 1) + "_p" + std::to_string(k + 1);
            TraceSink trace_sink(g, gamma_star, g.steps, solver.dt());
            NormSink norm_sink(g);
            const int dump_count = cfg.dump_full_trajectory ? g.steps + 1 : 3;
            DumpSink dump_sink(cfg.directory + "/traj_" + tag + ".bin", g, solver.dt(),
                               dump_count);
            MultiSink sinks({&trace_sink, &norm_sink, &dump_sink});
            if (probe.mode == BoundaryMode::homogeneous_cutoff)
                solver.run(probe.initial_state(), g.steps, sinks);
            else
                solver.run_lifted(probe.initial_state(), g.steps, sinks);

            write_trace_csv(cfg.directory + "/trace_" + tag + ".csv", g, trace_sink.trace());
            manifest.record_file(cfg.directory, "traj_" + tag + ".bin");
            manifest.record_file(cfg.directory, "trace_" + tag + ".csv");
            j["solves"].push_back({{"set", which + 1},
                                   {"probe", k + 1},
                                   {"norm_drift", norm_sink.max_relative_drift()}});
        }
    }
    manifest.emit_text(cfg.directory, "forward.json", j.dump(2) + "\n");
    return 0;
}

int run_invert(const ExperimentConfig& cfg, RunManifest& manifest,
               const std::string& dumps_dir) {
    const WaveguideGrid g = cfg.grid();
    const ProbeSet probes = cfg.probe_set();
    const Masks masks = make_masks(g, probes, cfg.agreement_radius);

    SolverOptions opts;
    opts.rel_residual = cfg.rel_residual;

    LinearizedInitialData sim;
    CoefficientSet truth(g);
    if (dumps_dir.empty()) {
        const PairSets pair = build_pair(cfg, g, probes);
        sim = simulated_initial_v(g, pair.c1, pair.c2, probes, opts);
        for (int d = 0; d < 2; ++d)
            for (size_t n = 0; n < truth.A.components[d].v.size(); ++n)
                truth.A.components[d].v[n] =
                    pair.c1.A.components[d].v[n] - pair.c2.A.components[d].v[n];
        for (size_t n = 0; n < truth.p.v.size(); ++n) {
            truth.p.v[n] = pair.c1.p.v[n] - pair.c2.p.v[n];
            truth.q_plus.v[n] = pair.c1.q_plus.v[n] - pair.c2.q_plus.v[n];
            truth.q_minus.v[n] = pair.c1.q_minus.v[n] - pair.c2.q_minus.v[n];
        }
    } else {
        const CoefficientSet c1 = read_coefficients(dumps_dir + "/c1.bin", g);
        const CoefficientSet c2 = read_coefficients(dumps_dir + "/c2.bin", g);
        sim.provenance = LinearizedInitialData::Provenance::simulated;
        for (size_t k = 0; k < probes.probes.size(); ++k) {
            const std::string suffix = "_p" + std::to_string(k + 1) + ".bin";
            const Trajectory t1 = read_trajectory(dumps_dir + "/traj_s1" + suffix);
            const Trajectory t2 = read_trajectory(dumps_dir + "/traj_s2" + suffix);
            if (t1.snapshots.size() < 3 || t2.snapshots.size() < 3)
                throw ContractError("invert: dumps need at least the first 3 snapshots");
            if (t1.nt != g.transverse_nodes() || t1.na != g.axis_nodes)
                throw ContractError("invert: dump grid shape mismatch");
            TwoStateField v(g);
            for (int comp = 0; comp < 2; ++comp) {
                auto member = comp == 0 ? &TwoStateField::u_plus : &TwoStateField::u_minus;
                auto& dst = v.*member;
                for (size_t n = 0; n < dst.v.size(); ++n) {
                    const cplx d1 = (t1.snapshots[1].*member).v[n] -
                                    (t2.snapshots[1].*member).v[n];
                    const cplx d2 = (t1.snapshots[2].*member).v[n] -
                                    (t2.snapshots[2].*member).v[n];
                    dst.v[n] = (4.0 * d1 - d2) / (2.0 * t1.dt);
                }
            }
            sim.v0.push_back(std::move(v));
        }
        for (int d = 0; d < 2; ++d)
            for (size_t n = 0; n < truth.A.components[d].v.size(); ++n)
                truth.A.components[d].v[n] =
                    c1.A.components[d].v[n] - c2.A.components[d].v[n];
        for (size_t n = 0; n < truth.p.v.size(); ++n) {
            truth.p.v[n] = c1.p.v[n] - c2.p.v[n];
            truth.q_plus.v[n] = c1.q_plus.v[n] - c2.q_plus.v[n];
            truth.q_minus.v[n] = c1.q_minus.v[n] - c2.q_minus.v[n];
        }
    }

    ReconstructionResult pw = reconstruct_pointwise(g, sim, probes, masks);
    ReconstructionResult ls = reconstruct_least_squares(g, sim, probes, masks);
    attach_truth_errors(g, pw, truth, masks);
    attach_truth_errors(g, ls, truth, masks);

    // Oracle round-trip as a reference row.
    const LinearizedInitialData oracle = exact_initial_v(g, truth, probes);
    ReconstructionResult pw_oracle = reconstruct_pointwise(g, oracle, probes, masks);
    attach_truth_errors(g, pw_oracle, truth, masks);

    ensure_directory(cfg.directory);
    write_coefficients(cfg.directory + "/delta_pointwise.bin", g, pw.delta);
    write_coefficients(cfg.directory + "/delta_least_squares.bin", g, ls.delta);
    manifest.record_file(cfg.directory, "delta_pointwise.bin");
    manifest.record_file(cfg.directory, "delta_least_squares.bin");

    nlohmann::ordered_json j;
    j["provenance"] = dumps_dir.empty() ? "inline" : "dumps";
    j["pointwise"] = to_json(pw);
    j["least_squares"] = to_json(ls);
    j["pointwise_oracle"] = to_json(pw_oracle);
    manifest.emit_text(cfg.directory, "invert.json", j.dump(2) + "\n");
    return 0;
}

int run_stability(const ExperimentConfig& cfg, RunManifest& manifest) {
    StabilitySetup setup;
    setup.grid = cfg.grid();
    setup.params = cfg.class_params();
    setup.probes = cfg.probe_set();
    setup.gamma_star = select_observation_boundary(setup.grid.cs, cfg.center);
    setup.alpha = quadratic_alpha(setup.grid.cs, cfg.center);
    for (double& a : setup.alpha) a *= cfg.alpha_scale;
    setup.r = cfg.r;
    setup.s_grid = cfg.s_grid;
    setup.theta = cfg.theta;
    setup.theta_sweep = cfg.theta_sweep;
    setup.amplitudes = cfg.amplitudes;
    setup.seeds = cfg.seeds;
    setup.y_list = cfg.y_list;
    setup.families = cfg.family_list();
    setup.solver.rel_residual = cfg.rel_residual;
    setup.parity_tolerance = cfg.parity_tolerance;
    setup.threads = cfg.effective_threads();
    setup.with_b2 = cfg.with_b2;

    const StabilityReport report = run_stability_experiment(setup);
    manifest.emit_text(cfg.directory, "stability.json", to_json(report).dump(2) + "\n");
    manifest.emit_text(cfg.directory, "stability_sweep.csv", stability_csv(report));
    manifest.emit_text(cfg.directory, "stability_mu.csv", stability_mu_csv(report));
    return 0;
}

int run_mms(const ExperimentConfig& cfg, RunManifest& manifest) {
    SolverOptions opts;
    opts.rel_residual = cfg.rel_residual;

    const MmsLadder temporal =
        mms_temporal_ladder(cfg.mms_time_transverse, cfg.mms_time_axial, cfg.mms_half_length,
                            cfg.horizon, cfg.mms_base_steps, cfg.mms_levels, opts);
    const MmsLadder spatial =
        mms_spatial_ladder(cfg.mms_base_transverse, cfg.mms_base_axial, cfg.mms_half_length,
                           cfg.horizon, cfg.mms_fine_steps, cfg.mms_levels, opts);

    auto ladder_json = [](const MmsLadder& ladder) {
        nlohmann::ordered_json j;
        j["levels"] = nlohmann::ordered_json::array();
        for (const MmsReport& r : ladder.levels) j["levels"].push_back(to_json(r));
        j["orders"] = ladder.orders;
        return j;
    };
    nlohmann::ordered_json j;
    j["temporal"] = ladder_json(temporal);
    j["spatial"] = ladder_json(spatial);
    const std::string text = j.dump(2) + "\n";
    std::fputs(text.c_str(), stdout);
    manifest.emit_text(cfg.directory, "mms.json", text);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"spinwg: coupled two-state waveguide simulation and inversion lab"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_override;
    std::string dumps_dir;
    int threads_override = 0;
    std::int64_t seed_override = -1;

    const std::vector<std::string> names = {"carleman-check", "forward", "probes",
                                            "invert",         "stability", "mms"};
    for (const std::string& name : names) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "configuration file")->required();
        sub->add_option("--out", out_override, "output directory override");
        sub->add_option("--seed", seed_override, "pair seed override");
        sub->add_option("--threads", threads_override, "worker thread override");
        if (name == "invert")
            sub->add_option("--from-dumps", dumps_dir, "read trajectory dumps from a directory");
    }

    CLI11_PARSE(app, argc, argv);
    const std::string sub = app.get_subcommands().front()->get_name();

    ExperimentConfig cfg;
    try {
        cfg = load_config(config_path);
        if (!out_override.empty()) cfg.directory = out_override;
        if (seed_override >= 0) cfg.pair_seed = (std::uint64_t)seed_override;
        if (threads_override > 0) cfg.threads = threads_override;
        validate_config(cfg);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return (int)ExitCode::config;
    }

    RunManifest manifest(sub, fnv1a64_hex(echo_config(cfg)));
    try {
        ensure_directory(cfg.directory);
        manifest.emit_text(cfg.directory, "config_echo.txt", echo_config(cfg));
        int code = 0;
        if (sub == "carleman-check")
            code = run_carleman_check(cfg, manifest);
        else if (sub == "probes")
            code = run_probes(cfg, manifest);
        else if (sub == "forward")
            code = run_forward(cfg, manifest);
        else if (sub == "invert")
            code = run_invert(cfg, manifest, dumps_dir);
        else if (sub == "stability")
            code = run_stability(cfg, manifest);
        else if (sub == "mms")
            code = run_mms(cfg, manifest);
        if (code != 0) manifest.mark_failed("checks failed with exit code " + std::to_string(code));
        manifest.write(cfg.directory);
        return code;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        manifest.mark_failed(e.what());
        manifest.write(cfg.directory);
        return (int)ExitCode::config;
    } catch (const SolverError& e) {
        std::fprintf(stderr, "solver error: %s\n", e.what());
        manifest.mark_failed(e.what());
        manifest.write(cfg.directory);
        return (int)ExitCode::solver;
    } catch (const ContractError& e) {
        std::fprintf(stderr, "contract violation: %s\n", e.what());
        manifest.mark_failed(e.what());
        manifest.write(cfg.directory);
        return (int)ExitCode::contract;
    } catch (const IoError& e) {
        std::fprintf(stderr, "i/o error: %s\n", e.what());
        try {
            manifest.mark_failed(e.what());
            manifest.write(cfg.directory);
        } catch (...) {
        }
        return (int)ExitCode::io;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
