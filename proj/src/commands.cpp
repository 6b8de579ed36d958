#include "cdrlab/commands.hpp"

#include "cdrlab/errors.hpp"
#include "cdrlab/plot.hpp"

#include <chrono>
#include <cmath>
#include <numbers>
#include <sstream>

namespace cdrlab {

namespace {

std::string fixed(double v, int digits) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(digits);
    os << v;
    return os.str();
}

double circular_mean_phase(std::span<const double> times, double ui) {
    double sx = 0.0, sy = 0.0;
    for (double t : times) {
        const double ph = 2.0 * std::numbers::pi * t / ui;
        sx += std::cos(ph);
        sy += std::sin(ph);
    }
    double p = std::atan2(sy, sx) / (2.0 * std::numbers::pi);
    return p < 0.0 ? p + 1.0 : p;
}

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

RunManifest start_manifest(const char* command, const ExperimentConfig& cfg) {
    RunManifest m;
    m.command = command;
    m.artifact_version = std::string(kArtifactVersion);
    m.config_hash = config_hash(cfg);
    m.seeds["data.seed"] = cfg.data.seed;
    m.seeds["loop.metastability_seed"] = cfg.loop.metastability_seed;
    return m;
}

void finish(RunManifest& m, const std::filesystem::path& dir, const ExperimentConfig& cfg,
            const std::string& report, const Stopwatch& sw) {
    write_artifact(m, dir, "config.cfg", serialize_config(cfg));
    write_artifact(m, dir, "report.txt", report);
    m.wall_time_s = sw.seconds();
    write_file(dir / "manifest.json", m.to_json());
}

}  // namespace

Waveform received_waveform(const ExperimentConfig& cfg) {
    cfg.validate();
    const BitStream bits = generate_bits(cfg.data.source_kind, cfg.data.n_bits, cfg.data.seed);
    const Waveform tx = nrz_modulate(bits, cfg.ui(), cfg.data.samples_per_ui, cfg.data.amplitude_mv * 1e-3);
    Waveform rx = apply_channel(tx, cfg.channel_config());
    add_gaussian_noise(rx, cfg.data.noise_rms_mv * 1e-3, point_seed(cfg.data.seed, 0x6e6f697365ULL));
    return rx;
}

// ---------------------------------------------------------------------------

EyeResult run_eye(const ExperimentConfig& cfg) {
    const Waveform rx = received_waveform(cfg);
    EyeResult r;
    const auto times = crossing_times(rx, 0.0);
    r.histogram = crossing_histogram(times, rx.ui(), cfg.analysis.histogram_bins);
    r.crossing_phase_ui = circular_mean_phase(times, rx.ui());
    EyeGrid grid;
    grid.voltage_bins = cfg.analysis.eye_voltage_bins;
    // Crossings land at 0.5 and 1.5 UI of the 2-UI window.
    r.eye = eye_accumulate(rx, r.crossing_phase_ui - 0.5, grid);
    return r;
}

std::string EyeResult::report() const {
    std::string s = "clusters=" + std::to_string(histogram.cluster_count) + "\n";
    s += "crossings=" + std::to_string(histogram.n_crossings) + "\n";
    s += "crossing_phase_ui=" + fixed(crossing_phase_ui, 4) + "\n";
    for (std::size_t i = 0; i < histogram.cluster_centers.size(); ++i) {
        s += "cluster " + std::to_string(i) + ": center_ui=" + fixed(histogram.cluster_centers[i] / histogram.ui, 4) +
             " fraction=" + fixed(histogram.cluster_fractions[i], 3) + "\n";
    }
    return s;
}

RunManifest cmd_eye(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
    const Stopwatch sw;
    const EyeResult r = run_eye(cfg);
    RunManifest m = start_manifest("eye", cfg);
    write_artifact(m, out_dir, "eye.csv", eye_csv(r.eye, m.config_hash));
    write_artifact(m, out_dir, "crossings.csv", crossing_csv(r.histogram, m.config_hash));
    finish(m, out_dir, cfg, r.report(), sw);
    return m;
}

// ---------------------------------------------------------------------------

SweepResult run_sweep(const ExperimentConfig& cfg) {
    const Waveform rx = received_waveform(cfg);
    const auto offsets = cfg.analysis.offsets_mv.volts();
    if (offsets.size() < 3) throw ConfigError("analysis.offsets_mV: a sweep needs at least 3 offsets");
    SweepOptions opt;
    opt.master_seed = cfg.loop.metastability_seed;
    opt.min_edges = cfg.analysis.min_edges;
    LoopConfig loop = cfg.loop_config();
    loop.vth_enabled = false;
    SweepResult r;
    r.curve = offset_sweep(loop, rx, offsets, opt);
    r.curve.channel_id = cfg.channel_config().describe();
    r.curve.loop_id = "step_ui=" + format_number(loop.bang_bang_step_ui());
    r.minima = local_minima(r.curve);
    r.global_min = global_minimum(r.curve);
    return r;
}

std::vector<double> SweepResult::minima_mv() const {
    std::vector<double> v;
    for (auto i : minima) v.push_back(curve.points[i].v_off * 1e3);
    return v;
}

std::string SweepResult::report() const {
    std::string s = "minima_mV=";
    const auto mv = minima_mv();
    for (std::size_t i = 0; i < mv.size(); ++i) s += (i ? "," : "") + format_number(mv[i]);
    s += "\n";
    const auto& g = curve.points[global_min];
    s += "global_min_mV=" + format_number(g.v_off * 1e3) + " jitter_pkpk_pct_ui=" + fixed(100.0 * g.pk_pk_ui, 3) + "\n";
    std::size_t unlocked = 0;
    for (const auto& p : curve.points) unlocked += p.locked ? 0 : 1;
    s += "points=" + std::to_string(curve.points.size()) + " unlocked=" + std::to_string(unlocked) + "\n";
    s += "channel=" + curve.channel_id + "\n";
    return s;
}

RunManifest cmd_sweep(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
    const Stopwatch sw;
    const SweepResult r = run_sweep(cfg);
    RunManifest m = start_manifest("sweep", cfg);
    write_artifact(m, out_dir, "sweep.csv", sweep_csv(r.curve, m.config_hash));
    finish(m, out_dir, cfg, r.report(), sw);
    return m;
}

// ---------------------------------------------------------------------------

TrackResult run_track(const ExperimentConfig& cfg) {
    if (!cfg.loop.vth_enabled) throw ConfigError("loop.vth_enabled: track needs threshold tracking enabled");
    const Waveform rx = received_waveform(cfg);
    RunOptions ro;
    ro.record_stride_samples = cfg.analysis.record_stride_samples;
    TrackResult r;
    r.trace = run_cdr(cfg.loop_config(), rx, ro);
    r.lock_time = lock_detect(r.trace);
    r.v_c = settling_report(r.trace.record_time, r.trace.record_v_c);
    r.v_th_fb = settling_report(r.trace.record_time, r.trace.record_v_th_fb);
    return r;
}

std::string TrackResult::report() const {
    std::string s;
    s += "lock_time_s=" + (lock_time ? format_number(*lock_time) : std::string("none")) + "\n";
    s += "v_c_final_mV=" + fixed(v_c.final_mean * 1e3, 4) + " band_mV=" + fixed(v_c.band * 1e3, 4) +
         " settling_time_s=" + format_number(v_c.settling_time) +
         " settled=" + (v_c.settled ? "1" : "0") + "\n";
    s += "v_th_fb_final_mV=" + fixed(v_th_fb.final_mean * 1e3, 4) + " tail_std_mV=" + fixed(v_th_fb.tail_std * 1e3, 4) +
         " band_mV=" + fixed(v_th_fb.band * 1e3, 4) +
         " settling_time_s=" + format_number(v_th_fb.settling_time) + " settled=" + (v_th_fb.settled ? "1" : "0") + "\n";
    return s;
}

RunManifest cmd_track(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
    const Stopwatch sw;
    const TrackResult r = run_track(cfg);
    RunManifest m = start_manifest("track", cfg);
    write_artifact(m, out_dir, "track.csv", track_csv(r.trace, m.config_hash));
    write_artifact(m, out_dir, "edges.csv", edges_csv(r.trace, m.config_hash));
    finish(m, out_dir, cfg, r.report(), sw);
    if (!r.lock_time) throw LockError("track: recovered clock never locked", 0.0);
    return m;
}

// ---------------------------------------------------------------------------

double resolve_threshold(const OneBitIsiModel& model, const std::string& spec) {
    if (spec == "R") return model.level_r();
    if (spec == "P") return model.level_p();
    if (spec == "Q") return model.level_q();
    try {
        std::size_t used = 0;
        const double mv = std::stod(spec, &used);
        if (used == spec.size()) return mv * 1e-3;
    } catch (const std::exception&) {
    }
    throw ConfigError("model.thresholds: '" + spec + "' is neither P, Q, R nor a number");
}

OracleRun run_oracle(const ExperimentConfig& cfg) {
    cfg.validate();
    OracleRun run;
    run.model = OneBitIsiModel::build(cfg.model_params());
    OracleOptions opt;
    opt.grid = cfg.model.grid;
    const LoopConfig loop = oracle_loop_config(cfg.model.grid, cfg.ui());
    for (const auto& spec : cfg.model.thresholds) {
        const double th = resolve_threshold(run.model, spec);
        run.results.push_back(markov_oracle(run.model, th, opt));
        OracleTableRow row;
        row.label = spec;
        row.threshold_mv = th * 1e3;
        row.cmp = oracle_vs_sim(run.model, th, loop, cfg.model.n_bits, cfg.data.seed, opt, cfg.data.samples_per_ui);
        run.rows.push_back(row);
    }
    return run;
}

std::string OracleRun::report() const {
    std::string s = "level_P_mV=" + fixed(model.level_p() * 1e3, 4) + " level_Q_mV=" + fixed(model.level_q() * 1e3, 4) + "\n";
    for (const auto& r : rows) {
        s += r.label + ": threshold_mV=" + fixed(r.threshold_mv, 4) + " support_ui=" + fixed(r.cmp.oracle_support_ui, 5) +
             " sim_pkpk_ui=" + fixed(r.cmp.sim_pk_pk_ui, 5) + " ratio=" + fixed(r.cmp.ratio, 3) + "\n";
    }
    return s;
}

RunManifest cmd_oracle(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
    const Stopwatch sw;
    const OracleRun run = run_oracle(cfg);
    RunManifest m = start_manifest("oracle", cfg);
    for (std::size_t i = 0; i < run.results.size(); ++i) {
        const auto& label = run.rows[i].label;
        const bool named = label == "P" || label == "Q" || label == "R";
        const std::string name = "oracle_" + (named ? label : format_number(run.rows[i].threshold_mv) + "mV") + ".csv";
        write_artifact(m, out_dir, name, oracle_csv(run.results[i], m.config_hash));
    }
    write_artifact(m, out_dir, "oracle_vs_sim.csv", oracle_table_csv(run.rows, m.config_hash));
    finish(m, out_dir, cfg, run.report(), sw);
    return m;
}

// ---------------------------------------------------------------------------

void cmd_plot(const std::filesystem::path& csv_in, const std::filesystem::path& svg_out) {
    write_file(svg_out, render_svg(read_file(csv_in)));
}

}  // namespace cdrlab
