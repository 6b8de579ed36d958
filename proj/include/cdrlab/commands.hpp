#pragma once

#include "cdrlab/analysis.hpp"
#include "cdrlab/channel.hpp"
#include "cdrlab/config.hpp"
#include "cdrlab/io.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace cdrlab {

/// Bit stream -> NRZ -> channel, as configured.
Waveform received_waveform(const ExperimentConfig& cfg);

struct EyeResult {
    EyeDiagram eye;
    CrossingHistogram histogram;
    double crossing_phase_ui = 0.0;  ///< circular mean of all crossings
    std::string report() const;
};

struct SweepResult {
    SweepCurve curve;
    std::vector<std::size_t> minima;
    std::size_t global_min = 0;
    std::vector<double> minima_mv() const;
    std::string report() const;
};

struct TrackResult {
    SimTrace trace;
    std::optional<double> lock_time;
    SettlingReport v_c;
    SettlingReport v_th_fb;
    std::string report() const;
};

struct OracleRun {
    OneBitIsiModel model;
    std::vector<OracleResult> results;
    std::vector<OracleTableRow> rows;
    std::string report() const;
};

EyeResult run_eye(const ExperimentConfig& cfg);
SweepResult run_sweep(const ExperimentConfig& cfg);
TrackResult run_track(const ExperimentConfig& cfg);
OracleRun run_oracle(const ExperimentConfig& cfg);

/// Threshold list entry ("P", "Q", "R" or millivolts) resolved on a model, volts.
double resolve_threshold(const OneBitIsiModel& model, const std::string& spec);

/// The cmd_* functions run the experiment, write their CSVs, a report and
/// manifest.json under `out_dir`, and return the manifest. cmd_track throws
/// LockError after writing its traces if the loop never locks.
RunManifest cmd_eye(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);
RunManifest cmd_sweep(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);
RunManifest cmd_track(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);
RunManifest cmd_oracle(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

/// Renders a sweep, eye, track, crossing or oracle CSV to SVG. Throws
/// ConfigError on an unrecognised schema.
void cmd_plot(const std::filesystem::path& csv_in, const std::filesystem::path& svg_out);

}  // namespace cdrlab
