#pragma once

#include "cdrlab/analysis.hpp"
#include "cdrlab/cdrloop.hpp"
#include "cdrlab/channel.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace cdrlab {

/// Shortest decimal form that parses back to the same double.
std::string format_number(double v);

/// "# cdrlab-<version> config_sha256=<hash>" plus newline.
std::string csv_header(std::string_view config_hash);

inline constexpr std::string_view kSweepColumns = "v_off_mV,eff_threshold_mV,jitter_pkpk_pct_ui,locked";
inline constexpr std::string_view kOracleColumns = "edge_phase_ui,probability,drift_steps";
inline constexpr std::string_view kTrackColumns = "time_s,v_c_V,v_th_fb_V";
inline constexpr std::string_view kEdgeColumns = "edge_index,falling_edge_time_s";
inline constexpr std::string_view kEyeColumns = "time_ui,voltage_mV,count";
inline constexpr std::string_view kCrossingColumns = "phase_ui,count";
inline constexpr std::string_view kOracleTableColumns =
    "threshold,threshold_mV,oracle_support_ui,oracle_expected_range_ui,sim_pkpk_ui,sim_over_oracle,sim_locked,transitions_lost";

std::string sweep_csv(const SweepCurve& curve, std::string_view config_hash);
std::string oracle_csv(const OracleResult& r, std::string_view config_hash);
std::string track_csv(const SimTrace& trace, std::string_view config_hash);
std::string edges_csv(const SimTrace& trace, std::string_view config_hash);
std::string eye_csv(const EyeDiagram& eye, std::string_view config_hash);
std::string crossing_csv(const CrossingHistogram& h, std::string_view config_hash);

struct OracleTableRow {
    std::string label;
    double threshold_mv = 0.0;
    OracleComparison cmp;
};

std::string oracle_table_csv(const std::vector<OracleTableRow>& rows, std::string_view config_hash);

/// Throws IoError.
void write_file(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

struct ManifestEntry {
    std::string path;      ///< relative to the manifest's directory
    std::string sha256;
    std::uint64_t bytes = 0;
};

struct RunManifest {
    std::string command;
    std::string artifact_version;
    std::string config_hash;
    std::map<std::string, std::uint64_t> seeds;
    std::vector<ManifestEntry> files;
    double wall_time_s = 0.0;

    std::string to_json() const;
    static RunManifest from_json(std::string_view text);
};

/// Writes `content` under `dir` and records it in the manifest.
void write_artifact(RunManifest& m, const std::filesystem::path& dir, const std::string& name,
                    std::string_view content);

}  // namespace cdrlab
