#pragma once

#include "cdrlab/stimulus.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cdrlab {

/// Unity-DC-gain low-pass biquad  w0^2 / (s^2 + (w0/Q) s + w0^2).
struct SecondOrderSection {
    double natural_frequency_hz = 0.0;
    double quality_factor = 0.5;
};

enum class ChannelPreset { HighBandwidth, ModerateBandwidth };

std::string_view to_string(ChannelPreset p);
ChannelPreset channel_preset_from_string(std::string_view name);

inline constexpr std::size_t kMaxChannelSections = 64;

/// Calibrated cutoff scales (base section frequency / bit rate), produced by
/// tools/calibrate_channel and committed here.
inline constexpr double kHighBandwidthCutoffScale = 2.0;
inline constexpr double kModerateBandwidthCutoffScale = 0.9;
inline constexpr int kLadderSections = 20;
inline constexpr double kLadderFastRatio = 4.0;
inline constexpr double kLadderDominantQ = 0.3;
inline constexpr double kLadderFastQ = 0.55;

struct ChannelConfig {
    std::vector<SecondOrderSection> sections;
    std::optional<ChannelPreset> preset;

    /// 20-section ladder with spread time constants, scaled to the bit rate.
    static ChannelConfig from_preset(ChannelPreset preset, double bitrate_hz);

    /// The same ladder for an arbitrary cutoff scale (multiples of the bit
    /// rate). Used by the preset calibration tool.
    static ChannelConfig ladder(double cutoff_scale, double bitrate_hz,
                                double fast_ratio = kLadderFastRatio,
                                double dominant_q = kLadderDominantQ);

    std::string describe() const;
};

/// Cascade of bilinear-discretised biquads, zero initial state. Throws
/// ConfigError naming the first section that cannot be discretised stably.
Waveform apply_channel(const Waveform& w, const ChannelConfig& cfg);

/// Times where the waveform crosses `level`, linearly interpolated between
/// straddling samples; strictly increasing. Tangent touches are dropped.
std::vector<double> crossing_times(const Waveform& w, double level);
std::vector<double> crossing_times_serial(const Waveform& w, double level);

struct Cluster {
    std::size_t first_bin = 0;  ///< inclusive, may exceed last_bin when wrapping
    std::size_t last_bin = 0;
    double mass = 0.0;          ///< raw count mass
    double center_bin = 0.0;    ///< mass-weighted, unwrapped into [0, bins)
};

struct ClusterOptions {
    int smoothing_width = 3;
    int min_gap_bins = 2;
    double min_mass_fraction = 0.01;
    bool circular = false;
};

/// Mode counting: boxcar smoothing, occupied runs split by >= min_gap empty
/// bins, light clusters discarded.
std::vector<Cluster> find_clusters(std::span<const double> counts, const ClusterOptions& opt);

struct CrossingHistogram {
    double ui = 0.0;
    std::vector<std::uint64_t> counts;       ///< bins over [0, UI)
    std::size_t n_crossings = 0;
    int cluster_count = 0;
    std::vector<double> cluster_centers;     ///< seconds, folded into [0, UI)
    std::vector<double> cluster_fractions;   ///< share of crossings per cluster

    double bin_width() const { return ui / static_cast<double>(counts.size()); }
};

inline constexpr std::size_t kMinCrossingsForClusters = 100;

CrossingHistogram crossing_histogram(std::span<const double> times, double ui, int bins = 128);

struct EyeGrid {
    int time_bins = 0;        ///< over the 2-UI window; 0 -> 2 * samples_per_ui
    int voltage_bins = 128;
    double v_min = 0.0;
    double v_max = 0.0;       ///< v_min == v_max -> auto range (1.25 x peak)
};

/// 2-D hit histogram of the waveform folded into a 2-UI window.
struct EyeDiagram {
    double ui = 0.0;
    double trigger_phase_ui = 0.0;
    int time_bins = 0;
    int voltage_bins = 0;
    double v_min = 0.0;
    double v_max = 0.0;
    std::vector<std::uint64_t> counts;  ///< row-major [time][voltage]

    std::uint64_t& at(int t, int v) { return counts[static_cast<std::size_t>(t) * voltage_bins + v]; }
    std::uint64_t at(int t, int v) const { return counts[static_cast<std::size_t>(t) * voltage_bins + v]; }
    std::uint64_t total() const;
    double voltage_of_bin(int v) const;
    double time_ui_of_bin(int t) const;  ///< bin centre, in [0, 2)
    std::vector<double> column(int t) const;

    /// Bin-wise addition; grids must match.
    void merge(const EyeDiagram& other);
};

EyeDiagram eye_accumulate(const Waveform& w, double trigger_phase_ui, const EyeGrid& grid = {});
EyeDiagram eye_accumulate_serial(const Waveform& w, double trigger_phase_ui, const EyeGrid& grid = {});

}  // namespace cdrlab
