#pragma once

#include "cdrlab/cdrloop.hpp"
#include "cdrlab/channel.hpp"
#include "cdrlab/isi_model.hpp"
#include "cdrlab/stimulus.hpp"

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace cdrlab {

inline constexpr std::string_view kArtifactVersion = "cdrlab-1.0.0";

/// Offsets as start:stop:step, millivolts.
struct OffsetRange {
    double start_mv = -30.0;
    double stop_mv = 30.0;
    double step_mv = 2.0;

    std::vector<double> volts() const;
    bool operator==(const OffsetRange&) const = default;
};

OffsetRange parse_offset_range(std::string_view text);
std::string format_offset_range(const OffsetRange& r);

struct DataSection {
    std::size_t n_bits = 100000;
    std::uint64_t seed = 1;
    double amplitude_mv = 100.0;
    double bitrate_hz = 1e9;
    int samples_per_ui = kDefaultSamplesPerUi;
    SourceKind source_kind = SourceKind::UniformRandom;
    double noise_rms_mv = 0.0;  ///< additive at the receiver, off by default
    bool operator==(const DataSection&) const = default;
};

/// Either a named preset or explicit sections; "none" with no sections is the
/// ideal channel.
struct ChannelSection {
    std::string preset = "moderate-bandwidth";
    std::vector<SecondOrderSection> sections;
    bool operator==(const ChannelSection& o) const;
};

struct LoopSection {
    double f0_hz = 1e9;
    double kvco_hz_per_v = 78.125e6;
    double icp_a = 100e-6;
    double r_ohm = 1e3;
    double c_f = 10e-9;
    double v_off_mv = 0.0;
    double vth_gain_mv = 0.1;
    bool vth_enabled = false;
    double vth_limit_mv = 100.0;
    std::uint64_t metastability_seed = 1;
    double initial_phase_ui = 0.25;
    bool operator==(const LoopSection&) const = default;
};

struct AnalysisSection {
    OffsetRange offsets_mv{};
    int histogram_bins = 128;
    int eye_voltage_bins = 128;
    int record_stride_samples = 64;
    std::size_t min_edges = 10000;
    bool operator==(const AnalysisSection&) const = default;
};

struct ModelSection {
    double amplitude_mv = 100.0;
    double isi_fraction = 0.1;
    double tau1_ui = -0.075;
    double tau3_ui = 0.075;
    double edge_width_ui = 0.6;
    std::vector<std::string> thresholds{"R", "Q", "P"};  ///< level names or millivolts
    int grid = 256;
    std::size_t n_bits = 100000;
    bool operator==(const ModelSection&) const = default;
};

struct ExperimentConfig {
    DataSection data;
    ChannelSection channel;
    LoopSection loop;
    AnalysisSection analysis;
    ModelSection model;

    bool operator==(const ExperimentConfig&) const = default;

    /// Throws ConfigError naming the offending key.
    void validate() const;

    ChannelConfig channel_config() const;
    LoopConfig loop_config() const;
    IsiModelParams model_params() const;
    double ui() const { return 1.0 / data.bitrate_hz; }
};

/// `key = value` lines; '#' starts a comment. Unknown keys, repeated keys and
/// unparsable values throw ConfigError with the line number.
ExperimentConfig parse_config(std::string_view text, std::string_view source_name = "<config>");
ExperimentConfig load_config(const std::string& path);

/// Every key, one per line, values at full precision.
std::string serialize_config(const ExperimentConfig& cfg);

/// SHA-256 of the serialized form, lowercase hex.
std::string config_hash(const ExperimentConfig& cfg);

std::string sha256_hex(std::string_view bytes);

}  // namespace cdrlab
