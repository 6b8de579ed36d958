#pragma once

#include "cdrlab/cdrloop.hpp"
#include "cdrlab/isi_model.hpp"
#include "cdrlab/stimulus.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cdrlab {

// ---------------------------------------------------------------------------
// Lock and jitter

struct LockCriteria {
    std::size_t window_edges = 1000;
    std::size_t window_step = 50;
    double max_pk_pk_ui = 0.25;
    double max_drift_ui = 0.2;   ///< |least-squares slope| x window length
};

/// Time of the first falling edge after which every sliding window meets
/// the criteria, or nullopt if the run never settles.
std::optional<double> lock_detect(const SimTrace& trace, const LockCriteria& c = {});

struct JitterReport {
    double pk_pk_ui = 0.0;           ///< max - min of post-lock edge phase
    double quantile_pk_pk_ui = 0.0;  ///< 0.1 % .. 99.9 % spread, informational
    double mean_edge_phase_ui = 0.0;
    double histogram_origin_ui = 0.0;
    double histogram_bin_ui = 0.0;
    std::vector<std::uint64_t> histogram;
    std::size_t n_edges_measured = 0;
    std::size_t warmup_discarded = 0;
    double lock_time = 0.0;

    double pk_pk_percent_ui() const noexcept { return 100.0 * pk_pk_ui; }
};

inline constexpr std::size_t kMinJitterEdges = 10000;

/// Throws LockError (with the drift of the final window) if no lock, and
/// InsufficientDataError if fewer than `min_edges` post-lock edges remain.
JitterReport measure_jitter(const SimTrace& trace, std::size_t min_edges = kMinJitterEdges,
                            const LockCriteria& c = {});

/// Settling of a sampled trace toward its final value, the mean over the
/// last `tail_fraction` of the record. The band is 2 % of the total excursion,
/// widened to 3 sigma of the raw tail when steady-state ripple is larger.
/// The test runs on a moving average over 1 % of the record.
struct SettlingReport {
    double initial = 0.0;
    double final_mean = 0.0;
    double tail_std = 0.0;       ///< raw samples, over the tail window
    double band = 0.0;
    double settling_time = 0.0;  ///< first time after which the trace stays in band
    bool settled = false;        ///< settling_time precedes the tail window
};

SettlingReport settling_report(std::span<const double> time, std::span<const double> value,
                               double tail_fraction = 0.2, double band_fraction = 0.02);

// ---------------------------------------------------------------------------
// Offset sweeps

struct SweepPoint {
    double v_off = 0.0;
    double eff_threshold = 0.0;
    double pk_pk_ui = 0.0;  ///< NaN when the point failed to lock
    bool locked = false;
};

struct SweepCurve {
    std::vector<SweepPoint> points;
    std::string channel_id;
    std::string loop_id;
};

struct SweepOptions {
    std::uint64_t master_seed = 1;
    std::size_t min_edges = kMinJitterEdges;
    LockCriteria lock{};
};

/// Seed for sweep point `index`; independent of execution order.
std::uint64_t point_seed(std::uint64_t master_seed, std::size_t index);

/// One closed-loop run per offset over the same received waveform. Points
/// run in parallel; results are identical to offset_sweep_serial.
SweepCurve offset_sweep(const LoopConfig& cfg, const Waveform& received,
                        std::span<const double> offsets, const SweepOptions& opt = {});
SweepCurve offset_sweep_serial(const LoopConfig& cfg, const Waveform& received,
                               std::span<const double> offsets, const SweepOptions& opt = {});

/// Offsets start, start+step, ... up to stop (inclusive within step/1e6).
std::vector<double> offset_range(double start, double stop, double step);

struct MinimaOptions {
    std::size_t window = 3;                ///< points searched on each side
    double min_relative_prominence = 0.15; ///< rise on both sides / value at the minimum
};

/// Interior points strictly below both locked neighbours that rise by at
/// least `min_relative_prominence` of their own value on both sides within
/// `window` points. Returns indices.
std::vector<std::size_t> local_minima(const SweepCurve& curve, const MinimaOptions& opt = {});
std::size_t global_minimum(const SweepCurve& curve);

// ---------------------------------------------------------------------------
// Markov-chain oracle on the strictly-1-bit-ISI eye

struct OracleOptions {
    int grid = 256;                 ///< cells per UI
    int step_cells = 1;             ///< bang-bang step in cells
    double tolerance = 1e-12;       ///< power-iteration L1 residual
    std::size_t max_iterations = 20'000'000;
    double support_fraction = 0.5;  ///< support = cells with p >= fraction * max p
};

struct OracleResult {
    int grid = 0;
    int step_cells = 1;
    double cell_ui = 0.0;
    std::vector<double> edge_phase_ui;  ///< cell centres relative to nominal transition
    std::vector<double> probability;
    std::vector<double> drift_steps;    ///< expected signed step per bit (+ = delay)
    std::vector<double> p_delay;        ///< per-cell move probabilities
    std::vector<double> p_advance;
    double support_lo_ui = 0.0;
    double support_hi_ui = 0.0;
    double support_width_ui = 0.0;      ///< hi - lo, at least one step
    double residual = 0.0;
    std::size_t iterations = 0;
    bool transitions_lost = false;      ///< some trace never crosses the threshold

    /// Expected max - min edge position over `n_bits` steps started from the
    /// stationary distribution, in UI.
    double expected_pk_pk_ui(std::size_t n_bits) const;
    double expected_pk_pk_ui_serial(std::size_t n_bits) const;
};

OracleResult markov_oracle(const OneBitIsiModel& model, double threshold, const OracleOptions& opt = {});

struct OracleComparison {
    double threshold = 0.0;
    double oracle_support_ui = 0.0;     ///< the oracle's pk-pk
    double oracle_expected_range_ui = 0.0;  ///< independent-pattern range over the measured edges
    double sim_pk_pk_ui = 0.0;          ///< NaN when the simulation did not lock
    double ratio = 0.0;                 ///< sim / support
    bool sim_locked = false;
    bool transitions_lost = false;
    bool regime_ok = true;         ///< proportional path dominant over the run
};

/// Loop used when comparing against the oracle: bang-bang step of exactly one
/// grid cell and an R-C product far longer than the measurement window.
LoopConfig oracle_loop_config(int grid, double ui);

OracleComparison oracle_vs_sim(const OneBitIsiModel& model, double threshold, const LoopConfig& cfg,
                               std::size_t n_bits, std::uint64_t seed,
                               const OracleOptions& opt = {}, int samples_per_ui = kDefaultSamplesPerUi);

}  // namespace cdrlab
