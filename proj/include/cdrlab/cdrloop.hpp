#pragma once

#include "cdrlab/stimulus.hpp"

#include <array>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace cdrlab {

/// Bang-bang phase detector output. ClockEarly asks for a delay (DN),
/// ClockLate for an advance (UP).
enum class PdDecision { ClockEarly, ClockLate, Hold };

enum class ThresholdAction { Increase, Decrease, None };

std::string_view to_string(PdDecision d);
std::string_view to_string(ThresholdAction a);

/// Samples around one data transition: centre samples on consecutive rising
/// edges (b_prev2, b_prev1, b_cur) and the edge sample b_mid from the falling
/// edge between b_prev1 and b_cur.
struct PhaseSamples {
    std::uint8_t b_prev2 = 0;
    std::uint8_t b_prev1 = 0;
    std::uint8_t b_mid = 0;
    std::uint8_t b_cur = 0;

    /// Table row index b[-2] b[-1] b_m b[0], MSB first.
    int row() const noexcept { return (b_prev2 << 3) | (b_prev1 << 2) | (b_mid << 1) | b_cur; }
    static PhaseSamples from_row(int row) noexcept;
};

/// Inputs within this distance of the threshold resolve by a fair coin.
inline constexpr double kMetastabilityBand = 0.1e-3;

/// Decision flip-flop with metastability; owns its seeded coin.
class Comparator {
public:
    explicit Comparator(std::uint64_t seed) : rng_(seed) {}
    std::uint8_t sample(double v, double threshold);

private:
    std::mt19937_64 rng_;
};

/// Switching threshold seen by the edge sampler F2. An offset added at the
/// D input moves the switching point to -v_off; the tracking feedback is
/// subtracted at the same summing node, so it enters with the opposite sign.
double effective_threshold(double v_off, double v_th_fb);

PdDecision alexander_decide(std::uint8_t a, std::uint8_t b, std::uint8_t c);

/// UP = !b[-2] . b_m . (b[-1] ^ b[0]),  DN = !b[-2] . !b_m . (b[-1] ^ b[0])
ThresholdAction threshold_decide(const PhaseSamples& s);

/// Same decision read from the 16-row sequence table.
ThresholdAction threshold_decide_table(const PhaseSamples& s);

struct LoopConfig {
    double f0 = 1e9;              ///< VCO free-running frequency, Hz
    double kvco = 78.125e6;       ///< Hz per volt
    double icp = 100e-6;          ///< charge-pump current, A
    double r_filter = 1e3;        ///< ohms
    double c_filter = 10e-9;      ///< farads
    double v_off = 0.0;           ///< static offset at the F2 input, volts
    double vth_gain = 0.0;        ///< threshold integrator step, volts per action
    bool vth_enabled = false;
    double vth_limit = 0.1;       ///< |v_th_fb| clamp, volts (eye amplitude)
    std::uint64_t metastability_seed = 1;
    double initial_phase_ui = 0.25;  ///< VCO phase at t = 0, cycles

    /// Proportional phase step per decision, in UI (cycles of f0).
    double bang_bang_step_ui() const noexcept { return kvco * icp * r_filter / (2.0 * f0); }
    void validate() const;
};

/// Charge pump into a series R-C. The pump is either off or sources
/// +/- icp; v_c = v_cap + i R.
class LoopFilter {
public:
    LoopFilter(double icp, double r, double c) : icp_(icp), r_(r), c_(c) {}

    void set_decision(PdDecision d) noexcept;
    void release() noexcept { current_ = 0.0; }
    double current() const noexcept { return current_; }
    double v_cap() const noexcept { return v_cap_; }
    double v_c() const noexcept { return v_cap_ + current_ * r_; }
    /// dv_c/dt while the pump is in its present state.
    double slope() const noexcept { return current_ / c_; }
    void advance(double dt) noexcept { v_cap_ += current_ * dt / c_; }
    void set_v_cap(double v) noexcept { v_cap_ = v; }

private:
    double icp_, r_, c_;
    double current_ = 0.0;
    double v_cap_ = 0.0;
};

struct ClockEdge {
    double time = 0.0;
    bool rising = false;
};

/// Phase in cycles; rising edge at phase == 0 (mod 1), falling at 0.5.
class Vco {
public:
    Vco(double f0, double kvco, double initial_phase_cycles = 0.0);

    double phase() const noexcept { return phase_; }
    double frequency(double v_c) const noexcept { return f0_ + kvco_ * v_c; }

    /// Time to accumulate `cycles` with v_c(t) = v0 + slope * t.
    /// Throws SimulationFault if the frequency reaches zero first.
    double time_to(double cycles, double v0, double slope) const;

    /// Phase gained over dt with linear v_c.
    double phase_gain(double dt, double v0, double slope) const noexcept {
        return (f0_ + kvco_ * v0) * dt + 0.5 * kvco_ * slope * dt * dt;
    }

    /// Cycles until the next half-cycle boundary.
    double cycles_to_next_edge() const noexcept;

    /// Advance over (t, t + dt] with v_c ramping linearly from v_start to
    /// v_end; returns the clock edges crossed.
    std::vector<ClockEdge> advance(double t, double dt, double v_start, double v_end);

    /// Move phase forward by `cycles`, wrapping into [0, 1).
    void rotate(double cycles) noexcept;

    /// Land exactly on the edge that was just reached.
    void snap_to_edge(bool rising) noexcept { phase_ = rising ? 0.0 : 0.5; }

private:
    double f0_, kvco_;
    double phase_;
};

class ThresholdIntegrator {
public:
    ThresholdIntegrator(double gain, double limit) : gain_(gain), limit_(limit) {}
    void apply(ThresholdAction a) noexcept;
    double value() const noexcept { return value_; }

private:
    double gain_, limit_;
    double value_ = 0.0;
};

struct RunOptions {
    int record_stride_samples = 64;  ///< decimation of the v_c / v_th_fb record
                                     ///< (v_c is averaged over each stride)
};

struct SimTrace {
    double ui = 0.0;
    std::vector<double> falling_edges;
    std::vector<double> rising_edges;
    std::vector<std::uint8_t> recovered_bits;
    std::vector<double> record_time;
    std::vector<double> record_v_c;
    std::vector<double> record_v_th_fb;
    std::array<std::uint64_t, 3> pd_counts{};   ///< ClockEarly, ClockLate, Hold
    std::array<std::uint64_t, 3> vth_counts{};  ///< Increase, Decrease, None
    bool loss_of_lock = false;
    double final_v_th_fb = 0.0;
    double final_v_cap = 0.0;
};

/// Event-driven Alexander-PD CDR over a received waveform. Deterministic for
/// a given (cfg, data). Loss of lock is flagged in the trace, not thrown.
SimTrace run_cdr(const LoopConfig& cfg, const Waveform& data, const RunOptions& opt = {});

/// Falling-edge phase relative to the data grid, e_k = t_k / UI - k, in UI.
std::vector<double> edge_phase_error(const SimTrace& trace);

}  // namespace cdrlab
