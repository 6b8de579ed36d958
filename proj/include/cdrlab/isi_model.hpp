#pragma once

#include "cdrlab/stimulus.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

namespace cdrlab {

/// The four transition traces of a strictly-1-bit-ISI eye.
///   X1  falling, settled start   (1,1 -> 0)
///   X2  rising,  settled start   (0,0 -> 1)
///   X3  rising,  unsettled start (1,0 -> 1)
///   X4  falling, unsettled start (0,1 -> 0)
/// Settled-start traces cross mid level late (tau3), unsettled ones early
/// (tau1). X2 and X4 meet at level Q at tau2; X1 and X3 meet at P.
enum class TraceId { X1 = 0, X2 = 1, X3 = 2, X4 = 3 };

inline constexpr std::array<TraceId, 4> kAllTraces{TraceId::X1, TraceId::X2, TraceId::X3, TraceId::X4};

std::string_view to_string(TraceId id);

struct TraceInfo {
    bool rising = false;
    bool settled_start = false;
};

TraceInfo trace_info(TraceId id);

/// Either a transition trace or a non-transition slot at a given level.
struct SlotTrace {
    std::optional<TraceId> trace;  ///< empty -> no transition
    bool high = false;             ///< level of b_cur for non-transitions
};

/// Pattern (b[-2], b[-1], b[0]) -> trace taxonomy.
SlotTrace trace_for_pattern(std::uint8_t b_prev2, std::uint8_t b_prev1, std::uint8_t b_cur);

struct IsiModelParams {
    double ui = 1e-9;
    double amplitude = 0.1;       ///< settled level, volts
    double isi_fraction = 0.1;    ///< unsettled level = amplitude * (1 - 2 * isi_fraction)
    double tau1_ui = -0.075;      ///< mid-level crossing of unsettled-start traces
    double tau3_ui = 0.075;       ///< mid-level crossing of settled-start traces
    double edge_width_ui = 0.6;   ///< raised-cosine transition duration; 0 -> ideal step
};

/// Strictly-1-bit-ISI eye built from raised-cosine transition segments.
/// Each slot runs from the centre of bit b[-1] to the centre of b[0]; times
/// are relative to the nominal transition instant, in seconds. Levels P/Q
/// and tau0/tau2/tau4 follow from the trace geometry.
class OneBitIsiModel {
public:
    /// Throws ConfigError if the segments leave the slot or the tau
    /// ordering is not strict. `allow_degenerate` admits the ideal-step,
    /// single-crossing-time model (tau1 == tau3, edge width 0).
    static OneBitIsiModel build(const IsiModelParams& p, bool allow_degenerate = false);

    const IsiModelParams& params() const noexcept { return p_; }
    double ui() const noexcept { return p_.ui; }
    double level_p() const noexcept { return level_p_; }
    double level_q() const noexcept { return level_q_; }
    double level_r() const noexcept { return 0.0; }
    /// tau0..tau4 in seconds.
    const std::array<double, 5>& tau() const noexcept { return tau_; }
    bool degenerate() const noexcept { return degenerate_; }

    double trace_value(TraceId id, double t) const;
    /// Value of the slot waveform for any 3-bit pattern.
    double slot_value(std::uint8_t b_prev2, std::uint8_t b_prev1, std::uint8_t b_cur, double t) const;

    /// Time where the trace crosses `level`. -inf if the trace is on the far
    /// side of the level for the whole slot (already crossed), +inf if it
    /// never reaches it.
    double crossing_time(TraceId id, double level) const;

    double slot_start() const noexcept { return -0.5 * p_.ui; }
    double slot_end() const noexcept { return 0.5 * p_.ui; }

    /// NRZ waveform whose every slot is the model trace for its pattern.
    /// Bit k occupies [k UI, (k+1) UI); its transition slot is centred at k UI.
    Waveform synthesize(const BitStream& bits, int samples_per_ui) const;

private:
    struct Segment {
        double center = 0.0;
        double width = 0.0;
    };
    double segment_value(double start, double end, const Segment& s, double t) const;
    double segment_crossing(double start, double end, const Segment& s, double level) const;
    double start_level(TraceId id) const;
    double end_level(TraceId id) const;
    const Segment& segment(TraceId id) const;

    IsiModelParams p_{};
    double unsettled_ = 0.0;
    Segment settled_{};
    Segment unsettled_seg_{};
    double level_p_ = 0.0;
    double level_q_ = 0.0;
    std::array<double, 5> tau_{};
    bool degenerate_ = false;
};

}  // namespace cdrlab
