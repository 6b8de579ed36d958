#include "cdrlab/isi_model.hpp"

#include "cdrlab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace cdrlab {

std::string_view to_string(TraceId id) {
    switch (id) {
    case TraceId::X1: return "X1";
    case TraceId::X2: return "X2";
    case TraceId::X3: return "X3";
    case TraceId::X4: return "X4";
    }
    return "?";
}

TraceInfo trace_info(TraceId id) {
    switch (id) {
    case TraceId::X1: return {false, true};
    case TraceId::X2: return {true, true};
    case TraceId::X3: return {true, false};
    case TraceId::X4: return {false, false};
    }
    return {};
}

SlotTrace trace_for_pattern(std::uint8_t b_prev2, std::uint8_t b_prev1, std::uint8_t b_cur) {
    const bool p2 = b_prev2 != 0, p1 = b_prev1 != 0, c = b_cur != 0;
    if (p1 == c) return SlotTrace{std::nullopt, c};
    const bool settled = p2 == p1;
    if (c) return SlotTrace{settled ? TraceId::X2 : TraceId::X3, c};
    return SlotTrace{settled ? TraceId::X1 : TraceId::X4, c};
}

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

double OneBitIsiModel::segment_value(double start, double end, const Segment& s, double t) const {
    const double lo = s.center - s.width / 2.0;
    const double hi = s.center + s.width / 2.0;
    if (t < lo) return start;
    if (t > hi) return end;
    if (s.width == 0.0) return 0.5 * (start + end);
    const double x = (t - lo) / s.width;
    return start + (end - start) * 0.5 * (1.0 - std::cos(std::numbers::pi * x));
}

double OneBitIsiModel::segment_crossing(double start, double end, const Segment& s,
                                        double level) const {
    const bool rising = end > start;
    if (rising) {
        if (level < start) return -kInf;
        if (level > end) return kInf;
    } else {
        if (level > start) return -kInf;
        if (level < end) return kInf;
    }
    if (s.width == 0.0) return s.center;
    const double frac = (level - start) / (end - start);
    const double x = std::acos(std::clamp(1.0 - 2.0 * frac, -1.0, 1.0)) / std::numbers::pi;
    return s.center - s.width / 2.0 + x * s.width;
}

double OneBitIsiModel::start_level(TraceId id) const {
    const double a = p_.amplitude;
    switch (id) {
    case TraceId::X1: return a;
    case TraceId::X2: return -a;
    case TraceId::X3: return -unsettled_;
    case TraceId::X4: return unsettled_;
    }
    return 0.0;
}

double OneBitIsiModel::end_level(TraceId id) const {
    return trace_info(id).rising ? unsettled_ : -unsettled_;
}

const OneBitIsiModel::Segment& OneBitIsiModel::segment(TraceId id) const {
    return trace_info(id).settled_start ? settled_ : unsettled_seg_;
}

double OneBitIsiModel::trace_value(TraceId id, double t) const {
    return segment_value(start_level(id), end_level(id), segment(id), t);
}

double OneBitIsiModel::crossing_time(TraceId id, double level) const {
    return segment_crossing(start_level(id), end_level(id), segment(id), level);
}

double OneBitIsiModel::slot_value(std::uint8_t b_prev2, std::uint8_t b_prev1, std::uint8_t b_cur,
                                  double t) const {
    const SlotTrace st = trace_for_pattern(b_prev2, b_prev1, b_cur);
    if (st.trace) return trace_value(*st.trace, t);
    const double sign = st.high ? 1.0 : -1.0;
    if ((b_prev2 != 0) == (b_prev1 != 0)) return sign * p_.amplitude;
    // Unsettled level relaxing to the settled rail.
    return segment_value(sign * unsettled_, sign * p_.amplitude, unsettled_seg_, t);
}

OneBitIsiModel OneBitIsiModel::build(const IsiModelParams& p, bool allow_degenerate) {
    const auto fail = [](const std::string& why) { throw ConfigError("OneBitIsiModel: " + why); };
    if (!(p.ui > 0.0)) fail("ui must be > 0");
    if (!(p.amplitude > 0.0)) fail("amplitude must be > 0");
    if (!(p.isi_fraction >= 0.0 && p.isi_fraction < 0.5)) fail("isi_fraction must be in [0, 0.5)");
    if (!(p.edge_width_ui >= 0.0)) fail("edge width must be >= 0");

    OneBitIsiModel m;
    m.p_ = p;
    m.unsettled_ = p.amplitude * (1.0 - 2.0 * p.isi_fraction);
    const double w = p.edge_width_ui * p.ui;
    const double tau1 = p.tau1_ui * p.ui;
    const double tau3 = p.tau3_ui * p.ui;

    if (p.edge_width_ui == 0.0 || p.tau1_ui == p.tau3_ui) {
        if (!(allow_degenerate && p.edge_width_ui == 0.0 && p.tau1_ui == p.tau3_ui))
            fail("tau ordering must be strict (tau1 < tau3) with a finite edge width");
        m.degenerate_ = true;
        m.settled_ = {tau1, 0.0};
        m.unsettled_seg_ = {tau1, 0.0};
        m.tau_.fill(tau1);
        if (std::abs(tau1) >= 0.5 * p.ui) fail("transition outside the slot");
        return m;
    }
    if (!(tau1 < tau3)) fail("tau ordering violated: tau1 must precede tau3");

    // Unsettled traces are antisymmetric about their centre, so they cross
    // mid level at the segment centre. Settled traces cross at fraction
    // acos((a_u - A) / (A + a_u)) / pi of the way through the segment.
    m.unsettled_seg_ = {tau1, w};
    const double A = p.amplitude;
    const double x = std::acos((m.unsettled_ - A) / (A + m.unsettled_)) / std::numbers::pi;
    m.settled_ = {tau3 + w / 2.0 - x * w, w};

    for (const Segment* s : {&m.settled_, &m.unsettled_seg_}) {
        if (s->center - s->width / 2.0 < m.slot_start() - 1e-15 * p.ui ||
            s->center + s->width / 2.0 > m.slot_end() + 1e-15 * p.ui) {
            std::ostringstream os;
            os << "transition segment [" << (s->center - s->width / 2.0) / p.ui << ", "
               << (s->center + s->width / 2.0) / p.ui << "] UI leaves the slot [-0.5, 0.5] UI";
            fail(os.str());
        }
    }

    // X2 (rising settled) meets X4 (falling unsettled) at (tau2, Q).
    double lo = tau1, hi = tau3;
    const auto gap = [&](double t) { return m.trace_value(TraceId::X2, t) - m.trace_value(TraceId::X4, t); };
    if (!(gap(lo) < 0.0 && gap(hi) > 0.0)) fail("settled and unsettled traces do not intersect");
    for (int i = 0; i < 200 && hi - lo > 1e-18; ++i) {
        const double mid = 0.5 * (lo + hi);
        (gap(mid) < 0.0 ? lo : hi) = mid;
    }
    const double tau2 = 0.5 * (lo + hi);
    m.level_q_ = m.trace_value(TraceId::X2, tau2);
    m.level_p_ = -m.level_q_;
    m.tau_ = {m.crossing_time(TraceId::X3, m.level_q_), tau1, tau2, tau3,
              m.crossing_time(TraceId::X1, m.level_q_)};
    for (int i = 0; i < 4; ++i) {
        if (!(m.tau_[i] < m.tau_[i + 1])) fail("derived tau ordering is not strict");
    }
    return m;
}

Waveform OneBitIsiModel::synthesize(const BitStream& bits, int samples_per_ui) const {
    if (bits.bits.empty()) throw ConfigError("synthesize: empty bit stream");
    if (samples_per_ui < kMinSamplesPerUi) throw ConfigError("synthesize: samples_per_ui too small");
    const auto n = static_cast<std::ptrdiff_t>(bits.size());
    const auto bit = [&](std::ptrdiff_t k) {
        return bits.bits[static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(k, 0, n - 1))];
    };
    const double dt = p_.ui / samples_per_ui;
    std::vector<double> v(bits.size() * static_cast<std::size_t>(samples_per_ui));
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double t = (static_cast<double>(i) + 0.5) * dt;
        const auto k = static_cast<std::ptrdiff_t>(std::floor(t / p_.ui + 0.5));
        const double local = t - static_cast<double>(k) * p_.ui;
        v[i] = slot_value(bit(k - 2), bit(k - 1), bit(k), local);
    }
    return Waveform(dt, dt / 2.0, std::move(v), samples_per_ui);
}

}  // namespace cdrlab
