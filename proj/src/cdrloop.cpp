#include "cdrlab/cdrloop.hpp"

#include "cdrlab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace cdrlab {

std::string_view to_string(PdDecision d) {
    switch (d) {
    case PdDecision::ClockEarly: return "ClockEarly";
    case PdDecision::ClockLate: return "ClockLate";
    case PdDecision::Hold: return "Hold";
    }
    return "?";
}

std::string_view to_string(ThresholdAction a) {
    switch (a) {
    case ThresholdAction::Increase: return "Increase";
    case ThresholdAction::Decrease: return "Decrease";
    case ThresholdAction::None: return "None";
    }
    return "?";
}

PhaseSamples PhaseSamples::from_row(int row) noexcept {
    return PhaseSamples{static_cast<std::uint8_t>((row >> 3) & 1), static_cast<std::uint8_t>((row >> 2) & 1),
                        static_cast<std::uint8_t>((row >> 1) & 1), static_cast<std::uint8_t>(row & 1)};
}

std::uint8_t Comparator::sample(double v, double threshold) {
    const double d = v - threshold;
    if (std::abs(d) < kMetastabilityBand) return static_cast<std::uint8_t>(rng_() >> 63);
    return d > 0.0 ? 1 : 0;
}

double effective_threshold(double v_off, double v_th_fb) { return v_th_fb - v_off; }

PdDecision alexander_decide(std::uint8_t a, std::uint8_t b, std::uint8_t c) {
    a = a ? 1 : 0;
    b = b ? 1 : 0;
    c = c ? 1 : 0;
    if (a == c) return PdDecision::Hold;  // no transition, or b disagrees with both
    return a == b ? PdDecision::ClockEarly : PdDecision::ClockLate;
}

ThresholdAction threshold_decide(const PhaseSamples& s) {
    const bool nb2 = !s.b_prev2;
    const bool bm = s.b_mid != 0;
    const bool edge = (s.b_prev1 != 0) != (s.b_cur != 0);
    const bool up = nb2 && bm && edge;
    const bool dn = nb2 && !bm && edge;
    if (up) return ThresholdAction::Increase;
    if (dn) return ThresholdAction::Decrease;
    return ThresholdAction::None;
}

ThresholdAction threshold_decide_table(const PhaseSamples& s) {
    using A = ThresholdAction;
    // Rows b[-2] b[-1] b_m b[0] = 0000 .. 1111. Rows whose decision is
    // possible but unused (1001, 1011, 1100) map to None.
    static constexpr std::array<A, 16> table{
        A::None,     A::Decrease, A::None, A::Increase,  // 000x, 001x
        A::Decrease, A::None,     A::Increase, A::None,  // 010x, 011x
        A::None,     A::None,     A::None, A::None,      // 100x, 101x
        A::None,     A::None,     A::None, A::None,      // 110x, 111x
    };
    return table[static_cast<std::size_t>(s.row())];
}

void LoopConfig::validate() const {
    const auto fail = [](const char* what) { throw ConfigError(std::string("loop: ") + what); };
    if (!(f0 > 0.0)) fail("f0 must be > 0");
    if (!(kvco > 0.0)) fail("kvco must be > 0");
    if (!(icp > 0.0)) fail("icp must be > 0");
    if (!(r_filter > 0.0)) fail("r_filter must be > 0");
    if (!(c_filter > 0.0)) fail("c_filter must be > 0");
    if (!(vth_gain >= 0.0)) fail("vth_gain must be >= 0");
    if (!(vth_limit > 0.0)) fail("vth_limit must be > 0");
}

void LoopFilter::set_decision(PdDecision d) noexcept {
    switch (d) {
    case PdDecision::ClockLate: current_ = icp_; break;
    case PdDecision::ClockEarly: current_ = -icp_; break;
    case PdDecision::Hold: current_ = 0.0; break;
    }
}

Vco::Vco(double f0, double kvco, double initial_phase_cycles) : f0_(f0), kvco_(kvco), phase_(0.0) {
    rotate(initial_phase_cycles);
}

void Vco::rotate(double cycles) noexcept {
    phase_ += cycles;
    phase_ -= std::floor(phase_);
}

double Vco::cycles_to_next_edge() const noexcept {
    const double target = phase_ < 0.5 ? 0.5 : 1.0;
    return target - phase_;
}

double Vco::time_to(double cycles, double v0, double slope) const {
    const double a = f0_ + kvco_ * v0;
    const double g = kvco_ * slope;
    if (!(a > 0.0)) {
        std::ostringstream os;
        os << "VCO frequency " << a << " Hz is not positive (v_c = " << v0 << " V)";
        throw SimulationFault(os.str());
    }
    // a t + g t^2 / 2 = cycles, smallest positive root in a cancellation-free form.
    const double disc = a * a + 2.0 * g * cycles;
    if (disc < 0.0) throw SimulationFault("VCO frequency reaches zero before the next edge");
    return 2.0 * cycles / (a + std::sqrt(disc));
}

std::vector<ClockEdge> Vco::advance(double t, double dt, double v_start, double v_end) {
    if (!(dt > 0.0)) throw SimulationFault("Vco::advance: dt must be > 0");
    const double slope = (v_end - v_start) / dt;
    std::vector<ClockEdge> edges;
    double elapsed = 0.0;
    for (;;) {
        const double v0 = v_start + slope * elapsed;
        const double need = cycles_to_next_edge();
        const double remaining = dt - elapsed;
        if (phase_gain(remaining, v0, slope) < need) {
            if (!(frequency(v_end) > 0.0)) throw SimulationFault("VCO frequency is not positive");
            rotate(phase_gain(remaining, v0, slope));
            return edges;
        }
        const double tau = time_to(need, v0, slope);
        elapsed += tau;
        const bool rising = phase_ >= 0.5;
        phase_ = rising ? 0.0 : 0.5;
        edges.push_back({t + elapsed, rising});
    }
}

void ThresholdIntegrator::apply(ThresholdAction a) noexcept {
    if (a == ThresholdAction::Increase) value_ += gain_;
    else if (a == ThresholdAction::Decrease) value_ -= gain_;
    value_ = std::clamp(value_, -limit_, limit_);
}

namespace {

// Edge drift beyond this, sustained over the second half of a run, counts
// as loss of lock.
constexpr double kLossOfLockUi = 0.5;

bool detect_loss_of_lock(const SimTrace& tr) {
    const auto e = edge_phase_error(tr);
    if (e.size() < 4) return true;
    const auto begin = e.begin() + static_cast<std::ptrdiff_t>(e.size() / 2);
    const auto [lo, hi] = std::minmax_element(begin, e.end());
    return *hi - *lo > kLossOfLockUi;
}

}  // namespace

SimTrace run_cdr(const LoopConfig& cfg, const Waveform& data, const RunOptions& opt) {
    cfg.validate();
    if (opt.record_stride_samples < 1) throw ConfigError("record stride must be >= 1");

    SimTrace tr;
    tr.ui = data.ui();
    const std::size_t n_bits = data.size() / static_cast<std::size_t>(data.samples_per_ui());
    tr.falling_edges.reserve(n_bits + 8);
    tr.rising_edges.reserve(n_bits + 8);
    tr.recovered_bits.reserve(n_bits + 8);

    Comparator center_ff(cfg.metastability_seed);
    Comparator edge_ff(cfg.metastability_seed ^ 0x9e3779b97f4a7c15ULL);
    LoopFilter filter(cfg.icp, cfg.r_filter, cfg.c_filter);
    Vco vco(cfg.f0, cfg.kvco, cfg.initial_phase_ui);
    ThresholdIntegrator vth(cfg.vth_enabled ? cfg.vth_gain : 0.0, cfg.vth_limit);

    // The pump stays on for half a nominal clock period after each decision.
    const double pump_window = 0.5 / cfg.f0;
    double pump_off_at = -1.0;

    PhaseSamples hist{};
    int centers_seen = 0;
    std::uint8_t pending_mid = 0;
    bool have_mid = false;

    const double dt = data.sample_period();
    double t = data.t0();
    const double t_end = data.t0() + dt * static_cast<double>(data.size() - 1);

    std::size_t step = 0;
    // Integral of v_c since the last record point; the record holds the
    // stride average so the pump ripple does not alias into it.
    double vc_area = 0.0;
    double record_from = t;
    while (t < t_end) {
        const double step_end = std::min(t + dt, t_end);
        while (t < step_end) {
            const double v0 = filter.v_c();
            const double slope = filter.slope();
            double seg_end = step_end;
            if (filter.current() != 0.0 && pump_off_at > t && pump_off_at < seg_end) seg_end = pump_off_at;

            const double need = vco.cycles_to_next_edge();
            const double gain = vco.phase_gain(seg_end - t, v0, slope);
            if (gain < need) {
                if (!(vco.frequency(v0 + slope * (seg_end - t)) > 0.0))
                    throw SimulationFault("VCO frequency is not positive");
                vco.rotate(gain);
                vc_area += (v0 + 0.5 * slope * (seg_end - t)) * (seg_end - t);
                filter.advance(seg_end - t);
                t = seg_end;
                if (filter.current() != 0.0 && t >= pump_off_at) filter.release();
                continue;
            }

            const double tau = vco.time_to(need, v0, slope);
            vc_area += (v0 + 0.5 * slope * tau) * tau;
            filter.advance(tau);
            t += tau;
            const bool rising = vco.phase() >= 0.5;
            vco.snap_to_edge(rising);

            const double v = data.value_at(t);
            const double vth_eff = effective_threshold(cfg.v_off, vth.value());
            if (!rising) {
                pending_mid = edge_ff.sample(v, vth_eff);
                have_mid = true;
                tr.falling_edges.push_back(t);
                continue;
            }

            const std::uint8_t b = center_ff.sample(v, 0.0);
            tr.rising_edges.push_back(t);
            tr.recovered_bits.push_back(b);
            hist.b_prev2 = hist.b_prev1;
            hist.b_prev1 = hist.b_cur;
            hist.b_cur = b;
            hist.b_mid = pending_mid;
            ++centers_seen;
            if (centers_seen >= 2 && have_mid) {
                const PdDecision d = alexander_decide(hist.b_prev1, hist.b_mid, hist.b_cur);
                ++tr.pd_counts[static_cast<std::size_t>(d)];
                filter.set_decision(d);
                pump_off_at = t + pump_window;
                if (centers_seen >= 3) {
                    const ThresholdAction a = threshold_decide(hist);
                    ++tr.vth_counts[static_cast<std::size_t>(a)];
                    vth.apply(a);
                }
            }
            have_mid = false;
        }
        ++step;
        if (step % static_cast<std::size_t>(opt.record_stride_samples) == 0) {
            tr.record_time.push_back(t);
            tr.record_v_c.push_back(t > record_from ? vc_area / (t - record_from) : filter.v_c());
            vc_area = 0.0;
            record_from = t;
            tr.record_v_th_fb.push_back(vth.value());
        }
    }
    tr.final_v_th_fb = vth.value();
    tr.final_v_cap = filter.v_cap();
    tr.loss_of_lock = detect_loss_of_lock(tr);
    return tr;
}

std::vector<double> edge_phase_error(const SimTrace& trace) {
    std::vector<double> e(trace.falling_edges.size());
    for (std::size_t k = 0; k < e.size(); ++k)
        e[k] = trace.falling_edges[k] / trace.ui - static_cast<double>(k);
    return e;
}

}  // namespace cdrlab
