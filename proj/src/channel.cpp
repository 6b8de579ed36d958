#include "cdrlab/channel.hpp"

#include "cdrlab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>

#include <omp.h>

namespace cdrlab {

std::string_view to_string(ChannelPreset p) {
    return p == ChannelPreset::HighBandwidth ? "high-bandwidth" : "moderate-bandwidth";
}

ChannelPreset channel_preset_from_string(std::string_view name) {
    if (name == "high-bandwidth") return ChannelPreset::HighBandwidth;
    if (name == "moderate-bandwidth") return ChannelPreset::ModerateBandwidth;
    throw ConfigError("unknown channel preset '" + std::string(name) + "'");
}

ChannelConfig ChannelConfig::ladder(double cutoff_scale, double bitrate_hz, double fast_ratio, double dominant_q) {
    // One heavily damped section at the base cutoff gives a dominant real
    // pole, so ISI decays geometrically bit to bit. The remaining sections
    // sit fast_ratio times higher, spread by 5 % each, and only round the
    // edges.
    ChannelConfig cfg;
    cfg.sections.reserve(kLadderSections);
    const double base = cutoff_scale * bitrate_hz;
    cfg.sections.push_back({base, dominant_q});
    for (int k = 1; k < kLadderSections; ++k)
        cfg.sections.push_back({fast_ratio * base * (1.0 + 0.05 * (k - 1)), kLadderFastQ});
    return cfg;
}

ChannelConfig ChannelConfig::from_preset(ChannelPreset preset, double bitrate_hz) {
    const double scale = preset == ChannelPreset::HighBandwidth ? kHighBandwidthCutoffScale
                                                                : kModerateBandwidthCutoffScale;
    ChannelConfig cfg = ladder(scale, bitrate_hz);
    cfg.preset = preset;
    return cfg;
}

std::string ChannelConfig::describe() const {
    std::ostringstream os;
    if (preset) os << to_string(*preset) << ' ';
    os << sections.size() << " sections";
    return os.str();
}

namespace {

struct Biquad {
    double b0, b1, b2, a1, a2;
};

Biquad discretise(const SecondOrderSection& s, double dt, std::size_t index) {
    const auto fail = [&](const std::string& why) {
        std::ostringstream os;
        os << "channel section " << index << " (f0=" << s.natural_frequency_hz
           << " Hz, Q=" << s.quality_factor << "): " << why;
        throw ConfigError(os.str());
    };
    if (!(s.natural_frequency_hz > 0.0)) fail("natural frequency must be > 0");
    if (!(s.quality_factor > 0.0)) fail("quality factor must be > 0");
    const double w0 = 2.0 * std::numbers::pi * s.natural_frequency_hz;
    const double half = w0 * dt / 2.0;
    if (!(half < std::numbers::pi / 2.0 * 0.999)) fail("natural frequency at or above Nyquist");

    // Bilinear transform, prewarped at w0.
    const double k = w0 / std::tan(half);
    const double k2 = k * k;
    const double w02 = w0 * w0;
    const double kw = k * w0 / s.quality_factor;
    const double a0 = k2 + kw + w02;
    Biquad q{w02 / a0, 2.0 * w02 / a0, w02 / a0, (2.0 * w02 - 2.0 * k2) / a0, (k2 - kw + w02) / a0};

    // Poles of z^2 + a1 z + a2.
    const std::complex<double> disc = std::sqrt(std::complex<double>(q.a1 * q.a1 - 4.0 * q.a2));
    const double r1 = std::abs((-q.a1 + disc) / 2.0);
    const double r2 = std::abs((-q.a1 - disc) / 2.0);
    if (!(r1 < 1.0 && r2 < 1.0)) fail("discretised poles outside the unit circle");
    return q;
}

void run_biquad(const Biquad& q, std::vector<double>& x) {
    double s1 = 0.0, s2 = 0.0;  // transposed direct form II
    for (double& v : x) {
        const double in = v;
        const double out = q.b0 * in + s1;
        s1 = q.b1 * in - q.a1 * out + s2;
        s2 = q.b2 * in - q.a2 * out;
        v = out;
    }
}

void append_crossings(const Waveform& w, double level, std::size_t begin, std::size_t end,
                      std::vector<double>& out) {
    const auto s = w.samples();
    const double dt = w.sample_period();
    for (std::size_t i = begin; i < end; ++i) {
        const bool a = s[i] >= level;
        const bool b = s[i + 1] >= level;
        if (a == b) continue;
        const double frac = (level - s[i]) / (s[i + 1] - s[i]);
        out.push_back(w.time_at(i) + frac * dt);
    }
}

// A sample sitting exactly on the level produces two coincident entries
// (down-touch-up); those are tangencies, not crossings.
std::vector<double> drop_touches(std::vector<double> t) {
    std::vector<double> out;
    out.reserve(t.size());
    for (double x : t) {
        if (!out.empty() && x <= out.back()) {
            out.pop_back();
            continue;
        }
        out.push_back(x);
    }
    return out;
}

}  // namespace

Waveform apply_channel(const Waveform& w, const ChannelConfig& cfg) {
    if (cfg.sections.size() > kMaxChannelSections)
        throw ConfigError("channel: at most " + std::to_string(kMaxChannelSections) + " sections");
    std::vector<Biquad> stages;
    stages.reserve(cfg.sections.size());
    for (std::size_t i = 0; i < cfg.sections.size(); ++i)
        stages.push_back(discretise(cfg.sections[i], w.sample_period(), i));

    std::vector<double> x(w.samples().begin(), w.samples().end());
    for (const auto& q : stages) run_biquad(q, x);
    return Waveform(w.sample_period(), w.t0(), std::move(x), w.samples_per_ui());
}

std::vector<double> crossing_times_serial(const Waveform& w, double level) {
    std::vector<double> out;
    if (w.size() >= 2) append_crossings(w, level, 0, w.size() - 1, out);
    return drop_touches(std::move(out));
}

std::vector<double> crossing_times(const Waveform& w, double level) {
    if (w.size() < 2) return {};
    const std::size_t pairs = w.size() - 1;
    const int nthreads = omp_get_max_threads();
    std::vector<std::vector<double>> parts(static_cast<std::size_t>(nthreads));
#pragma omp parallel num_threads(nthreads)
    {
        const auto tid = static_cast<std::size_t>(omp_get_thread_num());
        const std::size_t chunk = (pairs + nthreads - 1) / nthreads;
        const std::size_t begin = std::min(pairs, tid * chunk);
        const std::size_t end = std::min(pairs, begin + chunk);
        append_crossings(w, level, begin, end, parts[tid]);
    }
    std::vector<double> all;
    for (auto& p : parts) all.insert(all.end(), p.begin(), p.end());
    return drop_touches(std::move(all));
}

std::vector<Cluster> find_clusters(std::span<const double> counts, const ClusterOptions& opt) {
    const std::size_t n = counts.size();
    if (n == 0) return {};
    const int half = std::max(0, opt.smoothing_width / 2);

    std::vector<double> smooth(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int d = -half; d <= half; ++d) {
            const auto j = static_cast<std::ptrdiff_t>(i) + d;
            if (opt.circular) {
                acc += counts[static_cast<std::size_t>((j % static_cast<std::ptrdiff_t>(n) + n) % n)];
            } else if (j >= 0 && j < static_cast<std::ptrdiff_t>(n)) {
                acc += counts[static_cast<std::size_t>(j)];
            }
        }
        smooth[i] = acc;
    }

    double total = 0.0;
    for (double c : counts) total += c;
    if (total <= 0.0) return {};

    // Start scanning just after an empty bin so circular runs are not split.
    std::size_t origin = 0;
    if (opt.circular) {
        const auto it = std::find(smooth.begin(), smooth.end(), 0.0);
        if (it == smooth.end()) {
            Cluster all{0, n - 1, total, 0.0};
            double wsum = 0.0;
            for (std::size_t i = 0; i < n; ++i) wsum += counts[i] * static_cast<double>(i);
            all.center_bin = wsum / total;
            return {all};
        }
        origin = static_cast<std::size_t>(it - smooth.begin());
    }

    std::vector<Cluster> raw;
    bool in_run = false;
    std::size_t gap = 0;
    Cluster cur{};
    double wsum = 0.0;
    const auto close = [&] {
        if (cur.mass > 0.0) {
            double c = wsum / cur.mass;
            if (opt.circular) c = std::fmod(c, static_cast<double>(n));
            cur.center_bin = c;
            raw.push_back(cur);
        }
        in_run = false;
    };
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t i = opt.circular ? (origin + k) % n : k;
        const double unwrapped = static_cast<double>(opt.circular ? origin + k : k);
        if (smooth[i] > 0.0) {
            if (!in_run) {
                cur = Cluster{i, i, 0.0, 0.0};
                wsum = 0.0;
                in_run = true;
            }
            cur.last_bin = i;
            cur.mass += counts[i];
            wsum += counts[i] * unwrapped;
            gap = 0;
        } else if (in_run) {
            if (++gap >= static_cast<std::size_t>(opt.min_gap_bins)) close();
        }
    }
    if (in_run) close();

    std::vector<Cluster> out;
    for (const auto& c : raw)
        if (c.mass >= opt.min_mass_fraction * total) out.push_back(c);
    return out;
}

CrossingHistogram crossing_histogram(std::span<const double> times, double ui, int bins) {
    if (times.size() < kMinCrossingsForClusters)
        throw InsufficientDataError("crossing_histogram: " + std::to_string(times.size()) +
                                    " crossings, need at least " +
                                    std::to_string(kMinCrossingsForClusters));
    if (bins < 8) throw ConfigError("crossing_histogram: need at least 8 bins");
    CrossingHistogram h;
    h.ui = ui;
    h.n_crossings = times.size();
    h.counts.assign(static_cast<std::size_t>(bins), 0);
    for (double t : times) {
        const double x = t / ui;
        double ph = x - std::floor(x);
        // Crossings on the UI grid land a rounding error either side of it.
        if (1.0 - ph < 1e-9) ph = 0.0;
        auto b = static_cast<std::size_t>(ph * bins);
        if (b >= h.counts.size()) b = h.counts.size() - 1;
        ++h.counts[b];
    }
    std::vector<double> c(h.counts.begin(), h.counts.end());
    ClusterOptions opt;
    opt.circular = true;
    const auto clusters = find_clusters(c, opt);
    h.cluster_count = static_cast<int>(clusters.size());
    for (const auto& cl : clusters) {
        h.cluster_centers.push_back((cl.center_bin + 0.5) / bins * ui);
        h.cluster_fractions.push_back(cl.mass / static_cast<double>(times.size()));
    }
    return h;
}

std::uint64_t EyeDiagram::total() const {
    std::uint64_t s = 0;
    for (auto c : counts) s += c;
    return s;
}

double EyeDiagram::voltage_of_bin(int v) const {
    return v_min + (v + 0.5) * (v_max - v_min) / voltage_bins;
}

double EyeDiagram::time_ui_of_bin(int t) const { return (t + 0.5) * 2.0 / time_bins; }

std::vector<double> EyeDiagram::column(int t) const {
    std::vector<double> col(static_cast<std::size_t>(voltage_bins));
    for (int v = 0; v < voltage_bins; ++v) col[static_cast<std::size_t>(v)] = static_cast<double>(at(t, v));
    return col;
}

void EyeDiagram::merge(const EyeDiagram& other) {
    if (other.time_bins != time_bins || other.voltage_bins != voltage_bins ||
        other.v_min != v_min || other.v_max != v_max)
        throw ConfigError("EyeDiagram::merge: grid mismatch");
    for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
}

namespace {

EyeDiagram empty_eye(const Waveform& w, double trigger_phase_ui, const EyeGrid& grid) {
    EyeDiagram e;
    e.ui = w.ui();
    e.trigger_phase_ui = trigger_phase_ui;
    e.time_bins = grid.time_bins > 0 ? grid.time_bins : 2 * w.samples_per_ui();
    e.voltage_bins = grid.voltage_bins;
    if (e.voltage_bins < 2) throw ConfigError("eye: need at least 2 voltage bins");
    e.v_min = grid.v_min;
    e.v_max = grid.v_max;
    if (e.v_min == e.v_max) {
        double peak = 0.0;
        for (double v : w.samples()) peak = std::max(peak, std::abs(v));
        if (peak == 0.0) peak = 1.0;
        e.v_min = -1.25 * peak;
        e.v_max = 1.25 * peak;
    }
    e.counts.assign(static_cast<std::size_t>(e.time_bins) * e.voltage_bins, 0);
    return e;
}

void fold_into(EyeDiagram& e, const Waveform& w, std::size_t begin, std::size_t end) {
    const double inv_ui = 1.0 / w.ui();
    const double vscale = e.voltage_bins / (e.v_max - e.v_min);
    for (std::size_t i = begin; i < end; ++i) {
        double ph = std::fmod(w.time_at(i) * inv_ui - e.trigger_phase_ui, 2.0);
        if (ph < 0.0) ph += 2.0;
        int tb = static_cast<int>(ph / 2.0 * e.time_bins);
        tb = std::clamp(tb, 0, e.time_bins - 1);
        int vb = static_cast<int>(std::floor((w[i] - e.v_min) * vscale));
        vb = std::clamp(vb, 0, e.voltage_bins - 1);
        ++e.at(tb, vb);
    }
}

}  // namespace

EyeDiagram eye_accumulate_serial(const Waveform& w, double trigger_phase_ui, const EyeGrid& grid) {
    EyeDiagram e = empty_eye(w, trigger_phase_ui, grid);
    fold_into(e, w, 0, w.size());
    return e;
}

EyeDiagram eye_accumulate(const Waveform& w, double trigger_phase_ui, const EyeGrid& grid) {
    EyeDiagram e = empty_eye(w, trigger_phase_ui, grid);
    const int nthreads = omp_get_max_threads();
    std::vector<EyeDiagram> partial(static_cast<std::size_t>(nthreads), e);
#pragma omp parallel num_threads(nthreads)
    {
        const auto tid = static_cast<std::size_t>(omp_get_thread_num());
        const std::size_t chunk = (w.size() + nthreads - 1) / nthreads;
        const std::size_t begin = std::min(w.size(), tid * chunk);
        const std::size_t end = std::min(w.size(), begin + chunk);
        fold_into(partial[tid], w, begin, end);
    }
    for (const auto& p : partial) e.merge(p);
    return e;
}

}  // namespace cdrlab
