#include "cdrlab/analysis.hpp"

#include "cdrlab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace cdrlab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct WindowStats {
    double pk_pk = 0.0;
    double drift = 0.0;  ///< least-squares slope, UI per edge
};

WindowStats window_stats(const std::vector<double>& e, std::size_t begin, std::size_t n) {
    double lo = e[begin], hi = e[begin];
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double y = e[begin + i];
        const double x = static_cast<double>(i);
        lo = std::min(lo, y);
        hi = std::max(hi, y);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double dn = static_cast<double>(n);
    const double den = dn * sxx - sx * sx;
    return {hi - lo, den > 0.0 ? (dn * sxy - sx * sy) / den : 0.0};
}

bool window_ok(const WindowStats& s, const LockCriteria& c) {
    return s.pk_pk < c.max_pk_pk_ui &&
           std::abs(s.drift) * static_cast<double>(c.window_edges) <= c.max_drift_ui;
}

// Index of the first edge of the trailing run of good windows, or nullopt.
std::optional<std::size_t> lock_index(const std::vector<double>& e, const LockCriteria& c,
                                      double* last_drift = nullptr) {
    if (c.window_edges < 2 || c.window_step < 1) throw ConfigError("lock criteria: bad window");
    if (e.size() < c.window_edges) return std::nullopt;
    const std::size_t last = e.size() - c.window_edges;
    std::vector<std::size_t> starts;
    for (std::size_t s = 0; s <= last; s += c.window_step) starts.push_back(s);
    if (starts.back() != last) starts.push_back(last);

    const WindowStats tail = window_stats(e, last, c.window_edges);
    if (last_drift) *last_drift = tail.drift;
    if (!window_ok(tail, c)) return std::nullopt;
    std::size_t lock = 0;
    for (std::size_t i = starts.size(); i-- > 0;) {
        if (!window_ok(window_stats(e, starts[i], c.window_edges), c)) {
            lock = i + 1 < starts.size() ? starts[i + 1] : last;
            break;
        }
    }
    return lock;
}

}  // namespace

std::optional<double> lock_detect(const SimTrace& trace, const LockCriteria& c) {
    const auto e = edge_phase_error(trace);
    const auto idx = lock_index(e, c);
    if (!idx) return std::nullopt;
    return trace.falling_edges[*idx];
}

JitterReport measure_jitter(const SimTrace& trace, std::size_t min_edges, const LockCriteria& c) {
    auto e = edge_phase_error(trace);
    double drift = kNaN;
    const auto idx = lock_index(e, c, &drift);
    if (!idx) {
        std::ostringstream os;
        os << "no lock: final-window drift " << drift << " UI/edge over " << e.size() << " edges";
        throw LockError(os.str(), drift);
    }
    const std::size_t warmup = std::max(*idx, e.size() / 5);
    if (e.size() < warmup + min_edges) {
        std::ostringstream os;
        os << "only " << (e.size() > warmup ? e.size() - warmup : 0) << " post-lock edges, need "
           << min_edges;
        throw InsufficientDataError(os.str());
    }

    // Fold into one UI around the window median so a locked clock that
    // happens to sit near +/-0.5 UI is not split.
    std::vector<double> w(e.begin() + static_cast<std::ptrdiff_t>(warmup), e.end());
    std::vector<double> tmp = w;
    std::nth_element(tmp.begin(), tmp.begin() + static_cast<std::ptrdiff_t>(tmp.size() / 2), tmp.end());
    const double ref = tmp[tmp.size() / 2];
    for (double& x : w) x -= std::round(x - ref);

    JitterReport r;
    r.warmup_discarded = warmup;
    r.n_edges_measured = w.size();
    r.lock_time = trace.falling_edges[*idx];
    const auto [lo, hi] = std::minmax_element(w.begin(), w.end());
    r.pk_pk_ui = *hi - *lo;
    r.mean_edge_phase_ui = std::accumulate(w.begin(), w.end(), 0.0) / static_cast<double>(w.size());
    tmp = w;
    std::sort(tmp.begin(), tmp.end());
    const auto q = [&](double f) {
        return tmp[static_cast<std::size_t>(std::round(f * static_cast<double>(tmp.size() - 1)))];
    };
    r.quantile_pk_pk_ui = q(0.999) - q(0.001);

    r.histogram_bin_ui = 1.0 / 512.0;
    r.histogram_origin_ui = std::floor(*lo / r.histogram_bin_ui) * r.histogram_bin_ui;
    const auto nb = static_cast<std::size_t>(std::floor((*hi - r.histogram_origin_ui) / r.histogram_bin_ui)) + 1;
    r.histogram.assign(nb, 0);
    for (double x : w) {
        auto b = static_cast<std::size_t>(std::floor((x - r.histogram_origin_ui) / r.histogram_bin_ui));
        ++r.histogram[std::min(b, nb - 1)];
    }
    return r;
}

SettlingReport settling_report(std::span<const double> time, std::span<const double> value,
                               double tail_fraction, double band_fraction) {
    if (time.size() != value.size()) throw ConfigError("settling_report: time and value lengths differ");
    if (!(tail_fraction > 0.0 && tail_fraction < 1.0)) throw ConfigError("settling_report: tail fraction out of (0, 1)");
    const std::size_t n = value.size();
    const auto tail = static_cast<std::size_t>(std::floor(static_cast<double>(n) * (1.0 - tail_fraction)));
    if (n < 100 || tail >= n) throw InsufficientDataError("settling_report: need at least 100 samples");

    // Band test on a trailing moving average over 1 % of the record, so
    // single dither samples past 3 sigma do not reset the settling time.
    const std::size_t win = n / 100;
    std::vector<double> smooth(n);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        acc += value[i];
        if (i >= win) acc -= value[i - win];
        smooth[i] = acc / static_cast<double>(std::min(i + 1, win));
    }

    SettlingReport r;
    r.initial = value[0];
    double sum = 0.0;
    for (std::size_t i = tail; i < n; ++i) sum += value[i];
    r.final_mean = sum / static_cast<double>(n - tail);
    double sq = 0.0;
    for (std::size_t i = tail; i < n; ++i) sq += (value[i] - r.final_mean) * (value[i] - r.final_mean);
    r.tail_std = std::sqrt(sq / static_cast<double>(n - tail));
    r.band = std::max(band_fraction * std::abs(r.final_mean - r.initial), 3.0 * r.tail_std);

    std::size_t first_in = 0;
    for (std::size_t i = n; i-- > 0;) {
        if (std::abs(smooth[i] - r.final_mean) > r.band) {
            first_in = i + 1;
            break;
        }
    }
    r.settling_time = first_in < n ? time[first_in] : time[n - 1];
    r.settled = first_in < tail;
    return r;
}

std::uint64_t point_seed(std::uint64_t master_seed, std::size_t index) {
    // splitmix64 of (master, index)
    std::uint64_t z = master_seed + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(index) + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

namespace {

SweepPoint run_point(const LoopConfig& cfg, const Waveform& received, double v_off, std::uint64_t seed,
                     const SweepOptions& opt) {
    LoopConfig c = cfg;
    c.v_off = v_off;
    c.metastability_seed = seed;
    SweepPoint p;
    p.v_off = v_off;
    p.eff_threshold = effective_threshold(v_off, 0.0);
    RunOptions ro;
    ro.record_stride_samples = 1 << 20;
    const SimTrace tr = run_cdr(c, received, ro);
    try {
        p.pk_pk_ui = measure_jitter(tr, opt.min_edges, opt.lock).pk_pk_ui;
        p.locked = true;
    } catch (const LockError&) {
        p.pk_pk_ui = kNaN;
    } catch (const InsufficientDataError&) {
        p.pk_pk_ui = kNaN;
    }
    return p;
}

void check_offsets(std::span<const double> offsets) {
    if (offsets.empty()) throw ConfigError("sweep: no offsets");
    for (std::size_t i = 1; i < offsets.size(); ++i)
        if (!(offsets[i] > offsets[i - 1])) throw ConfigError("sweep: offsets must be strictly increasing");
}

}  // namespace

SweepCurve offset_sweep_serial(const LoopConfig& cfg, const Waveform& received,
                               std::span<const double> offsets, const SweepOptions& opt) {
    check_offsets(offsets);
    SweepCurve curve;
    curve.points.resize(offsets.size());
    for (std::size_t i = 0; i < offsets.size(); ++i)
        curve.points[i] = run_point(cfg, received, offsets[i], point_seed(opt.master_seed, i), opt);
    return curve;
}

SweepCurve offset_sweep(const LoopConfig& cfg, const Waveform& received, std::span<const double> offsets,
                        const SweepOptions& opt) {
    check_offsets(offsets);
    cfg.validate();
    SweepCurve curve;
    curve.points.resize(offsets.size());
    const auto n = static_cast<std::ptrdiff_t>(offsets.size());
    std::vector<std::string> errors(offsets.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        try {
            curve.points[k] = run_point(cfg, received, offsets[k], point_seed(opt.master_seed, k), opt);
        } catch (const std::exception& ex) {
            errors[k] = ex.what();
        }
    }
    for (const auto& msg : errors)
        if (!msg.empty()) throw SimulationFault("sweep point failed: " + msg);
    return curve;
}

std::vector<double> offset_range(double start, double stop, double step) {
    if (!(step > 0.0)) throw ConfigError("offset range: step must be > 0");
    if (!(stop >= start)) throw ConfigError("offset range: stop must be >= start");
    std::vector<double> v;
    const auto n = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-6));
    for (std::size_t i = 0; i <= n; ++i) v.push_back(start + step * static_cast<double>(i));
    return v;
}

std::vector<std::size_t> local_minima(const SweepCurve& curve, const MinimaOptions& opt) {
    const auto& p = curve.points;
    std::vector<std::size_t> out;
    const auto w = static_cast<std::ptrdiff_t>(std::max<std::size_t>(opt.window, 1));
    const auto n = static_cast<std::ptrdiff_t>(p.size());
    for (std::ptrdiff_t i = 1; i + 1 < n; ++i) {
        const auto at = [&](std::ptrdiff_t k) -> const SweepPoint& { return p[static_cast<std::size_t>(k)]; };
        if (!at(i).locked || !at(i - 1).locked || !at(i + 1).locked) continue;
        const double v = at(i).pk_pk_ui;
        // A flat bottom counts once, at its left end.
        if (!(v < at(i - 1).pk_pk_ui)) continue;
        std::ptrdiff_t j = i + 1;
        while (j < n && at(j).locked && at(j).pk_pk_ui == v) ++j;
        if (j == n || !at(j).locked || !(at(j).pk_pk_ui > v)) continue;
        // Rise on each side within the window, stopping where the curve
        // dips below v again.
        double left = v, right = v;
        for (std::ptrdiff_t k = i - 1; k >= std::max<std::ptrdiff_t>(0, i - w); --k) {
            if (!at(k).locked || at(k).pk_pk_ui < v) break;
            left = std::max(left, at(k).pk_pk_ui);
        }
        for (std::ptrdiff_t k = j; k < std::min(n, j + w); ++k) {
            if (!at(k).locked || at(k).pk_pk_ui < v) break;
            right = std::max(right, at(k).pk_pk_ui);
        }
        if (std::min(left, right) - v >= opt.min_relative_prominence * v) out.push_back(static_cast<std::size_t>(i));
    }
    return out;
}

std::size_t global_minimum(const SweepCurve& curve) {
    std::size_t best = curve.points.size();
    for (std::size_t i = 0; i < curve.points.size(); ++i) {
        const auto& s = curve.points[i];
        if (s.locked && (best == curve.points.size() || s.pk_pk_ui < curve.points[best].pk_pk_ui)) best = i;
    }
    if (best == curve.points.size()) throw InsufficientDataError("sweep: no locked points");
    return best;
}

// ---------------------------------------------------------------------------

namespace {

// Banded lazy walk: from cell i move +s with p_delay[i], -s with p_advance[i].
struct Walk {
    int n = 0;
    int s = 1;
    const std::vector<double>* up = nullptr;
    const std::vector<double>* dn = nullptr;

    void apply(const std::vector<double>& in, std::vector<double>& out, int lo, int hi) const {
        std::fill(out.begin() + lo, out.begin() + hi, 0.0);
        for (int i = lo; i < hi; ++i) {
            const double m = in[static_cast<std::size_t>(i)];
            if (m == 0.0) continue;
            const double pu = (*up)[static_cast<std::size_t>(i)];
            const double pd = (*dn)[static_cast<std::size_t>(i)];
            double stay = 1.0 - pu - pd;
            // Off the grid: reflected into a stay. Off the window: dropped.
            if (i + s >= n) stay += pu;
            else if (i + s < hi) out[static_cast<std::size_t>(i + s)] += m * pu;
            if (i - s < 0) stay += pd;
            else if (i - s >= lo) out[static_cast<std::size_t>(i - s)] += m * pd;
            out[static_cast<std::size_t>(i)] += m * stay;
        }
    }
};

}  // namespace

OracleResult markov_oracle(const OneBitIsiModel& model, double threshold, const OracleOptions& opt) {
    if (opt.grid < 256) throw ConfigError("markov_oracle: grid must be >= 256");
    if (opt.step_cells < 1 || opt.step_cells >= opt.grid / 4) throw ConfigError("markov_oracle: bad step");
    OracleResult r;
    r.grid = opt.grid;
    r.step_cells = opt.step_cells;
    r.cell_ui = 1.0 / opt.grid;
    const auto n = static_cast<std::size_t>(opt.grid);
    r.edge_phase_ui.resize(n);
    r.p_delay.assign(n, 0.0);
    r.p_advance.assign(n, 0.0);

    std::array<double, 4> cross{};
    for (TraceId id : kAllTraces) {
        cross[static_cast<std::size_t>(id)] = model.crossing_time(id, threshold) / model.ui();
        if (!std::isfinite(cross[static_cast<std::size_t>(id)])) r.transitions_lost = true;
    }

    for (std::size_t i = 0; i < n; ++i) {
        const double x = (static_cast<double>(i) + 0.5) * r.cell_ui - 0.5;
        r.edge_phase_ui[i] = x;
        // Edge before the crossing: b_mid agrees with the previous bit and
        // the clock is delayed. After: agrees with the current bit, advance.
        for (double c : cross) {
            if (x < c) r.p_delay[i] += 0.125;
            else if (x > c) r.p_advance[i] += 0.125;
            else {
                r.p_delay[i] += 0.0625;
                r.p_advance[i] += 0.0625;
            }
        }
    }
    r.drift_steps.resize(n);
    for (std::size_t i = 0; i < n; ++i) r.drift_steps[i] = r.p_delay[i] - r.p_advance[i];

    const Walk walk{opt.grid, opt.step_cells, &r.p_delay, &r.p_advance};
    std::vector<double> p(n, 1.0 / static_cast<double>(n)), q(n);
    double res = 1.0;
    std::size_t it = 0;
    while (it < opt.max_iterations) {
        walk.apply(p, q, 0, opt.grid);
        ++it;
        res = 0.0;
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            res += std::abs(q[i] - p[i]);
            sum += q[i];
        }
        for (std::size_t i = 0; i < n; ++i) q[i] /= sum;
        p.swap(q);
        if (res < opt.tolerance) break;
    }
    r.iterations = it;
    r.residual = res;
    if (!(res < opt.tolerance)) {
        std::ostringstream os;
        os << "markov_oracle: power iteration did not converge in " << it << " iterations";
        throw NumericalError(os.str(), res);
    }
    r.probability = std::move(p);

    const double pmax = *std::max_element(r.probability.begin(), r.probability.end());
    std::size_t lo = n, hi = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (r.probability[i] >= opt.support_fraction * pmax) {
            lo = std::min(lo, i);
            hi = std::max(hi, i);
        }
    }
    r.support_lo_ui = r.edge_phase_ui[lo];
    r.support_hi_ui = r.edge_phase_ui[hi];
    // A bang-bang loop cannot do better than its one-step limit cycle.
    r.support_width_ui = std::max(r.support_hi_ui - r.support_lo_ui, r.step_cells * r.cell_ui);
    return r;
}

namespace {

// Cells carrying non-negligible stationary mass, padded by a few steps.
std::pair<int, int> active_window(const OracleResult& r) {
    const int n = r.grid;
    const double pmax = *std::max_element(r.probability.begin(), r.probability.end());
    int lo = n, hi = -1;
    for (int i = 0; i < n; ++i) {
        if (r.probability[static_cast<std::size_t>(i)] > 1e-18 * pmax) {
            lo = std::min(lo, i);
            hi = std::max(hi, i);
        }
    }
    const int pad = 4 * r.step_cells;
    return {std::max(0, lo - pad), std::min(n, hi + 1 + pad)};
}

// P(all of n_bits positions satisfy pred) for the killed walk on [lo, hi).
double survive(const OracleResult& r, int lo, int hi, int keep_lo, int keep_hi, std::size_t n_bits) {
    const Walk walk{r.grid, r.step_cells, &r.p_delay, &r.p_advance};
    std::vector<double> a(static_cast<std::size_t>(r.grid), 0.0), b(a.size(), 0.0);
    for (int i = keep_lo; i < keep_hi; ++i) a[static_cast<std::size_t>(i)] = r.probability[static_cast<std::size_t>(i)];
    const auto mass = [&](const std::vector<double>& v) {
        double s = 0.0;
        for (int i = keep_lo; i < keep_hi; ++i) s += v[static_cast<std::size_t>(i)];
        return s;
    };
    double s = mass(a), ratio = 0.0;
    for (std::size_t k = 1; k < n_bits; ++k) {
        walk.apply(a, b, lo, hi);
        for (int i = lo; i < keep_lo; ++i) b[static_cast<std::size_t>(i)] = 0.0;
        for (int i = keep_hi; i < hi; ++i) b[static_cast<std::size_t>(i)] = 0.0;
        a.swap(b);
        const double s_next = mass(a);
        if (s_next < 1e-300) return 0.0;
        // Once the killed walk reaches its quasi-stationary shape the mass
        // decays by a fixed factor per step; extrapolate the rest.
        const double ratio_next = s_next / s;
        s = s_next;
        if (std::abs(ratio_next - ratio) < 1e-13) return s * std::pow(ratio_next, static_cast<double>(n_bits - 1 - k));
        ratio = ratio_next;
    }
    return s;
}

// E[max - min] in cells = sum_j (1 - P(min > j) - P(max <= j)).
double range_term(const OracleResult& r, int lo, int hi, int j, std::size_t n_bits) {
    const double p_max_le = survive(r, lo, hi, lo, j + 1, n_bits);
    const double p_min_gt = survive(r, lo, hi, j + 1, hi, n_bits);
    return std::max(0.0, 1.0 - p_max_le - p_min_gt);
}

}  // namespace

double OracleResult::expected_pk_pk_ui_serial(std::size_t n_bits) const {
    if (n_bits < 2) return 0.0;
    const auto [lo, hi] = active_window(*this);
    double cells = 0.0;
    for (int j = lo; j < hi - 1; ++j) cells += range_term(*this, lo, hi, j, n_bits);
    return cells * cell_ui;
}

double OracleResult::expected_pk_pk_ui(std::size_t n_bits) const {
    if (n_bits < 2) return 0.0;
    const auto [lo, hi] = active_window(*this);
    std::vector<double> terms(static_cast<std::size_t>(std::max(0, hi - 1 - lo)), 0.0);
    const int m = static_cast<int>(terms.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (int k = 0; k < m; ++k) terms[static_cast<std::size_t>(k)] = range_term(*this, lo, hi, lo + k, n_bits);
    double cells = 0.0;
    for (double t : terms) cells += t;  // fixed order: matches the serial sum
    return cells * cell_ui;
}

LoopConfig oracle_loop_config(int grid, double ui) {
    LoopConfig c;
    c.f0 = 1.0 / ui;
    c.icp = 100e-6;
    c.r_filter = 1e3;
    // kvco * icp * R / (2 f0) == 1 / grid
    c.kvco = 2.0 * c.f0 / (grid * c.icp * c.r_filter);
    c.c_filter = 1e-3;
    c.vth_enabled = false;
    return c;
}

OracleComparison oracle_vs_sim(const OneBitIsiModel& model, double threshold, const LoopConfig& cfg,
                               std::size_t n_bits, std::uint64_t seed, const OracleOptions& opt,
                               int samples_per_ui) {
    OracleComparison cmp;
    cmp.threshold = threshold;
    const OracleResult orc = markov_oracle(model, threshold, opt);
    cmp.oracle_support_ui = orc.support_width_ui;
    cmp.transitions_lost = orc.transitions_lost;
    cmp.regime_ok = cfg.r_filter * cfg.c_filter >= static_cast<double>(n_bits) * model.ui();

    const BitStream bits = generate_bits(SourceKind::UniformRandom, n_bits, seed);
    const Waveform w = model.synthesize(bits, samples_per_ui);
    LoopConfig c = cfg;
    c.v_off = -threshold;  // effective threshold = threshold
    c.vth_enabled = false;
    c.metastability_seed = point_seed(seed, 0);
    RunOptions ro;
    ro.record_stride_samples = 1 << 20;
    const SimTrace tr = run_cdr(c, w, ro);
    try {
        const JitterReport rep = measure_jitter(tr, std::min<std::size_t>(kMinJitterEdges, n_bits / 2));
        cmp.sim_locked = true;
        cmp.sim_pk_pk_ui = rep.pk_pk_ui;
        cmp.oracle_expected_range_ui = orc.expected_pk_pk_ui(rep.n_edges_measured);
        cmp.ratio = cmp.sim_pk_pk_ui / cmp.oracle_support_ui;
    } catch (const LockError&) {
        cmp.sim_pk_pk_ui = kNaN;
        cmp.ratio = kNaN;
        cmp.oracle_expected_range_ui = orc.expected_pk_pk_ui(n_bits);
    }
    return cmp;
}

}  // namespace cdrlab
