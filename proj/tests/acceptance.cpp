// Acceptance checks: one PASS/FAIL line per criterion.
// usage: acceptance <configs-dir>

#include "cdrlab/analysis.hpp"
#include "cdrlab/cdrloop.hpp"
#include "cdrlab/channel.hpp"
#include "cdrlab/commands.hpp"
#include "cdrlab/config.hpp"
#include "cdrlab/errors.hpp"
#include "cdrlab/io.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

using namespace cdrlab;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

class Clock {
public:
    double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count(); }

private:
    std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

int failures = 0;

void report(int n, const char* name, double budget_s, const std::function<Outcome()>& body) {
    const Clock clock;
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double t = clock.seconds();
    const bool in_time = t < budget_s;
    const bool pass = o.pass && in_time;
    if (!pass) ++failures;
    std::printf("%s %d %s: %s [%.2f s, budget %.0f s%s]\n", pass ? "PASS" : "FAIL", n, name, o.detail.c_str(), t,
                budget_s, in_time ? "" : ", over budget");
    std::fflush(stdout);
}

// ---------------------------------------------------------------------------

Outcome truth_table() {
    // Action column of the sequence table, rows b[-2] b[-1] b_m b[0].
    using A = ThresholdAction;
    constexpr A expected[16] = {A::None,     A::Decrease, A::None, A::Increase, A::Decrease, A::None,
                                A::Increase, A::None,     A::None, A::None,     A::None,     A::None,
                                A::None,     A::None,     A::None, A::None};
    int mismatches = 0;
    for (int row = 0; row < 16; ++row) {
        const auto s = PhaseSamples::from_row(row);
        mismatches += threshold_decide(s) != expected[row];
        mismatches += threshold_decide_table(s) != expected[row];
        mismatches += threshold_decide(s) != threshold_decide_table(s);
    }
    return {mismatches == 0, fmt("%d mismatches over 16 rows", mismatches)};
}

Outcome phase_detector() {
    int mismatches = 0;
    for (int p = 0; p < 8; ++p) {
        const int a = (p >> 2) & 1, b = (p >> 1) & 1, c = p & 1;
        PdDecision want = PdDecision::Hold;
        if (a != c) want = a == b ? PdDecision::ClockEarly : PdDecision::ClockLate;
        mismatches += alexander_decide(a, b, c) != want;
        mismatches += alexander_decide(!a, !b, !c) != want;
    }
    return {mismatches == 0, fmt("%d mismatches over 8 patterns and complements", mismatches)};
}

// ---------------------------------------------------------------------------

struct CaseRun {
    EyeResult eye;
    SweepResult sweep;
};

std::optional<CaseRun> case2_run;

double jitter_at(const SweepResult& s, std::size_t i) { return s.curve.points[i].pk_pk_ui; }

Outcome case1(const fs::path& dir) {
    const auto cfg = load_config((dir / "case1.cfg").string());
    const auto eye = run_eye(cfg);
    const auto sw = run_sweep(cfg);
    const double step_mv = cfg.analysis.offsets_mv.step_mv;
    const double vmin = sw.curve.points[sw.global_min].v_off * 1e3;
    const bool ok = eye.histogram.cluster_count == 1 && sw.curve.points.size() == 31 &&
                    std::abs(vmin) <= step_mv + 1e-9;
    return {ok, fmt("clusters=%d points=%zu global_min=%g mV (jitter %.3f %%UI)", eye.histogram.cluster_count,
                    sw.curve.points.size(), vmin, 100.0 * jitter_at(sw, sw.global_min))};
}

Outcome case2(const fs::path& dir) {
    const auto cfg = load_config((dir / "case2.cfg").string());
    CaseRun run{run_eye(cfg), run_sweep(cfg)};
    case2_run = run;
    const auto& sw = run.sweep;
    const double step_mv = cfg.analysis.offsets_mv.step_mv;

    std::optional<std::size_t> zero;
    for (std::size_t i = 0; i < sw.curve.points.size(); ++i)
        if (std::abs(sw.curve.points[i].v_off) < 1e-9) zero = i;

    // Deepest minimum on each side of zero.
    std::optional<std::size_t> neg, pos;
    for (auto i : sw.minima) {
        const double v = sw.curve.points[i].v_off;
        auto& side = v < 0.0 ? neg : pos;
        if (v != 0.0 && (!side || jitter_at(sw, i) < jitter_at(sw, *side))) side = i;
    }
    std::string detail = fmt("clusters=%d minima_mV=", run.eye.histogram.cluster_count);
    const auto mv = sw.minima_mv();
    for (std::size_t i = 0; i < mv.size(); ++i) detail += fmt(i ? ",%g" : "%g", mv[i]);
    if (!neg || !pos || !zero || !sw.curve.points[*zero].locked) return {false, detail + " (no minimum pair)"};

    const double vn = sw.curve.points[*neg].v_off * 1e3, vp = sw.curve.points[*pos].v_off * 1e3;
    const double j0 = jitter_at(sw, *zero);
    const double jworst = std::max(jitter_at(sw, *neg), jitter_at(sw, *pos));
    const bool symmetric = std::abs(vp + vn) <= step_mv + 1e-9;  // +/-v* within one step
    const bool away = std::min(-vn, vp) >= 2.0 * step_mv - 1e-9;
    const bool deeper = j0 >= 1.2 * jworst;
    detail += fmt(" v*=%g/%g mV jitter(0)/jitter(v*)=%.2f", vn, vp, j0 / jworst);
    return {run.eye.histogram.cluster_count == 2 && symmetric && away && deeper, detail};
}

// ---------------------------------------------------------------------------

Outcome oracle(const fs::path& dir) {
    const auto cfg = load_config((dir / "oracle.cfg").string());
    const auto model = OneBitIsiModel::build(cfg.model_params());
    OracleOptions opt;
    opt.grid = cfg.model.grid;
    const double step_ui = 1.0 / opt.grid;
    const double t1 = model.tau()[1] / model.ui(), t2 = model.tau()[2] / model.ui(), t3 = model.tau()[3] / model.ui();
    const auto loop = oracle_loop_config(opt.grid, cfg.ui());

    const auto r = markov_oracle(model, model.level_r(), opt);
    const auto q = markov_oracle(model, model.level_q(), opt);
    const bool r_width = std::abs(r.support_width_ui - (t3 - t1)) <= 2.0 * step_ui + 1e-12;
    const bool q_pinned = q.support_lo_ui >= t2 - 2.0 * step_ui - 1e-12 && q.support_hi_ui <= t2 + 2.0 * step_ui + 1e-12;

    const auto sim_r = oracle_vs_sim(model, model.level_r(), loop, cfg.model.n_bits, cfg.data.seed, opt,
                                     cfg.data.samples_per_ui);
    const auto sim_q = oracle_vs_sim(model, model.level_q(), loop, cfg.model.n_bits, cfg.data.seed, opt,
                                     cfg.data.samples_per_ui);
    const auto within = [](const OracleComparison& c) { return c.sim_locked && c.ratio >= 0.8 && c.ratio <= 1.2; };

    // Informational: the pinned edge at Q sits in one of two parity classes
    // depending on the seed; count how often the one-step class is reached.
    int q_in_band = 0;
    const int extra = 6;
    for (int s = 1; s <= extra; ++s)
        q_in_band += within(oracle_vs_sim(model, model.level_q(), loop, cfg.model.n_bits, static_cast<std::uint64_t>(s),
                                          opt, cfg.data.samples_per_ui));
    std::printf("  info 5: Q sim/oracle within +/-20%% for %d of seeds 1..%d\n", q_in_band, extra);

    return {r_width && q_pinned && within(sim_r) && within(sim_q),
            fmt("R support=%.5f UI (tau3-tau1=%.5f) Q support=[%.5f,%.5f] (tau2=%.5f) sim/oracle R=%.3f Q=%.3f",
                r.support_width_ui, t3 - t1, q.support_lo_ui, q.support_hi_ui, t2, sim_r.ratio, sim_q.ratio)};
}

// ---------------------------------------------------------------------------

Outcome tracking(const fs::path& dir) {
    if (!case2_run) return {false, "case 2 sweep unavailable"};
    const auto c2 = load_config((dir / "track_case2.cfg").string());
    const auto c1 = load_config((dir / "track_case1.cfg").string());
    const auto t2 = run_track(c2);
    const auto t1 = run_track(c1);
    const double gain2 = c2.loop.vth_gain_mv * 1e-3, gain1 = c1.loop.vth_gain_mv * 1e-3;

    double nearest = 1e9;
    for (double m : case2_run->sweep.minima_mv()) nearest = std::min(nearest, std::abs(t2.v_th_fb.final_mean * 1e3 - m));
    const bool ok2 = t2.v_th_fb.tail_std < 5.0 * gain2 && nearest <= 2.0;
    const bool ok1 = t1.v_th_fb.tail_std < 5.0 * gain1 && std::abs(t1.v_th_fb.final_mean) <= 2e-3;
    return {ok1 && ok2, fmt("case2 v_th_fb=%.3f mV (std %.3f mV, %.2f mV from a minimum) case1 v_th_fb=%.3f mV "
                            "(std %.3f mV)",
                            t2.v_th_fb.final_mean * 1e3, t2.v_th_fb.tail_std * 1e3, nearest,
                            t1.v_th_fb.final_mean * 1e3, t1.v_th_fb.tail_std * 1e3)};
}

// ---------------------------------------------------------------------------

double max_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

Outcome physics(const fs::path& dir) {
    std::vector<std::string> bad;
    const double ui = 1e-9;
    const auto cfg = ChannelConfig::from_preset(ChannelPreset::ModerateBandwidth, 1e9);
    const auto nrz = [&](std::uint64_t seed) {
        return nrz_modulate(generate_bits(SourceKind::UniformRandom, 2000, seed), ui, 64, 0.1);
    };

    // Linearity and shift invariance.
    {
        const auto x = nrz(1), y = nrz(2);
        std::vector<double> mix(x.size()), shifted(x.size() + 50, 0.0);
        for (std::size_t i = 0; i < x.size(); ++i) {
            mix[i] = 0.3 * x[i] - 1.7 * y[i];
            shifted[i + 50] = x[i];
        }
        const auto hx = apply_channel(x, cfg), hy = apply_channel(y, cfg);
        const auto hm = apply_channel(Waveform(x.sample_period(), 0.0, mix, 64), cfg);
        const auto hs = apply_channel(Waveform(x.sample_period(), 0.0, shifted, 64), cfg);
        std::vector<double> e_lin(x.size()), e_shift(x.size()), ref(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
            ref[i] = 0.3 * hx[i] - 1.7 * hy[i];
            e_lin[i] = hm[i] - ref[i];
            e_shift[i] = hs[i + 50] - hx[i];
        }
        if (!(max_abs(e_lin) / max_abs(ref) < 1e-9)) bad.push_back("linearity");
        if (!(max_abs(e_shift) / max_abs(std::vector<double>(hx.samples().begin(), hx.samples().end())) < 1e-9))
            bad.push_back("shift");
    }
    // Unity DC gain.
    {
        const std::size_t n = 64 * 2000;
        const auto out = apply_channel(Waveform(ui / 64, 0.0, std::vector<double>(n, 1.0), 64), cfg);
        if (!(std::abs(out[n - 1] - 1.0) < 1e-3)) bad.push_back("dc_gain");
    }
    // RC closed form.
    {
        const double icp = 100e-6, r = 1e3, c = 10e-9;
        LoopFilter f(icp, r, c);
        f.set_decision(PdDecision::ClockLate);
        double t = 0.0;
        for (int i = 0; i < 5000; ++i) {
            f.advance(2e-12);
            t += 2e-12;
        }
        const double want = icp * r + icp * t / c;
        if (!(std::abs(f.v_c() - want) / want < 1e-9)) bad.push_back("rc");
    }
    // VCO phase integral.
    {
        const double f0 = 1e9, kv = 78.125e6, dt = 100e-9, v0 = -0.3, v1 = 0.4;
        Vco vco(f0, kv, 0.0);
        const double cycles = f0 * dt + kv * 0.5 * (v0 + v1) * dt;  // exact for a linear ramp
        const auto edges = vco.advance(0.0, dt, v0, v1);
        const double measured = 0.5 * static_cast<double>(edges.size()) + vco.phase() - (edges.size() % 2 ? 0.5 : 0.0);
        if (!(std::abs(measured - cycles) / cycles < 1e-3)) bad.push_back("vco");
    }
    // Coin fairness: 3 sigma binomial band over 1e4 trials.
    {
        Comparator comp(12345);
        int ones = 0;
        for (int i = 0; i < 10000; ++i) ones += comp.sample(0.0, 0.0);
        if (std::abs(ones - 5000) > 3.0 * 50.0) bad.push_back(fmt("coin(%d)", ones));
    }
    // Determinism: repeated runs write identical CSVs.
    {
        auto c = load_config((dir / "case2.cfg").string());
        c.data.n_bits = 20000;
        c.analysis.offsets_mv = {-8.0, 8.0, 8.0};
        c.analysis.min_edges = 5000;
        c.loop.vth_enabled = true;
        const auto base = fs::temp_directory_path() / "cdrlab_acceptance";
        const auto run = [&](const char* tag) {
            std::string digest;
            for (auto cmd : {cmd_sweep, cmd_track, cmd_eye}) {
                const auto out = base / tag;
                fs::remove_all(out);
                fs::create_directories(out);
                for (const auto& f : cmd(c, out).files)
                    if (f.path.ends_with(".csv")) digest += f.sha256;
            }
            return digest;
        };
        if (run("a") != run("b")) bad.push_back("determinism");
        fs::remove_all(base);
    }
    std::string detail = bad.empty() ? "linearity, shift, dc gain, rc, vco, coin, determinism ok" : "failed:";
    for (const auto& b : bad) detail += " " + b;
    return {bad.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
    if (argc != 2) {
        std::fprintf(stderr, "usage: acceptance <configs-dir>\n");
        return 2;
    }
    const fs::path dir = argv[1];
    report(1, "truth table", 1, truth_table);
    report(2, "phase detector", 1, phase_detector);
    report(3, "case 1", 60, [&] { return case1(dir); });
    report(4, "case 2", 90, [&] { return case2(dir); });
    report(5, "oracle", 30, [&] { return oracle(dir); });
    report(6, "tracking", 60, [&] { return tracking(dir); });
    report(7, "physics", 30, [&] { return physics(dir); });
    return failures == 0 ? 0 : 1;
}
