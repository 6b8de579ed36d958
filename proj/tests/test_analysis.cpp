#include "cdrlab/analysis.hpp"
#include "cdrlab/errors.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <random>
#include <set>

using namespace cdrlab;

namespace {

constexpr double kUi = 1e-9;

SimTrace trace_from_phase(const std::vector<double>& e) {
    SimTrace tr;
    tr.ui = kUi;
    for (std::size_t k = 0; k < e.size(); ++k) tr.falling_edges.push_back((static_cast<double>(k) + e[k]) * kUi);
    return tr;
}

SweepCurve curve_of(const std::vector<double>& pk) {
    SweepCurve c;
    for (std::size_t i = 0; i < pk.size(); ++i) {
        SweepPoint p;
        p.v_off = static_cast<double>(i) * 1e-3;
        p.pk_pk_ui = pk[i];
        p.locked = !std::isnan(pk[i]);
        c.points.push_back(p);
    }
    return c;
}

const double kNan = std::numeric_limits<double>::quiet_NaN();

}  // namespace

TEST_CASE("a perfectly periodic clock has zero jitter") {
    const auto r = measure_jitter(trace_from_phase(std::vector<double>(20000, 0.125)));
    CHECK(r.pk_pk_ui < 1e-9);
    CHECK(r.mean_edge_phase_ui == Catch::Approx(0.125).margin(1e-9));
    CHECK(r.warmup_discarded == 4000);
    CHECK(r.n_edges_measured == 16000);
}

TEST_CASE("alternating +/- delta gives 2 delta peak to peak") {
    const double d = 0.01;
    std::vector<double> e(20000);
    for (std::size_t k = 0; k < e.size(); ++k) e[k] = k % 2 ? d : -d;
    const auto r = measure_jitter(trace_from_phase(e));
    CHECK(r.pk_pk_ui == Catch::Approx(2 * d).epsilon(1e-6));
    CHECK(r.quantile_pk_pk_ui == Catch::Approx(2 * d).epsilon(1e-6));
    std::uint64_t total = 0;
    for (auto c : r.histogram) total += c;
    CHECK(total == r.n_edges_measured);
}

TEST_CASE("an integer-UI edge offset does not change the jitter") {
    std::vector<double> e(20000);
    for (std::size_t k = 0; k < e.size(); ++k) e[k] = 7.5 + (k % 2 ? 0.002 : -0.002);
    const auto r = measure_jitter(trace_from_phase(e));
    CHECK(r.pk_pk_ui == Catch::Approx(0.004).epsilon(1e-6));
}

TEST_CASE("a drifting clock never locks") {
    std::vector<double> e(20000);
    for (std::size_t k = 0; k < e.size(); ++k) e[k] = 1e-3 * static_cast<double>(k);
    const auto tr = trace_from_phase(e);
    CHECK_FALSE(lock_detect(tr).has_value());
    CHECK_THROWS_AS(measure_jitter(tr), LockError);
}

TEST_CASE("lock is declared after the last bad window") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> wild(-0.4, 0.4);
    std::vector<double> e(20000, 0.0);
    for (std::size_t k = 0; k < 5000; ++k) e[k] = wild(rng);
    const auto t = lock_detect(trace_from_phase(e));
    REQUIRE(t.has_value());
    const double k_lock = *t / kUi;
    // Windows start on a 50-edge grid; the first clean one begins at 5000.
    CHECK(k_lock >= 5000.0);
    CHECK(k_lock <= 5050.0);
}

TEST_CASE("too few post-lock edges") {
    const auto tr = trace_from_phase(std::vector<double>(5000, 0.0));
    REQUIRE(lock_detect(tr).has_value());
    CHECK_THROWS_AS(measure_jitter(tr), InsufficientDataError);
    CHECK_NOTHROW(measure_jitter(tr, 1000));
    CHECK_FALSE(lock_detect(trace_from_phase(std::vector<double>(999, 0.0))).has_value());
}

TEST_CASE("point seeds are deterministic and distinct") {
    std::set<std::uint64_t> seen;
    for (std::size_t i = 0; i < 1000; ++i) {
        REQUIRE(point_seed(7, i) == point_seed(7, i));
        seen.insert(point_seed(7, i));
    }
    CHECK(seen.size() == 1000);
    CHECK(point_seed(7, 0) != point_seed(8, 0));
}

TEST_CASE("offset ranges include both ends") {
    const auto v = offset_range(-30e-3, 30e-3, 2e-3);
    REQUIRE(v.size() == 31);
    CHECK(v.front() == Catch::Approx(-30e-3));
    CHECK(v.back() == Catch::Approx(30e-3));
    CHECK(v[15] == Catch::Approx(0.0).margin(1e-15));
    CHECK(offset_range(0.0, 0.0, 1e-3).size() == 1);
    CHECK_THROWS_AS(offset_range(0.0, 1.0, 0.0), ConfigError);
    CHECK_THROWS_AS(offset_range(1.0, 0.0, 0.1), ConfigError);
}

TEST_CASE("parallel sweep matches the serial reference") {
    const auto w = nrz_modulate(generate_bits(SourceKind::UniformRandom, 12000, 3), kUi, 64, 0.1);
    const std::vector<double> offsets{-0.02, -0.01, 0.0, 0.01, 0.02};
    SweepOptions opt;
    opt.min_edges = 5000;
    opt.master_seed = 11;
    const auto a = offset_sweep(LoopConfig{}, w, offsets, opt);
    const auto b = offset_sweep_serial(LoopConfig{}, w, offsets, opt);
    REQUIRE(a.points.size() == offsets.size());
    for (std::size_t i = 0; i < offsets.size(); ++i) {
        CHECK(a.points[i].locked == b.points[i].locked);
        CHECK(a.points[i].pk_pk_ui == b.points[i].pk_pk_ui);
        CHECK(a.points[i].eff_threshold == Catch::Approx(-offsets[i]));
    }
    const auto again = offset_sweep(LoopConfig{}, w, offsets, opt);
    for (std::size_t i = 0; i < offsets.size(); ++i) CHECK(again.points[i].pk_pk_ui == a.points[i].pk_pk_ui);
    CHECK_THROWS_AS(offset_sweep(LoopConfig{}, w, std::vector<double>{0.0, 0.0}, opt), ConfigError);
}

TEST_CASE("local minima of synthetic curves") {
    // V: one minimum in the middle.
    CHECK(local_minima(curve_of({5, 4, 3, 2, 1, 2, 3, 4, 5})) == std::vector<std::size_t>{4});
    // W: two minima.
    CHECK(local_minima(curve_of({5, 3, 2, 3, 4, 3, 2, 3, 5})) == std::vector<std::size_t>{2, 6});
    // Flat bottom counts once, at its left end.
    CHECK(local_minima(curve_of({5, 3, 1, 1, 1, 3, 5})) == std::vector<std::size_t>{2});
    // A shallow wiggle is below the prominence floor.
    CHECK(local_minima(curve_of({3, 3, 3.0, 2.9, 3.0, 3, 3})).empty());
    // Monotone curve: none, edge points never count.
    CHECK(local_minima(curve_of({1, 2, 3, 4, 5})).empty());
    // An unlocked neighbour disqualifies the point.
    CHECK(local_minima(curve_of({5, 4, kNan, 1, 2, 3})).empty());
    CHECK(global_minimum(curve_of({5, kNan, 3, 4})) == 2);
    CHECK_THROWS_AS(global_minimum(curve_of({kNan, kNan})), InsufficientDataError);
}

TEST_CASE("settling of a first-order exponential") {
    const double tau = 1e-6;
    const std::size_t n = 10000;
    std::vector<double> t(n), v(n);
    for (std::size_t i = 0; i < n; ++i) {
        t[i] = 20.0 * tau * static_cast<double>(i) / static_cast<double>(n);
        v[i] = 2.0 - 3.0 * std::exp(-t[i] / tau);
    }
    const auto r = settling_report(t, v);
    CHECK(r.initial == -1.0);
    CHECK(r.final_mean == Catch::Approx(2.0).epsilon(1e-6));
    CHECK(r.band == Catch::Approx(0.02 * 3.0).epsilon(1e-3));
    // 2 % of the excursion: t = tau ln 50 = 3.91 tau, plus half the
    // 0.2 tau smoothing window of lag.
    CHECK(r.settling_time / tau >= std::log(50.0));
    CHECK(r.settling_time / tau <= std::log(50.0) + 0.2);
    CHECK(r.settled);
}

TEST_CASE("a late transient is unsettled and noise widens the band") {
    const std::size_t n = 1000;
    std::vector<double> t(n), v(n, 1.0);
    for (std::size_t i = 0; i < n; ++i) t[i] = static_cast<double>(i);
    for (std::size_t i = 880; i < 890; ++i) v[i] = 11.0;
    const auto late = settling_report(t, v);
    CHECK_FALSE(late.settled);
    CHECK(late.settling_time >= 890.0);

    std::mt19937_64 rng(3);
    std::normal_distribution<double> g(0.0, 0.1);
    for (std::size_t i = 0; i < n; ++i) v[i] = 1.0 + g(rng);
    const auto r = settling_report(t, v);
    CHECK(r.tail_std == Catch::Approx(0.1).epsilon(0.15));
    CHECK(r.band == Catch::Approx(3.0 * r.tail_std));
    CHECK(r.settled);

    CHECK_THROWS_AS(settling_report(std::vector<double>(50), std::vector<double>(50)), InsufficientDataError);
    CHECK_THROWS_AS(settling_report(std::vector<double>(200), std::vector<double>(100)), ConfigError);
}
