#include "cdrlab/analysis.hpp"
#include "cdrlab/errors.hpp"
#include "cdrlab/isi_model.hpp"

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace cdrlab;

namespace {

const OneBitIsiModel& model() {
    static const OneBitIsiModel m = OneBitIsiModel::build(IsiModelParams{});
    return m;
}

constexpr double kCell = 1.0 / 256.0;

// Move probabilities straight from the trace crossings: each of the four
// transition patterns has probability 1/8 per bit.
void oracle_moves(double threshold, std::vector<double>& delay, std::vector<double>& advance) {
    delay.assign(256, 0.0);
    advance.assign(256, 0.0);
    for (int i = 0; i < 256; ++i) {
        const double x = (i + 0.5) * kCell - 0.5;
        for (auto id : kAllTraces) {
            const double c = model().crossing_time(id, threshold) / model().ui();
            if (x < c) delay[static_cast<std::size_t>(i)] += 0.125;
            if (x > c) advance[static_cast<std::size_t>(i)] += 0.125;
        }
    }
}

}  // namespace

TEST_CASE("stationary distribution is normalised and converged") {
    for (double th : {model().level_r(), model().level_q(), model().level_p(), 0.01}) {
        const auto r = markov_oracle(model(), th);
        CHECK(std::accumulate(r.probability.begin(), r.probability.end(), 0.0) == Catch::Approx(1.0).epsilon(1e-12));
        CHECK(r.residual < 1e-12);
        for (double p : r.probability) REQUIRE(p >= 0.0);
        CHECK_FALSE(r.transitions_lost);
    }
}

TEST_CASE("move probabilities follow the trace crossings") {
    for (double th : {0.0, model().level_q(), -0.013}) {
        const auto r = markov_oracle(model(), th);
        std::vector<double> d, a;
        oracle_moves(th, d, a);
        for (std::size_t i = 0; i < 256; ++i) {
            // Cells whose centre hits a crossing exactly split the move.
            if (std::abs(d[i] + a[i] - 0.5) > 1e-12) continue;
            REQUIRE(r.p_delay[i] == d[i]);
            REQUIRE(r.p_advance[i] == a[i]);
        }
    }
}

TEST_CASE("birth-death chain satisfies detailed balance") {
    for (double th : {model().level_r(), model().level_q(), 0.004}) {
        const auto r = markov_oracle(model(), th);
        const double pmax = *std::max_element(r.probability.begin(), r.probability.end());
        for (std::size_t i = 0; i + 1 < 256; ++i) {
            const double flow_up = r.probability[i] * r.p_delay[i];
            const double flow_dn = r.probability[i + 1] * r.p_advance[i + 1];
            REQUIRE(std::abs(flow_up - flow_dn) < 1e-9 * pmax);
        }
    }
}

TEST_CASE("at R the edge is uniform between tau1 and tau3") {
    const auto r = markov_oracle(model(), model().level_r());
    const double t1 = model().tau()[1] / model().ui(), t3 = model().tau()[3] / model().ui();
    // Equal delay and advance probability inside: a flat stationary density.
    double inside = 0.0, first = -1.0;
    int m = 0;
    for (std::size_t i = 0; i < 256; ++i) {
        const double x = r.edge_phase_ui[i];
        if (x > t1 && x < t3) {
            CHECK(r.drift_steps[i] == 0.0);
            if (first < 0.0) first = r.probability[i];
            CHECK(r.probability[i] == Catch::Approx(first).epsilon(1e-6));
            inside += r.probability[i];
            ++m;
        }
    }
    // The cell just outside on each side holds half a cell's mass
    // (delay 1/2 in, advance 1/4 back), so m interior cells carry m / (m + 1).
    CHECK(inside == Catch::Approx(m / (m + 1.0)).epsilon(1e-9));
    CHECK(std::abs(r.support_width_ui - (t3 - t1)) <= 2.0 * kCell);
    CHECK(r.support_lo_ui >= t1 - kCell);
    CHECK(r.support_hi_ui <= t3 + kCell);
}

TEST_CASE("at Q the edge is pinned at tau2") {
    const auto r = markov_oracle(model(), model().level_q());
    const double t2 = model().tau()[2] / model().ui();
    for (std::size_t i = 0; i < 256; ++i) {
        const double x = r.edge_phase_ui[i];
        if (x < t2 - kCell) CHECK(r.drift_steps[i] > 0.0);
        if (x > t2 + kCell) CHECK(r.drift_steps[i] < 0.0);
    }
    CHECK(r.support_lo_ui >= t2 - 2.0 * kCell);
    CHECK(r.support_hi_ui <= t2 + 2.0 * kCell);
    CHECK(r.support_width_ui <= 2.0 * kCell);
}

TEST_CASE("single-crossing model locks to within the limit cycle") {
    IsiModelParams p;
    p.tau1_ui = p.tau3_ui = 0.0;
    p.edge_width_ui = 0.0;
    p.isi_fraction = 0.0;
    const auto m = OneBitIsiModel::build(p, true);
    const auto r = markov_oracle(m, 0.0);
    CHECK(r.support_width_ui <= 2.0 * kCell);
}

TEST_CASE("R drift is odd in time and P mirrors Q") {
    const auto r = markov_oracle(model(), model().level_r());
    for (std::size_t i = 0; i < 256; ++i) REQUIRE(r.drift_steps[i] == -r.drift_steps[255 - i]);
    const auto p = markov_oracle(model(), model().level_p());
    const auto q = markov_oracle(model(), model().level_q());
    // Inverting the data maps P onto Q with identical crossing times.
    CHECK(p.drift_steps == q.drift_steps);
    CHECK(p.support_width_ui == q.support_width_ui);
    for (double th : {0.002, 0.011, 0.03}) {
        CHECK(markov_oracle(model(), th).drift_steps == markov_oracle(model(), -th).drift_steps);
    }
}

TEST_CASE("support width is smallest at P and Q") {
    double best = 1.0;
    std::vector<std::pair<double, double>> scan;
    for (double mv = -60.0; mv <= 60.0 + 1e-9; mv += 0.5) {
        const double w = markov_oracle(model(), mv * 1e-3).support_width_ui;
        scan.emplace_back(mv * 1e-3, w);
        best = std::min(best, w);
    }
    CHECK(markov_oracle(model(), model().level_q()).support_width_ui == best);
    CHECK(markov_oracle(model(), model().level_r()).support_width_ui > 20.0 * best);
    for (const auto& [th, w] : scan) {
        if (w > 2.0 * kCell) continue;
        CAPTURE(th);
        CHECK(std::min(std::abs(th - model().level_p()), std::abs(th - model().level_q())) < 3e-3);
    }
}

TEST_CASE("expected peak-to-peak: parallel equals serial and grows with length") {
    const auto r = markov_oracle(model(), model().level_r());
    for (std::size_t n : {10u, 1000u, 20000u}) CHECK(r.expected_pk_pk_ui(n) == r.expected_pk_pk_ui_serial(n));
    CHECK(r.expected_pk_pk_ui(1) == 0.0);
    const double a = r.expected_pk_pk_ui(100), b = r.expected_pk_pk_ui(10000);
    CHECK(a < b);
    // Long runs explore the whole flat region.
    CHECK(b <= r.support_width_ui + 4.0 * kCell);
    CHECK(b >= r.support_width_ui - 4.0 * kCell);
}

TEST_CASE("threshold outside the eye loses transitions") {
    CHECK(markov_oracle(model(), 0.2).transitions_lost);
    CHECK(markov_oracle(model(), -0.2).transitions_lost);
}

TEST_CASE("oracle options are validated") {
    OracleOptions o;
    o.grid = 128;
    CHECK_THROWS_AS(markov_oracle(model(), 0.0, o), ConfigError);
    o = OracleOptions{};
    o.step_cells = 0;
    CHECK_THROWS_AS(markov_oracle(model(), 0.0, o), ConfigError);
}

TEST_CASE("oracle loop has a one-cell bang-bang step") {
    const auto c = oracle_loop_config(256, 1e-9);
    CHECK(c.bang_bang_step_ui() == Catch::Approx(1.0 / 256.0).epsilon(1e-12));
    CHECK(c.r_filter * c.c_filter >= 1e5 * 1e-9);
}

TEST_CASE("closed-loop simulation agrees with the oracle") {
    const auto loop = oracle_loop_config(256, model().ui());
    const auto at_r = oracle_vs_sim(model(), model().level_r(), loop, 100000, 1);
    REQUIRE(at_r.sim_locked);
    CHECK(at_r.regime_ok);
    CHECK(at_r.ratio >= 0.8);
    CHECK(at_r.ratio <= 1.2);
    const auto at_q = oracle_vs_sim(model(), model().level_q(), loop, 100000, 1);
    REQUIRE(at_q.sim_locked);
    CHECK(at_q.sim_pk_pk_ui <= 0.5 * at_r.oracle_support_ui);
    const auto at_p = oracle_vs_sim(model(), model().level_p(), loop, 100000, 1);
    REQUIRE(at_p.sim_locked);
    CHECK(at_p.sim_pk_pk_ui <= 0.5 * at_r.oracle_support_ui);
}
