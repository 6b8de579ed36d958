// Serial reference vs OpenMP kernels. Thread count follows OMP_NUM_THREADS.

#include "cdrlab/analysis.hpp"
#include "cdrlab/channel.hpp"
#include "cdrlab/isi_model.hpp"

#include <benchmark/benchmark.h>

#include <omp.h>

using namespace cdrlab;

namespace {

const Waveform& received() {
    static const Waveform w = apply_channel(
        nrz_modulate(generate_bits(SourceKind::UniformRandom, 100000, 1), 1e-9, 64, 0.1),
        ChannelConfig::from_preset(ChannelPreset::ModerateBandwidth, 1e9));
    return w;
}

const Waveform& short_received() {
    static const Waveform w = apply_channel(
        nrz_modulate(generate_bits(SourceKind::UniformRandom, 20000, 1), 1e-9, 64, 0.1),
        ChannelConfig::from_preset(ChannelPreset::ModerateBandwidth, 1e9));
    return w;
}

const OracleResult& oracle_at_r() {
    static const OracleResult r = markov_oracle(OneBitIsiModel::build(IsiModelParams{}), 0.0);
    return r;
}

const std::vector<double> kOffsets = offset_range(-8e-3, 8e-3, 2e-3);

void threads_counter(benchmark::State& s) { s.counters["threads"] = omp_get_max_threads(); }

}  // namespace

static void BM_crossings_serial(benchmark::State& s) {
    received();  // build outside the timed loop
    for (auto _ : s) benchmark::DoNotOptimize(crossing_times_serial(received(), 0.0));
}
static void BM_crossings_parallel(benchmark::State& s) {
    for (auto _ : s) benchmark::DoNotOptimize(crossing_times(received(), 0.0));
    threads_counter(s);
}

static void BM_eye_serial(benchmark::State& s) {
    for (auto _ : s) benchmark::DoNotOptimize(eye_accumulate_serial(received(), 0.0));
}
static void BM_eye_parallel(benchmark::State& s) {
    for (auto _ : s) benchmark::DoNotOptimize(eye_accumulate(received(), 0.0));
    threads_counter(s);
}

static void BM_sweep_serial(benchmark::State& s) {
    short_received();
    SweepOptions opt;
    opt.min_edges = 5000;
    for (auto _ : s) benchmark::DoNotOptimize(offset_sweep_serial(LoopConfig{}, short_received(), kOffsets, opt));
}
static void BM_sweep_parallel(benchmark::State& s) {
    SweepOptions opt;
    opt.min_edges = 5000;
    for (auto _ : s) benchmark::DoNotOptimize(offset_sweep(LoopConfig{}, short_received(), kOffsets, opt));
    threads_counter(s);
}

static void BM_expected_pkpk_serial(benchmark::State& s) {
    oracle_at_r();
    for (auto _ : s) benchmark::DoNotOptimize(oracle_at_r().expected_pk_pk_ui_serial(80000));
}
static void BM_expected_pkpk_parallel(benchmark::State& s) {
    for (auto _ : s) benchmark::DoNotOptimize(oracle_at_r().expected_pk_pk_ui(80000));
    threads_counter(s);
}

BENCHMARK(BM_crossings_serial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_crossings_parallel)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_eye_serial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_eye_parallel)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_sweep_serial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_sweep_parallel)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_expected_pkpk_serial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_expected_pkpk_parallel)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
