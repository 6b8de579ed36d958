#include "cdrlab/stimulus.hpp"

#include "cdrlab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace cdrlab {

std::string_view to_string(SourceKind kind) {
    switch (kind) {
    case SourceKind::UniformRandom: return "uniform";
    case SourceKind::Prbs7: return "prbs7";
    case SourceKind::Prbs15: return "prbs15";
    case SourceKind::Explicit: return "explicit";
    }
    return "explicit";
}

SourceKind source_kind_from_string(std::string_view name) {
    if (name == "uniform") return SourceKind::UniformRandom;
    if (name == "prbs7") return SourceKind::Prbs7;
    if (name == "prbs15") return SourceKind::Prbs15;
    if (name == "explicit") return SourceKind::Explicit;
    throw ConfigError("unknown source kind '" + std::string(name) + "'");
}

namespace {

// Fibonacci LFSR for x^order + x^(order-1) + 1.
std::vector<std::uint8_t> prbs(int order, std::size_t n, std::uint64_t seed) {
    const std::uint32_t mask = (1u << order) - 1u;
    std::uint32_t state = static_cast<std::uint32_t>(seed) & mask;
    if (state == 0) state = mask;
    std::vector<std::uint8_t> out(n);
    for (auto& b : out) {
        const std::uint32_t fb = ((state >> (order - 1)) ^ (state >> (order - 2))) & 1u;
        state = ((state << 1) | fb) & mask;
        b = static_cast<std::uint8_t>(fb);
    }
    return out;
}

}  // namespace

BitStream generate_bits(SourceKind kind, std::size_t n, std::uint64_t seed) {
    if (n == 0) throw ConfigError("generate_bits: empty stream requested (n = 0)");
    BitStream s;
    s.seed = seed;
    s.source_kind = kind;
    switch (kind) {
    case SourceKind::UniformRandom: {
        std::mt19937_64 rng(seed);
        s.bits.resize(n);
        for (auto& b : s.bits) b = static_cast<std::uint8_t>(rng() >> 63);
        break;
    }
    case SourceKind::Prbs7: s.bits = prbs(7, n, seed); break;
    case SourceKind::Prbs15: s.bits = prbs(15, n, seed); break;
    case SourceKind::Explicit:
        throw ConfigError("generate_bits: explicit streams are built with explicit_bits()");
    }
    return s;
}

BitStream explicit_bits(std::vector<std::uint8_t> bits) {
    if (bits.empty()) throw ConfigError("explicit_bits: empty stream");
    for (auto& b : bits) b = b ? 1 : 0;
    return BitStream{std::move(bits), 0, SourceKind::Explicit};
}

BitStream invert(const BitStream& in) {
    BitStream out = in;
    for (auto& b : out.bits) b ^= 1u;
    return out;
}

Waveform::Waveform(double sample_period, double t0, std::vector<double> samples,
                   int samples_per_ui)
    : sample_period_(sample_period), t0_(t0), samples_(std::move(samples)),
      samples_per_ui_(samples_per_ui) {
    if (!(sample_period_ > 0.0)) throw ConfigError("Waveform: sample_period must be > 0");
    if (samples_.empty()) throw ConfigError("Waveform: no samples");
    if (samples_per_ui_ < kMinSamplesPerUi)
        throw ConfigError("Waveform: samples_per_ui must be >= " +
                          std::to_string(kMinSamplesPerUi));
}

double Waveform::value_at(double t) const noexcept {
    const double x = (t - t0_) / sample_period_;
    if (x <= 0.0) return samples_.front();
    const auto i = static_cast<std::size_t>(x);
    if (i + 1 >= samples_.size()) return samples_.back();
    const double f = x - static_cast<double>(i);
    return samples_[i] + f * (samples_[i + 1] - samples_[i]);
}

Waveform nrz_modulate(const BitStream& bits, double ui, int samples_per_ui, double amplitude) {
    if (samples_per_ui < kMinSamplesPerUi)
        throw ConfigError("nrz_modulate: samples_per_ui must be >= " +
                          std::to_string(kMinSamplesPerUi));
    if (!(ui > 0.0)) throw ConfigError("nrz_modulate: ui must be > 0");
    if (bits.bits.empty()) throw ConfigError("nrz_modulate: empty bit stream");
    const auto spu = static_cast<std::size_t>(samples_per_ui);
    std::vector<double> v(bits.size() * spu);
    for (std::size_t k = 0; k < bits.size(); ++k) {
        const double level = bits.bits[k] ? amplitude : -amplitude;
        std::fill_n(v.begin() + static_cast<std::ptrdiff_t>(k * spu), spu, level);
    }
    const double dt = ui / samples_per_ui;
    return Waveform(dt, dt / 2.0, std::move(v), samples_per_ui);
}

void add_gaussian_noise(Waveform& w, double rms, std::uint64_t seed) {
    if (!(rms >= 0.0)) throw ConfigError("add_gaussian_noise: rms must be >= 0");
    if (rms == 0.0) return;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, rms);
    for (double& v : w.mutable_samples()) v += n(rng);
}

}  // namespace cdrlab
