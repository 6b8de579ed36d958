#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace cdrlab {

enum class SourceKind { UniformRandom, Prbs7, Prbs15, Explicit };

std::string_view to_string(SourceKind kind);
SourceKind source_kind_from_string(std::string_view name);

struct BitStream {
    std::vector<std::uint8_t> bits;
    std::uint64_t seed = 0;
    SourceKind source_kind = SourceKind::Explicit;

    std::size_t size() const noexcept { return bits.size(); }
};

/// Seeded, reproducible bit source. For the PRBS kinds the low bits of `seed`
/// form the initial LFSR state (an all-zero state is replaced by all ones).
BitStream generate_bits(SourceKind kind, std::size_t n, std::uint64_t seed);

BitStream explicit_bits(std::vector<std::uint8_t> bits);
BitStream invert(const BitStream& in);

/// Uniformly sampled voltage record. Sample i sits at t0 + i * sample_period.
/// The unit interval is always an integer number of samples (>= 16).
class Waveform {
public:
    Waveform(double sample_period, double t0, std::vector<double> samples,
             int samples_per_ui);

    double sample_period() const noexcept { return sample_period_; }
    double t0() const noexcept { return t0_; }
    int samples_per_ui() const noexcept { return samples_per_ui_; }
    double ui() const noexcept { return sample_period_ * samples_per_ui_; }
    std::size_t size() const noexcept { return samples_.size(); }
    double duration() const noexcept { return sample_period_ * static_cast<double>(samples_.size()); }

    std::span<const double> samples() const noexcept { return samples_; }
    std::vector<double>& mutable_samples() noexcept { return samples_; }
    double operator[](std::size_t i) const noexcept { return samples_[i]; }

    double time_at(std::size_t i) const noexcept {
        return t0_ + sample_period_ * static_cast<double>(i);
    }

    /// Linear interpolation; clamps outside the record.
    double value_at(double t) const noexcept;

private:
    double sample_period_;
    double t0_;
    std::vector<double> samples_;
    int samples_per_ui_;
};

inline constexpr int kMinSamplesPerUi = 16;
inline constexpr int kDefaultSamplesPerUi = 64;

/// Ideal two-level NRZ: bit 1 -> +amplitude, bit 0 -> -amplitude, zero rise
/// time. Samples sit at bin centres (t0 = dt/2) so a 0->1 edge at k*UI
/// interpolates to a crossing exactly at k*UI.
Waveform nrz_modulate(const BitStream& bits, double ui, int samples_per_ui, double amplitude);

/// Adds white Gaussian noise of the given rms (volts) in place; no-op for 0.
void add_gaussian_noise(Waveform& w, double rms, std::uint64_t seed);

}  // namespace cdrlab
