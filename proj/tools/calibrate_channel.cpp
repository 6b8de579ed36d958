// Scans the cutoff scale of the 20-section ladder and reports, per scale,
// the crossing-histogram cluster structure over several random streams and
// the 1-bit ISI split (mean crossing of settled-start transitions minus that
// of unsettled-start ones). Picks the preset scales:
//   moderate: widest bandwidth whose histogram splits into exactly two
//             clusters >= 5 % UI apart for every seed
//   high:     narrowest bandwidth that is unimodal for every seed with an
//             ISI split below the default loop's bang-bang step
// The chosen values are committed in channel.hpp.

#include "cdrlab/cdrloop.hpp"
#include "cdrlab/channel.hpp"
#include "cdrlab/errors.hpp"
#include "cdrlab/stimulus.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <numbers>
#include <optional>
#include <vector>

namespace {

using namespace cdrlab;

// Channel delay in UI: circular mean of folded crossings plus the integer
// part that lines crossings up with actual bit transitions.
double channel_delay_ui(const std::vector<double>& times, const BitStream& bits, double ui) {
    double sx = 0.0, sy = 0.0;
    for (double t : times) {
        const double ph = 2.0 * std::numbers::pi * t / ui;
        sx += std::cos(ph);
        sy += std::sin(ph);
    }
    double d = std::atan2(sy, sx) / (2.0 * std::numbers::pi);
    if (d < 0.0) d += 1.0;
    const auto n = static_cast<long>(bits.size());
    int best = 0;
    long best_hits = -1;
    for (int m = 0; m < 8; ++m) {
        long hits = 0;
        for (double t : times) {
            const long k = std::lround(t / ui - d) - m;
            if (k >= 1 && k < n && bits.bits[static_cast<std::size_t>(k - 1)] != bits.bits[static_cast<std::size_t>(k)]) ++hits;
        }
        if (hits > best_hits) {
            best_hits = hits;
            best = m;
        }
    }
    return d + best;
}

double isi_split_ui(const std::vector<double>& times, const BitStream& bits, double ui) {
    const double d = channel_delay_ui(times, bits, ui);
    const auto n = static_cast<long>(bits.size());
    double settled = 0.0, unsettled = 0.0;
    long ns = 0, nu = 0;
    for (double t : times) {
        const double x = t / ui - d;
        const long k = std::lround(x);
        if (k < 2 || k >= n) continue;
        const auto b = [&](long i) { return bits.bits[static_cast<std::size_t>(i)]; };
        if (b(k - 1) == b(k)) continue;
        if (b(k - 2) == b(k - 1)) {
            settled += x - static_cast<double>(k);
            ++ns;
        } else {
            unsettled += x - static_cast<double>(k);
            ++nu;
        }
    }
    if (ns == 0 || nu == 0) return 0.0;
    return settled / static_cast<double>(ns) - unsettled / static_cast<double>(nu);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Channel preset calibration scan"};
    double lo = 0.6, hi = 3.0, step = 0.05;
    double bitrate = 1e9, amplitude_mv = 100.0;
    std::size_t n_bits = 100000;
    int seeds = 6;
    int spu = kDefaultSamplesPerUi;
    double fast_ratio = kLadderFastRatio;
    double min_separation_ui = 0.05;
    double max_split_ui = LoopConfig{}.bang_bang_step_ui();
    app.add_option("--from", lo, "first cutoff scale");
    app.add_option("--to", hi, "last cutoff scale");
    app.add_option("--step", step, "scale step");
    app.add_option("--bits", n_bits, "bits per stream");
    app.add_option("--seeds", seeds, "streams per scale (seeds 1..N)");
    app.add_option("--bitrate", bitrate, "bit rate, Hz");
    app.add_option("--amplitude-mv", amplitude_mv, "NRZ amplitude, mV");
    app.add_option("--spu", spu, "samples per UI");
    app.add_option("--fast-ratio", fast_ratio, "fast-section frequency / base cutoff");
    app.add_option("--min-separation", min_separation_ui, "two-cluster separation floor, UI");
    app.add_option("--max-split", max_split_ui, "ISI split ceiling for the unimodal preset, UI");
    CLI11_PARSE(app, argc, argv);

    std::vector<Waveform> tx;
    std::vector<BitStream> streams;
    for (int s = 1; s <= seeds; ++s) {
        streams.push_back(generate_bits(SourceKind::UniformRandom, n_bits, static_cast<std::uint64_t>(s)));
        tx.push_back(nrz_modulate(streams.back(), 1.0 / bitrate, spu, amplitude_mv * 1e-3));
    }

    std::optional<double> moderate, high;
    std::printf("scale,min_clusters,max_clusters,min_separation_ui,isi_split_ui\n");
    const auto n_steps = static_cast<int>(std::floor((hi - lo) / step + 1e-6));
    for (int i = 0; i <= n_steps; ++i) {
        const double s = lo + step * i;
        int cmin = 1 << 30, cmax = 0;
        double sep_min = 1.0, split = 0.0;
        bool usable = true;
        for (std::size_t k = 0; k < tx.size(); ++k) {
            Waveform rx = tx[k];
            try {
                rx = apply_channel(tx[k], ChannelConfig::ladder(s, bitrate, fast_ratio));
            } catch (const ConfigError& e) {
                std::printf("%.3f,unusable: %s\n", s, e.what());
                usable = false;
                break;
            }
            const auto times = crossing_times(rx, 0.0);
            const CrossingHistogram h = crossing_histogram(times, rx.ui());
            cmin = std::min(cmin, h.cluster_count);
            cmax = std::max(cmax, h.cluster_count);
            double sep = 0.0;
            if (h.cluster_count == 2) {
                sep = std::abs(h.cluster_centers[1] - h.cluster_centers[0]) / rx.ui();
                sep = std::min(sep, 1.0 - sep);
            }
            sep_min = std::min(sep_min, sep);
            split = std::max(split, std::abs(isi_split_ui(times, streams[k], rx.ui())));
        }
        if (!usable) continue;
        std::printf("%.3f,%d,%d,%.4f,%.4f\n", s, cmin, cmax, sep_min, split);
        if (cmin == 2 && cmax == 2 && sep_min >= min_separation_ui) moderate = s;
        if (!high && moderate && cmin == 1 && cmax == 1 && split < max_split_ui) high = s;
    }
    if (moderate) std::printf("# moderate-bandwidth scale: %.3f\n", *moderate);
    else std::printf("# moderate-bandwidth scale: none in range\n");
    if (high) std::printf("# high-bandwidth scale: %.3f\n", *high);
    else std::printf("# high-bandwidth scale: none in range\n");
    return 0;
}
