#include "cdrlab/config.hpp"

#include "cdrlab/analysis.hpp"
#include "cdrlab/errors.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace cdrlab {

namespace {

std::string_view trim(std::string_view s) {
    const auto ws = " \t\r";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
        const auto next = s.find(sep, pos);
        out.push_back(trim(s.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos)));
        if (next == std::string_view::npos) break;
        pos = next + 1;
    }
    return out;
}

double to_double(std::string_view s) {
    double v = 0.0;
    const auto* end = s.data() + s.size();
    const auto r = std::from_chars(s.data(), end, v);
    if (r.ec != std::errc{} || r.ptr != end || !std::isfinite(v))
        throw ConfigError("expected a number, got '" + std::string(s) + "'");
    return v;
}

template <typename T>
T to_integer(std::string_view s) {
    T v{};
    const auto* end = s.data() + s.size();
    const auto r = std::from_chars(s.data(), end, v);
    if (r.ec != std::errc{} || r.ptr != end)
        throw ConfigError("expected an integer, got '" + std::string(s) + "'");
    return v;
}

bool to_bool(std::string_view s) {
    if (s == "true") return true;
    if (s == "false") return false;
    throw ConfigError("expected true or false, got '" + std::string(s) + "'");
}

// Shortest representation that reads back to the same double.
std::string fmt(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

std::string fmt(bool b) { return b ? "true" : "false"; }

template <typename T>
std::string fmt_int(T v) { return std::to_string(v); }

std::string join(const std::vector<std::string>& v, const char* sep) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += sep;
        out += v[i];
    }
    return out;
}

struct Key {
    std::function<void(ExperimentConfig&, std::string_view)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

// Ordered by name so serialization is canonical.
const std::map<std::string, Key>& keys() {
    static const std::map<std::string, Key> table = [] {
        std::map<std::string, Key> t;
        auto num = [&t](const char* name, auto member) {
            t[name] = {[member](ExperimentConfig& c, std::string_view v) { member(c) = to_double(v); },
                       [member](const ExperimentConfig& c) { return fmt(member(const_cast<ExperimentConfig&>(c))); }};
        };
        auto integer = [&t](const char* name, auto member) {
            using T = std::remove_reference_t<decltype(member(std::declval<ExperimentConfig&>()))>;
            t[name] = {[member](ExperimentConfig& c, std::string_view v) { member(c) = to_integer<T>(v); },
                       [member](const ExperimentConfig& c) { return fmt_int(member(const_cast<ExperimentConfig&>(c))); }};
        };
        auto boolean = [&t](const char* name, auto member) {
            t[name] = {[member](ExperimentConfig& c, std::string_view v) { member(c) = to_bool(v); },
                       [member](const ExperimentConfig& c) { return fmt(member(const_cast<ExperimentConfig&>(c))); }};
        };
#define CDR_FIELD(expr) [](ExperimentConfig& c) -> auto& { return c.expr; }
        integer("data.n_bits", CDR_FIELD(data.n_bits));
        integer("data.seed", CDR_FIELD(data.seed));
        num("data.amplitude_mV", CDR_FIELD(data.amplitude_mv));
        num("data.bitrate_Hz", CDR_FIELD(data.bitrate_hz));
        integer("data.samples_per_ui", CDR_FIELD(data.samples_per_ui));
        num("data.noise_rms_mV", CDR_FIELD(data.noise_rms_mv));
        t["data.source_kind"] = {
            [](ExperimentConfig& c, std::string_view v) { c.data.source_kind = source_kind_from_string(v); },
            [](const ExperimentConfig& c) { return std::string(to_string(c.data.source_kind)); }};

        t["channel.preset"] = {
            [](ExperimentConfig& c, std::string_view v) {
                if (v != "none") channel_preset_from_string(v);
                c.channel.preset = std::string(v);
            },
            [](const ExperimentConfig& c) { return c.channel.preset; }};
        t["channel.sections_Hz_Q"] = {
            [](ExperimentConfig& c, std::string_view v) {
                c.channel.sections.clear();
                if (v.empty()) return;
                for (auto item : split(v, ',')) {
                    const auto fq = split(item, ':');
                    if (fq.size() != 2) throw ConfigError("section '" + std::string(item) + "' is not f:Q");
                    c.channel.sections.push_back({to_double(fq[0]), to_double(fq[1])});
                }
            },
            [](const ExperimentConfig& c) {
                std::vector<std::string> items;
                for (const auto& s : c.channel.sections)
                    items.push_back(fmt(s.natural_frequency_hz) + ":" + fmt(s.quality_factor));
                return join(items, ",");
            }};

        num("loop.f0_Hz", CDR_FIELD(loop.f0_hz));
        num("loop.kvco_Hz_per_V", CDR_FIELD(loop.kvco_hz_per_v));
        num("loop.icp_A", CDR_FIELD(loop.icp_a));
        num("loop.r_ohm", CDR_FIELD(loop.r_ohm));
        num("loop.c_F", CDR_FIELD(loop.c_f));
        num("loop.v_off_mV", CDR_FIELD(loop.v_off_mv));
        num("loop.vth_gain_mV", CDR_FIELD(loop.vth_gain_mv));
        boolean("loop.vth_enabled", CDR_FIELD(loop.vth_enabled));
        num("loop.vth_limit_mV", CDR_FIELD(loop.vth_limit_mv));
        integer("loop.metastability_seed", CDR_FIELD(loop.metastability_seed));
        num("loop.initial_phase_ui", CDR_FIELD(loop.initial_phase_ui));

        t["analysis.offsets_mV"] = {
            [](ExperimentConfig& c, std::string_view v) { c.analysis.offsets_mv = parse_offset_range(v); },
            [](const ExperimentConfig& c) { return format_offset_range(c.analysis.offsets_mv); }};
        integer("analysis.histogram_bins", CDR_FIELD(analysis.histogram_bins));
        integer("analysis.eye_voltage_bins", CDR_FIELD(analysis.eye_voltage_bins));
        integer("analysis.record_stride_samples", CDR_FIELD(analysis.record_stride_samples));
        integer("analysis.min_edges", CDR_FIELD(analysis.min_edges));

        num("model.amplitude_mV", CDR_FIELD(model.amplitude_mv));
        num("model.isi_fraction", CDR_FIELD(model.isi_fraction));
        num("model.tau1_ui", CDR_FIELD(model.tau1_ui));
        num("model.tau3_ui", CDR_FIELD(model.tau3_ui));
        num("model.edge_width_ui", CDR_FIELD(model.edge_width_ui));
        t["model.thresholds"] = {
            [](ExperimentConfig& c, std::string_view v) {
                c.model.thresholds.clear();
                for (auto item : split(v, ',')) {
                    if (item != "P" && item != "Q" && item != "R") to_double(item);
                    c.model.thresholds.emplace_back(item);
                }
            },
            [](const ExperimentConfig& c) { return join(c.model.thresholds, ","); }};
        integer("model.grid", CDR_FIELD(model.grid));
        integer("model.n_bits", CDR_FIELD(model.n_bits));
#undef CDR_FIELD
        return t;
    }();
    return table;
}

}  // namespace

std::vector<double> OffsetRange::volts() const {
    auto v = offset_range(start_mv, stop_mv, step_mv);
    for (double& x : v) x *= 1e-3;
    return v;
}

OffsetRange parse_offset_range(std::string_view text) {
    const auto parts = split(text, ':');
    if (parts.size() != 3) throw ConfigError("offset range '" + std::string(text) + "' is not start:stop:step");
    OffsetRange r{to_double(parts[0]), to_double(parts[1]), to_double(parts[2])};
    if (!(r.step_mv > 0.0) || r.stop_mv < r.start_mv)
        throw ConfigError("offset range '" + std::string(text) + "' needs step > 0 and stop >= start");
    return r;
}

std::string format_offset_range(const OffsetRange& r) {
    return fmt(r.start_mv) + ":" + fmt(r.stop_mv) + ":" + fmt(r.step_mv);
}

bool ChannelSection::operator==(const ChannelSection& o) const {
    if (preset != o.preset || sections.size() != o.sections.size()) return false;
    for (std::size_t i = 0; i < sections.size(); ++i)
        if (sections[i].natural_frequency_hz != o.sections[i].natural_frequency_hz ||
            sections[i].quality_factor != o.sections[i].quality_factor)
            return false;
    return true;
}

void ExperimentConfig::validate() const {
    const auto fail = [](const std::string& key, const std::string& why) {
        throw ConfigError(key + ": " + why);
    };
    if (data.n_bits < 16) fail("data.n_bits", "need at least 16 bits");
    if (!(data.amplitude_mv > 0.0)) fail("data.amplitude_mV", "must be > 0");
    if (!(data.bitrate_hz > 0.0)) fail("data.bitrate_Hz", "must be > 0");
    if (data.samples_per_ui < kMinSamplesPerUi)
        fail("data.samples_per_ui", "must be >= " + std::to_string(kMinSamplesPerUi));
    if (!(data.noise_rms_mv >= 0.0)) fail("data.noise_rms_mV", "must be >= 0");
    if (data.source_kind == SourceKind::Explicit) fail("data.source_kind", "explicit streams are API-only");
    if (channel.preset != "none" && !channel.sections.empty())
        fail("channel.sections_Hz_Q", "set channel.preset = none to use explicit sections");
    for (const auto& s : channel.sections)
        if (!(s.natural_frequency_hz > 0.0) || !(s.quality_factor > 0.0))
            fail("channel.sections_Hz_Q", "frequencies and Q must be > 0");
    if (channel.sections.size() > kMaxChannelSections)
        fail("channel.sections_Hz_Q", "at most " + std::to_string(kMaxChannelSections) + " sections");
    try {
        loop_config().validate();
    } catch (const ConfigError& e) {
        fail("loop", e.what());
    }
    if (analysis.histogram_bins < 8) fail("analysis.histogram_bins", "must be >= 8");
    if (analysis.eye_voltage_bins < 2) fail("analysis.eye_voltage_bins", "must be >= 2");
    if (analysis.record_stride_samples < 1) fail("analysis.record_stride_samples", "must be >= 1");
    if (model.grid < 8) fail("model.grid", "must be >= 8");
    if (model.n_bits < 1000) fail("model.n_bits", "need at least 1000 bits");
    if (model.thresholds.empty()) fail("model.thresholds", "empty list");
    if (!(model.tau1_ui < model.tau3_ui))
        fail("model.tau1_ui", "tau ordering violated: tau1 must be < tau3");
}

ChannelConfig ExperimentConfig::channel_config() const {
    if (channel.preset == "none") {
        ChannelConfig c;
        c.sections = channel.sections;
        return c;
    }
    return ChannelConfig::from_preset(channel_preset_from_string(channel.preset), data.bitrate_hz);
}

LoopConfig ExperimentConfig::loop_config() const {
    LoopConfig c;
    c.f0 = loop.f0_hz;
    c.kvco = loop.kvco_hz_per_v;
    c.icp = loop.icp_a;
    c.r_filter = loop.r_ohm;
    c.c_filter = loop.c_f;
    c.v_off = loop.v_off_mv * 1e-3;
    c.vth_gain = loop.vth_gain_mv * 1e-3;
    c.vth_enabled = loop.vth_enabled;
    c.vth_limit = loop.vth_limit_mv * 1e-3;
    c.metastability_seed = loop.metastability_seed;
    c.initial_phase_ui = loop.initial_phase_ui;
    return c;
}

IsiModelParams ExperimentConfig::model_params() const {
    IsiModelParams p;
    p.ui = ui();
    p.amplitude = model.amplitude_mv * 1e-3;
    p.isi_fraction = model.isi_fraction;
    p.tau1_ui = model.tau1_ui;
    p.tau3_ui = model.tau3_ui;
    p.edge_width_ui = model.edge_width_ui;
    return p;
}

ExperimentConfig parse_config(std::string_view text, std::string_view source_name) {
    ExperimentConfig cfg;
    std::set<std::string> seen;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;

        const auto where = std::string(source_name) + ":" + std::to_string(line_no) + ": ";
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ConfigError(where + "expected key = value");
        const std::string key(trim(line.substr(0, eq)));
        const auto value = trim(line.substr(eq + 1));
        const auto it = keys().find(key);
        if (it == keys().end()) throw ConfigError(where + "unknown key '" + key + "'");
        if (!seen.insert(key).second) throw ConfigError(where + "key '" + key + "' set twice");
        try {
            it->second.set(cfg, value);
        } catch (const ConfigError& e) {
            throw ConfigError(where + key + ": " + e.what());
        }
    }
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path);
}

std::string serialize_config(const ExperimentConfig& cfg) {
    std::string out;
    std::string section;
    for (const auto& [name, key] : keys()) {
        const auto dot = name.find('.');
        if (name.compare(0, dot, section) != 0 || section.size() != dot) {
            if (!section.empty()) out += '\n';
            section = name.substr(0, dot);
        }
        out += name + " = " + key.get(cfg) + "\n";
    }
    return out;
}

std::string sha256_hex(std::string_view bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw Error("sha256: digest failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 0xf];
    }
    return out;
}

std::string config_hash(const ExperimentConfig& cfg) { return sha256_hex(serialize_config(cfg)); }

}  // namespace cdrlab
