#include "cdrlab/io.hpp"

#include "cdrlab/config.hpp"
#include "cdrlab/errors.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace cdrlab {

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

std::string csv_header(std::string_view config_hash) {
    return "# " + std::string(kArtifactVersion) + " config_sha256=" + std::string(config_hash) + "\n";
}

namespace {

std::string begin_csv(std::string_view hash, std::string_view columns) {
    return csv_header(hash) + std::string(columns) + "\n";
}

}  // namespace

std::string sweep_csv(const SweepCurve& curve, std::string_view config_hash) {
    std::string out = begin_csv(config_hash, kSweepColumns);
    for (const auto& p : curve.points) {
        out += format_number(p.v_off * 1e3) + ',' + format_number(p.eff_threshold * 1e3) + ',' +
               format_number(100.0 * p.pk_pk_ui) + ',' + (p.locked ? "1" : "0") + '\n';
    }
    return out;
}

std::string oracle_csv(const OracleResult& r, std::string_view config_hash) {
    std::string out = begin_csv(config_hash, kOracleColumns);
    for (std::size_t i = 0; i < r.probability.size(); ++i) {
        out += format_number(r.edge_phase_ui[i]) + ',' + format_number(r.probability[i]) + ',' +
               format_number(r.drift_steps[i]) + '\n';
    }
    return out;
}

std::string track_csv(const SimTrace& trace, std::string_view config_hash) {
    std::string out = begin_csv(config_hash, kTrackColumns);
    for (std::size_t i = 0; i < trace.record_time.size(); ++i) {
        out += format_number(trace.record_time[i]) + ',' + format_number(trace.record_v_c[i]) + ',' +
               format_number(trace.record_v_th_fb[i]) + '\n';
    }
    return out;
}

std::string edges_csv(const SimTrace& trace, std::string_view config_hash) {
    std::string out = begin_csv(config_hash, kEdgeColumns);
    for (std::size_t i = 0; i < trace.falling_edges.size(); ++i)
        out += std::to_string(i) + ',' + format_number(trace.falling_edges[i]) + '\n';
    return out;
}

std::string eye_csv(const EyeDiagram& eye, std::string_view config_hash) {
    std::string out = begin_csv(config_hash, kEyeColumns);
    for (int t = 0; t < eye.time_bins; ++t) {
        const std::string tt = format_number(eye.time_ui_of_bin(t)) + ',';
        for (int v = 0; v < eye.voltage_bins; ++v)
            out += tt + format_number(eye.voltage_of_bin(v) * 1e3) + ',' + std::to_string(eye.at(t, v)) + '\n';
    }
    return out;
}

std::string crossing_csv(const CrossingHistogram& h, std::string_view config_hash) {
    std::string out = begin_csv(config_hash, kCrossingColumns);
    const double bin_ui = 1.0 / static_cast<double>(h.counts.size());
    for (std::size_t i = 0; i < h.counts.size(); ++i)
        out += format_number((static_cast<double>(i) + 0.5) * bin_ui) + ',' + std::to_string(h.counts[i]) + '\n';
    return out;
}

std::string oracle_table_csv(const std::vector<OracleTableRow>& rows, std::string_view config_hash) {
    std::string out = begin_csv(config_hash, kOracleTableColumns);
    for (const auto& r : rows) {
        const auto& c = r.cmp;
        out += r.label + ',' + format_number(r.threshold_mv) + ',' + format_number(c.oracle_support_ui) + ',' +
               format_number(c.oracle_expected_range_ui) + ',' + format_number(c.sim_pk_pk_ui) + ',' +
               format_number(c.ratio) + ',' + (c.sim_locked ? "1" : "0") + ',' +
               (c.transitions_lost ? "1" : "0") + '\n';
    }
    return out;
}

void write_file(const std::filesystem::path& path, std::string_view content) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory '" + path.parent_path().string() + "': " + ec.message());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string RunManifest::to_json() const {
    nlohmann::ordered_json j;
    j["command"] = command;
    j["artifact_version"] = artifact_version;
    j["config_sha256"] = config_hash;
    j["seeds"] = seeds;
    auto files_json = nlohmann::ordered_json::array();
    for (const auto& f : files)
        files_json.push_back({{"path", f.path}, {"sha256", f.sha256}, {"bytes", f.bytes}});
    j["files"] = files_json;
    j["wall_time_s"] = wall_time_s;
    return j.dump(2) + "\n";
}

RunManifest RunManifest::from_json(std::string_view text) {
    RunManifest m;
    try {
        const auto j = nlohmann::json::parse(text);
        m.command = j.at("command").get<std::string>();
        m.artifact_version = j.at("artifact_version").get<std::string>();
        m.config_hash = j.at("config_sha256").get<std::string>();
        m.seeds = j.at("seeds").get<std::map<std::string, std::uint64_t>>();
        for (const auto& f : j.at("files"))
            m.files.push_back({f.at("path").get<std::string>(), f.at("sha256").get<std::string>(),
                               f.at("bytes").get<std::uint64_t>()});
        m.wall_time_s = j.at("wall_time_s").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("manifest: ") + e.what());
    }
    return m;
}

void write_artifact(RunManifest& m, const std::filesystem::path& dir, const std::string& name,
                    std::string_view content) {
    write_file(dir / name, content);
    m.files.push_back({name, sha256_hex(content), content.size()});
}

}  // namespace cdrlab
