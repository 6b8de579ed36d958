#include "cdrlab/commands.hpp"
#include "cdrlab/config.hpp"
#include "cdrlab/errors.hpp"
#include "cdrlab/io.hpp"
#include "cdrlab/plot.hpp"

#include <catch_amalgamated.hpp>

#include <filesystem>
#include <string>

using namespace cdrlab;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const auto d = fs::temp_directory_path() / ("cdrlab_test_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

std::string error_of(std::string_view text) {
    try {
        parse_config(text, "t.cfg").validate();
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

bool contains(const std::string& s, std::string_view part) { return s.find(part) != std::string::npos; }

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }
std::string second_line(const std::string& s) {
    const auto a = s.find('\n') + 1;
    return s.substr(a, s.find('\n', a) - a);
}

ExperimentConfig small_config() {
    ExperimentConfig c;
    c.data.n_bits = 12000;
    c.channel.preset = "high-bandwidth";
    c.analysis.offsets_mv = {-4.0, 4.0, 4.0};
    c.analysis.min_edges = 5000;
    c.model.n_bits = 4000;
    c.model.thresholds = {"R", "Q", "3.5"};
    return c;
}

}  // namespace

TEST_CASE("serialized config parses back to the same config") {
    ExperimentConfig c = small_config();
    c.data.seed = 123456789012345ULL;
    c.data.source_kind = SourceKind::Prbs15;
    c.loop.kvco_hz_per_v = 0.1 + 0.2;  // not a short decimal
    c.loop.vth_enabled = true;
    c.channel.preset = "none";
    c.channel.sections = {{1.5e9, 0.55}, {3e9, 0.3}};
    const auto text = serialize_config(c);
    const auto back = parse_config(text);
    CHECK(back == c);
    CHECK(serialize_config(back) == text);
    CHECK(config_hash(back) == config_hash(c));
}

TEST_CASE("config hash is stable and sensitive") {
    const ExperimentConfig a;
    CHECK(config_hash(a) == config_hash(ExperimentConfig{}));
    CHECK(config_hash(a).size() == 64);
    ExperimentConfig b;
    b.loop.v_off_mv = 1e-9;
    CHECK(config_hash(a) != config_hash(b));
    // Known SHA-256 vector.
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("comments, blank lines and defaults") {
    const auto c = parse_config("# header\n\n  data.n_bits = 5000   # inline\nloop.vth_enabled = true\n");
    CHECK(c.data.n_bits == 5000);
    CHECK(c.loop.vth_enabled);
    CHECK(c.loop.f0_hz == 1e9);
}

TEST_CASE("config errors name the line and the key") {
    CHECK(contains(error_of("data.n_bits = 100\nbogus.key = 1\n"), "t.cfg:2: unknown key 'bogus.key'"));
    CHECK(contains(error_of("data.seed = 1\n\ndata.seed = 2\n"), "t.cfg:3: key 'data.seed' set twice"));
    CHECK(contains(error_of("loop.icp_A = lots\n"), "t.cfg:1: loop.icp_A"));
    CHECK(contains(error_of("data.n_bits = 1.5\n"), "data.n_bits"));
    CHECK(contains(error_of("loop.vth_enabled = maybe\n"), "loop.vth_enabled"));
    CHECK(contains(error_of("just some words\n"), "t.cfg:1: expected key = value"));
    CHECK(contains(error_of("data.source_kind = morse\n"), "data.source_kind"));
    CHECK(contains(error_of("channel.sections_Hz_Q = 1e9\n"), "channel.sections_Hz_Q"));
}

TEST_CASE("validation rejects out-of-range values by key") {
    CHECK(contains(error_of("model.tau1_ui = 0.1\nmodel.tau3_ui = -0.1\n"), "model.tau1_ui: tau ordering violated"));
    CHECK(contains(error_of("data.samples_per_ui = 8\n"), "data.samples_per_ui"));
    CHECK(contains(error_of("loop.c_F = 0\n"), "loop"));
    CHECK(contains(error_of("data.noise_rms_mV = -1\n"), "data.noise_rms_mV"));
    CHECK(contains(error_of("channel.sections_Hz_Q = 1e9:0.5\n"), "channel.preset = none"));
    CHECK(error_of("channel.preset = none\nchannel.sections_Hz_Q = 1e9:0.5\n").empty());
}

TEST_CASE("offset ranges") {
    const auto r = parse_offset_range("-30:30:2");
    CHECK(r == OffsetRange{-30.0, 30.0, 2.0});
    CHECK(r.volts().size() == 31);
    CHECK(r.volts().front() == Catch::Approx(-0.030));
    CHECK(parse_offset_range(format_offset_range(r)) == r);
    CHECK_THROWS_AS(parse_offset_range("1:2"), ConfigError);
    CHECK_THROWS_AS(parse_offset_range("2:1:1"), ConfigError);
    CHECK_THROWS_AS(parse_offset_range("0:1:0"), ConfigError);
}

TEST_CASE("shipped configs load") {
    for (const char* name : {"case1.cfg", "case2.cfg", "track_case1.cfg", "track_case2.cfg", "oracle.cfg"}) {
        CAPTURE(name);
        CHECK_NOTHROW(load_config(std::string(CDRLAB_CONFIG_DIR) + "/" + name));
    }
    CHECK_THROWS_AS(load_config("/nonexistent/x.cfg"), IoError);
}

TEST_CASE("numbers round-trip through their text form") {
    for (double v : {0.1, 1.0 / 3.0, -2.5e-17, 1e300, 0.0})
        CHECK(std::stod(format_number(v)) == v);
    CHECK(format_number(std::numeric_limits<double>::quiet_NaN()) == "nan");
}

TEST_CASE("every CSV carries the version header and its column line") {
    const std::string h(64, 'a');
    CHECK(csv_header(h) == "# cdrlab-1.0.0 config_sha256=" + h + "\n");

    SweepCurve curve;
    curve.points.push_back({-0.002, 0.002, 0.01, true});
    curve.points.push_back({0.0, 0.0, std::numeric_limits<double>::quiet_NaN(), false});
    const auto s = sweep_csv(curve, h);
    CHECK(first_line(s) == first_line(csv_header(h)));
    CHECK(second_line(s) == kSweepColumns);
    CHECK(contains(s, "nan"));

    SimTrace tr;
    tr.ui = 1e-9;
    tr.falling_edges = {0.5e-9, 1.5e-9};
    tr.record_time = {0.0, 1e-9};
    tr.record_v_c = {0.0, 0.1};
    tr.record_v_th_fb = {0.0, 1e-4};
    CHECK(second_line(track_csv(tr, h)) == kTrackColumns);
    CHECK(second_line(edges_csv(tr, h)) == kEdgeColumns);
}

TEST_CASE("manifest JSON round trip") {
    RunManifest m;
    m.command = "sweep";
    m.artifact_version = std::string(kArtifactVersion);
    m.config_hash = std::string(64, 'f');
    m.seeds = {{"data.seed", 7}, {"loop.metastability_seed", 18446744073709551615ULL}};
    m.files = {{"sweep.csv", std::string(64, '0'), 1234}};
    m.wall_time_s = 1.25;
    const auto back = RunManifest::from_json(m.to_json());
    CHECK(back.command == m.command);
    CHECK(back.artifact_version == m.artifact_version);
    CHECK(back.config_hash == m.config_hash);
    CHECK(back.seeds == m.seeds);
    REQUIRE(back.files.size() == 1);
    CHECK(back.files[0].path == "sweep.csv");
    CHECK(back.files[0].bytes == 1234);
    CHECK(back.wall_time_s == 1.25);
    CHECK_THROWS(RunManifest::from_json("{not json"));
}

TEST_CASE("plot picks the renderer from the column line") {
    SweepCurve curve;
    for (int i = -2; i <= 2; ++i) curve.points.push_back({i * 1e-3, -i * 1e-3, 0.01 + 0.001 * i * i, true});
    const auto svg = render_svg(sweep_csv(curve, std::string(64, '0')));
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(contains(svg, "</svg>"));
    CHECK_THROWS_AS(render_svg("# x\na,b,c\n1,2,3\n"), ConfigError);
    CHECK_THROWS_AS(render_svg(""), ConfigError);
}

TEST_CASE("ideal channel eye has one crossing bin") {
    ExperimentConfig c = small_config();
    c.channel.preset = "none";
    const auto r = run_eye(c);
    CHECK(r.histogram.cluster_count == 1);
    std::size_t occupied = 0;
    for (auto n : r.histogram.counts) occupied += n > 0;
    CHECK(occupied == 1);
}

TEST_CASE("commands write identical artifacts for identical configs") {
    const ExperimentConfig c = small_config();
    using Cmd = RunManifest (*)(const ExperimentConfig&, const fs::path&);
    for (auto [name, cmd] : {std::pair<const char*, Cmd>{"eye", cmd_eye}, {"sweep", cmd_sweep}, {"oracle", cmd_oracle}}) {
        CAPTURE(name);
        const auto dir = scratch_dir(std::string(name) + "_a");
        const auto a = cmd(c, dir);
        const auto b = cmd(c, scratch_dir(std::string(name) + "_b"));
        CHECK(a.command == name);
        CHECK(a.config_hash == config_hash(c));
        REQUIRE(a.files.size() == b.files.size());
        for (std::size_t i = 0; i < a.files.size(); ++i) {
            CHECK(a.files[i].path == b.files[i].path);
            CHECK(a.files[i].sha256 == b.files[i].sha256);
            const auto bytes = read_file(dir / a.files[i].path);
            CHECK(sha256_hex(bytes) == a.files[i].sha256);
            CHECK(bytes.size() == a.files[i].bytes);
        }
        // The stored config reproduces the hash.
        const auto stored = read_file(dir / "config.cfg");
        CHECK(config_hash(parse_config(stored)) == a.config_hash);
        const auto manifest = RunManifest::from_json(read_file(dir / "manifest.json"));
        CHECK(manifest.files.size() == a.files.size());
    }
}

TEST_CASE("track needs tracking enabled and reports lock") {
    ExperimentConfig c = small_config();
    CHECK_THROWS_AS(run_track(c), ConfigError);
    c.loop.vth_enabled = true;
    c.data.n_bits = 20000;
    const auto dir = scratch_dir("track");
    const auto m = cmd_track(c, dir);
    CHECK(fs::exists(dir / "track.csv"));
    CHECK(fs::exists(dir / "edges.csv"));
    // A loop too weak to follow a 1 % frequency error is reported, after
    // its artifacts are written.
    c.loop.icp_a = 1e-12;
    c.loop.f0_hz = 1.01e9;
    const auto dir2 = scratch_dir("track_nolock");
    CHECK_THROWS_AS(cmd_track(c, dir2), LockError);
    CHECK(fs::exists(dir2 / "manifest.json"));
}

TEST_CASE("unwritable output is an I/O error") {
    CHECK_THROWS_AS(write_file("/proc/cdrlab_cannot_write/x.csv", "x"), IoError);
    CHECK_THROWS_AS(read_file("/nonexistent/file.csv"), IoError);
}
