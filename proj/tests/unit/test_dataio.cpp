#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>

#include "concurrence/dataio.hpp"
#include "concurrence/error.hpp"
#include "concurrence/generators.hpp"
#include "concurrence/report.hpp"
#include "concurrence/trainer.hpp"

using namespace concurrence;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("concurrence_io_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

void spit(const fs::path& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << bytes;
}

std::uint32_t u32_at(const std::string& b, std::size_t pos) {
    return static_cast<std::uint32_t>(static_cast<unsigned char>(b[pos])) |
           static_cast<std::uint32_t>(static_cast<unsigned char>(b[pos + 1])) << 8 |
           static_cast<std::uint32_t>(static_cast<unsigned char>(b[pos + 2])) << 16 |
           static_cast<std::uint32_t>(static_cast<unsigned char>(b[pos + 3])) << 24;
}

void set_u32(std::string& b, std::size_t pos, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b[pos + i] = static_cast<char>((v >> (8 * i)) & 0xFF);
}

std::string error_code(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return "no error";
}

Dataset small_dataset(std::uint64_t seed, std::size_t kx = 1, std::size_t ky = 1) {
    Rng rng(seed);
    Dataset d;
    for (std::size_t i = 0; i < 3; ++i) {
        SignalPair p;
        p.id = i;
        p.kx = kx;
        p.ky = ky;
        p.length = 64;
        for (std::size_t t = 0; t < kx * 64; ++t) p.x.push_back(rng.normal());
        for (std::size_t t = 0; t < ky * 64; ++t) p.y.push_back(rng.normal());
        d.pairs.push_back(std::move(p));
    }
    d.manifest = Json{{"generator", "test"}, {"seed", seed}};
    return d;
}

}  // namespace

TEST_SUITE("dataio") {

TEST_CASE("dataset layout and roundtrip") {
    const fs::path dir = temp_dir("layout");
    const Dataset d = small_dataset(1, 2, 3);
    const Json manifest = write_dataset(d, dir / "d.ccd");
    const std::string bytes = slurp(dir / "d.ccd");
    CHECK(bytes.size() == kDatasetHeaderBytes + 3 * (2 + 3) * 64 * 4);
    CHECK(bytes.substr(0, 4) == "CCD1");
    CHECK(u32_at(bytes, 6) == 3);
    CHECK(u32_at(bytes, 10) == 64);
    CHECK(u32_at(bytes, 14) == 2);
    CHECK(u32_at(bytes, 18) == 3);
    // first payload value is x[0] of pair 0 as a little-endian float
    float first = 0.0f;
    std::memcpy(&first, bytes.data() + kDatasetHeaderBytes, 4);
    CHECK(first == static_cast<float>(d.pairs[0].x[0]));

    const Dataset back = read_dataset(dir / "d.ccd");
    REQUIRE(back.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(back.pairs[i].id == i);
        CHECK(back.pairs[i].kx == 2);
        CHECK(back.pairs[i].ky == 3);
        for (std::size_t t = 0; t < d.pairs[i].x.size(); ++t) {
            CHECK(back.pairs[i].x[t] == static_cast<double>(static_cast<float>(d.pairs[i].x[t])));
        }
        for (std::size_t t = 0; t < d.pairs[i].y.size(); ++t) {
            CHECK(back.pairs[i].y[t] == static_cast<double>(static_cast<float>(d.pairs[i].y[t])));
        }
    }
    CHECK(back.manifest.at("generator") == "test");
    CHECK(manifest.contains("payload_fnv1a64"));
    CHECK(manifest_hash(dir / "d.ccd") == hex64(fnv1a64(slurp(manifest_path(dir / "d.ccd")))));
    fs::remove_all(dir);
}

TEST_CASE("dataset corruption is reported with distinct codes") {
    const fs::path dir = temp_dir("corrupt");
    const fs::path path = dir / "d.ccd";
    write_dataset(small_dataset(2), path);
    const std::string good = slurp(path);
    auto read = [&] { read_dataset(path); };

    std::string bad = good;
    bad[0] = 'X';
    spit(path, bad);
    CHECK(error_code(read) == "bad_magic");
    CHECK_THROWS_WITH_AS(read(), doctest::Contains("not a concurrence dataset"), Error);

    bad = good;
    set_u32(bad, 6, 4);  // N inflated by one
    spit(path, bad);
    CHECK(error_code(read) == "truncated_payload");

    bad = good;
    bad[4] = 9;
    spit(path, bad);
    CHECK(error_code(read) == "unsupported_version");

    spit(path, good + "xx");
    CHECK(error_code(read) == "trailing_bytes");

    bad = good;
    bad[kDatasetHeaderBytes + 5] ^= 0x10;
    spit(path, bad);
    CHECK(error_code(read) == "checksum_mismatch");

    spit(path, good);
    CHECK_NOTHROW(read());
    ReadOptions tiny;
    tiny.max_bytes = 100;
    CHECK(error_code([&] { read_dataset(path, tiny); }) == "size_cap");

    // header claims a huge payload: rejected before any allocation
    bad = good;
    set_u32(bad, 6, 0xFFFFFFFFu);
    set_u32(bad, 10, 0xFFFFFFFFu);
    spit(path, bad);
    CHECK(error_code(read) == "size_cap");

    spit(path, good);
    std::string manifest = slurp(manifest_path(path));
    fs::remove(manifest_path(path));
    CHECK(error_code(read) == "missing_manifest");
    ReadOptions lax;
    lax.require_manifest = false;
    CHECK_NOTHROW(read_dataset(path, lax));

    Json m = Json::parse(manifest);
    m["n_pairs"] = 7;
    spit(manifest_path(path), m.dump(2));
    CHECK(error_code(read) == "manifest_mismatch");
    fs::remove_all(dir);
}

TEST_CASE("errors are data-integrity failures") {
    const fs::path dir = temp_dir("kind");
    spit(dir / "x.ccd", "nope");
    try {
        read_dataset(dir / "x.ccd");
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::data_integrity);
    }
    CHECK_THROWS_AS(write_dataset(Dataset{}, dir / "e.ccd"), Error);
    fs::remove_all(dir);
}

TEST_CASE("model roundtrip keeps scores within 1e-6") {
    const fs::path dir = temp_dir("model");
    EncoderConfig c;
    c.blocks = 2;
    c.first_channels = 16;
    Rng rng(3);
    ConcurrenceModel m = build_model(c, 2, 1, 40, rng);
    // move running statistics away from their defaults
    for (auto& b : m.f.blocks) {
        for (auto& v : b.bn.running_mean) v = rng.uniform(-0.5, 0.5);
        for (auto& v : b.bn.running_var) v = rng.uniform(0.5, 2.0);
    }
    write_model(m, dir / "m.ccm", Json{{"note", "x"}});
    Json extra;
    const ConcurrenceModel back = read_model(dir / "m.ccm", &extra);
    CHECK(extra.at("note") == "x");
    CHECK(back.w == 40);
    CHECK(back.w_out == m.w_out);
    CHECK(back.config.first_channels == 16);

    std::vector<double> xb(50 * 2 * 40), yb(50 * 40);
    for (auto& v : xb) v = rng.normal();
    for (auto& v : yb) v = rng.normal();
    const auto s1 = m.score_eval(xb, yb, 50);
    const auto s2 = back.score_eval(xb, yb, 50);
    double worst = 0.0;
    std::vector<int> labels(50);
    for (std::size_t i = 0; i < 50; ++i) {
        worst = std::max(worst, std::fabs(s1[i] - s2[i]));
        labels[i] = static_cast<int>(i % 2);
    }
    CHECK(worst < 1e-6);
    CHECK(classification_accuracy(s1, labels) == classification_accuracy(s2, labels));
    fs::remove_all(dir);
}

TEST_CASE("model corruption") {
    const fs::path dir = temp_dir("model_bad");
    const fs::path path = dir / "m.ccm";
    EncoderConfig c;
    c.blocks = 1;
    c.first_channels = 4;
    Rng rng(4);
    ConcurrenceModel m = build_model(c, 1, 1, 20, rng);
    write_model(m, path);
    const std::string good = slurp(path);
    CHECK(good.substr(0, 4) == "CCM1");
    const std::uint32_t header_len = u32_at(good, 4);
    const std::string header = good.substr(8, header_len);
    auto with_header = [&](const std::string& h) {
        std::string b = good.substr(0, 4);
        b.resize(8);
        set_u32(b, 4, static_cast<std::uint32_t>(h.size()));
        return b + h + good.substr(8 + header_len);
    };
    auto read = [&] { read_model(path); };

    std::string bad = good;
    bad[good.size() - 20] ^= 0x01;  // inside the payload
    spit(path, bad);
    CHECK(error_code(read) == "checksum_mismatch");

    Json h = Json::parse(header);
    h["version"] = kModelVersion + 1;
    spit(path, with_header(h.dump()));
    CHECK(error_code(read) == "unsupported_version");
    CHECK_THROWS_WITH_AS(read(), doctest::Contains("unsupported version"), Error);

    h = Json::parse(header);
    h["parameters"][2]["shape"] = Json::array({4, 1, 6});
    spit(path, with_header(h.dump()));
    CHECK(error_code(read) == "shape_mismatch");

    h = Json::parse(header);
    h["parameters"].erase(1);
    spit(path, with_header(h.dump()));
    CHECK(error_code(read) != "no error");

    h = Json::parse(header);
    h["parameters"][1] = h["parameters"][0];
    spit(path, with_header(h.dump()));
    CHECK(error_code(read) == "duplicate_parameter");

    bad = good;
    bad[1] = 'X';
    spit(path, bad);
    CHECK(error_code(read) == "bad_magic");

    spit(path, good.substr(0, good.size() - 3));
    CHECK(error_code(read) != "no error");
    fs::remove_all(dir);
}

TEST_CASE("reports render deterministically") {
    Report r;
    r.meta = Json{{"command", "test"}, {"seed", 1}};
    r.rows.push_back(Json{{"a", 0.1 + 0.2}, {"b", 1}, {"name", "x,y"}});
    r.rows.push_back(Json{{"a", 1.0 / 3.0}, {"b", 2}, {"name", "plain"}});
    r.summary = Json{{"n", 2}};
    const std::string json = render_report(r, ReportFormat::json);
    CHECK(json == render_report(r, ReportFormat::json));
    CHECK(json.find("0.3,") != std::string::npos);  // 9 significant digits
    CHECK(json.find("0.333333333") != std::string::npos);
    CHECK(json.find("0.3333333333") == std::string::npos);
    const std::string csv = render_report(r, ReportFormat::csv);
    CHECK(csv.find("a,b,name") != std::string::npos);
    CHECK(csv.find("\"x,y\"") != std::string::npos);

    const fs::path dir = temp_dir("report");
    write_report(r, dir / "a.json", ReportFormat::json);
    write_report(r, dir / "b.json", ReportFormat::json);
    CHECK(slurp(dir / "a.json") == slurp(dir / "b.json"));
    CHECK(slurp(dir / "a.json") == json);
    CHECK_THROWS_AS(write_report(r, dir / "missing" / "sub" / "a.json", ReportFormat::json), Error);
    fs::remove_all(dir);

    CHECK(round9(1.0 / 3.0) == 0.333333333);
    CHECK(format_for_path("x.csv") == ReportFormat::csv);
    CHECK(format_for_path("x.json") == ReportFormat::json);
    CHECK_THROWS_AS(parse_report_format("xml"), Error);
}

TEST_CASE("empty reports are rejected") {
    Report r;
    CHECK_THROWS_AS(render_report(r, ReportFormat::json), Error);
}

TEST_CASE("non-finite values are flagged") {
    Report r;
    r.rows.push_back(Json{{"stat", std::numeric_limits<double>::quiet_NaN()}});
    r.rows.push_back(Json{{"stat", 0.5}});
    const std::string json = render_report(r, ReportFormat::json);
    CHECK(json.find("\"stat\": null") != std::string::npos);
    CHECK(json.find("non_finite") != std::string::npos);
    const std::string csv = render_report(r, ReportFormat::csv);
    CHECK(csv.find("NaN") != std::string::npos);
    CHECK(csv.find("warning") != std::string::npos);
}

}  // TEST_SUITE
