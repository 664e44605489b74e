#include "concurrence/dataio.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "concurrence/error.hpp"

namespace concurrence {

namespace fs = std::filesystem;

namespace {

constexpr char kDatasetMagic[4] = {'C', 'C', 'D', '1'};
constexpr char kModelMagic[4] = {'C', 'C', 'M', '1'};

void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
    out.push_back(static_cast<unsigned char>(v & 0xFF));
    out.push_back(static_cast<unsigned char>(v >> 8));
}

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::vector<unsigned char>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
}

void put_f32(std::vector<unsigned char>& out, double v) {
    put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

std::uint32_t get_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
           static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

std::uint16_t get_u16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint64_t get_u64(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

double get_f32(const unsigned char* p) { return static_cast<double>(std::bit_cast<float>(get_u32(p))); }

std::uint32_t checked_u32(std::size_t v, const char* what) {
    if (v > 0xFFFFFFFFu) throw config_error(std::string(what) + " does not fit the file format (u32)");
    return static_cast<std::uint32_t>(v);
}

void write_bytes(const fs::path& path, std::span<const unsigned char> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::config, "cannot open '" + path.string() + "' for writing", "io");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorKind::config, "failed writing '" + path.string() + "'", "io");
}

void write_text(const fs::path& path, const std::string& text) {
    write_bytes(path, {reinterpret_cast<const unsigned char*>(text.data()), text.size()});
}

std::vector<unsigned char> read_bytes(const fs::path& path, std::uint64_t max_bytes) {
    std::error_code ec;
    const auto size = fs::file_size(path, ec);
    if (ec) throw Error(ErrorKind::config, "cannot read '" + path.string() + "': " + ec.message(), "io");
    if (size > max_bytes) {
        throw integrity_error("'" + path.string() + "' exceeds the read size cap", "size_cap");
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::config, "cannot open '" + path.string() + "'", "io");
    std::vector<unsigned char> bytes(static_cast<std::size_t>(size));
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (static_cast<std::uint64_t>(in.gcount()) != size) throw Error(ErrorKind::config, "short read", "io");
    return bytes;
}

std::string read_text(const fs::path& path) {
    const auto bytes = read_bytes(path, kDefaultReadCap);
    return {bytes.begin(), bytes.end()};
}

}  // namespace

std::uint64_t fnv1a64(std::span<const unsigned char> bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t fnv1a64(const std::string& text) {
    return fnv1a64({reinterpret_cast<const unsigned char*>(text.data()), text.size()});
}

std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[static_cast<std::size_t>(i)] = digits[v & 0xF];
        v >>= 4;
    }
    return s;
}

fs::path manifest_path(const fs::path& dataset_path) {
    fs::path p = dataset_path;
    p += ".manifest.json";
    return p;
}

Json write_dataset(const Dataset& dataset, const fs::path& path) {
    if (dataset.empty()) throw config_error("refusing to write an empty dataset");
    dataset.validate();
    const std::size_t n = dataset.size();
    const std::size_t len = dataset.length();
    const std::size_t kx = dataset.kx();
    const std::size_t ky = dataset.ky();

    std::vector<unsigned char> bytes;
    bytes.reserve(kDatasetHeaderBytes + n * (kx + ky) * len * 4);
    bytes.insert(bytes.end(), std::begin(kDatasetMagic), std::end(kDatasetMagic));
    put_u16(bytes, kDatasetVersion);
    put_u32(bytes, checked_u32(n, "N"));
    put_u32(bytes, checked_u32(len, "T"));
    put_u32(bytes, checked_u32(kx, "Kx"));
    put_u32(bytes, checked_u32(ky, "Ky"));
    for (const auto& p : dataset.pairs) {
        for (double v : p.x) put_f32(bytes, v);
        for (double v : p.y) put_f32(bytes, v);
    }
    write_bytes(path, bytes);

    Json manifest = dataset.manifest.is_object() ? dataset.manifest : Json::object();
    manifest["format"] = "CCD1";
    manifest["format_version"] = kDatasetVersion;
    manifest["n_pairs"] = n;
    manifest["length"] = len;
    manifest["kx"] = kx;
    manifest["ky"] = ky;
    manifest["payload_fnv1a64"] = hex64(fnv1a64(bytes));
    write_text(manifest_path(path), manifest.dump(2) + "\n");
    return manifest;
}

Dataset read_dataset(const fs::path& path, const ReadOptions& options) {
    const auto bytes = read_bytes(path, options.max_bytes);
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kDatasetMagic, 4) != 0) {
        throw integrity_error("not a concurrence dataset: '" + path.string() + "'", "bad_magic");
    }
    if (bytes.size() < kDatasetHeaderBytes) throw integrity_error("truncated dataset header", "truncated_payload");
    const std::uint16_t version = get_u16(bytes.data() + 4);
    if (version == 0 || version > kDatasetVersion) {
        throw integrity_error("unsupported version " + std::to_string(version) + " of dataset format",
                              "unsupported_version");
    }
    const std::uint64_t n = get_u32(bytes.data() + 6);
    const std::uint64_t len = get_u32(bytes.data() + 10);
    const std::uint64_t kx = get_u32(bytes.data() + 14);
    const std::uint64_t ky = get_u32(bytes.data() + 18);
    if (n == 0 || len == 0 || kx == 0 || ky == 0) throw integrity_error("dataset header has a zero dimension", "bad_header");
    // Computed in 64 bits from u32 fields, so this cannot overflow.
    const long double expected_ld = static_cast<long double>(kDatasetHeaderBytes) +
                                    static_cast<long double>(n) * static_cast<long double>(kx + ky) *
                                        static_cast<long double>(len) * 4.0L;
    if (expected_ld > static_cast<long double>(options.max_bytes)) {
        throw integrity_error("dataset header implies a payload beyond the read size cap", "size_cap");
    }
    const auto expected = static_cast<std::uint64_t>(expected_ld);
    if (bytes.size() < expected) throw integrity_error("truncated payload", "truncated_payload");
    if (bytes.size() > expected) throw integrity_error("unexpected trailing bytes after payload", "trailing_bytes");

    Dataset d;
    d.pairs.resize(n);
    const unsigned char* p = bytes.data() + kDatasetHeaderBytes;
    for (std::size_t i = 0; i < n; ++i) {
        auto& pair = d.pairs[i];
        pair.id = i;
        pair.kx = kx;
        pair.ky = ky;
        pair.length = len;
        pair.x.resize(kx * len);
        pair.y.resize(ky * len);
        for (auto& v : pair.x) {
            v = get_f32(p);
            p += 4;
        }
        for (auto& v : pair.y) {
            v = get_f32(p);
            p += 4;
        }
    }

    const auto mpath = manifest_path(path);
    if (!fs::exists(mpath)) {
        if (options.require_manifest) throw integrity_error("missing manifest '" + mpath.string() + "'", "missing_manifest");
        return d;
    }
    Json manifest;
    try {
        manifest = Json::parse(read_text(mpath));
    } catch (const nlohmann::json::exception& e) {
        throw integrity_error("manifest is not valid JSON: " + std::string(e.what()), "manifest_mismatch");
    }
    auto field = [&](const char* key) -> std::uint64_t {
        if (!manifest.contains(key) || !manifest[key].is_number_unsigned()) {
            throw integrity_error(std::string("manifest lacks '") + key + "'", "manifest_mismatch");
        }
        return manifest[key].get<std::uint64_t>();
    };
    if (field("n_pairs") != n || field("length") != len || field("kx") != kx || field("ky") != ky) {
        throw integrity_error("manifest (N, T, Kx, Ky) disagree with the dataset header", "manifest_mismatch");
    }
    if (manifest.contains("payload_fnv1a64") && manifest["payload_fnv1a64"] != hex64(fnv1a64(bytes))) {
        throw integrity_error("dataset payload hash does not match its manifest", "checksum_mismatch");
    }
    d.manifest = std::move(manifest);
    return d;
}

std::string manifest_hash(const fs::path& dataset_path) {
    const auto mpath = manifest_path(dataset_path);
    if (!fs::exists(mpath)) return "";
    return hex64(fnv1a64(read_text(mpath)));
}

void write_model(ConcurrenceModel& model, const fs::path& path, const Json& extra) {
    const auto buffers = model.buffers();
    Json table = Json::array();
    std::size_t offset = 0;
    for (const auto& b : buffers) {
        table.push_back(Json{{"name", b.name}, {"shape", b.shape}, {"offset", offset}, {"count", b.values.size()}});
        offset += b.values.size();
    }
    const auto& c = model.config;
    Json header{{"version", kModelVersion},
                {"encoder",
                 {{"blocks", c.blocks},
                  {"first_channels", c.first_channels},
                  {"first_kernel", c.first_kernel},
                  {"kernel", c.kernel},
                  {"first_stride", c.first_stride},
                  {"stride", c.stride},
                  {"dropout", c.dropout}}},
                {"kx", model.kx},
                {"ky", model.ky},
                {"w", model.w},
                {"w_out", model.w_out},
                {"parameters", table},
                {"extra", extra}};
    const std::string text = header.dump();

    std::vector<unsigned char> payload;
    payload.reserve(offset * 4);
    for (const auto& b : buffers) {
        for (double v : b.values) put_f32(payload, v);
    }
    std::vector<unsigned char> bytes;
    bytes.insert(bytes.end(), std::begin(kModelMagic), std::end(kModelMagic));
    put_u32(bytes, checked_u32(text.size(), "model header"));
    bytes.insert(bytes.end(), text.begin(), text.end());
    bytes.insert(bytes.end(), payload.begin(), payload.end());
    put_u64(bytes, fnv1a64(payload));
    write_bytes(path, bytes);
}

ConcurrenceModel read_model(const fs::path& path, Json* extra, std::uint64_t max_bytes) {
    const auto bytes = read_bytes(path, max_bytes);
    if (bytes.size() < 8 || std::memcmp(bytes.data(), kModelMagic, 4) != 0) {
        throw integrity_error("not a concurrence model: '" + path.string() + "'", "bad_magic");
    }
    const std::uint64_t header_len = get_u32(bytes.data() + 4);
    if (8 + header_len > bytes.size()) throw integrity_error("truncated model header", "truncated_payload");
    Json header;
    try {
        header = Json::parse(bytes.begin() + 8, bytes.begin() + static_cast<std::ptrdiff_t>(8 + header_len));
    } catch (const nlohmann::json::exception& e) {
        throw integrity_error("model header is not valid JSON: " + std::string(e.what()), "bad_header");
    }
    try {
        const auto version = header.at("version").get<std::uint64_t>();
        if (version == 0 || version > kModelVersion) {
            throw integrity_error("unsupported version " + std::to_string(version) + " of model format",
                                  "unsupported_version");
        }
        const auto& e = header.at("encoder");
        EncoderConfig cfg;
        cfg.blocks = e.at("blocks").get<std::size_t>();
        cfg.first_channels = e.at("first_channels").get<std::size_t>();
        cfg.first_kernel = e.at("first_kernel").get<std::size_t>();
        cfg.kernel = e.at("kernel").get<std::size_t>();
        cfg.first_stride = e.at("first_stride").get<std::size_t>();
        cfg.stride = e.at("stride").get<std::size_t>();
        cfg.dropout = e.at("dropout").get<double>();
        const auto kx = header.at("kx").get<std::size_t>();
        const auto ky = header.at("ky").get<std::size_t>();
        const auto w = header.at("w").get<std::size_t>();
        Rng unused(0);
        ConcurrenceModel model = build_model(cfg, kx, ky, w, unused);
        if (header.at("w_out").get<std::size_t>() != model.w_out) {
            throw integrity_error("stored w_out disagrees with the encoder configuration", "shape_mismatch");
        }

        const auto& table = header.at("parameters");
        std::size_t total = 0;
        for (const auto& entry : table) total += entry.at("count").get<std::size_t>();
        const std::uint64_t payload_start = 8 + header_len;
        const long double expected = static_cast<long double>(payload_start) + 4.0L * total + 8.0L;
        if (expected > static_cast<long double>(bytes.size())) {
            throw integrity_error("truncated model payload", "truncated_payload");
        }
        if (expected < static_cast<long double>(bytes.size())) {
            throw integrity_error("unexpected trailing bytes in model file", "trailing_bytes");
        }
        const std::span<const unsigned char> payload(bytes.data() + payload_start, 4 * total);
        if (get_u64(bytes.data() + payload_start + 4 * total) != fnv1a64(payload)) {
            throw integrity_error("model payload checksum mismatch", "checksum_mismatch");
        }

        auto buffers = model.buffers();
        std::vector<bool> seen(buffers.size(), false);
        for (const auto& entry : table) {
            const auto name = entry.at("name").get<std::string>();
            const auto shape = entry.at("shape").get<Shape>();
            const auto offset = entry.at("offset").get<std::size_t>();
            const auto count = entry.at("count").get<std::size_t>();
            std::size_t idx = buffers.size();
            for (std::size_t i = 0; i < buffers.size(); ++i) {
                if (buffers[i].name == name) idx = i;
            }
            if (idx == buffers.size()) throw integrity_error("unexpected parameter '" + name + "'", "shape_mismatch");
            if (seen[idx]) throw integrity_error("parameter '" + name + "' appears twice", "duplicate_parameter");
            seen[idx] = true;
            if (shape != buffers[idx].shape || count != buffers[idx].values.size() || shape_numel(shape) != count) {
                throw integrity_error("parameter '" + name + "' shape does not match the architecture", "shape_mismatch");
            }
            if (offset + count > total) throw integrity_error("parameter '" + name + "' exceeds the payload", "shape_mismatch");
            for (std::size_t k = 0; k < count; ++k) buffers[idx].values[k] = get_f32(payload.data() + 4 * (offset + k));
        }
        for (std::size_t i = 0; i < seen.size(); ++i) {
            if (!seen[i]) throw integrity_error("parameter '" + buffers[i].name + "' missing", "missing_parameter");
        }
        if (extra) *extra = header.value("extra", Json::object());
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw integrity_error("malformed model header: " + std::string(e.what()), "bad_header");
    }
}

}  // namespace concurrence
