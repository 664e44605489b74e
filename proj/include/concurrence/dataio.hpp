#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>

#include "concurrence/dataset.hpp"
#include "concurrence/model.hpp"

namespace concurrence {

inline constexpr std::uint16_t kDatasetVersion = 1;
inline constexpr std::uint32_t kModelVersion = 1;
inline constexpr std::size_t kDatasetHeaderBytes = 22;  // magic, u16 version, 4 x u32
inline constexpr std::uint64_t kDefaultReadCap = std::uint64_t{4} << 30;

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::span<const unsigned char> bytes);
std::uint64_t fnv1a64(const std::string& text);
std::string hex64(std::uint64_t v);

std::filesystem::path manifest_path(const std::filesystem::path& dataset_path);

/// Writes the binary dataset and `<path>.manifest.json` beside it. Returns
/// the manifest as written (including the payload hash).
Json write_dataset(const Dataset& dataset, const std::filesystem::path& path);

struct ReadOptions {
    std::uint64_t max_bytes = kDefaultReadCap;
    bool require_manifest = true;
};

/// Pair ids are positions in the file. Errors carry codes: bad_magic,
/// unsupported_version, truncated_payload, trailing_bytes, size_cap,
/// missing_manifest, manifest_mismatch, checksum_mismatch.
Dataset read_dataset(const std::filesystem::path& path, const ReadOptions& options = {});

/// FNV-1a of the manifest file text, used to tie reports to their input.
std::string manifest_hash(const std::filesystem::path& dataset_path);

/// Parameters stored as float32 with a JSON header and trailing payload checksum.
void write_model(ConcurrenceModel& model, const std::filesystem::path& path, const Json& extra = Json::object());

/// Errors: bad_magic, unsupported_version, truncated_payload, shape_mismatch,
/// missing_parameter, duplicate_parameter, checksum_mismatch.
ConcurrenceModel read_model(const std::filesystem::path& path, Json* extra = nullptr,
                            std::uint64_t max_bytes = kDefaultReadCap);

}  // namespace concurrence
