#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "concurrence/dataset.hpp"

namespace concurrence {

enum class ReportFormat { json, csv };

/// A flat table plus metadata. Rows are JSON objects of scalars; nested
/// values are written as compact JSON strings in CSV.
struct Report {
    Json meta = Json::object();     ///< command, resolved config, seed, version, input hashes
    std::vector<Json> rows;
    Json summary = Json::object();
};

/// "json" or "csv"; anything else is a config error.
ReportFormat parse_report_format(const std::string& name);

/// Format implied by the file extension (.csv -> csv, otherwise json).
ReportFormat format_for_path(const std::filesystem::path& path);

/// Deterministic rendering: insertion key order, floats rounded to 9
/// significant digits, non-finite values as null (json) / NaN (csv) with a
/// `warning` column on affected rows.
std::string render_report(const Report& report, ReportFormat format);

void write_report(const Report& report, const std::filesystem::path& path, ReportFormat format);

/// Rounds to 9 significant digits.
double round9(double v);

}  // namespace concurrence
