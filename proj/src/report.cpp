#include "concurrence/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>

#include "concurrence/error.hpp"

namespace concurrence {

namespace {

bool has_non_finite(const Json& j) {
    if (j.is_number_float()) return !std::isfinite(j.get<double>());
    if (j.is_structured()) {
        for (const auto& v : j) {
            if (has_non_finite(v)) return true;
        }
    }
    return false;
}

Json rounded(const Json& j) {
    if (j.is_number_float()) {
        const double v = j.get<double>();
        return std::isfinite(v) ? Json(round9(v)) : Json(nullptr);
    }
    if (j.is_object()) {
        Json out = Json::object();
        for (auto it = j.begin(); it != j.end(); ++it) out[it.key()] = rounded(it.value());
        return out;
    }
    if (j.is_array()) {
        Json out = Json::array();
        for (const auto& v : j) out.push_back(rounded(v));
        return out;
    }
    return j;
}

Json flagged(const Json& row) {
    Json out = row;
    if (has_non_finite(row)) out["warning"] = "non_finite";
    return out;
}

std::string format_float(double v) {
    if (std::isnan(v)) return "NaN";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

// Like Json::dump, but floats are written with %.9g. nlohmann's shortest
// round-trip printer does not always find the 9-digit form.
void write_json(const Json& j, int indent, int depth, std::string& out) {
    const std::string pad = indent < 0 ? "" : std::string(static_cast<std::size_t>(indent * (depth + 1)), ' ');
    const std::string close = indent < 0 ? "" : std::string(static_cast<std::size_t>(indent * depth), ' ');
    const char* nl = indent < 0 ? "" : "\n";
    if (j.is_number_float()) {
        const double v = j.get<double>();
        out += std::isfinite(v) ? format_float(v) : "null";
    } else if (j.is_object()) {
        if (j.empty()) {
            out += "{}";
            return;
        }
        out += "{";
        out += nl;
        bool first = true;
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (!first) out += std::string(",") + nl;
            first = false;
            out += pad + Json(it.key()).dump() + (indent < 0 ? ":" : ": ");
            write_json(it.value(), indent, depth + 1, out);
        }
        out += nl + close + "}";
    } else if (j.is_array()) {
        if (j.empty()) {
            out += "[]";
            return;
        }
        out += "[";
        out += nl;
        for (std::size_t i = 0; i < j.size(); ++i) {
            if (i) out += std::string(",") + nl;
            out += pad;
            write_json(j[i], indent, depth + 1, out);
        }
        out += nl + close + "]";
    } else {
        out += j.dump();
    }
}

std::string to_text(const Json& j, int indent = -1) {
    std::string out;
    write_json(j, indent, 0, out);
    return out;
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string csv_cell(const Json& v) {
    if (v.is_null()) return "";
    if (v.is_number_float()) return format_float(v.get<double>());
    if (v.is_number_integer() || v.is_number_unsigned()) return v.dump();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_string()) return csv_escape(v.get<std::string>());
    return csv_escape(to_text(v));
}

}  // namespace

double round9(double v) {
    if (!std::isfinite(v)) return v;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return std::strtod(buf, nullptr);
}

ReportFormat parse_report_format(const std::string& name) {
    if (name == "json") return ReportFormat::json;
    if (name == "csv") return ReportFormat::csv;
    throw config_error("unknown report format '" + name + "' (expected json or csv)");
}

ReportFormat format_for_path(const std::filesystem::path& path) {
    return path.extension() == ".csv" ? ReportFormat::csv : ReportFormat::json;
}

std::string render_report(const Report& report, ReportFormat format) {
    if (report.rows.empty()) throw config_error("report has no results");
    if (format == ReportFormat::json) {
        Json doc = Json::object();
        doc["meta"] = rounded(report.meta);
        Json rows = Json::array();
        for (const auto& r : report.rows) rows.push_back(rounded(flagged(r)));
        doc["rows"] = rows;
        if (!report.summary.empty()) doc["summary"] = rounded(report.summary);
        return to_text(doc, 2) + "\n";
    }
    std::vector<std::string> columns;
    std::vector<Json> rows;
    for (const auto& r : report.rows) {
        if (!r.is_object()) throw config_error("report rows must be objects");
        rows.push_back(flagged(r));
        for (auto it = rows.back().begin(); it != rows.back().end(); ++it) {
            if (std::find(columns.begin(), columns.end(), it.key()) == columns.end()) columns.push_back(it.key());
        }
    }
    std::string out = "# meta: " + to_text(report.meta) + "\n";
    if (!report.summary.empty()) out += "# summary: " + to_text(report.summary) + "\n";
    for (std::size_t c = 0; c < columns.size(); ++c) out += (c ? "," : "") + csv_escape(columns[c]);
    out += "\n";
    for (const auto& r : rows) {
        for (std::size_t c = 0; c < columns.size(); ++c) {
            if (c) out += ",";
            if (r.contains(columns[c])) out += csv_cell(r[columns[c]]);
        }
        out += "\n";
    }
    return out;
}

void write_report(const Report& report, const std::filesystem::path& path, ReportFormat format) {
    const std::string text = render_report(report, format);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::config, "cannot open report '" + path.string() + "' for writing", "io");
    out << text;
    if (!out) throw Error(ErrorKind::config, "failed writing report '" + path.string() + "'", "io");
}

}  // namespace concurrence
