#pragma once

// JSON config files for CLI11. Top-level scalar keys belong to the active
// subcommand; an object keyed by a subcommand name targets that subcommand
// explicitly. Flags given on the command line win over file values.

#include <CLI11.hpp>
#include <algorithm>
#include <istream>
#include <iterator>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

namespace cli {

using Json = nlohmann::ordered_json;

inline std::string option_key(std::string key) {
    std::replace(key.begin(), key.end(), '_', '-');
    return key;
}

inline std::string scalar_text(const Json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
}

/// Parses "1", "0.25", "true", "[1,2]" back into typed JSON; anything else stays a string.
inline Json typed(const std::string& text) {
    if (text.empty()) return Json(nullptr);
    Json v = Json::parse(text, nullptr, false);
    if (v.is_discarded() || v.is_object() || v.is_string()) return Json(text);
    return v;
}

class JsonConfig : public CLI::Config {
public:
    /// Subcommand that receives top-level keys; set before parsing.
    std::string section;

    std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
        Json j;
        try {
            j = Json::parse(std::string(std::istreambuf_iterator<char>(input), {}));
        } catch (const nlohmann::json::exception& e) {
            throw CLI::ConfigError(std::string("config file is not valid JSON: ") + e.what());
        }
        if (!j.is_object()) throw CLI::ConfigError("config file must contain a JSON object");
        std::vector<CLI::ConfigItem> items;
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (it.value().is_object()) {
                add_items(items, {it.key()}, it.value());
            } else {
                add_item(items, section.empty() ? std::vector<std::string>{} : std::vector<std::string>{section},
                         it.key(), it.value());
            }
        }
        return items;
    }

    /// Resolved option values of one (sub)command as JSON.
    std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
        return resolved(app, default_also).dump();
    }

    static Json resolved(const CLI::App* app, bool default_also = true) {
        Json out = Json::object();
        for (const CLI::Option* opt : app->get_options()) {
            if (opt->get_lnames().empty()) continue;
            const std::string& name = opt->get_lnames().front();
            if (name == "help" || name == "config" || name == "workers") continue;
            const bool flag = opt->get_expected_max() == 0;
            const bool list = opt->get_items_expected_max() > 1;
            if (opt->count() > 0) {
                const auto& results = opt->results();
                if (flag) {
                    out[name] = typed(results.back()).is_boolean() ? typed(results.back()) : Json(true);
                } else if (list) {
                    Json arr = Json::array();
                    for (const auto& r : results) arr.push_back(typed(r));
                    out[name] = arr;
                } else {
                    out[name] = typed(results.back());
                }
            } else if (default_also) {
                const std::string d = opt->get_default_str();
                if (flag) {
                    out[name] = d.empty() ? Json(false) : typed(d);
                } else {
                    out[name] = typed(d);
                }
            }
        }
        return out;
    }

private:
    static void add_item(std::vector<CLI::ConfigItem>& items, std::vector<std::string> parents, const std::string& key,
                         const Json& value) {
        CLI::ConfigItem item;
        item.parents = std::move(parents);
        item.name = option_key(key);
        if (value.is_array()) {
            for (const auto& v : value) item.inputs.push_back(scalar_text(v));
        } else if (!value.is_null()) {
            item.inputs.push_back(scalar_text(value));
        }
        items.push_back(std::move(item));
    }

    static void add_items(std::vector<CLI::ConfigItem>& items, const std::vector<std::string>& parents,
                          const Json& obj) {
        for (auto it = obj.begin(); it != obj.end(); ++it) {
            if (it.value().is_object()) {
                auto p = parents;
                p.push_back(it.key());
                add_items(items, p, it.value());
            } else {
                add_item(items, parents, it.key(), it.value());
            }
        }
    }
};

}  // namespace cli
