#pragma once

#include <string>

#include <json.hpp>

namespace petdiff {

// Full tree of tool settings with built-in defaults; every key the CLI
// understands appears here, so overlays can be checked for typos.
nlohmann::json default_config();

// Overlay onto base in place, recursing into objects. Keys missing from base
// and type changes (beyond integer/float) are rejected.
void merge_config(nlohmann::json& base, const nlohmann::json& overlay, const std::string& where);

nlohmann::json load_config_file(const std::string& path);

// "a.b.c=value" assignment; the value is parsed as JSON, falling back to a
// plain string, then type-checked against the existing entry
void set_config_value(nlohmann::json& cfg, const std::string& assignment);

}  // namespace petdiff
