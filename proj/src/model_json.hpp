#pragma once

// Internal helpers shared by the JSON codec translation units. Parse failures
// always name the offending field path.

#include <string>

#include <json.hpp>

#include "relyeval/model.hpp"

namespace relyeval::detail {

[[noreturn]] void fail_parse(const std::string& path, const std::string& what);

const nlohmann::json& require_field(const nlohmann::json& obj, const std::string& path,
                                    const char* key);

std::string join(const std::string& path, const char* key);

std::string require_string(const nlohmann::json& obj, const std::string& path, const char* key);

bool optional_bool(const nlohmann::json& obj, const std::string& path, const char* key,
                   bool fallback);

nlohmann::json toolset_to_json(const ToolSet& toolset);
ToolSet toolset_from_json(const nlohmann::json& j, const std::string& path);

nlohmann::json action_to_json(const Action& action);
Action action_from_json(const nlohmann::json& j, const std::string& path);

// Parses one newline-delimited record; `what` names the record type in errors.
nlohmann::json parse_record(const std::string& text, const char* what);

}  // namespace relyeval::detail
