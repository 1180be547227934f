#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "relyeval/model.hpp"

namespace relyeval::rules {

enum class FormatViolationKind {
    InvalidSerialization,
    UnknownParamName,
    MissingRequiredParam,
    WrongValueType,
};

std::string_view format_violation_kind_name(FormatViolationKind kind);

struct FormatViolation {
    FormatViolationKind kind = FormatViolationKind::InvalidSerialization;
    std::optional<std::string> param;  // present for every kind except InvalidSerialization
    std::string detail;
};

// Arguments must parse as one JSON object (an empty object is fine).
// Anything else is an InvalidSerialization violation.
std::variant<nlohmann::json, FormatViolation> check_wellformed(const std::string& args_raw);

// Exact, case-sensitive name match; fuzzy matching would mask fabricated tools.
bool check_tool_exists(std::string_view tool_name, const ToolSet& toolset);

// One violation per independent defect: unknown keys, absent required params,
// values whose runtime type conflicts with the declared tag. No coercion:
// "3" never satisfies integer, 3.5 never satisfies integer, 3 satisfies both
// integer and number.
std::vector<FormatViolation> check_schema(const nlohmann::json& args, const ToolSpec& spec);

// True iff some earlier step already made this exact call: same tool, equal
// arguments (structural when both sides parse, byte-equal otherwise) and
// byte-equal response.
// Returns the index of the earlier duplicate via `repeat_of` when provided.
bool check_timing(size_t call_index, const std::vector<Action>& steps,
                  size_t* repeat_of = nullptr);

}  // namespace relyeval::rules
