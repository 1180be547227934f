#include "relyeval/rules.hpp"

using nlohmann::json;

namespace relyeval::rules {

std::string_view format_violation_kind_name(FormatViolationKind kind) {
    switch (kind) {
        case FormatViolationKind::InvalidSerialization: return "invalid_serialization";
        case FormatViolationKind::UnknownParamName: return "unknown_param_name";
        case FormatViolationKind::MissingRequiredParam: return "missing_required_param";
        case FormatViolationKind::WrongValueType: return "wrong_value_type";
    }
    return "invalid_serialization";
}

std::variant<json, FormatViolation> check_wellformed(const std::string& args_raw) {
    json parsed = json::parse(args_raw, nullptr, false);
    if (parsed.is_discarded())
        return FormatViolation{FormatViolationKind::InvalidSerialization, std::nullopt,
                               "arguments are not valid JSON"};
    if (!parsed.is_object())
        return FormatViolation{FormatViolationKind::InvalidSerialization, std::nullopt,
                               "arguments must be a JSON object"};
    return parsed;
}

bool check_tool_exists(std::string_view tool_name, const ToolSet& toolset) {
    return toolset.find_tool(tool_name) != nullptr;
}

namespace {

bool value_matches_type(const json& value, ParamType type) {
    switch (type) {
        case ParamType::String: return value.is_string();
        // An integer-valued token satisfies both integer and number;
        // a fractional token fails integer.
        case ParamType::Integer: return value.is_number_integer();
        case ParamType::Number: return value.is_number();
        case ParamType::Boolean: return value.is_boolean();
        case ParamType::Array: return value.is_array();
        case ParamType::Object: return value.is_object();
    }
    return false;
}

std::string type_of(const json& value) {
    // nlohmann reports "number" for floats and "number" subtypes separately
    switch (value.type()) {
        case json::value_t::string: return "string";
        case json::value_t::boolean: return "boolean";
        case json::value_t::number_integer:
        case json::value_t::number_unsigned: return "integer";
        case json::value_t::number_float: return "number";
        case json::value_t::array: return "array";
        case json::value_t::object: return "object";
        case json::value_t::null: return "null";
        default: return "unknown";
    }
}

}  // namespace

std::vector<FormatViolation> check_schema(const json& args, const ToolSpec& spec) {
    std::vector<FormatViolation> violations;

    for (auto it = args.begin(); it != args.end(); ++it) {
        if (spec.find_param(it.key()) == nullptr)
            violations.push_back({FormatViolationKind::UnknownParamName, it.key(),
                                  "'" + it.key() + "' is not a parameter of " + spec.name});
    }

    for (const auto& param : spec.params) {
        auto it = args.find(param.name);
        if (it == args.end()) {
            if (param.required)
                violations.push_back({FormatViolationKind::MissingRequiredParam, param.name,
                                      "required parameter '" + param.name + "' is absent"});
            continue;
        }
        if (!value_matches_type(*it, param.type))
            violations.push_back(
                {FormatViolationKind::WrongValueType, param.name,
                 "'" + param.name + "' expects " + std::string(param_type_name(param.type)) +
                     ", got " + type_of(*it)});
    }

    return violations;
}

namespace {

// Structural equality when both sides parse as argument objects,
// byte equality otherwise. Whitespace or key reordering is not a
// meaningfully different input.
bool args_equivalent(const std::string& a, const std::string& b) {
    json pa = json::parse(a, nullptr, false);
    json pb = json::parse(b, nullptr, false);
    if (!pa.is_discarded() && pa.is_object() && !pb.is_discarded() && pb.is_object())
        return pa == pb;
    return a == b;
}

}  // namespace

bool check_timing(size_t call_index, const std::vector<Action>& steps, size_t* repeat_of) {
    if (call_index >= steps.size())
        throw ContractError("check_timing: call_index " + std::to_string(call_index) +
                            " out of range");
    if (!steps[call_index].is_invocation())
        throw ContractError("check_timing: step " + std::to_string(call_index) +
                            " is not a tool invocation");

    const ToolInvocation& call = steps[call_index].invocation();
    for (size_t j = 0; j < call_index; ++j) {
        if (!steps[j].is_invocation()) continue;
        const ToolInvocation& prior = steps[j].invocation();
        if (prior.tool_name != call.tool_name) continue;
        if (prior.response != call.response) continue;  // identical outputs required
        if (!args_equivalent(prior.args_raw, call.args_raw)) continue;
        if (repeat_of) *repeat_of = j;
        return true;
    }
    return false;
}

}  // namespace relyeval::rules
