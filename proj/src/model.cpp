#include "relyeval/model.hpp"

#include <algorithm>
#include <json.hpp>
#include <unordered_set>

#include "model_json.hpp"

using nlohmann::json;

namespace relyeval {

namespace detail {

// --- field access helpers; every failure names the offending field ---------

void fail_parse(const std::string& path, const std::string& what) {
    throw ParseError("field '" + path + "': " + what);
}

const json& require_field(const json& obj, const std::string& path, const char* key) {
    if (!obj.is_object()) fail_parse(path, "expected a JSON object");
    auto it = obj.find(key);
    if (it == obj.end()) fail_parse(path.empty() ? key : path + "." + key, "missing");
    return *it;
}

std::string join(const std::string& path, const char* key) {
    return path.empty() ? key : path + "." + key;
}

std::string require_string(const json& obj, const std::string& path, const char* key) {
    const json& v = require_field(obj, path, key);
    if (!v.is_string()) fail_parse(join(path, key), "expected a string");
    return v.get<std::string>();
}

bool optional_bool(const json& obj, const std::string& path, const char* key, bool fallback) {
    auto it = obj.find(key);
    if (it == obj.end()) return fallback;
    if (!it->is_boolean()) fail_parse(join(path, key), "expected a boolean");
    return it->get<bool>();
}

}  // namespace detail

using namespace detail;

// --- enum spellings ---------------------------------------------------------

std::string_view param_type_name(ParamType type) {
    switch (type) {
        case ParamType::String: return "string";
        case ParamType::Integer: return "integer";
        case ParamType::Number: return "number";
        case ParamType::Boolean: return "boolean";
        case ParamType::Array: return "array";
        case ParamType::Object: return "object";
    }
    return "string";
}

std::optional<ParamType> param_type_from_name(std::string_view name) {
    if (name == "string") return ParamType::String;
    if (name == "integer") return ParamType::Integer;
    if (name == "number") return ParamType::Number;
    if (name == "boolean") return ParamType::Boolean;
    if (name == "array") return ParamType::Array;
    if (name == "object") return ParamType::Object;
    return std::nullopt;
}

std::string_view indecisive_kind_name(IndecisiveKind kind) {
    switch (kind) {
        case IndecisiveKind::Restart: return "restart";
        case IndecisiveKind::ChangeTools: return "change_tools";
        case IndecisiveKind::TalkToUser: return "talk_to_user";
    }
    return "restart";
}

std::optional<IndecisiveKind> indecisive_kind_from_name(std::string_view name) {
    if (name == "restart") return IndecisiveKind::Restart;
    if (name == "change_tools") return IndecisiveKind::ChangeTools;
    if (name == "talk_to_user") return IndecisiveKind::TalkToUser;
    return std::nullopt;
}

std::string_view indecisive_finish_action(IndecisiveKind kind) {
    switch (kind) {
        case IndecisiveKind::Restart: return "Finish->give_up_and_restart";
        case IndecisiveKind::ChangeTools: return "Finish->give_up_and_change_tools";
        case IndecisiveKind::TalkToUser: return "Finish->give_up_and_talkto_user";
    }
    return "Finish->give_up_and_restart";
}

std::string_view subset_tag_name(SubsetTag tag) {
    switch (tag) {
        case SubsetTag::Original: return "original";
        case SubsetTag::MissingParameter: return "missing_parameter";
        case SubsetTag::UnmatchedTools: return "unmatched_tools";
    }
    return "original";
}

std::optional<SubsetTag> subset_tag_from_name(std::string_view name) {
    if (name == "original") return SubsetTag::Original;
    if (name == "missing_parameter") return SubsetTag::MissingParameter;
    if (name == "unmatched_tools") return SubsetTag::UnmatchedTools;
    return std::nullopt;
}

int default_necessary_calls(SubsetTag tag) {
    return tag == SubsetTag::Original ? 1 : 0;
}

// --- lookups and validation --------------------------------------------------

const ParamSpec* ToolSpec::find_param(std::string_view param_name) const {
    for (const auto& p : params)
        if (p.name == param_name) return &p;
    return nullptr;
}

const ToolSpec* ToolSet::find_tool(std::string_view tool_name) const {
    for (const auto& t : tools)
        if (t.name == tool_name) return &t;
    return nullptr;
}

void validate_toolset(const ToolSet& toolset) {
    if (toolset.tools.empty())
        throw ValidationError("toolset '" + toolset.id + "' has no tools");
    std::unordered_set<std::string> tool_names;
    for (const auto& tool : toolset.tools) {
        if (tool.name.empty())
            throw ValidationError("toolset '" + toolset.id + "' contains a tool with an empty name");
        if (!tool_names.insert(tool.name).second)
            throw ValidationError("duplicate tool name '" + tool.name + "' in toolset '" +
                                  toolset.id + "'");
        std::unordered_set<std::string> param_names;
        for (const auto& param : tool.params) {
            if (param.name.empty())
                throw ValidationError("tool '" + tool.name + "' has a parameter with an empty name");
            if (!param_names.insert(param.name).second)
                throw ValidationError("duplicate parameter name '" + param.name + "' in tool '" +
                                      tool.name + "'");
        }
    }
}

bool actions_equal(const Action& a, const Action& b) {
    if (a.thought != b.thought) return false;
    if (a.act.index() != b.act.index()) return false;
    if (a.is_invocation()) {
        const auto& x = a.invocation();
        const auto& y = b.invocation();
        return x.tool_name == y.tool_name && x.args_raw == y.args_raw && x.response == y.response;
    }
    if (a.is_indecisive()) return a.indecisive().kind == b.indecisive().kind;
    return a.final_answer().text == b.final_answer().text;
}

size_t Trajectory::tool_call_count() const {
    return static_cast<size_t>(
        std::count_if(steps.begin(), steps.end(), [](const Action& s) { return s.is_invocation(); }));
}

const FinalAnswer* Trajectory::final_answer() const {
    for (const auto& step : steps)
        if (step.is_final_answer()) return &step.final_answer();
    return nullptr;
}

void validate_trajectory(const Trajectory& trajectory) {
    validate_toolset(trajectory.toolset);
    if (trajectory.necessary_calls < 0)
        throw ValidationError("trajectory '" + trajectory.task_id + "': necessary_calls is negative");
    size_t final_count = 0;
    for (size_t i = 0; i < trajectory.steps.size(); ++i) {
        if (trajectory.steps[i].is_final_answer()) {
            ++final_count;
            if (final_count > 1)
                throw ValidationError("trajectory '" + trajectory.task_id +
                                      "': more than one final answer");
            if (i + 1 != trajectory.steps.size())
                throw ValidationError("trajectory '" + trajectory.task_id +
                                      "': final answer is not the last step");
        }
    }
}

// --- JSON codecs -------------------------------------------------------------

namespace {

json param_to_json(const ParamSpec& param) {
    return json{{"name", param.name},
                {"type", std::string(param_type_name(param.type))},
                {"required", param.required},
                {"description", param.description}};
}

ParamSpec param_from_json(const json& j, const std::string& path) {
    ParamSpec param;
    param.name = require_string(j, path, "name");
    if (param.name.empty()) fail_parse(join(path, "name"), "must be non-empty");
    std::string type = require_string(j, path, "type");
    auto tag = param_type_from_name(type);
    if (!tag)
        fail_parse(join(path, "type"),
                   "'" + type + "' is not one of string/integer/number/boolean/array/object");
    param.type = *tag;
    param.required = optional_bool(j, path, "required", false);
    if (auto it = j.find("description"); it != j.end()) {
        if (!it->is_string()) fail_parse(join(path, "description"), "expected a string");
        param.description = it->get<std::string>();
    }
    return param;
}

json tool_to_json(const ToolSpec& tool) {
    json params = json::array();
    for (const auto& p : tool.params) params.push_back(param_to_json(p));
    return json{{"name", tool.name}, {"description", tool.description}, {"params", params}};
}

ToolSpec tool_from_json(const json& j, const std::string& path) {
    ToolSpec tool;
    tool.name = require_string(j, path, "name");
    if (auto it = j.find("description"); it != j.end()) {
        if (!it->is_string()) fail_parse(join(path, "description"), "expected a string");
        tool.description = it->get<std::string>();
    }
    if (auto it = j.find("params"); it != j.end()) {
        if (!it->is_array()) fail_parse(join(path, "params"), "expected an array");
        for (size_t i = 0; i < it->size(); ++i)
            tool.params.push_back(param_from_json((*it)[i], join(path, "params") + "[" +
                                                                std::to_string(i) + "]"));
    }
    return tool;
}

}  // namespace

namespace detail {

json toolset_to_json(const ToolSet& toolset) {
    json tools = json::array();
    for (const auto& t : toolset.tools) tools.push_back(tool_to_json(t));
    return json{{"id", toolset.id}, {"tools", tools}};
}

ToolSet toolset_from_json(const json& j, const std::string& path) {
    ToolSet toolset;
    toolset.id = require_string(j, path, "id");
    const json& tools = require_field(j, path, "tools");
    if (!tools.is_array()) fail_parse(join(path, "tools"), "expected an array");
    for (size_t i = 0; i < tools.size(); ++i)
        toolset.tools.push_back(
            tool_from_json(tools[i], join(path, "tools") + "[" + std::to_string(i) + "]"));
    return toolset;
}

json action_to_json(const Action& action) {
    json j;
    if (action.is_invocation()) {
        const auto& call = action.invocation();
        j["tool_invocation"] = {{"tool_name", call.tool_name},
                                {"args_raw", call.args_raw},
                                {"response", call.response}};
    } else if (action.is_indecisive()) {
        j["indecisive"] = {{"kind", std::string(indecisive_kind_name(action.indecisive().kind))}};
    } else {
        j["final_answer"] = {{"text", action.final_answer().text}};
    }
    if (action.thought) j["thought"] = *action.thought;
    return j;
}

Action action_from_json(const json& j, const std::string& path) {
    if (!j.is_object()) fail_parse(path, "expected a JSON object");
    int variants = static_cast<int>(j.contains("tool_invocation")) +
                   static_cast<int>(j.contains("indecisive")) +
                   static_cast<int>(j.contains("final_answer"));
    if (variants != 1)
        fail_parse(path, "exactly one of tool_invocation/indecisive/final_answer required, got " +
                             std::to_string(variants));
    Action action;
    if (j.contains("tool_invocation")) {
        const json& call = j["tool_invocation"];
        std::string sub = join(path, "tool_invocation");
        action.act = ToolInvocation{require_string(call, sub, "tool_name"),
                                    require_string(call, sub, "args_raw"),
                                    require_string(call, sub, "response")};
    } else if (j.contains("indecisive")) {
        std::string sub = join(path, "indecisive");
        std::string kind = require_string(j["indecisive"], sub, "kind");
        auto parsed = indecisive_kind_from_name(kind);
        if (!parsed)
            fail_parse(join(sub, "kind"),
                       "'" + kind + "' is not one of restart/change_tools/talk_to_user");
        action.act = Indecisive{*parsed};
    } else {
        action.act = FinalAnswer{require_string(j["final_answer"], join(path, "final_answer"), "text")};
    }
    if (auto it = j.find("thought"); it != j.end()) {
        if (!it->is_string()) fail_parse(join(path, "thought"), "expected a string");
        action.thought = it->get<std::string>();
    }
    return action;
}

json parse_record(const std::string& text, const char* what) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw ParseError(std::string(what) + ": invalid JSON");
    return j;
}

}  // namespace detail

Trajectory parse_trajectory(const std::string& line) {
    json j = parse_record(line, "trajectory record");

    Trajectory t;
    t.task_id = require_string(j, "", "task_id");
    std::string tag = require_string(j, "", "subset_tag");
    auto subset = subset_tag_from_name(tag);
    if (!subset)
        fail_parse("subset_tag",
                   "'" + tag + "' is not one of original/missing_parameter/unmatched_tools");
    t.subset_tag = *subset;
    t.query = require_string(j, "", "query");
    t.toolset = toolset_from_json(require_field(j, "", "toolset"), "toolset");

    const json& steps = require_field(j, "", "steps");
    if (!steps.is_array()) fail_parse("steps", "expected an array");
    for (size_t i = 0; i < steps.size(); ++i)
        t.steps.push_back(action_from_json(steps[i], "steps[" + std::to_string(i) + "]"));

    t.pass_verdict = optional_bool(j, "", "pass_verdict", false);
    if (auto it = j.find("necessary_calls"); it != j.end()) {
        if (!it->is_number_integer()) fail_parse("necessary_calls", "expected an integer");
        t.necessary_calls = it->get<int>();
    } else {
        t.necessary_calls = default_necessary_calls(t.subset_tag);
    }

    validate_trajectory(t);
    return t;
}

std::string serialize_trajectory(const Trajectory& trajectory) {
    json steps = json::array();
    for (const auto& step : trajectory.steps) steps.push_back(action_to_json(step));
    json j{{"task_id", trajectory.task_id},
           {"subset_tag", std::string(subset_tag_name(trajectory.subset_tag))},
           {"query", trajectory.query},
           {"toolset", toolset_to_json(trajectory.toolset)},
           {"steps", steps},
           {"pass_verdict", trajectory.pass_verdict},
           {"necessary_calls", trajectory.necessary_calls}};
    return j.dump();
}

ToolSet parse_toolset(const std::string& doc) {
    json j = parse_record(doc, "toolset document");
    ToolSet toolset = toolset_from_json(j, "");
    validate_toolset(toolset);
    return toolset;
}

std::string serialize_toolset(const ToolSet& toolset) {
    return toolset_to_json(toolset).dump();
}

}  // namespace relyeval
