#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "relyeval/errors.hpp"

namespace relyeval {

// ---------------------------------------------------------------------------
// Tool schema
// ---------------------------------------------------------------------------

enum class ParamType { String, Integer, Number, Boolean, Array, Object };

std::string_view param_type_name(ParamType type);
std::optional<ParamType> param_type_from_name(std::string_view name);

struct ParamSpec {
    std::string name;
    ParamType type = ParamType::String;
    bool required = false;
    std::string description;
};

struct ToolSpec {
    std::string name;
    std::string description;
    std::vector<ParamSpec> params;

    const ParamSpec* find_param(std::string_view param_name) const;
};

struct ToolSet {
    std::string id;
    std::vector<ToolSpec> tools;

    const ToolSpec* find_tool(std::string_view tool_name) const;
};

// Throws ValidationError on duplicate/empty names, empty tool list, etc.
void validate_toolset(const ToolSet& toolset);

// ---------------------------------------------------------------------------
// Agent actions
// ---------------------------------------------------------------------------

struct ToolInvocation {
    std::string tool_name;
    // Kept verbatim: format hallucination detection must see invalid
    // serializations exactly as the agent produced them.
    std::string args_raw;
    std::string response;
};

enum class IndecisiveKind { Restart, ChangeTools, TalkToUser };

std::string_view indecisive_kind_name(IndecisiveKind kind);
std::optional<IndecisiveKind> indecisive_kind_from_name(std::string_view name);

// The Finish-call spelling the agent system prompt teaches,
// e.g. "Finish->give_up_and_talkto_user".
std::string_view indecisive_finish_action(IndecisiveKind kind);

struct Indecisive {
    IndecisiveKind kind = IndecisiveKind::Restart;
};

struct FinalAnswer {
    std::string text;
};

struct Action {
    std::variant<ToolInvocation, Indecisive, FinalAnswer> act;
    std::optional<std::string> thought;

    bool is_invocation() const { return std::holds_alternative<ToolInvocation>(act); }
    bool is_indecisive() const { return std::holds_alternative<Indecisive>(act); }
    bool is_final_answer() const { return std::holds_alternative<FinalAnswer>(act); }

    const ToolInvocation& invocation() const { return std::get<ToolInvocation>(act); }
    const Indecisive& indecisive() const { return std::get<Indecisive>(act); }
    const FinalAnswer& final_answer() const { return std::get<FinalAnswer>(act); }

    static Action invoke(std::string tool, std::string args, std::string response,
                         std::optional<std::string> thought = std::nullopt) {
        return Action{ToolInvocation{std::move(tool), std::move(args), std::move(response)},
                      std::move(thought)};
    }
    static Action give_up(IndecisiveKind kind, std::optional<std::string> thought = std::nullopt) {
        return Action{Indecisive{kind}, std::move(thought)};
    }
    static Action finish(std::string text, std::optional<std::string> thought = std::nullopt) {
        return Action{FinalAnswer{std::move(text)}, std::move(thought)};
    }
};

bool actions_equal(const Action& a, const Action& b);

// ---------------------------------------------------------------------------
// Trajectory
// ---------------------------------------------------------------------------

enum class SubsetTag { Original, MissingParameter, UnmatchedTools };

std::string_view subset_tag_name(SubsetTag tag);
std::optional<SubsetTag> subset_tag_from_name(std::string_view name);

// Necessary tool calls per subset: solvable tasks need one call,
// the perturbed subsets are unsolvable and need none.
int default_necessary_calls(SubsetTag tag);

struct Trajectory {
    std::string task_id;
    SubsetTag subset_tag = SubsetTag::Original;
    std::string query;
    ToolSet toolset;
    std::vector<Action> steps;
    bool pass_verdict = false;  // externally supplied task-success judgment
    int necessary_calls = 1;

    size_t tool_call_count() const;
    const FinalAnswer* final_answer() const;
};

// Invariants: at most one FinalAnswer and, if present, it is the last step.
void validate_trajectory(const Trajectory& trajectory);

// ---------------------------------------------------------------------------
// Wire formats (newline-delimited JSON records; see docs/schema.md)
// ---------------------------------------------------------------------------

Trajectory parse_trajectory(const std::string& line);
std::string serialize_trajectory(const Trajectory& trajectory);

ToolSet parse_toolset(const std::string& doc);
std::string serialize_toolset(const ToolSet& toolset);

}  // namespace relyeval
