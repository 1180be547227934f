#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "relyeval/judge.hpp"
#include "relyeval/model.hpp"

namespace relyeval {

// ---------------------------------------------------------------------------
// Perturbed benchmark tasks
// ---------------------------------------------------------------------------

// A benchmark task made deliberately unsolvable: either its query lost the
// argument values a call would need (MissingParameter) or its toolset was
// swapped for an unrelated one (UnmatchedTools). The right agent move is the
// indecisive action in expected_action, never a tool call.
struct PerturbedTask {
    std::string base_task_id;
    SubsetTag subset_tag = SubsetTag::MissingParameter;
    std::string query;
    ToolSet toolset;
    nlohmann::json provenance;  // what was hidden or replaced
    IndecisiveKind expected_action = IndecisiveKind::TalkToUser;
    // Set when the rewriter kept the query unchanged (nothing to hide);
    // callers typically filter these out.
    bool noop = false;
};

// Hides argument values in the query via the rewriter backend; the toolset is
// carried over byte-identically. The rewriter's raw reply is recorded in
// provenance. Throws ValidationError on an empty rewrite; backend errors
// propagate.
PerturbedTask make_missing_parameter(const std::string& task_id, const std::string& query,
                                     const ToolSet& toolset, judge::JudgeBackend& rewriter);

// Swaps the toolset for a seeded-random donor that shares no tool name with
// the original and has a different id; the query is carried over
// byte-identically. Same (task, pool, seed) always picks the same donor.
// Throws ValidationError when no donor is eligible.
PerturbedTask make_unmatched_tools(const std::string& task_id, const std::string& query,
                                   const ToolSet& toolset, const std::vector<ToolSet>& donor_pool,
                                   std::uint64_t seed);

// Wire format (one JSON record per line).
PerturbedTask parse_perturbed(const std::string& line);
std::string serialize_perturbed(const PerturbedTask& task);

// ---------------------------------------------------------------------------
// SFT records
// ---------------------------------------------------------------------------

// One supervised training example: the agent system prompt for the task's
// toolset, the (perturbed) query, and the give-up action the agent should
// emit instead of calling anything.
struct SftRecord {
    std::string task_id;
    SubsetTag subset_tag = SubsetTag::MissingParameter;
    std::string system_prompt;
    std::string query;
    std::string target;  // Finish->give_up_... spelling
};

// No-op-marked tasks produce nothing.
std::optional<SftRecord> make_sft_record(const PerturbedTask& perturbed);

// Batch form; single_tool_only drops tasks whose toolset holds more than one
// tool before conversion.
std::vector<SftRecord> make_sft_records(const std::vector<PerturbedTask>& tasks,
                                        bool single_tool_only);

SftRecord parse_sft_record(const std::string& line);
std::string serialize_sft_record(const SftRecord& record);

}  // namespace relyeval
