#include "relyeval/perturb.hpp"

#include <unordered_set>

#include "model_json.hpp"
#include "relyeval/rng.hpp"

using nlohmann::json;

namespace relyeval {

namespace {

std::string trim(const std::string& text) {
    size_t begin = text.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    size_t end = text.find_last_not_of(" \t\r\n");
    return text.substr(begin, end - begin + 1);
}

bool share_tool_name(const ToolSet& a, const ToolSet& b) {
    std::unordered_set<std::string_view> names;
    for (const auto& tool : a.tools) names.insert(tool.name);
    for (const auto& tool : b.tools)
        if (names.count(tool.name)) return true;
    return false;
}

}  // namespace

PerturbedTask make_missing_parameter(const std::string& task_id, const std::string& query,
                                     const ToolSet& toolset, judge::JudgeBackend& rewriter) {
    judge::JudgeRequest request{judge::PromptKind::MissingParamRewrite,
                                judge::render_rewrite_prompt(toolset, query), "", query};
    std::string reply = rewriter.complete(request);
    std::string rewritten = trim(reply);
    if (rewritten.empty())
        throw ValidationError("task '" + task_id + "': rewriter returned an empty query");

    PerturbedTask task;
    task.base_task_id = task_id;
    task.subset_tag = SubsetTag::MissingParameter;
    task.query = rewritten;
    task.toolset = toolset;
    task.expected_action = IndecisiveKind::TalkToUser;
    task.noop = rewritten == query;
    task.provenance = json{{"kind", "missing_parameter"},
                           {"original_query", query},
                           {"rewriter_reply", reply}};
    return task;
}

PerturbedTask make_unmatched_tools(const std::string& task_id, const std::string& query,
                                   const ToolSet& toolset, const std::vector<ToolSet>& donor_pool,
                                   std::uint64_t seed) {
    std::vector<size_t> eligible;
    for (size_t i = 0; i < donor_pool.size(); ++i)
        if (donor_pool[i].id != toolset.id && !share_tool_name(donor_pool[i], toolset))
            eligible.push_back(i);
    if (eligible.empty())
        throw ValidationError("task '" + task_id +
                              "': no donor toolset is name-disjoint from '" + toolset.id + "'");

    SplitMix64 rng = split_rng(seed, task_id);
    size_t pick = eligible[static_cast<size_t>(rng.next_below(eligible.size()))];

    PerturbedTask task;
    task.base_task_id = task_id;
    task.subset_tag = SubsetTag::UnmatchedTools;
    task.query = query;
    task.toolset = donor_pool[pick];
    task.expected_action = IndecisiveKind::ChangeTools;
    task.provenance = json{{"kind", "unmatched_tools"},
                           {"original_toolset_id", toolset.id},
                           {"donor_toolset_id", donor_pool[pick].id},
                           {"eligible_donors", eligible.size()}};
    return task;
}

PerturbedTask parse_perturbed(const std::string& line) {
    json j = detail::parse_record(line, "perturbed-task record");

    PerturbedTask task;
    task.base_task_id = detail::require_string(j, "", "base_task_id");
    std::string tag = detail::require_string(j, "", "subset_tag");
    auto subset = subset_tag_from_name(tag);
    if (!subset || *subset == SubsetTag::Original)
        detail::fail_parse("subset_tag",
                           "'" + tag + "' is not one of missing_parameter/unmatched_tools");
    task.subset_tag = *subset;
    task.query = detail::require_string(j, "", "query");
    task.toolset = detail::toolset_from_json(detail::require_field(j, "", "toolset"), "toolset");
    validate_toolset(task.toolset);
    task.provenance = detail::require_field(j, "", "provenance");
    std::string action = detail::require_string(j, "", "expected_action");
    auto kind = indecisive_kind_from_name(action);
    if (!kind)
        detail::fail_parse("expected_action",
                           "'" + action + "' is not one of restart/change_tools/talk_to_user");
    task.expected_action = *kind;
    task.noop = detail::optional_bool(j, "", "noop", false);
    return task;
}

std::string serialize_perturbed(const PerturbedTask& task) {
    return json{{"base_task_id", task.base_task_id},
                {"subset_tag", std::string(subset_tag_name(task.subset_tag))},
                {"query", task.query},
                {"toolset", detail::toolset_to_json(task.toolset)},
                {"provenance", task.provenance},
                {"expected_action", std::string(indecisive_kind_name(task.expected_action))},
                {"noop", task.noop}}
        .dump();
}

std::optional<SftRecord> make_sft_record(const PerturbedTask& perturbed) {
    if (perturbed.noop) return std::nullopt;
    SftRecord record;
    record.task_id = perturbed.base_task_id;
    record.subset_tag = perturbed.subset_tag;
    record.system_prompt = judge::render_agent_system_prompt(perturbed.toolset);
    record.query = perturbed.query;
    record.target = std::string(indecisive_finish_action(perturbed.expected_action));
    return record;
}

std::vector<SftRecord> make_sft_records(const std::vector<PerturbedTask>& tasks,
                                        bool single_tool_only) {
    std::vector<SftRecord> records;
    for (const auto& task : tasks) {
        if (single_tool_only && task.toolset.tools.size() != 1) continue;
        if (auto record = make_sft_record(task)) records.push_back(std::move(*record));
    }
    return records;
}

SftRecord parse_sft_record(const std::string& line) {
    json j = detail::parse_record(line, "sft record");
    SftRecord record;
    record.task_id = detail::require_string(j, "", "task_id");
    std::string tag = detail::require_string(j, "", "subset_tag");
    auto subset = subset_tag_from_name(tag);
    if (!subset) detail::fail_parse("subset_tag", "'" + tag + "' is not a known subset");
    record.subset_tag = *subset;
    record.system_prompt = detail::require_string(j, "", "system_prompt");
    record.query = detail::require_string(j, "", "query");
    record.target = detail::require_string(j, "", "target");
    return record;
}

std::string serialize_sft_record(const SftRecord& record) {
    return json{{"task_id", record.task_id},
                {"subset_tag", std::string(subset_tag_name(record.subset_tag))},
                {"system_prompt", record.system_prompt},
                {"query", record.query},
                {"target", record.target}}
        .dump();
}

}  // namespace relyeval
