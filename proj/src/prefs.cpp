#include "relyeval/prefs.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>

#include "model_json.hpp"
#include "relyeval/rng.hpp"

using nlohmann::json;

namespace relyeval {

std::string_view step_category_name(StepCategory category) {
    switch (category) {
        case StepCategory::Hallucinated: return "hallucinated";
        case StepCategory::Indecisive: return "indecisive";
        case StepCategory::Correct: return "correct";
    }
    return "hallucinated";
}

std::optional<StepCategory> step_category_from_name(std::string_view name) {
    if (name == "hallucinated") return StepCategory::Hallucinated;
    if (name == "indecisive") return StepCategory::Indecisive;
    if (name == "correct") return StepCategory::Correct;
    return std::nullopt;
}

int step_category_rank(StepCategory category) {
    switch (category) {
        case StepCategory::Hallucinated: return 0;
        case StepCategory::Indecisive: return 1;
        case StepCategory::Correct: return 2;
    }
    return 0;
}

void validate_step_sample_set(const StepSampleSet& set) {
    validate_toolset(set.toolset);
    if (set.candidates.empty())
        throw ValidationError("step sample '" + set.task_id + "': no candidates");
    if (!set.categories.empty() && set.categories.size() != set.candidates.size())
        throw ValidationError("step sample '" + set.task_id +
                              "': categories not aligned with candidates");
    for (const auto& step : set.prior_steps)
        if (step.is_final_answer())
            throw ValidationError("step sample '" + set.task_id +
                                  "': prior steps contain a final answer");
}

StepSampleSet parse_step_sample_set(const std::string& line) {
    json j = detail::parse_record(line, "step-sample record");

    StepSampleSet set;
    set.task_id = detail::require_string(j, "", "task_id");
    if (auto it = j.find("step_index"); it != j.end()) {
        if (!it->is_number_unsigned()) detail::fail_parse("step_index", "expected a non-negative integer");
        set.step_index = it->get<std::size_t>();
    }
    set.query = detail::require_string(j, "", "query");
    set.toolset = detail::toolset_from_json(detail::require_field(j, "", "toolset"), "toolset");

    if (auto it = j.find("prior_steps"); it != j.end()) {
        if (!it->is_array()) detail::fail_parse("prior_steps", "expected an array");
        for (std::size_t i = 0; i < it->size(); ++i)
            set.prior_steps.push_back(detail::action_from_json(
                (*it)[i], "prior_steps[" + std::to_string(i) + "]"));
    }

    const json& candidates = detail::require_field(j, "", "candidates");
    if (!candidates.is_array()) detail::fail_parse("candidates", "expected an array");
    for (std::size_t i = 0; i < candidates.size(); ++i)
        set.candidates.push_back(
            detail::action_from_json(candidates[i], "candidates[" + std::to_string(i) + "]"));

    if (auto it = j.find("categories"); it != j.end()) {
        if (!it->is_array()) detail::fail_parse("categories", "expected an array");
        for (std::size_t i = 0; i < it->size(); ++i) {
            std::string path = "categories[" + std::to_string(i) + "]";
            if (!(*it)[i].is_string()) detail::fail_parse(path, "expected a string");
            auto category = step_category_from_name((*it)[i].get<std::string>());
            if (!category)
                detail::fail_parse(path, "'" + (*it)[i].get<std::string>() +
                                             "' is not one of correct/indecisive/hallucinated");
            set.categories.push_back(*category);
        }
    }

    validate_step_sample_set(set);
    return set;
}

std::string serialize_step_sample_set(const StepSampleSet& set) {
    json prior = json::array();
    for (const auto& step : set.prior_steps) prior.push_back(detail::action_to_json(step));
    json candidates = json::array();
    for (const auto& candidate : set.candidates)
        candidates.push_back(detail::action_to_json(candidate));

    json j{{"task_id", set.task_id},
           {"step_index", set.step_index},
           {"query", set.query},
           {"toolset", detail::toolset_to_json(set.toolset)},
           {"prior_steps", prior},
           {"candidates", candidates}};
    if (!set.categories.empty()) {
        json categories = json::array();
        for (StepCategory category : set.categories)
            categories.push_back(std::string(step_category_name(category)));
        j["categories"] = categories;
    }
    return j.dump();
}

StepCategory categorize_candidate(const Action& candidate, const StepSampleSet& set,
                                  judge::JudgeBackend& backend,
                                  const ClassifierOptions& options) {
    if (candidate.is_indecisive()) return StepCategory::Indecisive;
    if (candidate.is_final_answer()) return StepCategory::Correct;

    Trajectory probe;
    probe.task_id = set.task_id;
    probe.query = set.query;
    probe.toolset = set.toolset;
    probe.steps = set.prior_steps;
    probe.steps.push_back(candidate);
    HallucinationVerdict verdict =
        classify_call(probe.steps.size() - 1, probe, backend, options);
    return verdict.is_hallucination() ? StepCategory::Hallucinated : StepCategory::Correct;
}

std::vector<StepCategory> categorize_candidates(const StepSampleSet& set,
                                                judge::JudgeBackend& backend,
                                                const ClassifierOptions& options) {
    validate_step_sample_set(set);
    if (!set.categories.empty()) return set.categories;
    std::vector<StepCategory> categories;
    categories.reserve(set.candidates.size());
    for (const auto& candidate : set.candidates)
        categories.push_back(categorize_candidate(candidate, set, backend, options));
    return categories;
}

std::string_view pair_type_name(PairType type) {
    switch (type) {
        case PairType::CorrectOverIndecisive: return "correct_over_indecisive";
        case PairType::IndecisiveOverHallucinated: return "indecisive_over_hallucinated";
        case PairType::CorrectOverHallucinated: return "correct_over_hallucinated";
    }
    return "correct_over_hallucinated";
}

std::optional<PairType> pair_type_from_name(std::string_view name) {
    if (name == "correct_over_indecisive") return PairType::CorrectOverIndecisive;
    if (name == "indecisive_over_hallucinated") return PairType::IndecisiveOverHallucinated;
    if (name == "correct_over_hallucinated") return PairType::CorrectOverHallucinated;
    return std::nullopt;
}

std::string render_action(const Action& action) {
    std::string out;
    if (action.thought) out = "thought: " + *action.thought + "\n";
    if (action.is_invocation()) {
        const auto& call = action.invocation();
        out += call.tool_name + "(" + call.args_raw + ")";
    } else if (action.is_indecisive()) {
        out += std::string(indecisive_finish_action(action.indecisive().kind));
    } else {
        out += "Finish->give_answer: " + action.final_answer().text;
    }
    return out;
}

std::string render_step_context(const StepSampleSet& set) {
    std::string out = judge::render_agent_system_prompt(set.toolset);
    out += "\n\nuser: " + set.query;
    for (const auto& step : set.prior_steps) {
        if (step.thought) out += "\nassistant thought: " + *step.thought;
        if (step.is_invocation()) {
            const auto& call = step.invocation();
            out += "\nassistant action: " + call.tool_name;
            out += "\nassistant action input: " + call.args_raw;
            out += "\ntool response: " + call.response;
        } else if (step.is_indecisive()) {
            out += "\nassistant action: ";
            out += indecisive_finish_action(step.indecisive().kind);
        } else {
            out += "\nassistant final answer: " + step.final_answer().text;
        }
    }
    return out;
}

std::vector<PreferencePair> build_pairs(const StepSampleSet& set,
                                        const std::vector<StepCategory>& categories,
                                        std::uint64_t seed) {
    if (categories.size() != set.candidates.size())
        throw ContractError("build_pairs: categories not aligned with candidates");

    std::vector<std::size_t> correct, indecisive, hallucinated;
    for (std::size_t i = 0; i < categories.size(); ++i) {
        switch (categories[i]) {
            case StepCategory::Correct: correct.push_back(i); break;
            case StepCategory::Indecisive: indecisive.push_back(i); break;
            case StepCategory::Hallucinated: hallucinated.push_back(i); break;
        }
    }

    struct Slot {
        PairType type;
        const std::vector<std::size_t>* chosen;
        const std::vector<std::size_t>* rejected;
    };
    const Slot slots[] = {
        {PairType::CorrectOverIndecisive, &correct, &indecisive},
        {PairType::IndecisiveOverHallucinated, &indecisive, &hallucinated},
        {PairType::CorrectOverHallucinated, &correct, &hallucinated},
    };

    // One RNG per decision point with a fixed draw order, so outputs do not
    // depend on which other steps ran or in what order.
    SplitMix64 rng = split_rng(seed, set.task_id, set.step_index);
    std::string context = render_step_context(set);

    std::vector<PreferencePair> pairs;
    for (const Slot& slot : slots) {
        if (slot.chosen->empty() || slot.rejected->empty()) continue;
        std::size_t chosen_at =
            (*slot.chosen)[static_cast<std::size_t>(rng.next_below(slot.chosen->size()))];
        std::size_t rejected_at =
            (*slot.rejected)[static_cast<std::size_t>(rng.next_below(slot.rejected->size()))];
        PreferencePair pair;
        pair.task_id = set.task_id;
        pair.step_index = set.step_index;
        pair.pair_type = slot.type;
        pair.context = context;
        pair.chosen = render_action(set.candidates[chosen_at]);
        pair.rejected = render_action(set.candidates[rejected_at]);
        pairs.push_back(std::move(pair));
    }
    return pairs;
}

PreferencePair parse_preference_pair(const std::string& line) {
    json j = detail::parse_record(line, "preference-pair record");
    PreferencePair pair;
    pair.task_id = detail::require_string(j, "", "task_id");
    if (auto it = j.find("step_index"); it != j.end()) {
        if (!it->is_number_unsigned())
            detail::fail_parse("step_index", "expected a non-negative integer");
        pair.step_index = it->get<std::size_t>();
    }
    std::string type = detail::require_string(j, "", "pair_type");
    auto parsed = pair_type_from_name(type);
    if (!parsed) detail::fail_parse("pair_type", "'" + type + "' is not a known pair type");
    pair.pair_type = *parsed;
    pair.context = detail::require_string(j, "", "context");
    pair.chosen = detail::require_string(j, "", "chosen");
    pair.rejected = detail::require_string(j, "", "rejected");
    return pair;
}

std::string serialize_preference_pair(const PreferencePair& pair) {
    return json{{"task_id", pair.task_id},
                {"step_index", pair.step_index},
                {"pair_type", std::string(pair_type_name(pair.pair_type))},
                {"context", pair.context},
                {"chosen", pair.chosen},
                {"rejected", pair.rejected}}
        .dump();
}

std::size_t emit_dpo_file(const std::vector<PreferencePair>& pairs, std::ostream& sink) {
    for (const auto& pair : pairs) {
        if (pair.chosen == pair.rejected)
            throw ValidationError("preference pair for task '" + pair.task_id + "' step " +
                                  std::to_string(pair.step_index) +
                                  " has identical chosen and rejected texts");
        sink << serialize_preference_pair(pair) << '\n';
        if (!sink)
            throw ValidationError("preference-pair sink write failed at task '" + pair.task_id +
                                  "'");
    }
    return pairs.size();
}

std::string_view trajectory_category_name(TrajectoryCategory category) {
    switch (category) {
        case TrajectoryCategory::HallucinatedResult: return "hallucinated_result";
        case TrajectoryCategory::Failure: return "failure";
        case TrajectoryCategory::Success: return "success";
    }
    return "failure";
}

TrajectoryCategory trajectory_category(bool pass_verdict, bool task_hallucinated) {
    if (task_hallucinated) return TrajectoryCategory::HallucinatedResult;
    return pass_verdict ? TrajectoryCategory::Success : TrajectoryCategory::Failure;
}

std::vector<std::size_t> rank_trajectories(const std::vector<SampleMetrics>& samples) {
    auto rank = [](const SampleMetrics& sample) {
        switch (trajectory_category(sample.pass_verdict, sample.task_hallucinated)) {
            case TrajectoryCategory::Success: return 2;
            case TrajectoryCategory::Failure: return 1;
            case TrajectoryCategory::HallucinatedResult: return 0;
        }
        return 0;
    };
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return rank(samples[a]) > rank(samples[b]);
    });
    return order;
}

}  // namespace relyeval
