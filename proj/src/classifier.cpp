#include "relyeval/classifier.hpp"

using nlohmann::json;

namespace relyeval {

std::string_view hallucination_label_name(HallucinationLabel label) {
    switch (label) {
        case HallucinationLabel::None: return "none";
        case HallucinationLabel::ToolType: return "tool_type";
        case HallucinationLabel::ToolTiming: return "tool_timing";
        case HallucinationLabel::ToolFormat: return "tool_format";
        case HallucinationLabel::ToolContent: return "tool_content";
    }
    return "none";
}

std::optional<HallucinationLabel> hallucination_label_from_name(std::string_view name) {
    if (name == "none") return HallucinationLabel::None;
    if (name == "tool_type") return HallucinationLabel::ToolType;
    if (name == "tool_timing") return HallucinationLabel::ToolTiming;
    if (name == "tool_format") return HallucinationLabel::ToolFormat;
    if (name == "tool_content") return HallucinationLabel::ToolContent;
    return std::nullopt;
}

std::string_view hallucination_label_category(HallucinationLabel label) {
    switch (label) {
        case HallucinationLabel::None: return "none";
        case HallucinationLabel::ToolType:
        case HallucinationLabel::ToolTiming: return "selection";
        case HallucinationLabel::ToolFormat:
        case HallucinationLabel::ToolContent: return "usage";
    }
    return "none";
}

std::string_view rule_evidence_kind_name(RuleEvidence::Kind kind) {
    switch (kind) {
        case RuleEvidence::Kind::NonexistentTool: return "nonexistent_tool";
        case RuleEvidence::Kind::RepeatedCall: return "repeated_call";
        case RuleEvidence::Kind::Format: return "format";
    }
    return "format";
}

void validate_verdict(const HallucinationVerdict& verdict) {
    if (verdict.label == HallucinationLabel::None) {
        if (verdict.evidence) throw ContractError("verdict: None label with evidence attached");
        return;
    }
    if (!verdict.evidence)
        throw ContractError("verdict: hallucination label without evidence");

    const auto* rule = std::get_if<RuleEvidence>(&*verdict.evidence);
    const auto* judged = std::get_if<JudgeEvidence>(&*verdict.evidence);
    switch (verdict.label) {
        case HallucinationLabel::ToolType:
            if (rule && rule->kind != RuleEvidence::Kind::NonexistentTool)
                throw ContractError("verdict: ToolType rule evidence must be nonexistent_tool");
            if (judged && judged->source != judge::PromptKind::ToolRelevance)
                throw ContractError("verdict: ToolType judge evidence must come from relevance");
            break;
        case HallucinationLabel::ToolTiming:
            if (!rule || rule->kind != RuleEvidence::Kind::RepeatedCall || !rule->repeat_of)
                throw ContractError("verdict: ToolTiming requires repeated_call evidence");
            break;
        case HallucinationLabel::ToolFormat:
            if (!rule || rule->kind != RuleEvidence::Kind::Format || !rule->violation)
                throw ContractError("verdict: ToolFormat requires a format violation");
            break;
        case HallucinationLabel::ToolContent:
            if (!judged || judged->source != judge::PromptKind::CallingTruthfulness ||
                judged->verdict != "Untruthful")
                throw ContractError("verdict: ToolContent requires an Untruthful judge verdict");
            break;
        case HallucinationLabel::None: break;  // handled above
    }
}

json verdict_to_json(const HallucinationVerdict& verdict) {
    json out{{"label", std::string(hallucination_label_name(verdict.label))},
             {"category", std::string(hallucination_label_category(verdict.label))}};
    if (!verdict.evidence) return out;

    if (const auto* rule = std::get_if<RuleEvidence>(&*verdict.evidence)) {
        json evidence{{"type", "rule"},
                      {"kind", std::string(rule_evidence_kind_name(rule->kind))},
                      {"detail", rule->detail}};
        if (rule->repeat_of) evidence["repeat_of"] = *rule->repeat_of;
        if (rule->violation) {
            json violation{{"kind", std::string(rules::format_violation_kind_name(
                                        rule->violation->kind))},
                           {"detail", rule->violation->detail}};
            if (rule->violation->param) violation["param"] = *rule->violation->param;
            evidence["violation"] = violation;
        }
        out["evidence"] = evidence;
    } else {
        const auto& judged = std::get<JudgeEvidence>(*verdict.evidence);
        out["evidence"] = json{{"type", "judge"},
                               {"source", std::string(judge::prompt_kind_name(judged.source))},
                               {"verdict", judged.verdict},
                               {"reason", judged.reason}};
    }
    return out;
}

namespace {

HallucinationVerdict rule_verdict(HallucinationLabel label, RuleEvidence evidence) {
    return HallucinationVerdict{label, std::move(evidence)};
}

HallucinationVerdict judge_verdict(HallucinationLabel label, judge::PromptKind source,
                                   std::string_view verdict, std::string reason) {
    return HallucinationVerdict{label,
                                JudgeEvidence{source, std::string(verdict), std::move(reason)}};
}

}  // namespace

HallucinationVerdict classify_call(size_t call_index, const Trajectory& trajectory,
                                   judge::JudgeBackend& backend,
                                   const ClassifierOptions& options) {
    if (call_index >= trajectory.steps.size() || !trajectory.steps[call_index].is_invocation())
        throw ContractError("classify_call: step " + std::to_string(call_index) +
                            " is not a tool invocation");
    const ToolInvocation& call = trajectory.steps[call_index].invocation();

    if (!rules::check_tool_exists(call.tool_name, trajectory.toolset)) {
        RuleEvidence evidence;
        evidence.kind = RuleEvidence::Kind::NonexistentTool;
        evidence.detail = "tool '" + call.tool_name + "' is not in toolset '" +
                          trajectory.toolset.id + "'";
        return rule_verdict(HallucinationLabel::ToolType, std::move(evidence));
    }

    size_t repeat_of = 0;
    if (rules::check_timing(call_index, trajectory.steps, &repeat_of)) {
        RuleEvidence evidence;
        evidence.kind = RuleEvidence::Kind::RepeatedCall;
        evidence.repeat_of = repeat_of;
        evidence.detail = "identical call already made at step " + std::to_string(repeat_of);
        return rule_verdict(HallucinationLabel::ToolTiming, std::move(evidence));
    }

    const ToolSpec* spec = trajectory.toolset.find_tool(call.tool_name);
    auto parsed = rules::check_wellformed(call.args_raw);
    if (auto* violation = std::get_if<rules::FormatViolation>(&parsed)) {
        RuleEvidence evidence;
        evidence.kind = RuleEvidence::Kind::Format;
        evidence.violation = *violation;
        evidence.detail = violation->detail;
        return rule_verdict(HallucinationLabel::ToolFormat, std::move(evidence));
    }
    auto violations = rules::check_schema(std::get<json>(parsed), *spec);
    if (!violations.empty()) {
        RuleEvidence evidence;
        evidence.kind = RuleEvidence::Kind::Format;
        evidence.violation = violations.front();
        evidence.detail = violations.size() == 1
                              ? violations.front().detail
                              : violations.front().detail + " (+" +
                                    std::to_string(violations.size() - 1) + " more)";
        return rule_verdict(HallucinationLabel::ToolFormat, std::move(evidence));
    }

    // Only calls that pass every deterministic rule reach the judges.
    auto relevance = judge::assess_tool_relevance(backend, trajectory.query, *spec);
    bool treat_irrelevant = relevance.value == judge::Relevance::Irrelevant ||
                            (options.strict_unsure && relevance.value == judge::Relevance::Unsure);
    if (treat_irrelevant)
        return judge_verdict(HallucinationLabel::ToolType, judge::PromptKind::ToolRelevance,
                             judge::relevance_name(relevance.value), std::move(relevance.reason));

    auto truth = judge::assess_param_truthfulness(
        backend, judge::render_history(trajectory, call_index), *spec,
        trajectory.steps[call_index]);
    if (truth.value == judge::Truthfulness::Untruthful)
        return judge_verdict(HallucinationLabel::ToolContent,
                             judge::PromptKind::CallingTruthfulness,
                             judge::truthfulness_name(truth.value), std::move(truth.reason));

    return HallucinationVerdict{};
}

std::vector<HallucinationVerdict> classify_trajectory(const Trajectory& trajectory,
                                                      judge::JudgeBackend& backend,
                                                      const ClassifierOptions& options) {
    validate_trajectory(trajectory);
    std::vector<HallucinationVerdict> verdicts;
    for (size_t i = 0; i < trajectory.steps.size(); ++i)
        if (trajectory.steps[i].is_invocation())
            verdicts.push_back(classify_call(i, trajectory, backend, options));
    return verdicts;
}

std::vector<ToolInvocation> hallucinated_calls(
    const Trajectory& trajectory, const std::vector<HallucinationVerdict>& verdicts) {
    std::vector<ToolInvocation> calls;
    size_t verdict_index = 0;
    for (const auto& step : trajectory.steps) {
        if (!step.is_invocation()) continue;
        if (verdict_index >= verdicts.size())
            throw ContractError("hallucinated_calls: fewer verdicts than tool calls");
        if (verdicts[verdict_index].is_hallucination()) calls.push_back(step.invocation());
        ++verdict_index;
    }
    if (verdict_index != verdicts.size())
        throw ContractError("hallucinated_calls: more verdicts than tool calls");
    return calls;
}

}  // namespace relyeval
