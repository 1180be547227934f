#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "relyeval/judge.hpp"
#include "relyeval/model.hpp"
#include "relyeval/rules.hpp"

namespace relyeval {

// ---------------------------------------------------------------------------
// Labels
// ---------------------------------------------------------------------------

// ToolType/ToolTiming are selection failures (wrong tool, wrong moment);
// ToolFormat/ToolContent are usage failures (bad arguments, fabricated values).
enum class HallucinationLabel { None, ToolType, ToolTiming, ToolFormat, ToolContent };

std::string_view hallucination_label_name(HallucinationLabel label);
std::optional<HallucinationLabel> hallucination_label_from_name(std::string_view name);

// "selection", "usage", or "none".
std::string_view hallucination_label_category(HallucinationLabel label);

// ---------------------------------------------------------------------------
// Verdicts
// ---------------------------------------------------------------------------

struct RuleEvidence {
    enum class Kind { NonexistentTool, RepeatedCall, Format };

    Kind kind = Kind::NonexistentTool;
    std::optional<rules::FormatViolation> violation;  // Format only
    std::optional<size_t> repeat_of;                  // RepeatedCall only
    std::string detail;
};

std::string_view rule_evidence_kind_name(RuleEvidence::Kind kind);

struct JudgeEvidence {
    judge::PromptKind source = judge::PromptKind::ToolRelevance;
    std::string verdict;  // the verdict token as parsed
    std::string reason;
};

struct HallucinationVerdict {
    HallucinationLabel label = HallucinationLabel::None;
    std::optional<std::variant<RuleEvidence, JudgeEvidence>> evidence;

    bool is_hallucination() const { return label != HallucinationLabel::None; }
    bool rule_decided() const {
        return evidence && std::holds_alternative<RuleEvidence>(*evidence);
    }
    bool judge_decided() const {
        return evidence && std::holds_alternative<JudgeEvidence>(*evidence);
    }
};

// Enforces label/evidence pairing: None carries no evidence, ToolFormat a
// format violation, ToolTiming a repeat index, ToolContent an Untruthful
// judge verdict. Throws ContractError on any mismatch.
void validate_verdict(const HallucinationVerdict& verdict);

nlohmann::json verdict_to_json(const HallucinationVerdict& verdict);

// ---------------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------------

struct ClassifierOptions {
    // When set, an Unsure relevance verdict is handled like Irrelevant.
    bool strict_unsure = false;
};

// Checks run cheapest-first; deterministic rules (fabricated tool, repeated
// call, malformed arguments) decide without any judge traffic, and only a
// call that survives all three is escalated to the relevance judge and then
// the truthfulness judge. The first failed check labels the call; every call
// gets exactly one label.
//
// Throws ContractError when steps[call_index] is not a tool invocation;
// judge backend/parse errors propagate.
HallucinationVerdict classify_call(size_t call_index, const Trajectory& trajectory,
                                   judge::JudgeBackend& backend,
                                   const ClassifierOptions& options = {});

// One verdict per tool-invocation step, in step order. Indecisive and
// final-answer steps produce no verdict.
std::vector<HallucinationVerdict> classify_trajectory(const Trajectory& trajectory,
                                                      judge::JudgeBackend& backend,
                                                      const ClassifierOptions& options = {});

// The invocations whose verdict is non-None, in step order. Throws
// ContractError when verdict count doesn't match the trajectory's call count.
std::vector<ToolInvocation> hallucinated_calls(const Trajectory& trajectory,
                                               const std::vector<HallucinationVerdict>& verdicts);

}  // namespace relyeval
