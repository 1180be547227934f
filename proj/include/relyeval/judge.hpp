#pragma once

#include <array>
#include <atomic>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "relyeval/errors.hpp"
#include "relyeval/model.hpp"

namespace relyeval::judge {

// ---------------------------------------------------------------------------
// Verdicts
// ---------------------------------------------------------------------------

enum class Relevance { Relevant, Irrelevant, Unsure };
enum class Truthfulness { Truthful, Untruthful };

std::string_view relevance_name(Relevance value);
std::string_view truthfulness_name(Truthfulness value);

struct RelevanceVerdict {
    Relevance value = Relevance::Unsure;
    std::string reason;
};

struct TruthfulnessVerdict {
    Truthfulness value = Truthfulness::Truthful;
    std::string reason;
};

struct AnswerRelevanceVerdict {
    Relevance value = Relevance::Unsure;
    std::string reason;
};

// ---------------------------------------------------------------------------
// Backend interface
// ---------------------------------------------------------------------------

enum class PromptKind { ToolRelevance, CallingTruthfulness, AnswerRelevance, MissingParamRewrite };

std::string_view prompt_kind_name(PromptKind kind);
std::optional<PromptKind> prompt_kind_from_name(std::string_view name);

// What a backend sees. `prompt` is the fully rendered template; the salient
// fields let the scripted mock key its replies without parsing prompt text.
struct JudgeRequest {
    PromptKind kind = PromptKind::ToolRelevance;
    std::string prompt;
    std::string tool_name;  // tool under review; empty for answer relevance
    std::string query;      // per kind: the user query, the rendered history
                            // plus the call under review, or the final answer
};

class JudgeBackend {
public:
    virtual ~JudgeBackend() = default;
    // Returns the raw reply text. Throws BackendError when the backend is
    // unreachable after its configured retries.
    virtual std::string complete(const JudgeRequest& request) = 0;
};

// ---------------------------------------------------------------------------
// Prompt catalog (templates ship as data files; embedded copies match them)
// ---------------------------------------------------------------------------

std::string_view tool_relevance_template();
std::string_view content_hallucination_template();
std::string_view answer_relevance_template();
std::string_view missing_parameter_template();
std::string_view agent_system_template();

// Single-pass slot substitution: values are inserted verbatim and never
// re-scanned, so brace-y values cannot inject into the template.
std::string fill_template(std::string_view tmpl,
                          const std::vector<std::pair<std::string_view, std::string_view>>& slots);

// Parameter schema rendering used by the tool_parameter slot. Groups required
// ahead of optional and omits empty groups.
std::string render_param_schema(const ToolSpec& spec);

std::string render_relevance_prompt(const std::string& query, const ToolSpec& spec);

// `call` must be a ToolInvocation (ContractError otherwise).
std::string render_truthfulness_prompt(const std::string& history, const ToolSpec& spec,
                                       const Action& call);

// `calls` must be non-empty (ContractError otherwise); serialized in order.
std::string render_answer_relevance_prompt(const std::vector<ToolInvocation>& calls,
                                           const std::string& answer);

std::string render_rewrite_prompt(const ToolSet& toolset, const std::string& query);

// Role-labelled interaction history: the user query plus every prior step's
// thought, call, and response in order. Input to the truthfulness judge.
std::string render_history(const Trajectory& trajectory, size_t upto_step);

// The agent-facing system prompt template with the toolset filled into the
// tool/api description slots. Used for SFT targets and DPO contexts.
std::string render_agent_system_prompt(const ToolSet& toolset);

// ---------------------------------------------------------------------------
// Assessments (render, ask, parse; one re-ask on an unparseable verdict)
// ---------------------------------------------------------------------------

RelevanceVerdict assess_tool_relevance(JudgeBackend& backend, const std::string& query,
                                       const ToolSpec& spec);

TruthfulnessVerdict assess_param_truthfulness(JudgeBackend& backend, const std::string& history,
                                              const ToolSpec& spec, const Action& call);

AnswerRelevanceVerdict assess_answer_relevance(JudgeBackend& backend,
                                               const std::vector<ToolInvocation>& calls,
                                               const std::string& answer);

// ---------------------------------------------------------------------------
// Scripted mock backend
// ---------------------------------------------------------------------------

struct MockRule {
    PromptKind kind = PromptKind::ToolRelevance;
    std::optional<std::string> tool_name;       // exact match when present
    std::optional<std::string> query_contains;  // substring match when present
    std::string verdict;  // verdict token; for rewrite rules, the rewritten query
    std::string reason;
};

// Deterministic: first matching rule wins, otherwise the per-kind default.
// Replies are rendered as JSON so the real parse path is exercised.
// Rewrite requests fall back to the offline rule-based rewriter.
class MockJudgeBackend : public JudgeBackend {
public:
    MockJudgeBackend();

    // Atomic counters are not movable; carry their values across by hand.
    MockJudgeBackend(MockJudgeBackend&& other) noexcept
        : rules_(std::move(other.rules_)), defaults_(std::move(other.defaults_)) {
        for (size_t i = 0; i < counts_.size(); ++i) counts_[i].store(other.counts_[i].load());
    }

    static MockJudgeBackend from_script(const std::string& script_json);
    static MockJudgeBackend from_script_file(const std::string& path);

    std::string complete(const JudgeRequest& request) override;

    void add_rule(MockRule rule);
    void set_default(PromptKind kind, std::string verdict);

    size_t call_count() const;
    size_t call_count(PromptKind kind) const;
    void reset_counts();

private:
    std::vector<MockRule> rules_;
    std::map<PromptKind, std::string> defaults_;
    mutable std::array<std::atomic<size_t>, 4> counts_{};
};

// Offline missing-parameter rewriter: drops whitespace-delimited tokens whose
// core contains a digit (the shape of ids, job numbers, flight codes). Returns
// the query unchanged when nothing matches.
std::string hide_param_tokens(const std::string& query);

// ---------------------------------------------------------------------------
// Remote OpenAI-compatible backend
// ---------------------------------------------------------------------------

inline constexpr const char* kJudgeKeyEnvVar = "RELYEVAL_JUDGE_KEY";

struct RemoteConfig {
    std::string base_url;  // e.g. "https://api.example.com/v1"
    std::string model;
    std::string api_key;
    int retries = 3;             // additional attempts after the first
    int concurrency_cap = 4;     // in-flight requests per process
    int timeout_seconds = 60;
    int backoff_initial_ms = 500;  // doubles per retry
};

class RemoteJudgeBackend : public JudgeBackend {
public:
    explicit RemoteJudgeBackend(RemoteConfig config);
    ~RemoteJudgeBackend() override;

    std::string complete(const JudgeRequest& request) override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace relyeval::judge
