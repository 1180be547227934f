#include "relyeval/judge.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <condition_variable>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "relyeval/prompt_data.hpp"

using nlohmann::json;

namespace relyeval::judge {

// --- names -------------------------------------------------------------------

std::string_view relevance_name(Relevance value) {
    switch (value) {
        case Relevance::Relevant: return "Relevant";
        case Relevance::Irrelevant: return "Irrelevant";
        case Relevance::Unsure: return "Unsure";
    }
    return "Unsure";
}

std::string_view truthfulness_name(Truthfulness value) {
    return value == Truthfulness::Truthful ? "Truthful" : "Untruthful";
}

std::string_view prompt_kind_name(PromptKind kind) {
    switch (kind) {
        case PromptKind::ToolRelevance: return "tool_relevance";
        case PromptKind::CallingTruthfulness: return "calling_truthfulness";
        case PromptKind::AnswerRelevance: return "answer_relevance";
        case PromptKind::MissingParamRewrite: return "missing_param_rewrite";
    }
    return "tool_relevance";
}

std::optional<PromptKind> prompt_kind_from_name(std::string_view name) {
    if (name == "tool_relevance") return PromptKind::ToolRelevance;
    if (name == "calling_truthfulness") return PromptKind::CallingTruthfulness;
    if (name == "answer_relevance") return PromptKind::AnswerRelevance;
    if (name == "missing_param_rewrite") return PromptKind::MissingParamRewrite;
    return std::nullopt;
}

// --- templates ----------------------------------------------------------------

std::string_view tool_relevance_template() { return detail::kToolRelevanceTemplate; }
std::string_view content_hallucination_template() { return detail::kContentHallucinationTemplate; }
std::string_view answer_relevance_template() { return detail::kAnswerRelevanceTemplate; }
std::string_view missing_parameter_template() { return detail::kMissingParameterTemplate; }
std::string_view agent_system_template() { return detail::kAgentSystemTemplate; }

std::string fill_template(std::string_view tmpl,
                          const std::vector<std::pair<std::string_view, std::string_view>>& slots) {
    std::string out;
    out.reserve(tmpl.size());
    size_t i = 0;
    while (i < tmpl.size()) {
        if (tmpl[i] == '{') {
            bool matched = false;
            for (const auto& [name, value] : slots) {
                if (tmpl.size() - i >= name.size() + 2 && tmpl[i + 1 + name.size()] == '}' &&
                    tmpl.compare(i + 1, name.size(), name) == 0) {
                    out.append(value);
                    i += name.size() + 2;
                    matched = true;
                    break;
                }
            }
            if (matched) continue;
        }
        out.push_back(tmpl[i]);
        ++i;
    }
    return out;
}

namespace {

json param_entry(const ParamSpec& param) {
    return json{{"name", param.name},
                {"type", std::string(param_type_name(param.type))},
                {"description", param.description}};
}

json param_schema_json(const ToolSpec& spec) {
    json required = json::array();
    json optional = json::array();
    for (const auto& param : spec.params)
        (param.required ? required : optional).push_back(param_entry(param));
    json schema = json::object();
    if (!required.empty()) schema["required"] = required;
    if (!optional.empty()) schema["optional"] = optional;
    return schema;
}

std::string render_tool_calling(const ToolInvocation& call) {
    return call.tool_name + "(" + call.args_raw + ")";
}

}  // namespace

std::string render_param_schema(const ToolSpec& spec) {
    return param_schema_json(spec).dump();
}

std::string render_relevance_prompt(const std::string& query, const ToolSpec& spec) {
    std::string params = render_param_schema(spec);
    return fill_template(tool_relevance_template(), {{"query", query},
                                                     {"tool_description", spec.description},
                                                     {"tool_parameter", params}});
}

std::string render_truthfulness_prompt(const std::string& history, const ToolSpec& spec,
                                       const Action& call) {
    if (!call.is_invocation())
        throw ContractError("render_truthfulness_prompt: action is not a tool invocation");
    std::string params = render_param_schema(spec);
    std::string calling = render_tool_calling(call.invocation());
    return fill_template(content_hallucination_template(), {{"user_history", history},
                                                            {"tool_parameter", params},
                                                            {"tool_calling", calling}});
}

std::string render_answer_relevance_prompt(const std::vector<ToolInvocation>& calls,
                                           const std::string& answer) {
    if (calls.empty())
        throw ContractError("render_answer_relevance_prompt: empty tool call list");
    std::string blocks;
    for (size_t i = 0; i < calls.size(); ++i) {
        if (i > 0) blocks += "\n\n";
        blocks += "Tool call: " + render_tool_calling(calls[i]);
        blocks += "\nResult: " + calls[i].response;
    }
    return fill_template(answer_relevance_template(), {{"tool_calls", blocks}, {"answer", answer}});
}

std::string render_rewrite_prompt(const ToolSet& toolset, const std::string& query) {
    json tools = json::array();
    for (const auto& tool : toolset.tools)
        tools.push_back(json{{"name", tool.name},
                             {"description", tool.description},
                             {"parameters", param_schema_json(tool)}});
    std::string tool_list = tools.dump();
    return fill_template(missing_parameter_template(), {{"tool_list", tool_list}, {"query", query}});
}

std::string render_history(const Trajectory& trajectory, size_t upto_step) {
    std::string out = "user: " + trajectory.query;
    size_t end = std::min(upto_step, trajectory.steps.size());
    for (size_t i = 0; i < end; ++i) {
        const Action& step = trajectory.steps[i];
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

std::string render_agent_system_prompt(const ToolSet& toolset) {
    std::string descriptions;
    for (size_t i = 0; i < toolset.tools.size(); ++i) {
        if (i > 0) descriptions += "\n";
        descriptions += toolset.tools[i].name + ": " + toolset.tools[i].description;
    }
    json apis = json::array();
    for (const auto& tool : toolset.tools)
        apis.push_back(json{{"name", tool.name},
                            {"description", tool.description},
                            {"parameters", param_schema_json(tool)}});
    std::string api_description = apis.dump();
    return fill_template(agent_system_template(),
                         {{"tool_description", descriptions}, {"api_description", api_description}});
}

// --- verdict parsing -----------------------------------------------------------

namespace {

std::string trim(std::string_view text) {
    size_t begin = 0, end = text.size();
    while (begin < end && std::isspace(static_cast<unsigned char>(text[begin]))) ++begin;
    while (end > begin && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
    return std::string(text.substr(begin, end - begin));
}

std::string lower(std::string text) {
    std::transform(text.begin(), text.end(), text.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return text;
}

// First parseable JSON object embedded in the reply; backends may wrap the
// verdict in prose or a tool-call envelope.
std::optional<json> extract_json_object(const std::string& reply) {
    for (size_t start = reply.find('{'); start != std::string::npos;
         start = reply.find('{', start + 1)) {
        int depth = 0;
        bool in_string = false, escaped = false;
        for (size_t i = start; i < reply.size(); ++i) {
            char c = reply[i];
            if (in_string) {
                if (escaped) escaped = false;
                else if (c == '\\') escaped = true;
                else if (c == '"') in_string = false;
                continue;
            }
            if (c == '"') in_string = true;
            else if (c == '{') ++depth;
            else if (c == '}') {
                if (--depth == 0) {
                    json parsed = json::parse(reply.substr(start, i - start + 1), nullptr, false);
                    if (!parsed.is_discarded() && parsed.is_object()) return parsed;
                    break;
                }
            }
        }
    }
    return std::nullopt;
}

struct RawVerdict {
    std::string token;
    std::string reason;
};

std::optional<RawVerdict> extract_verdict(const std::string& reply,
                                          const std::vector<const char*>& field_names) {
    auto obj = extract_json_object(reply);
    if (!obj) return std::nullopt;
    for (const char* field : field_names) {
        auto it = obj->find(field);
        if (it != obj->end() && it->is_string()) {
            RawVerdict raw;
            raw.token = trim(it->get<std::string>());
            if (auto content = obj->find("content"); content != obj->end() && content->is_string())
                raw.reason = content->get<std::string>();
            return raw;
        }
    }
    return std::nullopt;
}

// Exactly the enum tokens, case-insensitive; anything else is a parse failure,
// never a silent default.
std::optional<Relevance> match_relevance(const std::string& token) {
    std::string t = lower(token);
    if (t == "relevant") return Relevance::Relevant;
    if (t == "irrelevant") return Relevance::Irrelevant;
    if (t == "unsure") return Relevance::Unsure;
    return std::nullopt;
}

std::optional<Truthfulness> match_truthfulness(const std::string& token) {
    std::string t = lower(token);
    if (t == "truthful") return Truthfulness::Truthful;
    if (t == "untruthful") return Truthfulness::Untruthful;
    return std::nullopt;
}

std::string snippet(const std::string& text) {
    return text.size() <= 160 ? text : text.substr(0, 160) + "...";
}

template <typename Verdict, typename Matcher>
Verdict ask(JudgeBackend& backend, const JudgeRequest& request,
            const std::vector<const char*>& field_names, Matcher matcher) {
    std::string reply = backend.complete(request);
    for (int attempt = 0;; ++attempt) {
        if (auto raw = extract_verdict(reply, field_names)) {
            if (auto value = matcher(raw->token)) return Verdict{*value, raw->reason};
        }
        if (attempt >= 1)
            throw VerdictParseError("no usable " + std::string(field_names.front()) +
                                    " verdict after re-ask; last reply: " + snippet(reply));
        reply = backend.complete(request);  // one re-ask, then hard error
    }
}

}  // namespace

RelevanceVerdict assess_tool_relevance(JudgeBackend& backend, const std::string& query,
                                       const ToolSpec& spec) {
    JudgeRequest request{PromptKind::ToolRelevance, render_relevance_prompt(query, spec), spec.name,
                         query};
    return ask<RelevanceVerdict>(backend, request, {"tool_relevance"}, match_relevance);
}

TruthfulnessVerdict assess_param_truthfulness(JudgeBackend& backend, const std::string& history,
                                              const ToolSpec& spec, const Action& call) {
    // salient text carries the call under review too: a fabricated value
    // appears only there, never in the prior history
    JudgeRequest request{PromptKind::CallingTruthfulness,
                         render_truthfulness_prompt(history, spec, call), spec.name,
                         history + "\ncurrent call: " + render_tool_calling(call.invocation())};
    // the final template line spells the field "calling_trufulness"; accept both
    return ask<TruthfulnessVerdict>(backend, request,
                                    {"calling_truthfulness", "calling_trufulness"},
                                    match_truthfulness);
}

AnswerRelevanceVerdict assess_answer_relevance(JudgeBackend& backend,
                                               const std::vector<ToolInvocation>& calls,
                                               const std::string& answer) {
    JudgeRequest request{PromptKind::AnswerRelevance, render_answer_relevance_prompt(calls, answer),
                         "", answer};
    return ask<AnswerRelevanceVerdict>(backend, request, {"answer_relevance"}, match_relevance);
}

// --- deterministic rewriter ------------------------------------------------------

namespace {

bool is_leading_punct(char c) {
    return c == '(' || c == '[' || c == '{' || c == '"' || c == '\'';
}

bool is_trailing_punct(char c) {
    return c == ')' || c == ']' || c == '}' || c == '"' || c == '\'' || c == '.' || c == ',' ||
           c == ';' || c == ':' || c == '!' || c == '?';
}

}  // namespace

std::string hide_param_tokens(const std::string& query) {
    std::istringstream stream(query);
    std::string token;
    std::vector<std::string> kept;
    bool dropped_any = false;
    while (stream >> token) {
        size_t begin = 0, end = token.size();
        while (begin < end && is_leading_punct(token[begin])) ++begin;
        while (end > begin && is_trailing_punct(token[end - 1])) --end;
        std::string core = token.substr(begin, end - begin);
        bool has_digit = std::any_of(core.begin(), core.end(),
                                     [](unsigned char c) { return std::isdigit(c) != 0; });
        if (has_digit) {
            dropped_any = true;
            // keep sentence punctuation attached to the previous word
            std::string tail = token.substr(end);
            if (!tail.empty() && !kept.empty()) kept.back() += tail;
            continue;
        }
        kept.push_back(token);
    }
    if (!dropped_any) return query;
    std::string out;
    for (size_t i = 0; i < kept.size(); ++i) {
        if (i > 0) out += ' ';
        out += kept[i];
    }
    return out;
}

// --- scripted mock ----------------------------------------------------------------

MockJudgeBackend::MockJudgeBackend() {
    defaults_[PromptKind::ToolRelevance] = "Relevant";
    defaults_[PromptKind::CallingTruthfulness] = "Truthful";
    defaults_[PromptKind::AnswerRelevance] = "Irrelevant";
}

MockJudgeBackend MockJudgeBackend::from_script(const std::string& script_json) {
    json j = json::parse(script_json, nullptr, false);
    if (j.is_discarded()) throw ParseError("mock script: invalid JSON");
    MockJudgeBackend backend;
    if (auto defaults = j.find("defaults"); defaults != j.end()) {
        for (auto it = defaults->begin(); it != defaults->end(); ++it) {
            auto kind = prompt_kind_from_name(it.key());
            if (!kind) throw ParseError("mock script: unknown default kind '" + it.key() + "'");
            backend.set_default(*kind, it->get<std::string>());
        }
    }
    if (auto rules = j.find("rules"); rules != j.end()) {
        for (const auto& r : *rules) {
            MockRule rule;
            auto kind = prompt_kind_from_name(r.value("kind", ""));
            if (!kind) throw ParseError("mock script: rule with unknown kind");
            rule.kind = *kind;
            if (r.contains("tool_name")) rule.tool_name = r["tool_name"].get<std::string>();
            if (r.contains("query_contains"))
                rule.query_contains = r["query_contains"].get<std::string>();
            if (!r.contains("verdict")) throw ParseError("mock script: rule without verdict");
            rule.verdict = r["verdict"].get<std::string>();
            rule.reason = r.value("reason", "scripted");
            backend.add_rule(std::move(rule));
        }
    }
    return backend;
}

MockJudgeBackend MockJudgeBackend::from_script_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("mock script: cannot open " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return from_script(buffer.str());
}

void MockJudgeBackend::add_rule(MockRule rule) { rules_.push_back(std::move(rule)); }

void MockJudgeBackend::set_default(PromptKind kind, std::string verdict) {
    defaults_[kind] = std::move(verdict);
}

size_t MockJudgeBackend::call_count() const {
    size_t total = 0;
    for (const auto& c : counts_) total += c.load();
    return total;
}

size_t MockJudgeBackend::call_count(PromptKind kind) const {
    return counts_[static_cast<size_t>(kind)].load();
}

void MockJudgeBackend::reset_counts() {
    for (auto& c : counts_) c.store(0);
}

std::string MockJudgeBackend::complete(const JudgeRequest& request) {
    counts_[static_cast<size_t>(request.kind)]++;

    const MockRule* hit = nullptr;
    for (const auto& rule : rules_) {
        if (rule.kind != request.kind) continue;
        if (rule.tool_name && *rule.tool_name != request.tool_name) continue;
        if (rule.query_contains && request.query.find(*rule.query_contains) == std::string::npos)
            continue;
        hit = &rule;
        break;
    }

    if (request.kind == PromptKind::MissingParamRewrite)
        return hit ? hit->verdict : hide_param_tokens(request.query);

    std::string verdict = hit ? hit->verdict : defaults_.at(request.kind);
    std::string reason = hit ? hit->reason : "mock default";
    const char* field = request.kind == PromptKind::ToolRelevance ? "tool_relevance"
                        : request.kind == PromptKind::CallingTruthfulness ? "calling_truthfulness"
                                                                          : "answer_relevance";
    return json{{"content", reason}, {field, verdict}}.dump();
}

}  // namespace relyeval::judge
