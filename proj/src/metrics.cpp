#include "relyeval/metrics.hpp"

#include <algorithm>
#include <array>

using nlohmann::json;

namespace relyeval {

std::string_view penalty_basis_name(PenaltyBasis basis) {
    return basis == PenaltyBasis::ToolLevel ? "tool_level" : "task_level";
}

std::optional<PenaltyBasis> penalty_basis_from_name(std::string_view name) {
    if (name == "tool_level") return PenaltyBasis::ToolLevel;
    if (name == "task_level") return PenaltyBasis::TaskLevel;
    return std::nullopt;
}

double sample_hallucination_rate(const std::vector<HallucinationVerdict>& verdicts) {
    if (verdicts.empty()) return 0.0;
    size_t hallucinated = 0;
    for (const auto& verdict : verdicts)
        if (verdict.is_hallucination()) ++hallucinated;
    return static_cast<double>(hallucinated) / static_cast<double>(verdicts.size());
}

bool determine_task_hallucination(const Trajectory& trajectory,
                                  const std::vector<HallucinationVerdict>& verdicts,
                                  judge::JudgeBackend& backend, const MetricsOptions& options) {
    // Failed tasks already score zero on pass rate; counting them again here
    // would punish the same failure twice.
    if (!trajectory.pass_verdict) return false;
    auto calls = hallucinated_calls(trajectory, verdicts);
    if (calls.empty()) return false;
    const FinalAnswer* answer = trajectory.final_answer();
    if (!answer) return false;
    auto verdict = judge::assess_answer_relevance(backend, calls, answer->text);
    switch (verdict.value) {
        case judge::Relevance::Relevant: return true;
        case judge::Relevance::Irrelevant: return false;
        case judge::Relevance::Unsure: return options.strict_unsure;
    }
    return false;
}

double repr_rate(double pass_rate, double task_hallucination_rate) {
    return pass_rate - task_hallucination_rate;
}

int utility(bool passed, size_t total_calls, size_t necessary_calls, bool hallucinated) {
    int reward = passed ? 20 : 0;
    long long excess =
        static_cast<long long>(total_calls) - static_cast<long long>(necessary_calls);
    int excess_penalty = static_cast<int>(std::clamp<long long>(excess, 0, 10));
    int hallucination_penalty = hallucinated ? 10 : 0;
    return reward - excess_penalty - hallucination_penalty;
}

SampleMetrics compute_sample_metrics(const Trajectory& trajectory,
                                     const std::vector<HallucinationVerdict>& verdicts,
                                     judge::JudgeBackend& backend,
                                     const MetricsOptions& options) {
    if (verdicts.size() != trajectory.tool_call_count())
        throw ContractError("compute_sample_metrics: verdict count " +
                            std::to_string(verdicts.size()) + " does not match call count " +
                            std::to_string(trajectory.tool_call_count()));

    SampleMetrics sample;
    sample.task_id = trajectory.task_id;
    sample.subset_tag = trajectory.subset_tag;
    sample.n_total = verdicts.size();
    for (const auto& verdict : verdicts)
        if (verdict.is_hallucination()) ++sample.n_hallucination;
    sample.h_sample = sample_hallucination_rate(verdicts);
    sample.pass_verdict = trajectory.pass_verdict;
    sample.task_hallucinated =
        determine_task_hallucination(trajectory, verdicts, backend, options);

    bool penalized = options.penalty_basis == PenaltyBasis::ToolLevel
                         ? sample.n_hallucination > 0
                         : sample.task_hallucinated;
    int necessary = std::max(trajectory.necessary_calls, 0);
    sample.utility = utility(sample.pass_verdict, sample.n_total,
                             static_cast<size_t>(necessary), penalized);
    return sample;
}

const SubsetAggregate* AggregateReport::find(SubsetTag tag) const {
    for (const auto& subset : subsets)
        if (subset.subset_tag == tag) return &subset;
    return nullptr;
}

AggregateReport aggregate(const std::vector<SampleMetrics>& samples) {
    constexpr std::array<SubsetTag, 3> kTags{SubsetTag::Original, SubsetTag::MissingParameter,
                                             SubsetTag::UnmatchedTools};

    AggregateReport report;
    for (SubsetTag tag : kTags) {
        SubsetAggregate agg;
        agg.subset_tag = tag;

        size_t count = 0, passed = 0, task_hallucinated = 0;
        std::vector<double> h_values;
        long long utility_sum = 0, call_sum = 0;
        for (const auto& sample : samples) {
            if (sample.subset_tag != tag) continue;
            ++count;
            if (sample.pass_verdict) ++passed;
            if (sample.task_hallucinated) ++task_hallucinated;
            h_values.push_back(sample.h_sample);
            utility_sum += sample.utility;
            call_sum += static_cast<long long>(sample.n_total);
        }
        // Every other reduction is an integer sum; this one adds doubles, so
        // fix the addition order to make the mean a function of the value
        // multiset rather than of sample order.
        std::sort(h_values.begin(), h_values.end());
        double h_sum = 0.0;
        for (double h : h_values) h_sum += h;

        agg.sample_count = count;
        if (count > 0) {
            double n = static_cast<double>(count);
            agg.pass_rate = static_cast<double>(passed) / n;
            agg.task_hallucination_rate = static_cast<double>(task_hallucinated) / n;
            agg.tool_hallucination_rate = h_sum / n;
            agg.repr = repr_rate(*agg.pass_rate, *agg.task_hallucination_rate);
            agg.mean_utility = static_cast<double>(utility_sum) / n;
            agg.mean_tool_calls = static_cast<double>(call_sum) / n;
        }
        report.subsets.push_back(std::move(agg));
    }
    return report;
}

json sample_to_json(const SampleMetrics& sample) {
    return json{{"task_id", sample.task_id},
                {"subset", std::string(subset_tag_name(sample.subset_tag))},
                {"n_total", sample.n_total},
                {"n_hallucination", sample.n_hallucination},
                {"h_sample", sample.h_sample},
                {"task_hallucinated", sample.task_hallucinated},
                {"pass_verdict", sample.pass_verdict},
                {"utility", sample.utility}};
}

SampleMetrics sample_from_json(const json& j) {
    auto require = [&](const char* key) -> const json& {
        auto it = j.find(key);
        if (it == j.end()) throw ParseError(std::string("sample record: missing '") + key + "'");
        return *it;
    };

    SampleMetrics sample;
    sample.task_id = require("task_id").get<std::string>();
    std::string tag = require("subset").get<std::string>();
    auto subset = subset_tag_from_name(tag);
    if (!subset) throw ParseError("sample record: unknown subset '" + tag + "'");
    sample.subset_tag = *subset;
    sample.n_total = require("n_total").get<size_t>();
    sample.n_hallucination = require("n_hallucination").get<size_t>();
    sample.h_sample = require("h_sample").get<double>();
    sample.task_hallucinated = require("task_hallucinated").get<bool>();
    sample.pass_verdict = require("pass_verdict").get<bool>();
    sample.utility = require("utility").get<int>();

    if (sample.n_hallucination > sample.n_total)
        throw ValidationError("sample '" + sample.task_id +
                              "': n_hallucination exceeds n_total");
    return sample;
}

namespace {

json rate_or_null(const std::optional<double>& value) {
    return value ? json(*value) : json(nullptr);
}

}  // namespace

json report_to_json(const AggregateReport& report) {
    json subsets = json::array();
    for (const auto& subset : report.subsets)
        subsets.push_back(json{{"subset", std::string(subset_tag_name(subset.subset_tag))},
                               {"sample_count", subset.sample_count},
                               {"pass_rate", rate_or_null(subset.pass_rate)},
                               {"task_hallucination_rate",
                                rate_or_null(subset.task_hallucination_rate)},
                               {"tool_hallucination_rate",
                                rate_or_null(subset.tool_hallucination_rate)},
                               {"repr", rate_or_null(subset.repr)},
                               {"mean_utility", rate_or_null(subset.mean_utility)},
                               {"mean_tool_calls", rate_or_null(subset.mean_tool_calls)}});
    return json{{"subsets", subsets}};
}

std::string report_to_csv(const AggregateReport& report) {
    // Render numbers exactly as the JSON emitter does so both artifacts agree
    // byte for byte on every value.
    auto cell = [](const std::optional<double>& value) {
        return value ? json(*value).dump() : std::string();
    };

    std::string out =
        "subset,sample_count,pass_rate,task_hallucination_rate,tool_hallucination_rate,"
        "repr,mean_utility,mean_tool_calls\n";
    for (const auto& subset : report.subsets) {
        out += std::string(subset_tag_name(subset.subset_tag));
        out += ',' + std::to_string(subset.sample_count);
        out += ',' + cell(subset.pass_rate);
        out += ',' + cell(subset.task_hallucination_rate);
        out += ',' + cell(subset.tool_hallucination_rate);
        out += ',' + cell(subset.repr);
        out += ',' + cell(subset.mean_utility);
        out += ',' + cell(subset.mean_tool_calls);
        out += '\n';
    }
    return out;
}

}  // namespace relyeval
