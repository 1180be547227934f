#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "relyeval/classifier.hpp"
#include "relyeval/model.hpp"

namespace relyeval {

// ---------------------------------------------------------------------------
// Per-sample metrics
// ---------------------------------------------------------------------------

struct SampleMetrics {
    std::string task_id;
    SubsetTag subset_tag = SubsetTag::Original;
    size_t n_total = 0;          // tool calls in the trajectory
    size_t n_hallucination = 0;  // calls with a non-None verdict
    double h_sample = 0.0;       // n_hallucination / n_total, 0 when no calls
    bool task_hallucinated = false;
    bool pass_verdict = false;
    int utility = 0;
};

// Which hallucination notion triggers the flat utility penalty.
enum class PenaltyBasis { ToolLevel, TaskLevel };

std::string_view penalty_basis_name(PenaltyBasis basis);
std::optional<PenaltyBasis> penalty_basis_from_name(std::string_view name);

struct MetricsOptions {
    // When set, an Unsure answer-relevance verdict counts the task as
    // result-hallucinated instead of giving benefit of the doubt.
    bool strict_unsure = false;
    PenaltyBasis penalty_basis = PenaltyBasis::ToolLevel;
};

// Fraction of hallucinated calls; 0 for an empty verdict list.
double sample_hallucination_rate(const std::vector<HallucinationVerdict>& verdicts);

// A task is result-hallucinated only when it passed, has hallucinated calls
// and a final answer, and the judge finds those calls' results Relevant to
// that answer. Failed tasks are never counted again here.
bool determine_task_hallucination(const Trajectory& trajectory,
                                  const std::vector<HallucinationVerdict>& verdicts,
                                  judge::JudgeBackend& backend,
                                  const MetricsOptions& options = {});

// Exact subtraction, no clamping.
double repr_rate(double pass_rate, double task_hallucination_rate);

// 20 for success minus excess-call penalty (capped at 10, floored at 0)
// minus a flat 10 when hallucinated. Always within [-20, 20].
int utility(bool passed, size_t total_calls, size_t necessary_calls, bool hallucinated);

// Full per-sample record; verdict count must match the trajectory's call
// count (ContractError otherwise). Judge errors propagate.
SampleMetrics compute_sample_metrics(const Trajectory& trajectory,
                                     const std::vector<HallucinationVerdict>& verdicts,
                                     judge::JudgeBackend& backend,
                                     const MetricsOptions& options = {});

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

// Rates are absent (never fabricated zeros) when the subset holds no samples.
struct SubsetAggregate {
    SubsetTag subset_tag = SubsetTag::Original;
    size_t sample_count = 0;
    std::optional<double> pass_rate;
    std::optional<double> task_hallucination_rate;
    std::optional<double> tool_hallucination_rate;  // mean h_sample
    std::optional<double> repr;                     // pass_rate - task_hallucination_rate
    std::optional<double> mean_utility;
    std::optional<double> mean_tool_calls;
};

struct AggregateReport {
    std::vector<SubsetAggregate> subsets;  // always all three tags, fixed order

    const SubsetAggregate* find(SubsetTag tag) const;
};

// Arithmetic means per subset with an in-order reduction, so results are
// identical run to run and independent of worker count upstream.
AggregateReport aggregate(const std::vector<SampleMetrics>& samples);

// ---------------------------------------------------------------------------
// Report emission
// ---------------------------------------------------------------------------

nlohmann::json sample_to_json(const SampleMetrics& sample);
SampleMetrics sample_from_json(const nlohmann::json& j);
nlohmann::json report_to_json(const AggregateReport& report);

// Header row plus one row per subset; absent rates become empty cells.
std::string report_to_csv(const AggregateReport& report);

}  // namespace relyeval
