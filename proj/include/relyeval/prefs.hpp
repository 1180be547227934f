#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "relyeval/classifier.hpp"
#include "relyeval/metrics.hpp"
#include "relyeval/model.hpp"

namespace relyeval {

// ---------------------------------------------------------------------------
// Step categories (Correct > Indecisive > Hallucinated)
// ---------------------------------------------------------------------------

enum class StepCategory { Hallucinated, Indecisive, Correct };

std::string_view step_category_name(StepCategory category);
std::optional<StepCategory> step_category_from_name(std::string_view name);

// Correct=2, Indecisive=1, Hallucinated=0.
int step_category_rank(StepCategory category);

// ---------------------------------------------------------------------------
// Step sample sets (one decision point, several sampled continuations)
// ---------------------------------------------------------------------------

struct StepSampleSet {
    std::string task_id;
    std::size_t step_index = 0;  // position of the decision point
    std::string query;
    ToolSet toolset;
    std::vector<Action> prior_steps;  // context before the decision point
    std::vector<Action> candidates;   // sampled next actions, non-empty
    // Either empty (categories to be computed) or aligned with candidates.
    std::vector<StepCategory> categories;
};

void validate_step_sample_set(const StepSampleSet& set);

StepSampleSet parse_step_sample_set(const std::string& line);
std::string serialize_step_sample_set(const StepSampleSet& set);

// Indecisive actions categorize by variant alone; tool invocations run
// through the hallucination classifier over context+candidate; final answers
// default to Correct. Judge errors propagate.
StepCategory categorize_candidate(const Action& candidate, const StepSampleSet& set,
                                  judge::JudgeBackend& backend,
                                  const ClassifierOptions& options = {});

// One category per candidate, in order. Precomputed categories, when present,
// are returned as-is without touching the backend.
std::vector<StepCategory> categorize_candidates(const StepSampleSet& set,
                                                judge::JudgeBackend& backend,
                                                const ClassifierOptions& options = {});

// ---------------------------------------------------------------------------
// Preference pairs
// ---------------------------------------------------------------------------

enum class PairType { CorrectOverIndecisive, IndecisiveOverHallucinated, CorrectOverHallucinated };

std::string_view pair_type_name(PairType type);
std::optional<PairType> pair_type_from_name(std::string_view name);

struct PreferencePair {
    std::string task_id;
    std::size_t step_index = 0;
    PairType pair_type = PairType::CorrectOverHallucinated;
    std::string context;   // rendered system prompt + query + prior steps
    std::string chosen;    // rendered action text
    std::string rejected;  // rendered action text
};

// Deterministic text forms used for DPO chosen/rejected fields and contexts.
std::string render_action(const Action& action);
std::string render_step_context(const StepSampleSet& set);

// For each of the three pair types whose categories are both present among
// the candidates, emits exactly one pair; representatives are drawn
// seeded-uniformly within each category, so a fixed seed reproduces the same
// pairs. Categories must be aligned with candidates (ContractError).
std::vector<PreferencePair> build_pairs(const StepSampleSet& set,
                                        const std::vector<StepCategory>& categories,
                                        std::uint64_t seed);

PreferencePair parse_preference_pair(const std::string& line);
std::string serialize_preference_pair(const PreferencePair& pair);

// Writes one record per line, returns the record count. A pair whose chosen
// and rejected texts are identical is refused (ValidationError) — it could
// never teach a preference.
std::size_t emit_dpo_file(const std::vector<PreferencePair>& pairs, std::ostream& sink);

// ---------------------------------------------------------------------------
// Trajectory-level ranking (reporting/filtering aid)
// ---------------------------------------------------------------------------

enum class TrajectoryCategory { HallucinatedResult, Failure, Success };

std::string_view trajectory_category_name(TrajectoryCategory category);

TrajectoryCategory trajectory_category(bool pass_verdict, bool task_hallucinated);

// Indices into `samples`, best first (success > failure > hallucinated
// result); ties keep input order.
std::vector<std::size_t> rank_trajectories(const std::vector<SampleMetrics>& samples);

}  // namespace relyeval
