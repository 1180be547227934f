#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>

#include <json.hpp>

#include "relyeval/judge.hpp"
#include "relyeval/metrics.hpp"

namespace relyeval {

inline constexpr std::string_view kToolVersion = "0.1.0";

// Exit codes shared by every subcommand.
inline constexpr int kExitSuccess = 0;     // run completed, artifacts written
inline constexpr int kExitValidation = 1;  // bad input data or configuration
inline constexpr int kExitBackend = 2;     // judge backend failed; partial results kept
inline constexpr int kExitUsage = 64;      // command line misuse

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct JudgeConfig {
    std::string backend = "mock";  // "mock" or "remote"
    std::string base_url;          // remote only
    std::string model;             // remote only
    int concurrency_cap = 4;
    int retries = 3;
    std::string mock_script;  // optional scripted-verdict file for the mock
};

struct RunConfig {
    JudgeConfig judge;
    bool strict_unsure = false;
    PenaltyBasis penalty_basis = PenaltyBasis::ToolLevel;
    std::string input_path;
    std::string output_dir;
    std::uint64_t seed = 0;
    int workers = 1;

    // perturb
    std::string subset;  // "mp" or "ut"
    std::string donor_pool_path;

    // synth-sft
    bool single_tool_only = false;
};

// Merges settings from a JSON config file; flags applied afterwards win.
// The judge key is never read from the file — only from the environment.
void apply_config_file(RunConfig& config, const std::string& path);

// Canonical, secret-free JSON view of the config (hashed into manifests).
nlohmann::json config_to_json(const RunConfig& config);

// Mock backends are fully offline; the remote backend takes its key from
// RELYEVAL_JUDGE_KEY and refuses to start without it (BackendError).
std::unique_ptr<judge::JudgeBackend> make_backend(const JudgeConfig& config);

// ---------------------------------------------------------------------------
// Subcommands. Each validates, runs, writes artifacts + manifest.json into
// config.output_dir, and maps failures onto the exit codes above.
// Diagnostics go to `err`, human-readable summaries to `out`.
// ---------------------------------------------------------------------------

// Classifies every trajectory in the input file, writes detail.jsonl (one
// record per sample, verdicts included), report.json, report.csv. On a judge
// backend failure the completed samples are still written, plus failure.json.
int cmd_eval(const RunConfig& config, std::ostream& out, std::ostream& err);

// Writes perturbed.jsonl: a header record carrying the seed, then one
// perturbed task per input task.
int cmd_perturb(const RunConfig& config, std::ostream& out, std::ostream& err);

// Converts a perturbed-task file into sft.jsonl (no-op tasks dropped).
int cmd_synth_sft(const RunConfig& config, std::ostream& out, std::ostream& err);

// Converts a step-sample file into dpo.jsonl preference pairs.
int cmd_synth_dpo(const RunConfig& config, std::ostream& out, std::ostream& err);

// Re-aggregates a detail.jsonl file and re-emits report.json/report.csv
// (printed to `out`; written to output_dir when set).
int cmd_report(const RunConfig& config, std::ostream& out, std::ostream& err);

}  // namespace relyeval
