#include "relyeval/pipeline.hpp"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>
#include <vector>

#include "relyeval/classifier.hpp"
#include "relyeval/perturb.hpp"
#include "relyeval/prefs.hpp"
#include "relyeval/rng.hpp"

using nlohmann::json;

namespace relyeval {

namespace {

// --- file helpers -------------------------------------------------------------

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream sink(path, std::ios::binary | std::ios::trunc);
    if (!sink) throw ValidationError("cannot write " + path);
    sink << content;
    if (!sink) throw ValidationError("write failed for " + path);
}

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    size_t begin = 0;
    while (begin <= text.size()) {
        size_t end = text.find('\n', begin);
        if (end == std::string::npos) end = text.size();
        std::string line = text.substr(begin, end - begin);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) lines.push_back(std::move(line));
        if (end == text.size()) break;
        begin = end + 1;
    }
    return lines;
}

std::string hex64(std::uint64_t value) {
    char buffer[17];
    std::snprintf(buffer, sizeof(buffer), "%016llx", static_cast<unsigned long long>(value));
    return buffer;
}

// --- config -----------------------------------------------------------------

void apply_judge_config(JudgeConfig& judge_config, const json& j) {
    if (j.contains("api_key") || j.contains("key"))
        throw ValidationError(
            "config file: the judge key is read only from " + std::string(judge::kJudgeKeyEnvVar) +
            ", never from a config file");
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& key = it.key();
        if (key == "backend") judge_config.backend = it->get<std::string>();
        else if (key == "base_url") judge_config.base_url = it->get<std::string>();
        else if (key == "model") judge_config.model = it->get<std::string>();
        else if (key == "concurrency_cap") judge_config.concurrency_cap = it->get<int>();
        else if (key == "retries") judge_config.retries = it->get<int>();
        else if (key == "mock_script") judge_config.mock_script = it->get<std::string>();
        else throw ValidationError("config file: unknown judge setting '" + key + "'");
    }
}

// --- worker pool ---------------------------------------------------------------

// Runs fn(0..n-1) on `workers` threads; the first thrown exception stops
// scheduling and is kept for the caller to classify.
struct PoolResult {
    std::exception_ptr error;
    explicit operator bool() const { return error != nullptr; }
};

PoolResult run_pool(size_t n, int workers, const std::function<void(size_t)>& fn) {
    std::atomic<size_t> next{0};
    std::atomic<bool> stop{false};
    std::mutex error_mutex;
    PoolResult result;

    auto loop = [&] {
        while (!stop.load(std::memory_order_relaxed)) {
            size_t i = next.fetch_add(1);
            if (i >= n) break;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!result.error) result.error = std::current_exception();
                stop.store(true);
                break;
            }
        }
    };

    int count = std::max(workers, 1);
    if (count == 1 || n <= 1) {
        loop();
        return result;
    }
    std::vector<std::thread> threads;
    threads.reserve(static_cast<size_t>(count));
    for (int t = 0; t < count; ++t) threads.emplace_back(loop);
    for (auto& thread : threads) thread.join();
    return result;
}

// Distinguishes "the judge is broken" (exit 2) from everything else (exit 1).
bool is_backend_failure(const std::exception_ptr& error, std::string& message) {
    try {
        std::rethrow_exception(error);
    } catch (const BackendError& e) {
        message = e.what();
        return true;
    } catch (const VerdictParseError& e) {
        message = e.what();
        return true;
    } catch (const std::exception& e) {
        message = e.what();
        return false;
    }
}

// --- manifests ------------------------------------------------------------------

struct InputDigest {
    std::string path;
    std::string digest;
    size_t records = 0;
};

json make_manifest(const RunConfig& config, const char* command,
                   const std::vector<InputDigest>& inputs,
                   const std::vector<std::string>& outputs) {
    json config_json = config_to_json(config);
    json inputs_json = json::array();
    for (const auto& input : inputs)
        inputs_json.push_back(json{{"path", input.path},
                                   {"fnv1a64", input.digest},
                                   {"records", input.records}});
    return json{{"tool", "relyeval"},
                {"version", std::string(kToolVersion)},
                {"command", command},
                {"seed", config.seed},
                {"config_fnv1a64", hex64(fnv1a64(config_json.dump()))},
                {"config", config_json},
                {"inputs", inputs_json},
                {"outputs", outputs}};
}

std::string pretty(const json& j) { return j.dump(2) + "\n"; }

InputDigest digest_input(const std::string& path, const std::string& bytes, size_t records) {
    return InputDigest{path, hex64(fnv1a64(bytes)), records};
}

bool is_header_record(const std::string& line) {
    json j = json::parse(line, nullptr, false);
    return !j.is_discarded() && j.is_object() && j.value("record", "") == "header";
}

int guarded(std::ostream& err, const std::function<int()>& body) {
    try {
        return body();
    } catch (const BackendError& e) {
        err << "judge backend error: " << e.what() << '\n';
        return kExitBackend;
    } catch (const VerdictParseError& e) {
        err << "judge backend error: " << e.what() << '\n';
        return kExitBackend;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitValidation;
    }
}

void require_paths(const RunConfig& config, const char* command) {
    if (config.input_path.empty())
        throw ValidationError(std::string(command) + ": input path is required");
    if (config.output_dir.empty())
        throw ValidationError(std::string(command) + ": output directory is required");
}

}  // namespace

void apply_config_file(RunConfig& config, const std::string& path) {
    json j = json::parse(read_file(path), nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw ParseError("config file " + path + ": not a JSON object");

    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& key = it.key();
        if (key == "judge") {
            apply_judge_config(config.judge, *it);
        } else if (key == "strict_unsure") {
            config.strict_unsure = it->get<bool>();
        } else if (key == "hallucination_penalty_basis") {
            auto basis = penalty_basis_from_name(it->get<std::string>());
            if (!basis)
                throw ValidationError(
                    "config file: hallucination_penalty_basis must be tool_level or task_level");
            config.penalty_basis = *basis;
        } else if (key == "input") {
            config.input_path = it->get<std::string>();
        } else if (key == "output_dir") {
            config.output_dir = it->get<std::string>();
        } else if (key == "seed") {
            config.seed = it->get<std::uint64_t>();
        } else if (key == "workers") {
            config.workers = it->get<int>();
        } else if (key == "subset") {
            config.subset = it->get<std::string>();
        } else if (key == "donor_pool") {
            config.donor_pool_path = it->get<std::string>();
        } else if (key == "single_tool_only") {
            config.single_tool_only = it->get<bool>();
        } else {
            throw ValidationError("config file: unknown setting '" + key + "'");
        }
    }
}

json config_to_json(const RunConfig& config) {
    return json{{"judge", json{{"backend", config.judge.backend},
                               {"base_url", config.judge.base_url},
                               {"model", config.judge.model},
                               {"concurrency_cap", config.judge.concurrency_cap},
                               {"retries", config.judge.retries},
                               {"mock_script", config.judge.mock_script}}},
                {"strict_unsure", config.strict_unsure},
                {"hallucination_penalty_basis",
                 std::string(penalty_basis_name(config.penalty_basis))},
                {"input", config.input_path},
                {"output_dir", config.output_dir},
                {"seed", config.seed},
                {"workers", config.workers},
                {"subset", config.subset},
                {"donor_pool", config.donor_pool_path},
                {"single_tool_only", config.single_tool_only}};
}

std::unique_ptr<judge::JudgeBackend> make_backend(const JudgeConfig& config) {
    if (config.backend == "mock") {
        if (!config.mock_script.empty())
            return std::make_unique<judge::MockJudgeBackend>(
                judge::MockJudgeBackend::from_script_file(config.mock_script));
        return std::make_unique<judge::MockJudgeBackend>();
    }
    if (config.backend == "remote") {
        if (config.base_url.empty() || config.model.empty())
            throw ValidationError("remote judge requires base_url and model");
        const char* key = std::getenv(judge::kJudgeKeyEnvVar);
        if (key == nullptr || *key == '\0')
            throw BackendError(std::string(judge::kJudgeKeyEnvVar) +
                               " is not set; the remote judge cannot authenticate");
        judge::RemoteConfig remote;
        remote.base_url = config.base_url;
        remote.model = config.model;
        remote.api_key = key;
        remote.retries = config.retries;
        remote.concurrency_cap = config.concurrency_cap;
        return std::make_unique<judge::RemoteJudgeBackend>(remote);
    }
    throw ValidationError("unknown judge backend '" + config.backend +
                          "' (expected mock or remote)");
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

int cmd_eval(const RunConfig& config, std::ostream& out, std::ostream& err) {
    return guarded(err, [&]() -> int {
        require_paths(config, "eval");
        // Backend construction first: a missing key must fail before any work.
        auto backend = make_backend(config.judge);

        std::string raw = read_file(config.input_path);
        std::vector<std::string> lines = split_lines(raw);
        std::vector<Trajectory> trajectories;
        trajectories.reserve(lines.size());
        for (size_t i = 0; i < lines.size(); ++i) {
            try {
                trajectories.push_back(parse_trajectory(lines[i]));
            } catch (const std::exception& e) {
                throw ValidationError(config.input_path + " line " + std::to_string(i + 1) +
                                      ": " + e.what());
            }
        }
        if (trajectories.empty())
            throw ValidationError("no trajectories in " + config.input_path);

        ClassifierOptions classifier_options{config.strict_unsure};
        MetricsOptions metrics_options{config.strict_unsure, config.penalty_basis};

        struct Row {
            SampleMetrics sample;
            std::vector<HallucinationVerdict> verdicts;
            bool done = false;
        };
        std::vector<Row> rows(trajectories.size());
        PoolResult pool = run_pool(trajectories.size(), config.workers, [&](size_t i) {
            auto verdicts = classify_trajectory(trajectories[i], *backend, classifier_options);
            rows[i].sample =
                compute_sample_metrics(trajectories[i], verdicts, *backend, metrics_options);
            rows[i].verdicts = std::move(verdicts);
            rows[i].done = true;
        });

        // Completed samples, in input order regardless of worker scheduling.
        std::vector<SampleMetrics> samples;
        std::string detail;
        for (const Row& row : rows) {
            if (!row.done) continue;
            json record = sample_to_json(row.sample);
            json verdicts = json::array();
            for (const auto& verdict : row.verdicts) verdicts.push_back(verdict_to_json(verdict));
            record["verdicts"] = verdicts;
            detail += record.dump() + "\n";
            samples.push_back(row.sample);
        }

        std::filesystem::create_directories(config.output_dir);
        auto artifact = [&](const char* name) { return config.output_dir + "/" + name; };
        write_file(artifact("detail.jsonl"), detail);

        std::vector<InputDigest> inputs{
            digest_input(config.input_path, raw, trajectories.size())};

        if (pool) {
            std::string message;
            bool backend_failure = is_backend_failure(pool.error, message);
            if (!backend_failure) throw ValidationError(message);

            json failure{{"error", message},
                         {"completed", samples.size()},
                         {"total", trajectories.size()}};
            write_file(artifact("failure.json"), pretty(failure));
            write_file(artifact("manifest.json"),
                       pretty(make_manifest(config, "eval", inputs,
                                            {"detail.jsonl", "failure.json"})));
            err << "judge backend error: " << message << '\n';
            err << "partial results: " << samples.size() << "/" << trajectories.size()
                << " samples written\n";
            return kExitBackend;
        }

        AggregateReport report = aggregate(samples);
        write_file(artifact("report.json"), pretty(report_to_json(report)));
        write_file(artifact("report.csv"), report_to_csv(report));
        write_file(artifact("manifest.json"),
                   pretty(make_manifest(config, "eval", inputs,
                                        {"detail.jsonl", "report.json", "report.csv"})));
        out << report_to_csv(report);
        return kExitSuccess;
    });
}

// ---------------------------------------------------------------------------
// perturb
// ---------------------------------------------------------------------------

int cmd_perturb(const RunConfig& config, std::ostream& out, std::ostream& err) {
    return guarded(err, [&]() -> int {
        require_paths(config, "perturb");
        if (config.subset != "mp" && config.subset != "ut")
            throw ValidationError("perturb: subset must be mp or ut");

        std::string raw = read_file(config.input_path);
        std::vector<std::string> lines = split_lines(raw);
        std::vector<Trajectory> tasks;
        for (size_t i = 0; i < lines.size(); ++i) {
            try {
                tasks.push_back(parse_trajectory(lines[i]));
            } catch (const std::exception& e) {
                throw ValidationError(config.input_path + " line " + std::to_string(i + 1) +
                                      ": " + e.what());
            }
        }
        if (tasks.empty()) throw ValidationError("no tasks in " + config.input_path);

        std::vector<InputDigest> inputs{digest_input(config.input_path, raw, tasks.size())};
        std::vector<PerturbedTask> results(tasks.size());

        if (config.subset == "mp") {
            auto rewriter = make_backend(config.judge);
            PoolResult pool = run_pool(tasks.size(), config.workers, [&](size_t i) {
                results[i] = make_missing_parameter(tasks[i].task_id, tasks[i].query,
                                                    tasks[i].toolset, *rewriter);
            });
            if (pool) {
                std::string message;
                if (is_backend_failure(pool.error, message)) throw BackendError(message);
                throw ValidationError(message);
            }
        } else {
            std::string donor_raw;
            std::vector<ToolSet> donors;
            if (config.donor_pool_path.empty())
                throw ValidationError("perturb ut: donor pool path is required");
            donor_raw = read_file(config.donor_pool_path);
            std::vector<std::string> donor_lines = split_lines(donor_raw);
            for (size_t i = 0; i < donor_lines.size(); ++i) {
                try {
                    donors.push_back(parse_toolset(donor_lines[i]));
                } catch (const std::exception& e) {
                    throw ValidationError(config.donor_pool_path + " line " +
                                          std::to_string(i + 1) + ": " + e.what());
                }
            }
            if (donors.empty())
                throw ValidationError("no donor toolsets in " + config.donor_pool_path);
            inputs.push_back(digest_input(config.donor_pool_path, donor_raw, donors.size()));

            PoolResult pool = run_pool(tasks.size(), config.workers, [&](size_t i) {
                results[i] = make_unmatched_tools(tasks[i].task_id, tasks[i].query,
                                                  tasks[i].toolset, donors, config.seed);
            });
            if (pool) {
                std::string message;
                is_backend_failure(pool.error, message);
                throw ValidationError(message);
            }
        }

        std::string subset_name(
            subset_tag_name(config.subset == "mp" ? SubsetTag::MissingParameter
                                                  : SubsetTag::UnmatchedTools));
        json header{{"record", "header"},
                    {"command", "perturb"},
                    {"subset", subset_name},
                    {"seed", config.seed},
                    {"tool_version", std::string(kToolVersion)}};
        std::string body = header.dump() + "\n";
        size_t noops = 0;
        for (const auto& task : results) {
            body += serialize_perturbed(task) + "\n";
            if (task.noop) ++noops;
        }

        std::filesystem::create_directories(config.output_dir);
        write_file(config.output_dir + "/perturbed.jsonl", body);
        write_file(config.output_dir + "/manifest.json",
                   pretty(make_manifest(config, "perturb", inputs, {"perturbed.jsonl"})));
        out << results.size() << " tasks perturbed (" << noops << " no-op)\n";
        return kExitSuccess;
    });
}

// ---------------------------------------------------------------------------
// synth-sft
// ---------------------------------------------------------------------------

int cmd_synth_sft(const RunConfig& config, std::ostream& out, std::ostream& err) {
    return guarded(err, [&]() -> int {
        require_paths(config, "synth-sft");

        std::string raw = read_file(config.input_path);
        std::vector<std::string> lines = split_lines(raw);
        std::vector<PerturbedTask> tasks;
        for (size_t i = 0; i < lines.size(); ++i) {
            if (is_header_record(lines[i])) continue;
            try {
                tasks.push_back(parse_perturbed(lines[i]));
            } catch (const std::exception& e) {
                throw ValidationError(config.input_path + " line " + std::to_string(i + 1) +
                                      ": " + e.what());
            }
        }
        if (tasks.empty()) throw ValidationError("no perturbed tasks in " + config.input_path);

        std::vector<SftRecord> records = make_sft_records(tasks, config.single_tool_only);
        std::string body;
        for (const auto& record : records) body += serialize_sft_record(record) + "\n";

        std::filesystem::create_directories(config.output_dir);
        write_file(config.output_dir + "/sft.jsonl", body);
        write_file(config.output_dir + "/manifest.json",
                   pretty(make_manifest(config, "synth-sft",
                                        {digest_input(config.input_path, raw, tasks.size())},
                                        {"sft.jsonl"})));
        out << records.size() << " sft records written\n";
        return kExitSuccess;
    });
}

// ---------------------------------------------------------------------------
// synth-dpo
// ---------------------------------------------------------------------------

int cmd_synth_dpo(const RunConfig& config, std::ostream& out, std::ostream& err) {
    return guarded(err, [&]() -> int {
        require_paths(config, "synth-dpo");
        auto backend = make_backend(config.judge);

        std::string raw = read_file(config.input_path);
        std::vector<std::string> lines = split_lines(raw);
        std::vector<StepSampleSet> sets;
        for (size_t i = 0; i < lines.size(); ++i) {
            try {
                sets.push_back(parse_step_sample_set(lines[i]));
            } catch (const std::exception& e) {
                throw ValidationError(config.input_path + " line " + std::to_string(i + 1) +
                                      ": " + e.what());
            }
        }
        if (sets.empty()) throw ValidationError("no step samples in " + config.input_path);

        ClassifierOptions classifier_options{config.strict_unsure};
        std::vector<std::vector<PreferencePair>> per_set(sets.size());
        PoolResult pool = run_pool(sets.size(), config.workers, [&](size_t i) {
            auto categories = categorize_candidates(sets[i], *backend, classifier_options);
            per_set[i] = build_pairs(sets[i], categories, config.seed);
        });
        if (pool) {
            std::string message;
            if (is_backend_failure(pool.error, message)) throw BackendError(message);
            throw ValidationError(message);
        }

        std::vector<PreferencePair> pairs;
        for (auto& set_pairs : per_set)
            for (auto& pair : set_pairs) pairs.push_back(std::move(pair));

        std::ostringstream body;
        size_t count = emit_dpo_file(pairs, body);

        std::filesystem::create_directories(config.output_dir);
        write_file(config.output_dir + "/dpo.jsonl", body.str());
        write_file(config.output_dir + "/manifest.json",
                   pretty(make_manifest(config, "synth-dpo",
                                        {digest_input(config.input_path, raw, sets.size())},
                                        {"dpo.jsonl"})));
        out << count << " preference pairs written\n";
        return kExitSuccess;
    });
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

int cmd_report(const RunConfig& config, std::ostream& out, std::ostream& err) {
    return guarded(err, [&]() -> int {
        if (config.input_path.empty())
            throw ValidationError("report: input path is required");

        std::string raw = read_file(config.input_path);
        std::vector<std::string> lines = split_lines(raw);
        std::vector<SampleMetrics> samples;
        for (size_t i = 0; i < lines.size(); ++i) {
            json j = json::parse(lines[i], nullptr, false);
            if (j.is_discarded())
                throw ValidationError(config.input_path + " line " + std::to_string(i + 1) +
                                      ": invalid JSON");
            try {
                samples.push_back(sample_from_json(j));
            } catch (const std::exception& e) {
                throw ValidationError(config.input_path + " line " + std::to_string(i + 1) +
                                      ": " + e.what());
            }
        }
        if (samples.empty()) throw ValidationError("no samples in " + config.input_path);

        AggregateReport report = aggregate(samples);
        out << report_to_csv(report);

        if (!config.output_dir.empty()) {
            std::filesystem::create_directories(config.output_dir);
            write_file(config.output_dir + "/report.json", pretty(report_to_json(report)));
            write_file(config.output_dir + "/report.csv", report_to_csv(report));
            write_file(config.output_dir + "/manifest.json",
                       pretty(make_manifest(config, "report",
                                            {digest_input(config.input_path, raw,
                                                          samples.size())},
                                            {"report.json", "report.csv"})));
        }
        return kExitSuccess;
    });
}

}  // namespace relyeval
