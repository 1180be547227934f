#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "relyeval/pipeline.hpp"

using namespace relyeval;

namespace {

// The config file must be applied before CLI11 assigns flag values, so that
// explicit flags always win. CLI11 only writes bound variables for options
// that actually appear, which gives the override for free.
std::string find_config_arg(int argc, char** argv) {
    for (int i = 1; i < argc; ++i) {
        std::string arg = argv[i];
        if (arg == "--config" && i + 1 < argc) return argv[i + 1];
        if (arg.rfind("--config=", 0) == 0) return arg.substr(9);
    }
    return "";
}

}  // namespace

int main(int argc, char** argv) {
    RunConfig config;
    std::string config_path = find_config_arg(argc, argv);
    if (!config_path.empty()) {
        try {
            apply_config_file(config, config_path);
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << '\n';
            return kExitValidation;
        }
    }

    CLI::App app{"hallucination evaluation and data synthesis for tool-using agents"};
    app.set_version_flag("--version", std::string(kToolVersion));
    app.require_subcommand(1);

    std::string penalty_basis = std::string(penalty_basis_name(config.penalty_basis));
    std::string config_path_sink;  // already applied; bound so CLI11 accepts the flag

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path_sink, "JSON config file (flags override it)");
        cmd->add_option("--input,-i", config.input_path, "input file");
        cmd->add_option("--output,-o", config.output_dir, "output directory");
    };
    auto add_judge = [&](CLI::App* cmd) {
        cmd->add_option("--judge", config.judge.backend, "judge backend")
            ->check(CLI::IsMember({"mock", "remote"}));
        cmd->add_option("--base-url", config.judge.base_url,
                        "remote endpoint, e.g. http://host:8080/v1");
        cmd->add_option("--model", config.judge.model, "remote model name");
        cmd->add_option("--mock-script", config.judge.mock_script,
                        "scripted verdicts for the mock judge");
        cmd->add_option("--retries", config.judge.retries, "extra attempts after a failed call");
        cmd->add_option("--concurrency-cap", config.judge.concurrency_cap,
                        "max in-flight judge requests");
    };

    CLI::App* eval = app.add_subcommand("eval", "classify trajectories and compute metrics");
    add_common(eval);
    add_judge(eval);
    eval->add_flag("--strict-unsure", config.strict_unsure,
                   "treat Unsure judge verdicts as hallucination evidence");
    eval->add_option("--penalty-basis", penalty_basis,
                     "which hallucination notion triggers the utility penalty")
        ->check(CLI::IsMember({"tool_level", "task_level"}));
    eval->add_option("--workers", config.workers, "worker threads");
    eval->add_option("--seed", config.seed, "run seed (recorded in the manifest)");

    CLI::App* perturb = app.add_subcommand("perturb", "synthesize unsolvable task subsets");
    add_common(perturb);
    add_judge(perturb);
    perturb->add_option("--subset", config.subset, "mp (hide parameters) or ut (swap toolsets)")
        ->check(CLI::IsMember({"mp", "ut"}));
    perturb->add_option("--seed", config.seed, "seed for donor selection");
    perturb->add_option("--donor-pool", config.donor_pool_path,
                        "toolset file for ut replacements");
    perturb->add_option("--workers", config.workers, "worker threads");

    CLI::App* synth_sft = app.add_subcommand("synth-sft",
                                             "turn perturbed tasks into SFT records");
    add_common(synth_sft);
    synth_sft->add_flag("--single-tool-only", config.single_tool_only,
                        "keep only tasks whose toolset has exactly one tool");

    CLI::App* synth_dpo = app.add_subcommand("synth-dpo",
                                             "turn step samples into preference pairs");
    add_common(synth_dpo);
    add_judge(synth_dpo);
    synth_dpo->add_flag("--strict-unsure", config.strict_unsure,
                        "treat Unsure judge verdicts as hallucination evidence");
    synth_dpo->add_option("--seed", config.seed, "seed for representative selection");
    synth_dpo->add_option("--workers", config.workers, "worker threads");

    CLI::App* report = app.add_subcommand("report", "re-aggregate a detail file");
    add_common(report);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        app.exit(e);
        return kExitSuccess;
    } catch (const CLI::CallForAllHelp& e) {
        app.exit(e);
        return kExitSuccess;
    } catch (const CLI::CallForVersion& e) {
        app.exit(e);
        return kExitSuccess;
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    auto basis = penalty_basis_from_name(penalty_basis);
    if (!basis) {
        std::cerr << "error: unknown penalty basis '" << penalty_basis << "'\n";
        return kExitUsage;
    }
    config.penalty_basis = *basis;

    if (app.got_subcommand(eval)) return cmd_eval(config, std::cout, std::cerr);
    if (app.got_subcommand(perturb)) return cmd_perturb(config, std::cout, std::cerr);
    if (app.got_subcommand(synth_sft)) return cmd_synth_sft(config, std::cout, std::cerr);
    if (app.got_subcommand(synth_dpo)) return cmd_synth_dpo(config, std::cout, std::cerr);
    if (app.got_subcommand(report)) return cmd_report(config, std::cout, std::cerr);
    return kExitUsage;
}
