// Experiment runner for the multitask bandit simulator: executes seed batches
// of the implemented policies from a JSON config, summarizes trace files and
// validates configs without running them.

#include <glob.h>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mtb/experiment.hpp"

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw mtb::InvalidConfig("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> expand_glob(const std::string& pattern) {
    glob_t g{};
    std::vector<std::string> out;
    if (glob(pattern.c_str(), GLOB_TILDE, nullptr, &g) == 0) {
        for (std::size_t i = 0; i < g.gl_pathc; ++i) out.emplace_back(g.gl_pathv[i]);
    }
    globfree(&g);
    return out;
}

std::string default_out_dir() {
    const char* env = std::getenv("MTBANDIT_OUT_DIR");
    return env ? env : "";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multitask bandit experiment runner"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir_flag;
    std::string seeds_flag;
    int workers_flag = -1;
    int thin_flag = -1;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--out-dir", out_dir_flag, "output directory (overrides config and MTBANDIT_OUT_DIR)");
        cmd->add_option("--workers", workers_flag, "worker pool size (default: available cores)");
        cmd->add_option("--thin", thin_flag, "trace thinning interval (default: auto)");
        cmd->add_option("--seeds", seeds_flag, "comma-separated seed list override");
    };

    auto* run_cmd = app.add_subcommand("run", "run every (algorithm, seed) pair of a config");
    run_cmd->add_option("config", config_path, "experiment config (JSON)")->required();
    add_common(run_cmd);

    auto* validate_cmd = app.add_subcommand("validate", "check a config and print diagnostics");
    validate_cmd->add_option("config", config_path, "experiment config (JSON)")->required();

    std::string glob_pattern;
    auto* summarize_cmd = app.add_subcommand("summarize", "summarize trace files matching a glob");
    summarize_cmd->add_option("glob", glob_pattern, "trace file glob, e.g. 'out/*_seed*.csv'")
        ->required();
    add_common(summarize_cmd);

    CLI11_PARSE(app, argc, argv);

    try {
        if (summarize_cmd->parsed()) {
            std::string dir = !out_dir_flag.empty() ? out_dir_flag
                              : !default_out_dir().empty() ? default_out_dir()
                                                           : ".";
            return mtb::summarize_files(expand_glob(glob_pattern), dir + "/summary.json");
        }

        const std::string raw = slurp(config_path);
        mtb::ExperimentConfig cfg;
        try {
            cfg = mtb::parse_experiment_config(nlohmann::json::parse(raw));
        } catch (const nlohmann::json::parse_error& e) {
            std::cerr << config_path << ": " << e.what() << "\n";
            return 2;
        } catch (const mtb::InvalidConfig& e) {
            std::cerr << config_path << ": " << e.what() << "\n";
            return 2;
        }

        if (validate_cmd->parsed()) {
            auto issues = mtb::validate_config(cfg);
            for (const auto& m : issues) std::cout << m << "\n";
            if (issues.empty()) std::cout << "ok\n";
            return issues.empty() ? 0 : 2;
        }

        // precedence: flag > config > environment variable > built-in default
        if (!out_dir_flag.empty()) {
            cfg.output_dir = out_dir_flag;
        } else if (cfg.output_dir == "out" && !default_out_dir().empty()) {
            cfg.output_dir = default_out_dir();
        }
        if (workers_flag >= 0) cfg.workers = workers_flag;
        if (thin_flag >= 0) cfg.thin = thin_flag;
        if (!seeds_flag.empty()) {
            cfg.seeds.clear();
            std::istringstream ss(seeds_flag);
            std::string tok;
            while (std::getline(ss, tok, ',')) {
                if (!tok.empty()) cfg.seeds.push_back(std::stoull(tok));
            }
        }
        return mtb::run_experiment(cfg, mtb::fnv1a_hex(raw));
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
