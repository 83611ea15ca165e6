// Config-driven experiment runner. run/sweep execute and write
// artifacts (JSON-lines records, CSV for sweeps, manifest); validate
// checks the schema only; list-ops prints the operation table.
// Exit codes: 0 ok, 2 schema/config error, 3 every record inconclusive.
#include "percolab/experiment.hpp"

#include "CLI11.hpp"

#include <iostream>
#include <string>

using namespace percolab;

namespace {

struct IoOptions {
    std::string config_path;
    std::string dir;
    std::string prefix;
};

void add_io(CLI::App* cmd, IoOptions& io) {
    cmd->add_option("config", io.config_path, "experiment config file")->required();
    cmd->add_option("--out", io.dir,
                    "output directory (default: [output] dir, then $PERCOLAB_OUT or '.')");
    cmd->add_option("--prefix", io.prefix,
                    "artifact file prefix (default: [output] prefix, then the config hash)");
}

// Flag < [output] section < built-in default.
std::string resolve(const std::string& flag, const ExperimentConfig& cfg, const std::string& key,
                    const std::string& fallback) {
    if (!flag.empty()) return flag;
    if (const auto* v = cfg.find("output", key)) return *v;
    return fallback;
}

int execute(const IoOptions& io, bool sweep) {
    const ExperimentConfig cfg = ExperimentConfig::load(io.config_path);
    const RunOutput out = sweep ? sweep_experiment(cfg) : run_experiment(cfg);
    const std::string dir = resolve(io.dir, cfg, "dir", default_output_dir());
    const std::string prefix = resolve(io.prefix, cfg, "prefix", cfg.hash());
    for (const std::string& path : write_outputs(cfg, out, dir, prefix))
        std::cout << path << "\n";
    if (out.exit_code == 3)
        std::cerr << "all " << out.records.size() << " record(s) inconclusive\n";
    return out.exit_code;
}

int check(const std::string& path) {
    const ExperimentConfig cfg = ExperimentConfig::load(path);
    const bool is_sweep = cfg.sections.count("sweep") != 0;
    if (is_sweep)
        validate_sweep(cfg);
    else
        validate_run(cfg);
    std::cout << "ok (" << (is_sweep ? "sweep" : "run") << ") hash=" << cfg.hash() << "\n";
    return 0;
}

int list_ops() {
    for (const OpInfo& op : experiment_ops()) {
        std::cout << op.name;
        if (!op.needs_process) std::cout << " [no process section]";
        if (!op.sweepable) std::cout << " [not sweepable]";
        std::cout << "\n    " << op.summary << "\n";
        const auto join = [](const std::vector<std::string>& v) {
            std::string s;
            for (const std::string& x : v) s += (s.empty() ? "" : ", ") + x;
            return s;
        };
        if (!op.required.empty()) std::cout << "    required: " << join(op.required) << "\n";
        if (!op.optional.empty()) std::cout << "    optional: " << join(op.optional) << "\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"invariant bond percolation experiments"};
    app.require_subcommand(1);

    IoOptions run_io;
    add_io(app.add_subcommand("run", "execute one operation and write artifacts"), run_io);
    IoOptions sweep_io;
    add_io(app.add_subcommand("sweep", "execute an operation across a parameter grid"), sweep_io);
    std::string validate_path;
    app.add_subcommand("validate", "check a config against the schema")
        ->add_option("config", validate_path, "experiment config file")
        ->required();
    app.add_subcommand("list-ops", "print the operation table");

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand("run")) return execute(run_io, false);
        if (app.got_subcommand("sweep")) return execute(sweep_io, true);
        if (app.got_subcommand("validate")) return check(validate_path);
        return list_ops();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
