#pragma once

#include "percolab/graph.hpp"

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace percolab {

inline constexpr const char* kVersion = "1.0";

// Schema violation carrying the offending field path ("process.p",
// "sweep.values", ...). The CLI maps it to exit code 2.
struct ValidationError : std::invalid_argument {
    ValidationError(std::string field_path, const std::string& message)
        : std::invalid_argument(field_path + ": " + message), field(std::move(field_path)) {}
    std::string field;
};

// Flat key = value configuration with [section] headers, '#'/';'
// comments, duplicate keys rejected. The canonical serialization sorts
// sections and keys, so the hash ignores layout and comments.
struct ExperimentConfig {
    std::map<std::string, std::map<std::string, std::string>> sections;

    const std::string* find(const std::string& section, const std::string& key) const;
    static ExperimentConfig parse_text(const std::string& text);
    static ExperimentConfig load(const std::string& path);
    std::string canonical() const;
    std::string hash() const; // fnv1a of the canonical form, 16 hex digits
};

struct OpInfo {
    std::string name;
    std::vector<std::string> required; // beyond [graph]/[process]/[run]
    std::vector<std::string> optional;
    bool needs_process = true;
    bool sweepable = true;
    std::string summary;
};
const std::vector<OpInfo>& experiment_ops();

// Result of executing a validated config: one JSON record per grid
// point (a plain run is a single point), already in canonical order.
// Records never carry timestamps; those live in the manifest alone.
struct RunOutput {
    std::vector<std::string> records; // JSON lines
    std::string csv;                  // sweeps only
    std::uint64_t inconclusive = 0;   // records whose payload is inconclusive
    std::uint64_t wall_ms = 0;
    int exit_code = 0; // 0, or 3 when every record came back inconclusive
};

// Schema checks; throw ValidationError naming the field.
void validate_run(const ExperimentConfig& config);
void validate_sweep(const ExperimentConfig& config);

RunOutput run_experiment(const ExperimentConfig& config);
RunOutput sweep_experiment(const ExperimentConfig& config);

// $PERCOLAB_OUT when set, "." otherwise.
std::string default_output_dir();

// Writes <prefix>.jsonl, <prefix>.csv (sweeps), <prefix>.manifest.json
// under dir; returns the paths written. The manifest echoes the
// canonical config, its hash, version, wall time, and the only
// timestamp in the artifact set.
std::vector<std::string> write_outputs(const ExperimentConfig& config, const RunOutput& output,
                                       const std::string& dir, const std::string& prefix);

} // namespace percolab
