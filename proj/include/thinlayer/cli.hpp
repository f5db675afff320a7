#pragma once

// Configuration-driven runs: schema validation, RunConfig, and the commands
// cell, darcy, micro, converge, analyze and pipeline.

#include "thinlayer/io.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace thinlayer {

/// Messages for every violation of `schema` by `instance` (empty when valid).
/// Supports the keyword subset used by the published run configuration schema.
std::vector<std::string> validate_against_schema(const Json& instance, const Json& schema);

/// The run configuration schema compiled into the library.
const Json& run_config_schema();

struct RunConfig {
    Json source;  // the validated document
    CellGeometry cell;
    int L1 = 1;
    double alpha = 0.0, gamma = 0.0, mu = 1.0;
    MicroTraceMode trace_mode = MicroTraceMode::Robin;
    MacroData macro;
    CellProblemInputs cell_inputs;
    double h_cell = 1.0 / 32;
    std::vector<double> eps{0.25, 0.125, 0.0625};
    int sigma_elements = 64;
    std::vector<double> h_list{0.125, 0.0625, 0.03125};
    std::vector<double> restriction_eps{0.25, 0.125};
    int restriction_fields = 20;
    bool restriction_on_slabs = false;
    std::filesystem::path out_dir = "out";
    bool write_json = true, write_csv = true, write_vtk = true;
    std::vector<std::string> warnings;

    /// Throws ConfigInvalid with every schema violation listed.
    static RunConfig from_json(const Json& doc);
    static RunConfig load(const std::filesystem::path& path);
};

struct RunOptions {
    std::filesystem::path out_dir;  // overrides outputs.directory when set
    int jobs = 1;
    std::uint64_t seed = 1;
};

enum class Command { Cell, Darcy, Micro, Converge, Analyze, Pipeline };
Command parse_command(const std::string& name);
std::string_view to_string(Command c);

struct StageStatus {
    std::string name;
    std::string etag;
    bool cached = false;
};

/// Runs one command and writes its artifacts; returns the stages touched.
/// Solver failures propagate as Error.
std::vector<StageStatus> run(Command command, const RunConfig& config, const RunOptions& options);

/// 0 on success, 2 for ConfigInvalid, 1 for any other failure.
int exit_code_for(const std::exception& e);

}  // namespace thinlayer
