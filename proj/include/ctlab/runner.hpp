#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include "ctlab/config.hpp"

namespace ctlab {

struct RunOptions {
    std::filesystem::path out;  // empty: use the config's "output"
    std::optional<std::uint64_t> seed;
    std::ostream* log = nullptr;  // progress lines when set
};

struct RunResult {
    std::filesystem::path dir;
    std::vector<std::filesystem::path> files;  // data files, manifest excluded
};

/// Runs `kind` on the config (build and spectrum accept any config; other
/// kinds must match the config's experiment) and writes CSVs plus a manifest.
RunResult run_experiment(const ExperimentConfig& cfg, ExperimentKind kind, const RunOptions& opt);

/// Process exit code for an exception: 2 validation, 3 infeasible, 4 numerical, 1 otherwise.
int exit_code_for(const std::exception& e);

}  // namespace ctlab
