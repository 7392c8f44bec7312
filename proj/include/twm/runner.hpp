#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "twm/report.hpp"
#include "twm/scenario.hpp"

namespace twm {

struct RunOptions {
    std::uint64_t seed = 0;    // resolved base seed (per-check overrides win)
    int jobs = 1;              // concurrent check dispatch bound
    bool strip_timing = false; // omit wall-time fields from the JSON report
};

/// Exit codes: 0 all checks concluded as expected, 1 some check missed its
/// expected polarity (or errored), 3 a search budget was exhausted. Config
/// errors surface as ConfigError before any check runs (exit 2 at the CLI).
struct RunResult {
    RunReport report;
    int exit_code = 0;
};

RunResult run_scenario(const Scenario& scenario, const RunOptions& options);

/// Whitelisted sweep parameters.
const std::vector<std::string>& sweep_params();

struct SweepOptions {
    std::string param;
    std::vector<double> grid;
    RunOptions run;
};

struct SweepResult {
    std::vector<RunResult> points;  // one per grid value, scenario names labelled
    std::string csv;                // combined fixed-column table
    int exit_code = 0;
};

SweepResult run_sweep(const Scenario& scenario, const SweepOptions& options);

}  // namespace twm
