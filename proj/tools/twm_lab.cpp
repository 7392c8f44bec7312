// twm-lab: loads scenario files, dispatches verification checks, and emits
// machine-readable reports (JSON) plus fixed-column CSV tables.
//
// Exit codes: 0 all checks concluded as expected; 1 some check missed its
// expected polarity or errored; 2 configuration error (diagnostic on stderr
// names the offending key path); 3 a search budget was exhausted.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "twm/fexpr.hpp"
#include "twm/report.hpp"
#include "twm/runner.hpp"
#include "twm/scenario.hpp"
#include "twm/version.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailure = 1;
constexpr int kExitConfig = 2;

/// --seed beats the scenario file, which beats TWM_LAB_SEED, which beats 0.
std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag, const twm::Scenario& scn) {
    if (flag) return *flag;
    if (scn.seed_from_file) return scn.seed;
    if (const char* env = std::getenv("TWM_LAB_SEED")) {
        try {
            return std::stoull(env);
        } catch (const std::exception&) {
            throw twm::ConfigError("TWM_LAB_SEED", "not a nonnegative integer: '" +
                                                       std::string(env) + "'");
        }
    }
    return 0;
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw twm::ConfigError(path.string(), "cannot open output file for writing");
    out << contents;
    if (!out) throw twm::ConfigError(path.string(), "write failed");
}

void print_summary(const twm::RunReport& report) {
    for (const twm::CheckOutcome& c : report.checks) {
        std::cout << report.scenario << ": " << c.check << ": " << c.verdict << " (expected "
                  << c.expected << ")";
        if (!c.error.empty()) std::cout << " — " << c.error;
        std::cout << "\n";
    }
}

int cmd_run(const std::string& scenario_path, const std::string& out_dir,
            const std::optional<std::uint64_t>& seed_flag, int jobs, bool strip_timing) {
    const twm::Scenario scenario = twm::load_scenario(scenario_path);

    twm::RunOptions options;
    options.seed = resolve_seed(seed_flag, scenario);
    options.jobs = jobs;
    options.strip_timing = strip_timing;

    const twm::RunResult result = twm::run_scenario(scenario, options);

    const std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);
    write_file(dir / (scenario.name + "-report.json"),
               twm::report_to_json(result.report, strip_timing));
    write_file(dir / (scenario.name + "-checks.csv"), twm::report_to_csv(result.report));

    print_summary(result.report);
    return result.exit_code;
}

int cmd_sweep(const std::string& scenario_path, const std::string& param,
              const std::vector<double>& grid, const std::string& out_dir,
              const std::optional<std::uint64_t>& seed_flag, int jobs, bool strip_timing) {
    const twm::Scenario scenario = twm::load_scenario(scenario_path);

    twm::SweepOptions options;
    options.param = param;
    options.grid = grid;
    options.run.seed = resolve_seed(seed_flag, scenario);
    options.run.jobs = jobs;
    options.run.strip_timing = strip_timing;

    const twm::SweepResult result = twm::run_sweep(scenario, options);

    const std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);
    write_file(dir / (scenario.name + "-sweep-" + param + ".csv"), result.csv);

    std::string reports = "[\n";
    for (std::size_t i = 0; i < result.points.size(); ++i) {
        std::string one = twm::report_to_json(result.points[i].report, strip_timing);
        while (!one.empty() && one.back() == '\n') one.pop_back();
        reports += one;
        reports += (i + 1 < result.points.size()) ? ",\n" : "\n";
    }
    reports += "]\n";
    write_file(dir / (scenario.name + "-sweep-" + param + "-reports.json"), reports);

    for (const twm::RunResult& point : result.points) print_summary(point.report);
    return result.exit_code;
}

int cmd_parse_check(const std::string& expression) {
    try {
        const twm::fexpr::ExprPtr tree = twm::fexpr::parse(expression);
        std::cout << twm::fexpr::pretty_print(*tree) << "\n";
        return kExitOk;
    } catch (const twm::Error& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kExitConfig;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"twm-lab: verification laboratory for target weight mechanisms"};
    app.set_version_flag("--version", twm::kVersion);
    app.require_subcommand(1);

    std::string scenario_path;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed_flag;
    int jobs = 1;
    bool strip_timing = false;

    CLI::App* run = app.add_subcommand("run", "Run a scenario's checks and write reports");
    run->add_option("scenario", scenario_path, "Scenario file (JSON)")->required();
    run->add_option("--out", out_dir, "Output directory for report files");
    run->add_option("--seed", seed_flag, "Base seed (beats scenario seed and TWM_LAB_SEED)");
    run->add_option("--jobs", jobs, "Concurrent check dispatch bound")
        ->check(CLI::PositiveNumber);
    run->add_flag("--strip-timing", strip_timing, "Omit wall-time fields from the JSON report");

    std::string param;
    std::vector<double> grid;
    CLI::App* sweep = app.add_subcommand("sweep", "Run a scenario across a parameter grid");
    sweep->add_option("scenario", scenario_path, "Scenario file (JSON)")->required();
    sweep->add_option("--param", param, "Parameter to sweep (fee_rate, price_scale, stiffness_scale, shrink_c)")
        ->required();
    sweep->add_option("--grid", grid, "Comma-separated grid values")
        ->required()
        ->delimiter(',');
    sweep->add_option("--out", out_dir, "Output directory for report files");
    sweep->add_option("--seed", seed_flag, "Base seed (beats scenario seed and TWM_LAB_SEED)");
    sweep->add_option("--jobs", jobs, "Concurrent check dispatch bound")
        ->check(CLI::PositiveNumber);
    sweep->add_flag("--strip-timing", strip_timing, "Omit wall-time fields from the JSON report");

    std::string expression;
    CLI::App* parse = app.add_subcommand("parse-check", "Validate a discount expression");
    parse->add_option("expression", expression, "Expression source text")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (run->parsed()) {
            return cmd_run(scenario_path, out_dir, seed_flag, jobs, strip_timing);
        }
        if (sweep->parsed()) {
            return cmd_sweep(scenario_path, param, grid, out_dir, seed_flag, jobs, strip_timing);
        }
        return cmd_parse_check(expression);
    } catch (const twm::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const twm::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitCheckFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitCheckFailure;
    }
}
