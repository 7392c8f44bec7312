#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace twm {

/// One table row in the fixed CSV layout (scenario and check columns are
/// supplied by the writer). Info rows leave tolerance empty.
struct DetailRow {
    std::string quantity;
    double value = 0.0;
    bool has_tolerance = false;
    double tolerance = 0.0;
    std::string verdict = "info";
};

/// Result of one dispatched check.
struct CheckOutcome {
    std::string check;
    std::string verdict = "error";  // "pass" | "fail" | "error"
    std::string expected = "pass";
    bool ok = false;  // verdict == expected
    std::uint64_t seed = 0;
    bool has_timing = false;
    double wall_time_ms = 0.0;

    // Summary row: the single quantity the verdict was graded on.
    std::string quantity;
    double value = 0.0;
    double tolerance = 0.0;

    std::vector<std::pair<std::string, double>> quantities;   // extra numbers
    std::vector<std::pair<std::string, std::string>> attributes;  // extra strings
    std::vector<DetailRow> details;  // per-lambda / per-c / trace rows
    std::string error;               // message when verdict == "error"
    bool budget_exhausted = false;   // SearchBudgetExceeded anywhere
};

struct RunReport {
    std::string scenario;
    std::string version;
    std::string input_digest;
    std::uint64_t seed = 0;
    std::vector<CheckOutcome> checks;  // sorted by (check name, request order)
};

/// Structured report document. Timing fields are omitted when
/// `strip_timing` is set so byte-level comparison across runs is meaningful.
std::string report_to_json(const RunReport& report, bool strip_timing);

/// Fixed-column table: scenario,check,quantity,value,tolerance,verdict.
/// One summary row per check followed by its detail rows.
std::string report_to_csv(const RunReport& report);

/// Shortest decimal string that round-trips the double (used by the CSV
/// writer; JSON serialization applies the same rule internally).
std::string format_number(double v);

}  // namespace twm
