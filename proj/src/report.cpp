#include "twm/report.hpp"

#include <charconv>
#include <cmath>

#include <json.hpp>

namespace twm {

namespace {

using Json = nlohmann::ordered_json;

/// Doubles become JSON numbers except non-finite values, which JSON cannot
/// carry; those are encoded as strings ("inf", "-inf", "nan").
Json json_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

Json outcome_to_json(const CheckOutcome& c, bool strip_timing) {
    Json j;
    j["check"] = c.check;
    j["verdict"] = c.verdict;
    j["expected"] = c.expected;
    j["ok"] = c.ok;
    j["seed"] = c.seed;
    j["quantity"] = c.quantity;
    j["value"] = json_number(c.value);
    j["tolerance"] = json_number(c.tolerance);
    if (c.has_timing && !strip_timing) j["wall_time_ms"] = json_number(c.wall_time_ms);
    if (!c.quantities.empty()) {
        Json q = Json::object();
        for (const auto& [name, value] : c.quantities) q[name] = json_number(value);
        j["quantities"] = std::move(q);
    }
    if (!c.attributes.empty()) {
        Json a = Json::object();
        for (const auto& [name, value] : c.attributes) a[name] = value;
        j["attributes"] = std::move(a);
    }
    if (!c.details.empty()) {
        Json rows = Json::array();
        for (const DetailRow& d : c.details) {
            Json row;
            row["quantity"] = d.quantity;
            row["value"] = json_number(d.value);
            if (d.has_tolerance) row["tolerance"] = json_number(d.tolerance);
            row["verdict"] = d.verdict;
            rows.push_back(std::move(row));
        }
        j["details"] = std::move(rows);
    }
    if (!c.error.empty()) j["error"] = c.error;
    if (c.budget_exhausted) j["budget_exhausted"] = true;
    return j;
}

}  // namespace

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, r.ptr);
}

std::string report_to_json(const RunReport& report, bool strip_timing) {
    Json j;
    j["artifact"] = "twm-lab";
    j["version"] = report.version;
    j["scenario"] = report.scenario;
    j["input_digest"] = report.input_digest;
    j["seed"] = report.seed;
    Json checks = Json::array();
    for (const CheckOutcome& c : report.checks) {
        checks.push_back(outcome_to_json(c, strip_timing));
    }
    j["checks"] = std::move(checks);
    return j.dump(2) + "\n";
}

std::string report_to_csv(const RunReport& report) {
    std::string out = "scenario,check,quantity,value,tolerance,verdict\n";
    const auto row = [&](const std::string& check, const std::string& quantity, double value,
                         bool has_tol, double tol, const std::string& verdict) {
        out += report.scenario;
        out += ',';
        out += check;
        out += ',';
        out += quantity;
        out += ',';
        out += format_number(value);
        out += ',';
        if (has_tol) out += format_number(tol);
        out += ',';
        out += verdict;
        out += '\n';
    };
    for (const CheckOutcome& c : report.checks) {
        row(c.check, c.quantity, c.value, true, c.tolerance, c.verdict);
        for (const DetailRow& d : c.details) {
            row(c.check, d.quantity, d.value, d.has_tolerance, d.tolerance, d.verdict);
        }
    }
    return out;
}

}  // namespace twm
