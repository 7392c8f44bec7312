#include "twm/runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <thread>

#include "twm/conditions.hpp"
#include "twm/solver.hpp"
#include "twm/theorems.hpp"
#include "twm/version.hpp"

namespace twm {

namespace {

// Default sample counts per check, chosen so a full scenario stays well
// under a second at desk scale while matching the certification scale of
// the acceptance suite (100 states, 20 segments).
constexpr int kC1Samples = 400;
constexpr int kC2Samples = 400;
constexpr int kEulerSamples = 200;
constexpr int kInnerSamples = 200;
constexpr int kConsistencySamples = 100;
constexpr int kTheoremSegments = 20;

const std::vector<double>& default_lambdas() {
    static const std::vector<double> v{0.5, 2.0, 10.0, 100.0};
    return v;
}

const std::vector<double>& default_c_grid() {
    static const std::vector<double> v{0.01, 0.1, 0.5, 0.9, 0.99};
    return v;
}

std::string reading_name(C1Reading r) {
    return r == C1Reading::Strong ? "strong" : "weak";
}

/// Per-check tolerance resolution: request override, then scenario-level
/// override, then the library default.
double resolve_tolerance(const Scenario& scn, const CheckRequest& req, double fallback) {
    if (req.tolerance) return *req.tolerance;
    const auto it = scn.tolerances.find(req.name);
    if (it != scn.tolerances.end()) return it->second;
    return fallback;
}

void run_c1(const Scenario& scn, const CheckRequest& req, std::uint64_t seed, CheckOutcome& out) {
    const auto f = build_discount(scn.discount, scn.pool.size());
    SamplerConfig cfg{req.samples.value_or(kC1Samples), seed, scn.pool.size()};
    C1Report r = check_c1(*f, cfg);
    r.tolerance = resolve_tolerance(scn, req, r.tolerance);
    r.pass = r.max_abs_residual <= r.tolerance;

    out.verdict = r.pass ? "pass" : "fail";
    out.quantity = "max_abs_residual";
    out.value = r.max_abs_residual;
    out.tolerance = r.tolerance;
    out.quantities.emplace_back("samples_used", r.samples_used);
    out.attributes.emplace_back("reading", reading_name(r.reading));
}

void run_c2(const Scenario& scn, const CheckRequest& req, std::uint64_t seed, CheckOutcome& out) {
    const auto f = build_discount(scn.discount, scn.pool.size());
    SamplerConfig cfg{req.samples.value_or(kC2Samples), seed, scn.pool.size()};
    C2Report r = check_c2_concavity(*f, scn.pool, scn.weights(), cfg);
    r.tolerance = resolve_tolerance(scn, req, r.tolerance);
    r.pass = r.worst_violation <= r.tolerance;

    out.verdict = r.pass ? "pass" : "fail";
    out.quantity = "worst_violation";
    out.value = r.worst_violation;
    out.tolerance = r.tolerance;
    out.quantities.emplace_back("samples_used", r.samples_used);
}

void run_c3(const Scenario& scn, const CheckRequest& req, std::uint64_t seed, CheckOutcome& out) {
    const auto f = build_discount(scn.discount, scn.pool.size());
    SolverConfig solver;
    solver.seed = seed;
    C3Report r = check_c3_target(*f, scn.pool, scn.weights(), solver);
    r.tolerance = resolve_tolerance(scn, req, r.tolerance);
    r.pass = r.solve.converged && r.solve.unique && r.weight_error <= r.tolerance;

    out.verdict = r.pass ? "pass" : "fail";
    out.quantity = "weight_error";
    out.value = r.weight_error;
    out.tolerance = r.tolerance;
    out.quantities.emplace_back("objective", r.solve.objective);
    out.quantities.emplace_back("stationarity_residual", r.solve.stationarity_residual);
    out.quantities.emplace_back("iterations", r.solve.iterations);
    out.quantities.emplace_back("converged", r.solve.converged ? 1.0 : 0.0);
    out.quantities.emplace_back("unique", r.solve.unique ? 1.0 : 0.0);
}

void run_euler(const Scenario& scn, const CheckRequest& req, std::uint64_t seed,
               CheckOutcome& out) {
    const auto f = build_discount(scn.discount, scn.pool.size());
    SamplerConfig cfg{req.samples.value_or(kEulerSamples), seed, scn.pool.size()};
    EulerReport r = check_euler(*f, cfg);
    r.tolerance = resolve_tolerance(scn, req, r.tolerance);
    r.pass = r.max_scaled_residual <= r.tolerance;

    const Vec zero(scn.pool.size(), 0.0);
    const WeightVector w = scn.weights();
    const double point = euler_residual(*f, make_context(scn.pool, w, zero));

    out.verdict = r.pass ? "pass" : "fail";
    out.quantity = "max_scaled_residual";
    out.value = r.max_scaled_residual;
    out.tolerance = r.tolerance;
    out.quantities.emplace_back("point_residual", point);
    out.quantities.emplace_back("samples_used", r.samples_used);
}

void run_numeraire(const Scenario& scn, const CheckRequest& req, std::uint64_t /*seed*/,
                   CheckOutcome& out) {
    const auto f = build_discount(scn.discount, scn.pool.size());
    const std::vector<double>& lambdas = req.lambdas ? *req.lambdas : default_lambdas();
    NumeraireReport r = check_numeraire(*f, scn.pool, scn.weights(), {}, lambdas);
    r.tolerance = resolve_tolerance(scn, req, r.tolerance);
    r.pass = r.max_rel_error <= r.tolerance;

    out.verdict = r.pass ? "pass" : "fail";
    out.quantity = "max_rel_error";
    out.value = r.max_rel_error;
    out.tolerance = r.tolerance;
    for (const NumeraireRow& row : r.rows) {
        DetailRow d;
        d.quantity = "rel_error[lambda=" + format_number(row.lambda) + "]";
        d.value = row.rel_error;
        d.has_tolerance = true;
        d.tolerance = r.tolerance;
        d.verdict = row.rel_error <= r.tolerance ? "pass" : "fail";
        out.details.push_back(std::move(d));
    }
}

void run_inner_product(const Scenario& scn, const CheckRequest& req, std::uint64_t seed,
                       CheckOutcome& out) {
    const auto f = build_discount(scn.discount, scn.pool.size());
    SamplerConfig cfg{req.samples.value_or(kInnerSamples), seed, scn.pool.size()};
    InnerProductReport r = check_inner_product(*f, cfg);
    r.tolerance = resolve_tolerance(scn, req, r.tolerance);
    r.pass = r.max_scaled_residual <= r.tolerance;

    const double point = inner_product_residual(*f, scn.pool, scn.weights(), {});

    out.verdict = r.pass ? "pass" : "fail";
    out.quantity = "max_scaled_residual";
    out.value = r.max_scaled_residual;
    out.tolerance = r.tolerance;
    out.quantities.emplace_back("point_residual", point);
    out.quantities.emplace_back("samples_used", r.samples_used);
}

void run_gradient_consistency(const Scenario& scn, const CheckRequest& req, std::uint64_t seed,
                              CheckOutcome& out) {
    const auto f = build_discount(scn.discount, scn.pool.size());
    SamplerConfig cfg{req.samples.value_or(kConsistencySamples), seed, scn.pool.size()};
    GradientConsistencyReport r = check_gradient_consistency(*f, cfg);
    r.tolerance = resolve_tolerance(scn, req, r.tolerance);
    r.pass = r.max_rel_error <= r.tolerance;

    out.verdict = r.pass ? "pass" : "fail";
    out.quantity = "max_rel_error";
    out.value = r.max_rel_error;
    out.tolerance = r.tolerance;
    out.quantities.emplace_back("samples_used", r.samples_used);
    out.quantities.emplace_back("skipped_kinks", r.skipped_kinks);
}

void run_gradient_theorem(const Scenario& scn, const CheckRequest& req, std::uint64_t seed,
                          CheckOutcome& out) {
    const auto f = build_discount(scn.discount, scn.pool.size());
    SamplerConfig cfg{req.samples.value_or(kTheoremSegments), seed, scn.pool.size()};
    GradientTheoremReport r =
        check_gradient_theorem(*f, cfg, req.quadrature_points.value_or(2048));
    r.tolerance = resolve_tolerance(scn, req, r.tolerance);
    r.pass = r.max_scaled_error <= r.tolerance &&
             r.max_bound_disagreement <= r.bound_tolerance;

    out.verdict = r.pass ? "pass" : "fail";
    out.quantity = "max_scaled_error";
    out.value = r.max_scaled_error;
    out.tolerance = r.tolerance;
    out.quantities.emplace_back("segments_used", r.segments_used);
    DetailRow d;
    d.quantity = "max_bound_disagreement";
    d.value = r.max_bound_disagreement;
    d.has_tolerance = true;
    d.tolerance = r.bound_tolerance;
    d.verdict = r.max_bound_disagreement <= r.bound_tolerance ? "pass" : "fail";
    out.details.push_back(std::move(d));
}

void run_domination_witness(const Scenario& scn, const CheckRequest& req, std::uint64_t /*seed*/,
                            CheckOutcome& out) {
    const auto f = build_discount(scn.discount, scn.pool.size());
    SegmentContext ctx;
    ctx.target_weights = scn.target_weights;
    ctx.reserves = scn.pool.reserves;
    ctx.fee_rate = scn.pool.fee_rate;

    WitnessSearchConfig cfg;
    cfg.margin_threshold = resolve_tolerance(scn, req, cfg.margin_threshold);
    const DominationSearchResult r =
        find_gradient_domination_witness(*f, ctx, scn.pool.prices, cfg);

    // The finder only returns finite-difference-verified witnesses, so
    // reaching this line is the pass.
    out.verdict = "pass";
    out.quantity = "witness_margin";
    out.value = r.witness.margin;
    out.tolerance = cfg.margin_threshold;
    out.quantities.emplace_back("verified_margin", r.witness.verified_margin);
    out.quantities.emplace_back("verification_residual", r.witness.verification_residual);
    out.quantities.emplace_back("component", static_cast<double>(r.witness.component + 1));
    out.quantities.emplace_back("premise_value", r.premise_value);
    out.quantities.emplace_back("grid_points", r.grid_points);
    out.quantities.emplace_back("doublings", static_cast<double>(r.trace.size()));

    for (const GrowthRow& row : r.trace) {
        DetailRow d;
        d.quantity = "bound_growth[k=" + std::to_string(row.doublings) + "]";
        d.value = row.bound_growth;
        out.details.push_back(std::move(d));
    }
    if (!r.trace.empty()) {
        DetailRow d;
        d.quantity = "budget";
        d.value = r.trace.back().budget;
        out.details.push_back(std::move(d));
    }
    for (std::size_t i = 0; i < r.witness.point.size(); ++i) {
        DetailRow d;
        d.quantity = "witness_p[" + std::to_string(i + 1) + "]";
        d.value = r.witness.point[i];
        out.details.push_back(std::move(d));
    }
}

void run_uniform_shrinkage(const Scenario& scn, const CheckRequest& req, std::uint64_t seed,
                           CheckOutcome& out) {
    const auto f = build_discount(scn.discount, scn.pool.size());
    const std::vector<double>& grid = req.c_grid ? *req.c_grid : default_c_grid();
    SamplerConfig cfg{0, seed, scn.pool.size()};
    const ShrinkageReport r = falsify_uniform_shrinkage(*f, scn.weights(), grid, cfg);

    const double tol = resolve_tolerance(scn, req, 1e-10);
    double min_margin = std::numeric_limits<double>::infinity();
    double max_residual = 0.0;
    double max_euler = 0.0;
    bool all_broken = !r.rows.empty();
    for (std::size_t i = 0; i < r.rows.size(); ++i) {
        min_margin = std::min(min_margin, r.rows[i].component_margin);
        max_euler = std::max(max_euler, r.rows[i].euler_residual);
        max_residual = std::max(max_residual, r.witnesses[i].verification_residual);
        if (!(r.rows[i].component_margin > tol && r.witnesses[i].verified_margin > tol)) {
            all_broken = false;
        }
    }

    out.verdict = all_broken ? "pass" : "fail";
    out.quantity = "min_component_margin";
    out.value = min_margin;
    out.tolerance = tol;
    out.quantities.emplace_back("zero_state_tries", r.zero_state_tries);
    out.quantities.emplace_back("max_verification_residual", max_residual);
    out.quantities.emplace_back("max_euler_residual", max_euler);
    for (const ShrinkageRow& row : r.rows) {
        const std::string c = format_number(row.c);
        DetailRow margin;
        margin.quantity = "component_margin[c=" + c + "]";
        margin.value = row.component_margin;
        margin.has_tolerance = true;
        margin.tolerance = tol;
        margin.verdict = row.component_margin > tol ? "pass" : "fail";
        out.details.push_back(std::move(margin));

        DetailRow agg;
        agg.quantity = "aggregate_new[c=" + c + "]";
        agg.value = row.aggregate_new;
        out.details.push_back(std::move(agg));

        DetailRow bound;
        bound.quantity = "aggregate_bound[c=" + c + "]";
        bound.value = row.aggregate_bound;
        out.details.push_back(std::move(bound));
    }
}

CheckOutcome run_one(const Scenario& scn, const CheckRequest& req, std::uint64_t base_seed) {
    CheckOutcome out;
    out.check = req.name;
    out.expected = req.expect;
    out.seed = req.seed.value_or(base_seed);

    const auto t0 = std::chrono::steady_clock::now();
    try {
        if (req.name == "c1") {
            run_c1(scn, req, out.seed, out);
        } else if (req.name == "c2") {
            run_c2(scn, req, out.seed, out);
        } else if (req.name == "c3") {
            run_c3(scn, req, out.seed, out);
        } else if (req.name == "euler") {
            run_euler(scn, req, out.seed, out);
        } else if (req.name == "numeraire") {
            run_numeraire(scn, req, out.seed, out);
        } else if (req.name == "inner-product") {
            run_inner_product(scn, req, out.seed, out);
        } else if (req.name == "gradient-consistency") {
            run_gradient_consistency(scn, req, out.seed, out);
        } else if (req.name == "gradient-theorem") {
            run_gradient_theorem(scn, req, out.seed, out);
        } else if (req.name == "gradient-domination-witness") {
            run_domination_witness(scn, req, out.seed, out);
        } else if (req.name == "uniform-shrinkage") {
            run_uniform_shrinkage(scn, req, out.seed, out);
        } else {
            out.verdict = "error";
            out.error = "unknown check '" + req.name + "'";
        }
    } catch (const SearchBudgetExceeded& e) {
        out.verdict = "error";
        out.error = e.what();
        out.budget_exhausted = true;
    } catch (const Error& e) {
        out.verdict = "error";
        out.error = e.what();
    }
    const auto t1 = std::chrono::steady_clock::now();
    out.wall_time_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    out.has_timing = true;
    out.ok = out.verdict == out.expected;
    return out;
}

}  // namespace

RunResult run_scenario(const Scenario& scenario, const RunOptions& options) {
    RunResult result;
    result.report.scenario = scenario.name;
    result.report.version = kVersion;
    result.report.input_digest = scenario.source_digest;
    result.report.seed = options.seed;

    const int n = static_cast<int>(scenario.checks.size());
    std::vector<CheckOutcome> slots(static_cast<std::size_t>(n));
    const int jobs = std::clamp(options.jobs, 1, std::max(1, n));
    if (jobs <= 1) {
        for (int i = 0; i < n; ++i) {
            slots[static_cast<std::size_t>(i)] = run_one(scenario, scenario.checks[i], options.seed);
        }
    } else {
        std::atomic<int> next{0};
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(jobs));
        for (int j = 0; j < jobs; ++j) {
            pool.emplace_back([&] {
                for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
                    slots[static_cast<std::size_t>(i)] =
                        run_one(scenario, scenario.checks[i], options.seed);
                }
            });
        }
        for (std::thread& t : pool) t.join();
    }

    // Stable key: check name, ties kept in request order, so reports are
    // byte-identical whatever the dispatch interleaving was.
    std::stable_sort(slots.begin(), slots.end(),
                     [](const CheckOutcome& a, const CheckOutcome& b) { return a.check < b.check; });
    result.report.checks = std::move(slots);

    bool budget = false;
    bool mismatch = false;
    for (const CheckOutcome& c : result.report.checks) {
        budget = budget || c.budget_exhausted;
        mismatch = mismatch || !c.ok;
    }
    result.exit_code = budget ? 3 : (mismatch ? 1 : 0);
    return result;
}

const std::vector<std::string>& sweep_params() {
    static const std::vector<std::string> params{"fee_rate", "price_scale", "stiffness_scale",
                                                 "shrink_c"};
    return params;
}

SweepResult run_sweep(const Scenario& scenario, const SweepOptions& options) {
    const auto& allowed = sweep_params();
    if (std::find(allowed.begin(), allowed.end(), options.param) == allowed.end()) {
        std::string names;
        for (const std::string& p : allowed) names += (names.empty() ? "" : ", ") + p;
        throw ConfigError("sweep.param", "unknown parameter '" + options.param +
                                             "' (whitelist: " + names + ")");
    }
    if (options.grid.empty()) throw ConfigError("sweep.grid", "must be nonempty");

    if (options.param == "stiffness_scale" && scenario.discount.kind != "canonical-quadratic") {
        throw ConfigError("sweep.param", "stiffness_scale requires a canonical-quadratic discount");
    }
    if (options.param == "shrink_c") {
        const bool has = std::any_of(scenario.checks.begin(), scenario.checks.end(),
                                     [](const CheckRequest& c) {
                                         return c.name == "uniform-shrinkage";
                                     });
        if (!has) {
            throw ConfigError("sweep.param", "shrink_c requires a uniform-shrinkage check");
        }
    }

    SweepResult result;
    std::string csv = "scenario,check,quantity,value,tolerance,verdict\n";
    for (double v : options.grid) {
        Scenario point = scenario;
        if (options.param == "fee_rate") {
            if (!(v > 0.0 && v < 1.0)) {
                throw ConfigError("sweep.grid", "fee_rate values must lie inside (0, 1)");
            }
            point.pool.fee_rate = v;
        } else if (options.param == "price_scale") {
            if (!(v > 0.0)) throw ConfigError("sweep.grid", "price_scale values must be > 0");
            for (double& p : point.pool.prices) p *= v;
        } else if (options.param == "stiffness_scale") {
            if (!(v > 0.0)) throw ConfigError("sweep.grid", "stiffness_scale values must be > 0");
            point.discount.stiffness_scale = v;
        } else {  // shrink_c
            if (!(v > 0.0 && v < 1.0)) {
                throw ConfigError("sweep.grid", "shrink_c values must lie inside (0, 1)");
            }
            for (CheckRequest& c : point.checks) {
                if (c.name == "uniform-shrinkage") c.c_grid = std::vector<double>{v};
            }
        }
        point.name = scenario.name + "[" + options.param + "=" + format_number(v) + "]";
        result.points.push_back(run_scenario(point, options.run));

        const std::string body = report_to_csv(result.points.back().report);
        const std::size_t nl = body.find('\n');
        csv += body.substr(nl + 1);
    }
    result.csv = std::move(csv);

    for (const RunResult& p : result.points) {
        if (p.exit_code == 3) result.exit_code = 3;
        if (p.exit_code == 1 && result.exit_code == 0) result.exit_code = 1;
    }
    return result;
}

}  // namespace twm
