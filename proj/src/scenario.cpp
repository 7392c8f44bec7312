#include "twm/scenario.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "twm/fexpr.hpp"

namespace twm {

namespace {

using Json = nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw ConfigError(path, what);
}

void expect_object(const Json& j, const std::string& path) {
    if (!j.is_object()) fail(path, "expected an object");
}

/// Strict schema: every present key must be in `allowed`. "$" names the
/// document root; keys under it are reported bare, matching the paths the
/// field parsers use ("name", "pool.fee_rate", ...).
void reject_unknown_keys(const Json& obj, const std::vector<std::string>& allowed,
                         const std::string& path) {
    for (const auto& item : obj.items()) {
        if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end()) {
            fail(path == "$" ? item.key() : path + "." + item.key(), "unknown key");
        }
    }
}

double get_number(const Json& j, const std::string& path) {
    if (!j.is_number()) fail(path, "expected a number");
    return j.get<double>();
}

std::string get_string(const Json& j, const std::string& path) {
    if (!j.is_string()) fail(path, "expected a string");
    return j.get<std::string>();
}

std::uint64_t get_seed(const Json& j, const std::string& path) {
    if (j.is_number_unsigned()) return j.get<std::uint64_t>();
    if (j.is_number_integer() && j.get<std::int64_t>() >= 0) {
        return static_cast<std::uint64_t>(j.get<std::int64_t>());
    }
    fail(path, "expected a nonnegative integer");
}

int get_count(const Json& j, const std::string& path, int min_value) {
    if (!j.is_number_integer()) fail(path, "expected an integer");
    const std::int64_t v = j.get<std::int64_t>();
    if (v < min_value) fail(path, "must be >= " + std::to_string(min_value));
    return static_cast<int>(v);
}

Vec get_vector(const Json& j, const std::string& path) {
    if (!j.is_array()) fail(path, "expected an array of numbers");
    Vec out;
    out.reserve(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) {
        out.push_back(get_number(j[i], path + "[" + std::to_string(i) + "]"));
    }
    return out;
}

PoolState parse_pool(const Json& j) {
    expect_object(j, "pool");
    reject_unknown_keys(j, {"prices", "reserves", "lent", "fee_rate"}, "pool");

    PoolState pool;
    if (!j.contains("prices")) fail("pool.prices", "required");
    pool.prices = get_vector(j["prices"], "pool.prices");
    if (pool.prices.empty()) fail("pool.prices", "must be nonempty");
    for (std::size_t i = 0; i < pool.prices.size(); ++i) {
        if (!(pool.prices[i] > 0.0)) {
            fail("pool.prices[" + std::to_string(i) + "]", "must be > 0");
        }
    }

    if (!j.contains("reserves")) fail("pool.reserves", "required");
    pool.reserves = get_vector(j["reserves"], "pool.reserves");
    if (pool.reserves.size() != pool.prices.size()) {
        fail("pool.reserves", "width must match pool.prices");
    }
    for (std::size_t i = 0; i < pool.reserves.size(); ++i) {
        if (!(pool.reserves[i] >= 0.0)) {
            fail("pool.reserves[" + std::to_string(i) + "]", "must be >= 0");
        }
    }

    if (j.contains("lent")) {
        pool.lent = get_vector(j["lent"], "pool.lent");
        if (pool.lent.size() != pool.prices.size()) {
            fail("pool.lent", "width must match pool.prices");
        }
        for (std::size_t i = 0; i < pool.lent.size(); ++i) {
            if (!(pool.lent[i] >= 0.0)) {
                fail("pool.lent[" + std::to_string(i) + "]", "must be >= 0");
            }
        }
    } else {
        pool.lent.assign(pool.prices.size(), 0.0);
    }

    if (!j.contains("fee_rate")) fail("pool.fee_rate", "required");
    pool.fee_rate = get_number(j["fee_rate"], "pool.fee_rate");
    if (!(pool.fee_rate > 0.0 && pool.fee_rate < 1.0)) {
        fail("pool.fee_rate", "must lie strictly inside (0, 1)");
    }
    return pool;
}

C1Reading parse_reading(const Json& j, const std::string& path) {
    const std::string s = get_string(j, path);
    if (s == "strong") return C1Reading::Strong;
    if (s == "weak") return C1Reading::Weak;
    fail(path, "expected \"strong\" or \"weak\"");
}

DiscountSpec parse_discount(const Json& j, std::size_t dimension) {
    expect_object(j, "discount");
    if (!j.contains("kind")) fail("discount.kind", "required");

    DiscountSpec spec;
    spec.kind = get_string(j["kind"], "discount.kind");

    if (spec.kind == "constant-zero") {
        reject_unknown_keys(j, {"kind", "c1_reading"}, "discount");
    } else if (spec.kind == "canonical-quadratic") {
        reject_unknown_keys(j, {"kind", "stiffness", "c1_reading"}, "discount");
        if (j.contains("stiffness")) {
            const Json& rows = j["stiffness"];
            if (!rows.is_array() || rows.size() != dimension) {
                fail("discount.stiffness", "expected " + std::to_string(dimension) +
                                               " rows to match the pool width");
            }
            for (std::size_t i = 0; i < rows.size(); ++i) {
                Vec row = get_vector(rows[i], "discount.stiffness[" + std::to_string(i) + "]");
                if (row.size() != dimension) {
                    fail("discount.stiffness[" + std::to_string(i) + "]",
                         "row width must match the pool width");
                }
                spec.stiffness.push_back(std::move(row));
            }
        }
    } else if (spec.kind == "clipped-log-ray") {
        reject_unknown_keys(j, {"kind", "anchor_value", "cap", "c1_reading"}, "discount");
        if (j.contains("anchor_value")) {
            spec.anchor_value = get_number(j["anchor_value"], "discount.anchor_value");
            if (!(spec.anchor_value > 0.0)) fail("discount.anchor_value", "must be > 0");
        }
        if (j.contains("cap")) {
            spec.cap = get_number(j["cap"], "discount.cap");
            if (!(spec.cap > 0.0)) fail("discount.cap", "must be > 0");
        }
    } else if (spec.kind == "dsl") {
        reject_unknown_keys(j, {"kind", "expression", "c1_reading"}, "discount");
        if (!j.contains("expression")) fail("discount.expression", "required");
        spec.expression = get_string(j["expression"], "discount.expression");
        try {
            fexpr::parse(spec.expression);
        } catch (const Error& e) {
            fail("discount.expression", e.what());
        }
    } else {
        fail("discount.kind", "unknown kind '" + spec.kind +
                                  "' (expected constant-zero, canonical-quadratic, "
                                  "clipped-log-ray, or dsl)");
    }

    if (j.contains("c1_reading")) {
        spec.c1_reading = parse_reading(j["c1_reading"], "discount.c1_reading");
    }
    return spec;
}

struct CheckSchema {
    bool samples = false;
    bool c_grid = false;
    bool lambdas = false;
    bool quadrature_points = false;
};

CheckSchema schema_for(const std::string& name, const std::string& path) {
    const auto& names = known_checks();
    if (std::find(names.begin(), names.end(), name) == names.end()) {
        fail(path, "unknown check '" + name + "'");
    }
    CheckSchema s;
    s.samples = name == "c1" || name == "c2" || name == "euler" || name == "inner-product" ||
                name == "gradient-consistency" || name == "gradient-theorem";
    s.c_grid = name == "uniform-shrinkage";
    s.lambdas = name == "numeraire";
    s.quadrature_points = name == "gradient-theorem";
    return s;
}

CheckRequest parse_check(const Json& j, const std::string& path) {
    CheckRequest req;
    if (j.is_string()) {
        req.name = j.get<std::string>();
        schema_for(req.name, path);
        return req;
    }
    expect_object(j, path);
    if (!j.contains("name")) fail(path + ".name", "required");
    req.name = get_string(j["name"], path + ".name");
    const CheckSchema schema = schema_for(req.name, path + ".name");

    std::vector<std::string> allowed{"name", "expect", "seed", "tolerance"};
    if (schema.samples) allowed.push_back("samples");
    if (schema.c_grid) allowed.push_back("c_grid");
    if (schema.lambdas) allowed.push_back("lambdas");
    if (schema.quadrature_points) allowed.push_back("quadrature_points");
    reject_unknown_keys(j, allowed, path);

    if (j.contains("expect")) {
        req.expect = get_string(j["expect"], path + ".expect");
        if (req.expect != "pass" && req.expect != "fail") {
            fail(path + ".expect", "expected \"pass\" or \"fail\"");
        }
    }
    if (j.contains("seed")) req.seed = get_seed(j["seed"], path + ".seed");
    if (j.contains("samples")) req.samples = get_count(j["samples"], path + ".samples", 1);
    if (j.contains("tolerance")) {
        req.tolerance = get_number(j["tolerance"], path + ".tolerance");
        if (!(*req.tolerance > 0.0)) fail(path + ".tolerance", "must be > 0");
    }
    if (j.contains("c_grid")) {
        req.c_grid = get_vector(j["c_grid"], path + ".c_grid");
        if (req.c_grid->empty()) fail(path + ".c_grid", "must be nonempty");
        for (std::size_t i = 0; i < req.c_grid->size(); ++i) {
            if (!((*req.c_grid)[i] > 0.0 && (*req.c_grid)[i] < 1.0)) {
                fail(path + ".c_grid[" + std::to_string(i) + "]",
                     "must lie strictly inside (0, 1)");
            }
        }
    }
    if (j.contains("lambdas")) {
        req.lambdas = get_vector(j["lambdas"], path + ".lambdas");
        if (req.lambdas->empty()) fail(path + ".lambdas", "must be nonempty");
        for (std::size_t i = 0; i < req.lambdas->size(); ++i) {
            if (!((*req.lambdas)[i] > 0.0)) {
                fail(path + ".lambdas[" + std::to_string(i) + "]", "must be > 0");
            }
        }
    }
    if (j.contains("quadrature_points")) {
        req.quadrature_points = get_count(j["quadrature_points"], path + ".quadrature_points", 2);
    }
    return req;
}

}  // namespace

const std::vector<std::string>& known_checks() {
    static const std::vector<std::string> names{
        "c1",
        "c2",
        "c3",
        "euler",
        "numeraire",
        "inner-product",
        "gradient-consistency",
        "gradient-theorem",
        "gradient-domination-witness",
        "uniform-shrinkage",
    };
    return names;
}

std::unique_ptr<DiscountFunction> build_discount(const DiscountSpec& spec, std::size_t dimension) {
    std::unique_ptr<DiscountFunction> out;
    if (spec.kind == "constant-zero") {
        out = std::make_unique<ConstantZero>();
    } else if (spec.kind == "canonical-quadratic") {
        try {
            SymMatrix b = spec.stiffness.empty() ? SymMatrix::identity(dimension)
                                                 : SymMatrix::from_rows(spec.stiffness);
            if (b.size() != dimension) {
                throw Error("stiffness width must match the pool width");
            }
            if (spec.stiffness_scale != 1.0) b.scale(spec.stiffness_scale);
            out = std::make_unique<CanonicalQuadratic>(std::move(b));
        } catch (const Error& e) {
            throw ConfigError("discount.stiffness", e.what());
        }
    } else if (spec.kind == "clipped-log-ray") {
        out = std::make_unique<ClippedLogRay>(spec.anchor_value, spec.cap);
    } else if (spec.kind == "dsl") {
        try {
            out = std::make_unique<DslDiscount>(spec.expression);
        } catch (const Error& e) {
            throw ConfigError("discount.expression", e.what());
        }
    } else {
        throw ConfigError("discount.kind", "unknown kind '" + spec.kind + "'");
    }
    out->set_c1_reading(spec.c1_reading);
    return out;
}

Scenario parse_scenario_text(std::string_view text) {
    Json j;
    try {
        j = Json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("$", e.what());
    }
    expect_object(j, "$");
    reject_unknown_keys(
        j, {"name", "pool", "target_weights", "discount", "checks", "seed", "tolerances"}, "$");

    Scenario scn;
    scn.source_digest = fnv1a_hex(text);

    if (!j.contains("name")) fail("name", "required");
    scn.name = get_string(j["name"], "name");
    if (scn.name.empty()) fail("name", "must be nonempty");
    for (char c : scn.name) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                        (c >= '0' && c <= '9') || c == '.' || c == '_' || c == '-';
        if (!ok) fail("name", "allowed characters are [A-Za-z0-9._-]");
    }

    if (!j.contains("pool")) fail("pool", "required");
    scn.pool = parse_pool(j["pool"]);

    if (!j.contains("target_weights")) fail("target_weights", "required");
    scn.target_weights = get_vector(j["target_weights"], "target_weights");
    if (scn.target_weights.size() != scn.pool.size()) {
        fail("target_weights", "width must match pool.prices");
    }
    try {
        WeightVector probe(scn.target_weights);
    } catch (const Error& e) {
        fail("target_weights", e.what());
    }

    if (!j.contains("discount")) fail("discount", "required");
    scn.discount = parse_discount(j["discount"], scn.pool.size());
    // Build once now so parameter errors (non-PD stiffness) surface as
    // config errors before any check runs.
    build_discount(scn.discount, scn.pool.size());

    if (!j.contains("checks")) fail("checks", "required");
    const Json& checks = j["checks"];
    if (!checks.is_array() || checks.empty()) fail("checks", "expected a nonempty array");
    for (std::size_t i = 0; i < checks.size(); ++i) {
        scn.checks.push_back(parse_check(checks[i], "checks[" + std::to_string(i) + "]"));
    }

    if (j.contains("seed")) {
        scn.seed = get_seed(j["seed"], "seed");
        scn.seed_from_file = true;
    }

    if (j.contains("tolerances")) {
        const Json& tols = j["tolerances"];
        expect_object(tols, "tolerances");
        reject_unknown_keys(tols, known_checks(), "tolerances");
        for (const auto& item : tols.items()) {
            const double v = get_number(item.value(), "tolerances." + item.key());
            if (!(v > 0.0)) fail("tolerances." + item.key(), "must be > 0");
            scn.tolerances[item.key()] = v;
        }
    }

    try {
        validate(scn.pool);
    } catch (const Error& e) {
        fail("pool", e.what());
    }
    return scn;
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(path, "cannot open scenario file");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario_text(buf.str());
}

std::string fnv1a_hex(std::string_view bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace twm
