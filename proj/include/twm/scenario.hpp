#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "twm/discount.hpp"
#include "twm/linalg.hpp"
#include "twm/pool.hpp"

namespace twm {

/// Serializable description of one discount function. Kept as data (not a
/// built object) so sweeps can rescale parameters before building.
struct DiscountSpec {
    std::string kind;  // constant-zero | canonical-quadratic | clipped-log-ray | dsl
    std::vector<Vec> stiffness;    // canonical-quadratic; empty means identity
    double stiffness_scale = 1.0;  // sweep hook, applied at build time
    double anchor_value = 2.0;     // clipped-log-ray
    double cap = 1.0;              // clipped-log-ray
    std::string expression;        // dsl
    C1Reading c1_reading = C1Reading::Strong;
};

/// Builds the function, validating parameters (PD stiffness, positive
/// anchor, parsable expression). Throws ConfigError with a key path.
std::unique_ptr<DiscountFunction> build_discount(const DiscountSpec& spec, std::size_t dimension);

/// One requested check with optional per-check overrides.
struct CheckRequest {
    std::string name;
    std::string expect = "pass";  // "pass" or "fail": the polarity the run is graded against
    std::optional<std::uint64_t> seed;
    std::optional<int> samples;
    std::optional<double> tolerance;
    std::optional<std::vector<double>> c_grid;   // uniform-shrinkage
    std::optional<std::vector<double>> lambdas;  // numeraire
    std::optional<int> quadrature_points;        // gradient-theorem
};

/// Documented check names, in report order.
const std::vector<std::string>& known_checks();

/// A fully validated scenario: dimensions agree, weights on the simplex,
/// fee inside (0,1), every check name known, no unknown keys anywhere.
struct Scenario {
    std::string name;
    PoolState pool;
    Vec target_weights;
    DiscountSpec discount;
    std::vector<CheckRequest> checks;
    std::uint64_t seed = 0;
    bool seed_from_file = false;  // whether the file pinned one (CLI precedence)
    std::map<std::string, double> tolerances;  // per-check overrides
    std::string source_digest = "0000000000000000";  // fnv1a-64 of the input bytes

    WeightVector weights() const { return WeightVector(target_weights); }
};

/// Parses and validates scenario text (strict schema: unknown keys are
/// ConfigErrors naming the full key path).
Scenario parse_scenario_text(std::string_view text);

/// Reads the file and parses it; the digest covers the raw bytes.
Scenario load_scenario(const std::string& path);

/// FNV-1a 64-bit digest, as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view bytes);

}  // namespace twm
