#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "twm/conditions.hpp"
#include "twm/discount.hpp"
#include "twm/linalg.hpp"
#include "twm/pool.hpp"

namespace twm {

// ---------------------------------------------------------------------------
// Line integrals along price segments
// ---------------------------------------------------------------------------

/// Straight segment p(t) = p1 + t (p2 - p1), t in [0, 1].
struct SegmentSpec {
    Vec p1;
    Vec p2;
    int quadrature_points = 2048;  // Simpson subintervals per smooth piece
    bool refine_kinks = true;      // split at reported gradient kinks
};

/// Everything held fixed while prices move along the segment.
struct SegmentContext {
    Vec target_weights;
    Vec reserves;
    Vec delta;  // empty means zero
    double fee_rate = 0.0;
};

/// Composite-Simpson value of  int_0^1 grad_p F(p(t)) . (p2 - p1) dt.
/// By the gradient theorem this equals F(p2) - F(p1) whenever F is C^1 on
/// the segment; the difference is the instrument for detecting bookkeeping
/// errors in hand-written gradients. Throws QuadratureAcrossKink when the
/// function reports kinks on the segment and refinement is disabled.
double gradient_line_integral(const DiscountFunction& f, const SegmentContext& ctx,
                              const SegmentSpec& spec);

/// The growth bound  int_0^1 8 f R . (p2 - p1) / (p(t).R) dt, both in closed
/// form (8 f ln(p2.R / p1.R)) and by the same Simpson rule, so the two can
/// be cross-checked.
struct BoundIntegral {
    double closed_form = 0.0;
    double quadrature = 0.0;
};

BoundIntegral bound_line_integral(const SegmentContext& ctx, const SegmentSpec& spec);

// ---------------------------------------------------------------------------
// Witness search: gradient domination is self-defeating
// ---------------------------------------------------------------------------

enum class WitnessKind {
    GradientDominationViolation,  // some dF/dp_i falls below 8 f R_i / (p.R)
    UniformShrinkageViolation,    // some dV/dp_i exceeds c dVold/dp_i
};

/// A concrete point at which the advertised condition fails, together with
/// the finite-difference re-check of the analytic margin.
struct Witness {
    Vec point;                  // prices
    std::size_t component = 0;  // violating coordinate, 0-based
    double margin = 0.0;        // analytic margin; sign convention per kind
    WitnessKind kind = WitnessKind::GradientDominationViolation;
    double verified_margin = 0.0;        // margin with FD gradients instead
    double verification_residual = 0.0;  // |analytic - fd| / (1 + |analytic|)
};

struct WitnessSearchConfig {
    double slack = 0.5;           // extra growth demanded beyond the budget
    int initial_grid = 65;        // points in the first segment scan
    int max_grid = 1 << 20;       // refinement ceiling
    int max_doublings = 60;       // ceiling on p2 = 2^k p1
    double fd_step = 1e-6;        // relative step for the re-check
    double margin_threshold = 1e-10;  // how negative counts as a violation
    double agreement_rtol = 1e-6;     // analytic-vs-FD agreement demanded
};

/// One row of the growth race: the bound integral accumulates 8 f ln 2 per
/// doubling while the gradient theorem caps the left side at 1 - F(p1).
struct GrowthRow {
    int doublings = 0;
    double scale = 1.0;          // p2 = scale * p1
    double bound_growth = 0.0;   // 8 f ln(scale)
    double budget = 0.0;         // (1 - F(p1)) + slack
};

struct DominationSearchResult {
    Witness witness;
    std::vector<GrowthRow> trace;
    int grid_points = 0;         // grid size at which the witness surfaced
    double premise_value = 0.0;  // F(p1)
};

/// Constructs a point where the component-wise growth condition
///   dF/dp_i >= 8 f R_i / (p.R)   for all i
/// fails, for any bounded F. Doubles the far endpoint until the accumulated
/// bound outruns the total variation available to F, then scans the segment
/// for the most negative margin and re-verifies it with finite differences.
/// Throws PremiseFailure if F exceeds 1 at a probed point and
/// SearchBudgetExceeded when the budgets above run out.
DominationSearchResult find_gradient_domination_witness(const DiscountFunction& f,
                                                        const SegmentContext& ctx, const Vec& p1,
                                                        const WitnessSearchConfig& cfg = {});

// ---------------------------------------------------------------------------
// Numeraire invariance and the Euler identity
// ---------------------------------------------------------------------------

/// p . grad_p F: identically zero exactly when F is homogeneous of degree
/// zero in prices (Euler's identity).
double euler_residual(const DiscountFunction& f, const EvalContext& ctx);

/// Sampled Euler check, scaled the way a residual of a dot product should
/// be: |p . grad F| <= tol (1 + ||grad F|| ||p||).
struct EulerReport {
    bool pass = false;
    double max_scaled_residual = 0.0;
    int samples_used = 0;
    std::uint64_t seed = 0;
    double tolerance = 1e-8;
};

EulerReport check_euler(const DiscountFunction& f, const SamplerConfig& cfg);

struct NumeraireRow {
    double lambda = 1.0;
    double base_value = 0.0;    // V(p)
    double scaled_value = 0.0;  // V(lambda p)
    double rel_error = 0.0;     // |V(lambda p) - lambda V(p)| / (lambda |V(p)|)
};

struct NumeraireReport {
    bool pass = false;
    double max_rel_error = 0.0;
    double tolerance = 1e-10;
    std::vector<NumeraireRow> rows;  // one per lambda
};

/// Degree-1 homogeneity of the pool value: V(lambda p) = lambda V(p) for
/// every lambda in the list ("a dollar is also 100 cents"). Holds exactly
/// when F is numeraire invariant.
NumeraireReport check_numeraire(const DiscountFunction& f, const PoolState& state,
                                const WeightVector& wstar, std::span<const double> delta,
                                const std::vector<double>& lambdas);

/// | p . grad V  -  (p.R / (1+F) + f p.l) | / (1 + |V|). Vanishes exactly
/// when the Euler identity holds, which is the algebraic engine of the
/// shrinkage refutation.
double inner_product_residual(const DiscountFunction& f, const PoolState& state,
                              const WeightVector& wstar, std::span<const double> delta);

struct InnerProductReport {
    bool pass = false;
    double max_scaled_residual = 0.0;
    int samples_used = 0;
    std::uint64_t seed = 0;
    double tolerance = 1e-9;
};

/// inner_product_residual over sampled states and feasible deltas.
InnerProductReport check_inner_product(const DiscountFunction& f, const SamplerConfig& cfg);

struct GradientConsistencyReport {
    bool pass = false;
    double max_rel_error = 0.0;  // analytic vs central FD, relative
    int samples_used = 0;
    int skipped_kinks = 0;  // states where one-sided slopes disagree
    std::uint64_t seed = 0;
    double tolerance = 1e-6;
};

/// Analytic grad V against the finite-difference oracle at sampled states.
/// States straddling a gradient kink (detected by disagreeing one-sided
/// slopes) are skipped and counted, not compared.
GradientConsistencyReport check_gradient_consistency(const DiscountFunction& f,
                                                     const SamplerConfig& cfg);

struct GradientTheoremReport {
    bool pass = false;
    double max_scaled_error = 0.0;      // |integral - (F(p2)-F(p1))| scaled
    double max_bound_disagreement = 0.0;  // quadrature vs closed-form bound
    int segments_used = 0;
    std::uint64_t seed = 0;
    double tolerance = 1e-6;
    double bound_tolerance = 1e-8;
};

/// The fundamental theorem for line integrals on seeded random segments,
/// kinks refined, plus the closed-form-vs-quadrature agreement of the growth
/// bound on the same segments.
GradientTheoremReport check_gradient_theorem(const DiscountFunction& f, const SamplerConfig& cfg,
                                             int quadrature_points = 2048);

// ---------------------------------------------------------------------------
// No uniform shrinkage of the value gradient
// ---------------------------------------------------------------------------

struct ShrinkageRow {
    double c = 0.0;
    Vec prices;
    std::size_t component = 0;
    double component_margin = 0.0;  // p_i (dV/dp_i - c R_i), positive breaks c
    double aggregate_new = 0.0;     // p . grad V
    double aggregate_bound = 0.0;   // c * p . R
    double euler_residual = 0.0;
};

struct ShrinkageReport {
    bool falsified = false;  // every c in the grid admits a witness
    std::vector<Witness> witnesses;
    std::vector<ShrinkageRow> rows;
    std::uint64_t seed = 0;
    int zero_state_tries = 0;  // worst case over the grid
};

/// For each c in (0, 1), produces a state with F = 0 at which the value
/// gradient cannot be dominated by c times the holdings gradient: the Euler
/// identity pins p . grad V = p.R/(1+F) + f p.l > c p.R. Demands the Euler
/// premise to within 1e-8 (PremiseFailure otherwise) and a zero-discount
/// state within a bounded number of draws (NoZeroState otherwise).
ShrinkageReport falsify_uniform_shrinkage(const DiscountFunction& f, const WeightVector& wstar,
                                          const std::vector<double>& c_grid,
                                          const SamplerConfig& cfg);

}  // namespace twm
