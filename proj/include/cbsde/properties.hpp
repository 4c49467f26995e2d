#ifndef CBSDE_PROPERTIES_HPP
#define CBSDE_PROPERTIES_HPP

/**
 * @file properties.hpp
 * @brief Theorem harness: each structural result becomes a quantified
 * check over lattice instances, returning a machine-readable report.
 *
 * Two tolerance regimes.  Inequalities that hold per penalty level
 * (comparison, convexity, sandwich) are arithmetic-exact on the lattice
 * and get absolute tolerances (1e-9 / 1e-11).  Statements about the
 * penalization limit inherit schedule truncation and get an explicit
 * budget.  Multi-clause checks report the worst signed excess over the
 * per-clause tolerances, so pass <=> max_violation <= 0.
 *
 * Checks run the full fixed penalty ladder (no adaptive stopping) so
 * every compared instance shares m-levels.  Where the constraint
 * penalises z, ladders are clamped to the monotone-scheme regime
 * (see monotone_m_cap); beyond it the explicit-in-z step loses node-wise
 * comparison and violations would measure the scheme, not the theorem.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cbsde/bsde.hpp"
#include "cbsde/lattice.hpp"
#include "cbsde/model.hpp"
#include "cbsde/penalize.hpp"
#include "cbsde/random.hpp"

namespace cbsde {

struct InstanceRecord {
    std::string description;
    double violation = 0.0;
};

struct PropertyReport {
    std::string property_name;
    int instances_tested = 0;
    double max_violation = 0.0;
    std::string worst_instance;
    double tolerance = 0.0;
    bool pass = false;
    std::vector<InstanceRecord> trace;
    std::vector<std::pair<std::string, double>> metrics;

    void finalize() { pass = max_violation <= tolerance; }
};

namespace detail {

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

struct FieldGap {
    double value = -std::numeric_limits<double>::infinity();
    int step = 0;
    std::size_t node = 0;
};

/// max over covered steps and nodes of (a - b).
inline FieldGap max_field_excess(const AdaptedField& a, const AdaptedField& b) {
    FieldGap worst;
    const int first = std::max(a.first_step(), b.first_step());
    const int last = std::min(a.last_step(), b.last_step());
    for (int step = first; step <= last; ++step) {
        const auto ra = a.step_values(step);
        const auto rb = b.step_values(step);
        for (std::size_t node = 0; node < ra.size(); ++node) {
            const double gap = ra[node] - rb[node];
            if (gap > worst.value) worst = {gap, step, node};
        }
    }
    return worst;
}

/// max over nodes of (y_mix - a*y1 - (1-a)*y2).
inline FieldGap max_mix_excess(const AdaptedField& ymix, double a,
                               const AdaptedField& y1,
                               const AdaptedField& y2) {
    FieldGap worst;
    for (int step = ymix.first_step(); step <= ymix.last_step(); ++step) {
        const auto rm = ymix.step_values(step);
        const auto r1 = y1.step_values(step);
        const auto r2 = y2.step_values(step);
        for (std::size_t node = 0; node < rm.size(); ++node) {
            const double gap = rm[node] - a * r1[node] - (1.0 - a) * r2[node];
            if (gap > worst.value) worst = {gap, step, node};
        }
    }
    return worst;
}

/// L2 distance of two fields at one step.
inline double l2_gap(const AdaptedField& a, const AdaptedField& b, int step) {
    const Lattice& lat = a.lattice();
    const auto ra = a.step_values(step);
    const auto rb = b.step_values(step);
    double acc = 0.0;
    for (std::size_t node = 0; node < ra.size(); ++node) {
        const double d = ra[node] - rb[node];
        acc += lat.probability(step, node) * d * d;
    }
    return std::sqrt(acc);
}

inline void require_leafwise_order(const Claim& lo, const Claim& hi,
                                   const Lattice& lattice, const char* what) {
    const auto a = lo.leaves(lattice).step_values(lattice.n_steps());
    const auto b = hi.leaves(lattice).step_values(lattice.n_steps());
    for (std::size_t k = 0; k < a.size(); ++k)
        if (a[k] > b[k])
            throw std::invalid_argument(
                std::string(what) + ": claims not ordered leafwise at node " +
                std::to_string(k));
}

/// Random claim with nonnegative leaves, for manufacturing ordered pairs.
inline Claim random_nonneg_table(const Lattice& lattice, Rng& rng) {
    return random_table(lattice, rng, 0.0, 1.0);
}

inline const AdaptedField& limit_y(const std::vector<PenalizedRun>& ladder) {
    return ladder.back().solution.y;
}

}  // namespace detail

inline constexpr double kComparisonTol = 1e-9;
inline constexpr double kMonotoneTol = 1e-11;
inline constexpr double kFatouBudget = 1.5e-2;
inline constexpr double kL2Budget = 1e-3;

// ---------------------------------------------------------------------------
// Comparison: claim order implies value order, per level and in the limit
// ---------------------------------------------------------------------------

inline PropertyReport check_comparison(const Generator& g,
                                       const Constraint& phi, const Claim& xi,
                                       const Claim& eta, const Lattice& lattice,
                                       const PenaltySchedule& schedule = {}) {
    detail::require_leafwise_order(xi, eta, lattice, "check_comparison");
    const PenaltySchedule sched =
        clamp_to_monotone(schedule, g, phi, lattice);
    const auto runs_xi = run_penalty_ladder(g, phi, xi, lattice, sched);
    const auto runs_eta = run_penalty_ladder(g, phi, eta, lattice, sched);

    PropertyReport report;
    report.property_name = "comparison";
    report.tolerance = kComparisonTol;
    report.instances_tested = 1;
    for (std::size_t j = 0; j < runs_xi.size(); ++j) {
        const auto gap = detail::max_field_excess(runs_xi[j].solution.y,
                                                  runs_eta[j].solution.y);
        if (gap.value > report.max_violation) {
            report.max_violation = gap.value;
            report.worst_instance =
                "m=" + detail::format_double(runs_xi[j].m) + " step=" +
                std::to_string(gap.step) + " node=" + std::to_string(gap.node);
        }
    }
    report.max_violation = std::max(report.max_violation, 0.0);
    report.trace.push_back({"pair", report.max_violation});
    report.metrics.emplace_back("m_levels",
                                static_cast<double>(runs_xi.size()));
    report.finalize();
    return report;
}

/// Seeded suite over random ordered pairs eta = xi + nonnegative table.
inline PropertyReport comparison_suite(const Generator& g,
                                       const Constraint& phi,
                                       const Lattice& lattice, int count,
                                       std::uint64_t seed,
                                       const PenaltySchedule& schedule = {}) {
    if (count < 1)
        throw std::invalid_argument("comparison_suite: count must be >= 1");
    Rng rng(seed);
    const PenaltySchedule sched =
        clamp_to_monotone(schedule, g, phi, lattice);

    PropertyReport report;
    report.property_name = "comparison";
    report.tolerance = kComparisonTol;
    report.instances_tested = count;
    for (int k = 0; k < count; ++k) {
        const Claim xi = random_table(lattice, rng);
        const Claim eta =
            add_scaled(xi, detail::random_nonneg_table(lattice, rng), 1.0);
        const auto runs_xi = run_penalty_ladder(g, phi, xi, lattice, sched);
        const auto runs_eta = run_penalty_ladder(g, phi, eta, lattice, sched);
        double inst_viol = 0.0;
        std::string where;
        for (std::size_t j = 0; j < runs_xi.size(); ++j) {
            const auto gap = detail::max_field_excess(runs_xi[j].solution.y,
                                                      runs_eta[j].solution.y);
            if (gap.value > inst_viol) {
                inst_viol = gap.value;
                where = "m=" + detail::format_double(runs_xi[j].m) +
                        " step=" + std::to_string(gap.step) +
                        " node=" + std::to_string(gap.node);
            }
        }
        inst_viol = std::max(inst_viol, 0.0);
        report.trace.push_back({"pair " + std::to_string(k), inst_viol});
        if (inst_viol > report.max_violation) {
            report.max_violation = inst_viol;
            report.worst_instance =
                "pair " + std::to_string(k) + " (" + where + ")";
        }
    }
    report.finalize();
    return report;
}

// ---------------------------------------------------------------------------
// Convexity of the value in the terminal claim
// ---------------------------------------------------------------------------

inline PropertyReport check_convexity(const Generator& g, const Constraint& phi,
                                      const Claim& xi, const Claim& eta,
                                      double a, const Lattice& lattice,
                                      const PenaltySchedule& schedule = {}) {
    if (!g.convex() || !phi.convex())
        throw std::invalid_argument(
            "check_convexity: generator and constraint must be convex");
    if (a < 0.0 || a > 1.0)
        throw std::invalid_argument("check_convexity: a must be in [0,1]");
    const PenaltySchedule sched =
        clamp_to_monotone(schedule, g, phi, lattice);
    const Claim mixed = Claim::mix(a, xi, eta);
    const auto runs_mix = run_penalty_ladder(g, phi, mixed, lattice, sched);
    const auto runs_xi = run_penalty_ladder(g, phi, xi, lattice, sched);
    const auto runs_eta = run_penalty_ladder(g, phi, eta, lattice, sched);

    PropertyReport report;
    report.property_name = "convexity";
    report.tolerance = kComparisonTol;
    report.instances_tested = 1;
    double limit_viol = 0.0;
    for (std::size_t j = 0; j < runs_mix.size(); ++j) {
        const auto gap =
            detail::max_mix_excess(runs_mix[j].solution.y, a,
                                   runs_xi[j].solution.y,
                                   runs_eta[j].solution.y);
        if (gap.value > report.max_violation) {
            report.max_violation = gap.value;
            report.worst_instance =
                "m=" + detail::format_double(runs_mix[j].m) + " step=" +
                std::to_string(gap.step) + " node=" + std::to_string(gap.node);
        }
        if (j + 1 == runs_mix.size()) limit_viol = std::max(gap.value, 0.0);
    }
    report.max_violation = std::max(report.max_violation, 0.0);
    report.trace.push_back({"triple", report.max_violation});
    report.metrics.emplace_back("limit_violation", limit_viol);
    report.finalize();
    return report;
}

/// Seeded suite over random triples (xi, eta, a).
inline PropertyReport convexity_suite(const Generator& g, const Constraint& phi,
                                      const Lattice& lattice, int count,
                                      std::uint64_t seed,
                                      const PenaltySchedule& schedule = {}) {
    if (count < 1)
        throw std::invalid_argument("convexity_suite: count must be >= 1");
    if (!g.convex() || !phi.convex())
        throw std::invalid_argument(
            "convexity_suite: generator and constraint must be convex");
    Rng rng(seed);
    const PenaltySchedule sched =
        clamp_to_monotone(schedule, g, phi, lattice);

    PropertyReport report;
    report.property_name = "convexity";
    report.tolerance = kComparisonTol;
    report.instances_tested = count;
    double limit_viol = 0.0;
    for (int k = 0; k < count; ++k) {
        const Claim xi = random_table(lattice, rng);
        const Claim eta = random_table(lattice, rng);
        const double a = rng.uniform01();
        const Claim mixed = Claim::mix(a, xi, eta);
        const auto runs_mix = run_penalty_ladder(g, phi, mixed, lattice, sched);
        const auto runs_xi = run_penalty_ladder(g, phi, xi, lattice, sched);
        const auto runs_eta = run_penalty_ladder(g, phi, eta, lattice, sched);
        double inst_viol = 0.0;
        std::string where;
        for (std::size_t j = 0; j < runs_mix.size(); ++j) {
            const auto gap =
                detail::max_mix_excess(runs_mix[j].solution.y, a,
                                       runs_xi[j].solution.y,
                                       runs_eta[j].solution.y);
            if (gap.value > inst_viol) {
                inst_viol = gap.value;
                where = "m=" + detail::format_double(runs_mix[j].m) +
                        " step=" + std::to_string(gap.step) +
                        " node=" + std::to_string(gap.node);
            }
            if (j + 1 == runs_mix.size())
                limit_viol = std::max(limit_viol, gap.value);
        }
        inst_viol = std::max(inst_viol, 0.0);
        report.trace.push_back({"triple " + std::to_string(k) +
                                    " a=" + detail::format_double(a),
                                inst_viol});
        if (inst_viol > report.max_violation) {
            report.max_violation = inst_viol;
            report.worst_instance =
                "triple " + std::to_string(k) + " (" + where + ")";
        }
    }
    report.metrics.emplace_back("limit_violation", std::max(limit_viol, 0.0));
    report.finalize();
    return report;
}

// ---------------------------------------------------------------------------
// Continuity from below at t = 0 (Fatou-type limit)
// ---------------------------------------------------------------------------

/**
 * For an increasing bounded sequence xi_n converging to base, the values
 * E_0(xi_n) must increase to E_0(base).  E_0 is the last level of the
 * fixed ladder.  Clauses: monotone within 1e-11; final gap within budget.
 */
inline PropertyReport check_fatou(const Generator& g, const Constraint& phi,
                                  const Claim& base, const Lattice& lattice,
                                  int count,
                                  const PenaltySchedule& schedule = {},
                                  const SequenceScheme& scheme =
                                      SequenceScheme::shift(),
                                  double budget = kFatouBudget) {
    if (count < 1)
        throw std::invalid_argument("check_fatou: count must be >= 1");
    const auto sequence = make_claim_sequence(base, scheme, count, lattice);
    for (int n = 0; n + 1 < count; ++n)
        detail::require_leafwise_order(sequence[static_cast<std::size_t>(n)],
                                       sequence[static_cast<std::size_t>(n) + 1],
                                       lattice, "check_fatou (not increasing)");
    detail::require_leafwise_order(sequence.back(), base, lattice,
                                   "check_fatou (sequence above limit)");

    const PenaltySchedule sched =
        clamp_to_monotone(schedule, g, phi, lattice);
    auto value_at_zero = [&](const Claim& claim) {
        return run_penalty_ladder(g, phi, claim, lattice, sched).back().y0();
    };

    PropertyReport report;
    report.property_name = "fatou";
    report.tolerance = 0.0;  // clauses carry their own tolerances
    report.instances_tested = count;

    const double e0_base = value_at_zero(base);
    std::vector<double> e0(static_cast<std::size_t>(count));
    double monotone_viol = 0.0;
    double fitted_c = 0.0;
    for (int n = 0; n < count; ++n) {
        e0[static_cast<std::size_t>(n)] =
            value_at_zero(sequence[static_cast<std::size_t>(n)]);
        const double gap =
            std::abs(e0_base - e0[static_cast<std::size_t>(n)]);
        fitted_c = std::max(fitted_c, gap * (n + 1));
        if (n > 0)
            monotone_viol = std::max(monotone_viol,
                                     e0[static_cast<std::size_t>(n) - 1] -
                                         e0[static_cast<std::size_t>(n)]);
        report.trace.push_back(
            {"n=" + std::to_string(n + 1) + " E0=" +
                 detail::format_double(e0[static_cast<std::size_t>(n)]),
             gap});
    }
    const double final_gap = std::abs(e0_base - e0.back());

    const double monotone_excess = monotone_viol - kMonotoneTol;
    const double budget_excess = final_gap - budget;
    report.max_violation = std::max(monotone_excess, budget_excess);
    report.worst_instance = monotone_excess >= budget_excess
                                ? "monotonicity of E0(xi_n)"
                                : "final gap vs budget";
    report.metrics.emplace_back("monotone_violation",
                                std::max(monotone_viol, 0.0));
    report.metrics.emplace_back("final_gap", final_gap);
    report.metrics.emplace_back("fitted_C", fitted_c);
    report.metrics.emplace_back("E0_limit", e0_base);
    report.finalize();
    return report;
}

// ---------------------------------------------------------------------------
// L2 continuity at an interior step, with the sandwich decomposition
// ---------------------------------------------------------------------------

/**
 * Perturbation scheme with halving L2 distances; d_n is the L2 gap of the
 * limit fields at t_step.  Clauses: d strictly decreasing after the first
 * halving; final d within budget; sandwich
 * E_t(xi_n ^ xi) <= E_t(xi_n) <= E_t(xi_n v xi) node-wise per level.
 */
inline PropertyReport check_l2_continuity(const Generator& g,
                                          const Constraint& phi,
                                          const Claim& base,
                                          const Lattice& lattice, int t_step,
                                          std::uint64_t seed, int halvings = 6,
                                          const PenaltySchedule& schedule = {},
                                          double budget = kL2Budget) {
    if (halvings < 1)
        throw std::invalid_argument("check_l2_continuity: halvings >= 1");
    if (t_step < 0 || t_step > lattice.n_steps())
        throw std::invalid_argument("check_l2_continuity: t_step out of range");
    const PenaltySchedule sched =
        clamp_to_monotone(schedule, g, phi, lattice);
    const auto sequence = make_claim_sequence(
        base, SequenceScheme::perturbation(seed), halvings, lattice);

    const auto runs_base = run_penalty_ladder(g, phi, base, lattice, sched);
    const AdaptedField& y_base = detail::limit_y(runs_base);
    const AdaptedField base_leaves = base.leaves(lattice);

    PropertyReport report;
    report.property_name = "l2_continuity";
    report.tolerance = 0.0;
    report.instances_tested = halvings;

    std::vector<double> d(static_cast<std::size_t>(halvings));
    double kappa = 0.0;
    double sandwich_viol = 0.0;
    for (int n = 0; n < halvings; ++n) {
        const Claim& xi_n = sequence[static_cast<std::size_t>(n)];
        const auto runs_n = run_penalty_ladder(g, phi, xi_n, lattice, sched);
        d[static_cast<std::size_t>(n)] =
            detail::l2_gap(detail::limit_y(runs_n), y_base, t_step);
        const double dist = detail::l2_gap(xi_n.leaves(lattice), base_leaves,
                                           lattice.n_steps());
        if (dist > 0.0)
            kappa = std::max(kappa, d[static_cast<std::size_t>(n)] / dist);

        const Claim lower = Claim::pointwise_min(xi_n, base);
        const Claim upper = Claim::pointwise_max(xi_n, base);
        const auto runs_lo = run_penalty_ladder(g, phi, lower, lattice, sched);
        const auto runs_hi = run_penalty_ladder(g, phi, upper, lattice, sched);
        for (std::size_t j = 0; j < runs_n.size(); ++j) {
            sandwich_viol = std::max(
                sandwich_viol,
                detail::max_field_excess(runs_lo[j].solution.y,
                                         runs_n[j].solution.y).value);
            sandwich_viol = std::max(
                sandwich_viol,
                detail::max_field_excess(runs_n[j].solution.y,
                                         runs_hi[j].solution.y).value);
        }
        report.trace.push_back(
            {"n=" + std::to_string(n + 1) + " ||xi_n-xi||=" +
                 detail::format_double(dist),
             d[static_cast<std::size_t>(n)]});
    }
    sandwich_viol = std::max(sandwich_viol, 0.0);

    double decrease_excess = -std::numeric_limits<double>::infinity();
    for (int n = 1; n < halvings; ++n)
        decrease_excess = std::max(decrease_excess,
                                   d[static_cast<std::size_t>(n)] -
                                       d[static_cast<std::size_t>(n) - 1]);
    const double final_excess = d.back() - budget;
    const double sandwich_excess = sandwich_viol - kComparisonTol;

    report.max_violation =
        std::max({decrease_excess, final_excess, sandwich_excess});
    report.worst_instance =
        report.max_violation == sandwich_excess ? "sandwich inequality"
        : report.max_violation == final_excess  ? "final distance vs budget"
                                                : "monotone decrease of d_n";
    report.metrics.emplace_back("d_final", d.back());
    report.metrics.emplace_back("kappa", kappa);
    report.metrics.emplace_back("sandwich_violation", sandwich_viol);
    report.finalize();
    return report;
}

// ---------------------------------------------------------------------------
// Continuity from below at an interior step
// ---------------------------------------------------------------------------

inline PropertyReport check_from_below(const Generator& g,
                                       const Constraint& phi,
                                       const Claim& base,
                                       const Lattice& lattice, int t_step,
                                       int count,
                                       const PenaltySchedule& schedule = {},
                                       double budget = kFatouBudget) {
    if (count < 1)
        throw std::invalid_argument("check_from_below: count must be >= 1");
    if (t_step < 0 || t_step > lattice.n_steps())
        throw std::invalid_argument("check_from_below: t_step out of range");
    const auto sequence = make_claim_sequence(base, SequenceScheme::shift(),
                                              count, lattice);
    for (const auto& xi_n : sequence)
        detail::require_leafwise_order(xi_n, base, lattice,
                                       "check_from_below (not below limit)");

    const PenaltySchedule sched =
        clamp_to_monotone(schedule, g, phi, lattice);
    const auto runs_base = run_penalty_ladder(g, phi, base, lattice, sched);
    const AdaptedField& y_base = detail::limit_y(runs_base);

    PropertyReport report;
    report.property_name = "from_below";
    report.tolerance = 0.0;
    report.instances_tested = count;

    std::vector<double> d(static_cast<std::size_t>(count));
    double below_viol = 0.0;
    for (int n = 0; n < count; ++n) {
        const auto runs_n = run_penalty_ladder(
            g, phi, sequence[static_cast<std::size_t>(n)], lattice, sched);
        d[static_cast<std::size_t>(n)] =
            detail::l2_gap(detail::limit_y(runs_n), y_base, t_step);
        for (std::size_t j = 0; j < runs_n.size(); ++j)
            below_viol = std::max(
                below_viol,
                detail::max_field_excess(runs_n[j].solution.y,
                                         runs_base[j].solution.y).value);
        report.trace.push_back({"n=" + std::to_string(n + 1),
                                d[static_cast<std::size_t>(n)]});
    }
    below_viol = std::max(below_viol, 0.0);

    double decrease_viol = 0.0;
    for (int n = 1; n < count; ++n)
        decrease_viol = std::max(decrease_viol,
                                 d[static_cast<std::size_t>(n)] -
                                     d[static_cast<std::size_t>(n) - 1]);

    const double below_excess = below_viol - kComparisonTol;
    const double final_excess = d.back() - budget;
    const double decrease_excess = decrease_viol - kMonotoneTol;
    report.max_violation =
        std::max({below_excess, final_excess, decrease_excess});
    report.worst_instance =
        report.max_violation == below_excess ? "node-wise order vs limit"
        : report.max_violation == final_excess ? "final distance vs budget"
                                               : "monotone decrease of d_n";
    report.metrics.emplace_back("d_final", d.back());
    report.metrics.emplace_back("below_violation", below_viol);
    report.finalize();
    return report;
}

// ---------------------------------------------------------------------------
// Induced convex risk measure rho(xi) = E_0(-xi)
// ---------------------------------------------------------------------------

namespace detail {

inline void require_risk_flags(const Generator& g, const Constraint& phi) {
    if (!g.vanishes_at_zero())
        throw std::invalid_argument("risk_measure: generator must satisfy "
                                    "g(.,.,0) = 0");
    if (!g.independent_of_y() || !phi.independent_of_y())
        throw std::invalid_argument("risk_measure: generator and constraint "
                                    "must be independent of y");
    if (!g.convex() || !phi.convex())
        throw std::invalid_argument("risk_measure: generator and constraint "
                                    "must be convex");
}

}  // namespace detail

inline double risk_measure(const Generator& g, const Constraint& phi,
                           const Claim& xi, const Lattice& lattice,
                           const PenaltySchedule& schedule = {}) {
    detail::require_risk_flags(g, phi);
    const PenaltySchedule sched =
        clamp_to_monotone(schedule, g, phi, lattice);
    return run_penalty_ladder(g, phi, xi.negated(), lattice, sched)
        .back()
        .y0();
}

/**
 * Axiom audit over seeded claims: monotone (xi <= eta => rho(xi) >=
 * rho(eta)), convex, cash-invariant, each within 1e-9; plus the
 * decreasing-limit (Fatou) check for rho along a shift sequence.
 */
inline PropertyReport risk_audit(const Generator& g, const Constraint& phi,
                                 const Lattice& lattice, int count,
                                 std::uint64_t seed,
                                 const PenaltySchedule& schedule = {},
                                 int fatou_count = 100,
                                 double fatou_budget = kFatouBudget) {
    detail::require_risk_flags(g, phi);
    if (count < 1)
        throw std::invalid_argument("risk_audit: count must be >= 1");
    Rng rng(seed);
    const PenaltySchedule sched =
        clamp_to_monotone(schedule, g, phi, lattice);
    auto rho = [&](const Claim& claim) {
        return run_penalty_ladder(g, phi, claim.negated(), lattice, sched)
            .back()
            .y0();
    };

    PropertyReport report;
    report.property_name = "risk_measure_axioms";
    report.tolerance = 0.0;
    report.instances_tested = count;

    double mono_viol = 0.0, convex_viol = 0.0, cash_viol = 0.0;
    for (int k = 0; k < count; ++k) {
        const Claim xi = random_table(lattice, rng);
        const Claim eta =
            add_scaled(xi, detail::random_nonneg_table(lattice, rng), 1.0);
        const double a = rng.uniform01();
        const double cash = rng.uniform(-1.0, 1.0);

        const double rho_xi = rho(xi);
        const double rho_eta = rho(eta);
        const double rho_mix = rho(Claim::mix(a, xi, eta));
        const double rho_shift = rho(xi.shifted(cash));

        const double v_mono = rho_eta - rho_xi;  // want rho(eta) <= rho(xi)
        const double v_convex = rho_mix - a * rho_xi - (1.0 - a) * rho_eta;
        const double v_cash = std::abs(rho_shift - (rho_xi - cash));
        mono_viol = std::max(mono_viol, v_mono);
        convex_viol = std::max(convex_viol, v_convex);
        cash_viol = std::max(cash_viol, v_cash);
        report.trace.push_back(
            {"claim " + std::to_string(k),
             std::max({v_mono, v_convex, v_cash, 0.0})});
    }
    mono_viol = std::max(mono_viol, 0.0);
    convex_viol = std::max(convex_viol, 0.0);

    // Fatou property of rho: xi_n increasing to xi forces rho(xi_n)
    // decreasing to rho(xi).
    Rng fatou_rng(seed + 1);
    const Claim fatou_base = random_table(lattice, fatou_rng);
    const auto seq = make_claim_sequence(fatou_base, SequenceScheme::shift(),
                                         fatou_count, lattice);
    const double rho_base = rho(fatou_base);
    double fatou_mono_viol = 0.0;
    double prev = std::numeric_limits<double>::infinity();
    for (const auto& xi_n : seq) {
        const double r = rho(xi_n);
        if (prev < std::numeric_limits<double>::infinity())
            fatou_mono_viol = std::max(fatou_mono_viol, r - prev);
        prev = r;
    }
    const double fatou_gap = std::abs(prev - rho_base);

    const double axiom_excess =
        std::max({mono_viol, convex_viol, cash_viol}) - kComparisonTol;
    const double fatou_mono_excess = fatou_mono_viol - kMonotoneTol;
    const double fatou_gap_excess = fatou_gap - fatou_budget;
    report.max_violation =
        std::max({axiom_excess, fatou_mono_excess, fatou_gap_excess});
    report.worst_instance =
        report.max_violation == axiom_excess ? "axiom inequalities"
        : report.max_violation == fatou_mono_excess
            ? "rho monotone along shift sequence"
            : "rho limit vs budget";
    report.metrics.emplace_back("monotonicity_violation", mono_viol);
    report.metrics.emplace_back("convexity_violation", convex_viol);
    report.metrics.emplace_back("cash_invariance_violation", cash_viol);
    report.metrics.emplace_back("fatou_monotone_violation",
                                std::max(fatou_mono_viol, 0.0));
    report.metrics.emplace_back("fatou_gap", fatou_gap);
    report.finalize();
    return report;
}

}  // namespace cbsde

#endif  // CBSDE_PROPERTIES_HPP
