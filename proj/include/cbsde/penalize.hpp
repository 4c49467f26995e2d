#ifndef CBSDE_PENALIZE_HPP
#define CBSDE_PENALIZE_HPP

/**
 * @file penalize.hpp
 * @brief Penalized equations g + m*phi and their monotone limit.
 *
 * The minimal constrained supersolution is approached from below by
 * solving the unconstrained equation with driver g + m*phi along a
 * geometric schedule of penalty levels m.  The per-level solutions are
 * node-wise non-decreasing in m; the Cauchy gap |y_0^{2m} - y_0^{m}|
 * serves as the convergence proxy, and a finite run decides domain
 * membership operationally (converged / diverged).
 */

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "cbsde/bsde.hpp"
#include "cbsde/lattice.hpp"
#include "cbsde/model.hpp"

namespace cbsde {

/// Geometric penalty ladder m0, m0*g, m0*g^2, ... <= m_max.
struct PenaltySchedule {
    double m0 = 1.0;
    double growth = 2.0;
    double m_max = 65536.0;  // 2^16

    void validate() const {
        if (!(m0 > 0.0))
            throw std::invalid_argument("schedule: m0 must be positive");
        if (!(growth > 1.0))
            throw std::invalid_argument("schedule: growth must exceed 1");
        if (!(m_max >= m0))
            throw std::invalid_argument("schedule: m_max must be >= m0");
    }

    std::vector<double> levels() const {
        validate();
        std::vector<double> out;
        for (double m = m0; m <= m_max * (1.0 + 1e-12); m *= growth)
            out.push_back(m);
        return out;
    }
};

/// One penalized solve: the solution for driver g + m*phi together with
/// the increments dA = m * phi(t, y, z) dt of the candidate increasing part.
struct PenalizedRun {
    double m = 0.0;
    Solution solution;
    AdaptedField a_increments;  // steps 0..n-1

    double y0() const { return solution.y.value(0, 0); }
};

enum class DomainStatus { converged, diverged };

struct GapEntry {
    double m = 0.0;
    double y0 = 0.0;
    double gap = std::numeric_limits<double>::quiet_NaN();  // vs previous m
};

struct MinimalSolutionResult {
    std::vector<PenalizedRun> runs;
    AdaptedField limit_y;              // y field of the final run
    Supersolution limit_supersolution; // final run lifted for generator g
    DomainStatus domain_status = DomainStatus::diverged;
    std::vector<GapEntry> gap_trace;

    double y0() const { return limit_y.value(0, 0); }
};

/// Solve the unconstrained equation with driver g + m*phi.
inline PenalizedRun solve_penalized(const Generator& g, const Constraint& phi,
                                    double m, const Claim& xi,
                                    const Lattice& lattice) {
    if (!(m >= 0.0))
        throw std::invalid_argument("solve_penalized: m must be >= 0");
    detail::require_generator_contraction(g, lattice, "solve_penalized");

    const double dt = lattice.dt();
    const double slope = g.lipschitz_y() + m * phi.lipschitz_y();
    Solution sol = detail::solve_backward(
        lattice, xi.leaves(lattice),
        [&](int step, std::size_t node, double y, double z) {
            const double t = lattice.time_at(step);
            return g(t, y, z) + m * phi.value(t, y, z, lattice, step, node);
        },
        slope, "solve_penalized");

    AdaptedField da(lattice, 0, lattice.n_steps() - 1);
    for (int i = 0; i < lattice.n_steps(); ++i) {
        const auto yrow = sol.y.step_values(i);
        const auto zrow = sol.z.step_values(i);
        auto arow = da.step_values(i);
        const double t = lattice.time_at(i);
        for (std::size_t node = 0; node < yrow.size(); ++node)
            arow[node] =
                m * phi.value(t, yrow[node], zrow[node], lattice, i, node) * dt;
    }
    return PenalizedRun{m, std::move(sol), std::move(da)};
}

/// Lift a penalized run into a supersolution for the bare generator g.
inline Supersolution as_supersolution(const PenalizedRun& run) {
    return Supersolution{run.solution.y, run.solution.z, run.a_increments};
}

/**
 * Fixed full ladder of penalized solves (no early stopping).  The theorem
 * harness uses this so that every compared instance shares m-levels.
 */
inline std::vector<PenalizedRun> run_penalty_ladder(const Generator& g,
                                                    const Constraint& phi,
                                                    const Claim& xi,
                                                    const Lattice& lattice,
                                                    const PenaltySchedule& schedule) {
    std::vector<PenalizedRun> runs;
    for (double m : schedule.levels())
        runs.push_back(solve_penalized(g, phi, m, xi, lattice));
    return runs;
}

/**
 * Penalization limit with the operational domain-membership verdict.
 *
 * Stops converged when the y_0 gap between consecutive levels drops to
 * tol_m; stops diverged when y_0 exceeds y_max, or when the schedule is
 * exhausted with a non-shrinking gap (last gap > 0.9 x previous gap).
 */
inline MinimalSolutionResult solve_minimal(
    const Generator& g, const Constraint& phi, const Claim& xi,
    const Lattice& lattice, const PenaltySchedule& schedule = {},
    double tol_m = 1e-4, double y_max = 1e6) {
    schedule.validate();
    if (!(tol_m >= 0.0))
        throw std::invalid_argument("solve_minimal: tol_m must be >= 0");

    MinimalSolutionResult result;
    double prev_y0 = 0.0;
    double prev_gap = std::numeric_limits<double>::quiet_NaN();
    bool decided = false;

    for (double m = schedule.m0;; m *= schedule.growth) {
        PenalizedRun run = solve_penalized(g, phi, m, xi, lattice);
        const double y0 = run.y0();
        GapEntry entry;
        entry.m = m;
        entry.y0 = y0;
        if (!result.runs.empty()) entry.gap = std::abs(y0 - prev_y0);
        result.runs.push_back(std::move(run));
        result.gap_trace.push_back(entry);

        if (y0 > y_max) {
            result.domain_status = DomainStatus::diverged;
            decided = true;
            break;
        }
        if (result.runs.size() >= 2 && entry.gap <= tol_m) {
            result.domain_status = DomainStatus::converged;
            decided = true;
            break;
        }
        if (m * schedule.growth > schedule.m_max * (1.0 + 1e-12)) break;
        prev_gap = entry.gap;
        prev_y0 = y0;
    }

    if (!decided) {
        // Schedule exhausted above tolerance: diverged iff the gap stopped
        // shrinking; a single level yields no gap evidence and counts as
        // converged.
        const GapEntry& last = result.gap_trace.back();
        const bool non_shrinking = result.gap_trace.size() >= 3 &&
                                   !std::isnan(prev_gap) &&
                                   last.gap > 0.9 * prev_gap;
        const bool single_gap_large =
            result.gap_trace.size() == 2 && last.gap > tol_m;
        result.domain_status = (non_shrinking || single_gap_large)
                                   ? DomainStatus::diverged
                                   : DomainStatus::converged;
    }

    result.limit_y = result.runs.back().solution.y;
    result.limit_supersolution = as_supersolution(result.runs.back());
    return result;
}

/**
 * Cumulative increasing part A along every path, A = 0 at the root step.
 * Path sums are only node-addressable on a full tree; a recombining
 * lattice folds distinct histories into one node.
 */
inline AdaptedField extract_increasing_part(const PenalizedRun& run) {
    const Lattice& lattice = run.a_increments.lattice();
    if (lattice.mode() != LatticeMode::full_tree)
        throw std::invalid_argument(
            "extract_increasing_part: cumulative A is path-dependent; "
            "use a full_tree lattice");
    const int n = lattice.n_steps();
    AdaptedField cum(lattice, 0, n);
    for (int i = 0; i < n; ++i) {
        const auto arow = run.a_increments.step_values(i);
        const auto cur = cum.step_values(i);
        auto next = cum.step_values(i + 1);
        for (std::size_t node = 0; node < cur.size(); ++node) {
            const double grown = cur[node] + arow[node];
            next[lattice.up_child(i, node)] = grown;
            next[lattice.down_child(i, node)] = grown;
        }
    }
    return cum;
}

/**
 * Largest penalty level for which the backward step stays monotone
 * (node-wise comparison holds).  The explicit-in-z step is monotone when
 * (M_z(g) + m M_z(phi)) sqrt(dt) <= 1; z-independent constraints impose
 * no cap.
 */
inline double monotone_m_cap(const Generator& g, const Constraint& phi,
                             const Lattice& lattice) {
    if (phi.lipschitz_z() == 0.0)
        return std::numeric_limits<double>::infinity();
    const double budget = 1.0 / lattice.sqrt_dt() - g.lipschitz_z();
    return std::max(budget, 0.0) / phi.lipschitz_z();
}

/// Clamp a schedule to the monotone regime of (g, phi) on the lattice.
inline PenaltySchedule clamp_to_monotone(const PenaltySchedule& schedule,
                                         const Generator& g,
                                         const Constraint& phi,
                                         const Lattice& lattice) {
    const double cap = monotone_m_cap(g, phi, lattice);
    if (schedule.m_max <= cap) return schedule;
    PenaltySchedule out = schedule;
    out.m_max = cap;
    if (out.m0 > out.m_max)
        throw std::invalid_argument(
            "schedule: monotone penalty cap " + std::to_string(cap) +
            " is below m0; refine the grid");
    return out;
}

}  // namespace cbsde

#endif  // CBSDE_PENALIZE_HPP
