#ifndef CBSDE_BSDE_HPP
#define CBSDE_BSDE_HPP

/**
 * @file bsde.hpp
 * @brief Backward solver on the lattice and the supersolution record.
 *
 * One backward step at node x with children values (u, d):
 *
 *   z = (u - d) / (2 sqrt(dt))            (exact two-point coefficient)
 *   y = (u + d)/2 + f(t, y, z) dt          (implicit in y, explicit in z)
 *
 * The implicit equation is solved by Picard iteration when the driver's
 * y-slope times dt is a safe contraction, and by monotone bisection
 * otherwise.  Bisection is valid because h(y) = y - target - dt f(y) is
 * strictly increasing for every driver this library produces: catalog
 * generators satisfy lipschitz_y * dt < 1 (checked at entry) and penalty
 * terms m * phi are non-increasing in y, which only steepens h.
 */

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

#include "cbsde/lattice.hpp"
#include "cbsde/model.hpp"

namespace cbsde {

class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Implicit stepping needs the generator's y-part to be a contraction.
class ContractionError : public SolverError {
public:
    using SolverError::SolverError;
};

namespace detail {

constexpr int kPicardMaxIters = 100;
constexpr double kPicardTol = 1e-14;

/**
 * Solve y = target + dt * f(y) for the unique root.
 * y_slope_bound bounds |df/dy| including any penalty term; it selects the
 * method and scales the residual acceptance threshold.
 */
template <class F>
double solve_implicit_node(double target, double dt, F&& f,
                           double y_slope_bound, const char* what) {
    double y = std::numeric_limits<double>::quiet_NaN();
    bool solved = false;

    if (dt * y_slope_bound <= 0.5) {
        double cur = target;
        for (int it = 0; it < kPicardMaxIters; ++it) {
            const double next = target + dt * f(cur);
            if (std::abs(next - cur) <= kPicardTol) {
                y = next;
                solved = true;
                break;
            }
            cur = next;
        }
    }

    if (!solved) {
        auto h = [&](double v) { return v - target - dt * f(v); };
        double lo = target, hi = target;
        double hlo = h(lo), hhi = hlo;
        double radius = std::max(1.0, std::abs(target));
        for (int it = 0; hlo > 0.0; ++it) {
            if (it >= 200)
                throw SolverError(std::string(what) +
                                  ": implicit node solve found no lower "
                                  "bracket");
            lo -= radius;
            radius *= 2.0;
            hlo = h(lo);
        }
        radius = std::max(1.0, std::abs(target));
        for (int it = 0; hhi < 0.0; ++it) {
            if (it >= 200)
                throw SolverError(std::string(what) +
                                  ": implicit node solve found no upper "
                                  "bracket");
            hi += radius;
            radius *= 2.0;
            hhi = h(hi);
        }
        for (int it = 0; it < 300; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (mid == lo || mid == hi) break;
            if (h(mid) < 0.0)
                lo = mid;
            else
                hi = mid;
        }
        y = std::abs(h(lo)) <= std::abs(h(hi)) ? lo : hi;
    }

    const double residual = std::abs(y - target - dt * f(y));
    const double eps = std::numeric_limits<double>::epsilon();
    const double accept =
        std::max(1e-13, 8.0 * (1.0 + dt * y_slope_bound) * eps *
                            std::max(1.0, std::abs(y)));
    if (!(residual <= accept))
        throw SolverError(std::string(what) +
                          ": implicit node solve residual " +
                          std::to_string(residual) + " above tolerance");
    return y;
}

}  // namespace detail

/// Adapted pair solving the unconstrained backward equation.
struct Solution {
    AdaptedField y;  // steps 0..n
    AdaptedField z;  // steps 0..n-1
};

/// Adapted triple (y, z, dC).  c_increments holds the per-step growth of
/// the increasing part; the cumulative process starts at C_0 = 0.
struct Supersolution {
    AdaptedField y;             // steps 0..n
    AdaptedField z;             // steps 0..n-1
    AdaptedField c_increments;  // steps 0..n-1
};

namespace detail {

/**
 * Generic backward induction.  Driver: double(step, node, y, z).
 * y_slope_bound must bound the driver's y-slope at every node.
 */
template <class Driver>
Solution solve_backward(const Lattice& lattice, const AdaptedField& terminal,
                        Driver&& driver, double y_slope_bound,
                        const char* what) {
    const int n = lattice.n_steps();
    const double dt = lattice.dt();
    const double inv_2s = 1.0 / (2.0 * lattice.sqrt_dt());

    Solution sol{AdaptedField(lattice, 0, n), AdaptedField(lattice, 0, n - 1)};
    {
        auto dst = sol.y.step_values(n);
        const auto src = terminal.step_values(n);
        for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = src[k];
    }
    for (int i = n - 1; i >= 0; --i) {
        const auto next = sol.y.step_values(i + 1);
        auto yrow = sol.y.step_values(i);
        auto zrow = sol.z.step_values(i);
        const std::size_t count = lattice.nodes_at(i);
        for (std::size_t node = 0; node < count; ++node) {
            const double up = next[lattice.up_child(i, node)];
            const double down = next[lattice.down_child(i, node)];
            const double zi = (up - down) * inv_2s;
            const double target = 0.5 * up + 0.5 * down;
            yrow[node] = detail::solve_implicit_node(
                target, dt,
                [&](double yy) { return driver(i, node, yy, zi); },
                y_slope_bound, what);
            zrow[node] = zi;
        }
    }
    return sol;
}

inline void require_generator_contraction(const Generator& g,
                                          const Lattice& lattice,
                                          const char* what) {
    const double m_dt = g.lipschitz_y() * lattice.dt();
    if (m_dt >= 1.0)
        throw ContractionError(
            std::string(what) + ": generator y-Lipschitz * dt = " +
            std::to_string(m_dt) + " >= 1; refine the grid");
}

}  // namespace detail

/// Backward solve of the unconstrained equation with terminal value xi.
inline Solution solve_bsde(const Generator& g, const Claim& xi,
                           const Lattice& lattice) {
    detail::require_generator_contraction(g, lattice, "solve_bsde");
    return detail::solve_backward(
        lattice, xi.leaves(lattice),
        [&](int step, std::size_t, double y, double z) {
            return g(lattice.time_at(step), y, z);
        },
        g.lipschitz_y(), "solve_bsde");
}

/// View a plain solution as a supersolution with dC = 0.
inline Supersolution as_supersolution(const Solution& s) {
    const Lattice& lattice = s.y.lattice();
    Supersolution out{s.y, s.z,
                      AdaptedField(lattice, 0, lattice.n_steps() - 1)};
    return out;
}

/**
 * Worst-case defect of the one-step supersolution identity
 *   y_i = y_{i+1} + g(t_i, y_i, z_i) dt + dC_i - z_i dW
 * over all nodes and both children.
 */
inline double residual_check(const Supersolution& s, const Generator& g,
                             const Lattice& lattice) {
    const int n = lattice.n_steps();
    const double dt = lattice.dt();
    const double sdt = lattice.sqrt_dt();
    double worst = 0.0;
    for (int i = 0; i < n; ++i) {
        const auto yrow = s.y.step_values(i);
        const auto next = s.y.step_values(i + 1);
        const auto zrow = s.z.step_values(i);
        const auto crow = s.c_increments.step_values(i);
        const double t = lattice.time_at(i);
        const std::size_t count = lattice.nodes_at(i);
        for (std::size_t node = 0; node < count; ++node) {
            const double gdt = g(t, yrow[node], zrow[node]) * dt;
            const double up = next[lattice.up_child(i, node)];
            const double down = next[lattice.down_child(i, node)];
            const double res_up =
                yrow[node] - up - gdt - crow[node] + zrow[node] * sdt;
            const double res_down =
                yrow[node] - down - gdt - crow[node] - zrow[node] * sdt;
            worst = std::max(worst,
                             std::max(std::abs(res_up), std::abs(res_down)));
        }
    }
    return worst;
}

/// Smallest increment of the increasing part (for monotonicity audits).
inline double min_c_increment(const Supersolution& s) {
    const Lattice& lattice = s.y.lattice();
    double lowest = std::numeric_limits<double>::infinity();
    for (int i = 0; i < lattice.n_steps(); ++i)
        for (double v : s.c_increments.step_values(i))
            lowest = std::min(lowest, v);
    return lowest;
}

}  // namespace cbsde

#endif  // CBSDE_BSDE_HPP
