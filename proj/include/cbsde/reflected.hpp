#ifndef CBSDE_REFLECTED_HPP
#define CBSDE_REFLECTED_HPP

/**
 * @file reflected.hpp
 * @brief Dynamic-programming oracle for the lower-reflected equation.
 *
 * Discrete Snell-envelope treatment: take the implicit generator step,
 * then project onto { y >= S }.  The recorded increment dC closes the
 * supersolution identity exactly at the projected value, so the output
 * passes residual_check for the bare generator and satisfies
 * complementarity (y - S) dC = 0 node-wise.
 *
 * This solver is the independent cross-check for the penalization route
 * with constraint (y - S)^-; the two must agree in the large-m limit.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

#include "cbsde/bsde.hpp"
#include "cbsde/lattice.hpp"
#include "cbsde/model.hpp"

namespace cbsde {

class TerminalConsistencyError : public SolverError {
public:
    using SolverError::SolverError;
};

inline Supersolution solve_reflected(const Generator& g, const Barrier& barrier,
                                     const Claim& xi, const Lattice& lattice) {
    detail::require_generator_contraction(g, lattice, "solve_reflected");

    const int n = lattice.n_steps();
    const double dt = lattice.dt();
    const double inv_2s = 1.0 / (2.0 * lattice.sqrt_dt());

    AdaptedField terminal = xi.leaves(lattice);
    {
        const auto leaves = terminal.step_values(n);
        for (std::size_t k = 0; k < leaves.size(); ++k) {
            const double s = barrier.value(lattice, n, k);
            if (leaves[k] < s)
                throw TerminalConsistencyError(
                    "solve_reflected: claim value " +
                    std::to_string(leaves[k]) + " below barrier " +
                    std::to_string(s) + " at terminal node " +
                    std::to_string(k));
        }
    }

    Supersolution out{AdaptedField(lattice, 0, n),
                      AdaptedField(lattice, 0, n - 1),
                      AdaptedField(lattice, 0, n - 1)};
    {
        auto dst = out.y.step_values(n);
        const auto src = terminal.step_values(n);
        for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = src[k];
    }

    for (int i = n - 1; i >= 0; --i) {
        const auto next = out.y.step_values(i + 1);
        auto yrow = out.y.step_values(i);
        auto zrow = out.z.step_values(i);
        auto crow = out.c_increments.step_values(i);
        const double t = lattice.time_at(i);
        const std::size_t count = lattice.nodes_at(i);
        for (std::size_t node = 0; node < count; ++node) {
            const double up = next[lattice.up_child(i, node)];
            const double down = next[lattice.down_child(i, node)];
            const double zi = (up - down) * inv_2s;
            const double target = 0.5 * up + 0.5 * down;
            const double unconstrained = detail::solve_implicit_node(
                target, dt, [&](double yy) { return g(t, yy, zi); },
                g.lipschitz_y(), "solve_reflected");
            const double s = barrier.value(lattice, i, node);
            if (unconstrained >= s) {
                yrow[node] = unconstrained;
                crow[node] = 0.0;
            } else {
                // Projection binds: dC closes the identity at the barrier
                // value itself, so residual_check sees an exact step.
                yrow[node] = s;
                crow[node] = s - target - g(t, s, zi) * dt;
            }
            zrow[node] = zi;
        }
    }
    return out;
}

}  // namespace cbsde

#endif  // CBSDE_REFLECTED_HPP
