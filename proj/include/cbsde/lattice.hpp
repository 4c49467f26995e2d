#ifndef CBSDE_LATTICE_HPP
#define CBSDE_LATTICE_HPP

/**
 * @file lattice.hpp
 * @brief Exact discrete model of a Brownian filtration.
 *
 * A Bernoulli lattice: at each step the increment is +sqrt(dt) or
 * -sqrt(dt) with probability 1/2.  Conditional expectations are exact
 * two-point averages, so every downstream inequality check measures
 * scheme error only, never sampling noise.
 *
 * Two addressing modes:
 *  - recombining: node = (step i, up-count k), 0 <= k <= i.  O(n^2) nodes.
 *    Values must be functions of the running Brownian level.
 *  - full_tree: node = (step i, path bits), bit j set = up-move at step j.
 *    O(2^n) nodes, arbitrary path-dependent data, capped at n = 24.
 */

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cbsde {

enum class LatticeMode { recombining, full_tree };

/// Uniform partition of [0, horizon] into n_steps intervals.
struct TimeGrid {
    double horizon = 1.0;
    int n_steps = 1;
    double dt = 1.0;
};

class Lattice {
public:
    Lattice(double horizon, int n_steps, LatticeMode mode)
        : mode_(mode) {
        if (!(horizon > 0.0))
            throw std::invalid_argument("lattice: horizon must be positive");
        if (n_steps < 1)
            throw std::invalid_argument("lattice: n_steps must be >= 1");
        if (mode == LatticeMode::full_tree && n_steps > 24)
            throw std::invalid_argument(
                "lattice: full_tree mode rejects n_steps > 24");
        grid_.horizon = horizon;
        grid_.n_steps = n_steps;
        grid_.dt = horizon / n_steps;
        sqrt_dt_ = std::sqrt(grid_.dt);
        if (mode == LatticeMode::recombining) {
            // Node probabilities by forward mass splitting; halving is exact,
            // so each step preserves total mass to within an ulp per add.
            probs_.resize(static_cast<std::size_t>(n_steps) + 1);
            probs_[0] = {1.0};
            for (int i = 0; i < n_steps; ++i) {
                const auto& p = probs_[static_cast<std::size_t>(i)];
                std::vector<double> q(static_cast<std::size_t>(i) + 2, 0.0);
                for (std::size_t k = 0; k <= static_cast<std::size_t>(i); ++k) {
                    q[k] += 0.5 * p[k];
                    q[k + 1] += 0.5 * p[k];
                }
                probs_[static_cast<std::size_t>(i) + 1] = std::move(q);
            }
        }
    }

    const TimeGrid& grid() const { return grid_; }
    LatticeMode mode() const { return mode_; }
    int n_steps() const { return grid_.n_steps; }
    double horizon() const { return grid_.horizon; }
    double dt() const { return grid_.dt; }
    double sqrt_dt() const { return sqrt_dt_; }
    double time_at(int step) const { return step * grid_.dt; }

    /// Nodes at a given step: i+1 (recombining) or 2^i (full tree).
    std::size_t nodes_at(int step) const {
        check_step(step);
        if (mode_ == LatticeMode::recombining)
            return static_cast<std::size_t>(step) + 1;
        return std::size_t{1} << step;
    }

    /// Total node count over all steps.
    std::size_t node_count() const {
        const auto n = static_cast<std::size_t>(grid_.n_steps);
        if (mode_ == LatticeMode::recombining)
            return (n + 1) * (n + 2) / 2;
        return (std::size_t{2} << n) - 1;  // 2^{n+1} - 1
    }

    /// Brownian level at a node; the root has W = 0.
    double w_value(int step, std::size_t node) const {
        check_node(step, node);
        if (mode_ == LatticeMode::recombining)
            return (2.0 * static_cast<double>(node) - step) * sqrt_dt_;
        const int ups = popcount(node);
        return (2.0 * ups - step) * sqrt_dt_;
    }

    std::size_t up_child(int step, std::size_t node) const {
        check_node(step, node);
        if (mode_ == LatticeMode::recombining) return node + 1;
        return node | (std::size_t{1} << step);
    }

    std::size_t down_child(int step, std::size_t node) const {
        check_node(step, node);
        return node;
    }

    /// P(node) at a step: binomial weight or 2^{-step}.
    double probability(int step, std::size_t node) const {
        check_node(step, node);
        if (mode_ == LatticeMode::recombining)
            return probs_[static_cast<std::size_t>(step)][node];
        return std::ldexp(1.0, -step);
    }

private:
    static int popcount(std::size_t v) {
        int c = 0;
        for (; v; v >>= 1) c += static_cast<int>(v & 1);
        return c;
    }

    void check_step(int step) const {
        if (step < 0 || step > grid_.n_steps)
            throw std::out_of_range("lattice: step " + std::to_string(step) +
                                    " outside [0, " +
                                    std::to_string(grid_.n_steps) + "]");
    }
    void check_node(int step, std::size_t node) const {
        check_step(step);
        if (node >= nodes_at(step))
            throw std::out_of_range("lattice: node index out of range");
    }

    TimeGrid grid_;
    LatticeMode mode_;
    double sqrt_dt_ = 1.0;
    std::vector<std::vector<double>> probs_;  // recombining only
};

inline Lattice build_lattice(double horizon, int n_steps, LatticeMode mode) {
    return Lattice(horizon, n_steps, mode);
}

/**
 * Real-valued process adapted to the lattice filtration: one value per
 * node for every covered step.  The field keeps a non-owning pointer to
 * the lattice it was built on; keep the lattice alive while fields exist.
 */
class AdaptedField {
public:
    AdaptedField() = default;

    AdaptedField(const Lattice& lattice, int first_step, int last_step)
        : lattice_(&lattice), first_step_(first_step), last_step_(last_step) {
        if (first_step < 0 || last_step > lattice.n_steps() ||
            first_step > last_step)
            throw std::invalid_argument("field: invalid step range");
        rows_.reserve(static_cast<std::size_t>(last_step - first_step) + 1);
        for (int s = first_step; s <= last_step; ++s)
            rows_.emplace_back(lattice.nodes_at(s), 0.0);
    }

    /// Single-step field initialised from a value vector.
    AdaptedField(const Lattice& lattice, int step, std::vector<double> values)
        : lattice_(&lattice), first_step_(step), last_step_(step) {
        if (values.size() != lattice.nodes_at(step))
            throw std::invalid_argument(
                "field: value count does not match node count");
        rows_.push_back(std::move(values));
    }

    const Lattice& lattice() const {
        if (!lattice_) throw std::logic_error("field: empty");
        return *lattice_;
    }
    int first_step() const { return first_step_; }
    int last_step() const { return last_step_; }
    bool covers(int step) const {
        return lattice_ && step >= first_step_ && step <= last_step_;
    }

    double value(int step, std::size_t node) const {
        return row(step)[node];
    }
    double& value(int step, std::size_t node) {
        return const_cast<double&>(
            static_cast<const AdaptedField*>(this)->row(step)[node]);
    }

    std::span<const double> step_values(int step) const { return row(step); }
    std::span<double> step_values(int step) {
        auto r = static_cast<const AdaptedField*>(this)->row(step);
        return {const_cast<double*>(r.data()), r.size()};
    }

private:
    std::span<const double> row(int step) const {
        if (!covers(step))
            throw std::out_of_range("field: step " + std::to_string(step) +
                                    " not covered");
        return rows_[static_cast<std::size_t>(step - first_step_)];
    }

    const Lattice* lattice_ = nullptr;
    int first_step_ = 0;
    int last_step_ = 0;
    std::vector<std::vector<double>> rows_;
};

/// E[field | F_{step-1}]: the two-point average over the children.
inline AdaptedField conditional_expectation(const AdaptedField& field,
                                            int step) {
    const Lattice& lat = field.lattice();
    if (step < 1 || !field.covers(step))
        throw std::invalid_argument("conditional_expectation: need a covered "
                                    "step >= 1");
    AdaptedField out(lat, step - 1, step - 1);
    const auto src = field.step_values(step);
    auto dst = out.step_values(step - 1);
    for (std::size_t node = 0; node < dst.size(); ++node) {
        dst[node] = 0.5 * src[lat.up_child(step - 1, node)] +
                    0.5 * src[lat.down_child(step - 1, node)];
    }
    return out;
}

/// Convenience overload for single-step fields.
inline AdaptedField conditional_expectation(const AdaptedField& field) {
    return conditional_expectation(field, field.last_step());
}

/// Integrand of the martingale part: (up - down) / (2 sqrt(dt)).
inline AdaptedField martingale_coefficient(const AdaptedField& field,
                                           int step) {
    const Lattice& lat = field.lattice();
    if (step < 1 || !field.covers(step))
        throw std::invalid_argument("martingale_coefficient: need a covered "
                                    "step >= 1");
    AdaptedField out(lat, step - 1, step - 1);
    const auto src = field.step_values(step);
    auto dst = out.step_values(step - 1);
    const double scale = 1.0 / (2.0 * lat.sqrt_dt());
    for (std::size_t node = 0; node < dst.size(); ++node) {
        dst[node] = (src[lat.up_child(step - 1, node)] -
                     src[lat.down_child(step - 1, node)]) * scale;
    }
    return out;
}

inline AdaptedField martingale_coefficient(const AdaptedField& field) {
    return martingale_coefficient(field, field.last_step());
}

/// sqrt(E[X^2]) of the field restricted to one step.
inline double l2_norm(const AdaptedField& field, int step) {
    const Lattice& lat = field.lattice();
    const auto vals = field.step_values(step);
    double acc = 0.0;
    for (std::size_t node = 0; node < vals.size(); ++node)
        acc += lat.probability(step, node) * vals[node] * vals[node];
    return std::sqrt(acc);
}

inline double l2_norm(const AdaptedField& field) {
    return l2_norm(field, field.last_step());
}

/// E[X] of the field restricted to one step.
inline double expectation(const AdaptedField& field, int step) {
    const Lattice& lat = field.lattice();
    const auto vals = field.step_values(step);
    double acc = 0.0;
    for (std::size_t node = 0; node < vals.size(); ++node)
        acc += lat.probability(step, node) * vals[node];
    return acc;
}

}  // namespace cbsde

#endif  // CBSDE_LATTICE_HPP
