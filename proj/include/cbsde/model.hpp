#ifndef CBSDE_MODEL_HPP
#define CBSDE_MODEL_HPP

/**
 * @file model.hpp
 * @brief Closed catalog of drivers, constraints, barriers and claims.
 *
 * Every entry declares its Lipschitz constants and structural flags
 * (convexity, y-independence, vanishing at z = 0) as trusted metadata;
 * the theorem harness gates on these flags, so the catalog is closed
 * rather than accepting arbitrary user callables.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cbsde/lattice.hpp"
#include "cbsde/random.hpp"

namespace cbsde {

// ---------------------------------------------------------------------------
// Generator g(t, y, z)
// ---------------------------------------------------------------------------

/// Driver of the backward equation.  All catalog entries are uniformly
/// Lipschitz with the declared constants and time-independent.
struct Generator {
    enum class Kind { zero, linear, discount, drift, abs_z };

    Kind kind = Kind::zero;
    double a = 0.0;   // linear: y coefficient
    double b = 0.0;   // linear: z coefficient
    double r = 0.0;   // discount rate
    double mu = 0.0;  // drift: z coefficient
    double c = 0.0;   // abs_z: |z| coefficient, c >= 0

    static Generator zero() { return {}; }
    static Generator linear(double a, double b) {
        Generator g;
        g.kind = Kind::linear;
        g.a = a;
        g.b = b;
        return g;
    }
    static Generator discount(double r) {
        Generator g;
        g.kind = Kind::discount;
        g.r = r;
        return g;
    }
    static Generator drift(double mu) {
        Generator g;
        g.kind = Kind::drift;
        g.mu = mu;
        return g;
    }
    static Generator abs_z(double c) {
        if (c < 0.0)
            throw std::invalid_argument("generator: abs_z needs c >= 0");
        Generator g;
        g.kind = Kind::abs_z;
        g.c = c;
        return g;
    }

    double operator()(double /*t*/, double y, double z) const {
        switch (kind) {
            case Kind::zero: return 0.0;
            case Kind::linear: return a * y + b * z;
            case Kind::discount: return -r * y;
            case Kind::drift: return mu * z;
            case Kind::abs_z: return c * std::abs(z);
        }
        return 0.0;
    }

    double lipschitz_y() const {
        switch (kind) {
            case Kind::linear: return std::abs(a);
            case Kind::discount: return std::abs(r);
            default: return 0.0;
        }
    }
    double lipschitz_z() const {
        switch (kind) {
            case Kind::linear: return std::abs(b);
            case Kind::drift: return std::abs(mu);
            case Kind::abs_z: return c;
            default: return 0.0;
        }
    }
    /// M with |g(y1,z1) - g(y2,z2)| <= M (|dy| + |dz|).
    double lipschitz() const {
        return std::max(lipschitz_y(), lipschitz_z());
    }

    bool independent_of_y() const { return lipschitz_y() == 0.0; }
    bool convex() const { return true; }  // whole catalog is convex in (y,z)
    /// Assumption (A3): g(., ., 0) = 0.
    bool vanishes_at_zero() const {
        return independent_of_y();  // then g(t,y,0) reduces to the z-part at 0
    }

    std::string name() const {
        switch (kind) {
            case Kind::zero: return "zero";
            case Kind::linear: return "linear";
            case Kind::discount: return "discount";
            case Kind::drift: return "drift";
            case Kind::abs_z: return "abs_z";
        }
        return "?";
    }
};

inline double evaluate_generator(const Generator& g, double t, double y,
                                 double z) {
    return g(t, y, z);
}

// ---------------------------------------------------------------------------
// Barrier S_t
// ---------------------------------------------------------------------------

/// Lower reflection barrier evaluated per lattice node (adapted).
struct Barrier {
    enum class Kind { constant, abs_w };

    Kind kind = Kind::constant;
    double level = 0.0;  // constant barrier
    double scale = 0.0;  // abs_w: S = scale * |W|

    static Barrier constant(double level) {
        Barrier b;
        b.level = level;
        return b;
    }
    static Barrier abs_w(double scale) {
        Barrier b;
        b.kind = Kind::abs_w;
        b.scale = scale;
        return b;
    }

    double value(const Lattice& lattice, int step, std::size_t node) const {
        if (kind == Kind::constant) return level;
        return scale * std::abs(lattice.w_value(step, node));
    }

    std::string name() const {
        return kind == Kind::constant ? "constant" : "abs_w";
    }
};

// ---------------------------------------------------------------------------
// Constraint phi(t, y, z) >= 0, target set Gamma = { phi = 0 }
// ---------------------------------------------------------------------------

struct Constraint {
    enum class Kind { none, reflect_below, z_ball, y_floor };

    Kind kind = Kind::none;
    Barrier barrier;       // reflect_below
    double radius = 0.0;   // z_ball
    double floor = 0.0;    // y_floor

    static Constraint none() { return {}; }
    static Constraint reflect_below(Barrier b) {
        Constraint c;
        c.kind = Kind::reflect_below;
        c.barrier = b;
        return c;
    }
    static Constraint z_ball(double radius) {
        if (radius < 0.0)
            throw std::invalid_argument("constraint: z_ball needs radius >= 0");
        Constraint c;
        c.kind = Kind::z_ball;
        c.radius = radius;
        return c;
    }
    static Constraint y_floor(double level) {
        Constraint c;
        c.kind = Kind::y_floor;
        c.floor = level;
        return c;
    }

    double value(double /*t*/, double y, double z, const Lattice& lattice,
                 int step, std::size_t node) const {
        switch (kind) {
            case Kind::none:
                return 0.0;
            case Kind::reflect_below:
                return std::max(barrier.value(lattice, step, node) - y, 0.0);
            case Kind::z_ball:
                return std::max(std::abs(z) - radius, 0.0);
            case Kind::y_floor:
                return std::max(floor - y, 0.0);
        }
        return 0.0;
    }

    double lipschitz_y() const {
        return (kind == Kind::reflect_below || kind == Kind::y_floor) ? 1.0
                                                                      : 0.0;
    }
    double lipschitz_z() const { return kind == Kind::z_ball ? 1.0 : 0.0; }
    double lipschitz() const {
        return std::max(lipschitz_y(), lipschitz_z());
    }

    bool independent_of_y() const { return lipschitz_y() == 0.0; }
    bool convex() const { return true; }

    std::string name() const {
        switch (kind) {
            case Kind::none: return "none";
            case Kind::reflect_below: return "reflect_below";
            case Kind::z_ball: return "z_ball";
            case Kind::y_floor: return "y_floor";
        }
        return "?";
    }
};

inline double evaluate_constraint(const Constraint& phi, double t, double y,
                                  double z, const Lattice& lattice, int step,
                                  std::size_t node) {
    return phi.value(t, y, z, lattice, step, node);
}

// ---------------------------------------------------------------------------
// Claim: terminal random variable, one value per terminal node
// ---------------------------------------------------------------------------

/**
 * F_T-measurable terminal value.  Base kinds plus arithmetic combinators;
 * evaluation materialises the leaf vector on a given lattice.  Table
 * claims pin a leaf count and only evaluate on a matching lattice.
 */
class Claim {
public:
    Claim() : Claim(constant(0.0)) {}

    static Claim terminal_w() { return Claim(Node{Op::terminal_w}); }
    static Claim constant(double c) {
        Node n{Op::constant};
        n.p0 = c;
        return Claim(std::move(n));
    }
    /// (W_T - strike)^+
    static Claim call(double strike) {
        Node n{Op::call};
        n.p0 = strike;
        return Claim(std::move(n));
    }
    /// W_T v level
    static Claim max_with(double level) {
        Node n{Op::max_with};
        n.p0 = level;
        return Claim(std::move(n));
    }
    static Claim table(std::vector<double> leaves) {
        Node n{Op::table};
        n.leaves = std::move(leaves);
        return Claim(std::move(n));
    }

    /// xi + c
    Claim shifted(double c) const {
        Node n{Op::shift};
        n.p0 = c;
        n.left = node_;
        return Claim(std::move(n));
    }
    /// s * xi
    Claim scaled(double s) const {
        Node n{Op::scale};
        n.p0 = s;
        n.left = node_;
        return Claim(std::move(n));
    }
    Claim negated() const { return scaled(-1.0); }

    static Claim pointwise_max(const Claim& a, const Claim& b) {
        Node n{Op::pmax};
        n.left = a.node_;
        n.right = b.node_;
        return Claim(std::move(n));
    }
    static Claim pointwise_min(const Claim& a, const Claim& b) {
        Node n{Op::pmin};
        n.left = a.node_;
        n.right = b.node_;
        return Claim(std::move(n));
    }
    /// a * xi + (1 - a) * eta, a in [0, 1]
    static Claim mix(double a, const Claim& xi, const Claim& eta) {
        if (a < 0.0 || a > 1.0)
            throw std::invalid_argument("claim: mix weight must be in [0,1]");
        Node n{Op::mix};
        n.p0 = a;
        n.left = xi.node_;
        n.right = eta.node_;
        return Claim(std::move(n));
    }

    /// Leaf values as a single-step field at the terminal step.
    AdaptedField leaves(const Lattice& lattice) const {
        const int n = lattice.n_steps();
        std::vector<double> vals = eval(*node_, lattice);
        return AdaptedField(lattice, n, std::move(vals));
    }

private:
    enum class Op {
        terminal_w, constant, call, max_with, table,
        shift, scale, pmax, pmin, mix
    };

    struct Node {
        Op op;
        double p0 = 0.0;
        std::vector<double> leaves;
        std::shared_ptr<const Node> left, right;
    };

    explicit Claim(Node n) : node_(std::make_shared<const Node>(std::move(n))) {}

    static std::vector<double> eval(const Node& n, const Lattice& lattice) {
        const int step = lattice.n_steps();
        const std::size_t count = lattice.nodes_at(step);
        std::vector<double> out(count);
        switch (n.op) {
            case Op::terminal_w:
                for (std::size_t k = 0; k < count; ++k)
                    out[k] = lattice.w_value(step, k);
                break;
            case Op::constant:
                for (auto& v : out) v = n.p0;
                break;
            case Op::call:
                for (std::size_t k = 0; k < count; ++k)
                    out[k] = std::max(lattice.w_value(step, k) - n.p0, 0.0);
                break;
            case Op::max_with:
                for (std::size_t k = 0; k < count; ++k)
                    out[k] = std::max(lattice.w_value(step, k), n.p0);
                break;
            case Op::table:
                if (n.leaves.size() != count)
                    throw std::invalid_argument(
                        "claim: table has " + std::to_string(n.leaves.size()) +
                        " leaves, lattice has " + std::to_string(count));
                out = n.leaves;
                break;
            case Op::shift: {
                out = eval(*n.left, lattice);
                for (auto& v : out) v += n.p0;
                break;
            }
            case Op::scale: {
                out = eval(*n.left, lattice);
                for (auto& v : out) v *= n.p0;
                break;
            }
            case Op::pmax: {
                out = eval(*n.left, lattice);
                const auto rhs = eval(*n.right, lattice);
                for (std::size_t k = 0; k < count; ++k)
                    out[k] = std::max(out[k], rhs[k]);
                break;
            }
            case Op::pmin: {
                out = eval(*n.left, lattice);
                const auto rhs = eval(*n.right, lattice);
                for (std::size_t k = 0; k < count; ++k)
                    out[k] = std::min(out[k], rhs[k]);
                break;
            }
            case Op::mix: {
                out = eval(*n.left, lattice);
                const auto rhs = eval(*n.right, lattice);
                for (std::size_t k = 0; k < count; ++k)
                    out[k] = n.p0 * out[k] + (1.0 - n.p0) * rhs[k];
                break;
            }
        }
        return out;
    }

    std::shared_ptr<const Node> node_;
};

inline double l2_norm(const Claim& claim, const Lattice& lattice) {
    return l2_norm(claim.leaves(lattice), lattice.n_steps());
}

/// Random table claim with leaf values uniform in [lo, hi).
inline Claim random_table(const Lattice& lattice, Rng& rng, double lo = -1.0,
                          double hi = 1.0) {
    std::vector<double> leaves(lattice.nodes_at(lattice.n_steps()));
    for (auto& v : leaves) v = rng.uniform(lo, hi);
    return Claim::table(std::move(leaves));
}

// ---------------------------------------------------------------------------
// Claim sequences for the continuity theorems
// ---------------------------------------------------------------------------

struct SequenceScheme {
    enum class Kind {
        shift_up_by_1_over_n,      // xi_n = xi - 1/n, increasing to xi
        truncate_below_at_minus_n,  // xi_n = xi v (-n), decreasing to xi
        random_l2_perturbation      // ||xi_n - xi|| = rate^n * amplitude
    };

    Kind kind = Kind::shift_up_by_1_over_n;
    std::uint64_t seed = 0;
    double rate = 0.5;
    // Perturbation amplitude: noise is normalised to unit L2 then scaled,
    // so ||xi_n - xi||_{L2} = rate^n * amplitude exactly.
    double amplitude = 0.05;

    static SequenceScheme shift() { return {}; }
    static SequenceScheme truncate() {
        SequenceScheme s;
        s.kind = Kind::truncate_below_at_minus_n;
        return s;
    }
    static SequenceScheme perturbation(std::uint64_t seed, double rate = 0.5,
                                       double amplitude = 0.05) {
        if (!(rate > 0.0 && rate < 1.0))
            throw std::invalid_argument(
                "sequence: perturbation rate must lie in (0,1)");
        if (!(amplitude > 0.0))
            throw std::invalid_argument(
                "sequence: perturbation amplitude must be positive");
        SequenceScheme s;
        s.kind = Kind::random_l2_perturbation;
        s.seed = seed;
        s.rate = rate;
        s.amplitude = amplitude;
        return s;
    }
};

/// xi + scale * noise, expressed through the mix/scale combinators
/// (pointwise sum = 2 * mix(1/2, a, b)).
inline Claim add_scaled(const Claim& base, const Claim& noise, double scale) {
    return Claim::mix(0.5, base, noise.scaled(scale)).scaled(2.0);
}

/// Build the sequence xi_1 .. xi_count with the scheme's convergence mode.
inline std::vector<Claim> make_claim_sequence(const Claim& base,
                                              const SequenceScheme& scheme,
                                              int count,
                                              const Lattice& lattice) {
    if (count < 1)
        throw std::invalid_argument("sequence: count must be >= 1");
    std::vector<Claim> out;
    out.reserve(static_cast<std::size_t>(count));
    switch (scheme.kind) {
        case SequenceScheme::Kind::shift_up_by_1_over_n:
            for (int n = 1; n <= count; ++n)
                out.push_back(base.shifted(-1.0 / n));
            break;
        case SequenceScheme::Kind::truncate_below_at_minus_n:
            for (int n = 1; n <= count; ++n)
                out.push_back(Claim::pointwise_max(
                    base, Claim::constant(-static_cast<double>(n))));
            break;
        case SequenceScheme::Kind::random_l2_perturbation: {
            Rng rng(scheme.seed);
            Claim noise = random_table(lattice, rng);
            const double norm = l2_norm(noise, lattice);
            if (norm == 0.0)
                throw std::invalid_argument("sequence: degenerate noise draw");
            double scale = scheme.amplitude / norm;
            for (int n = 1; n <= count; ++n) {
                scale *= scheme.rate;
                out.push_back(add_scaled(base, noise, scale));
            }
            break;
        }
    }
    return out;
}

}  // namespace cbsde

#endif  // CBSDE_MODEL_HPP
