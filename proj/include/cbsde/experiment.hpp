#ifndef CBSDE_EXPERIMENT_HPP
#define CBSDE_EXPERIMENT_HPP

/**
 * @file experiment.hpp
 * @brief Config-driven experiment runner behind the command-line tool.
 *
 * One config document describes one experiment: grid, model pieces,
 * penalty schedule, tolerances, seed, output location.  Each run writes
 * a JSON summary record (with a digest of the effective config) and a
 * CSV or JSON detail table with 15-significant-digit numbers, so the
 * same config and seed reproduce byte-identical files.
 *
 * Exit codes: 0 all pass flags true, 1 property failure, 2 config error,
 * 3 solver error.
 */

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cbsde/bsde.hpp"
#include "cbsde/lattice.hpp"
#include "cbsde/model.hpp"
#include "cbsde/penalize.hpp"
#include "cbsde/properties.hpp"
#include "cbsde/reflected.hpp"

namespace cbsde {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
    std::string experiment;

    double horizon = 1.0;
    int n_steps = 16;
    LatticeMode mode = LatticeMode::recombining;

    Generator generator;
    Constraint constraint;
    std::optional<Barrier> barrier;   // reflected / compare-oracle
    std::optional<Claim> claim;
    std::optional<Claim> claim_b;     // comparison / convexity pair mode
    double mix_a = 0.5;

    double m = 1.0;                   // single-level penalize experiment
    PenaltySchedule schedule;
    double tol_m = 1e-4;
    double y_max = 1e6;

    std::uint64_t seed = 0;
    int count = 0;                    // 0 = per-experiment default
    int t_step = -1;                  // -1 = n_steps / 2
    int halvings = 6;
    double budget = 0.0;              // 0 = per-experiment default

    std::string format = "csv";
    std::string out_path;             // empty = env var or "."

    nlohmann::json raw;               // as parsed, before normalisation
};

namespace detail {

inline const nlohmann::json& need(const nlohmann::json& j,
                                  const std::string& key,
                                  const std::string& path) {
    auto it = j.find(key);
    if (it == j.end())
        throw ConfigError("config: missing key \"" + path + "\"");
    return *it;
}

inline double num_at(const nlohmann::json& j, const std::string& key,
                     const std::string& path, double fallback,
                     bool required = false) {
    auto it = j.find(key);
    if (it == j.end()) {
        if (required)
            throw ConfigError("config: missing key \"" + path + "\"");
        return fallback;
    }
    if (!it->is_number())
        throw ConfigError("config: key \"" + path + "\" must be a number");
    return it->get<double>();
}

inline std::string str_at(const nlohmann::json& j, const std::string& key,
                          const std::string& path,
                          const std::string& fallback = "",
                          bool required = false) {
    auto it = j.find(key);
    if (it == j.end()) {
        if (required)
            throw ConfigError("config: missing key \"" + path + "\"");
        return fallback;
    }
    if (!it->is_string())
        throw ConfigError("config: key \"" + path + "\" must be a string");
    return it->get<std::string>();
}

inline Barrier parse_barrier(const nlohmann::json& j, const std::string& path) {
    const std::string kind = str_at(j, "kind", path + ".kind", "", true);
    if (kind == "constant")
        return Barrier::constant(num_at(j, "level", path + ".level", 0.0));
    if (kind == "abs_w")
        return Barrier::abs_w(num_at(j, "scale", path + ".scale", 1.0));
    throw ConfigError("config: key \"" + path + ".kind\" has unknown value \"" +
                      kind + "\"");
}

inline Generator parse_generator(const nlohmann::json& j,
                                 const std::string& path) {
    const std::string kind = str_at(j, "kind", path + ".kind", "", true);
    if (kind == "zero") return Generator::zero();
    if (kind == "linear")
        return Generator::linear(num_at(j, "a", path + ".a", 0.0),
                                 num_at(j, "b", path + ".b", 0.0));
    if (kind == "discount")
        return Generator::discount(num_at(j, "rate", path + ".rate", 0.0));
    if (kind == "drift")
        return Generator::drift(num_at(j, "mu", path + ".mu", 0.0));
    if (kind == "abs_z") {
        const double c = num_at(j, "c", path + ".c", 0.0);
        if (c < 0.0)
            throw ConfigError("config: key \"" + path +
                              ".c\" must be >= 0 for abs_z");
        return Generator::abs_z(c);
    }
    throw ConfigError("config: key \"" + path + ".kind\" has unknown value \"" +
                      kind + "\"");
}

inline Constraint parse_constraint(const nlohmann::json& j,
                                   const std::string& path) {
    const std::string kind = str_at(j, "kind", path + ".kind", "", true);
    if (kind == "none") return Constraint::none();
    if (kind == "reflect_below")
        return Constraint::reflect_below(parse_barrier(
            need(j, "barrier", path + ".barrier"), path + ".barrier"));
    if (kind == "z_ball") {
        const double radius = num_at(j, "radius", path + ".radius", 0.0);
        if (radius < 0.0)
            throw ConfigError("config: key \"" + path +
                              ".radius\" must be >= 0");
        return Constraint::z_ball(radius);
    }
    if (kind == "y_floor")
        return Constraint::y_floor(num_at(j, "level", path + ".level", 0.0));
    throw ConfigError("config: key \"" + path + ".kind\" has unknown value \"" +
                      kind + "\"");
}

inline Claim parse_claim(const nlohmann::json& j, const std::string& path) {
    const std::string kind = str_at(j, "kind", path + ".kind", "", true);
    if (kind == "terminal_w") return Claim::terminal_w();
    if (kind == "constant")
        return Claim::constant(num_at(j, "value", path + ".value", 0.0));
    if (kind == "call")
        return Claim::call(num_at(j, "strike", path + ".strike", 0.0));
    if (kind == "max_with")
        return Claim::max_with(num_at(j, "level", path + ".level", 0.0));
    if (kind == "table") {
        auto it = j.find("values");
        if (it == j.end() || !it->is_array())
            throw ConfigError("config: key \"" + path +
                              ".values\" must be an array for table claims");
        std::vector<double> values;
        for (const auto& v : *it) {
            if (!v.is_number())
                throw ConfigError("config: key \"" + path +
                                  ".values\" must contain numbers only");
            values.push_back(v.get<double>());
        }
        return Claim::table(std::move(values));
    }
    throw ConfigError("config: key \"" + path + ".kind\" has unknown value \"" +
                      kind + "\"");
}

inline std::string format_sig15(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.15g", v);
    return buf;
}

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace detail

inline const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names = {
        "solve",      "penalize", "minimal", "reflected", "compare-oracle",
        "comparison", "convexity", "fatou",  "l2",        "from-below",
        "risk"};
    return names;
}

inline ExperimentConfig parse_config(const nlohmann::json& j) {
    if (!j.is_object())
        throw ConfigError("config: document must be a JSON object");
    ExperimentConfig cfg;
    cfg.raw = j;
    cfg.experiment = detail::str_at(j, "experiment", "experiment", "", true);

    const auto& grid = detail::need(j, "grid", "grid");
    cfg.horizon = detail::num_at(grid, "horizon", "grid.horizon", 0.0, true);
    cfg.n_steps = static_cast<int>(
        detail::num_at(grid, "n_steps", "grid.n_steps", 0.0, true));
    const std::string mode =
        detail::str_at(grid, "mode", "grid.mode", "recombining");
    if (mode == "recombining")
        cfg.mode = LatticeMode::recombining;
    else if (mode == "full_tree")
        cfg.mode = LatticeMode::full_tree;
    else
        throw ConfigError(
            "config: key \"grid.mode\" has unknown value \"" + mode + "\"");

    if (auto it = j.find("generator"); it != j.end())
        cfg.generator = detail::parse_generator(*it, "generator");
    if (auto it = j.find("constraint"); it != j.end())
        cfg.constraint = detail::parse_constraint(*it, "constraint");
    if (auto it = j.find("barrier"); it != j.end())
        cfg.barrier = detail::parse_barrier(*it, "barrier");
    if (auto it = j.find("claim"); it != j.end())
        cfg.claim = detail::parse_claim(*it, "claim");
    if (auto it = j.find("claim_b"); it != j.end())
        cfg.claim_b = detail::parse_claim(*it, "claim_b");
    cfg.mix_a = detail::num_at(j, "mix_a", "mix_a", 0.5);
    cfg.m = detail::num_at(j, "m", "m", 1.0);

    if (auto it = j.find("schedule"); it != j.end()) {
        cfg.schedule.m0 = detail::num_at(*it, "m0", "schedule.m0", 1.0);
        cfg.schedule.growth =
            detail::num_at(*it, "growth", "schedule.growth", 2.0);
        cfg.schedule.m_max =
            detail::num_at(*it, "m_max", "schedule.m_max", 65536.0);
    }
    if (auto it = j.find("tolerances"); it != j.end()) {
        cfg.tol_m = detail::num_at(*it, "tol_m", "tolerances.tol_m", 1e-4);
        cfg.y_max = detail::num_at(*it, "y_max", "tolerances.y_max", 1e6);
    }
    cfg.seed = static_cast<std::uint64_t>(
        detail::num_at(j, "seed", "seed", 0.0));
    cfg.count = static_cast<int>(detail::num_at(j, "count", "count", 0.0));
    cfg.t_step = static_cast<int>(detail::num_at(j, "t_step", "t_step", -1.0));
    cfg.halvings =
        static_cast<int>(detail::num_at(j, "halvings", "halvings", 6.0));
    cfg.budget = detail::num_at(j, "budget", "budget", 0.0);

    if (auto it = j.find("output"); it != j.end()) {
        cfg.format = detail::str_at(*it, "format", "output.format", "csv");
        cfg.out_path = detail::str_at(*it, "path", "output.path", "");
    }
    if (cfg.format != "csv" && cfg.format != "json")
        throw ConfigError(
            "config: key \"output.format\" must be \"csv\" or \"json\"");
    return cfg;
}

inline ExperimentConfig parse_config_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    return parse_config(j);
}

/// Semantic validation mirroring module preconditions.  Empty iff run's
/// preconditions hold; each entry names the offending key.
inline std::vector<std::string> validate(const ExperimentConfig& cfg) {
    std::vector<std::string> out;
    bool known_experiment = false;
    for (const auto& name : experiment_names())
        if (cfg.experiment == name) known_experiment = true;
    if (!known_experiment)
        out.push_back("experiment: unknown value \"" + cfg.experiment + "\"");

    if (!(cfg.horizon > 0.0))
        out.push_back("grid.horizon: must be positive");
    if (cfg.n_steps < 1)
        out.push_back("grid.n_steps: must be >= 1");
    if (cfg.mode == LatticeMode::full_tree && cfg.n_steps > 24)
        out.push_back("grid.n_steps: full_tree mode rejects n_steps > 24");

    if (!(cfg.schedule.m0 > 0.0)) out.push_back("schedule.m0: must be positive");
    if (!(cfg.schedule.growth > 1.0))
        out.push_back("schedule.growth: must exceed 1");
    if (!(cfg.schedule.m_max >= cfg.schedule.m0))
        out.push_back("schedule.m_max: must be >= schedule.m0");
    if (!(cfg.tol_m >= 0.0)) out.push_back("tolerances.tol_m: must be >= 0");
    if (!(cfg.y_max > 0.0)) out.push_back("tolerances.y_max: must be positive");
    if (cfg.m < 0.0) out.push_back("m: must be >= 0");
    if (cfg.count < 0) out.push_back("count: must be >= 1 when given");
    if (cfg.halvings < 1) out.push_back("halvings: must be >= 1");
    if (cfg.budget < 0.0) out.push_back("budget: must be positive when given");
    if (cfg.mix_a < 0.0 || cfg.mix_a > 1.0)
        out.push_back("mix_a: must lie in [0,1]");

    if (cfg.horizon > 0.0 && cfg.n_steps >= 1) {
        const double dt = cfg.horizon / cfg.n_steps;
        // Implicit-step solvability: the generator's y-part must contract.
        // Catalog penalty terms are non-increasing in y, so any m_max stays
        // solvable; only the generator can break the fixed point.
        if (cfg.generator.lipschitz_y() * dt >= 1.0)
            out.push_back(
                "generator: y-Lipschitz * dt = " +
                detail::format_sig15(cfg.generator.lipschitz_y() * dt) +
                " >= 1; the implicit step has no contraction "
                "(raise grid.n_steps)");
        // z-penalised constraints cap the monotone regime; property checks
        // clamp the ladder, but a cap below m0 leaves no usable level.
        if (cfg.constraint.lipschitz_z() > 0.0 && cfg.n_steps >= 1) {
            const double sdt = std::sqrt(dt);
            const double cap = (1.0 / sdt - cfg.generator.lipschitz_z()) /
                               cfg.constraint.lipschitz_z();
            if (cap < cfg.schedule.m0)
                out.push_back(
                    "schedule.m_max: monotone penalty cap " +
                    detail::format_sig15(cap) +
                    " for this constraint is below schedule.m0 "
                    "(raise grid.n_steps)");
        }
        if (cfg.t_step > cfg.n_steps)
            out.push_back("t_step: must be <= grid.n_steps");
        if (cfg.claim.has_value()) {
            try {
                Lattice probe(cfg.horizon, cfg.n_steps, cfg.mode);
                cfg.claim->leaves(probe);
                if (cfg.claim_b.has_value()) cfg.claim_b->leaves(probe);
            } catch (const std::exception& e) {
                out.push_back(std::string("claim: ") + e.what());
            }
        }
    }

    const bool needs_claim =
        cfg.experiment == "solve" || cfg.experiment == "penalize" ||
        cfg.experiment == "minimal" || cfg.experiment == "reflected" ||
        cfg.experiment == "compare-oracle" || cfg.experiment == "fatou" ||
        cfg.experiment == "l2" || cfg.experiment == "from-below";
    if (needs_claim && !cfg.claim.has_value())
        out.push_back("claim: required for experiment \"" + cfg.experiment +
                      "\"");
    const bool needs_barrier = cfg.experiment == "reflected" ||
                               cfg.experiment == "compare-oracle";
    if (needs_barrier && !cfg.barrier.has_value())
        out.push_back("barrier: required for experiment \"" + cfg.experiment +
                      "\"");
    return out;
}

// ---------------------------------------------------------------------------
// Output writing
// ---------------------------------------------------------------------------

namespace detail {

struct DetailTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

inline void write_text(const std::filesystem::path& path,
                       const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    out << text;
}

inline std::string render_csv(const DetailTable& table) {
    std::string text;
    for (std::size_t i = 0; i < table.header.size(); ++i) {
        if (i) text += ',';
        text += table.header[i];
    }
    text += '\n';
    for (const auto& row : table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) text += ',';
            text += row[i];
        }
        text += '\n';
    }
    return text;
}

inline std::string render_json_table(const DetailTable& table) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& row : table.rows) {
        nlohmann::json obj;
        for (std::size_t i = 0; i < row.size() && i < table.header.size(); ++i)
            obj[table.header[i]] = row[i];
        arr.push_back(obj);
    }
    return arr.dump(2) + "\n";
}

inline void append_field_rows(DetailTable& table, const Lattice& lattice,
                              const AdaptedField& y, const AdaptedField* z,
                              const AdaptedField* extra,
                              const char* extra_name) {
    table.header = {"step", "node", "t", "w", "y"};
    if (z) table.header.push_back("z");
    if (extra) table.header.push_back(extra_name);
    for (int step = 0; step <= lattice.n_steps(); ++step) {
        for (std::size_t node = 0; node < lattice.nodes_at(step); ++node) {
            std::vector<std::string> row = {
                std::to_string(step), std::to_string(node),
                format_sig15(lattice.time_at(step)),
                format_sig15(lattice.w_value(step, node)),
                format_sig15(y.value(step, node))};
            if (z)
                row.push_back(step < lattice.n_steps()
                                  ? format_sig15(z->value(step, node))
                                  : "");
            if (extra)
                row.push_back(step < lattice.n_steps()
                                  ? format_sig15(extra->value(step, node))
                                  : "");
            table.rows.push_back(std::move(row));
        }
    }
}

inline void append_step_rows(DetailTable& table, const Lattice& lattice,
                             const AdaptedField& y) {
    table.header = {"step", "t", "mean_y", "l2_y"};
    for (int step = 0; step <= lattice.n_steps(); ++step) {
        table.rows.push_back({std::to_string(step),
                              format_sig15(lattice.time_at(step)),
                              format_sig15(expectation(y, step)),
                              format_sig15(l2_norm(y, step))});
    }
}

inline void append_report_rows(DetailTable& table,
                               const PropertyReport& report) {
    table.header = {"instance", "description", "violation"};
    for (std::size_t k = 0; k < report.trace.size(); ++k)
        table.rows.push_back({std::to_string(k), report.trace[k].description,
                              format_sig15(report.trace[k].violation)});
}

inline void merge_report_summary(nlohmann::json& summary,
                                 const PropertyReport& report) {
    summary["property"] = report.property_name;
    summary["instances_tested"] = report.instances_tested;
    summary["max_violation"] = report.max_violation;
    summary["tolerance"] = report.tolerance;
    summary["worst_instance"] = report.worst_instance;
    summary["pass"] = report.pass;
    for (const auto& [name, value] : report.metrics) summary[name] = value;
}

}  // namespace detail

/// Result of one experiment run, before files are written.
struct RunResult {
    nlohmann::json summary;
    detail::DetailTable detail;
    bool pass = true;
};

inline RunResult execute(const ExperimentConfig& cfg) {
    const auto violations = validate(cfg);
    if (!violations.empty()) {
        std::string msg = "config validation failed:";
        for (const auto& v : violations) msg += "\n  " + v;
        throw ConfigError(msg);
    }

    Lattice lattice(cfg.horizon, cfg.n_steps, cfg.mode);
    const bool small = cfg.n_steps <= 6;
    const int count = cfg.count > 0 ? cfg.count : 200;
    const int risk_count = cfg.count > 0 ? cfg.count : 100;
    const int fatou_count = cfg.count > 0 ? cfg.count : 100;
    const int t_step = cfg.t_step >= 0 ? cfg.t_step : cfg.n_steps / 2;

    RunResult result;
    nlohmann::json& summary = result.summary;
    summary["experiment"] = cfg.experiment;
    summary["n_steps"] = cfg.n_steps;
    summary["seed"] = cfg.seed;

    if (cfg.experiment == "solve") {
        const Solution sol = solve_bsde(cfg.generator, *cfg.claim, lattice);
        summary["y0"] = sol.y.value(0, 0);
        summary["z0"] = sol.z.value(0, 0);
        summary["pass"] = true;
        if (small)
            detail::append_field_rows(result.detail, lattice, sol.y, &sol.z,
                                      nullptr, "");
        else
            detail::append_step_rows(result.detail, lattice, sol.y);
    } else if (cfg.experiment == "penalize") {
        const PenalizedRun run = solve_penalized(cfg.generator, cfg.constraint,
                                                 cfg.m, *cfg.claim, lattice);
        summary["m"] = run.m;
        summary["y0"] = run.y0();
        summary["residual"] =
            residual_check(as_supersolution(run), cfg.generator, lattice);
        summary["pass"] = true;
        if (small)
            detail::append_field_rows(result.detail, lattice, run.solution.y,
                                      &run.solution.z, &run.a_increments, "da");
        else
            detail::append_step_rows(result.detail, lattice, run.solution.y);
    } else if (cfg.experiment == "minimal") {
        const MinimalSolutionResult res =
            solve_minimal(cfg.generator, cfg.constraint, *cfg.claim, lattice,
                          cfg.schedule, cfg.tol_m, cfg.y_max);
        summary["y0"] = res.y0();
        summary["domain_status"] =
            res.domain_status == DomainStatus::converged ? "converged"
                                                         : "diverged";
        summary["levels"] = res.gap_trace.size();
        summary["final_gap"] = res.gap_trace.back().gap;
        summary["pass"] = res.domain_status == DomainStatus::converged;
        result.detail.header = {"m", "y0", "gap"};
        for (const auto& e : res.gap_trace)
            result.detail.rows.push_back(
                {detail::format_sig15(e.m), detail::format_sig15(e.y0),
                 std::isnan(e.gap) ? "" : detail::format_sig15(e.gap)});
    } else if (cfg.experiment == "reflected") {
        const Supersolution sup =
            solve_reflected(cfg.generator, *cfg.barrier, *cfg.claim, lattice);
        summary["y0"] = sup.y.value(0, 0);
        summary["residual"] = residual_check(sup, cfg.generator, lattice);
        summary["pass"] = true;
        if (small)
            detail::append_field_rows(result.detail, lattice, sup.y, &sup.z,
                                      &sup.c_increments, "dc");
        else
            detail::append_step_rows(result.detail, lattice, sup.y);
    } else if (cfg.experiment == "compare-oracle") {
        const Supersolution oracle =
            solve_reflected(cfg.generator, *cfg.barrier, *cfg.claim, lattice);
        const Constraint phi = Constraint::reflect_below(*cfg.barrier);
        const auto ladder = run_penalty_ladder(cfg.generator, phi, *cfg.claim,
                                               lattice, cfg.schedule);
        const double oracle_y0 = oracle.y.value(0, 0);
        const double budget = cfg.budget > 0.0 ? cfg.budget : 1e-2;
        result.detail.header = {"m", "y0_penalized", "gap_to_oracle"};
        for (const auto& run : ladder)
            result.detail.rows.push_back(
                {detail::format_sig15(run.m), detail::format_sig15(run.y0()),
                 detail::format_sig15(std::abs(run.y0() - oracle_y0))});
        const double final_gap = std::abs(ladder.back().y0() - oracle_y0);
        summary["oracle_y0"] = oracle_y0;
        summary["y0"] = ladder.back().y0();
        summary["final_gap"] = final_gap;
        summary["budget"] = budget;
        summary["pass"] = final_gap <= budget;
    } else if (cfg.experiment == "comparison") {
        PropertyReport report;
        if (cfg.claim.has_value() && cfg.claim_b.has_value())
            report = check_comparison(cfg.generator, cfg.constraint, *cfg.claim,
                                      *cfg.claim_b, lattice, cfg.schedule);
        else
            report = comparison_suite(cfg.generator, cfg.constraint, lattice,
                                      count, cfg.seed, cfg.schedule);
        detail::merge_report_summary(summary, report);
        detail::append_report_rows(result.detail, report);
        result.pass = report.pass;
    } else if (cfg.experiment == "convexity") {
        PropertyReport report;
        if (cfg.claim.has_value() && cfg.claim_b.has_value())
            report = check_convexity(cfg.generator, cfg.constraint, *cfg.claim,
                                     *cfg.claim_b, cfg.mix_a, lattice,
                                     cfg.schedule);
        else
            report = convexity_suite(cfg.generator, cfg.constraint, lattice,
                                     count, cfg.seed, cfg.schedule);
        detail::merge_report_summary(summary, report);
        detail::append_report_rows(result.detail, report);
        result.pass = report.pass;
    } else if (cfg.experiment == "fatou") {
        const double budget = cfg.budget > 0.0 ? cfg.budget : kFatouBudget;
        const PropertyReport report =
            check_fatou(cfg.generator, cfg.constraint, *cfg.claim, lattice,
                        fatou_count, cfg.schedule, SequenceScheme::shift(),
                        budget);
        detail::merge_report_summary(summary, report);
        detail::append_report_rows(result.detail, report);
        result.pass = report.pass;
    } else if (cfg.experiment == "l2") {
        const double budget = cfg.budget > 0.0 ? cfg.budget : kL2Budget;
        const PropertyReport report = check_l2_continuity(
            cfg.generator, cfg.constraint, *cfg.claim, lattice, t_step,
            cfg.seed, cfg.halvings, cfg.schedule, budget);
        detail::merge_report_summary(summary, report);
        summary["t_step"] = t_step;
        detail::append_report_rows(result.detail, report);
        result.pass = report.pass;
    } else if (cfg.experiment == "from-below") {
        const double budget = cfg.budget > 0.0 ? cfg.budget : kFatouBudget;
        const PropertyReport report =
            check_from_below(cfg.generator, cfg.constraint, *cfg.claim,
                             lattice, t_step, fatou_count, cfg.schedule,
                             budget);
        detail::merge_report_summary(summary, report);
        summary["t_step"] = t_step;
        detail::append_report_rows(result.detail, report);
        result.pass = report.pass;
    } else if (cfg.experiment == "risk") {
        const PropertyReport report =
            risk_audit(cfg.generator, cfg.constraint, lattice, risk_count,
                       cfg.seed, cfg.schedule);
        detail::merge_report_summary(summary, report);
        if (cfg.claim.has_value())
            summary["rho"] = risk_measure(cfg.generator, cfg.constraint,
                                          *cfg.claim, lattice, cfg.schedule);
        detail::append_report_rows(result.detail, report);
        result.pass = report.pass;
    } else {
        throw ConfigError("config: unknown experiment \"" + cfg.experiment +
                          "\"");
    }

    if (summary.contains("pass") && summary["pass"].is_boolean())
        result.pass = result.pass && summary["pass"].get<bool>();
    summary["pass"] = result.pass;
    return result;
}

/// Effective output directory: config, then environment, then cwd.
inline std::string resolve_output_dir(const ExperimentConfig& cfg) {
    if (!cfg.out_path.empty()) return cfg.out_path;
    if (const char* env = std::getenv("CBSDE_OUTPUT_DIR"); env && *env)
        return env;
    return ".";
}

/**
 * Run the experiment and write <experiment>_summary.json plus
 * <experiment>_detail.<ext>.  Returns 0 on pass, 1 on property failure.
 */
inline int run(const ExperimentConfig& cfg) {
    RunResult result = execute(cfg);
    result.summary["config_digest"] =
        [&] {
            char buf[24];
            std::snprintf(buf, sizeof(buf), "%016llx",
                          static_cast<unsigned long long>(
                              detail::fnv1a(cfg.raw.dump())));
            return std::string(buf);
        }();

    const std::filesystem::path dir(resolve_output_dir(cfg));
    std::filesystem::create_directories(dir);
    std::string stem = cfg.experiment;
    for (auto& ch : stem)
        if (ch == '-') ch = '_';
    detail::write_text(dir / (stem + "_summary.json"),
                       result.summary.dump(2) + "\n");
    if (cfg.format == "csv")
        detail::write_text(dir / (stem + "_detail.csv"),
                           detail::render_csv(result.detail));
    else
        detail::write_text(dir / (stem + "_detail.json"),
                           detail::render_json_table(result.detail));
    return result.pass ? 0 : 1;
}

}  // namespace cbsde

#endif  // CBSDE_EXPERIMENT_HPP
