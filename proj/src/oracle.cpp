// Copyright 2026 The picard-bench Authors
// SPDX-License-Identifier: Apache-2.0

#include "picard/oracle.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <thread>

#include "picard/errors.hpp"
#include "picard/telemetry.hpp"

namespace picard {

Trajectory solve_sequential(const UpdateRule& rule, const Problem& problem, const ParamState& theta0,
                            std::int64_t steps, const OracleOptions& options) {
    if (steps < 1) throw ConfigError("engine.steps", "must be >= 1");
    validate_rule(rule, steps);
    if (theta0.step != 0) throw ConfigError("engine.theta0", "initial state must be at step 0");

    const auto t0 = std::chrono::steady_clock::now();
    Trajectory traj;
    traj.states.reserve(static_cast<std::size_t>(steps + 1));
    traj.states.push_back(prepare_initial(rule, theta0));
    AuxModel aux;
    AuxModel* aux_ptr = rule.kind == RuleKind::adaptive_guidance ? &aux : nullptr;
    for (std::int64_t t = 0; t < steps; ++t) {
        const auto seed = static_cast<std::uint64_t>(t) + options.seed_offset;
        if (options.injected_cost_ms > 0.0)
            std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(options.injected_cost_ms));
        traj.states.push_back(sequential_step(rule, problem, traj.states.back(), seed, aux_ptr));
    }
    traj.wall_time_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    if (options.record_losses) {
        traj.losses.reserve(traj.states.size());
        for (const auto& s : traj.states) traj.losses.push_back(evaluation_loss(problem, s, options.seed_offset));
    }
    return traj;
}

nlohmann::json CompareReport::to_json() const {
    nlohmann::json j;
    j["pass"] = pass;
    j["mode"] = mode == CompareMode::bitexact ? "bitexact" : "tolerance";
    if (mode == CompareMode::tolerance) j["tolerance"] = tolerance;
    j["first_divergence"] = first_divergence ? nlohmann::json(*first_divergence) : nlohmann::json(nullptr);
    j["overall_max_abs_delta"] = format_double(overall_max_abs_delta);
    nlohmann::json deltas = nlohmann::json::array();
    for (double d : max_abs_delta) deltas.push_back(std::isfinite(d) ? nlohmann::json(d) : nlohmann::json("inf"));
    j["max_abs_delta"] = deltas;
    return j;
}

CompareReport compare_trajectories(std::span<const ParamState> a, std::span<const ParamState> b,
                                   const CompareOptions& options) {
    if (a.size() != b.size())
        throw Error("trajectory length mismatch: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    CompareReport r;
    r.mode = options.mode;
    r.tolerance = options.tolerance;
    r.max_abs_delta.reserve(a.size());
    for (std::size_t t = 0; t < a.size(); ++t) {
        const auto& x = a[t];
        const auto& y = b[t];
        double delta = 0.0;
        bool same = true;
        if (x.values.size() != y.values.size() || x.step != y.step) {
            delta = std::numeric_limits<double>::infinity();
            same = false;
        } else {
            for (std::size_t i = 0; i < x.values.size(); ++i) delta = std::max(delta, std::abs(x.values[i] - y.values[i]));
            same = options.mode == CompareMode::bitexact ? bitwise_equal(x, y) : delta <= options.tolerance;
        }
        r.max_abs_delta.push_back(delta);
        r.overall_max_abs_delta = std::max(r.overall_max_abs_delta, delta);
        if (!same && !r.first_divergence) {
            r.first_divergence = static_cast<std::int64_t>(t);
            r.pass = false;
        }
    }
    return r;
}

CompareReport compare_trajectories(const Trajectory& a, const Trajectory& b, const CompareOptions& options) {
    return compare_trajectories(std::span<const ParamState>(a.states), std::span<const ParamState>(b.states),
                                options);
}

nlohmann::json PrefixReport::to_json() const {
    nlohmann::json j;
    j["pass"] = pass;
    j["rounds_checked"] = rounds_checked;
    j["states_checked"] = states_checked;
    j["failed_round"] = failed_round ? nlohmann::json(*failed_round) : nlohmann::json(nullptr);
    j["failed_step"] = failed_step ? nlohmann::json(*failed_step) : nlohmann::json(nullptr);
    return j;
}

PrefixReport prefix_check(const Trajectory& oracle, std::span<const RoundSnapshot> snapshots) {
    PrefixReport r;
    for (const auto& snap : snapshots) {
        r.rounds_checked += 1;
        for (const auto& s : snap.states) {
            if (s.step > snap.round) continue;
            if (s.step < 0 || s.step >= static_cast<std::int64_t>(oracle.states.size())) continue;
            r.states_checked += 1;
            if (!bitwise_equal(s, oracle.states[static_cast<std::size_t>(s.step)]) && r.pass) {
                r.pass = false;
                r.failed_round = snap.round;
                r.failed_step = s.step;
            }
        }
    }
    return r;
}

}  // namespace picard
