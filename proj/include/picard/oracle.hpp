// Copyright 2026 The picard-bench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "picard/engine.hpp"
#include "picard/problems.hpp"
#include "picard/state.hpp"
#include "picard/update_rules.hpp"

namespace picard {

/// Sequential reference solution, steps 0..T.
struct Trajectory {
    std::vector<ParamState> states;
    std::vector<double> losses;  // losses[t] = loss(states[t], seed t + offset)
    double wall_time_ms = 0.0;
};

struct OracleOptions {
    std::uint64_t seed_offset = 0;
    double injected_cost_ms = 0.0;  // same emulated drift cost as the pool
    bool record_losses = true;
};

/// Iterates sequential_step T times with seed = step + seed_offset. The
/// adaptive rule gets a single auxiliary model.
Trajectory solve_sequential(const UpdateRule& rule, const Problem& problem, const ParamState& theta0,
                            std::int64_t steps, const OracleOptions& options = {});

enum class CompareMode { bitexact, tolerance };

struct CompareOptions {
    CompareMode mode = CompareMode::bitexact;
    double tolerance = 0.0;  // tolerance mode: pass iff every |delta| <= tolerance
};

struct CompareReport {
    bool pass = true;
    CompareMode mode = CompareMode::bitexact;
    double tolerance = 0.0;
    std::optional<std::int64_t> first_divergence;
    std::vector<double> max_abs_delta;  // per step, +inf on a shape mismatch
    double overall_max_abs_delta = 0.0;

    nlohmann::json to_json() const;
};

/// Throws Error when the trajectories have different lengths. Moments only
/// take part in bitexact mode.
CompareReport compare_trajectories(std::span<const ParamState> a, std::span<const ParamState> b,
                                   const CompareOptions& options);
CompareReport compare_trajectories(const Trajectory& a, const Trajectory& b, const CompareOptions& options);

struct PrefixReport {
    bool pass = true;
    std::int64_t rounds_checked = 0;
    std::int64_t states_checked = 0;
    std::optional<std::int64_t> failed_round;
    std::optional<std::int64_t> failed_step;

    nlohmann::json to_json() const;
};

/// After round k every snapshot state at a step <= k must equal the oracle
/// bitwise.
PrefixReport prefix_check(const Trajectory& oracle, std::span<const RoundSnapshot> snapshots);

}  // namespace picard
