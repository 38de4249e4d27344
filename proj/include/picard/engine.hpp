// Copyright 2026 The picard-bench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <exception>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "picard/errors.hpp"
#include "picard/problems.hpp"
#include "picard/state.hpp"
#include "picard/telemetry.hpp"
#include "picard/update_rules.hpp"
#include "picard/worker_pool.hpp"

namespace picard {

enum class Aggregation { mean, median };

std::string to_string(Aggregation agg);
Aggregation parse_aggregation(std::string_view name);

/// Median of an even count averages the two middle values. Empty input -> 0.
double aggregate(std::span<const double> errors, Aggregation agg);

struct ThresholdState {
    double e = 1e-6;
    double gamma = 0.9;
    Aggregation agg = Aggregation::median;
};

/// Normalized squared distances for window slots 1..p.
struct RoundErrors {
    std::vector<double> per_slot;
};

/// states[j] sits at step base_step + j for j = 0..size; states[0] is final.
struct Window {
    std::int64_t base_step = 0;
    std::int64_t size = 0;
    std::int64_t capacity = 0;  // configured p; size = min(capacity, T - base_step)
    std::vector<ParamState> states;
    std::int64_t iteration = 0;
    /// Error of each slot from the round that produced it; +inf for clones
    /// appended by the last advance. slot_error[0] belongs to the anchor.
    std::vector<double> slot_error;
};

/// Constant initial guess: every slot is theta0, lifted through any scheduled
/// dimension change so slot j has the shape of step j.
Window initial_window(const UpdateRule& rule, const ParamState& theta0, std::int64_t p,
                      std::int64_t horizon);

struct RoundOutput {
    std::vector<ParamState> states;  // iteration k+1, steps base..base+size
    RoundErrors errors;
};

/// Gathers the drifts of slots 0..p-1 in parallel, then rolls out left to
/// right from the anchor. If the drift or rollout of slot j >= 1 is poisoned,
/// slots j+1.. become lifted clones of slot j and slots j.. get error +inf, so
/// the window cannot advance past j. Poisoning at slot 0 throws.
RoundOutput picard_round(const Window& window, const UpdateRule& rule, const Problem& problem,
                         WorkerPool& pool);

/// (1/D) * sum (new - old)^2 over values, D the larger length. Exactly 0 only
/// when the values are bitwise equal. When the lengths differ, `old` is first
/// put through the schedule's structural actions that lead up to new.step.
double fixed_point_distance(const ParamState& new_state, const ParamState& old_state,
                            const UpdateRule& rule);

/// Smallest j in 1..p with errors[j] > threshold, else p.
std::int64_t compute_skip(const RoundErrors& errors, double threshold);

/// Moves the window by `skip`, keeps new_states[skip..] and appends clones of
/// the last state. `round_errors` (slots 1..p) seeds slot_error of kept slots.
Window advance_window(const Window& window, std::vector<ParamState> new_states, std::int64_t skip,
                      const UpdateRule& rule, std::int64_t horizon,
                      std::span<const double> round_errors = {});

/// EMA over the finite slot errors; e is unchanged when none are finite.
ThresholdState update_threshold(const ThresholdState& ts, const RoundErrors& errors);

struct EngineConfig {
    std::int64_t steps = 100;
    std::int64_t window = 7;
    double threshold = 1e-6;
    double gamma = 0.9;
    Aggregation aggregation = Aggregation::median;
    /// Keep every committed state (steps 0..T) in RunResult::trajectory.
    bool keep_trajectory = false;
};

/// Throws ConfigError naming the "engine.*" field.
void validate_engine_config(const EngineConfig& config);

/// Window contents after a round, before the window moves. Round 0 is the
/// initial guess.
struct RoundSnapshot {
    std::int64_t round = 0;
    std::int64_t base_step = 0;
    std::vector<ParamState> states;
};

using SnapshotFn = std::function<void(const RoundSnapshot&)>;

struct RunResult {
    ParamState terminal;
    std::vector<RoundRecord> records;
    std::vector<ParamState> trajectory;
    double wall_time_ms = 0.0;
    double final_loss = 0.0;
    bool partial = false;
};

/// Thrown by run() when a round fails. Holds what was finished so far, the
/// window at the time of failure and the original exception.
class RunAborted : public Error {
public:
    RunAborted(RunResult partial, Window window, std::exception_ptr cause, const std::string& what);

    const RunResult& partial() const noexcept { return partial_; }
    const Window& window() const noexcept { return window_; }
    std::exception_ptr cause() const noexcept { return cause_; }

private:
    RunResult partial_;
    Window window_;
    std::exception_ptr cause_;
};

/// Loss used for the reported final objective: seed T + seed_offset.
double evaluation_loss(const Problem& problem, const ParamState& state, std::uint64_t seed_offset);

RunResult run(const UpdateRule& rule, const Problem& problem, const ParamState& theta0,
              const EngineConfig& config, WorkerPool& pool, const SnapshotFn& on_round = {});

}  // namespace picard
