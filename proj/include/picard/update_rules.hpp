// Copyright 2026 The picard-bench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "picard/problems.hpp"
#include "picard/state.hpp"

namespace picard {

enum class RuleKind { euler_ode, sgd, adam, split_prune_sgd, adaptive_guidance };

std::string to_string(RuleKind kind);
RuleKind parse_rule_kind(std::string_view name);

struct AdamParams {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

enum class ScheduleAction { split, prune };

/// Dimension change applied when stepping from `step` to `step + 1`.
struct ScheduleEvent {
    std::int64_t step = 0;
    ScheduleAction action = ScheduleAction::split;
    std::vector<std::int64_t> indices;  // point indices in the pre-event state
};

/// A sequential computation split into a parallel drift `s` and a cheap
/// sequential pseudo-inverse `h_dagger` (see rollout_one).
struct UpdateRule {
    RuleKind kind = RuleKind::sgd;
    double step_size = 0.1;
    std::int64_t horizon = 0;          // euler_ode: T, the Euler step is 1/T
    std::optional<AdamParams> adam;    // adam, adaptive_guidance
    std::vector<ScheduleEvent> schedule;  // split_prune_sgd
    std::int64_t point_width = 1;
    double cv_weight = 0.25;           // adaptive_guidance control-variate weight
};

UpdateRule make_euler_rule(std::int64_t horizon);
UpdateRule make_sgd_rule(double step_size);
UpdateRule make_adam_rule(double step_size, AdamParams params = {});
UpdateRule make_split_prune_rule(double step_size, std::int64_t point_width,
                                 std::vector<ScheduleEvent> schedule);
UpdateRule make_adaptive_rule(double step_size, AdamParams params = {}, double cv_weight = 0.25);

bool is_momentum_based(const UpdateRule& rule);
/// Only adaptive_guidance depends on worker-local state.
bool is_deterministic(const UpdateRule& rule);

/// Throws ConfigError (field "rule.*") if fields do not fit the kind or the
/// schedule is not strictly increasing below `horizon`.
void validate_rule(const UpdateRule& rule, std::int64_t horizon);

/// Attaches zeroed moments for momentum-based rules.
ParamState prepare_initial(const UpdateRule& rule, ParamState state);

/// Per-worker running estimate of the gradient (the auxiliary model of the
/// approximate adaptive_guidance mode).
struct AuxModel {
    static constexpr double kDecay = 0.95;
    std::vector<double> ema_grad;
    std::int64_t updates_seen = 0;
};

/// The parallel computational unit s(theta). Pure except that
/// adaptive_guidance reads and updates `aux`.
Drift drift(const UpdateRule& rule, const Problem& problem, const ParamState& state,
            std::uint64_t seed, AuxModel* aux = nullptr);

/// Pseudo-inverse: successor of `state` (step + 1) given a drift computed at
/// the same step index, possibly from a different iterate.
ParamState rollout_one(const UpdateRule& rule, const Drift& drift, const ParamState& state);

/// g(theta) = rollout_one(drift(theta), theta).
ParamState sequential_step(const UpdateRule& rule, const Problem& problem, const ParamState& state,
                           std::uint64_t seed, AuxModel* aux = nullptr);

// --- dimension changes (split_prune_sgd) ---------------------------------

const ScheduleEvent* event_at(const UpdateRule& rule, std::int64_t step);

/// Deterministic split offset of norm 1e-2 for the child of `parent_index`.
std::vector<double> split_offset(std::int64_t parent_index, std::int64_t width);

/// Applies the structural part of an event (unproj for split-and-clone, proj
/// for pruning) without any gradient step. Moments follow their points.
ParamState apply_structure(const UpdateRule& rule, const ParamState& state, const ScheduleEvent& event);

/// Moves a state to `target_step` by applying the structural actions of all
/// events in [state.step, target_step). Values are otherwise unchanged.
ParamState lift_to_step(const UpdateRule& rule, ParamState state, std::int64_t target_step);

/// Restricts a drift with extra points to `target_points` surviving points,
/// the deletion set being the one the schedule implies at `step`: the
/// children appended by a split, or the indices of a prune.
std::vector<double> project_drift_dim(const UpdateRule& rule, std::span<const double> full_grad,
                                      std::int64_t target_points, std::int64_t step);

}  // namespace picard
