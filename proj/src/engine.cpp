// Copyright 2026 The picard-bench Authors
// SPDX-License-Identifier: Apache-2.0

#include "picard/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace picard {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double squared_distance(std::span<const double> a, std::span<const double> b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        sum += d * d;
    }
    return sum;
}

}  // namespace

std::string to_string(Aggregation agg) {
    return agg == Aggregation::mean ? "mean" : "median";
}

Aggregation parse_aggregation(std::string_view name) {
    if (name == "mean") return Aggregation::mean;
    if (name == "median") return Aggregation::median;
    throw ConfigError("engine.aggregation", "expected mean or median, got '" + std::string(name) + "'");
}

double aggregate(std::span<const double> errors, Aggregation agg) {
    if (errors.empty()) return 0.0;
    if (agg == Aggregation::mean) {
        double sum = 0.0;
        for (double e : errors) sum += e;
        return sum / static_cast<double>(errors.size());
    }
    std::vector<double> sorted(errors.begin(), errors.end());
    std::sort(sorted.begin(), sorted.end());
    const auto n = sorted.size();
    return n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
}

Window initial_window(const UpdateRule& rule, const ParamState& theta0, std::int64_t p,
                      std::int64_t horizon) {
    if (p < 1) throw ConfigError("engine.window", "must be >= 1");
    Window w;
    w.base_step = theta0.step;
    w.capacity = p;
    w.size = std::min(p, horizon - theta0.step);
    w.states.reserve(static_cast<std::size_t>(w.size + 1));
    w.states.push_back(theta0);
    for (std::int64_t j = 1; j <= w.size; ++j)
        w.states.push_back(lift_to_step(rule, w.states.back(), theta0.step + j));
    w.slot_error.assign(static_cast<std::size_t>(w.size + 1), kInf);
    w.slot_error[0] = 0.0;
    return w;
}

RoundOutput picard_round(const Window& window, const UpdateRule& rule, const Problem& problem,
                         WorkerPool& pool) {
    if (window.size < 1) throw ConsistencyError("picard_round on an empty window");
    if (static_cast<std::int64_t>(window.states.size()) != window.size + 1)
        throw ConsistencyError("window holds " + std::to_string(window.states.size()) + " states for size " +
                               std::to_string(window.size));
    const auto p = static_cast<std::size_t>(window.size);
    auto gathered =
        pool.gather_drifts_partial(rule, problem, std::span<const ParamState>(window.states.data(), p));
    // A poisoned drift or rollout past slot 0 only invalidates speculative
    // slots. The anchor's own failure is final.
    if (gathered.valid == 0) std::rethrow_exception(gathered.failure);
    const auto& drifts = gathered.drifts;

    RoundOutput out;
    out.states.reserve(p + 1);
    out.states.push_back(window.states[0]);
    std::size_t good = p;
    for (std::size_t j = 0; j < p; ++j) {
        if (j == gathered.valid) {
            good = j;
            break;
        }
        const ParamState& prev = out.states.back();
        try {
            if (drifts[j].payload.size() > prev.values.size()) {
                // drift taken on a state that already holds points prev does not
                Drift d = drifts[j];
                d.payload = project_drift_dim(rule, d.payload, prev.dim_tag, d.step);
                out.states.push_back(rollout_one(rule, d, prev));
            } else {
                out.states.push_back(rollout_one(rule, drifts[j], prev));
            }
        } catch (const PoisonedDrift&) {
            if (j == 0) throw;
            good = j;
            break;
        }
    }
    while (out.states.size() < p + 1) {
        const auto next_step = window.base_step + static_cast<std::int64_t>(out.states.size());
        out.states.push_back(lift_to_step(rule, out.states.back(), next_step));
    }
    out.errors.per_slot.reserve(p);
    for (std::size_t j = 1; j <= p; ++j)
        out.errors.per_slot.push_back(good == p || j < good ? fixed_point_distance(out.states[j], window.states[j], rule) : kInf);
    return out;
}

double fixed_point_distance(const ParamState& new_state, const ParamState& old_state,
                            const UpdateRule& rule) {
    if (new_state.step != old_state.step)
        throw DimensionError("fixed_point_distance across steps " + std::to_string(new_state.step) + " and " +
                             std::to_string(old_state.step));
    const ParamState* old = &old_state;
    ParamState lifted;
    if (old_state.values.size() != new_state.values.size()) {
        // Replay ever longer suffixes of the schedule below new.step on old
        // until the shapes agree.
        bool found = false;
        std::vector<const ScheduleEvent*> events;
        for (const auto& ev : rule.schedule) {
            if (ev.step < new_state.step) events.push_back(&ev);
        }
        for (auto first = events.size(); first-- > 0 && !found;) {
            ParamState candidate = old_state;
            try {
                for (auto i = first; i < events.size(); ++i) candidate = apply_structure(rule, candidate, *events[i]);
            } catch (const Error&) {
                continue;
            }
            if (candidate.values.size() == new_state.values.size()) {
                lifted = std::move(candidate);
                found = true;
            }
        }
        if (!found)
            throw DimensionError("no schedule action reconciles " + std::to_string(old_state.values.size()) +
                                 " and " + std::to_string(new_state.values.size()) + " values at step " +
                                 std::to_string(new_state.step));
        old = &lifted;
    }
    const auto n = new_state.values.size();
    if (n == 0) return 0.0;
    const double d = squared_distance(new_state.values, old->values) / static_cast<double>(n);
    if (d == 0.0 && !bitwise_equal(new_state.values, old->values))
        return std::numeric_limits<double>::denorm_min();
    return std::isnan(d) ? kInf : d;
}

std::int64_t compute_skip(const RoundErrors& errors, double threshold) {
    const auto p = static_cast<std::int64_t>(errors.per_slot.size());
    if (p < 1) throw ConsistencyError("compute_skip with no errors");
    for (std::int64_t j = 1; j <= p; ++j) {
        if (errors.per_slot[static_cast<std::size_t>(j - 1)] > threshold) return j;
    }
    return p;
}

Window advance_window(const Window& window, std::vector<ParamState> new_states, std::int64_t skip,
                      const UpdateRule& rule, std::int64_t horizon, std::span<const double> round_errors) {
    if (skip < 1 || skip > window.size)
        throw ConsistencyError("skip " + std::to_string(skip) + " outside [1, " + std::to_string(window.size) + "]");
    if (static_cast<std::int64_t>(new_states.size()) != window.size + 1)
        throw ConsistencyError("advance_window expects size + 1 new states");

    Window w;
    w.base_step = window.base_step + skip;
    w.capacity = window.capacity;
    w.iteration = window.iteration + 1;
    w.size = std::min(window.capacity, horizon - w.base_step);
    const auto want = static_cast<std::size_t>(w.size + 1);
    w.states.reserve(want);
    for (auto j = static_cast<std::size_t>(skip); j < new_states.size() && w.states.size() < want; ++j) {
        w.states.push_back(std::move(new_states[j]));
        w.slot_error.push_back(j - 1 < round_errors.size() ? round_errors[j - 1] : kInf);
    }
    while (w.states.size() < want) {
        const auto next_step = w.base_step + static_cast<std::int64_t>(w.states.size());
        w.states.push_back(lift_to_step(rule, w.states.back(), next_step));
        w.slot_error.push_back(kInf);
    }
    return w;
}

ThresholdState update_threshold(const ThresholdState& ts, const RoundErrors& errors) {
    ThresholdState next = ts;
    if (ts.gamma == 1.0) return next;  // avoids 0 * inf when an error overflows
    std::vector<double> finite;
    finite.reserve(errors.per_slot.size());
    for (double e : errors.per_slot) {
        if (std::isfinite(e)) finite.push_back(e);
    }
    if (finite.empty()) return next;
    const double m = aggregate(finite, ts.agg);
    next.e = ts.gamma * ts.e + (1.0 - ts.gamma) * m;
    if (!(next.e >= 0.0)) next.e = 0.0;
    return next;
}

void validate_engine_config(const EngineConfig& c) {
    if (c.steps < 1) throw ConfigError("engine.steps", "must be >= 1");
    if (c.window < 1) throw ConfigError("engine.window", "must be >= 1");
    if (!(c.threshold >= 0.0) || !std::isfinite(c.threshold))
        throw ConfigError("engine.threshold", "must be a finite value >= 0");
    if (!(c.gamma >= 0.0 && c.gamma <= 1.0)) throw ConfigError("engine.gamma", "must be in [0, 1]");
}

RunAborted::RunAborted(RunResult partial, Window window, std::exception_ptr cause, const std::string& what)
    : Error(what), partial_(std::move(partial)), window_(std::move(window)), cause_(std::move(cause)) {}

double evaluation_loss(const Problem& problem, const ParamState& state, std::uint64_t seed_offset) {
    return problem.loss(state.values, static_cast<std::uint64_t>(state.step) + seed_offset);
}

RunResult run(const UpdateRule& rule, const Problem& problem, const ParamState& theta0,
              const EngineConfig& config, WorkerPool& pool, const SnapshotFn& on_round) {
    validate_engine_config(config);
    validate_rule(rule, config.steps);
    if (theta0.step != 0) throw ConfigError("engine.theta0", "initial state must be at step 0");
    validate_state(theta0, rule.point_width);

    const auto t0 = std::chrono::steady_clock::now();
    const auto horizon = config.steps;
    Window window = initial_window(rule, prepare_initial(rule, theta0), config.window, horizon);
    ThresholdState ts{config.threshold, config.gamma, config.aggregation};
    RunResult result;
    if (on_round) on_round(RoundSnapshot{0, window.base_step, window.states});

    try {
        while (window.base_step < horizon) {
            RoundOutput out = picard_round(window, rule, problem, pool);
            const auto skip = compute_skip(out.errors, ts.e);
            const auto& errs = out.errors.per_slot;
            RoundRecord rec;
            rec.round = static_cast<std::int64_t>(result.records.size());
            rec.base_step = window.base_step;
            rec.skip = skip;
            rec.threshold = ts.e;
            rec.err_min = *std::min_element(errs.begin(), errs.end());
            rec.err_med = aggregate(errs, Aggregation::median);
            rec.err_max = *std::max_element(errs.begin(), errs.end());
            result.records.push_back(rec);
            if (on_round) on_round(RoundSnapshot{rec.round + 1, window.base_step, out.states});
            if (config.keep_trajectory) {
                for (std::int64_t j = 0; j < skip; ++j)
                    result.trajectory.push_back(out.states[static_cast<std::size_t>(j)]);
            }

            window = advance_window(window, std::move(out.states), skip, rule, horizon, errs);
            ts = update_threshold(ts, out.errors);
        }
    } catch (const std::exception& e) {
        result.terminal = window.states.front();
        result.partial = true;
        result.wall_time_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        throw RunAborted(std::move(result), window, std::current_exception(),
                         std::string("run aborted at step ") + std::to_string(window.base_step) + ": " + e.what());
    }

    result.terminal = window.states.front();
    if (config.keep_trajectory) result.trajectory.push_back(result.terminal);
    result.wall_time_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    result.final_loss = evaluation_loss(problem, result.terminal, pool.seed_offset());
    return result;
}

}  // namespace picard
