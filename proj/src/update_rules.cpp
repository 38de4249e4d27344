// Copyright 2026 The picard-bench Authors
// SPDX-License-Identifier: Apache-2.0

#include "picard/update_rules.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "picard/errors.hpp"
#include "picard/rng.hpp"

namespace picard {

namespace {

constexpr double kSplitOffsetNorm = 1e-2;

void require_finite_output(const ParamState& out, const Drift& d) {
    if (!all_finite(out.values))
        throw PoisonedDrift(d.step, d.seed, "rollout produced non-finite parameters");
}

void check_payload(const Drift& d, const ParamState& state) {
    if (d.step != state.step)
        throw DimensionError("drift step " + std::to_string(d.step) + " does not match state step " +
                             std::to_string(state.step));
    if (d.payload.size() != state.values.size())
        throw DimensionError("drift length " + std::to_string(d.payload.size()) +
                             " does not match state length " + std::to_string(state.values.size()) +
                             " at step " + std::to_string(state.step));
}

ParamState adam_update(const AdamParams& p, double lr, const Drift& d, const ParamState& state) {
    const auto n = state.values.size();
    MomentState m = state.moments.value_or(MomentState{});
    if (m.m1.empty() && m.m2.empty()) {
        m.m1.assign(n, 0.0);
        m.m2.assign(n, 0.0);
    }
    if (m.m1.size() != n || m.m2.size() != n)
        throw DimensionError("moment length does not match values at step " + std::to_string(state.step));

    ParamState out;
    out.step = state.step + 1;
    out.dim_tag = state.dim_tag;
    out.aux_version = d.aux_version;
    out.values.resize(n);
    m.t += 1;
    const double bc1 = 1.0 - std::pow(p.beta1, static_cast<double>(m.t));
    const double bc2 = 1.0 - std::pow(p.beta2, static_cast<double>(m.t));
    for (std::size_t i = 0; i < n; ++i) {
        const double g = d.payload[i];
        m.m1[i] = p.beta1 * m.m1[i] + (1.0 - p.beta1) * g;
        m.m2[i] = p.beta2 * m.m2[i] + (1.0 - p.beta2) * g * g;
        const double m1_hat = m.m1[i] / bc1;
        const double m2_hat = m.m2[i] / bc2;
        out.values[i] = state.values[i] - lr * m1_hat / (std::sqrt(m2_hat) + p.epsilon);
    }
    out.moments = std::move(m);
    return out;
}

ParamState sgd_update(double lr, const Drift& d, const ParamState& state) {
    ParamState out;
    out.step = state.step + 1;
    out.dim_tag = state.dim_tag;
    out.aux_version = state.aux_version;
    out.values.resize(state.values.size());
    for (std::size_t i = 0; i < state.values.size(); ++i)
        out.values[i] = state.values[i] - lr * d.payload[i];
    return out;
}

}  // namespace

std::string to_string(RuleKind kind) {
    switch (kind) {
        case RuleKind::euler_ode: return "euler_ode";
        case RuleKind::sgd: return "sgd";
        case RuleKind::adam: return "adam";
        case RuleKind::split_prune_sgd: return "split_prune_sgd";
        case RuleKind::adaptive_guidance: return "adaptive_guidance";
    }
    return "unknown";
}

RuleKind parse_rule_kind(std::string_view name) {
    for (auto k : {RuleKind::euler_ode, RuleKind::sgd, RuleKind::adam, RuleKind::split_prune_sgd,
                   RuleKind::adaptive_guidance}) {
        if (to_string(k) == name) return k;
    }
    throw ConfigError("rule.kind", "unknown rule '" + std::string(name) + "'");
}

UpdateRule make_euler_rule(std::int64_t horizon) {
    UpdateRule r;
    r.kind = RuleKind::euler_ode;
    r.horizon = horizon;
    r.step_size = 1.0 / static_cast<double>(horizon);
    return r;
}

UpdateRule make_sgd_rule(double step_size) {
    UpdateRule r;
    r.kind = RuleKind::sgd;
    r.step_size = step_size;
    return r;
}

UpdateRule make_adam_rule(double step_size, AdamParams params) {
    UpdateRule r;
    r.kind = RuleKind::adam;
    r.step_size = step_size;
    r.adam = params;
    return r;
}

UpdateRule make_split_prune_rule(double step_size, std::int64_t point_width,
                                 std::vector<ScheduleEvent> schedule) {
    UpdateRule r;
    r.kind = RuleKind::split_prune_sgd;
    r.step_size = step_size;
    r.point_width = point_width;
    r.schedule = std::move(schedule);
    return r;
}

UpdateRule make_adaptive_rule(double step_size, AdamParams params, double cv_weight) {
    UpdateRule r;
    r.kind = RuleKind::adaptive_guidance;
    r.step_size = step_size;
    r.adam = params;
    r.cv_weight = cv_weight;
    return r;
}

bool is_momentum_based(const UpdateRule& rule) {
    return rule.kind == RuleKind::adam || rule.kind == RuleKind::adaptive_guidance;
}

bool is_deterministic(const UpdateRule& rule) {
    return rule.kind != RuleKind::adaptive_guidance;
}

void validate_rule(const UpdateRule& rule, std::int64_t horizon) {
    if (!(rule.step_size > 0.0) || !std::isfinite(rule.step_size))
        throw ConfigError("rule.step_size", "must be a finite value > 0");
    const bool wants_adam = is_momentum_based(rule);
    if (wants_adam && !rule.adam) throw ConfigError("rule.adam", "required for " + to_string(rule.kind));
    if (!wants_adam && rule.adam) throw ConfigError("rule.adam", "not used by " + to_string(rule.kind));
    if (rule.adam) {
        const auto& a = *rule.adam;
        if (!(a.beta1 >= 0.0 && a.beta1 < 1.0)) throw ConfigError("rule.beta1", "must be in [0, 1)");
        if (!(a.beta2 >= 0.0 && a.beta2 < 1.0)) throw ConfigError("rule.beta2", "must be in [0, 1)");
        if (!(a.epsilon > 0.0)) throw ConfigError("rule.epsilon", "must be > 0");
    }
    if (rule.kind == RuleKind::euler_ode) {
        if (rule.horizon < 1) throw ConfigError("rule.horizon", "must be >= 1");
        if (rule.horizon != horizon)
            throw ConfigError("rule.horizon", "must equal engine.steps (" + std::to_string(horizon) + ")");
    }
    if (rule.kind == RuleKind::adaptive_guidance && !(rule.cv_weight >= 0.0))
        throw ConfigError("rule.cv_weight", "must be >= 0");
    if (rule.kind == RuleKind::split_prune_sgd && rule.schedule.empty())
        throw ConfigError("rule.schedule", "required for split_prune_sgd");
    if (rule.kind != RuleKind::split_prune_sgd && !rule.schedule.empty())
        throw ConfigError("rule.schedule", "only valid for split_prune_sgd");
    if (rule.point_width < 1) throw ConfigError("rule.point_width", "must be >= 1");

    std::int64_t prev = -1;
    for (const auto& ev : rule.schedule) {
        if (ev.step <= prev) throw ConfigError("rule.schedule", "steps must be strictly increasing");
        if (ev.step < 0 || ev.step >= horizon)
            throw ConfigError("rule.schedule", "step " + std::to_string(ev.step) + " outside [0, " +
                                                   std::to_string(horizon) + ")");
        if (ev.indices.empty()) throw ConfigError("rule.schedule", "event at step " + std::to_string(ev.step) + " has no indices");
        for (auto i : ev.indices) {
            if (i < 0) throw ConfigError("rule.schedule", "negative point index");
        }
        prev = ev.step;
    }
}

ParamState prepare_initial(const UpdateRule& rule, ParamState state) {
    if (is_momentum_based(rule) && !state.moments) {
        state.moments = MomentState{std::vector<double>(state.values.size(), 0.0),
                                    std::vector<double>(state.values.size(), 0.0), 0};
    }
    return state;
}

Drift drift(const UpdateRule& rule, const Problem& problem, const ParamState& state,
            std::uint64_t seed, AuxModel* aux) {
    Drift d;
    d.step = state.step;
    d.seed = seed;
    d.aux_version = state.aux_version;
    switch (rule.kind) {
        case RuleKind::euler_ode: {
            const double u = static_cast<double>(state.step) / static_cast<double>(rule.horizon);
            d.payload = problem.ode_rhs(state.values, u, seed);
            break;
        }
        case RuleKind::sgd:
        case RuleKind::adam:
        case RuleKind::split_prune_sgd:
            d.payload = problem.grad(state.values, seed);
            break;
        case RuleKind::adaptive_guidance: {
            if (aux == nullptr) throw Error("adaptive_guidance drift needs an auxiliary model");
            auto g = problem.grad(state.values, seed);
            if (aux->ema_grad.size() != g.size()) aux->ema_grad = g;  // no prediction yet
            d.payload.resize(g.size());
            // g + w (g - prediction): vanishes into g once the estimate tracks g
            for (std::size_t i = 0; i < g.size(); ++i)
                d.payload[i] = g[i] + rule.cv_weight * (g[i] - aux->ema_grad[i]);
            for (std::size_t i = 0; i < g.size(); ++i)
                aux->ema_grad[i] = AuxModel::kDecay * aux->ema_grad[i] + (1.0 - AuxModel::kDecay) * g[i];
            aux->updates_seen += 1;
            d.aux_version = aux->updates_seen;
            break;
        }
    }
    if (!all_finite(d.payload)) throw PoisonedDrift(d.step, seed, "non-finite drift payload");
    return d;
}

ParamState rollout_one(const UpdateRule& rule, const Drift& d, const ParamState& state) {
    check_payload(d, state);
    ParamState out;
    switch (rule.kind) {
        case RuleKind::euler_ode: {
            const double h = 1.0 / static_cast<double>(rule.horizon);
            out.step = state.step + 1;
            out.dim_tag = state.dim_tag;
            out.aux_version = state.aux_version;
            out.values.resize(state.values.size());
            for (std::size_t i = 0; i < state.values.size(); ++i)
                out.values[i] = state.values[i] + h * d.payload[i];
            break;
        }
        case RuleKind::sgd:
            out = sgd_update(rule.step_size, d, state);
            break;
        case RuleKind::adam:
        case RuleKind::adaptive_guidance:
            out = adam_update(*rule.adam, rule.step_size, d, state);
            break;
        case RuleKind::split_prune_sgd: {
            out = sgd_update(rule.step_size, d, state);
            if (const auto* ev = event_at(rule, state.step)) {
                out = apply_structure(rule, out, *ev);
            }
            break;
        }
    }
    require_finite_output(out, d);
    return out;
}

ParamState sequential_step(const UpdateRule& rule, const Problem& problem, const ParamState& state,
                           std::uint64_t seed, AuxModel* aux) {
    return rollout_one(rule, drift(rule, problem, state, seed, aux), state);
}

const ScheduleEvent* event_at(const UpdateRule& rule, std::int64_t step) {
    const auto it = std::lower_bound(rule.schedule.begin(), rule.schedule.end(), step,
                                     [](const ScheduleEvent& e, std::int64_t s) { return e.step < s; });
    return it != rule.schedule.end() && it->step == step ? &*it : nullptr;
}

std::vector<double> split_offset(std::int64_t parent_index, std::int64_t width) {
    std::vector<double> dir(static_cast<std::size_t>(width));
    std::uint64_t h = splitmix64(static_cast<std::uint64_t>(parent_index) ^ 0x73706c6974ULL);
    double norm2 = 0.0;
    for (auto& v : dir) {
        h = splitmix64(h);
        v = static_cast<double>(h >> 11) * 0x1.0p-53 * 2.0 - 1.0;
        norm2 += v * v;
    }
    if (norm2 == 0.0) {
        dir[0] = 1.0;
        norm2 = 1.0;
    }
    const double scale = kSplitOffsetNorm / std::sqrt(norm2);
    for (auto& v : dir) v *= scale;
    return dir;
}

ParamState apply_structure(const UpdateRule& rule, const ParamState& state, const ScheduleEvent& ev) {
    const auto w = static_cast<std::size_t>(rule.point_width);
    if (state.values.size() % w != 0)
        throw DimensionError("values length is not a multiple of the point width");
    const auto points = static_cast<std::int64_t>(state.values.size() / w);
    for (auto i : ev.indices) {
        if (i < 0 || i >= points)
            throw ScheduleError("schedule event at step " + std::to_string(ev.step) + " references point " +
                                std::to_string(i) + " but the state has " + std::to_string(points));
    }

    ParamState out = state;
    auto take_point = [w](const std::vector<double>& src, std::int64_t p) {
        const auto b = src.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(p) * w);
        return std::vector<double>(b, b + static_cast<std::ptrdiff_t>(w));
    };

    if (ev.action == ScheduleAction::split) {
        for (auto parent : ev.indices) {
            auto child = take_point(state.values, parent);
            const auto delta = split_offset(parent, rule.point_width);
            for (std::size_t k = 0; k < w; ++k) child[k] += delta[k];
            out.values.insert(out.values.end(), child.begin(), child.end());
            if (out.moments) {
                const auto m1 = take_point(state.moments->m1, parent);
                const auto m2 = take_point(state.moments->m2, parent);
                out.moments->m1.insert(out.moments->m1.end(), m1.begin(), m1.end());
                out.moments->m2.insert(out.moments->m2.end(), m2.begin(), m2.end());
            }
        }
    } else {
        const std::set<std::int64_t> doomed(ev.indices.begin(), ev.indices.end());
        if (doomed.size() != ev.indices.size())
            throw ScheduleError("prune at step " + std::to_string(ev.step) + " lists a point twice");
        if (static_cast<std::int64_t>(doomed.size()) >= points)
            throw ScheduleError("prune at step " + std::to_string(ev.step) + " would remove every point");
        auto keep = [&](const std::vector<double>& src) {
            std::vector<double> dst;
            dst.reserve(src.size() - doomed.size() * w);
            for (std::int64_t p = 0; p < points; ++p) {
                if (doomed.count(p) != 0) continue;
                const auto b = src.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(p) * w);
                dst.insert(dst.end(), b, b + static_cast<std::ptrdiff_t>(w));
            }
            return dst;
        };
        out.values = keep(state.values);
        if (out.moments) {
            out.moments->m1 = keep(state.moments->m1);
            out.moments->m2 = keep(state.moments->m2);
        }
    }
    out.dim_tag = static_cast<std::int64_t>(out.values.size() / w);
    return out;
}

ParamState lift_to_step(const UpdateRule& rule, ParamState state, std::int64_t target_step) {
    if (target_step < state.step)
        throw DimensionError("cannot lift step " + std::to_string(state.step) + " back to " +
                             std::to_string(target_step));
    for (const auto& ev : rule.schedule) {
        if (ev.step >= state.step && ev.step < target_step) state = apply_structure(rule, state, ev);
    }
    state.step = target_step;
    return state;
}

std::vector<double> project_drift_dim(const UpdateRule& rule, std::span<const double> full_grad,
                                      std::int64_t target_points, std::int64_t step) {
    const auto w = static_cast<std::size_t>(rule.point_width);
    if (full_grad.size() % w != 0) throw DimensionError("drift length is not a multiple of the point width");
    const auto points = static_cast<std::int64_t>(full_grad.size() / w);
    if (target_points > points)
        throw DimensionError("cannot project " + std::to_string(points) + " points up to " +
                             std::to_string(target_points));
    if (target_points == points) return {full_grad.begin(), full_grad.end()};

    const auto* ev = event_at(rule, step);
    if (ev == nullptr || points - static_cast<std::int64_t>(ev->indices.size()) != target_points)
        throw DimensionError("no schedule event at step " + std::to_string(step) + " maps " +
                             std::to_string(points) + " points to " + std::to_string(target_points));
    if (ev->action == ScheduleAction::split) {
        // split-and-clone appends its children, so proj keeps the leading points
        return {full_grad.begin(), full_grad.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(target_points) * w)};
    }
    const std::set<std::int64_t> doomed(ev->indices.begin(), ev->indices.end());
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(target_points) * w);
    for (std::int64_t p = 0; p < points; ++p) {
        if (doomed.count(p) != 0) continue;
        const auto b = full_grad.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(p) * w);
        out.insert(out.end(), b, b + static_cast<std::ptrdiff_t>(w));
    }
    return out;
}

}  // namespace picard
