// Copyright 2026 The picard-bench Authors
// SPDX-License-Identifier: Apache-2.0

#include "picard/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "picard/errors.hpp"

namespace picard {

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

double to_double(std::string_view field, std::string_view text) {
    const auto t = trim(text);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc{} || ptr != t.data() + t.size())
        throw ConfigError(std::string(field), "expected a number, got '" + std::string(text) + "'");
    return v;
}

std::int64_t to_int(std::string_view field, std::string_view text) {
    const auto t = trim(text);
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc{} || ptr != t.data() + t.size())
        throw ConfigError(std::string(field), "expected an integer, got '" + std::string(text) + "'");
    return v;
}

std::uint64_t to_uint(std::string_view field, std::string_view text) {
    const auto t = trim(text);
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc{} || ptr != t.data() + t.size())
        throw ConfigError(std::string(field), "expected a non-negative integer, got '" + std::string(text) + "'");
    return v;
}

bool to_bool(std::string_view field, std::string_view text) {
    const auto t = trim(text);
    if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
    if (t == "false" || t == "0" || t == "no" || t == "off") return false;
    throw ConfigError(std::string(field), "expected true or false, got '" + std::string(text) + "'");
}

template <class F>
void rethrow_as(std::string_view field, F&& f) {
    try {
        f();
    } catch (const ConfigError& e) {
        if (e.field() == field) throw;
        throw ConfigError(std::string(field), e.what());
    }
}

void require(bool ok, std::string_view field, const std::string& detail) {
    if (!ok) throw ConfigError(std::string(field), detail);
}

bool finite(double v) {
    return std::isfinite(v);
}

}  // namespace

std::string to_string(RunMode mode) {
    switch (mode) {
        case RunMode::engine: return "engine";
        case RunMode::oracle: return "oracle";
        case RunMode::both: return "both";
        case RunMode::sweep: return "sweep";
    }
    return "engine";
}

RunMode parse_run_mode(std::string_view name) {
    for (auto m : {RunMode::engine, RunMode::oracle, RunMode::both, RunMode::sweep}) {
        if (to_string(m) == name) return m;
    }
    throw ConfigError("output.mode", "expected engine, oracle, both or sweep, got '" + std::string(name) + "'");
}

std::string to_string(const CheckSpec& check) {
    switch (check.kind) {
        case CheckSpec::Kind::automatic: return "auto";
        case CheckSpec::Kind::bitexact: return "bitexact";
        case CheckSpec::Kind::tolerance: return "tolerance:" + format_double(check.value);
        case CheckSpec::Kind::loss: return "loss:" + format_double(check.value);
    }
    return "auto";
}

CheckSpec parse_check(std::string_view text) {
    const auto t = trim(text);
    if (t == "auto") return {};
    if (t == "bitexact") return {CheckSpec::Kind::bitexact, 0.0};
    const auto colon = t.find(':');
    if (colon != std::string_view::npos) {
        const auto head = t.substr(0, colon);
        const double v = to_double("output.check", t.substr(colon + 1));
        if (head == "tolerance") {
            require(v >= 0.0 && finite(v), "output.check", "tolerance must be >= 0");
            return {CheckSpec::Kind::tolerance, v};
        }
        if (head == "loss") {
            require(v > 0.0 && finite(v), "output.check", "relative loss band must be > 0");
            return {CheckSpec::Kind::loss, v};
        }
    }
    throw ConfigError("output.check",
                      "expected auto, bitexact, tolerance:<eps> or loss:<rel>, got '" + std::string(text) + "'");
}

std::vector<ScheduleEvent> parse_schedule(std::string_view text) {
    std::vector<ScheduleEvent> out;
    for (auto item : split(text, ';')) {
        if (item.empty()) continue;
        const auto parts = split(item, ':');
        if (parts.size() != 3)
            throw ConfigError("rule.schedule", "expected step:action:indices, got '" + std::string(item) + "'");
        ScheduleEvent ev;
        ev.step = to_int("rule.schedule", parts[0]);
        if (parts[1] == "split") {
            ev.action = ScheduleAction::split;
        } else if (parts[1] == "prune") {
            ev.action = ScheduleAction::prune;
        } else {
            throw ConfigError("rule.schedule", "unknown action '" + std::string(parts[1]) + "'");
        }
        for (auto idx : split(parts[2], ',')) ev.indices.push_back(to_int("rule.schedule", idx));
        out.push_back(std::move(ev));
    }
    return out;
}

std::string format_schedule(const std::vector<ScheduleEvent>& schedule) {
    std::string s;
    for (const auto& ev : schedule) {
        if (!s.empty()) s += "; ";
        s += std::to_string(ev.step) + (ev.action == ScheduleAction::split ? ":split:" : ":prune:");
        for (std::size_t i = 0; i < ev.indices.size(); ++i) {
            if (i) s += ',';
            s += std::to_string(ev.indices[i]);
        }
    }
    return s;
}

void apply_setting(RunConfig& c, std::string_view key_in, std::string_view value_in) {
    const auto key = trim(key_in);
    const auto value = trim(value_in);
    const std::string k(key);
    auto& p = c.problem;
    if (key == "problem.kind") {
        rethrow_as(key, [&] { p.kind = parse_problem_kind(value); });
    } else if (key == "problem.dim") {
        p.dim = to_int(key, value);
    } else if (key == "problem.data_seed") {
        p.data_seed = to_uint(key, value);
    } else if (key == "problem.noise") {
        p.noise = to_double(key, value);
    } else if (key == "problem.condition") {
        p.condition = to_double(key, value);
    } else if (key == "problem.rows") {
        p.rows = to_int(key, value);
    } else if (key == "problem.batch") {
        p.batch = to_int(key, value);
    } else if (key == "problem.samples") {
        p.samples = to_int(key, value);
    } else if (key == "problem.points") {
        p.points = to_int(key, value);
    } else if (key == "problem.target_points") {
        p.target_points = to_int(key, value);
    } else if (key == "problem.decay") {
        p.decay = to_double(key, value);
    } else if (key == "problem.rotation") {
        p.rotation = to_double(key, value);
    } else if (key == "rule.kind") {
        rethrow_as(key, [&] { c.rule = parse_rule_kind(value); });
    } else if (key == "rule.step_size" || key == "rule.lr") {
        c.step_size = to_double("rule.step_size", value);
    } else if (key == "rule.beta1") {
        c.adam.beta1 = to_double(key, value);
    } else if (key == "rule.beta2") {
        c.adam.beta2 = to_double(key, value);
    } else if (key == "rule.epsilon") {
        c.adam.epsilon = to_double(key, value);
    } else if (key == "rule.schedule") {
        c.schedule = parse_schedule(value);
    } else if (key == "rule.cv_weight") {
        c.cv_weight = to_double(key, value);
    } else if (key == "engine.steps") {
        c.steps = to_int(key, value);
    } else if (key == "engine.window") {
        c.window = to_int(key, value);
    } else if (key == "engine.threshold") {
        c.threshold = to_double(key, value);
    } else if (key == "engine.gamma") {
        c.gamma = to_double(key, value);
    } else if (key == "engine.aggregation") {
        c.aggregation = parse_aggregation(value);
    } else if (key == "pool.workers") {
        const auto w = to_int(key, value);
        require(w >= 1 && w <= 1024, key, "must be in [1, 1024]");
        c.workers = static_cast<int>(w);
    } else if (key == "pool.seed_offset") {
        c.seed_offset = to_uint(key, value);
    } else if (key == "pool.injected_cost_ms") {
        c.injected_cost_ms = to_double(key, value);
    } else if (key == "output.dir") {
        c.out_dir = std::string(value);
    } else if (key == "output.prefix") {
        c.prefix = std::string(value);
    } else if (key == "output.mode") {
        c.mode = parse_run_mode(value);
    } else if (key == "output.check") {
        c.check = parse_check(value);
    } else if (key == "output.checkpoint") {
        c.checkpoint = to_bool(key, value);
    } else if (key == "sweep.axis") {
        c.sweep.axis = std::string(value);
    } else if (key == "sweep.values") {
        c.sweep.values.clear();
        for (auto v : split(value, ',')) {
            if (!v.empty()) c.sweep.values.push_back(to_double(key, v));
        }
    } else {
        throw ConfigError(k, "unknown setting");
    }
}

RunConfig parse_config_text(std::string_view text, RunConfig base, std::string_view origin) {
    std::string section;
    std::size_t line_no = 0;
    for (auto raw : split(text, '\n')) {
        ++line_no;
        auto line = raw;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        // ';' also separates schedule events, so it only starts a comment at column 0
        if (line.empty() || line.front() == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("config", std::string(origin) + ":" + std::to_string(line_no) + ": bad section header");
            section = std::string(trim(line.substr(1, line.size() - 2)));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError("config", std::string(origin) + ":" + std::to_string(line_no) + ": expected key = value");
        const auto name = trim(line.substr(0, eq));
        const std::string key = section.empty() ? std::string(name) : section + "." + std::string(name);
        apply_setting(base, key, line.substr(eq + 1));
    }
    return base;
}

RunConfig load_config_file(const std::filesystem::path& path, RunConfig base) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config", "cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), std::move(base), path.string());
}

RunConfig build_config(const std::optional<std::filesystem::path>& file,
                       const std::vector<std::pair<std::string, std::string>>& overrides,
                       const char* env_out_dir) {
    RunConfig c;
    if (file) c = load_config_file(*file, c);
    if (env_out_dir != nullptr && *env_out_dir != '\0') c.out_dir = env_out_dir;
    for (const auto& [k, v] : overrides) apply_setting(c, k, v);
    return c;
}

double default_step_size(ProblemKind problem, RuleKind rule) {
    const bool adam_like = rule == RuleKind::adam || rule == RuleKind::adaptive_guidance;
    switch (problem) {
        case ProblemKind::quadratic: return adam_like ? 0.01 : 0.1;
        case ProblemKind::rosenbrock: return adam_like ? 0.01 : 2e-4;
        case ProblemKind::stochastic_lsq: return adam_like ? 0.02 : 0.05;
        case ProblemKind::tiny_mlp: return adam_like ? 0.002 : 0.1;
        case ProblemKind::splat2d: return adam_like ? 0.003 : 2e-4;
        case ProblemKind::linear_ode: return adam_like ? 0.01 : 0.1;
    }
    return 0.01;
}

RunConfig resolve_config(RunConfig c) {
    const auto& p = c.problem;
    require(p.dim >= 1 && p.dim <= 1'000'000, "problem.dim", "must be in [1, 1e6]");
    require(p.noise >= 0.0 && finite(p.noise), "problem.noise", "must be a finite value >= 0");
    require(p.condition >= 1.0 && finite(p.condition), "problem.condition", "must be >= 1");
    require(p.rows >= 1, "problem.rows", "must be >= 1");
    require(p.batch >= 1, "problem.batch", "must be >= 1");
    require(p.samples >= 1, "problem.samples", "must be >= 1");
    require(p.points >= 1, "problem.points", "must be >= 1");
    require(p.target_points >= 1, "problem.target_points", "must be >= 1");
    require(finite(p.decay), "problem.decay", "must be finite");
    require(finite(p.rotation), "problem.rotation", "must be finite");

    require(c.steps >= 1, "engine.steps", "must be >= 1");
    require(c.threshold >= 0.0 && finite(c.threshold), "engine.threshold", "must be a finite value >= 0");
    if (!c.gamma) c.gamma = c.threshold == 0.0 ? 1.0 : 0.9;
    require(*c.gamma >= 0.0 && *c.gamma <= 1.0, "engine.gamma", "must be in [0, 1]");
    if (!c.window) c.window = std::max<std::int64_t>(1, c.workers - 1);
    require(*c.window >= 1, "engine.window", "must be >= 1");
    require(c.workers >= 1, "pool.workers", "must be >= 1");
    require(c.injected_cost_ms >= 0.0 && finite(c.injected_cost_ms), "pool.injected_cost_ms",
            "must be a finite value >= 0");
    if (!c.step_size) c.step_size = c.rule == RuleKind::euler_ode ? 1.0 / static_cast<double>(c.steps)
                                                                  : default_step_size(p.kind, c.rule);
    require(!c.out_dir.empty(), "output.dir", "must not be empty");
    require(!c.prefix.empty() && c.prefix.find('/') == std::string::npos, "output.prefix",
            "must be a plain file name prefix");

    if (c.mode == RunMode::sweep) {
        static const std::vector<std::string> axes{"window", "gamma", "cost", "threshold", "batch"};
        require(std::find(axes.begin(), axes.end(), c.sweep.axis) != axes.end(), "sweep.axis",
                "expected one of window, gamma, cost, threshold, batch");
        require(!c.sweep.values.empty(), "sweep.values", "needs at least one value");
    }

    // Building the problem and lifting theta0 through the schedule surfaces
    // problem-level and schedule errors before any work starts.
    const auto problem = make_problem(c.problem);
    const auto rule = make_rule(c, *problem);
    validate_rule(rule, c.steps);
    if (!rule.schedule.empty()) {
        try {
            (void)lift_to_step(rule, problem->initial_state(), c.steps);
        } catch (const ScheduleError& e) {
            throw ConfigError("rule.schedule", e.what());
        }
    }
    return c;
}

EngineConfig engine_config(const RunConfig& c) {
    EngineConfig e;
    e.steps = c.steps;
    e.window = c.window.value_or(std::max<std::int64_t>(1, c.workers - 1));
    e.threshold = c.threshold;
    e.gamma = c.gamma.value_or(c.threshold == 0.0 ? 1.0 : 0.9);
    e.aggregation = c.aggregation;
    return e;
}

UpdateRule make_rule(const RunConfig& c, const Problem& problem) {
    const double lr = c.step_size.value_or(default_step_size(problem.kind(), c.rule));
    UpdateRule r;
    switch (c.rule) {
        case RuleKind::euler_ode: r = make_euler_rule(c.steps); break;
        case RuleKind::sgd: r = make_sgd_rule(lr); break;
        case RuleKind::adam: r = make_adam_rule(lr, c.adam); break;
        case RuleKind::split_prune_sgd: r = make_split_prune_rule(lr, problem.point_width(), c.schedule); break;
        case RuleKind::adaptive_guidance: r = make_adaptive_rule(lr, c.adam, c.cv_weight); break;
    }
    r.point_width = problem.point_width();
    if (c.rule != RuleKind::split_prune_sgd) r.schedule = c.schedule;  // rejected later by validate_rule
    return r;
}

nlohmann::json config_to_json(const RunConfig& c) {
    const auto& p = c.problem;
    nlohmann::json j;
    j["problem"] = {{"kind", to_string(p.kind)},   {"dim", p.dim},         {"data_seed", p.data_seed},
                    {"noise", p.noise},            {"condition", p.condition}, {"rows", p.rows},
                    {"batch", p.batch},            {"samples", p.samples}, {"points", p.points},
                    {"target_points", p.target_points}, {"decay", p.decay}, {"rotation", p.rotation}};
    j["rule"] = {{"kind", to_string(c.rule)},
                 {"step_size", c.step_size ? nlohmann::json(*c.step_size) : nlohmann::json(nullptr)},
                 {"beta1", c.adam.beta1},
                 {"beta2", c.adam.beta2},
                 {"epsilon", c.adam.epsilon},
                 {"schedule", format_schedule(c.schedule)},
                 {"cv_weight", c.cv_weight}};
    j["engine"] = {{"steps", c.steps},
                   {"window", c.window ? nlohmann::json(*c.window) : nlohmann::json(nullptr)},
                   {"threshold", c.threshold},
                   {"gamma", c.gamma ? nlohmann::json(*c.gamma) : nlohmann::json(nullptr)},
                   {"aggregation", to_string(c.aggregation)}};
    j["pool"] = {{"workers", c.workers}, {"seed_offset", c.seed_offset}, {"injected_cost_ms", c.injected_cost_ms}};
    j["output"] = {{"mode", to_string(c.mode)}, {"check", to_string(c.check)}, {"prefix", c.prefix}};
    if (c.mode == RunMode::sweep) j["sweep"] = {{"axis", c.sweep.axis}, {"values", c.sweep.values}};
    return j;
}

}  // namespace picard
