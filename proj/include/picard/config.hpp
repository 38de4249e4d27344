// Copyright 2026 The picard-bench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "picard/engine.hpp"
#include "picard/problems.hpp"
#include "picard/update_rules.hpp"

namespace picard {

enum class RunMode { engine, oracle, both, sweep };

std::string to_string(RunMode mode);
RunMode parse_run_mode(std::string_view name);

/// How `both` mode judges the engine against the oracle.
struct CheckSpec {
    enum class Kind { automatic, bitexact, tolerance, loss };
    Kind kind = Kind::automatic;
    double value = 0.0;  // tolerance: max |delta|; loss: relative final-loss band
};

std::string to_string(const CheckSpec& check);
/// "auto", "bitexact", "tolerance:1e-9", "loss:0.05"
CheckSpec parse_check(std::string_view text);

struct SweepSpec {
    std::string axis;  // window | gamma | cost | threshold | batch
    std::vector<double> values;
};

/// Everything a run needs. Unset optionals are filled in by resolve_config.
struct RunConfig {
    ProblemSpec problem;

    RuleKind rule = RuleKind::adam;
    std::optional<double> step_size;
    AdamParams adam;
    std::vector<ScheduleEvent> schedule;
    double cv_weight = 0.25;

    std::int64_t steps = 200;
    std::optional<std::int64_t> window;  // default workers - 1, at least 1
    double threshold = 1e-6;
    std::optional<double> gamma;  // default 0.9, or 1.0 when threshold == 0
    Aggregation aggregation = Aggregation::median;

    int workers = 8;
    std::uint64_t seed_offset = 0;
    double injected_cost_ms = 0.0;

    RunMode mode = RunMode::engine;
    CheckSpec check;
    std::string out_dir = "out";
    std::string prefix = "run";
    bool checkpoint = true;

    SweepSpec sweep;
};

/// Sets one dotted key ("engine.gamma", "problem.kind", ...) from text.
/// Throws ConfigError naming the key on unknown keys or unparsable values.
void apply_setting(RunConfig& config, std::string_view key, std::string_view value);

/// Flat INI-like file: `[section]` headers, `key = value` lines, `#` or `;`
/// comments. Keys are applied in file order on top of `base`.
RunConfig load_config_file(const std::filesystem::path& path, RunConfig base = {});
RunConfig parse_config_text(std::string_view text, RunConfig base = {}, std::string_view origin = "<text>");

/// defaults < file < PICARD_OUT_DIR < overrides (applied in order).
RunConfig build_config(const std::optional<std::filesystem::path>& file,
                       const std::vector<std::pair<std::string, std::string>>& overrides,
                       const char* env_out_dir);

/// "40:split:0,1; 120:prune:2"
std::vector<ScheduleEvent> parse_schedule(std::string_view text);
std::string format_schedule(const std::vector<ScheduleEvent>& schedule);

/// Learning rate used when rule.step_size is not given.
double default_step_size(ProblemKind problem, RuleKind rule);

/// Fills defaults and validates. Throws ConfigError with the offending field.
RunConfig resolve_config(RunConfig config);

EngineConfig engine_config(const RunConfig& config);
/// Rule for a resolved config; point width and horizon come from the problem.
UpdateRule make_rule(const RunConfig& config, const Problem& problem);

nlohmann::json config_to_json(const RunConfig& config);

}  // namespace picard
