// Copyright 2026 The picard-bench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "picard/config.hpp"
#include "picard/engine.hpp"
#include "picard/oracle.hpp"
#include "picard/telemetry.hpp"

namespace picard {

namespace exit_codes {
inline constexpr int ok = 0;
inline constexpr int check_failed = 1;
inline constexpr int config = 2;
inline constexpr int numeric = 3;
}  // namespace exit_codes

/// ConfigError and ScheduleError map to 2, everything else to 3.
int exit_code_for(std::exception_ptr error);

struct RunOutcome {
    RunConfig config;  // resolved
    std::optional<RunResult> engine;
    std::optional<RunReport> report;
    std::optional<Trajectory> oracle;
    std::optional<CompareReport> comparison;
    bool check_pass = true;
    std::string check_detail;
};

/// Runs the engine and/or the oracle for a config (engine, oracle or both
/// mode) in memory. `config` is resolved first. Throws on failure.
RunOutcome execute_run(const RunConfig& config);

/// Applies the configured comparison. Fills `comparison` for trajectory checks.
bool evaluate_check(const RunConfig& resolved, const RunResult& engine, const Trajectory& oracle,
                    std::optional<CompareReport>& comparison, std::string& detail);

/// `run` verb: execute_run plus artifacts under out_dir. Returns an exit code.
int cmd_run(const RunConfig& config, std::ostream& log);

struct SweepRow {
    std::string axis;
    double value = 0.0;
    bool ok = false;
    std::string status;
    std::int64_t rounds = 0;
    double speedup_rounds = 0.0;
    double speedup_wall = 0.0;
    double wall_time_ms = 0.0;
    double oracle_wall_time_ms = 0.0;
    double final_loss = 0.0;
    double oracle_final_loss = 0.0;
    std::optional<RunReport> report;
};

/// One engine run per axis value; oracle timings are cached per oracle
/// signature. Per-run failures are recorded and the sweep continues.
std::vector<SweepRow> run_sweep(const RunConfig& config, std::ostream& log);
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

/// `sweep` verb: run_sweep plus <prefix>_sweep.csv and per-run reports.
int cmd_sweep(const RunConfig& config, std::ostream& log);

/// Long-format CSV (report,axis,axis_value,metric,value) from every *.json
/// report in `reports_dir`. Malformed files are skipped with a warning.
int cmd_plotdata(const std::filesystem::path& reports_dir, std::ostream& csv, std::ostream& log);

struct ManifestEntry {
    std::string name;
    std::vector<std::pair<std::string, std::string>> settings;
    std::uint64_t checksum = 0;
};

/// One entry per line: `name key=value ... checksum=0x<16 hex digits>`.
std::vector<ManifestEntry> parse_manifest(std::istream& in);

/// Runs every manifest entry at zero threshold against the oracle and checks
/// the pinned terminal checksum. With `print_only` the computed manifest
/// lines are printed instead of compared.
int cmd_verify(const std::filesystem::path& manifest, std::ostream& log, bool print_only = false);

std::string hex64(std::uint64_t v);

}  // namespace picard
