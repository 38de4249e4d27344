// Copyright 2026 The picard-bench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "picard/worker_pool.hpp"

namespace picard {

inline constexpr int kReportSchemaVersion = 1;

/// One Picard round as seen by the engine thread.
struct RoundRecord {
    std::int64_t round = 0;      // 0-based
    std::int64_t base_step = 0;  // window start before the round
    std::int64_t skip = 0;
    double threshold = 0.0;      // e used for this round's skip decision
    double err_min = 0.0;
    double err_med = 0.0;
    double err_max = 0.0;
};

/// Wall-clock fields. Everything here is non-deterministic and is kept apart
/// from the rest of the report so reruns can be compared byte for byte.
struct RunTiming {
    double wall_time_ms = 0.0;
    std::optional<double> oracle_wall_time_ms;
    std::optional<PoolTiming> pool;

    std::optional<double> speedup_wall() const;
};

struct RunReport {
    int schema_version = kReportSchemaVersion;
    std::int64_t rounds = 0;
    std::int64_t total_steps = 0;
    double speedup_rounds = 0.0;
    std::map<std::int64_t, std::int64_t> skip_histogram;
    std::vector<std::array<double, 3>> error_trace;  // (min, median, max)
    std::vector<double> threshold_trace;
    double final_loss = 0.0;
    std::int64_t final_dim_tag = 0;
    std::uint64_t terminal_checksum = 0;
    nlohmann::json config_echo = nlohmann::json::object();
    bool partial = false;
    std::vector<RoundRecord> records;
    RunTiming timing;
};

/// Aggregates round records. Unless `partial`, checks that the skips add up
/// to `total_steps` and throws ConsistencyError otherwise.
RunReport finalize_report(std::vector<RoundRecord> records, std::int64_t total_steps,
                          nlohmann::json config_echo, double final_loss, bool partial = false);

/// With include_timing = false the output is a pure function of the run.
nlohmann::json report_to_json(const RunReport& report, bool include_timing = true);
RunReport report_from_json(const nlohmann::json& j);

/// Header: round,base_step,skip,e,err_min,err_med,err_max
void write_rounds_csv(std::ostream& out, std::span<const RoundRecord> records);
std::string rounds_csv(std::span<const RoundRecord> records);
std::vector<RoundRecord> parse_rounds_csv(std::istream& in);

/// Header: step,loss
void write_losses_csv(std::ostream& out, std::span<const double> losses);

/// Shortest decimal text that reads back to the same double.
std::string format_double(double v);

}  // namespace picard
