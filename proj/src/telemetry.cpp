// Copyright 2026 The picard-bench Authors
// SPDX-License-Identifier: Apache-2.0

#include "picard/telemetry.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "picard/errors.hpp"

namespace picard {

namespace {

nlohmann::json json_number(double v) {
    // JSON has no infinities; telemetry only ever produces +inf for fresh slots
    if (std::isfinite(v)) return v;
    return std::isnan(v) ? nlohmann::json("nan") : nlohmann::json(v > 0 ? "inf" : "-inf");
}

double number_from_json(const nlohmann::json& j) {
    if (j.is_number()) return j.get<double>();
    const auto s = j.get<std::string>();
    if (s == "inf") return INFINITY;
    if (s == "-inf") return -INFINITY;
    return NAN;
}

double parse_double(const std::string& s) {
    double v = 0.0;
    const auto* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec == std::errc{} && ptr == end) return v;
    if (s == "inf") return INFINITY;
    if (s == "-inf") return -INFINITY;
    if (s == "nan") return NAN;
    throw Error("not a number: '" + s + "'");
}

}  // namespace

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

std::optional<double> RunTiming::speedup_wall() const {
    if (!oracle_wall_time_ms || wall_time_ms <= 0.0) return std::nullopt;
    return *oracle_wall_time_ms / wall_time_ms;
}

RunReport finalize_report(std::vector<RoundRecord> records, std::int64_t total_steps,
                          nlohmann::json config_echo, double final_loss, bool partial) {
    RunReport r;
    r.total_steps = total_steps;
    r.rounds = static_cast<std::int64_t>(records.size());
    r.final_loss = final_loss;
    r.partial = partial;
    r.config_echo = std::move(config_echo);
    std::int64_t covered = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& rec = records[i];
        if (rec.round != static_cast<std::int64_t>(i))
            throw ConsistencyError("round records out of order at index " + std::to_string(i));
        if (rec.base_step != covered)
            throw ConsistencyError("round " + std::to_string(rec.round) + " starts at step " +
                                   std::to_string(rec.base_step) + ", expected " + std::to_string(covered));
        if (rec.skip < 1) throw ConsistencyError("round " + std::to_string(rec.round) + " made no progress");
        r.skip_histogram[rec.skip] += 1;
        r.error_trace.push_back({rec.err_min, rec.err_med, rec.err_max});
        r.threshold_trace.push_back(rec.threshold);
        covered += rec.skip;
    }
    if (!partial && covered != total_steps)
        throw ConsistencyError("skips sum to " + std::to_string(covered) + " but the run has " +
                               std::to_string(total_steps) + " steps");
    r.speedup_rounds = r.rounds > 0 ? static_cast<double>(total_steps) / static_cast<double>(r.rounds) : 0.0;
    r.records = std::move(records);
    return r;
}

nlohmann::json report_to_json(const RunReport& r, bool include_timing) {
    nlohmann::json hist = nlohmann::json::object();
    for (const auto& [skip, count] : r.skip_histogram) hist[std::to_string(skip)] = count;
    nlohmann::json errors = nlohmann::json::array();
    for (const auto& e : r.error_trace) errors.push_back({json_number(e[0]), json_number(e[1]), json_number(e[2])});
    nlohmann::json thresholds = nlohmann::json::array();
    for (double e : r.threshold_trace) thresholds.push_back(json_number(e));

    nlohmann::json j;
    j["schema_version"] = r.schema_version;
    j["rounds"] = r.rounds;
    j["total_steps"] = r.total_steps;
    j["speedup_rounds"] = r.speedup_rounds;
    j["skip_histogram"] = hist;
    j["error_trace"] = errors;
    j["threshold_trace"] = thresholds;
    j["final_loss"] = json_number(r.final_loss);
    j["final_dim_tag"] = r.final_dim_tag;
    j["terminal_checksum"] = r.terminal_checksum;
    j["config_echo"] = r.config_echo;
    j["partial"] = r.partial;
    if (include_timing) {
        nlohmann::json t;
        t["wall_time_ms"] = r.timing.wall_time_ms;
        if (r.timing.oracle_wall_time_ms) t["oracle_wall_time_ms"] = *r.timing.oracle_wall_time_ms;
        if (auto s = r.timing.speedup_wall()) t["speedup_wall"] = *s;
        if (r.timing.pool) t["pool"] = to_json(*r.timing.pool);
        j["timing"] = t;
    }
    return j;
}

RunReport report_from_json(const nlohmann::json& j) {
    RunReport r;
    r.schema_version = j.at("schema_version").get<int>();
    if (r.schema_version != kReportSchemaVersion)
        throw Error("unsupported report schema_version " + std::to_string(r.schema_version));
    r.rounds = j.at("rounds").get<std::int64_t>();
    r.total_steps = j.at("total_steps").get<std::int64_t>();
    r.speedup_rounds = j.at("speedup_rounds").get<double>();
    for (const auto& [k, v] : j.at("skip_histogram").items()) r.skip_histogram[std::stoll(k)] = v.get<std::int64_t>();
    for (const auto& e : j.at("error_trace"))
        r.error_trace.push_back({number_from_json(e.at(0)), number_from_json(e.at(1)), number_from_json(e.at(2))});
    for (const auto& e : j.at("threshold_trace")) r.threshold_trace.push_back(number_from_json(e));
    r.final_loss = number_from_json(j.at("final_loss"));
    r.final_dim_tag = j.value("final_dim_tag", std::int64_t{0});
    r.terminal_checksum = j.value("terminal_checksum", std::uint64_t{0});
    r.config_echo = j.value("config_echo", nlohmann::json::object());
    r.partial = j.value("partial", false);
    if (j.contains("timing")) {
        const auto& t = j["timing"];
        r.timing.wall_time_ms = t.value("wall_time_ms", 0.0);
        if (t.contains("oracle_wall_time_ms")) r.timing.oracle_wall_time_ms = t["oracle_wall_time_ms"].get<double>();
    }
    return r;
}

void write_rounds_csv(std::ostream& out, std::span<const RoundRecord> records) {
    out << "round,base_step,skip,e,err_min,err_med,err_max\n";
    for (const auto& r : records) {
        out << r.round << ',' << r.base_step << ',' << r.skip << ',' << format_double(r.threshold) << ','
            << format_double(r.err_min) << ',' << format_double(r.err_med) << ',' << format_double(r.err_max)
            << '\n';
    }
}

std::string rounds_csv(std::span<const RoundRecord> records) {
    std::ostringstream out;
    write_rounds_csv(out, records);
    return out.str();
}

std::vector<RoundRecord> parse_rounds_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != "round,base_step,skip,e,err_min,err_med,err_max")
        throw Error("rounds CSV: unexpected header");
    std::vector<RoundRecord> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != 7) throw Error("rounds CSV: expected 7 columns in '" + line + "'");
        RoundRecord r;
        r.round = std::stoll(cells[0]);
        r.base_step = std::stoll(cells[1]);
        r.skip = std::stoll(cells[2]);
        r.threshold = parse_double(cells[3]);
        r.err_min = parse_double(cells[4]);
        r.err_med = parse_double(cells[5]);
        r.err_max = parse_double(cells[6]);
        out.push_back(r);
    }
    return out;
}

void write_losses_csv(std::ostream& out, std::span<const double> losses) {
    out << "step,loss\n";
    for (std::size_t i = 0; i < losses.size(); ++i) out << i << ',' << format_double(losses[i]) << '\n';
}

}  // namespace picard
