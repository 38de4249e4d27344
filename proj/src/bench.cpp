// Copyright 2026 The picard-bench Authors
// SPDX-License-Identifier: Apache-2.0

#include "picard/bench.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "picard/errors.hpp"

namespace picard {

namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
}

std::string dump(const nlohmann::json& j) {
    return j.dump(2) + "\n";
}

fs::path prepare_dir(const std::string& dir) {
    fs::path p(dir);
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) throw Error("cannot create output directory " + dir + ": " + ec.message());
    return p;
}

double relative_gap(double value, double reference) {
    const double scale = std::max(std::abs(reference), 1e-300);
    return std::abs(value - reference) / scale;
}

RunReport make_report(const RunConfig& c, const RunResult& r, bool partial) {
    auto report = finalize_report(r.records, c.steps, config_to_json(c), r.final_loss, partial);
    report.final_dim_tag = r.terminal.dim_tag;
    report.terminal_checksum = state_checksum(r.terminal);
    report.timing.wall_time_ms = r.wall_time_ms;
    return report;
}

void set_axis(RunConfig& c, const std::string& axis, double v) {
    if (axis == "window") {
        c.window = static_cast<std::int64_t>(std::llround(v));
    } else if (axis == "gamma") {
        c.gamma = v;
    } else if (axis == "cost") {
        c.injected_cost_ms = v;
    } else if (axis == "threshold") {
        c.threshold = v;
    } else if (axis == "batch") {
        c.problem.batch = static_cast<std::int64_t>(std::llround(v));
    } else {
        throw ConfigError("sweep.axis", "unknown axis '" + axis + "'");
    }
}

// The oracle does not depend on window, threshold, gamma or worker count.
std::string oracle_signature(const RunConfig& c) {
    auto j = config_to_json(c);
    j.erase("engine");
    j.erase("output");
    j.erase("sweep");
    j["pool"].erase("workers");
    j["steps"] = c.steps;
    return j.dump();
}

}  // namespace

std::string hex64(std::uint64_t v) {
    std::ostringstream s;
    s << "0x" << std::hex << std::setw(16) << std::setfill('0') << v;
    return s.str();
}

int exit_code_for(std::exception_ptr error) {
    try {
        std::rethrow_exception(error);
    } catch (const RunAborted& e) {
        return exit_code_for(e.cause());
    } catch (const ConfigError&) {
        return exit_codes::config;
    } catch (const ScheduleError&) {
        return exit_codes::config;
    } catch (...) {
        return exit_codes::numeric;
    }
}

bool evaluate_check(const RunConfig& c, const RunResult& engine, const Trajectory& oracle,
                    std::optional<CompareReport>& comparison, std::string& detail) {
    auto kind = c.check.kind;
    double value = c.check.value;
    if (kind == CheckSpec::Kind::automatic) {
        // Zero threshold that never adapts must reproduce the oracle exactly;
        // anything else is judged on the final objective.
        if (c.threshold == 0.0 && c.gamma.value_or(1.0) == 1.0) {
            kind = CheckSpec::Kind::bitexact;
        } else {
            kind = CheckSpec::Kind::loss;
            value = 0.05;
        }
    }
    if (kind == CheckSpec::Kind::loss) {
        const double gap = relative_gap(engine.final_loss, oracle.losses.back());
        std::ostringstream s;
        s << "final loss " << format_double(engine.final_loss) << " vs oracle " << format_double(oracle.losses.back())
          << " (relative gap " << format_double(gap) << ", allowed " << format_double(value) << ")";
        detail = s.str();
        return gap <= value;
    }
    CompareOptions opts;
    opts.mode = kind == CheckSpec::Kind::bitexact ? CompareMode::bitexact : CompareMode::tolerance;
    opts.tolerance = value;
    if (engine.trajectory.size() == oracle.states.size()) {
        comparison = compare_trajectories(std::span<const ParamState>(engine.trajectory),
                                          std::span<const ParamState>(oracle.states), opts);
    } else {
        // trajectory not kept: compare the terminal states only
        comparison = compare_trajectories(std::span<const ParamState>(&engine.terminal, 1),
                                          std::span<const ParamState>(&oracle.states.back(), 1), opts);
    }
    std::ostringstream s;
    s << (opts.mode == CompareMode::bitexact ? "bitexact" : "tolerance") << " comparison "
      << (comparison->pass ? "passed" : "failed");
    if (comparison->first_divergence) s << ", first divergence at index " << *comparison->first_divergence;
    s << ", max |delta| " << format_double(comparison->overall_max_abs_delta);
    detail = s.str();
    return comparison->pass;
}

RunOutcome execute_run(const RunConfig& config) {
    RunOutcome out;
    out.config = resolve_config(config);
    const auto& c = out.config;
    if (c.mode == RunMode::sweep) throw ConfigError("output.mode", "sweep runs go through run_sweep");
    const auto problem = make_problem(c.problem);
    const auto rule = make_rule(c, *problem);
    const auto theta0 = problem->initial_state();

    if (c.mode == RunMode::oracle || c.mode == RunMode::both) {
        OracleOptions oo;
        oo.seed_offset = c.seed_offset;
        oo.injected_cost_ms = c.injected_cost_ms;
        out.oracle = solve_sequential(rule, *problem, theta0, c.steps, oo);
    }
    if (c.mode == RunMode::engine || c.mode == RunMode::both) {
        WorkerPool pool(c.workers, c.seed_offset, c.injected_cost_ms);
        auto ec = engine_config(c);
        ec.keep_trajectory = c.mode == RunMode::both;
        out.engine = run(rule, *problem, theta0, ec, pool);
        out.report = make_report(c, *out.engine, false);
        out.report->timing.pool = pool.timing_report();
        if (out.oracle) out.report->timing.oracle_wall_time_ms = out.oracle->wall_time_ms;
    }
    if (c.mode == RunMode::both)
        out.check_pass = evaluate_check(c, *out.engine, *out.oracle, out.comparison, out.check_detail);
    return out;
}

int cmd_run(const RunConfig& config, std::ostream& log) {
    RunConfig c;
    try {
        c = resolve_config(config);
    } catch (const ConfigError& e) {
        log << "config error: " << e.what() << "\n";
        return exit_codes::config;
    }
    if (c.mode == RunMode::sweep) return cmd_sweep(c, log);

    const auto base = [&](const std::string& suffix) { return prepare_dir(c.out_dir) / (c.prefix + suffix); };
    try {
        const auto out = execute_run(c);
        if (out.oracle) {
            save_states(base("_oracle.pcs"), out.oracle->states);
            std::ostringstream losses;
            write_losses_csv(losses, out.oracle->losses);
            write_text(base("_losses.csv"), losses.str());
            log << "oracle: " << c.steps << " steps, final loss " << format_double(out.oracle->losses.back())
                << ", " << std::fixed << std::setprecision(1) << out.oracle->wall_time_ms << " ms\n"
                << std::defaultfloat;
        }
        if (out.engine) {
            write_text(base("_rounds.csv"), rounds_csv(out.engine->records));
            write_text(base("_report.json"), dump(report_to_json(*out.report)));
            save_states(base("_terminal.pcs"), std::span<const ParamState>(&out.engine->terminal, 1));
            log << "engine: " << out.report->rounds << " rounds for " << c.steps << " steps (speedup "
                << format_double(out.report->speedup_rounds) << "), final loss "
                << format_double(out.report->final_loss) << ", checksum " << hex64(out.report->terminal_checksum)
                << "\n";
        }
        if (c.mode == RunMode::both) {
            nlohmann::json j;
            j["check"] = to_string(c.check);
            j["pass"] = out.check_pass;
            j["detail"] = out.check_detail;
            j["engine_final_loss"] = out.engine->final_loss;
            j["oracle_final_loss"] = out.oracle->losses.back();
            j["engine_checksum"] = hex64(state_checksum(out.engine->terminal));
            j["oracle_checksum"] = hex64(state_checksum(out.oracle->states.back()));
            if (out.comparison) j["comparison"] = out.comparison->to_json();
            write_text(base("_compare.json"), dump(j));
            log << (out.check_pass ? "check passed: " : "check FAILED: ") << out.check_detail << "\n";
            if (!out.check_pass) return exit_codes::check_failed;
        }
        return exit_codes::ok;
    } catch (const RunAborted& e) {
        log << "error: " << e.what() << "\n";
        try {
            if (c.checkpoint) {
                save_states(base("_abort_window.pcs"), e.window().states);
                auto report = make_report(c, e.partial(), true);
                write_text(base("_report.json"), dump(report_to_json(report)));
                write_text(base("_rounds.csv"), rounds_csv(e.partial().records));
                log << "partial telemetry and window checkpoint written to " << c.out_dir << "\n";
            }
        } catch (const std::exception& inner) {
            log << "error: could not write abort checkpoint: " << inner.what() << "\n";
        }
        return exit_code_for(std::current_exception());
    } catch (const std::exception& e) {
        log << "error: " << e.what() << "\n";
        return exit_code_for(std::current_exception());
    }
}

std::vector<SweepRow> run_sweep(const RunConfig& config, std::ostream& log) {
    RunConfig base = config;
    base.mode = RunMode::sweep;
    base = resolve_config(base);
    std::map<std::string, std::pair<double, double>> oracle_cache;  // signature -> (wall ms, final loss)
    std::vector<SweepRow> rows;
    for (double v : base.sweep.values) {
        SweepRow row;
        row.axis = base.sweep.axis;
        row.value = v;
        try {
            RunConfig c = config;
            c.mode = RunMode::engine;
            set_axis(c, base.sweep.axis, v);
            c = resolve_config(c);
            const auto sig = oracle_signature(c);
            if (!oracle_cache.count(sig)) {
                RunConfig oc = c;
                oc.mode = RunMode::oracle;
                const auto o = execute_run(oc);
                oracle_cache[sig] = {o.oracle->wall_time_ms, o.oracle->losses.back()};
            }
            const auto [oracle_ms, oracle_loss] = oracle_cache[sig];
            auto out = execute_run(c);
            out.report->timing.oracle_wall_time_ms = oracle_ms;
            auto echo = out.report->config_echo;
            echo["sweep_point"] = {{"axis", base.sweep.axis}, {"value", v}};
            out.report->config_echo = echo;
            row.ok = true;
            row.status = "ok";
            row.rounds = out.report->rounds;
            row.speedup_rounds = out.report->speedup_rounds;
            row.wall_time_ms = out.report->timing.wall_time_ms;
            row.oracle_wall_time_ms = oracle_ms;
            row.speedup_wall = out.report->timing.speedup_wall().value_or(0.0);
            row.final_loss = out.report->final_loss;
            row.oracle_final_loss = oracle_loss;
            row.report = std::move(out.report);
            log << base.sweep.axis << "=" << format_double(v) << ": " << row.rounds << " rounds, wall speedup "
                << std::fixed << std::setprecision(2) << row.speedup_wall << std::defaultfloat << "\n";
        } catch (const std::exception& e) {
            row.ok = false;
            row.status = e.what();
            log << base.sweep.axis << "=" << format_double(v) << ": failed: " << e.what() << "\n";
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
    out << "axis,value,status,rounds,speedup_rounds,speedup_wall,wall_time_ms,oracle_wall_time_ms,final_loss,"
           "oracle_final_loss\n";
    for (const auto& r : rows) {
        std::string status = r.ok ? "ok" : "error";
        out << r.axis << ',' << format_double(r.value) << ',' << status << ',' << r.rounds << ','
            << format_double(r.speedup_rounds) << ',' << format_double(r.speedup_wall) << ','
            << format_double(r.wall_time_ms) << ',' << format_double(r.oracle_wall_time_ms) << ','
            << format_double(r.final_loss) << ',' << format_double(r.oracle_final_loss) << '\n';
    }
}

int cmd_sweep(const RunConfig& config, std::ostream& log) {
    RunConfig c = config;
    c.mode = RunMode::sweep;
    try {
        c = resolve_config(c);
    } catch (const ConfigError& e) {
        log << "config error: " << e.what() << "\n";
        return exit_codes::config;
    }
    try {
        const auto rows = run_sweep(c, log);
        const auto dir = prepare_dir(c.out_dir);
        const auto report_dir = dir / (c.prefix + "_sweep");
        fs::create_directories(report_dir);
        for (const auto& r : rows) {
            if (!r.report) continue;
            write_text(report_dir / (r.axis + "_" + format_double(r.value) + ".json"), dump(report_to_json(*r.report)));
        }
        std::ostringstream csv;
        write_sweep_csv(csv, rows);
        write_text(dir / (c.prefix + "_sweep.csv"), csv.str());
        log << "sweep table written to " << (dir / (c.prefix + "_sweep.csv")).string() << "\n";
        return exit_codes::ok;
    } catch (const std::exception& e) {
        log << "error: " << e.what() << "\n";
        return exit_code_for(std::current_exception());
    }
}

int cmd_plotdata(const fs::path& reports_dir, std::ostream& csv, std::ostream& log) {
    if (!fs::is_directory(reports_dir)) {
        log << "config error: plotdata.reports: not a directory: " << reports_dir.string() << "\n";
        return exit_codes::config;
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(reports_dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    csv << "report,axis,axis_value,metric,value\n";
    for (const auto& f : files) {
        RunReport r;
        try {
            std::ifstream in(f);
            r = report_from_json(nlohmann::json::parse(in));
        } catch (const std::exception& e) {
            log << "warning: skipping " << f.filename().string() << ": " << e.what() << "\n";
            continue;
        }
        std::string axis = "none";
        std::string axis_value;
        if (r.config_echo.contains("sweep_point")) {
            axis = r.config_echo["sweep_point"].value("axis", "none");
            axis_value = format_double(r.config_echo["sweep_point"].value("value", 0.0));
        }
        const auto name = f.stem().string();
        auto row = [&](const std::string& metric, double v) {
            csv << name << ',' << axis << ',' << axis_value << ',' << metric << ',' << format_double(v) << '\n';
        };
        row("rounds", static_cast<double>(r.rounds));
        row("total_steps", static_cast<double>(r.total_steps));
        row("speedup_rounds", r.speedup_rounds);
        row("final_loss", r.final_loss);
        row("final_dim_tag", static_cast<double>(r.final_dim_tag));
        row("wall_time_ms", r.timing.wall_time_ms);
        if (auto s = r.timing.speedup_wall()) row("speedup_wall", *s);
    }
    return exit_codes::ok;
}

std::vector<ManifestEntry> parse_manifest(std::istream& in) {
    std::vector<ManifestEntry> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream words(line);
        ManifestEntry e;
        if (!(words >> e.name)) continue;
        bool have_checksum = false;
        std::string word;
        while (words >> word) {
            const auto eq = word.find('=');
            if (eq == std::string::npos)
                throw ConfigError("manifest", "line " + std::to_string(line_no) + ": expected key=value, got '" + word + "'");
            const auto key = word.substr(0, eq);
            const auto value = word.substr(eq + 1);
            if (key == "checksum") {
                e.checksum = std::stoull(value, nullptr, 16);
                have_checksum = true;
            } else {
                e.settings.emplace_back(key, value);
            }
        }
        if (!have_checksum) throw ConfigError("manifest", "line " + std::to_string(line_no) + ": missing checksum");
        out.push_back(std::move(e));
    }
    return out;
}

int cmd_verify(const fs::path& manifest, std::ostream& log, bool print_only) {
    std::vector<ManifestEntry> entries;
    try {
        std::ifstream in(manifest);
        if (!in) throw ConfigError("manifest", "cannot read " + manifest.string());
        entries = parse_manifest(in);
    } catch (const std::exception& e) {
        log << "config error: " << e.what() << "\n";
        return exit_codes::config;
    }
    int failures = 0;
    for (const auto& e : entries) {
        try {
            RunConfig c;
            for (const auto& [k, v] : e.settings) apply_setting(c, k, v);
            c.threshold = 0.0;
            c.gamma = 1.0;
            c.mode = RunMode::both;
            c.check = {CheckSpec::Kind::bitexact, 0.0};
            const auto out = execute_run(c);
            const auto sum = state_checksum(out.engine->terminal);
            if (print_only) {
                log << e.name;
                for (const auto& [k, v] : e.settings) log << ' ' << k << '=' << v;
                log << " checksum=" << hex64(sum) << "\n";
                continue;
            }
            const bool ok = out.check_pass && sum == e.checksum;
            if (!ok) ++failures;
            log << (ok ? "PASS " : "FAIL ") << e.name << " checksum " << hex64(sum);
            if (sum != e.checksum) log << " (pinned " << hex64(e.checksum) << ")";
            if (!out.check_pass) log << " (" << out.check_detail << ")";
            log << "\n";
        } catch (const std::exception& ex) {
            ++failures;
            log << "FAIL " << e.name << ": " << ex.what() << "\n";
        }
    }
    if (!print_only) log << (entries.size() - static_cast<std::size_t>(failures)) << "/" << entries.size() << " manifest runs passed\n";
    return failures == 0 ? exit_codes::ok : exit_codes::check_failed;
}

}  // namespace picard
