// Copyright 2026 The picard-bench Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "picard/bench.hpp"
#include "picard/errors.hpp"

using namespace picard;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

RunConfig small_config(const fs::path& out) {
    RunConfig c;
    c.problem.kind = ProblemKind::quadratic;
    c.rule = RuleKind::adam;
    c.steps = 60;
    c.workers = 4;
    c.out_dir = out.string();
    return c;
}

nlohmann::json without_timing(const std::string& text) {
    auto j = nlohmann::json::parse(text);
    j.erase("timing");
    return j;
}

}  // namespace

TEST_CASE("exit codes") {
    CHECK(exit_code_for(std::make_exception_ptr(ConfigError("engine.gamma", "bad"))) == 2);
    CHECK(exit_code_for(std::make_exception_ptr(ScheduleError("bad"))) == 2);
    CHECK(exit_code_for(std::make_exception_ptr(PoisonedDrift(3, 3, "nan"))) == 3);
    CHECK(exit_code_for(std::make_exception_ptr(DimensionError("x"))) == 3);
    CHECK(hex64(0xabc) == "0x0000000000000abc");
}

TEST_CASE("run in both mode writes every artifact and passes") {
    TempDir tmp("picard_bench_both");
    auto c = small_config(tmp.path);
    c.mode = RunMode::both;
    c.threshold = 0.0;
    std::ostringstream log;
    CHECK(cmd_run(c, log) == 0);
    for (const char* f : {"run_oracle.pcs", "run_losses.csv", "run_rounds.csv", "run_report.json", "run_terminal.pcs",
                          "run_compare.json"})
        CHECK(fs::exists(tmp.path / f));
    const auto cmp = nlohmann::json::parse(slurp(tmp.path / "run_compare.json"));
    CHECK(cmp["pass"] == true);
    CHECK(cmp["engine_checksum"] == cmp["oracle_checksum"]);
    const auto terminal = load_states(tmp.path / "run_terminal.pcs");
    const auto oracle = load_states(tmp.path / "run_oracle.pcs");
    REQUIRE(terminal.size() == 1);
    CHECK(oracle.size() == 61);
    CHECK(bitwise_equal(terminal[0], oracle.back()));
}

TEST_CASE("oracle mode only writes the trajectory and losses") {
    TempDir tmp("picard_bench_oracle");
    auto c = small_config(tmp.path);
    c.mode = RunMode::oracle;
    std::ostringstream log;
    CHECK(cmd_run(c, log) == 0);
    CHECK(fs::exists(tmp.path / "run_oracle.pcs"));
    CHECK(fs::exists(tmp.path / "run_losses.csv"));
    CHECK_FALSE(fs::exists(tmp.path / "run_report.json"));
    const auto losses = slurp(tmp.path / "run_losses.csv");
    CHECK(losses.rfind("step,loss\n", 0) == 0);
    CHECK(std::count(losses.begin(), losses.end(), '\n') == 62);
}

TEST_CASE("invalid settings exit 2 and numeric failures exit 3") {
    TempDir tmp("picard_bench_codes");
    auto c = small_config(tmp.path);
    c.gamma = 1.5;
    std::ostringstream log;
    CHECK(cmd_run(c, log) == 2);
    CHECK(log.str().find("engine.gamma") != std::string::npos);

    auto bad = small_config(tmp.path);
    bad.problem.kind = ProblemKind::rosenbrock;
    bad.problem.dim = 2;
    bad.rule = RuleKind::sgd;
    bad.step_size = 0.01;
    bad.threshold = 0.0;
    bad.steps = 50;
    std::ostringstream log2;
    CHECK(cmd_run(bad, log2) == 3);
    CHECK(fs::exists(tmp.path / "run_abort_window.pcs"));
    const auto report = nlohmann::json::parse(slurp(tmp.path / "run_report.json"));
    CHECK(report["partial"] == true);
}

TEST_CASE("a failing loss check exits 1") {
    TempDir tmp("picard_bench_check");
    auto c = small_config(tmp.path);
    c.mode = RunMode::both;
    c.threshold = 1e3;  // accept everything: the engine jumps ahead on stale drifts
    c.gamma = 1.0;
    c.check = parse_check("bitexact");
    std::ostringstream log;
    CHECK(cmd_run(c, log) == 1);
    CHECK(log.str().find("FAILED") != std::string::npos);
}

TEST_CASE("same config twice gives byte-identical artifacts apart from timing") {
    TempDir a("picard_bench_det_a");
    TempDir b("picard_bench_det_b");
    auto ca = small_config(a.path);
    ca.problem.kind = ProblemKind::stochastic_lsq;
    auto cb = ca;
    cb.out_dir = b.path.string();
    cb.workers = 1;
    cb.window = 3;
    ca.window = 3;
    std::ostringstream log;
    REQUIRE(cmd_run(ca, log) == 0);
    REQUIRE(cmd_run(cb, log) == 0);
    CHECK(slurp(a.path / "run_rounds.csv") == slurp(b.path / "run_rounds.csv"));
    CHECK(slurp(a.path / "run_terminal.pcs") == slurp(b.path / "run_terminal.pcs"));
    auto ja = without_timing(slurp(a.path / "run_report.json"));
    auto jb = without_timing(slurp(b.path / "run_report.json"));
    // the worker count is part of the echoed configuration
    CHECK(ja["config_echo"]["pool"]["workers"] == 4);
    ja["config_echo"]["pool"].erase("workers");
    jb["config_echo"]["pool"].erase("workers");
    CHECK(ja.dump() == jb.dump());
}

TEST_CASE("plotdata on an empty directory prints only the header") {
    TempDir tmp("picard_bench_plot_empty");
    std::ostringstream csv, log;
    CHECK(cmd_plotdata(tmp.path, csv, log) == 0);
    CHECK(csv.str() == "report,axis,axis_value,metric,value\n");
    std::ostringstream csv2;
    CHECK(cmd_plotdata(tmp.path / "missing", csv2, log) == 2);
}

TEST_CASE("plotdata: three reports give three rows per metric and round-trip") {
    TempDir tmp("picard_bench_plot");
    std::map<std::string, RunReport> reports;
    for (int i = 0; i < 3; ++i) {
        auto c = small_config(tmp.path);
        c.steps = 30 + 10 * i;
        const auto out = execute_run(c);
        auto r = *out.report;
        r.timing.oracle_wall_time_ms = 2.0 * r.timing.wall_time_ms;
        const auto name = "r" + std::to_string(i);
        std::ofstream(tmp.path / (name + ".json")) << report_to_json(r).dump(2);
        reports[name] = r;
    }
    std::ofstream(tmp.path / "broken.json") << "{ not json";
    std::ostringstream csv, log;
    CHECK(cmd_plotdata(tmp.path, csv, log) == 0);
    CHECK(log.str().find("broken.json") != std::string::npos);

    std::map<std::string, int> per_metric;
    std::istringstream in(csv.str());
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        REQUIRE(cells.size() == 5);
        per_metric[cells[3]] += 1;
        const auto& r = reports.at(cells[0]);
        const double v = std::stod(cells[4]);
        if (cells[3] == "rounds") CHECK(v == static_cast<double>(r.rounds));
        if (cells[3] == "total_steps") CHECK(v == static_cast<double>(r.total_steps));
        if (cells[3] == "speedup_rounds") CHECK(v == r.speedup_rounds);
        if (cells[3] == "final_loss") CHECK(v == r.final_loss);
        if (cells[3] == "final_dim_tag") CHECK(v == static_cast<double>(r.final_dim_tag));
        if (cells[3] == "speedup_wall") CHECK(v == doctest::Approx(2.0));
    }
    for (const auto& [metric, n] : per_metric) {
        CAPTURE(metric);
        CHECK(n == 3);
    }
    CHECK(per_metric.size() == 7);
}

TEST_CASE("sweep over the window axis") {
    TempDir tmp("picard_bench_sweep");
    auto c = small_config(tmp.path);
    c.mode = RunMode::sweep;
    c.sweep.axis = "window";
    c.sweep.values = {1, 3, 7};
    std::ostringstream log;
    CHECK(cmd_sweep(c, log) == 0);
    const auto csv = slurp(tmp.path / "run_sweep.csv");
    CHECK(csv.rfind("axis,value,status,rounds,speedup_rounds,speedup_wall,wall_time_ms,oracle_wall_time_ms,final_loss,"
                    "oracle_final_loss\n",
                    0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
    CHECK(csv.find("window,1,ok,60,1,") != std::string::npos);
    CHECK(fs::exists(tmp.path / "run_sweep" / "window_7.json"));

    std::ostringstream plot, plog;
    CHECK(cmd_plotdata(tmp.path / "run_sweep", plot, plog) == 0);
    CHECK(plot.str().find("window_3,window,3,rounds,") != std::string::npos);
}

TEST_CASE("sweep keeps going after a failed point") {
    TempDir tmp("picard_bench_sweep_fail");
    auto c = small_config(tmp.path);
    c.sweep.axis = "gamma";
    c.sweep.values = {0.5, 2.0, 0.9};
    std::ostringstream log;
    const auto rows = run_sweep(c, log);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].ok);
    CHECK_FALSE(rows[1].ok);
    CHECK(rows[1].status.find("engine.gamma") != std::string::npos);
    CHECK(rows[2].ok);
    CHECK(rows[0].oracle_final_loss == rows[2].oracle_final_loss);
}

TEST_CASE("manifest parsing") {
    std::istringstream in(
        "# comment\n"
        "\n"
        "quad_adam problem.kind=quadratic rule.kind=adam engine.steps=64 checksum=0x00000000000000ff  # trailing\n"
        "ode problem.kind=linear_ode rule.kind=euler_ode checksum=0x1\n");
    const auto m = parse_manifest(in);
    REQUIRE(m.size() == 2);
    CHECK(m[0].name == "quad_adam");
    CHECK(m[0].settings.size() == 3);
    CHECK(m[0].settings[2] == std::pair<std::string, std::string>{"engine.steps", "64"});
    CHECK(m[0].checksum == 0xff);
    CHECK(m[1].checksum == 1);
    std::istringstream bad("x problem.kind=quadratic\n");
    CHECK_THROWS_AS(parse_manifest(bad), ConfigError);
}

TEST_CASE("verify against the checked-in manifest") {
    const char* dir = std::getenv("PICARD_SUITE_DIR");
    if (dir == nullptr) return;
    const auto path = fs::path(dir) / "manifest.txt";
    REQUIRE(fs::exists(path));
    std::ostringstream log;
    CHECK(cmd_verify(path, log) == 0);
    INFO(log.str());
    CHECK(log.str().find("FAIL") == std::string::npos);
}

TEST_CASE("verify flags a wrong checksum") {
    TempDir tmp("picard_bench_verify");
    std::ofstream(tmp.path / "m.txt")
        << "tiny problem.kind=quadratic rule.kind=sgd engine.steps=20 pool.workers=2 checksum=0x0000000000000001\n";
    std::ostringstream log;
    CHECK(cmd_verify(tmp.path / "m.txt", log) == 1);
    CHECK(log.str().find("FAIL tiny") != std::string::npos);
    std::ostringstream printed;
    CHECK(cmd_verify(tmp.path / "m.txt", printed, true) == 0);
    CHECK(printed.str().rfind("tiny problem.kind=quadratic", 0) == 0);
    CHECK(cmd_verify(tmp.path / "none.txt", log) == 2);
}
