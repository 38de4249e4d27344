// Copyright 2026 The picard-bench Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "picard/errors.hpp"
#include "picard/oracle.hpp"

using namespace picard;

namespace {

std::unique_ptr<Problem> decay_ode(std::int64_t dim = 1) {
    ProblemSpec s;
    s.kind = ProblemKind::linear_ode;
    s.dim = dim;
    return make_problem(s);
}

}  // namespace

TEST_CASE("euler on f = -x, T = 4") {
    auto p = decay_ode();
    const auto tr = solve_sequential(make_euler_rule(4), *p, make_state(0, {1.0}), 4);
    REQUIRE(tr.states.size() == 5);
    const double expect[] = {1.0, 0.75, 0.5625, 0.421875, 0.31640625};
    for (int t = 0; t <= 4; ++t) {
        CHECK(tr.states[t].values[0] == expect[t]);
        CHECK(tr.states[t].step == t);
    }
    REQUIRE(tr.losses.size() == 5);
    CHECK(tr.losses[1] == 0.5 * 0.75 * 0.75);
}

TEST_CASE("T = 1 yields two states") {
    auto p = decay_ode();
    CHECK(solve_sequential(make_euler_rule(1), *p, make_state(0, {1.0}), 1).states.size() == 2);
    CHECK_THROWS_AS(solve_sequential(make_euler_rule(1), *p, make_state(0, {1.0}), 0), ConfigError);
}

TEST_CASE("sgd on a unit quadratic decays like 0.9^t") {
    ProblemSpec s;
    s.kind = ProblemKind::quadratic;
    s.dim = 1;
    s.condition = 1.0;
    auto p = make_problem(s);
    const auto tr = solve_sequential(make_sgd_rule(0.1), *p, make_state(0, {1.0}), 30);
    for (int t = 0; t <= 30; ++t) CHECK(tr.states[t].values[0] == doctest::Approx(std::pow(0.9, t)).epsilon(1e-13));
}

TEST_CASE("solve_sequential is repeatable") {
    ProblemSpec s;
    s.kind = ProblemKind::stochastic_lsq;
    auto p = make_problem(s);
    auto rule = make_adam_rule(0.02);
    OracleOptions opt;
    opt.seed_offset = 5;
    const auto a = solve_sequential(rule, *p, p->initial_state(), 40, opt);
    const auto b = solve_sequential(rule, *p, p->initial_state(), 40, opt);
    CHECK(compare_trajectories(a, b, {}).pass);
    const auto c = solve_sequential(rule, *p, p->initial_state(), 40);
    CHECK_FALSE(compare_trajectories(a, c, {}).pass);
}

TEST_CASE("compare_trajectories") {
    auto p = decay_ode(3);
    auto rule = make_euler_rule(10);
    const auto a = solve_sequential(rule, *p, p->initial_state(), 10);

    SUBCASE("against itself") {
        const auto r = compare_trajectories(a, a, {});
        CHECK(r.pass);
        CHECK(r.overall_max_abs_delta == 0.0);
        CHECK_FALSE(r.first_divergence.has_value());
    }
    SUBCASE("one value nudged by 1e-15") {
        auto b = a;
        b.states[6].values[1] += 1e-15;
        const auto exact = compare_trajectories(a, b, {CompareMode::bitexact, 0.0});
        CHECK_FALSE(exact.pass);
        CHECK(exact.first_divergence == 6);
        CHECK(exact.max_abs_delta[6] > 0.0);
        CHECK(exact.max_abs_delta[5] == 0.0);
        const auto tol = compare_trajectories(a, b, {CompareMode::tolerance, 1e-12});
        CHECK(tol.pass);
        CHECK(tol.to_json()["pass"] == true);
    }
    SUBCASE("moments count only in bitexact mode") {
        auto x = a;
        auto y = a;
        x.states[2].moments = MomentState{{0, 0, 0}, {0, 0, 0}, 1};
        y.states[2].moments = MomentState{{0, 1e-3, 0}, {0, 0, 0}, 1};
        CHECK_FALSE(compare_trajectories(x, y, {}).pass);
        CHECK(compare_trajectories(x, y, {CompareMode::tolerance, 0.0}).pass);
    }
    SUBCASE("shape mismatch") {
        auto b = a;
        b.states[4].values.push_back(0.0);
        const auto r = compare_trajectories(a, b, {CompareMode::tolerance, 1.0});
        CHECK_FALSE(r.pass);
        CHECK(std::isinf(r.max_abs_delta[4]));
    }
    SUBCASE("length mismatch") {
        auto b = a;
        b.states.pop_back();
        CHECK_THROWS_AS(compare_trajectories(a, b, {}), Error);
    }
}

TEST_CASE("prefix_check on euler, full window, T = 64") {
    ProblemSpec s;
    s.kind = ProblemKind::linear_ode;
    s.dim = 4;
    s.rotation = 1.5;
    auto p = make_problem(s);
    auto rule = make_euler_rule(64);
    const auto oracle = solve_sequential(rule, *p, p->initial_state(), 64);
    WorkerPool pool(8);
    EngineConfig c;
    c.steps = 64;
    c.window = 64;
    c.threshold = 0.0;
    c.gamma = 1.0;
    std::vector<RoundSnapshot> snaps;
    run(rule, *p, p->initial_state(), c, pool, [&](const RoundSnapshot& r) { snaps.push_back(r); });
    const auto rep = prefix_check(oracle, snaps);
    CHECK(rep.pass);
    CHECK(rep.rounds_checked == static_cast<std::int64_t>(snaps.size()));
    std::int64_t eligible = 0;
    for (const auto& snap : snaps)
        for (const auto& st : snap.states) eligible += st.step <= snap.round ? 1 : 0;
    CHECK(rep.states_checked == eligible);
    CHECK(snaps.back().states.front().step <= 64);

    SUBCASE("round 0 checks only theta0") {
        const auto first = prefix_check(oracle, std::span<const RoundSnapshot>(snaps.data(), 1));
        CHECK(first.pass);
        CHECK(first.states_checked == 1);
    }
    SUBCASE("a corrupted prefix is located") {
        auto bad = snaps;
        REQUIRE(bad.size() > 2);
        auto& victim = bad[2].states.front();
        REQUIRE(victim.step <= 2);
        victim.values[0] += 1e-12;
        const auto r = prefix_check(oracle, bad);
        CHECK_FALSE(r.pass);
        CHECK(r.failed_round == 2);
        CHECK(r.failed_step == victim.step);
    }
}

TEST_CASE("injected cost is paid once per step") {
    auto p = decay_ode();
    OracleOptions opt;
    opt.injected_cost_ms = 2.0;
    opt.record_losses = false;
    const auto tr = solve_sequential(make_euler_rule(10), *p, make_state(0, {1.0}), 10, opt);
    CHECK(tr.wall_time_ms >= 20.0);
    CHECK(tr.losses.empty());
}
