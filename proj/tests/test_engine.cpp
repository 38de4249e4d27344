// Copyright 2026 The picard-bench Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <limits>

#include "picard/engine.hpp"
#include "picard/errors.hpp"
#include "picard/oracle.hpp"

using namespace picard;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::unique_ptr<Problem> decay_ode(std::int64_t dim = 1) {
    ProblemSpec s;
    s.kind = ProblemKind::linear_ode;
    s.dim = dim;
    return make_problem(s);
}

RoundErrors errs(std::vector<double> v) { return RoundErrors{std::move(v)}; }

}  // namespace

TEST_CASE("picard_round: first round from a constant guess on f = -x") {
    auto p = decay_ode();
    auto rule = make_euler_rule(4);
    WorkerPool pool(4);
    const auto w = initial_window(rule, make_state(0, {1.0}), 4, 4);
    REQUIRE(w.states.size() == 5);
    const auto out = picard_round(w, rule, *p, pool);
    for (int t = 0; t <= 4; ++t) CHECK(out.states[t].values[0] == 1.0 - t / 4.0);
    REQUIRE(out.errors.per_slot.size() == 4);
    CHECK(out.errors.per_slot[0] == 0.0625);
    CHECK(out.errors.per_slot[3] == 1.0);
}

TEST_CASE("picard_round: window of one is a sequential step") {
    ProblemSpec s;
    s.kind = ProblemKind::tiny_mlp;
    auto p = make_problem(s);
    auto rule = make_adam_rule(0.002);
    const auto x0 = prepare_initial(rule, p->initial_state());
    WorkerPool pool(2, 7);
    const auto w = initial_window(rule, x0, 1, 10);
    const auto out = picard_round(w, rule, *p, pool);
    CHECK(bitwise_equal(out.states[1], sequential_step(rule, *p, x0, 7)));
}

TEST_CASE("picard_round: exact anchor gives an exact first slot") {
    auto p = decay_ode(3);
    auto rule = make_euler_rule(16);
    const auto truth = solve_sequential(rule, *p, p->initial_state(), 16);
    WorkerPool pool(3);
    auto w = initial_window(rule, truth.states[5], 4, 16);
    w.base_step = 5;
    for (std::size_t j = 0; j < w.states.size(); ++j) w.states[j].step = 5 + static_cast<std::int64_t>(j);
    const auto out = picard_round(w, rule, *p, pool);
    CHECK(bitwise_equal(out.states[1], truth.states[6]));
    CHECK_FALSE(bitwise_equal(out.states[2], truth.states[7]));
}

TEST_CASE("picard_round: a poisoned speculative slot is contained") {
    ProblemSpec s;
    s.kind = ProblemKind::rosenbrock;
    s.dim = 2;
    auto p = make_problem(s);
    auto rule = make_sgd_rule(1e-3);
    WorkerPool pool(3);
    auto w = initial_window(rule, make_state(0, {0.0, 0.0}), 4, 10);
    w.states[2].values = {1e200, 1e200};
    const auto out = picard_round(w, rule, *p, pool);
    REQUIRE(out.states.size() == 5);
    CHECK(std::isfinite(out.errors.per_slot[0]));
    for (std::size_t j = 1; j < 4; ++j) CHECK(out.errors.per_slot[j] == kInf);
    CHECK(out.states[3].step == 3);
    CHECK(out.states[4].values == out.states[2].values);
    CHECK(compute_skip(out.errors, 1.0) == 2);

    w.states[0].values = {1e200, 1e200};
    try {
        (void)picard_round(w, rule, *p, pool);
        FAIL("expected PoisonedDrift");
    } catch (const PoisonedDrift& e) {
        CHECK(e.step() == 0);
    }
}

TEST_CASE("fixed_point_distance") {
    auto rule = make_sgd_rule(0.1);
    const auto a = make_state(2, {1.0, 2.0, 3.0, 4.0});
    CHECK(fixed_point_distance(a, clone_state(a), rule) == 0.0);
    auto b = clone_state(a);
    b.values[0] += 0.1;
    CHECK(fixed_point_distance(b, a, rule) == doctest::Approx(0.0025).epsilon(1e-12));

    SUBCASE("moments are ignored") {
        auto m = clone_state(a);
        m.moments = MomentState{{1, 1, 1, 1}, {1, 1, 1, 1}, 3};
        CHECK(fixed_point_distance(m, a, rule) == 0.0);
    }
    SUBCASE("tiny but non-zero differences never read as zero") {
        auto c = make_state(0, {1e-300});
        auto d = make_state(0, {0.0});
        CHECK(fixed_point_distance(c, d, rule) > 0.0);
        CHECK(fixed_point_distance(make_state(0, {-0.0}), d, rule) > 0.0);
    }
    SUBCASE("steps must agree") {
        CHECK_THROWS_AS(fixed_point_distance(make_state(1, {1.0}), make_state(2, {1.0}), rule), DimensionError);
    }
}

TEST_CASE("fixed_point_distance across a scheduled split") {
    auto rule = make_split_prune_rule(0.1, 1, {{2, ScheduleAction::split, {0}}});
    const auto old_state = make_state(3, {0.3, -0.7});
    const auto new_state = make_state(3, {0.35, -0.6, 0.2});
    const double child = 0.3 + split_offset(0, 1)[0];
    const double brute = ((0.35 - 0.3) * (0.35 - 0.3) + (-0.6 + 0.7) * (-0.6 + 0.7) + (0.2 - child) * (0.2 - child)) / 3.0;
    CHECK(fixed_point_distance(new_state, old_state, rule) == doctest::Approx(brute).epsilon(1e-14));

    CHECK_THROWS_AS(fixed_point_distance(make_state(3, {1, 2, 3, 4}), old_state, rule), DimensionError);
    CHECK_THROWS_AS(fixed_point_distance(make_state(3, {1, 2, 3}), old_state, make_sgd_rule(0.1)), DimensionError);
}

TEST_CASE("compute_skip") {
    CHECK(compute_skip(errs({1e-9, 1e-9, 2e-3, 1e-9}), 1e-6) == 3);
    CHECK(compute_skip(errs({1e-9, 1e-9, 1e-9}), 1e-6) == 3);
    CHECK(compute_skip(errs({5e-6}), 1e-6) == 1);
    CHECK(compute_skip(errs({1e-6, 1e-6}), 1e-6) == 2);  // strict comparison
    CHECK(compute_skip(errs({0.0, kInf}), 0.0) == 2);
    CHECK_THROWS_AS(compute_skip(errs({}), 1.0), ConsistencyError);
}

TEST_CASE("update_threshold") {
    ThresholdState ts{1e-4, 0.9, Aggregation::median};
    CHECK(update_threshold(ts, errs({1e-4, 2e-4, 3e-4})).e == doctest::Approx(1.1e-4).epsilon(1e-12));
    ts.gamma = 1.0;
    CHECK(update_threshold(ts, errs({5.0, kInf})).e == 1e-4);
    ts.gamma = 0.0;
    CHECK(update_threshold(ts, errs({1.0, 3.0, 8.0, 9.0})).e == 5.5);
    ts.agg = Aggregation::mean;
    CHECK(update_threshold(ts, errs({1.0, 3.0, 8.0})).e == 4.0);
    ts.gamma = 0.5;
    CHECK(update_threshold(ts, errs({0.0})).e >= 0.0);

    ThresholdState f{2.0, 0.5, Aggregation::mean};
    CHECK(update_threshold(f, errs({kInf, 4.0, kInf})).e == 3.0);
    CHECK(update_threshold(f, errs({kInf, kInf})).e == 2.0);
}

TEST_CASE("aggregate") {
    const std::vector<double> odd{3.0, 1.0, 2.0}, even{4.0, 1.0, 3.0, 2.0};
    CHECK(aggregate(odd, Aggregation::median) == 2.0);
    CHECK(aggregate(even, Aggregation::median) == 2.5);
    CHECK(aggregate(even, Aggregation::mean) == 2.5);
    CHECK(aggregate(std::vector<double>{}, Aggregation::mean) == 0.0);
    CHECK(parse_aggregation(to_string(Aggregation::mean)) == Aggregation::mean);
    CHECK_THROWS_AS(parse_aggregation("max"), ConfigError);
}

TEST_CASE("advance_window") {
    auto rule = make_adam_rule(0.1);
    auto w = initial_window(rule, prepare_initial(rule, make_state(0, {0.0})), 4, 20);
    std::vector<ParamState> fresh;
    for (int j = 0; j <= 4; ++j) {
        auto s = make_state(j, {static_cast<double>(j)});
        s.moments = MomentState{{0.1 * j}, {0.01 * j}, j};
        fresh.push_back(s);
    }
    const std::vector<double> round_err{1.0, 2.0, 3.0, 4.0};

    SUBCASE("skip = p refills from the last state") {
        const auto n = advance_window(w, fresh, 4, rule, 20, round_err);
        CHECK(n.base_step == 4);
        CHECK(n.iteration == 1);
        REQUIRE(n.states.size() == 5);
        for (int j = 0; j <= 4; ++j) {
            CHECK(n.states[j].step == 4 + j);
            CHECK(n.states[j].values[0] == 4.0);
            CHECK(n.states[j].moments->t == 4);
        }
        CHECK(n.slot_error[0] == 4.0);
        CHECK(n.slot_error[1] == kInf);
    }
    SUBCASE("skip = 1 shifts and appends one clone") {
        const auto n = advance_window(w, fresh, 1, rule, 20, round_err);
        CHECK(n.base_step == 1);
        for (int j = 0; j < 4; ++j) CHECK(n.states[j].values[0] == 1.0 + j);
        CHECK(n.states[4].values[0] == 4.0);
        CHECK(n.states[4].step == 5);
        CHECK(n.slot_error == std::vector<double>{1.0, 2.0, 3.0, 4.0, kInf});
    }
    SUBCASE("the window shrinks near the horizon") {
        auto late = w;
        late.base_step = 14;
        for (auto& s : fresh) s.step += 14;
        const auto n = advance_window(late, fresh, 3, rule, 20, round_err);
        CHECK(n.base_step == 17);
        CHECK(n.size == 3);
        CHECK(n.states.size() == 4);
        CHECK(n.states.back().step == 20);
    }
    SUBCASE("skip out of range") {
        CHECK_THROWS_AS(advance_window(w, fresh, 0, rule, 20), ConsistencyError);
        CHECK_THROWS_AS(advance_window(w, fresh, 5, rule, 20), ConsistencyError);
    }
}

TEST_CASE("initial_window lifts slots through the schedule") {
    auto rule = make_split_prune_rule(0.1, 1, {{1, ScheduleAction::split, {0}}});
    const auto w = initial_window(rule, make_state(0, {1.0, 2.0}), 4, 10);
    CHECK(w.states[1].values.size() == 2);
    CHECK(w.states[2].values.size() == 3);
    CHECK(w.states[4].dim_tag == 3);
    const auto tail = initial_window(make_sgd_rule(0.1), make_state(0, {1.0}), 8, 3);
    CHECK(tail.size == 3);
}

TEST_CASE("run: p = 1 is the sequential solver") {
    auto p = decay_ode(2);
    auto rule = make_euler_rule(10);
    WorkerPool pool(1);
    EngineConfig c;
    c.steps = 10;
    c.window = 1;
    const auto r = run(rule, *p, p->initial_state(), c, pool);
    CHECK(r.records.size() == 10);
    for (const auto& rec : r.records) CHECK(rec.skip == 1);
    const auto truth = solve_sequential(rule, *p, p->initial_state(), 10);
    CHECK(bitwise_equal(r.terminal, truth.states.back()));
}

TEST_CASE("run: zero threshold matches the oracle bitwise") {
    ProblemSpec s;
    s.kind = ProblemKind::rosenbrock;
    s.dim = 6;
    auto p = make_problem(s);
    auto rule = make_adam_rule(0.01);
    const auto truth = solve_sequential(rule, *p, p->initial_state(), 80);
    for (int workers : {1, 3, 8}) {
        WorkerPool pool(workers);
        EngineConfig c;
        c.steps = 80;
        c.window = 7;
        c.threshold = 0.0;
        c.gamma = 1.0;
        c.keep_trajectory = true;
        const auto r = run(rule, *p, p->initial_state(), c, pool);
        CHECK(bitwise_equal(r.terminal, truth.states.back()));
        CHECK(static_cast<std::int64_t>(r.records.size()) <= 80);
        const auto cmp = compare_trajectories(r.trajectory, truth.states, {});
        CHECK(cmp.pass);
    }
}

TEST_CASE("run: progress and snapshots") {
    ProblemSpec s;
    s.kind = ProblemKind::quadratic;
    auto p = make_problem(s);
    auto rule = make_sgd_rule(0.1);
    WorkerPool pool(4);
    EngineConfig c;
    c.steps = 200;
    c.window = 7;
    std::vector<RoundSnapshot> snaps;
    const auto r = run(rule, *p, p->initial_state(), c, pool, [&](const RoundSnapshot& x) { snaps.push_back(x); });
    std::int64_t total = 0, base = 0;
    for (const auto& rec : r.records) {
        CHECK(rec.base_step == base);
        CHECK(rec.skip >= 1);
        CHECK(rec.threshold >= 0.0);
        base += rec.skip;
        total += rec.skip;
    }
    CHECK(total == 200);
    CHECK(r.terminal.step == 200);
    CHECK(snaps.size() == r.records.size() + 1);
    CHECK(snaps.front().round == 0);
    CHECK(r.records.size() < 200);
    CHECK(r.final_loss == p->loss(r.terminal.values, 200));
}

TEST_CASE("run: aborted runs keep partial telemetry") {
    ProblemSpec s;
    s.kind = ProblemKind::rosenbrock;
    s.dim = 2;
    auto p = make_problem(s);
    WorkerPool pool(2);
    EngineConfig c;
    c.steps = 50;
    c.window = 3;
    c.threshold = 0.0;
    c.gamma = 1.0;
    try {
        run(make_sgd_rule(0.01), *p, p->initial_state(), c, pool);
        FAIL("expected RunAborted");
    } catch (const RunAborted& e) {
        CHECK(e.partial().partial);
        CHECK(e.window().base_step == e.partial().terminal.step);
        std::int64_t done = 0;
        for (const auto& rec : e.partial().records) done += rec.skip;
        CHECK(done == e.window().base_step);
        CHECK_THROWS_AS(std::rethrow_exception(e.cause()), PoisonedDrift);
    }
}

TEST_CASE("engine config validation names the field") {
    auto field_of = [](EngineConfig c) {
        try {
            validate_engine_config(c);
        } catch (const ConfigError& e) {
            return e.field();
        }
        return std::string();
    };
    EngineConfig c;
    c.gamma = 1.5;
    CHECK(field_of(c) == "engine.gamma");
    c = {};
    c.window = 0;
    CHECK(field_of(c) == "engine.window");
    c = {};
    c.steps = 0;
    CHECK(field_of(c) == "engine.steps");
    c = {};
    c.threshold = -1.0;
    CHECK(field_of(c) == "engine.threshold");
}
