// Copyright 2026 The picard-bench Authors
// SPDX-License-Identifier: Apache-2.0

#include "picard/worker_pool.hpp"

#include <chrono>

#include "picard/errors.hpp"

namespace picard {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

}  // namespace

double PoolTiming::efficiency() const {
    if (workers.empty() || gather_wall_ms <= 0.0) return 0.0;
    return total_drift_ms / (static_cast<double>(workers.size()) * gather_wall_ms);
}

nlohmann::json to_json(const PoolTiming& timing) {
    nlohmann::json workers = nlohmann::json::array();
    for (const auto& w : timing.workers)
        workers.push_back({{"busy_ms", w.busy_ms}, {"idle_ms", w.idle_ms}, {"drifts", w.drifts}});
    return {{"workers", workers},
            {"total_drift_ms", timing.total_drift_ms},
            {"gather_wall_ms", timing.gather_wall_ms},
            {"gathers", timing.gathers},
            {"efficiency", timing.efficiency()}};
}

WorkerPool::WorkerPool(int n_workers, std::uint64_t seed_offset, double injected_cost_ms)
    : seed_offset_(seed_offset), injected_cost_ms_(injected_cost_ms) {
    if (n_workers < 1) throw ConfigError("pool.workers", "must be >= 1");
    if (!(injected_cost_ms >= 0.0)) throw ConfigError("pool.injected_cost_ms", "must be >= 0");
    timing_.resize(static_cast<std::size_t>(n_workers));
    threads_.reserve(static_cast<std::size_t>(n_workers));
    for (int i = 0; i < n_workers; ++i) threads_.emplace_back([this, i] { worker_main(i); });
}

WorkerPool::~WorkerPool() {
    {
        std::lock_guard lock(mu_);
        stopping_ = true;
    }
    start_cv_.notify_all();
    for (auto& t : threads_) t.join();
}

void WorkerPool::worker_main(int id) {
    std::uint64_t seen = 0;
    for (;;) {
        Job job;
        {
            std::unique_lock lock(mu_);
            start_cv_.wait(lock, [&] { return stopping_ || generation_ != seen; });
            if (stopping_) return;
            seen = generation_;
            job = job_;
        }
        run_slots(id, job);
        {
            std::lock_guard lock(mu_);
            if (--pending_ == 0) done_cv_.notify_one();
        }
    }
}

void WorkerPool::run_slots(int id, const Job& job) {
    const auto n = static_cast<std::size_t>(threads_.size());
    AuxModel* aux = aux_.empty() ? nullptr : &aux_[static_cast<std::size_t>(id)];
    auto& t = timing_[static_cast<std::size_t>(id)];
    for (std::size_t slot = static_cast<std::size_t>(id); slot < job.states.size(); slot += n) {
        const auto& state = job.states[slot];
        const auto seed = static_cast<std::uint64_t>(state.step) + seed_offset_;
        const auto t0 = Clock::now();
        try {
            if (injected_cost_ms_ > 0.0)
                std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(injected_cost_ms_));
            Drift d = drift(*job.rule, *job.problem, state, seed, aux);
            d.worker_id = id;
            (*job.out)[slot] = std::move(d);
        } catch (...) {
            (*job.errors)[slot] = std::current_exception();
        }
        t.busy_ms += ms_since(t0);
        t.drifts += 1;
    }
}

std::vector<Drift> WorkerPool::gather_drifts(const UpdateRule& rule, const Problem& problem,
                                             std::span<const ParamState> states) {
    auto g = gather_drifts_partial(rule, problem, states);
    if (g.failure) std::rethrow_exception(g.failure);
    return std::move(g.drifts);
}

WorkerPool::Gathered WorkerPool::gather_drifts_partial(const UpdateRule& rule, const Problem& problem,
                                                       std::span<const ParamState> states) {
    if (states.empty()) throw Error("gather_drifts needs at least one state");
    for (std::size_t i = 1; i < states.size(); ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            if (states[i].step == states[j].step) throw Error("gather_drifts: duplicate step in window");
        }
    }
    if (rule.kind == RuleKind::adaptive_guidance && aux_.empty()) aux_.resize(threads_.size());

    std::vector<Drift> out(states.size());
    std::vector<std::exception_ptr> errors(states.size());
    std::vector<double> busy_before(timing_.size());
    for (std::size_t i = 0; i < timing_.size(); ++i) busy_before[i] = timing_[i].busy_ms;

    const auto t0 = Clock::now();
    {
        std::unique_lock lock(mu_);
        job_ = Job{&rule, &problem, states, &out, &errors};
        pending_ = static_cast<int>(threads_.size());
        ++generation_;
        start_cv_.notify_all();
        done_cv_.wait(lock, [&] { return pending_ == 0; });
        job_ = Job{};
    }
    const double wall = ms_since(t0);
    gather_wall_ms_ += wall;
    gathers_ += 1;
    for (std::size_t i = 0; i < timing_.size(); ++i) {
        const double busy = timing_[i].busy_ms - busy_before[i];
        timing_[i].idle_ms += wall > busy ? wall - busy : 0.0;
    }

    Gathered g;
    g.valid = states.size();
    for (std::size_t slot = 0; slot < states.size(); ++slot) {
        if (!errors[slot]) continue;
        const auto step = states[slot].step;
        const auto seed = static_cast<std::uint64_t>(step) + seed_offset_;
        g.valid = slot;
        try {
            std::rethrow_exception(errors[slot]);
        } catch (const PoisonedDrift&) {
            g.failure = std::current_exception();
        } catch (const DimensionError&) {
            throw;
        } catch (const ScheduleError&) {
            throw;
        } catch (const std::exception& e) {
            g.failure = std::make_exception_ptr(
                PoisonedDrift(step, seed, std::string("worker ") +
                                              std::to_string(worker_for_slot(slot, n_workers())) +
                                              " failed: " + e.what()));
        } catch (...) {
            g.failure = std::make_exception_ptr(PoisonedDrift(step, seed, "worker failed with an unknown exception"));
        }
        break;
    }
    g.drifts = std::move(out);
    return g;
}

PoolTiming WorkerPool::timing_report() const {
    PoolTiming r;
    r.workers = timing_;
    for (const auto& w : timing_) r.total_drift_ms += w.busy_ms;
    r.gather_wall_ms = gather_wall_ms_;
    r.gathers = gathers_;
    return r;
}

void WorkerPool::reset_timing() {
    for (auto& w : timing_) w = WorkerTiming{};
    gather_wall_ms_ = 0.0;
    gathers_ = 0;
}

PoolTiming pool_timing_report(const WorkerPool& pool) {
    return pool.timing_report();
}

}  // namespace picard
