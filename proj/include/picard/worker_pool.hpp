// Copyright 2026 The picard-bench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <condition_variable>
#include <cstdint>
#include <exception>
#include <mutex>
#include <span>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "picard/problems.hpp"
#include "picard/state.hpp"
#include "picard/update_rules.hpp"

namespace picard {

struct WorkerTiming {
    double busy_ms = 0.0;
    double idle_ms = 0.0;
    std::int64_t drifts = 0;
};

struct PoolTiming {
    std::vector<WorkerTiming> workers;
    double total_drift_ms = 0.0;   // sum of busy time
    double gather_wall_ms = 0.0;   // wall time spent inside gather_drifts
    std::int64_t gathers = 0;

    /// total_drift_ms / (workers * gather_wall_ms); 0 before the first gather.
    double efficiency() const;
};

nlohmann::json to_json(const PoolTiming& timing);

/// Fixed set of worker threads evaluating drifts for one window per call.
///
/// Slot j always goes to worker j % n_workers and each worker walks its slots
/// in ascending order, so the assignment never depends on timing.
class WorkerPool {
public:
    WorkerPool(int n_workers, std::uint64_t seed_offset = 0, double injected_cost_ms = 0.0);
    ~WorkerPool();
    WorkerPool(const WorkerPool&) = delete;
    WorkerPool& operator=(const WorkerPool&) = delete;

    int n_workers() const { return static_cast<int>(threads_.size()); }
    std::uint64_t seed_offset() const { return seed_offset_; }
    double injected_cost_ms() const { return injected_cost_ms_; }
    static int worker_for_slot(std::size_t slot, int n_workers) {
        return static_cast<int>(slot % static_cast<std::size_t>(n_workers));
    }

    /// Blocks until every drift is done. Results are ordered like `states`.
    /// Worker failures surface as PoisonedDrift for the lowest failing slot;
    /// DimensionError and ScheduleError pass through unchanged.
    std::vector<Drift> gather_drifts(const UpdateRule& rule, const Problem& problem,
                                     std::span<const ParamState> states);

    struct Gathered {
        std::vector<Drift> drifts;  // only drifts[0..valid) are usable
        std::size_t valid = 0;
        std::exception_ptr failure;  // PoisonedDrift for slot `valid`, or null
    };
    /// Like gather_drifts but a PoisonedDrift is returned instead of thrown.
    /// DimensionError and ScheduleError still throw.
    Gathered gather_drifts_partial(const UpdateRule& rule, const Problem& problem,
                                   std::span<const ParamState> states);

    /// Empty unless an adaptive_guidance rule has been gathered.
    const std::vector<AuxModel>& aux_models() const { return aux_; }
    void reset_aux() { aux_.clear(); }

    PoolTiming timing_report() const;
    void reset_timing();

private:
    struct Job {
        const UpdateRule* rule = nullptr;
        const Problem* problem = nullptr;
        std::span<const ParamState> states;
        std::vector<Drift>* out = nullptr;
        std::vector<std::exception_ptr>* errors = nullptr;
    };

    void worker_main(int id);
    void run_slots(int id, const Job& job);

    std::uint64_t seed_offset_;
    double injected_cost_ms_;
    std::vector<std::thread> threads_;
    std::vector<AuxModel> aux_;
    std::vector<WorkerTiming> timing_;
    double gather_wall_ms_ = 0.0;
    std::int64_t gathers_ = 0;

    std::mutex mu_;
    std::condition_variable start_cv_;
    std::condition_variable done_cv_;
    Job job_;
    std::uint64_t generation_ = 0;
    int pending_ = 0;
    bool stopping_ = false;
};

/// Free-function form of WorkerPool::timing_report.
PoolTiming pool_timing_report(const WorkerPool& pool);

}  // namespace picard
