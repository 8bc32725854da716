#pragma once

#include <algorithm>
#include <atomic>
#include <barrier>
#include <cstdint>
#include <exception>
#include <latch>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "tcbinom/seq.hpp"

namespace tcbinom {

/// Half-open column interval [begin, end).
struct ColumnRange {
    int begin = 0;
    int end = 0;

    int size() const { return end > begin ? end - begin : 0; }
    bool contains(int l) const { return l >= begin && l < end; }
    friend bool operator==(const ColumnRange&, const ColumnRange&) = default;
};

/// One round of the blocked wavefront. Level `base_level` is already computed;
/// the round produces levels base_level-1 .. base_level-depth.
struct RoundPlan {
    int base_level = 0;
    int n_nodes = 0;         // nodes on the base level
    int active_workers = 1;  // workers that take part in this round
    int depth = 0;           // levels processed this round
    std::vector<ColumnRange> assignments;
    int trigger_level = 0;   // worker i > 0 signals i-1 after node (trigger_level, s_i)
    int buffer_base = 0;     // buffer row holding the base level

    /// Columns worker `w` computes on `level` without neighbour data (staircase).
    ColumnRange region_a(int w, int level) const;
    /// Columns worker `w` computes on `level` after its right neighbour signalled.
    ColumnRange region_b(int w, int level) const;
    /// Buffer row for a level in [base_level - depth, base_level].
    int row_of(int level, int block_levels) const;
};

/// Plans the round at `base_level`. The worker count is reduced until every
/// active worker owns at least two base-level columns.
RoundPlan plan_round(int base_level, int requested_workers, int block_levels, int buffer_base = 0);

/// All rounds from the leaf level down to the root. The first plan also
/// governs leaf initialisation.
std::vector<RoundPlan> plan_schedule(int leaf_level, int requested_workers, int block_levels);

/// Nodes worker `w` touches over a whole pricing run, leaf initialisation included.
long long count_worker_nodes(int leaf_level, int requested_workers, int block_levels, int w);

/// Dry-run count for worker 0 on an N-step costs tree (leaf level N+1).
long long count_p0_nodes(int steps, int requested_workers, int block_levels);

/// N^2 / (2p).
double estimate_p0_nodes(int steps, int requested_workers);

struct ScheduleAudit {
    bool ok = true;
    std::string failure;  // first violated property, empty when ok
    long long nodes = 0;  // nodes assigned across all workers
};

/// Dry-run checks: every node assigned exactly once, children ready before use
/// (same worker earlier, or neighbour before its signal), disjoint buffer writes,
/// 1 <= D <= L, balanced non-last workers, and no region B for the last worker.
ScheduleAudit verify_schedule(int leaf_level, int requested_workers, int block_levels);

/// (block_levels + 1) rows of one value per column; tree levels map onto rows
/// circularly.
template <class T>
class LevelBuffer {
public:
    LevelBuffer(int rows, int columns)
        : columns_(static_cast<std::size_t>(columns)),
          cells_(static_cast<std::size_t>(rows) * static_cast<std::size_t>(columns)) {}

    T& at(int row, int column) {
        return cells_[static_cast<std::size_t>(row) * columns_ + static_cast<std::size_t>(column)];
    }
    const T& at(int row, int column) const {
        return cells_[static_cast<std::size_t>(row) * columns_ + static_cast<std::size_t>(column)];
    }

private:
    std::size_t columns_;
    std::vector<T> cells_;
};

/// One flag per adjacent worker pair. Raised with release by worker i, awaited
/// and reset by worker i-1.
class SignalBoard {
public:
    explicit SignalBoard(int workers) : flags_(std::make_unique<std::atomic<std::uint32_t>[]>(
                                            static_cast<std::size_t>(std::max(workers, 1)))) {
        for (int i = 0; i < std::max(workers, 1); ++i) flags_[static_cast<std::size_t>(i)].store(0);
    }

    void raise(int i) {
        auto& f = flags_[static_cast<std::size_t>(i)];
        f.store(1, std::memory_order_release);
        f.notify_one();
    }

    void await_and_reset(int i) {
        auto& f = flags_[static_cast<std::size_t>(i)];
        while (f.load(std::memory_order_acquire) == 0) f.wait(0, std::memory_order_acquire);
        f.store(0, std::memory_order_relaxed);
    }

private:
    std::unique_ptr<std::atomic<std::uint32_t>[]> flags_;
};

struct ParallelOptions {
    bool pin_workers = false;  // best effort; results never depend on it
};

namespace detail {
void pin_current_thread(int worker);
}

/// Blocked wavefront backward induction with `threads` workers and at most
/// `block_levels` levels per round. The root value is bitwise equal to
/// run_sequential because every node goes through the same kernel.step call.
template <LatticeKernel K>
typename K::Value run_parallel(const K& kernel, int threads, int block_levels, ParallelOptions options = {}) {
    using Value = typename K::Value;
    const int leaf = kernel.leaf_level();
    if (threads < 1) throw std::invalid_argument("thread count must be at least 1");
    if (block_levels < 1) throw std::invalid_argument("block levels must be at least 1");
    if (leaf == 0) return kernel.leaf(0);

    const RoundPlan first = plan_round(leaf, threads, block_levels, 0);
    const int workers = first.active_workers;
    const int rows = block_levels + 1;

    LevelBuffer<Value> buffer(rows, leaf + 1);
    SignalBoard signals(workers);
    std::barrier<> round_end(workers);
    std::latch start(workers);
    std::atomic<bool> failed{false};
    std::atomic<bool> aborted{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    int root_row = 0;  // written by worker 0, which runs on this thread

    auto record = [&] {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        failed.store(true, std::memory_order_relaxed);
    };

    // After a failure the remaining work is skipped, but signals and barriers
    // still run so that every worker reaches the end.
    auto worker_body = [&](int w) {
        start.arrive_and_wait();
        if (aborted.load()) return;
        if (options.pin_workers) detail::pin_current_thread(w);

        const ColumnRange mine = first.assignments[static_cast<std::size_t>(w)];
        if (!failed.load(std::memory_order_relaxed)) {
            try {
                const int row = first.row_of(leaf, block_levels);
                for (int l = mine.begin; l < mine.end; ++l) buffer.at(row, l) = kernel.leaf(l);
            } catch (...) {
                record();
            }
        }
        round_end.arrive_and_wait();

        auto compute = [&](const RoundPlan& plan, int level, ColumnRange cols) {
            if (failed.load(std::memory_order_relaxed)) return;
            try {
                const int out = plan.row_of(level, block_levels);
                const int in = plan.row_of(level + 1, block_levels);
                for (int l = cols.begin; l < cols.end; ++l) {
                    buffer.at(out, l) = kernel.step(level, l, buffer.at(in, l), buffer.at(in, l + 1));
                }
            } catch (...) {
                record();
            }
        };

        RoundPlan plan = first;
        for (;;) {
            if (w >= plan.active_workers) {
                round_end.arrive_and_drop();
                return;
            }
            const int s = plan.assignments[static_cast<std::size_t>(w)].begin;
            const bool signals_left = w > 0;
            for (int level = plan.base_level - 1; level >= plan.base_level - plan.depth; --level) {
                const ColumnRange a = plan.region_a(w, level);
                if (signals_left && level == plan.trigger_level) {
                    compute(plan, level, {a.begin, s + 1});
                    signals.raise(w);
                    compute(plan, level, {s + 1, a.end});
                } else {
                    compute(plan, level, a);
                }
            }
            if (w + 1 < plan.active_workers) {
                signals.await_and_reset(w + 1);
                for (int level = plan.base_level - 1; level >= plan.base_level - plan.depth; --level) {
                    compute(plan, level, plan.region_b(w, level));
                }
            }
            round_end.arrive_and_wait();

            const int next_base = plan.base_level - plan.depth;
            if (next_base == 0) {
                if (w == 0) root_row = plan.row_of(0, block_levels);
                return;
            }
            plan = plan_round(next_base, plan.active_workers, block_levels,
                              (plan.buffer_base + plan.depth) % rows);
        }
    };

    {
        std::vector<std::jthread> pool;
        pool.reserve(static_cast<std::size_t>(workers - 1));
        try {
            for (int w = 1; w < workers; ++w) pool.emplace_back(worker_body, w);
        } catch (...) {
            aborted.store(true);
            start.count_down(workers - static_cast<std::ptrdiff_t>(pool.size()));
            throw;  // jthread destructors join the workers that did start
        }
        worker_body(0);
    }

    if (error) std::rethrow_exception(error);
    return std::move(buffer.at(root_row, 0));
}

/// Costs-mode quote from the parallel engine.
PriceQuote price_with_costs_parallel(const ModelParams& m, const PayoffSpec& spec, int threads,
                                     int block_levels, ParallelOptions options = {});

/// Frictionless price from the parallel engine.
double frictionless_price_parallel(const ModelParams& m, const PayoffSpec& spec, int threads,
                                   int block_levels, ParallelOptions options = {});

}  // namespace tcbinom
