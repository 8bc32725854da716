#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>

#include "tcbinom/parallel.hpp"

#if defined(__linux__)
#include <pthread.h>
#include <sched.h>
#endif

namespace tcbinom {

ColumnRange RoundPlan::region_a(int w, int level) const {
    const ColumnRange own = assignments[static_cast<std::size_t>(w)];
    const int o = base_level - level;
    return {own.begin, std::min(own.end - o, level + 1)};
}

ColumnRange RoundPlan::region_b(int w, int level) const {
    if (w + 1 >= active_workers) return {};
    const ColumnRange own = assignments[static_cast<std::size_t>(w)];
    const int o = base_level - level;
    return {std::min(own.end - o, level + 1), std::min(own.end, level + 1)};
}

int RoundPlan::row_of(int level, int block_levels) const {
    return (buffer_base + (base_level - level)) % (block_levels + 1);
}

RoundPlan plan_round(int base_level, int requested_workers, int block_levels, int buffer_base) {
    if (base_level < 1) throw std::invalid_argument("base level must be at least 1");
    if (requested_workers < 1) throw std::invalid_argument("worker count must be at least 1");
    if (block_levels < 1) throw std::invalid_argument("block levels must be at least 1");
    if (buffer_base < 0 || buffer_base > block_levels) {
        throw std::invalid_argument("buffer base row must lie in [0, block levels]");
    }

    RoundPlan plan;
    plan.base_level = base_level;
    plan.n_nodes = base_level + 1;
    plan.buffer_base = buffer_base;

    int p = requested_workers;
    while (plan.n_nodes < 2 * p) p = std::max(p - 1, 1);
    plan.active_workers = p;

    const int width = plan.n_nodes / p;
    plan.depth = std::min(block_levels, width - 1);
    plan.assignments.reserve(static_cast<std::size_t>(p));
    for (int i = 0; i < p; ++i) {
        plan.assignments.push_back({i * width, i + 1 < p ? (i + 1) * width : plan.n_nodes});
    }
    plan.trigger_level = plan.depth > 1 ? base_level - plan.depth + 1 : base_level - plan.depth;
    return plan;
}

std::vector<RoundPlan> plan_schedule(int leaf_level, int requested_workers, int block_levels) {
    std::vector<RoundPlan> rounds;
    if (leaf_level < 1) return rounds;
    rounds.push_back(plan_round(leaf_level, requested_workers, block_levels, 0));
    for (;;) {
        const RoundPlan& last = rounds.back();
        const int next = last.base_level - last.depth;
        if (next == 0) break;
        rounds.push_back(plan_round(next, last.active_workers, block_levels,
                                    (last.buffer_base + last.depth) % (block_levels + 1)));
    }
    return rounds;
}

long long count_worker_nodes(int leaf_level, int requested_workers, int block_levels, int w) {
    const auto rounds = plan_schedule(leaf_level, requested_workers, block_levels);
    if (rounds.empty()) return w == 0 ? 1 : 0;
    long long total = 0;
    if (w < rounds.front().active_workers) total += rounds.front().assignments[static_cast<std::size_t>(w)].size();
    for (const auto& plan : rounds) {
        if (w >= plan.active_workers) break;
        for (int level = plan.base_level - 1; level >= plan.base_level - plan.depth; --level) {
            total += plan.region_a(w, level).size() + plan.region_b(w, level).size();
        }
    }
    return total;
}

long long count_p0_nodes(int steps, int requested_workers, int block_levels) {
    return count_worker_nodes(steps + 1, requested_workers, block_levels, 0);
}

double estimate_p0_nodes(int steps, int requested_workers) {
    const double n = steps;
    return n * n / (2.0 * requested_workers);
}

namespace {

// Position of a node inside one worker's program for the current round.
struct Stamp {
    int worker = -1;
    int order = -1;
};

std::string where(int level, int column) {
    return "(" + std::to_string(level) + ", " + std::to_string(column) + ")";
}

}  // namespace

ScheduleAudit verify_schedule(int leaf_level, int requested_workers, int block_levels) {
    ScheduleAudit audit;
    auto fail = [&](std::string why) {
        if (audit.ok) {
            audit.ok = false;
            audit.failure = std::move(why);
        }
    };

    const auto rounds = plan_schedule(leaf_level, requested_workers, block_levels);
    if (rounds.empty()) {
        audit.nodes = 1;
        return audit;
    }

    // done[t][l]: node computed in an earlier round (or as a leaf)
    std::vector<std::vector<std::uint8_t>> done(static_cast<std::size_t>(leaf_level) + 1);
    for (int t = 0; t <= leaf_level; ++t) done[static_cast<std::size_t>(t)].assign(static_cast<std::size_t>(t) + 1, 0);
    std::vector<std::uint8_t> assigned_leaf(static_cast<std::size_t>(leaf_level) + 1, 0);

    for (const auto& r : rounds.front().assignments) {
        for (int l = r.begin; l < r.end; ++l) {
            if (assigned_leaf[static_cast<std::size_t>(l)]++) fail("leaf " + std::to_string(l) + " assigned twice");
            done[static_cast<std::size_t>(leaf_level)][static_cast<std::size_t>(l)] = 1;
            ++audit.nodes;
        }
    }
    for (int l = 0; l <= leaf_level; ++l) {
        if (!assigned_leaf[static_cast<std::size_t>(l)]) fail("leaf " + std::to_string(l) + " never assigned");
    }

    int previous_workers = rounds.front().active_workers;
    for (const auto& plan : rounds) {
        const int B = plan.base_level;
        const int D = plan.depth;
        const int p = plan.active_workers;
        if (D < 1 || D > block_levels) fail("depth out of range at base " + std::to_string(B));
        if (p > previous_workers) fail("worker count increased at base " + std::to_string(B));
        previous_workers = p;
        if (plan.buffer_base < 0 || plan.buffer_base > block_levels) fail("buffer base out of range");

        // Assignments partition the base level and give every worker two columns.
        int expect = 0;
        for (const auto& r : plan.assignments) {
            if (r.begin != expect) fail("assignments do not tile the base level at " + std::to_string(B));
            if (r.size() < 2) fail("worker owns fewer than two columns at base " + std::to_string(B));
            expect = r.end;
        }
        if (expect != plan.n_nodes) fail("assignments do not cover the base level at " + std::to_string(B));

        // Build each worker's program: region A in order, then a wait, then region B.
        const std::size_t width = static_cast<std::size_t>(B) + 1;
        auto slot = [&](int level, int l) {
            return static_cast<std::size_t>(B - 1 - level) * width + static_cast<std::size_t>(l);
        };
        std::vector<Stamp> stamp(static_cast<std::size_t>(D) * width);
        std::vector<int> writer(static_cast<std::size_t>(block_levels + 1) * width, -1);  // (row, column) -> worker
        std::vector<int> wait_order(static_cast<std::size_t>(p), -1);
        std::vector<int> signal_order(static_cast<std::size_t>(p), -1);
        std::vector<long long> workload(static_cast<std::size_t>(p), 0);

        auto place = [&](int w, int level, int l, int order) {
            Stamp& st = stamp[slot(level, l)];
            if (st.worker >= 0 || done[static_cast<std::size_t>(level)][static_cast<std::size_t>(l)]) {
                fail("node " + where(level, l) + " assigned twice");
            }
            st = Stamp{w, order};
            const auto row = static_cast<std::size_t>(plan.row_of(level, block_levels));
            int& owner = writer[row * width + static_cast<std::size_t>(l)];
            if (owner >= 0 && owner != w) fail("buffer cell written by two workers at " + where(level, l));
            owner = w;
            ++workload[static_cast<std::size_t>(w)];
        };

        for (int w = 0; w < p; ++w) {
            int order = 0;
            const int s = plan.assignments[static_cast<std::size_t>(w)].begin;
            for (int level = B - 1; level >= B - D; --level) {
                const ColumnRange a = plan.region_a(w, level);
                for (int l = a.begin; l < a.end; ++l) {
                    place(w, level, l, order++);
                    if (w > 0 && level == plan.trigger_level && l == s) signal_order[static_cast<std::size_t>(w)] = order;
                }
            }
            if (w > 0 && signal_order[static_cast<std::size_t>(w)] < 0) {
                fail("worker " + std::to_string(w) + " never signals at base " + std::to_string(B));
            }
            wait_order[static_cast<std::size_t>(w)] = order;
            for (int level = B - 1; level >= B - D; --level) {
                const ColumnRange b = plan.region_b(w, level);
                if (w + 1 == p && b.size() != 0) fail("last worker has region B nodes");
                for (int l = b.begin; l < b.end; ++l) place(w, level, l, order++);
            }
        }

        // Every node of the round's levels is assigned.
        for (int level = B - 1; level >= B - D; --level) {
            for (int l = 0; l <= level; ++l) {
                if (stamp[slot(level, l)].worker < 0) fail("node " + where(level, l) + " never assigned");
            }
        }

        // Children are ready: computed earlier, or earlier in the same program,
        // or by the right neighbour before its signal and consumed after the wait.
        for (int level = B - 1; level >= B - D; --level) {
            for (int l = 0; l <= level; ++l) {
                const Stamp& st = stamp[slot(level, l)];
                for (int child = l; child <= l + 1; ++child) {
                    if (done[static_cast<std::size_t>(level) + 1][static_cast<std::size_t>(child)]) continue;
                    if (level + 1 == B || stamp[slot(level + 1, child)].worker < 0) {
                        fail("child of " + where(level, l) + " is never computed");
                        continue;
                    }
                    const Stamp& c = stamp[slot(level + 1, child)];
                    if (c.worker == st.worker && c.order < st.order) continue;
                    if (c.worker == st.worker + 1 && c.order < signal_order[static_cast<std::size_t>(c.worker)] &&
                        st.order >= wait_order[static_cast<std::size_t>(st.worker)]) {
                        continue;
                    }
                    fail("node " + where(level, l) + " may read child " + where(level + 1, child) +
                         " before it is written");
                }
            }
        }

        // Rows of the round's levels are distinct so nothing read is overwritten.
        std::vector<std::uint8_t> row_used(static_cast<std::size_t>(block_levels) + 1, 0);
        for (int level = B; level >= B - D; --level) {
            if (row_used[static_cast<std::size_t>(plan.row_of(level, block_levels))]++) {
                fail("two levels share a buffer row at base " + std::to_string(B));
            }
        }

        // Non-last workers carry the same staircase.
        for (int w = 1; w + 1 < p; ++w) {
            if (std::abs(workload[static_cast<std::size_t>(w)] - workload[0]) > D) {
                fail("unbalanced workload at base " + std::to_string(B));
            }
        }

        for (int level = B - 1; level >= B - D; --level) {
            for (int l = 0; l <= level; ++l) {
                if (stamp[slot(level, l)].worker < 0) continue;
                done[static_cast<std::size_t>(level)][static_cast<std::size_t>(l)] = 1;
                ++audit.nodes;
            }
        }
    }

    if (!done[0][0]) fail("root never computed");
    const long long expected = static_cast<long long>(leaf_level + 1) * (leaf_level + 2) / 2;
    if (audit.nodes != expected) fail("node total " + std::to_string(audit.nodes) + " differs from tree size");
    return audit;
}

namespace detail {

void pin_current_thread(int worker) {
#if defined(__linux__)
    const unsigned cpus = std::thread::hardware_concurrency();
    if (cpus == 0) return;
    cpu_set_t set;
    CPU_ZERO(&set);
    CPU_SET(static_cast<unsigned>(worker) % cpus, &set);
    pthread_setaffinity_np(pthread_self(), sizeof(set), &set);  // failure is harmless
#else
    (void)worker;
#endif
}

}  // namespace detail

PriceQuote price_with_costs_parallel(const ModelParams& m, const PayoffSpec& spec, int threads,
                                     int block_levels, ParallelOptions options) {
    return quote_from_root(run_parallel(CostsKernel(m, spec), threads, block_levels, options));
}

double frictionless_price_parallel(const ModelParams& m, const PayoffSpec& spec, int threads,
                                   int block_levels, ParallelOptions options) {
    return run_parallel(FrictionlessKernel(m, spec), threads, block_levels, options);
}

}  // namespace tcbinom
