#include "doctest.h"

#include <bit>
#include <cmath>
#include <map>
#include <stdexcept>

#include "tcbinom/parallel.hpp"

using namespace tcbinom;

TEST_CASE("plan_round") {
    SUBCASE("twelve nodes, three workers, three levels") {
        const auto plan = plan_round(11, 3, 3);
        CHECK(plan.n_nodes == 12);
        CHECK(plan.active_workers == 3);
        CHECK(plan.depth == 3);
        REQUIRE(plan.assignments.size() == 3);
        CHECK(plan.assignments[0] == ColumnRange{0, 4});
        CHECK(plan.assignments[1] == ColumnRange{4, 8});
        CHECK(plan.assignments[2] == ColumnRange{8, 12});
        CHECK(plan.trigger_level == 9);
        // staircase of worker 0 and the columns it finishes after the signal
        CHECK(plan.region_a(0, 10) == ColumnRange{0, 3});
        CHECK(plan.region_a(0, 8) == ColumnRange{0, 1});
        CHECK(plan.region_b(0, 10) == ColumnRange{3, 4});
        CHECK(plan.region_b(0, 8) == ColumnRange{1, 4});
        CHECK(plan.region_a(2, 8) == ColumnRange{8, 9});
        CHECK(plan.region_b(2, 8).size() == 0);
    }
    SUBCASE("five nodes drop to two workers") {
        const auto plan = plan_round(4, 3, 5);
        CHECK(plan.active_workers == 2);
        CHECK(plan.depth == 1);
        CHECK(plan.trigger_level == 3);
        CHECK(plan.assignments.back() == ColumnRange{2, 5});
    }
    SUBCASE("two nodes leave one worker") {
        for (int p : {1, 2, 7}) {
            const auto plan = plan_round(1, p, 4);
            CHECK(plan.active_workers == 1);
            CHECK(plan.depth == 1);
        }
    }
    SUBCASE("depth capped by block levels") {
        CHECK(plan_round(1000, 2, 5).depth == 5);
        CHECK(plan_round(1000, 2, 50).depth == 50);
        CHECK(plan_round(9, 2, 50).depth == 4);
    }
    SUBCASE("rows advance by the depth") {
        const auto rounds = plan_schedule(30, 2, 5);
        for (std::size_t i = 1; i < rounds.size(); ++i) {
            CHECK(rounds[i].buffer_base == (rounds[i - 1].buffer_base + rounds[i - 1].depth) % 6);
            CHECK(rounds[i].row_of(rounds[i].base_level, 5) ==
                  rounds[i - 1].row_of(rounds[i - 1].base_level - rounds[i - 1].depth, 5));
        }
    }
    SUBCASE("bad input") {
        CHECK_THROWS_AS(plan_round(0, 2, 5), std::invalid_argument);
        CHECK_THROWS_AS(plan_round(5, 0, 5), std::invalid_argument);
        CHECK_THROWS_AS(plan_round(5, 2, 0), std::invalid_argument);
        CHECK_THROWS_AS(plan_round(5, 2, 5, 6), std::invalid_argument);
    }
}

TEST_CASE("count_p0_nodes matches the reference worker-0 totals") {
    const std::map<std::pair<int, int>, long long> expected{
        {{1200, 2}, 362999}, {{1350, 2}, 458999}, {{1500, 2}, 566249},
        {{1200, 4}, 181198}, {{1350, 4}, 229161}, {{1500, 4}, 282748},
        {{1200, 8}, 90311},  {{1350, 8}, 114255}, {{1500, 8}, 141008},
    };
    for (const auto& [key, count] : expected) {
        const auto [n, p] = key;
        CAPTURE(n);
        CAPTURE(p);
        const long long actual = count_p0_nodes(n, p, 5);
        CHECK(actual == count);
        const double err = std::abs(actual - estimate_p0_nodes(n, p)) / static_cast<double>(actual);
        CHECK(err <= 0.01);
    }
    CHECK(estimate_p0_nodes(1200, 2) == 360000.0);
    CHECK(estimate_p0_nodes(1500, 8) == 140625.0);

    // relative error shrinks with N at fixed p
    for (int p : {2, 4, 8}) {
        double prev = 1.0;
        for (int n : {1200, 1350, 1500}) {
            const double c = static_cast<double>(count_p0_nodes(n, p, 5));
            const double err = std::abs(c - estimate_p0_nodes(n, p)) / c;
            CHECK(err < prev);
            prev = err;
        }
    }
}

TEST_CASE("single worker touches the whole tree") {
    for (int n : {1, 2, 10, 99}) {
        CHECK(count_p0_nodes(n, 1, 5) == static_cast<long long>(n + 2) * (n + 3) / 2);
    }
}

TEST_CASE("worker counts sum to the tree") {
    for (int p : {2, 3, 5, 8}) {
        long long total = 0;
        for (int w = 0; w < p; ++w) total += count_worker_nodes(200, p, 5, w);
        CHECK(total == 201LL * 202 / 2);
    }
}

TEST_CASE("verify_schedule over many configurations") {
    for (int leaf : {1, 2, 3, 5, 8, 13, 31, 64, 101}) {
        for (int p = 1; p <= 9; ++p) {
            for (int L : {1, 2, 3, 5, 50}) {
                const auto audit = verify_schedule(leaf, p, L);
                CAPTURE(leaf);
                CAPTURE(p);
                CAPTURE(L);
                CHECK_MESSAGE(audit.ok, audit.failure);
                CHECK(audit.nodes == static_cast<long long>(leaf + 1) * (leaf + 2) / 2);
            }
        }
    }
}

namespace {

bool same_bits(double a, double b) { return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b); }

}  // namespace

TEST_CASE("run_parallel is bitwise equal to run_sequential") {
    const std::vector<PayoffSpec> payoffs{PayoffSpec::put(100), PayoffSpec::call(100),
                                          PayoffSpec::bull_spread(95, 105),
                                          PayoffSpec::custom(PwlFunction::hinge(100, 0, 0, 0.5))};
    for (const auto& spec : payoffs) {
        for (int n : {1, 2, 7, 40}) {
            const auto m = calibrate(100, 0.2, 0.1, 0.25, n, 0.005);
            const auto seq_root = run_sequential(CostsKernel(m, spec));
            const double seq_plain = frictionless_price(m, spec);
            for (int p = 1; p <= 5; ++p) {
                for (int L : {1, 3, 50}) {
                    CAPTURE(n);
                    CAPTURE(p);
                    CAPTURE(L);
                    CHECK(run_parallel(CostsKernel(m, spec), p, L) == seq_root);
                    CHECK(same_bits(frictionless_price_parallel(m, spec, p, L), seq_plain));
                }
            }
        }
    }
}

TEST_CASE("pinning does not change results") {
    const auto m = calibrate(100, 0.2, 0.1, 0.25, 60, 0.005);
    const auto a = price_with_costs_parallel(m, PayoffSpec::put(100), 3, 5, {.pin_workers = true});
    const auto b = price_with_costs(m, PayoffSpec::put(100));
    CHECK(same_bits(a.ask, b.ask));
    CHECK(same_bits(a.bid, b.bid));
}

namespace {

// Scalar kernel that fails at one chosen node.
struct FailingKernel {
    using Value = double;
    int leaf_level_;
    int bad_t;
    int bad_l;
    int leaf_level() const { return leaf_level_; }
    double leaf(int l) const {
        if (bad_t == leaf_level_ && bad_l == l) throw std::runtime_error("leaf failure");
        return l;
    }
    double step(int t, int l, double up, double down) const {
        if (t == bad_t && l == bad_l) throw std::runtime_error("node failure");
        return 0.5 * (up + down);
    }
};

}  // namespace

TEST_CASE("worker exceptions propagate without deadlock") {
    for (int p : {1, 2, 4}) {
        for (auto [t, l] : {std::pair{30, 3}, std::pair{20, 20}, std::pair{0, 0}, std::pair{45, 40}}) {
            CAPTURE(p);
            CAPTURE(t);
            CHECK_THROWS_AS(run_parallel(FailingKernel{45, t, l}, p, 5), std::runtime_error);
        }
        CHECK(run_parallel(FailingKernel{45, -1, -1}, p, 5) == run_sequential(FailingKernel{45, -1, -1}));
    }
    CHECK_THROWS_AS(run_parallel(FailingKernel{5, -1, -1}, 0, 5), std::invalid_argument);
    CHECK_THROWS_AS(run_parallel(FailingKernel{5, -1, -1}, 2, 0), std::invalid_argument);
}
