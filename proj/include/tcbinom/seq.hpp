#pragma once

#include <concepts>
#include <utility>
#include <vector>

#include "tcbinom/model.hpp"
#include "tcbinom/pwl.hpp"

namespace tcbinom {

/// Seller and buyer z functions at one node.
struct CostsPair {
    PwlFunction seller;
    PwlFunction buyer;

    friend bool operator==(const CostsPair&, const CostsPair&) = default;
};

struct PriceQuote {
    double ask;
    double bid;
};

/// A per-node backward-induction rule over a recombining tree whose deepest
/// level is `leaf_level()`. Node (t, l) depends on (t+1, l) and (t+1, l+1).
template <class K>
concept LatticeKernel = requires(const K& k, int t, int l, const typename K::Value& v) {
    typename K::Value;
    { k.leaf_level() } -> std::convertible_to<int>;
    { k.leaf(l) } -> std::same_as<typename K::Value>;
    { k.step(t, l, v, v) } -> std::same_as<typename K::Value>;
};

/// One backward step for both parties at node (t, l):
///   w = max(upper, lower); v = restrict(w / r, [-ask_t, -bid_t]);
///   seller z = max(u_t, v), buyer z = min(u_t, v).
CostsPair step_back_costs(const ModelParams& m, const PayoffSpec& spec, int t, int l,
                          const CostsPair& upper, const CostsPair& lower);

/// Transaction-cost kernel over levels N+1 .. 0; level N+1 carries payoff (0, 0).
class CostsKernel {
public:
    using Value = CostsPair;

    CostsKernel(ModelParams m, PayoffSpec spec);

    int leaf_level() const { return model_.steps + 1; }
    Value leaf(int l) const;
    Value step(int t, int l, const Value& upper, const Value& lower) const;

    const ModelParams& model() const { return model_; }

private:
    ModelParams model_;
    PayoffSpec spec_;
    PriceGrid prices_;
    double discount_;
};

/// Scalar kernel without transaction costs over levels N .. 0:
///   pi = max(P, (p pi_up + (1-p) pi_down) / r).
class FrictionlessKernel {
public:
    using Value = double;

    /// Throws std::invalid_argument when p = (r-d)/(u-d) falls outside [0, 1].
    FrictionlessKernel(ModelParams m, PayoffSpec spec);

    int leaf_level() const { return model_.steps; }
    Value leaf(int l) const { return exercise_value(spec_, prices_.at(model_.steps, l)); }
    Value step(int t, int l, Value upper, Value lower) const {
        const double cont = discount_ * (prob_up_ * upper + prob_down_ * lower);
        return std::max(exercise_value(spec_, prices_.at(t, l)), cont);
    }

    double prob_up() const { return prob_up_; }

private:
    ModelParams model_;
    PayoffSpec spec_;
    PriceGrid prices_;
    double prob_up_;
    double prob_down_;
    double discount_;
};

/// Backward induction keeping two adjacent levels.
template <LatticeKernel K>
typename K::Value run_sequential(const K& kernel) {
    using Value = typename K::Value;
    const int leaf = kernel.leaf_level();
    std::vector<Value> next, current;
    next.reserve(static_cast<std::size_t>(leaf) + 1);
    current.reserve(static_cast<std::size_t>(leaf) + 1);
    for (int l = 0; l <= leaf; ++l) next.push_back(kernel.leaf(l));
    for (int t = leaf - 1; t >= 0; --t) {
        current.clear();
        for (int l = 0; l <= t; ++l) {
            current.push_back(kernel.step(t, l, next[static_cast<std::size_t>(l)],
                                          next[static_cast<std::size_t>(l) + 1]));
        }
        std::swap(current, next);
    }
    return std::move(next.front());
}

/// Ask z_seller(0) and bid -z_buyer(0) at the root.
PriceQuote quote_from_root(const CostsPair& root);

PriceQuote price_with_costs(const ModelParams& m, const PayoffSpec& spec);

/// American price without costs on the N-level tree (k is ignored).
double frictionless_price(const ModelParams& m, const PayoffSpec& spec);

}  // namespace tcbinom
