#include "tcbinom/seq.hpp"

#include <stdexcept>
#include <string>

namespace tcbinom {

namespace {

CostsPair step_with(const ModelParams& m, const PayoffSpec& spec, int t, double stock, double discount,
                    const CostsPair& upper, const CostsPair& lower) {
    const QuotedPrices q = quoted(m, t, stock);
    const Payoff exercise = payoff(spec, t, m.steps, stock);
    const SlopeInterval rebalance{-q.ask, -q.bid};

    const PwlFunction seller_v =
        restrict_slopes(scale(pointwise_max(upper.seller, lower.seller), discount), rebalance);
    const PwlFunction buyer_v =
        restrict_slopes(scale(pointwise_max(upper.buyer, lower.buyer), discount), rebalance);

    return {pointwise_max(seller_expense(exercise, q), seller_v),
            pointwise_min(buyer_expense(exercise, q), buyer_v)};
}

}  // namespace

CostsPair step_back_costs(const ModelParams& m, const PayoffSpec& spec, int t, int l,
                          const CostsPair& upper, const CostsPair& lower) {
    return step_with(m, spec, t, node_stock_price(m, t, l), 1.0 / m.growth, upper, lower);
}

CostsKernel::CostsKernel(ModelParams m, PayoffSpec spec)
    : model_(m), spec_(std::move(spec)), prices_(model_), discount_(1.0 / model_.growth) {
    validate(spec_);
}

CostsKernel::Value CostsKernel::leaf(int l) const {
    const int t = leaf_level();
    const double stock = prices_.at(t, l);
    const QuotedPrices q = quoted(model_, t, stock);
    const Payoff none = payoff(spec_, t, model_.steps, stock);
    return {seller_expense(none, q), buyer_expense(none, q)};
}

CostsKernel::Value CostsKernel::step(int t, int l, const Value& upper, const Value& lower) const {
    return step_with(model_, spec_, t, prices_.at(t, l), discount_, upper, lower);
}

FrictionlessKernel::FrictionlessKernel(ModelParams m, PayoffSpec spec)
    : model_(m), spec_(std::move(spec)), prices_(model_), discount_(1.0 / model_.growth) {
    validate(spec_);
    prob_up_ = (model_.growth - model_.down) / (model_.up - model_.down);
    if (!(prob_up_ >= 0.0 && prob_up_ <= 1.0)) {
        throw std::invalid_argument("risk-neutral probability " + std::to_string(prob_up_) +
                                    " outside [0, 1]; the lattice admits arbitrage");
    }
    prob_down_ = 1.0 - prob_up_;
}

PriceQuote quote_from_root(const CostsPair& root) { return {root.seller(0.0), -root.buyer(0.0)}; }

PriceQuote price_with_costs(const ModelParams& m, const PayoffSpec& spec) {
    return quote_from_root(run_sequential(CostsKernel(m, spec)));
}

double frictionless_price(const ModelParams& m, const PayoffSpec& spec) {
    return run_sequential(FrictionlessKernel(m, spec));
}

}  // namespace tcbinom
