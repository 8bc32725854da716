#include "tcbinom/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tcbinom {

ModelParams calibrate(double spot, double volatility, double rate, double expiry, int steps,
                      double cost_rate) {
    if (!(spot > 0.0) || !std::isfinite(spot)) throw std::invalid_argument("spot must be positive");
    if (!(volatility > 0.0) || !std::isfinite(volatility)) {
        throw std::invalid_argument("volatility must be positive");
    }
    if (!(expiry > 0.0) || !std::isfinite(expiry)) throw std::invalid_argument("expiry must be positive");
    if (!std::isfinite(rate)) throw std::invalid_argument("rate must be finite");
    if (steps < 1) throw std::invalid_argument("steps must be at least 1");
    if (!(cost_rate >= 0.0 && cost_rate < 1.0)) throw std::invalid_argument("cost rate must lie in [0, 1)");

    ModelParams m;
    m.spot = spot;
    m.volatility = volatility;
    m.rate = rate;
    m.expiry = expiry;
    m.steps = steps;
    m.cost_rate = cost_rate;
    const double dt = expiry / steps;
    m.up = std::exp(volatility * std::sqrt(dt));
    m.down = 1.0 / m.up;
    m.growth = std::exp(rate * dt);
    return m;
}

ModelParams from_factors(double spot, double up, double growth, double cost_rate, int steps) {
    if (!(spot > 0.0) || !(up > 1.0) || !(growth > 0.0) || steps < 1 ||
        !(cost_rate >= 0.0 && cost_rate < 1.0)) {
        throw std::invalid_argument("invalid lattice factors");
    }
    ModelParams m;
    m.spot = spot;
    m.steps = steps;
    m.cost_rate = cost_rate;
    m.up = up;
    m.down = 1.0 / up;
    m.growth = growth;
    return m;
}

double node_stock_price(const ModelParams& m, int t, int l) {
    if (t < 0 || t > m.steps + 1 || l < 0 || l > t) {
        throw std::out_of_range("node (" + std::to_string(t) + ", " + std::to_string(l) +
                                ") outside the lattice");
    }
    return m.spot * std::pow(m.up, t - 2 * l);
}

PriceGrid::PriceGrid(const ModelParams& m) : offset_(m.steps + 1) {
    prices_.resize(static_cast<std::size_t>(2 * offset_ + 1));
    for (int j = -offset_; j <= offset_; ++j) {
        prices_[static_cast<std::size_t>(j + offset_)] = m.spot * std::pow(m.up, j);
    }
}

QuotedPrices quoted(const ModelParams& m, int t, double stock) {
    if (t == 0) return {stock, stock, stock};
    return {(1.0 + m.cost_rate) * stock, (1.0 - m.cost_rate) * stock, stock};
}

PayoffSpec PayoffSpec::put(double strike) {
    return PayoffSpec{PayoffKind::PutPhysical, strike, 0.0, std::nullopt};
}

PayoffSpec PayoffSpec::call(double strike) {
    return PayoffSpec{PayoffKind::CallPhysical, strike, 0.0, std::nullopt};
}

PayoffSpec PayoffSpec::bull_spread(double long_strike, double short_strike) {
    PayoffSpec s{PayoffKind::BullSpreadCash, long_strike, short_strike, std::nullopt};
    validate(s);
    return s;
}

PayoffSpec PayoffSpec::custom(PwlFunction cash_of_stock) {
    return PayoffSpec{PayoffKind::CustomCash, 0.0, 0.0, std::move(cash_of_stock)};
}

void validate(const PayoffSpec& spec) {
    switch (spec.kind) {
    case PayoffKind::PutPhysical:
    case PayoffKind::CallPhysical:
        if (!std::isfinite(spec.strike)) throw std::invalid_argument("strike must be finite");
        break;
    case PayoffKind::BullSpreadCash:
        if (!(spec.strike < spec.strike2)) {
            throw std::invalid_argument("bull spread needs long strike < short strike");
        }
        break;
    case PayoffKind::CustomCash:
        if (!spec.custom_cash) throw std::invalid_argument("custom payoff needs a cash function");
        break;
    }
}

std::string_view to_string(PayoffKind kind) {
    switch (kind) {
    case PayoffKind::PutPhysical: return "put";
    case PayoffKind::CallPhysical: return "call";
    case PayoffKind::BullSpreadCash: return "bullspread";
    case PayoffKind::CustomCash: return "custom";
    }
    return "?";
}

PayoffKind payoff_kind_from_string(std::string_view name) {
    if (name == "put") return PayoffKind::PutPhysical;
    if (name == "call") return PayoffKind::CallPhysical;
    if (name == "bullspread") return PayoffKind::BullSpreadCash;
    if (name == "custom") return PayoffKind::CustomCash;
    throw std::invalid_argument("unknown payoff '" + std::string(name) + "'");
}

namespace {

double cash_settlement(const PayoffSpec& spec, double stock) {
    if (spec.kind == PayoffKind::BullSpreadCash) {
        return std::max(stock - spec.strike, 0.0) - std::max(stock - spec.strike2, 0.0);
    }
    return (*spec.custom_cash)(stock);
}

}  // namespace

Payoff payoff(const PayoffSpec& spec, int t, int steps, double stock) {
    if (t == steps + 1) return {0.0, 0.0};
    switch (spec.kind) {
    case PayoffKind::PutPhysical: return {spec.strike, -1.0};
    case PayoffKind::CallPhysical: return {-spec.strike, 1.0};
    case PayoffKind::BullSpreadCash:
    case PayoffKind::CustomCash: return {cash_settlement(spec, stock), 0.0};
    }
    return {0.0, 0.0};
}

double exercise_value(const PayoffSpec& spec, double stock) {
    switch (spec.kind) {
    case PayoffKind::PutPhysical: return std::max(spec.strike - stock, 0.0);
    case PayoffKind::CallPhysical: return std::max(stock - spec.strike, 0.0);
    case PayoffKind::BullSpreadCash:
    case PayoffKind::CustomCash: return cash_settlement(spec, stock);
    }
    return 0.0;
}

PwlFunction seller_expense(Payoff p, const QuotedPrices& q) {
    return PwlFunction::hinge(p.stock, p.cash, -q.ask, -q.bid);
}

PwlFunction buyer_expense(Payoff p, const QuotedPrices& q) {
    return PwlFunction::hinge(-p.stock, -p.cash, -q.ask, -q.bid);
}

}  // namespace tcbinom
