#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tcbinom/pwl.hpp"

namespace tcbinom {

/// Calibrated lattice. Per-step factors: `up` and `down` for the stock,
/// `growth` for one unit of cash.
struct ModelParams {
    double spot = 100.0;
    double volatility = 0.2;
    double rate = 0.1;
    double expiry = 0.25;
    int steps = 1;
    double cost_rate = 0.0;

    double up = 1.0;
    double down = 1.0;
    double growth = 1.0;
};

/// u = exp(sigma sqrt(T/N)), d = 1/u, r = exp(R T/N).
/// Throws std::invalid_argument on sigma <= 0, T <= 0, N < 1, S0 <= 0 or
/// k outside [0, 1).
ModelParams calibrate(double spot, double volatility, double rate, double expiry, int steps,
                      double cost_rate);

/// Lattice given directly by its per-step factors (d = 1/up); volatility,
/// rate and expiry are left at their defaults.
ModelParams from_factors(double spot, double up, double growth, double cost_rate, int steps);

/// S0 * u^(t-l) * d^l, where column l counts down-moves. Valid for
/// 0 <= t <= N+1 and 0 <= l <= t; throws std::out_of_range otherwise.
double node_stock_price(const ModelParams& m, int t, int l);

/// Stock prices S0 * u^j for j in [-(N+1), N+1], tabulated once per pricing
/// run. `at(t, l)` is bitwise equal to node_stock_price(m, t, l).
class PriceGrid {
public:
    explicit PriceGrid(const ModelParams& m);
    double at(int t, int l) const { return prices_[static_cast<std::size_t>(t - 2 * l + offset_)]; }

private:
    int offset_;
    std::vector<double> prices_;
};

struct QuotedPrices {
    double ask;
    double bid;
    double mid;
};

/// Ask (1+k)S and bid (1-k)S; no costs at t = 0.
QuotedPrices quoted(const ModelParams& m, int t, double stock);

enum class PayoffKind { PutPhysical, CallPhysical, BullSpreadCash, CustomCash };

struct PayoffSpec {
    PayoffKind kind = PayoffKind::PutPhysical;
    double strike = 100.0;
    double strike2 = 0.0;  // short leg of the bull spread
    std::optional<PwlFunction> custom_cash;  // cash payoff as a function of S

    static PayoffSpec put(double strike);
    static PayoffSpec call(double strike);
    static PayoffSpec bull_spread(double long_strike, double short_strike);
    static PayoffSpec custom(PwlFunction cash_of_stock);
};

/// Throws std::invalid_argument if the spec violates its invariants.
void validate(const PayoffSpec& spec);

std::string_view to_string(PayoffKind kind);
PayoffKind payoff_kind_from_string(std::string_view name);

/// Portfolio (cash, stock) delivered to the holder on exercise.
struct Payoff {
    double cash;
    double stock;
};

/// (0, 0) at t = N+1; otherwise put (K, -1), call (-K, +1), bull spread and
/// custom (cash(S), 0).
Payoff payoff(const PayoffSpec& spec, int t, int steps, double stock);

/// Scalar exercise value used without transaction costs.
double exercise_value(const PayoffSpec& spec, double stock);

/// u(y) = cash + (y - stock)^- ask - (y - stock)^+ bid
PwlFunction seller_expense(Payoff p, const QuotedPrices& q);

/// u(y) = -cash + (y + stock)^- ask - (y + stock)^+ bid
PwlFunction buyer_expense(Payoff p, const QuotedPrices& q);

}  // namespace tcbinom
