#pragma once

// Independent reference computations used by the unit and acceptance suites.
// Nothing here calls into the PWL algebra beyond plain evaluation.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "tcbinom/pwl.hpp"

namespace oracle {

inline tcbinom::PwlPieces random_pieces(std::mt19937_64& rng, int max_knots = 6, double slope_range = 5.0) {
    std::uniform_int_distribution<int> count(0, max_knots);
    std::uniform_real_distribution<double> pos(-3.0, 3.0);
    std::uniform_real_distribution<double> slope(-slope_range, slope_range);
    std::uniform_real_distribution<double> value(-10.0, 10.0);

    tcbinom::PwlPieces p;
    const int n = count(rng);
    for (int i = 0; i < n; ++i) p.breakpoints.push_back(pos(rng));
    std::sort(p.breakpoints.begin(), p.breakpoints.end());
    p.breakpoints.erase(std::unique(p.breakpoints.begin(), p.breakpoints.end()), p.breakpoints.end());
    p.slopes.clear();
    for (std::size_t i = 0; i <= p.breakpoints.size(); ++i) p.slopes.push_back(slope(rng));
    p.anchor_y = pos(rng);
    p.anchor_value = value(rng);
    return p;
}

// Cost of moving a stock holding from y to y': buy at -lo, sell at -hi.
inline double rebalance_cost(double y, double y_new, double lo, double hi) {
    return -lo * std::max(y_new - y, 0.0) + hi * std::max(y - y_new, 0.0);
}

// Infimum over a uniform grid of candidate holdings.
inline double restrict_grid(const tcbinom::PwlFunction& f, double lo, double hi, double y,
                            double from = -10.0, double to = 10.0, double step = 1e-3) {
    double best = std::numeric_limits<double>::infinity();
    const auto n = static_cast<long>(std::llround((to - from) / step));
    for (long i = 0; i <= n; ++i) {
        const double yp = from + static_cast<double>(i) * step;
        best = std::min(best, f(yp) + rebalance_cost(y, yp, lo, hi));
    }
    return best;
}

// Exact infimum: the objective is piecewise linear in y' with kinks at the
// breakpoints of f and at y' = y, so when bounded it is attained at one of them.
inline double restrict_enumerate(const tcbinom::PwlFunction& f, double lo, double hi, double y) {
    double best = f(y);
    for (double k : f.breakpoints()) best = std::min(best, f(k) + rebalance_cost(y, k, lo, hi));
    return best;
}

// Convex case: clip every slope into [lo, hi] and reconnect at a point where
// the subdifferential of f meets the interval.
inline double restrict_convex_clip(const tcbinom::PwlFunction& f, double lo, double hi, double y) {
    const auto k = f.breakpoints();
    const auto s = f.slopes();
    std::size_t j = 0;
    while (j < s.size() && s[j] < lo) ++j;
    double anchor = 0.0;
    if (j > 0) anchor = k[j - 1];
    else if (!k.empty()) anchor = k[0];
    const double base = f(anchor);

    auto clip = [&](double v) { return std::clamp(v, lo, hi); };
    auto slope_at = [&](double x) {  // slope of piece containing (x, x+)
        std::size_t i = 0;
        while (i < k.size() && k[i] <= x) ++i;
        return s[i];
    };
    // integrate clipped slopes from anchor to y through the knots in between
    std::vector<double> pts{anchor, y};
    for (double kk : k) {
        if (kk > std::min(anchor, y) && kk < std::max(anchor, y)) pts.push_back(kk);
    }
    std::sort(pts.begin(), pts.end());
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        total += clip(slope_at(pts[i])) * (pts[i + 1] - pts[i]);
    }
    return y >= anchor ? base + total : base - total;
}

// Plain frictionless binomial recursion with payoff callback P(t, S).
template <class Payoff>
double scalar_tree(double spot, double up, double growth, int steps, Payoff payoff, bool american) {
    const double down = 1.0 / up;
    const double p = (growth - down) / (up - down);
    std::vector<double> v(steps + 1);
    for (int l = 0; l <= steps; ++l) v[l] = payoff(steps, spot * std::pow(up, steps - 2 * l));
    for (int t = steps - 1; t >= 0; --t) {
        for (int l = 0; l <= t; ++l) {
            const double cont = (p * v[l] + (1 - p) * v[l + 1]) / growth;
            v[l] = american ? std::max(payoff(t, spot * std::pow(up, t - 2 * l)), cont) : cont;
        }
    }
    return v[0];
}

}  // namespace oracle
