#include "tcbinom/pwl.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <string>

namespace tcbinom {

namespace detail {

struct PwlAccess {
    static bool same_slope(double a, double b) {
        return a == b || std::abs(a - b) <= kSlopeMergeTolerance * std::max(std::abs(a), std::abs(b));
    }

    using Coeffs = PwlFunction::Coeffs;

    static double eval_raw(const Coeffs& knots, const Coeffs& values, const Coeffs& slopes, double y) {
        auto it = std::upper_bound(knots.begin(), knots.end(), y);
        if (it == knots.begin()) return values.front() + slopes.front() * (y - knots.front());
        auto i = static_cast<std::size_t>(std::distance(knots.begin(), it)) - 1;
        return values[i] + slopes[i + 1] * (y - knots[i]);
    }

    // Merges knots whose neighbouring slopes coincide within tolerance. The
    // surviving piece keeps the slope of its leftmost constituent.
    static PwlFunction make(Coeffs knots, Coeffs values, Coeffs slopes, double origin_if_linear) {
        PwlFunction out;
        if (knots.empty()) {
            out.slopes_ = {slopes.front()};
            out.origin_value_ = origin_if_linear;
            return out;
        }
        std::size_t kept = 0;
        for (std::size_t i = 0; i < knots.size(); ++i) {
            if (same_slope(slopes[kept], slopes[i + 1])) continue;
            knots[kept] = knots[i];
            values[kept] = values[i];
            slopes[kept + 1] = slopes[i + 1];
            ++kept;
        }
        // With nothing kept the first knot and value are still in place.
        const double line_origin = values.front() - slopes.front() * knots.front();
        knots.resize(kept);
        values.resize(kept);
        slopes.resize(kept + 1);
        const double origin = kept == 0 ? line_origin : eval_raw(knots, values, slopes, 0.0);

        out.knots_ = std::move(knots);
        out.values_ = std::move(values);
        out.slopes_ = std::move(slopes);
        out.origin_value_ = origin;
        return out;
    }

    static PwlFunction negate(const PwlFunction& f) {
        PwlFunction out = f;
        for (double& v : out.values_) v = -v;
        for (double& s : out.slopes_) s = -s;
        out.origin_value_ = -out.origin_value_;
        return out;
    }

    // y -> -y
    static PwlFunction reflect(const PwlFunction& f) {
        PwlFunction out;
        out.knots_.assign(f.knots_.rbegin(), f.knots_.rend());
        for (double& k : out.knots_) k = -k;
        out.values_.assign(f.values_.rbegin(), f.values_.rend());
        out.slopes_.assign(f.slopes_.rbegin(), f.slopes_.rend());
        for (double& s : out.slopes_) s = -s;
        out.origin_value_ = f.origin_value_;
        return out;
    }

    static PwlFunction scale(const PwlFunction& f, double c) {
        Coeffs values = f.values_;
        Coeffs slopes = f.slopes_;
        for (double& v : values) v *= c;
        for (double& s : slopes) s *= c;
        return make(f.knots_, std::move(values), std::move(slopes), f.origin_value_ * c);
    }

    // Walks a function along increasing abscissae.
    struct Walker {
        const PwlFunction& f;
        std::size_t j = 0;  // number of knots <= current position

        void advance_to(double x) {
            while (j < f.knots_.size() && f.knots_[j] <= x) ++j;
        }
        double value_at(double x) const {
            if (f.knots_.empty()) return f.origin_value_ + f.slopes_.front() * x;
            if (j == 0) return f.values_.front() + f.slopes_.front() * (x - f.knots_.front());
            return f.values_[j - 1] + f.slopes_[j] * (x - f.knots_[j - 1]);
        }
        double slope_right() const { return f.slopes_[j]; }
    };

    struct Builder {
        Coeffs knots, values, slopes;

        explicit Builder(double left_slope) { slopes.push_back(left_slope); }
        void add(double x, double v, double slope_after) {
            if (!knots.empty() && !(x > knots.back())) {
                slopes.back() = slope_after;
                return;
            }
            knots.push_back(x);
            values.push_back(v);
            slopes.push_back(slope_after);
        }
        void set_slope(double s) { slopes.back() = s; }
        PwlFunction finish(double origin_if_linear) && {
            return make(std::move(knots), std::move(values), std::move(slopes), origin_if_linear);
        }
    };

    static PwlFunction max(const PwlFunction& f, const PwlFunction& g) {
        boost::container::small_vector<double, 8> grid(std::max<std::size_t>(f.knots_.size() + g.knots_.size(), 1));
        const auto grid_end = std::set_union(f.knots_.begin(), f.knots_.end(), g.knots_.begin(), g.knots_.end(),
                                             grid.begin());
        if (grid_end == grid.begin()) grid.front() = 0.0;
        else grid.erase(grid_end, grid.end());
        const std::size_t m = grid.size();

        boost::container::small_vector<double, 8> fv(m), gv(m), fs(m), gs(m);
        Walker wf{f}, wg{g};
        for (std::size_t i = 0; i < m; ++i) {
            wf.advance_to(grid[i]);
            wg.advance_to(grid[i]);
            fv[i] = wf.value_at(grid[i]);
            gv[i] = wg.value_at(grid[i]);
            fs[i] = wf.slope_right();
            gs[i] = wg.slope_right();
        }

        // Left unbounded piece: the smaller slope wins towards -infinity.
        const double sf0 = f.slopes_.front(), sg0 = g.slopes_.front();
        const double d0 = fv[0] - gv[0];
        const bool far_left_f = sf0 < sg0 || (sf0 == sg0 && d0 >= 0);
        const bool first_f = d0 > 0 ? true : (d0 < 0 ? false : far_left_f);

        Builder b(far_left_f ? sf0 : sg0);
        if (first_f != far_left_f) {
            const double x = grid[0] - d0 / (sf0 - sg0);
            if (x < grid[0]) {
                const double v = std::max(fv[0] + sf0 * (x - grid[0]), gv[0] + sg0 * (x - grid[0]));
                b.add(x, v, first_f ? sf0 : sg0);
            }
        }

        for (std::size_t i = 0; i + 1 < m; ++i) {
            const double da = fv[i] - gv[i];
            const double db = fv[i + 1] - gv[i + 1];
            const double here = std::max(fv[i], gv[i]);
            if ((da > 0 && db < 0) || (da < 0 && db > 0)) {
                const bool left_f = da > 0;
                b.add(grid[i], here, left_f ? fs[i] : gs[i]);
                const double x = grid[i] + da / (da - db) * (grid[i + 1] - grid[i]);
                if (x > grid[i] && x < grid[i + 1]) {
                    const double v = std::max(fv[i] + fs[i] * (x - grid[i]), gv[i] + gs[i] * (x - grid[i]));
                    b.add(x, v, left_f ? gs[i] : fs[i]);
                } else if (!(x > grid[i])) {
                    b.set_slope(left_f ? gs[i] : fs[i]);
                }
            } else {
                const bool use_f = da != 0 ? da > 0 : (db != 0 ? db > 0 : true);
                b.add(grid[i], here, use_f ? fs[i] : gs[i]);
            }
        }

        // Right unbounded piece: the larger slope wins towards +infinity.
        const double sfn = f.slopes_.back(), sgn = g.slopes_.back();
        const double dn = fv[m - 1] - gv[m - 1];
        const bool far_right_f = sfn > sgn || (sfn == sgn && dn >= 0);
        const bool last_f = dn > 0 ? true : (dn < 0 ? false : far_right_f);
        b.add(grid[m - 1], std::max(fv[m - 1], gv[m - 1]), last_f ? sfn : sgn);
        if (last_f != far_right_f) {
            const double x = grid[m - 1] - dn / (sfn - sgn);
            if (x > grid[m - 1]) {
                const double v =
                    std::max(fv[m - 1] + sfn * (x - grid[m - 1]), gv[m - 1] + sgn * (x - grid[m - 1]));
                b.add(x, v, far_right_f ? sfn : sgn);
            } else {
                b.set_slope(far_right_f ? sfn : sgn);
            }
        }

        return std::move(b).finish(std::max(f.origin_value_, g.origin_value_));
    }

    // Largest minorant of f with every slope <= hi, built by one left-to-right
    // pass that alternates between following f and running along a line of
    // slope hi until f drops back onto it.
    static PwlFunction cap_slopes(const PwlFunction& f, double hi) {
        const auto& k = f.knots_;
        const auto& v = f.values_;
        const auto& s = f.slopes_;
        const std::size_t n = k.size();
        if (s.front() > hi) throw UnboundedError("leftmost slope exceeds the upper slope bound");
        if (n == 0) return f;

        Builder b(s.front());
        std::size_t j = 0;
        while (j < n) {
            if (s[j + 1] <= hi) {
                b.add(k[j], v[j], s[j + 1]);
                ++j;
                continue;
            }
            const double xa = k[j], va = v[j];
            b.add(xa, va, hi);
            std::size_t piece = j + 1;
            bool resumed = false;
            for (; piece <= n; ++piece) {
                const double sp = s[piece];
                if (!(sp < hi)) continue;
                const double x0 = k[piece - 1], f0 = v[piece - 1];
                const double gap = f0 - (va + hi * (x0 - xa));
                const double x = gap > 0 ? x0 + gap / (hi - sp) : x0;
                if (piece == n || x < k[piece]) {
                    b.add(x, f0 + sp * (x - x0), sp);
                    resumed = true;
                    break;
                }
            }
            if (!resumed) break;
            j = piece;
        }
        return std::move(b).finish(f.origin_value_);
    }
};

}  // namespace detail

using detail::PwlAccess;

PwlFunction PwlFunction::linear(double value_at_zero, double slope) {
    PwlFunction f;
    f.slopes_ = {slope};
    f.origin_value_ = value_at_zero;
    return f;
}

PwlFunction PwlFunction::hinge(double knot, double value_at_knot, double left_slope, double right_slope) {
    return PwlAccess::make({knot}, {value_at_knot}, {left_slope, right_slope},
                           value_at_knot - left_slope * knot);
}

double PwlFunction::operator()(double y) const {
    if (knots_.empty()) return origin_value_ + slopes_.front() * y;
    return PwlAccess::eval_raw(knots_, values_, slopes_, y);
}

bool PwlFunction::is_convex() const noexcept {
    return std::is_sorted(slopes_.begin(), slopes_.end());
}

PwlPieces PwlFunction::pieces() const {
    return PwlPieces{0.0, origin_value_, {knots_.begin(), knots_.end()}, {slopes_.begin(), slopes_.end()}};
}

double evaluate(const PwlFunction& f, double y) { return f(y); }

PwlFunction pointwise_max(const PwlFunction& f, const PwlFunction& g) { return PwlAccess::max(f, g); }

PwlFunction pointwise_min(const PwlFunction& f, const PwlFunction& g) {
    return PwlAccess::negate(PwlAccess::max(PwlAccess::negate(f), PwlAccess::negate(g)));
}

PwlFunction negate(const PwlFunction& f) { return PwlAccess::negate(f); }

PwlFunction scale(const PwlFunction& f, double c) {
    if (!(c > 0.0) || !std::isfinite(c)) {
        throw std::invalid_argument("scale factor must be positive and finite, got " + std::to_string(c));
    }
    return PwlAccess::scale(f, c);
}

PwlFunction restrict_slopes(const PwlFunction& f, SlopeInterval iv) {
    if (!std::isfinite(iv.lo) || !std::isfinite(iv.hi) || iv.lo > iv.hi) {
        throw std::invalid_argument("slope interval requires finite lo <= hi");
    }
    const auto [left, right] = asymptotic_slopes(f);
    if (left > iv.hi) throw UnboundedError("leftmost slope exceeds the upper slope bound");
    if (right < iv.lo) throw UnboundedError("rightmost slope is below the lower slope bound");

    const auto s = f.slopes();
    const bool above = std::any_of(s.begin(), s.end(), [&](double x) { return x > iv.hi; });
    PwlFunction capped = above ? PwlAccess::cap_slopes(f, iv.hi) : f;
    const auto c = capped.slopes();
    if (std::none_of(c.begin(), c.end(), [&](double x) { return x < iv.lo; })) return capped;
    // Enforcing slope >= lo is the mirror image of enforcing slope <= -lo.
    return PwlAccess::reflect(PwlAccess::cap_slopes(PwlAccess::reflect(capped), -iv.lo));
}

PwlFunction canonicalize(const PwlPieces& raw) {
    const auto& k = raw.breakpoints;
    const auto& s = raw.slopes;
    if (s.size() != k.size() + 1) {
        throw std::invalid_argument("need exactly one more slope than breakpoints");
    }
    if (!std::isfinite(raw.anchor_y) || !std::isfinite(raw.anchor_value)) {
        throw std::invalid_argument("anchor must be finite");
    }
    for (double x : k) {
        if (!std::isfinite(x)) throw std::invalid_argument("breakpoints must be finite");
    }
    for (double x : s) {
        if (!std::isfinite(x)) throw std::invalid_argument("slopes must be finite");
    }
    if (std::adjacent_find(k.begin(), k.end(), std::greater_equal<>()) != k.end()) {
        throw std::invalid_argument("breakpoints must be strictly increasing");
    }

    if (k.empty()) {
        return PwlFunction::linear(raw.anchor_value - s.front() * raw.anchor_y, s.front());
    }

    PwlFunction::Coeffs values(k.size());
    const auto idx = static_cast<std::size_t>(
        std::distance(k.begin(), std::upper_bound(k.begin(), k.end(), raw.anchor_y)));
    double x = raw.anchor_y, val = raw.anchor_value;
    for (std::size_t i = idx; i < k.size(); ++i) {
        val += s[i] * (k[i] - x);
        x = k[i];
        values[i] = val;
    }
    x = raw.anchor_y;
    val = raw.anchor_value;
    for (std::size_t i = idx; i-- > 0;) {
        val -= s[i + 1] * (x - k[i]);
        x = k[i];
        values[i] = val;
    }
    return PwlAccess::make(PwlFunction::Coeffs(k.begin(), k.end()), std::move(values),
                           PwlFunction::Coeffs(s.begin(), s.end()), 0.0);
}

std::pair<double, double> asymptotic_slopes(const PwlFunction& f) {
    return {f.slopes().front(), f.slopes().back()};
}

}  // namespace tcbinom
