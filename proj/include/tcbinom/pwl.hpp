#pragma once

#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include <boost/container/small_vector.hpp>

namespace tcbinom {

namespace detail {
struct PwlAccess;
}

/// Closed interval of admissible slopes, in cash per unit of stock.
struct SlopeInterval {
    double lo;
    double hi;
};

/// Raised by restrict_slopes when the infimal convolution is -infinity.
class UnboundedError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Raw (possibly non-canonical) description of a piecewise-linear function:
/// the value at `anchor_y`, the breakpoints, and the slope of every piece
/// from left to right.
struct PwlPieces {
    double anchor_y = 0.0;
    double anchor_value = 0.0;
    std::vector<double> breakpoints;
    std::vector<double> slopes{0.0};
};

/// Continuous piecewise-linear function on the whole real line.
///
/// Stored as strictly increasing knots, the function value at each knot and
/// one slope per piece (knots + 1 slopes). Instances are always canonical:
/// adjacent slopes differ by more than the merge tolerance.
class PwlFunction {
public:
    /// The zero function.
    PwlFunction() = default;

    static PwlFunction linear(double value_at_zero, double slope);

    /// Two pieces joined at `knot`.
    static PwlFunction hinge(double knot, double value_at_knot, double left_slope,
                             double right_slope);

    double operator()(double y) const;

    /// f(0); canonical functions are anchored at the origin.
    double anchor_value() const noexcept { return origin_value_; }

    std::span<const double> breakpoints() const noexcept { return {knots_.data(), knots_.size()}; }
    std::span<const double> slopes() const noexcept { return {slopes_.data(), slopes_.size()}; }
    std::span<const double> knot_values() const noexcept { return {values_.data(), values_.size()}; }
    std::size_t piece_count() const noexcept { return slopes_.size(); }

    bool is_convex() const noexcept;

    PwlPieces pieces() const;

    friend bool operator==(const PwlFunction&, const PwlFunction&) = default;

    // Expense functions along the lattice rarely exceed a few pieces; inline
    // storage keeps the per-node work free of heap traffic.
    using Coeffs = boost::container::small_vector<double, 4>;

private:
    friend struct detail::PwlAccess;

    Coeffs knots_;
    Coeffs values_;
    Coeffs slopes_{0.0};
    double origin_value_ = 0.0;
};

/// Relative tolerance under which adjacent slopes are merged.
inline constexpr double kSlopeMergeTolerance = 1e-12;

double evaluate(const PwlFunction& f, double y);

PwlFunction pointwise_max(const PwlFunction& f, const PwlFunction& g);
PwlFunction pointwise_min(const PwlFunction& f, const PwlFunction& g);

/// c * f for c > 0; throws std::invalid_argument otherwise.
PwlFunction scale(const PwlFunction& f, double c);

/// -f (exact).
PwlFunction negate(const PwlFunction& f);

/// Largest function below f whose slopes all lie in [iv.lo, iv.hi]:
///   v(y) = inf_y' f(y') - lo * (y' - y)^+ + hi * (y - y')^+.
/// Throws UnboundedError when the leftmost slope exceeds hi or the rightmost
/// slope is below lo, and std::invalid_argument when lo > hi.
PwlFunction restrict_slopes(const PwlFunction& f, SlopeInterval iv);

/// Validates and canonicalises a raw description. Throws
/// std::invalid_argument on unsorted or duplicate breakpoints, a slope count
/// that does not match, or non-finite input.
PwlFunction canonicalize(const PwlPieces& raw);

/// (leftmost slope, rightmost slope).
std::pair<double, double> asymptotic_slopes(const PwlFunction& f);

}  // namespace tcbinom
