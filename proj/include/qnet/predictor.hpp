#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <boost/math/tools/minima.hpp>

#include "error.hpp"

namespace qnet {

/// Constants of the average-period law 1/tau = k (v0 + 4 q v / width)^(2/3).
struct PredictionParams
{
    double k = 1.0;
    double q = 1.0;
    double v0 = 1.0;
    double v = 0.0;
    double width = 1.0;
};

struct PeriodEstimate
{
    double mean_period = 0.0;
    double std_error = 0.0;
    std::size_t n_intervals = 0;
};

namespace detail {

inline bool finite_all(std::initializer_list<double> xs)
{
    for (double x : xs)
        if (!std::isfinite(x))
            return false;
    return true;
}

/// Effective drive v0 + 4 q v / width of a neuron on the square lattice.
inline double effective_drive(double v0, double q, double v, double width)
{
    if (!finite_all({v0, q, v, width}))
        throw InputError("prediction parameters must be finite");
    if (width <= 0)
        throw InputError("width must be positive");
    double drive = v0 + 4.0 * q * v / width;
    if (!(drive > 0) || !std::isfinite(drive))
        throw InputError("v0 + 4 q v / width must be positive");
    return drive;
}

}  // namespace detail

inline void validate(PredictionParams const& p)
{
    if (!(p.k > 0))
        throw ValidationError("k must be positive");
    if (!(p.q > 0))
        throw ValidationError("q must be positive");
    if (!(p.v0 >= 0))
        throw ValidationError("v0 must be non-negative");
    if (!(p.v >= 0))
        throw ValidationError("v must be non-negative");
    if (!(p.width > 0))
        throw ValidationError("width must be positive");
    detail::effective_drive(p.v0, p.q, p.v, p.width);
}

/// Phase-locked period (1 - coupling) / current of the deterministic
/// integrate-and-fire network.
inline double classical_period(double coupling, double current)
{
    if (!(current > 0))
        throw InputError("external current must be positive");
    if (!(coupling <= 1))
        throw InputError("coupling above 1 gives a negative period");
    return (1.0 - coupling) / current;
}

/// Small-signal form kp (1 - N^2) / B^2 with B the background integral and
/// N the neighbor integral. Unlike the full law it can reach zero.
inline double perturbative_period(double kp, double background_integral, double neighbor_integral)
{
    if (background_integral == 0)
        throw InputError("background integral must be nonzero");
    return kp * (1.0 - neighbor_integral * neighbor_integral)
           / (background_integral * background_integral);
}

namespace detail {

inline double cubic_coefficient(double kp, double v0, double v, double width)
{
    if (!(kp > 0) || !std::isfinite(kp))
        throw InputError("k' must be positive");
    double drive = effective_drive(v0, 1.0, v, width);
    double c = kp * drive * drive;
    if (!(c > 0) || !std::isfinite(c))
        throw InputError("degenerate cubic coefficient");
    return c;
}

}  // namespace detail

/// Positive root of 1/tau = kp (v0 tau + 4 v tau / width)^2 in closed form.
inline double solve_period_cubic(double kp, double v0, double v, double width)
{
    return 1.0 / std::cbrt(detail::cubic_coefficient(kp, v0, v, width));
}

/// Same root found by bracketing and bisection on c tau^3 - 1.
inline double solve_period_cubic_bracketed(double kp, double v0, double v, double width)
{
    double c = detail::cubic_coefficient(kp, v0, v, width);
    auto g = [c](double tau) { return c * tau * tau * tau - 1.0; };

    double lo = 1.0;
    double hi = 1.0;
    while (g(lo) > 0)
        lo *= 0.5;
    while (g(hi) < 0)
        hi *= 2.0;
    if (g(lo) == 0)
        return lo;
    if (g(hi) == 0)
        return hi;

    for (int iter = 0; iter < 2000; ++iter)
    {
        double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi)
            break;
        double gm = g(mid);
        if (gm == 0)
            return mid;
        (gm < 0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

/// tau = 1 / (k (v0 + 4 q v / width)^(2/3)).
inline double predicted_period(PredictionParams const& p)
{
    validate(p);
    double drive = detail::effective_drive(p.v0, p.q, p.v, p.width);
    return 1.0 / (p.k * std::pow(drive, 2.0 / 3.0));
}

/// k that makes the average-period law reproduce `observed` exactly.
inline double calibrate_k(PeriodEstimate const& observed, double q, double v0, double v,
                          double width)
{
    if (!(observed.mean_period > 0) || !std::isfinite(observed.mean_period))
        throw InputError("observed period must be positive");
    if (!(q > 0))
        throw InputError("q must be positive");
    double drive = detail::effective_drive(v0, q, v, width);
    return 1.0 / (observed.mean_period * std::pow(drive, 2.0 / 3.0));
}

struct PeriodObservation
{
    double v0 = 1.0;
    double v = 0.0;
    double width = 1.0;
    double period = 0.0;
};

struct KqFit
{
    double k = 0.0;
    double q = 0.0;
    /// ln(1/tau_i) - ln k - (2/3) ln(v0 + 4 q v_i / w_i)
    std::vector<double> log_residuals;
    /// predicted / observed - 1
    std::vector<double> relative_residuals;
    double rms_log_residual = 0.0;
    double max_abs_relative_residual = 0.0;
};

namespace detail {

struct KqObjective
{
    std::span<PeriodObservation const> obs;

    /// Optimal ln k at fixed q, and the resulting sum of squares.
    std::pair<double, double> evaluate(double q) const
    {
        double mean = 0.0;
        for (auto const& o : obs)
            mean += -std::log(o.period) - (2.0 / 3.0) * std::log(o.v0 + 4 * q * o.v / o.width);
        mean /= static_cast<double>(obs.size());
        double sse = 0.0;
        for (auto const& o : obs)
        {
            double r = -std::log(o.period) - mean
                       - (2.0 / 3.0) * std::log(o.v0 + 4 * q * o.v / o.width);
            sse += r * r;
        }
        return {mean, sse};
    }
};

}  // namespace detail

/// Least-squares fit of (k, q) in log space.
///
/// ln k is solved in closed form for each q; q is found by a log-spaced scan
/// over [1e-6, 1e6] followed by Brent refinement around the best grid point.
inline KqFit fit_kq(std::span<PeriodObservation const> observations)
{
    if (observations.size() < 2)
        throw InputError("fit_kq needs at least 2 observations");
    bool any_v = false;
    for (auto const& o : observations)
    {
        if (!detail::finite_all({o.v0, o.v, o.width, o.period}) || !(o.period > 0)
            || !(o.width > 0) || o.v < 0 || o.v0 < 0)
        {
            throw InputError("observations need finite v0, v >= 0, width > 0, period > 0");
        }
        if (o.v0 == 0 && o.v == 0)
            throw InputError("observation with v0 = v = 0 has no finite period");
        any_v = any_v || o.v > 0;
    }
    if (!any_v)
        throw InputError("q is unidentifiable when every observation has v = 0");

    detail::KqObjective objective{observations};
    auto sse_at = [&](double log_q) { return objective.evaluate(std::exp(log_q)).second; };

    constexpr double lo = -6 * 2.302585092994046;
    constexpr double hi = 6 * 2.302585092994046;
    constexpr int grid = 1200;
    int best = 0;
    double best_sse = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= grid; ++i)
    {
        double s = sse_at(lo + (hi - lo) * i / grid);
        if (s < best_sse)
        {
            best_sse = s;
            best = i;
        }
    }
    double a = lo + (hi - lo) * std::max(0, best - 1) / grid;
    double b = lo + (hi - lo) * std::min(grid, best + 1) / grid;
    auto [log_q, sse] = boost::math::tools::brent_find_minima(sse_at, a, b, 60);
    (void)sse;

    KqFit fit;
    fit.q = std::exp(log_q);
    double log_k = objective.evaluate(fit.q).first;
    fit.k = std::exp(log_k);
    double sum_sq = 0.0;
    for (auto const& o : observations)
    {
        double drive = o.v0 + 4 * fit.q * o.v / o.width;
        double r = -std::log(o.period) - log_k - (2.0 / 3.0) * std::log(drive);
        fit.log_residuals.push_back(r);
        double predicted = 1.0 / (fit.k * std::pow(drive, 2.0 / 3.0));
        double rel = predicted / o.period - 1.0;
        fit.relative_residuals.push_back(rel);
        fit.max_abs_relative_residual = std::max(fit.max_abs_relative_residual, std::abs(rel));
        sum_sq += r * r;
    }
    fit.rms_log_residual = std::sqrt(sum_sq / static_cast<double>(observations.size()));
    return fit;
}

}  // namespace qnet
