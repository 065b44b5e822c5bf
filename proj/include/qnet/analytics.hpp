#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "dynamics.hpp"
#include "error.hpp"
#include "predictor.hpp"

namespace qnet {

/// Pooled mean inter-spike interval.
///
/// Intervals are taken between consecutive firings of the same neuron, with
/// both firings strictly after `burn_in`.
inline PeriodEstimate mean_period(SpikeLog const& log, double burn_in)
{
    std::size_t nodes = log.lattice.size();
    NodeIndex max_node = 0;
    for (auto const& e : log.events)
        max_node = std::max(max_node, e.node);
    nodes = std::max<std::size_t>(nodes, log.events.empty() ? 0 : max_node + 1);

    std::vector<double> last(nodes, std::nan(""));
    double sum = 0.0;
    double sum_sq = 0.0;
    std::size_t count = 0;
    for (auto const& e : log.events)
    {
        if (!(e.t > burn_in))
            continue;
        double& prev = last[e.node];
        if (!std::isnan(prev))
        {
            double isi = e.t - prev;
            sum += isi;
            sum_sq += isi * isi;
            ++count;
        }
        prev = e.t;
    }
    if (count == 0)
        throw InsufficientData("no inter-spike intervals after burn-in", log.events.size(), count);

    PeriodEstimate est;
    est.n_intervals = count;
    est.mean_period = sum / static_cast<double>(count);
    if (count > 1)
    {
        double n = static_cast<double>(count);
        double var = std::max(0.0, (sum_sq - n * est.mean_period * est.mean_period) / (n - 1));
        est.std_error = std::sqrt(var / n);
    }
    return est;
}

struct CountPoint
{
    double t = 0.0;
    std::size_t count = 0;
};

/// Cumulative firing count as a step function: (0, 0) followed by one point
/// per event time. Events at the same time collapse into one point.
inline std::vector<CountPoint> cumulative_counts(SpikeLog const& log,
                                                 std::optional<NodeIndex> node = std::nullopt)
{
    std::vector<CountPoint> series{{0.0, 0}};
    std::size_t count = 0;
    for (auto const& e : log.events)
    {
        if (node && e.node != *node)
            continue;
        ++count;
        if (series.back().t == e.t)
            series.back().count = count;
        else
            series.push_back({e.t, count});
    }
    return series;
}

struct LinearFit
{
    double slope = 0.0;
    double intercept = 0.0;
    /// Zero when y has no variance.
    double r_squared = 0.0;
};

inline LinearFit linear_fit(std::span<std::pair<double, double> const> points)
{
    if (points.size() < 3)
        throw InputError("linear_fit needs at least 3 points");
    double n = static_cast<double>(points.size());
    double mx = 0.0;
    double my = 0.0;
    for (auto [x, y] : points)
    {
        mx += x;
        my += y;
    }
    mx /= n;
    my /= n;
    double sxx = 0.0;
    double sxy = 0.0;
    double syy = 0.0;
    for (auto [x, y] : points)
    {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if (!(sxx > 0))
        throw InputError("linear_fit needs at least two distinct x values");

    LinearFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    if (syy > 0)
    {
        double ss_res = 0.0;
        for (auto [x, y] : points)
        {
            double r = y - (fit.intercept + fit.slope * x);
            ss_res += r * r;
        }
        fit.r_squared = std::clamp(1.0 - ss_res / syy, 0.0, 1.0);
    }
    return fit;
}

/// Linear fit of a cumulative series restricted to t > burn_in.
inline LinearFit linear_fit(std::span<CountPoint const> series, double burn_in)
{
    std::vector<std::pair<double, double>> pts;
    for (auto const& p : series)
        if (p.t > burn_in)
            pts.emplace_back(p.t, static_cast<double>(p.count));
    return linear_fit(pts);
}

struct RateBin
{
    double start = 0.0;
    /// Firings per neuron in this bin, averaged over runs.
    double mean = 0.0;
    /// Standard error of `mean` across runs; zero for a single run.
    double std_error = 0.0;
};

struct RateSeries
{
    double bin_width = 0.0;
    std::vector<RateBin> bins;
};

inline std::size_t bin_count(double t_total, double bin_width)
{
    if (!(bin_width > 0))
        throw InputError("bin_width must be positive");
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(t_total / bin_width - 1e-9)));
}

/// Raw event counts per bin for one log. Events at t_total land in the last bin.
inline std::vector<std::size_t> binned_counts(SpikeLog const& log, double bin_width)
{
    auto n = bin_count(log.params.t_total, bin_width);
    std::vector<std::size_t> counts(n, 0);
    for (auto const& e : log.events)
    {
        auto b = static_cast<std::size_t>(std::max(0.0, std::floor(e.t / bin_width)));
        ++counts[std::min(b, n - 1)];
    }
    return counts;
}

/// Average per-neuron binned rates over runs, in run order.
inline RateSeries aggregate_rates(std::span<std::vector<std::size_t> const> per_run,
                                  std::size_t neurons, double bin_width)
{
    if (per_run.empty())
        throw InputError("no runs to aggregate");
    if (neurons == 0)
        throw InputError("lattice has no neurons");
    auto n_bins = per_run.front().size();
    for (auto const& c : per_run)
        if (c.size() != n_bins)
            throw InputError("runs have different bin counts");

    RateSeries series;
    series.bin_width = bin_width;
    series.bins.resize(n_bins);
    double runs = static_cast<double>(per_run.size());
    for (std::size_t b = 0; b < n_bins; ++b)
    {
        double sum = 0.0;
        double sum_sq = 0.0;
        for (auto const& c : per_run)
        {
            double r = static_cast<double>(c[b]) / static_cast<double>(neurons);
            sum += r;
            sum_sq += r * r;
        }
        auto& bin = series.bins[b];
        bin.start = static_cast<double>(b) * bin_width;
        bin.mean = sum / runs;
        if (per_run.size() > 1)
        {
            double var = std::max(0.0, (sum_sq - runs * bin.mean * bin.mean) / (runs - 1));
            bin.std_error = std::sqrt(var / runs);
        }
    }
    return series;
}

inline RateSeries rate_timeseries(std::span<SpikeLog const> logs, double bin_width)
{
    if (logs.empty())
        throw InputError("no logs to aggregate");
    for (auto const& l : logs)
    {
        if (!(l.params == logs.front().params) || !(l.lattice == logs.front().lattice))
            throw InputError("logs were produced with different parameters");
    }
    std::vector<std::vector<std::size_t>> counts;
    counts.reserve(logs.size());
    for (auto const& l : logs)
        counts.push_back(binned_counts(l, bin_width));
    return aggregate_rates(counts, logs.front().lattice.size(), bin_width);
}

struct Plateau
{
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t bins = 0;
};

/// Mean and standard error of the last `tail_bins` bin means.
inline Plateau plateau(RateSeries const& series, std::size_t tail_bins = 10)
{
    if (tail_bins == 0 || series.bins.size() < tail_bins)
        throw InputError("rate series needs at least " + std::to_string(tail_bins)
                         + " bins for a plateau");
    Plateau p;
    p.bins = tail_bins;
    auto first = series.bins.end() - static_cast<std::ptrdiff_t>(tail_bins);
    double sum = 0.0;
    double sum_sq = 0.0;
    for (auto it = first; it != series.bins.end(); ++it)
    {
        sum += it->mean;
        sum_sq += it->mean * it->mean;
    }
    double n = static_cast<double>(tail_bins);
    p.mean = sum / n;
    if (tail_bins > 1)
        p.std_error = std::sqrt(std::max(0.0, (sum_sq - n * p.mean * p.mean) / (n - 1)) / n);
    return p;
}

/// Earliest bin start after which every bin mean stays within `epsilon`
/// (relative) of the tail plateau; zero when the first bin already does.
inline double memory_decay_time(RateSeries const& series, double epsilon,
                                std::size_t tail_bins = 10)
{
    if (!(epsilon >= 0))
        throw InputError("epsilon must be non-negative");
    auto level = plateau(series, tail_bins).mean;
    double tol = epsilon * std::abs(level);
    std::size_t first_ok = series.bins.size();
    for (std::size_t b = series.bins.size(); b-- > 0;)
    {
        if (std::abs(series.bins[b].mean - level) > tol)
            break;
        first_ok = b;
    }
    if (first_ok == series.bins.size())
        return series.bins.back().start + series.bin_width;
    return series.bins[first_ok].start;
}

}  // namespace qnet
