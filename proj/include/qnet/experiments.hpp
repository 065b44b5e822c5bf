#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "analytics.hpp"
#include "dynamics.hpp"
#include "error.hpp"
#include "lattice.hpp"
#include "predictor.hpp"
#include "random.hpp"

namespace qnet {

enum class PatternKind
{
    AllPeripheralOne,
    PeripheralAlternating,
    PeripheralRandom,
    AllZero,
};

inline std::string_view to_string(PatternKind k)
{
    switch (k)
    {
        case PatternKind::AllPeripheralOne: return "all-one";
        case PatternKind::PeripheralAlternating: return "alternating";
        case PatternKind::PeripheralRandom: return "random";
        case PatternKind::AllZero: return "all-zero";
    }
    return "?";
}

inline PatternKind pattern_from_string(std::string_view s)
{
    for (auto k : {PatternKind::AllPeripheralOne, PatternKind::PeripheralAlternating,
                   PatternKind::PeripheralRandom, PatternKind::AllZero})
    {
        if (s == to_string(k))
            return k;
    }
    throw InputError("unknown pattern '" + std::string(s)
                     + "' (expected all-one|alternating|random|all-zero)");
}

/// Initial amplitude per node (flattened order) for an input pattern.
/// Only PeripheralRandom consumes variates from `rng`.
inline std::vector<double> initial_amplitudes(PatternKind kind, LatticeSpec const& lattice,
                                              double a_init, RandomStream& rng)
{
    validate(lattice);
    std::vector<double> amp(lattice.size(), 0.0);
    if (kind == PatternKind::AllZero)
        return amp;
    auto ring = peripheral_nodes(lattice);
    for (std::size_t i = 0; i < ring.size(); ++i)
    {
        double a = 0.0;
        switch (kind)
        {
            case PatternKind::AllPeripheralOne: a = a_init; break;
            case PatternKind::PeripheralAlternating: a = i % 2 == 0 ? a_init : 0.0; break;
            case PatternKind::PeripheralRandom: a = rng.uniform() * a_init; break;
            case PatternKind::AllZero: break;
        }
        amp[lattice.index(ring[i])] = a;
    }
    return amp;
}

enum class SweepParam
{
    PulseStrength,
    PulseWidth,
};

inline std::string_view to_string(SweepParam p)
{
    return p == SweepParam::PulseStrength ? "v" : "width";
}

inline SweepParam sweep_param_from_string(std::string_view s)
{
    if (s == "v")
        return SweepParam::PulseStrength;
    if (s == "width")
        return SweepParam::PulseWidth;
    throw InputError("unknown sweep parameter '" + std::string(s) + "' (expected v|width)");
}

struct ExperimentOptions
{
    std::size_t runs = 20;
    /// 0 selects std::thread::hardware_concurrency().
    std::size_t threads = 1;
    /// Rate bin width; 0 selects the predicted period, adjusted so whole bins tile t_total.
    double bin_width = 0.0;
    double epsilon = 0.05;
    std::size_t tail_bins = 10;
    double q = 1.4;
    /// Fixed k for predictions; sweeps calibrate k on their first point when unset.
    std::optional<double> k;
    /// k used for the automatic bin width when no other k is known.
    double default_k = 8.213;
};

struct ExperimentResult
{
    std::string kind;
    std::uint64_t experiment_id = 0;
    SimParams params;
    LatticeSpec lattice;
    std::optional<PatternKind> pattern;
    std::optional<SweepParam> swept;
    double swept_value = 0.0;

    std::vector<std::optional<PeriodEstimate>> per_run_periods;
    std::optional<PeriodEstimate> period;

    std::optional<PredictionParams> prediction_params;
    std::optional<double> prediction;

    RateSeries rates;
    std::optional<Plateau> plateau;
    std::optional<double> decay_time;
    double epsilon = 0.0;

    /// Spike log of run 0, backing the raster and cumulative series.
    SpikeLog raster;
    std::vector<CountPoint> cumulative;
    std::optional<LinearFit> pooled_fit;
    std::optional<Node> tracked;
    std::vector<CountPoint> tracked_cumulative;
    std::optional<LinearFit> tracked_fit;
};

namespace detail {

struct RunOutput
{
    std::optional<PeriodEstimate> period;
    std::vector<std::size_t> bins;
    std::optional<SpikeLog> log;
};

/// Runs `body(i)` for i in [0, runs) on up to `threads` workers. Results are
/// stored by index so the outcome does not depend on scheduling.
template<class T, class F>
std::vector<T> run_indexed(std::size_t runs, std::size_t threads, F&& body)
{
    std::vector<T> out(runs);
    if (threads == 0)
        threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min(threads, runs);
    if (threads <= 1)
    {
        for (std::size_t i = 0; i < runs; ++i)
            out[i] = body(i);
        return out;
    }
    std::vector<std::exception_ptr> errors(threads);
    {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < threads; ++w)
        {
            pool.emplace_back([&, w] {
                try
                {
                    for (std::size_t i = w; i < runs; i += threads)
                        out[i] = body(i);
                }
                catch (...)
                {
                    errors[w] = std::current_exception();
                }
            });
        }
    }
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);
    return out;
}

inline std::optional<PeriodEstimate> try_mean_period(SpikeLog const& log, double burn_in)
{
    try
    {
        return mean_period(log, burn_in);
    }
    catch (InsufficientData const&)
    {
        return std::nullopt;
    }
}

/// Pools per-run estimates: interval-weighted mean, standard error from the
/// spread of run means when at least two runs contribute.
inline std::optional<PeriodEstimate>
pool_periods(std::vector<std::optional<PeriodEstimate>> const& runs)
{
    double weighted = 0.0;
    std::size_t n = 0;
    std::vector<double> means;
    std::optional<PeriodEstimate> single;
    for (auto const& r : runs)
    {
        if (!r)
            continue;
        weighted += r->mean_period * static_cast<double>(r->n_intervals);
        n += r->n_intervals;
        means.push_back(r->mean_period);
        single = r;
    }
    if (n == 0)
        return std::nullopt;
    PeriodEstimate est;
    est.mean_period = weighted / static_cast<double>(n);
    est.n_intervals = n;
    if (means.size() >= 2)
    {
        double m = 0.0;
        for (double x : means)
            m += x;
        m /= static_cast<double>(means.size());
        double ss = 0.0;
        for (double x : means)
            ss += (x - m) * (x - m);
        double r = static_cast<double>(means.size());
        est.std_error = std::sqrt(ss / (r - 1) / r);
    }
    else
    {
        est.std_error = single->std_error;
    }
    return est;
}

inline double auto_bin_width(SimParams const& p, ExperimentOptions const& opt)
{
    if (opt.bin_width > 0)
        return opt.bin_width;
    if (p.v0 + 4 * opt.q * p.v / p.width > 0)
    {
        double k = opt.k.value_or(opt.default_k);
        double tau = predicted_period({k, opt.q, p.v0, p.v, p.width});
        if (p.t_total == 0)
            return tau;
        // Nearest width that tiles t_total, so the last bin is not truncated.
        if (tau < p.t_total)
            return p.t_total / std::round(p.t_total / tau);
    }
    return p.t_total > 0 ? p.t_total / 50 : 1.0;
}

inline ExperimentResult run_batch(std::string kind, std::uint64_t experiment_id,
                                  SimParams const& params, LatticeSpec const& lattice,
                                  std::optional<PatternKind> pattern,
                                  ExperimentOptions const& opt)
{
    validate(params);
    validate(lattice);
    if (opt.runs == 0)
        throw InputError("runs must be at least 1");

    double bin_width = auto_bin_width(params, opt);
    auto outputs = run_indexed<RunOutput>(opt.runs, opt.threads, [&](std::size_t i) {
        auto rng = RandomStream::substream(params.seed, experiment_id, i);
        std::vector<double> init;
        if (pattern)
            init = initial_amplitudes(*pattern, lattice, params.a_init, rng);
        auto log = run(params, lattice, init, rng, i);
        RunOutput out;
        out.period = try_mean_period(log, params.burn_in);
        out.bins = binned_counts(log, bin_width);
        if (i == 0)
            out.log = std::move(log);
        return out;
    });

    ExperimentResult res;
    res.kind = std::move(kind);
    res.experiment_id = experiment_id;
    res.params = params;
    res.lattice = lattice;
    res.pattern = pattern;
    res.epsilon = opt.epsilon;

    std::vector<std::vector<std::size_t>> bins;
    for (auto& o : outputs)
    {
        res.per_run_periods.push_back(o.period);
        bins.push_back(std::move(o.bins));
    }
    res.period = pool_periods(res.per_run_periods);
    res.rates = aggregate_rates(bins, lattice.size(), bin_width);
    if (res.rates.bins.size() >= opt.tail_bins)
    {
        res.plateau = qnet::plateau(res.rates, opt.tail_bins);
        res.decay_time = memory_decay_time(res.rates, opt.epsilon, opt.tail_bins);
    }

    res.raster = std::move(*outputs.front().log);
    res.cumulative = cumulative_counts(res.raster);
    try
    {
        res.pooled_fit = linear_fit(res.cumulative, params.burn_in);
    }
    catch (InputError const&)
    {
    }
    return res;
}

}  // namespace detail

inline double& swept_field(SimParams& p, SweepParam which)
{
    return which == SweepParam::PulseStrength ? p.v : p.width;
}

/// Independent seeded runs for each value of `which`, in the given order.
///
/// Point j uses experiment id `first_experiment + j`. Each result carries the
/// average-period prediction at its parameters: with k from `opt.k` when
/// set, otherwise calibrated so the law matches the first point.
inline std::vector<ExperimentResult> sweep(std::span<double const> values, SweepParam which,
                                           SimParams const& base, LatticeSpec const& lattice,
                                           ExperimentOptions const& opt,
                                           std::uint64_t first_experiment = 1)
{
    if (values.empty())
        throw InputError("sweep needs at least one value");
    if (opt.runs == 0)
        throw InputError("runs_per_value must be at least 1");
    validate(lattice);

    std::vector<SimParams> points;
    for (double value : values)
    {
        SimParams p = base;
        swept_field(p, which) = value;
        if (!(value > 0))
        {
            throw ValidationError("sweep value " + std::to_string(value) + " for "
                                  + std::string(to_string(which)) + " must be positive");
        }
        try
        {
            validate(p);
        }
        catch (ValidationError const& e)
        {
            throw ValidationError("sweep value " + std::to_string(value) + " for "
                                  + std::string(to_string(which)) + ": " + e.what());
        }
        points.push_back(p);
    }

    std::vector<ExperimentResult> results;
    for (std::size_t j = 0; j < points.size(); ++j)
    {
        auto r = detail::run_batch("sweep", first_experiment + j, points[j], lattice,
                                   std::nullopt, opt);
        r.swept = which;
        r.swept_value = values[j];
        results.push_back(std::move(r));
    }

    std::optional<double> k = opt.k;
    if (!k && results.front().period)
    {
        auto const& p0 = results.front().params;
        k = calibrate_k(*results.front().period, opt.q, p0.v0, p0.v, p0.width);
    }
    if (k)
    {
        for (auto& r : results)
        {
            PredictionParams pp{*k, opt.q, r.params.v0, r.params.v, r.params.width};
            r.prediction_params = pp;
            r.prediction = predicted_period(pp);
        }
    }
    return results;
}

inline std::uint64_t input_experiment_id(PatternKind kind)
{
    return 1000 + static_cast<std::uint64_t>(kind);
}

/// Multi-run average for one input pattern; run i uses substream
/// (seed, input_experiment_id(kind), i).
inline ExperimentResult input_experiment(PatternKind kind, SimParams const& base,
                                         LatticeSpec const& lattice, ExperimentOptions const& opt)
{
    auto res = detail::run_batch("input", input_experiment_id(kind), base, lattice, kind, opt);
    PredictionParams pp{opt.k.value_or(opt.default_k), opt.q, base.v0, base.v, base.width};
    if (base.v0 + 4 * opt.q * base.v / base.width > 0)
    {
        res.prediction_params = pp;
        res.prediction = predicted_period(pp);
    }
    return res;
}

/// One run with raster, pooled and per-node cumulative series, and their
/// post-burn-in linear fits.
inline ExperimentResult single_run_diagnostics(SimParams const& base, LatticeSpec const& lattice,
                                               Node tracked, ExperimentOptions opt = {})
{
    validate(lattice);
    if (!lattice.contains(tracked))
        throw InputError("tracked node outside lattice");
    opt.runs = 1;
    auto res = detail::run_batch("simulate", 0, base, lattice, std::nullopt, opt);
    res.tracked = tracked;
    res.tracked_cumulative = cumulative_counts(res.raster, lattice.index(tracked));
    try
    {
        res.tracked_fit = linear_fit(res.tracked_cumulative, base.burn_in);
    }
    catch (InputError const&)
    {
    }
    if (base.v0 + 4 * opt.q * base.v / base.width > 0)
    {
        PredictionParams pp{opt.k.value_or(opt.default_k), opt.q, base.v0, base.v, base.width};
        res.prediction_params = pp;
        res.prediction = predicted_period(pp);
    }
    return res;
}

}  // namespace qnet
