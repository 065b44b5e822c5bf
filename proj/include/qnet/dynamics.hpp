#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "lattice.hpp"
#include "random.hpp"

namespace qnet {

/// Physical and numerical parameters of one simulation.
///
/// Potentials are in arbitrary potential units and times in arbitrary time
/// units; `v` is the time integral of one complete pulse, so a pulse has
/// height v / width. `k_rate` turns the squared accumulated amplitude into a
/// firing rate.
struct SimParams
{
    double v0 = 1.0;
    double v = 0.2;
    double width = 0.2;
    double k_rate = 1900.0;
    double dt = 1e-4;
    double t_total = 1.0;
    double burn_in = 0.2;
    double a_init = 1.0;
    std::uint64_t seed = 1;
    std::uint64_t max_steps = 100'000'000;

    friend bool operator==(SimParams const&, SimParams const&) = default;
};

inline void validate(SimParams const& p)
{
    auto finite = [](double x) { return std::isfinite(x); };
    if (!finite(p.v0) || p.v0 < 0)
        throw ValidationError("v0 must be non-negative");
    if (!finite(p.v) || p.v < 0)
        throw ValidationError("v must be non-negative");
    if (!finite(p.width) || p.width <= 0)
        throw ValidationError("width must be positive");
    if (!finite(p.k_rate) || p.k_rate <= 0)
        throw ValidationError("k_rate must be positive");
    if (!finite(p.dt) || p.dt <= 0)
        throw ValidationError("dt must be positive");
    if (p.dt >= p.width)
        throw ValidationError("dt must be smaller than width");
    if (!finite(p.t_total) || p.t_total < 0)
        throw ValidationError("t_total must be non-negative");
    if (!finite(p.burn_in) || p.burn_in < 0)
        throw ValidationError("burn_in must be non-negative");
    if (p.t_total > 0 ? p.burn_in >= p.t_total : p.burn_in > 0)
        throw ValidationError("burn_in must be smaller than t_total");
    if (!finite(p.a_init) || p.a_init < 0)
        throw ValidationError("a_init must be non-negative");
}

/// Number of whole steps covering [0, t_total].
inline std::uint64_t step_count(SimParams const& p)
{
    double ratio = p.t_total / p.dt;
    double nearest = std::round(ratio);
    if (std::abs(ratio - nearest) <= 1e-9 * std::max(1.0, nearest))
        return static_cast<std::uint64_t>(nearest);
    return static_cast<std::uint64_t>(std::floor(ratio));
}

struct NeuronState
{
    double last_reset = 0.0;
    double initial_amp = 0.0;
};

/// Rectangular pulse of height v/width emitted by `source`, active on
/// [start, end). `end` is start + width unless the source fired again
/// before that, in which case the pulse is cut off at the new firing.
struct Pulse
{
    NodeIndex source = 0;
    double start = 0.0;
    double end = 0.0;
};

/// Amplitude accumulated by a neuron between its last reset and `t`.
inline double accumulate_amplitude(NeuronState const& neuron, std::span<Pulse const> pulses,
                                   SimParams const& params, double t)
{
    double window = std::max(0.0, t - neuron.last_reset);
    double amp = params.v0 * window + neuron.initial_amp;
    double height = params.v / params.width;
    for (auto const& p : pulses)
    {
        double overlap = std::min(p.end, t) - std::max(p.start, neuron.last_reset);
        if (overlap > 0)
            amp += height * overlap;
    }
    return std::max(0.0, amp);
}

/// Probability of a transition during one step at amplitude `amp`:
/// 1 - exp(-k_rate * amp^2 * dt).
inline double firing_probability(double amp, SimParams const& params)
{
    double hazard = params.k_rate * amp * amp * params.dt;
    return -std::expm1(-hazard);
}

struct SpikeEvent
{
    double t = 0.0;
    NodeIndex node = 0;

    friend bool operator==(SpikeEvent const&, SpikeEvent const&) = default;
};

struct SpikeLog
{
    std::vector<SpikeEvent> events;
    std::uint64_t run_id = 0;
    SimParams params;
    LatticeSpec lattice;
};

/// Dynamic state of every neuron on the lattice.
///
/// Amplitudes are integrated incrementally one step at a time. Each neuron
/// carries at most one outgoing pulse; firing again restarts it.
class LatticeState
{
  public:
    LatticeState(LatticeSpec const& lattice, SimParams const& params,
                 std::span<double const> initial_amp = {})
        : lattice_(lattice), table_(lattice)
    {
        validate(params);
        auto n = lattice.size();
        if (!initial_amp.empty() && initial_amp.size() != n)
        {
            throw InputError("initial amplitude assignment has " + std::to_string(initial_amp.size())
                             + " entries for " + std::to_string(n) + " nodes");
        }
        initial_.assign(n, 0.0);
        if (!initial_amp.empty())
            std::copy(initial_amp.begin(), initial_amp.end(), initial_.begin());
        for (double a : initial_)
        {
            if (!(a >= 0) || !std::isfinite(a))
                throw InputError("initial amplitudes must be finite and non-negative");
        }
        amp_ = initial_;
        last_reset_.assign(n, 0);
        pulse_start_.assign(n, no_pulse);
        emission_.assign(n + 1, 0.0);

        full_steps_ = static_cast<std::int64_t>(std::floor(params.width / params.dt * (1 + 1e-12)));
        tail_ = params.width - static_cast<double>(full_steps_) * params.dt;
        if (tail_ < 1e-9 * params.dt)
            tail_ = 0.0;
    }

    LatticeSpec const& lattice() const noexcept { return lattice_; }
    NeighborTable const& table() const noexcept { return table_; }
    std::size_t size() const noexcept { return lattice_.size(); }

    std::int64_t step_index() const noexcept { return step_; }
    double time(double dt) const noexcept { return static_cast<double>(step_) * dt; }

    NeuronState neuron(NodeIndex i, double dt) const
    {
        return {static_cast<double>(last_reset_[i]) * dt, initial_[i]};
    }

    /// Amplitude accumulated since the last reset, at the current time.
    double amplitude(NodeIndex i) const { return amp_[i]; }

    /// Step index at which node i's current pulse began, or -1.
    std::int64_t pulse_start_step(NodeIndex i) const { return pulse_start_[i]; }

    static constexpr std::int64_t no_pulse = -1;

  private:
    friend void step(LatticeState&, SimParams const&, RandomStream&, std::vector<NodeIndex>&);

    LatticeSpec lattice_;
    NeighborTable table_;
    std::int64_t step_ = 0;
    std::int64_t full_steps_ = 0;
    double tail_ = 0.0;
    std::vector<double> amp_;
    std::vector<double> initial_;
    std::vector<std::int64_t> last_reset_;
    std::vector<std::int64_t> pulse_start_;
    std::vector<double> emission_;
};

/// Advance the lattice by one step of length dt.
///
/// Every neuron decides from the step-start amplitude using one uniform
/// variate, drawn in flattened node order. Fired neurons reset at the end of
/// the step, lose their initial amplitude, and start a new pulse there.
/// `fired` is overwritten with the fired nodes in ascending index order.
inline void step(LatticeState& s, SimParams const& params, RandomStream& rng,
                 std::vector<NodeIndex>& fired)
{
    fired.clear();
    auto const n = s.size();
    auto const now = s.step_;
    double const height = params.v / params.width;
    double const full = height * params.dt;
    double const partial = height * s.tail_;
    double const background = params.v0 * params.dt;
    double const rate_dt = params.k_rate * params.dt;

    for (std::size_t j = 0; j < n; ++j)
    {
        auto start = s.pulse_start_[j];
        double e = 0.0;
        if (start != LatticeState::no_pulse)
        {
            auto age = now - start;
            if (age >= 0 && age < s.full_steps_)
                e = full;
            else if (age == s.full_steps_)
                e = partial;
        }
        s.emission_[j] = e;
    }

    auto const* nb = s.table_.of(0);
    double const* emit = s.emission_.data();
    for (std::size_t i = 0; i < n; ++i, nb += 4)
    {
        double a = s.amp_[i];
        double u = rng.uniform();
        // 1 - exp(-x) <= x, so the exact test is needed only when u < x.
        double x = rate_dt * a * a;
        if (u < x && u < -std::expm1(-x))
            fired.push_back(static_cast<NodeIndex>(i));
        s.amp_[i] = a + background + emit[nb[0]] + emit[nb[1]] + emit[nb[2]] + emit[nb[3]];
    }

    ++s.step_;
    for (auto i : fired)
    {
        s.amp_[i] = 0.0;
        s.initial_[i] = 0.0;
        s.last_reset_[i] = s.step_;
        s.pulse_start_[i] = s.step_;
    }
}

inline std::vector<NodeIndex> step(LatticeState& s, SimParams const& params, RandomStream& rng)
{
    std::vector<NodeIndex> fired;
    step(s, params, rng, fired);
    return fired;
}

/// Simulate from t = 0 to t_total with the given random stream.
inline SpikeLog run(SimParams const& params, LatticeSpec const& lattice,
                    std::span<double const> initial_amp, RandomStream& rng,
                    std::uint64_t run_id = 0)
{
    validate(params);
    validate(lattice);
    auto steps = step_count(params);
    if (steps > params.max_steps)
    {
        throw ResourceError("t_total/dt requires " + std::to_string(steps)
                            + " steps, above the budget of " + std::to_string(params.max_steps));
    }

    SpikeLog log;
    log.run_id = run_id;
    log.params = params;
    log.lattice = lattice;

    LatticeState state(lattice, params, initial_amp);
    std::vector<NodeIndex> fired;
    fired.reserve(lattice.size());
    for (std::uint64_t k = 0; k < steps; ++k)
    {
        step(state, params, rng, fired);
        double t = std::min(state.time(params.dt), params.t_total);
        for (auto i : fired)
            log.events.push_back({t, i});
    }
    return log;
}

/// Simulate using substream (params.seed, experiment, run_id).
inline SpikeLog run(SimParams const& params, LatticeSpec const& lattice,
                    std::span<double const> initial_amp = {}, std::uint64_t run_id = 0,
                    std::uint64_t experiment = 0)
{
    auto rng = RandomStream::substream(params.seed, experiment, run_id);
    return run(params, lattice, initial_amp, rng, run_id);
}

}  // namespace qnet
