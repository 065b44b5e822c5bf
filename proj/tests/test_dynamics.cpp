#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include <qnet/analytics.hpp>
#include <qnet/dynamics.hpp>

#include "oracle/reference_lattice.hpp"

using namespace qnet;

namespace {

SimParams reference_params()
{
    SimParams p;
    p.v0 = 1.0;
    p.v = 0.2;
    p.width = 0.2;
    p.k_rate = 1900.0;
    p.dt = 1e-4;
    p.t_total = 0.5;
    p.burn_in = 0.1;
    return p;
}

}  // namespace

TEST(Amplitude, BackgroundOnly)
{
    SimParams p;
    p.v0 = 1.0;
    NeuronState n{0.2, 0.0};
    EXPECT_NEAR(accumulate_amplitude(n, {}, p, 0.3), 0.1, 1e-15);
}

TEST(Amplitude, FullPulseIntegratesToV)
{
    SimParams p;
    p.v0 = 0.0;
    p.v = 0.2;
    p.width = 0.2;
    std::vector<Pulse> pulses{{3, 0.1, 0.3}};
    EXPECT_NEAR(accumulate_amplitude({0.0, 0.0}, pulses, p, 0.5), 0.2, 1e-15);
}

TEST(Amplitude, HalfOverlappedPulse)
{
    SimParams p;
    p.v0 = 0.0;
    p.v = 0.2;
    p.width = 0.2;
    std::vector<Pulse> pulses{{3, 0.0, 0.2}};
    EXPECT_NEAR(accumulate_amplitude({0.1, 0.0}, pulses, p, 0.5), 0.1, 1e-15);
    EXPECT_NEAR(accumulate_amplitude({0.0, 0.0}, pulses, p, 0.1), 0.1, 1e-15);
}

TEST(Amplitude, DegenerateOverlapContributesNothing)
{
    SimParams p;
    p.v0 = 0.0;
    std::vector<Pulse> pulses{{0, 0.0, 0.1}, {1, 0.6, 0.8}};
    EXPECT_EQ(accumulate_amplitude({0.2, 0.0}, pulses, p, 0.5), 0.0);
}

TEST(Amplitude, InitialAmplitudeAdds)
{
    SimParams p;
    p.v0 = 1.0;
    EXPECT_NEAR(accumulate_amplitude({0.0, 0.7}, {}, p, 0.1), 0.8, 1e-15);
}

TEST(Amplitude, AdditivityOverDisjointPulses)
{
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 500; ++trial)
    {
        SimParams p;
        p.v0 = u(gen) * 2;
        p.v = u(gen);
        p.width = 0.05 + u(gen);
        NeuronState n{u(gen), u(gen)};
        double t = n.last_reset + u(gen) * 2;
        double s1 = u(gen) * 3;
        double s2 = s1 + p.width + u(gen);
        std::vector<Pulse> a{{1, s1, s1 + p.width}};
        std::vector<Pulse> b{{2, s2, s2 + p.width}};
        std::vector<Pulse> both{a[0], b[0]};
        double base = accumulate_amplitude(n, {}, p, t);
        double lhs = accumulate_amplitude(n, both, p, t);
        double rhs = accumulate_amplitude(n, a, p, t) + accumulate_amplitude(n, b, p, t) - base;
        EXPECT_NEAR(lhs, rhs, 1e-12);
    }
}

TEST(FiringProbability, Examples)
{
    SimParams p;
    p.k_rate = 1.0;
    p.dt = 0.01;
    EXPECT_EQ(firing_probability(0.0, p), 0.0);
    EXPECT_NEAR(firing_probability(1.0, p), 1 - std::exp(-0.01), 1e-15);
    EXPECT_NEAR(firing_probability(1.0, p), 0.00995, 1e-5);
    EXPECT_EQ(firing_probability(1e6, p), 1.0);
    EXPECT_LE(firing_probability(std::numeric_limits<double>::max(), p), 1.0);
}

TEST(FiringProbability, BoundedAndMonotone)
{
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> logu(-8, 8);
    for (int trial = 0; trial < 2000; ++trial)
    {
        SimParams p;
        p.k_rate = std::pow(10.0, logu(gen));
        p.dt = std::pow(10.0, logu(gen) / 2 - 4);
        double a = std::pow(10.0, logu(gen));
        double pa = firing_probability(a, p);
        ASSERT_GE(pa, 0.0);
        ASSERT_LE(pa, 1.0);
        EXPECT_GE(firing_probability(a * 1.5, p), pa);
        SimParams longer = p;
        longer.dt *= 1.5;
        EXPECT_GE(firing_probability(a, longer), pa);
    }
}

TEST(SimParamsValidation, NamedInvariants)
{
    auto expect_msg = [](SimParams p, std::string const& msg) {
        try
        {
            validate(p);
            ADD_FAILURE() << "expected " << msg;
        }
        catch (ValidationError const& e)
        {
            EXPECT_EQ(std::string(e.what()), msg);
        }
    };
    SimParams p;
    p.width = 0;
    expect_msg(p, "width must be positive");
    p = {};
    p.dt = 0.5;
    expect_msg(p, "dt must be smaller than width");
    p = {};
    p.burn_in = p.t_total;
    expect_msg(p, "burn_in must be smaller than t_total");
    p = {};
    p.v0 = -1;
    expect_msg(p, "v0 must be non-negative");
    p = {};
    p.k_rate = 0;
    expect_msg(p, "k_rate must be positive");
}

TEST(Step, ZeroRateNeverFires)
{
    SimParams p = reference_params();
    p.v0 = 0.0;
    p.a_init = 0.0;
    auto log = run(p, {6, 6}, {}, 0);
    EXPECT_TRUE(log.events.empty());
}

TEST(Step, HugeRateFiresEveryOtherStep)
{
    // Right after a reset the amplitude is zero, so a saturated neuron fires
    // on alternate steps: one step to integrate, one to fire.
    SimParams p = reference_params();
    p.k_rate = 1e16;
    p.t_total = 0.002;
    p.burn_in = 0.0;
    LatticeSpec lattice{5, 5};
    auto log = run(p, lattice, {}, 0);
    ASSERT_EQ(log.events.size(), 25u * 10);
    for (std::size_t k = 0; k < log.events.size(); ++k)
    {
        auto const& e = log.events[k];
        EXPECT_EQ(e.node, k % 25);
        EXPECT_NEAR(e.t, 2 * p.dt * static_cast<double>(k / 25 + 1), 1e-15);
    }
    auto est = mean_period(log, 0.0);
    EXPECT_NEAR(est.mean_period, 2 * p.dt, 1e-15);
}

TEST(Step, InitialAmplitudeCollapsesOnFirstFiring)
{
    SimParams p = reference_params();
    LatticeSpec lattice{4, 4};
    std::vector<double> init(lattice.size(), 0.0);
    init[5] = 1.0;
    LatticeState state(lattice, p, init);
    auto rng = RandomStream::substream(3, 0, 0);
    bool fired = false;
    for (int s = 0; s < 200 && !fired; ++s)
    {
        auto f = step(state, p, rng);
        fired = std::find(f.begin(), f.end(), 5u) != f.end();
    }
    ASSERT_TRUE(fired);
    EXPECT_EQ(state.neuron(5, p.dt).initial_amp, 0.0);
    EXPECT_EQ(state.amplitude(5), 0.0);
    EXPECT_DOUBLE_EQ(state.neuron(5, p.dt).last_reset, state.time(p.dt));
}

TEST(Step, FiredNodesStartPulseAtStepEnd)
{
    SimParams p = reference_params();
    LatticeSpec lattice{4, 4};
    LatticeState state(lattice, p);
    auto rng = RandomStream::substream(9, 0, 0);
    for (int s = 0; s < 3000; ++s)
    {
        auto fired = step(state, p, rng);
        for (auto i : fired)
            EXPECT_EQ(state.pulse_start_step(i), state.step_index());
        ASSERT_TRUE(std::is_sorted(fired.begin(), fired.end()));
    }
}

// The engine's incremental amplitude must equal the closed-form overlap
// amplitude over the explicit pulse history, including truncated pulses.
TEST(Step, IncrementalAmplitudeMatchesOverlapFormula)
{
    for (double width : {0.02, 0.0205})
    {
        SimParams p = reference_params();
        p.dt = 1e-3;
        p.width = width;
        p.k_rate = 3000;
        LatticeSpec lattice{5, 4, Boundary::Open};
        std::vector<double> init(lattice.size(), 0.0);
        init[0] = 0.4;
        init[7] = 0.9;
        LatticeState state(lattice, p, init);
        std::vector<std::vector<Pulse>> history(lattice.size());
        auto rng = RandomStream::substream(21, 0, 0);
        for (int s = 0; s < 600; ++s)
        {
            auto fired = step(state, p, rng);
            double t = state.time(p.dt);
            for (auto i : fired)
            {
                if (!history[i].empty())
                    history[i].back().end = std::min(history[i].back().end, t);
                history[i].push_back({i, t, t + p.width});
            }
            for (NodeIndex i = 0; i < lattice.size(); ++i)
            {
                std::vector<Pulse> incoming;
                for (auto nb : neighbors(lattice, lattice.node(i)))
                {
                    auto const& h = history[lattice.index(nb)];
                    incoming.insert(incoming.end(), h.begin(), h.end());
                }
                double expected = accumulate_amplitude(state.neuron(i, p.dt), incoming, p, t);
                ASSERT_NEAR(state.amplitude(i), expected, 1e-10) << "step " << s << " node " << i;
            }
        }
    }
}

TEST(Step, MatchesReferenceImplementationEventByEvent)
{
    struct Case
    {
        Boundary boundary;
        double dt;
        double width;
        bool with_init;
    };
    for (auto c : {Case{Boundary::Periodic, 1e-4, 0.2, false},
                   Case{Boundary::Open, 1e-4, 0.2, true},
                   Case{Boundary::Periodic, 3e-3, 0.0205, true}})
    {
        SimParams p = reference_params();
        p.dt = c.dt;
        p.width = c.width;
        p.t_total = c.dt < 1e-3 ? 0.4 : 3.0;
        LatticeSpec lattice{4, 4, c.boundary};
        std::vector<double> init;
        if (c.with_init)
        {
            init.assign(lattice.size(), 0.0);
            init[0] = 1.0;
            init[6] = 0.5;
        }
        auto rng_a = RandomStream::substream(42, 0, 0);
        auto rng_b = RandomStream::substream(42, 0, 0);
        auto log = run(p, lattice, init, rng_a);
        oracle::ReferenceLattice ref(4, 4, c.boundary == Boundary::Periodic, p, init);
        auto expected = ref.run(rng_b, static_cast<long>(step_count(p)));
        ASSERT_GT(expected.size(), 100u);
        ASSERT_EQ(log.events.size(), expected.size());
        for (std::size_t k = 0; k < expected.size(); ++k)
        {
            ASSERT_EQ(log.events[k].node, expected[k].node) << "event " << k;
            ASSERT_NEAR(log.events[k].t, expected[k].t, 1e-12) << "event " << k;
        }
    }
}

TEST(Run, ZeroDurationIsEmpty)
{
    SimParams p = reference_params();
    p.t_total = 0.0;
    p.burn_in = 0.0;
    EXPECT_TRUE(run(p, {4, 4}).events.empty());
}

TEST(Run, StepBudgetIsResourceError)
{
    SimParams p = reference_params();
    p.max_steps = 100;
    EXPECT_THROW(run(p, {4, 4}), ResourceError);
}

TEST(Run, RejectsWrongInitialSize)
{
    SimParams p = reference_params();
    std::vector<double> init(3, 0.0);
    EXPECT_THROW(run(p, {4, 4}, init), InputError);
}

TEST(Run, SeedDeterminism)
{
    SimParams p = reference_params();
    LatticeSpec lattice{8, 8};
    auto a = run(p, lattice, {}, 0);
    auto b = run(p, lattice, {}, 0);
    EXPECT_EQ(a.events, b.events);
    auto c = run(p, lattice, {}, 1);
    EXPECT_NE(a.events, c.events);
    p.seed = 2;
    auto d = run(p, lattice, {}, 0);
    EXPECT_NE(a.events, d.events);
}

TEST(Run, EventsOrderedAndInRange)
{
    SimParams p = reference_params();
    LatticeSpec lattice{8, 8, Boundary::Open};
    auto log = run(p, lattice, {}, 0);
    ASSERT_FALSE(log.events.empty());
    for (std::size_t k = 0; k < log.events.size(); ++k)
    {
        auto const& e = log.events[k];
        EXPECT_GE(e.t, 0.0);
        EXPECT_LE(e.t, p.t_total);
        if (k > 0)
        {
            auto const& prev = log.events[k - 1];
            EXPECT_TRUE(prev.t < e.t || (prev.t == e.t && prev.node < e.node));
        }
    }
}

TEST(Run, StrongPulsesStayPositive)
{
    SimParams p = reference_params();
    p.v = 10.0;
    p.t_total = 0.3;
    p.burn_in = 0.06;
    auto log = run(p, {10, 10}, {}, 0);
    auto est = mean_period(log, p.burn_in);
    EXPECT_GT(est.mean_period, 0.0);
    EXPECT_TRUE(std::isfinite(est.mean_period));
    EXPECT_GT(est.mean_period, 5 * p.dt);
}
