#pragma once

// Straight-line reimplementation of the lattice update rule, used only to
// cross-check the incremental engine. Keeps every pulse explicitly and
// recomputes each amplitude from scratch every step.

#include <algorithm>
#include <cmath>
#include <vector>

#include <qnet/dynamics.hpp>
#include <qnet/random.hpp>

namespace qnet::oracle {

struct RefPulse
{
    double start;
    double end;
};

class ReferenceLattice
{
  public:
    ReferenceLattice(int rows, int cols, bool periodic, SimParams p, std::vector<double> init)
        : rows_(rows), cols_(cols), periodic_(periodic), p_(p)
    {
        int n = rows * cols;
        init_ = init.empty() ? std::vector<double>(n, 0.0) : init;
        last_reset_.assign(n, 0.0);
        pulses_.assign(n, {});
    }

    std::vector<int> neighbors_of(int i) const
    {
        int r = i / cols_;
        int c = i % cols_;
        std::vector<int> out;
        int dr[4] = {-1, 1, 0, 0};
        int dc[4] = {0, 0, -1, 1};
        for (int k = 0; k < 4; ++k)
        {
            int rr = r + dr[k];
            int cc = c + dc[k];
            if (periodic_)
            {
                rr = (rr + rows_) % rows_;
                cc = (cc + cols_) % cols_;
            }
            else if (rr < 0 || rr >= rows_ || cc < 0 || cc >= cols_)
            {
                continue;
            }
            out.push_back(rr * cols_ + cc);
        }
        return out;
    }

    double amplitude(int i, double t) const
    {
        double lr = last_reset_[i];
        double a = p_.v0 * (t - lr) + init_[i];
        for (int j : neighbors_of(i))
        {
            for (auto const& pulse : pulses_[j])
            {
                double lo = std::max(pulse.start, lr);
                double hi = std::min(pulse.end, t);
                if (hi > lo)
                    a += p_.v / p_.width * (hi - lo);
            }
        }
        return a;
    }

    std::vector<SpikeEvent> run(RandomStream& rng, long steps)
    {
        std::vector<SpikeEvent> events;
        int n = rows_ * cols_;
        for (long s = 0; s < steps; ++s)
        {
            double t = static_cast<double>(s) * p_.dt;
            double t_next = static_cast<double>(s + 1) * p_.dt;
            std::vector<int> fired;
            for (int i = 0; i < n; ++i)
            {
                double a = amplitude(i, t);
                double prob = 1.0 - std::exp(-p_.k_rate * a * a * p_.dt);
                if (rng.uniform() < prob)
                    fired.push_back(i);
            }
            for (int i : fired)
            {
                if (!pulses_[i].empty())
                    pulses_[i].back().end = std::min(pulses_[i].back().end, t_next);
                pulses_[i].push_back({t_next, t_next + p_.width});
                last_reset_[i] = t_next;
                init_[i] = 0.0;
                events.push_back({t_next, static_cast<NodeIndex>(i)});
            }
            double oldest = *std::min_element(last_reset_.begin(), last_reset_.end());
            for (auto& list : pulses_)
            {
                list.erase(std::remove_if(list.begin(), list.end(),
                                          [&](RefPulse const& p) { return p.end <= oldest; }),
                           list.end());
            }
        }
        return events;
    }

  private:
    int rows_;
    int cols_;
    bool periodic_;
    SimParams p_;
    std::vector<double> init_;
    std::vector<double> last_reset_;
    std::vector<std::vector<RefPulse>> pulses_;
};

}  // namespace qnet::oracle
