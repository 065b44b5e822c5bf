#pragma once

#include <cstdint>
#include <random>

namespace qnet {

/// Deterministic random stream. mt19937_64 output and seed_seq mixing are
/// fully specified by the standard, and the uniform mapping below avoids the
/// implementation-defined std::uniform_real_distribution, so a given
/// substream produces the same variates on every platform.
class RandomStream
{
  public:
    using engine_type = std::mt19937_64;

    explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

    /// Substream for run `run` of experiment `experiment` under `master`.
    static RandomStream substream(std::uint64_t master, std::uint64_t experiment,
                                  std::uint64_t run)
    {
        std::seed_seq seq{lo(master), hi(master), lo(experiment), hi(experiment), lo(run),
                          hi(run)};
        return RandomStream(seq);
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    std::uint64_t bits() { return engine_(); }

  private:
    explicit RandomStream(std::seed_seq& seq) : engine_(seq) {}

    static std::uint32_t lo(std::uint64_t x) { return static_cast<std::uint32_t>(x); }
    static std::uint32_t hi(std::uint64_t x) { return static_cast<std::uint32_t>(x >> 32); }

    engine_type engine_;
};

}  // namespace qnet
