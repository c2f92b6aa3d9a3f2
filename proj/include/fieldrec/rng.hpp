#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace fieldrec {

// Deterministic random source.  Distribution transforms are implemented here
// (rather than with std:: distributions, whose output is implementation
// defined) so that seeded runs are byte-identical across toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();
    double uniform();                      // [0, 1)
    double uniform(double lo, double hi);  // [lo, hi)
    double normal();                       // N(0, 1), Box-Muller
    double normal(double mean, double sd);
    // index draw from unnormalized non-negative weights
    std::size_t categorical(const std::vector<double>& weights);
    // integer in [0, n)
    std::size_t uniform_index(std::size_t n);

    // Independent stream derived from this generator's seed and the stream id;
    // independent of how many draws were made from the parent.
    Rng fork(std::uint64_t stream) const;

    std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

}  // namespace fieldrec
