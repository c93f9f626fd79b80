#pragma once

#include <cstdint>
#include <limits>
#include <cmath>

namespace mspop {

// Counter-based random stream.  Output i is mix64(key + i*GAMMA), the
// SplitMix64 sequence evaluated at an arbitrary position, so a stream is
// fully determined by its key and the number of values already drawn.
// Agent simulations derive one stream per agent from (seed, replicate,
// lineage); results are then independent of scheduling order.
class CounterRng {
  public:
    explicit CounterRng(std::uint64_t key) : key_(key) {}

    static std::uint64_t mix64(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Key derivation: a short hash chain over the identifying integers.
    static std::uint64_t derive_key(std::uint64_t seed, std::uint64_t replicate,
                                    std::uint64_t lineage) {
        std::uint64_t k = mix64(seed + GAMMA);
        k = mix64(k ^ (replicate + GAMMA));
        k = mix64(k ^ (lineage + GAMMA));
        return k;
    }

    // Child streams get fresh keys; slot distinguishes siblings.
    std::uint64_t child_key(std::uint64_t slot) const {
        return mix64(key_ ^ mix64(slot + GAMMA));
    }

    std::uint64_t next_u64() { return mix64(key_ + (++counter_) * GAMMA); }

    // Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Exponential waiting time; infinite for non-positive rates.
    double exponential(double rate) {
        if (rate <= 0.0) return std::numeric_limits<double>::infinity();
        return -std::log1p(-uniform()) / rate;
    }

    std::uint64_t key() const { return key_; }

  private:
    static constexpr std::uint64_t GAMMA = 0x9E3779B97F4A7C15ull;
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

} // namespace mspop
