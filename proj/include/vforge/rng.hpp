// Counter-based RNG (Philox4x32-10) with explicit per-sample streams.
//
// Same (seed, stream) always yields the same draw sequence regardless of
// thread count or generation order, which is what makes large parallel
// generation runs reproducible.

#ifndef VFORGE_RNG_HPP
#define VFORGE_RNG_HPP

#include <cstdint>

namespace vforge {

class Rng {
public:
    Rng(uint64_t seed, uint64_t stream) : seed_(seed), stream_(stream) {}

    uint64_t seed() const { return seed_; }
    uint64_t stream() const { return stream_; }

    uint32_t next_u32();
    uint64_t next_u64();

    // Uniform in [0, 1).
    double uniform();
    double uniform(double lo, double hi);
    float uniformf(float lo, float hi);

    // Inclusive integer range.
    int64_t uniform_int(int64_t lo, int64_t hi);

    // Standard normal (Box-Muller, second value cached).
    double normal();
    double normal(double mean, double sigma) { return mean + sigma * normal(); }

    // Index draw from non-negative weights (need not sum to 1).
    int categorical(const double* weights, int n);

    // Log-uniform over [lo, hi], lo > 0.
    double log_uniform(double lo, double hi);

    bool bernoulli(double p) { return uniform() < p; }

private:
    void refill();

    uint64_t seed_;
    uint64_t stream_;
    uint64_t counter_ = 0;
    uint32_t block_[4] = {0, 0, 0, 0};
    int block_pos_ = 4;
    double cached_normal_ = 0.0;
    bool has_cached_normal_ = false;
};

// Stateless hash of a coordinate tuple onto u32, used by lattice noise.
uint32_t hash_coords(uint64_t seed, int64_t a, int64_t b, int64_t c, uint32_t tag);

}  // namespace vforge

#endif
