#include "vforge/rng.hpp"

#include <cmath>

namespace vforge {

namespace {

constexpr uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void philox_round(uint32_t c[4], uint32_t k0, uint32_t k1) {
    uint64_t p0 = uint64_t(kPhiloxM0) * c[0];
    uint64_t p1 = uint64_t(kPhiloxM1) * c[2];
    uint32_t hi0 = uint32_t(p0 >> 32), lo0 = uint32_t(p0);
    uint32_t hi1 = uint32_t(p1 >> 32), lo1 = uint32_t(p1);
    uint32_t n0 = hi1 ^ c[1] ^ k0;
    uint32_t n1 = lo1;
    uint32_t n2 = hi0 ^ c[3] ^ k1;
    uint32_t n3 = lo0;
    c[0] = n0; c[1] = n1; c[2] = n2; c[3] = n3;
}

// Philox4x32-10: counter = (ctr_lo, ctr_hi, stream_lo, stream_hi), key = seed.
inline void philox4x32(uint64_t ctr, uint64_t stream, uint64_t seed, uint32_t out[4]) {
    out[0] = uint32_t(ctr);
    out[1] = uint32_t(ctr >> 32);
    out[2] = uint32_t(stream);
    out[3] = uint32_t(stream >> 32);
    uint32_t k0 = uint32_t(seed), k1 = uint32_t(seed >> 32);
    for (int r = 0; r < 10; ++r) {
        philox_round(out, k0, k1);
        k0 += kPhiloxW0;
        k1 += kPhiloxW1;
    }
}

}  // namespace

void Rng::refill() {
    philox4x32(counter_++, stream_, seed_, block_);
    block_pos_ = 0;
}

uint32_t Rng::next_u32() {
    if (block_pos_ == 4) refill();
    return block_[block_pos_++];
}

uint64_t Rng::next_u64() {
    uint64_t hi = next_u32();
    return (hi << 32) | next_u32();
}

double Rng::uniform() {
    return double(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform();
}

float Rng::uniformf(float lo, float hi) {
    return float(lo + (hi - lo) * uniform());
}

int64_t Rng::uniform_int(int64_t lo, int64_t hi) {
    if (hi <= lo) return lo;
    uint64_t span = uint64_t(hi - lo) + 1;
    // Rejection against the largest multiple of span below 2^64.
    uint64_t limit = ~uint64_t(0) - (~uint64_t(0) % span + 1) % span;
    uint64_t v;
    do {
        v = next_u64();
    } while (v > limit);
    return lo + int64_t(v % span);
}

double Rng::normal() {
    if (has_cached_normal_) {
        has_cached_normal_ = false;
        return cached_normal_;
    }
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    cached_normal_ = r * std::sin(a);
    has_cached_normal_ = true;
    return r * std::cos(a);
}

int Rng::categorical(const double* weights, int n) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += weights[i];
    double u = uniform() * total;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        acc += weights[i];
        if (u < acc) return i;
    }
    return n - 1;
}

double Rng::log_uniform(double lo, double hi) {
    return std::exp(uniform(std::log(lo), std::log(hi)));
}

uint32_t hash_coords(uint64_t seed, int64_t a, int64_t b, int64_t c, uint32_t tag) {
    uint32_t out[4];
    uint64_t ctr = (uint64_t(uint32_t(a)) << 32) | uint32_t(b);
    uint64_t stream = (uint64_t(uint32_t(c)) << 32) | tag;
    philox4x32(ctr, stream, seed, out);
    return out[0];
}

}  // namespace vforge
