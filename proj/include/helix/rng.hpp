#pragma once

#include <cmath>
#include <cstdint>
#include <span>

namespace helix {

// splitmix64: seed expansion and stable hash mixing.
// Outputs are stable across platforms, unlike std::normal_distribution,
// so seeded traces and golden files survive toolchain changes.
struct splitmix64 {
    uint64_t state;

    explicit splitmix64(uint64_t seed) : state(seed) {}

    uint64_t next() {
        uint64_t z = (state += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }
};

// Mix discrete coordinates into one seed (used for sweep cell seeds).
inline uint64_t seed_mix(uint64_t a, uint64_t b) {
    splitmix64 s(a ^ (0x9e3779b97f4a7c15ull + (b << 1)));
    s.next();
    return s.next() ^ b;
}

inline uint64_t seed_mix(uint64_t a, uint64_t b, uint64_t c) {
    return seed_mix(seed_mix(a, b), c);
}

// xoshiro256++ with a Box-Muller gaussian on top.
class rng {
  public:
    explicit rng(uint64_t seed) {
        splitmix64 sm(seed);
        for (auto & w : s_) {
            w = sm.next();
        }
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // uniform in [0, 1)
    double uniform() {
        return double(next_u64() >> 11) * 0x1.0p-53;
    }

    // uniform in (0, 1], safe as a log argument
    double uniform_pos() {
        return double((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform_pos();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    void fill_gaussian(std::span<double> out, double mean = 0.0, double stddev = 1.0) {
        for (auto & x : out) {
            x = mean + stddev * gaussian();
        }
    }

    // integer in [0, n)
    uint64_t below(uint64_t n) {
        return next_u64() % n;
    }

  private:
    static uint64_t rotl(uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    uint64_t s_[4];
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace helix
