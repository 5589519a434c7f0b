#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

namespace cpcc {

// Seeded splittable generator (splitmix64 core). The u64 stream is exact and
// identical for a given seed on any platform; derived double streams depend
// only on IEEE-754 arithmetic and libm's log/cos rounding.
//
// Single-owner: one Rng per logical stream, never shared across threads.
// split() derives an independent child stream, so one experiment seed can
// drive init, batching, augmentation and clustering without coupling them.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double next_uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // uniform integer in [0, n), n >= 1
    std::size_t next_below(std::size_t n) {
        return static_cast<std::size_t>(
            (static_cast<unsigned __int128>(next_u64()) * static_cast<unsigned __int128>(n)) >> 64);
    }

    // standard normal via Box-Muller; one draw consumes two uniforms
    double next_gaussian() {
        double u1 = 1.0 - next_uniform(); // (0, 1], keeps log finite
        double u2 = next_uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    // independent child stream
    Rng split() { return Rng(next_u64()); }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = next_below(i);
            std::swap(v[i - 1], v[j]);
        }
    }

  private:
    std::uint64_t state_;
};

using RngState = Rng;

} // namespace cpcc
