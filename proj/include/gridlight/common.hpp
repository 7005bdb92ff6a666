#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace gridlight {

using NodeId = int;  // intersections first, boundary nodes after
using LinkId = int;
using LaneId = int;

// Deterministic RNG: mt19937_64 raw draws with hand-rolled distributions so
// streams do not depend on the standard library's distribution internals.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    // uniform in [0,1)
    double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // uniform integer in [0, n)
    int uniform_int(int n) {
        if (n <= 0) throw std::invalid_argument("uniform_int: n must be positive");
        // rejection sampling on the top bits to avoid modulo bias
        const std::uint64_t bound = std::numeric_limits<std::uint64_t>::max() -
                                    std::numeric_limits<std::uint64_t>::max() % static_cast<std::uint64_t>(n);
        std::uint64_t x = eng_();
        while (x >= bound) x = eng_();
        return static_cast<int>(x % static_cast<std::uint64_t>(n));
    }

    double exponential(double rate) {
        double u = uniform01();
        // u == 0 would give +inf
        while (u <= 0.0) u = uniform01();
        return -std::log(u) / rate;
    }

    // index sampled from an (unnormalized-tolerant) probability vector
    int categorical(const std::vector<double>& probs) {
        double total = 0.0;
        for (double p : probs) total += p;
        double u = uniform01() * total;
        double acc = 0.0;
        for (std::size_t i = 0; i < probs.size(); ++i) {
            acc += probs[i];
            if (u < acc) return static_cast<int>(i);
        }
        return static_cast<int>(probs.size()) - 1;
    }

private:
    std::mt19937_64 eng_;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// substream seed for (base, index) pairs, e.g. per-episode worker streams
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
    return splitmix64(base ^ splitmix64(index + 0x51ED2701u));
}

inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string to_hex(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

}  // namespace gridlight
