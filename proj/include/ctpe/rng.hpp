#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace ctpe {

// splitmix64 finalizer; all derived stream seeds go through this.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t hash_mix(std::uint64_t a, std::uint64_t b) {
    return splitmix64(splitmix64(a) ^ (0x9e3779b97f4a7c15ULL + b));
}

// FNV-1a over a tag string; used to salt disjoint RNG domains (train/val/test/truth).
inline std::uint64_t hash_tag(std::string_view tag) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : tag) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

/// Deterministic random stream. Substreams are derived by hashing
/// (seed, domain tag, cell indices), so draws are identical regardless of
/// scheduling order across parallel cells.
class RngStream {
  public:
    explicit RngStream(std::uint64_t seed) : gen_(splitmix64(seed)) {}

    RngStream(std::uint64_t seed, std::string_view domain, std::uint64_t a = 0,
              std::uint64_t b = 0, std::uint64_t c = 0)
        : gen_(derive_seed(seed, domain, a, b, c)) {}

    static std::uint64_t derive_seed(std::uint64_t seed, std::string_view domain,
                                     std::uint64_t a = 0, std::uint64_t b = 0,
                                     std::uint64_t c = 0) {
        std::uint64_t h = hash_mix(seed, hash_tag(domain));
        h = hash_mix(h, a);
        h = hash_mix(h, b);
        h = hash_mix(h, c);
        return h;
    }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller. Implemented by hand so draws are
    /// bit-identical across standard libraries.
    double gauss() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * M_PI * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

  private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace ctpe
