#pragma once

#include <cstdint>
#include <random>

namespace fieldcov {

namespace detail {

// splitmix64: used only to whiten and combine seed words. Passing raw
// small integers straight into mt19937_64 correlates nearby streams.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t master, std::uint64_t replication,
                              std::uint64_t purpose) {
    std::uint64_t s = splitmix64(master);
    s = splitmix64(s ^ (0x9e3779b97f4a7c15ULL + replication));
    s = splitmix64(s ^ (0xc2b2ae3d27d4eb4fULL + purpose));
    return s;
}

}  // namespace detail

// Deterministic stream keyed by (master seed, replication index, purpose tag).
// Derived streams depend only on the key, never on draw order elsewhere, so
// multi-threaded schedules reproduce single-threaded output bit for bit.
class RngStream {
public:
    RngStream(std::uint64_t master, std::uint64_t replication = 0,
              std::uint64_t purpose = 0)
        : master_(master),
          replication_(replication),
          purpose_(purpose),
          engine_(detail::mix_seed(master, replication, purpose)) {}

    std::mt19937_64& engine() { return engine_; }

    double uniform() {
        return std::uniform_real_distribution<double>(0.0, 1.0)(engine_);
    }

    double normal() {
        return std::normal_distribution<double>(0.0, 1.0)(engine_);
    }

    // Uniform integer in [0, n).
    std::uint64_t index(std::uint64_t n) {
        return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_);
    }

    RngStream substream(std::uint64_t purpose) const {
        return RngStream(master_, replication_, purpose);
    }

    RngStream replicate(std::uint64_t replication) const {
        return RngStream(master_, replication, purpose_);
    }

    std::uint64_t master() const { return master_; }
    std::uint64_t replication() const { return replication_; }
    std::uint64_t purpose() const { return purpose_; }

private:
    std::uint64_t master_;
    std::uint64_t replication_;
    std::uint64_t purpose_;
    std::mt19937_64 engine_;
};

// Purpose tags for derived streams. Fixed constants: renumbering them
// changes every published seed's output.
namespace purpose {
constexpr std::uint64_t field_x = 1;
constexpr std::uint64_t field_noise = 2;
constexpr std::uint64_t locations = 3;
constexpr std::uint64_t bootstrap_base = 1000;
constexpr std::uint64_t mc_triple_base = 2000000;
}  // namespace purpose

}  // namespace fieldcov
