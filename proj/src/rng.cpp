#include "langsens/rng.hpp"

#include <cmath>
#include <numbers>

namespace langsens {
namespace {

// Philox4x32-10 (Salmon et al.), the usual counter-based generator for
// reproducible parallel Monte Carlo.
struct Words4 {
    std::uint32_t v[4];
};

inline std::uint32_t mulhi(std::uint32_t a, std::uint32_t b) {
    return static_cast<std::uint32_t>((static_cast<std::uint64_t>(a) * b) >> 32);
}

inline Words4 philox4x32(Words4 ctr, std::uint32_t k0, std::uint32_t k1) {
    constexpr std::uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
    constexpr std::uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        std::uint32_t hi0 = mulhi(M0, ctr.v[0]), lo0 = M0 * ctr.v[0];
        std::uint32_t hi1 = mulhi(M1, ctr.v[2]), lo1 = M1 * ctr.v[2];
        Words4 next;
        next.v[0] = hi1 ^ ctr.v[1] ^ k0;
        next.v[1] = lo1;
        next.v[2] = hi0 ^ ctr.v[3] ^ k1;
        next.v[3] = lo0;
        ctr = next;
        k0 += W0;
        k1 += W1;
    }
    return ctr;
}

inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// uint64 -> double in (0,1]
inline double to_unit(std::uint64_t w) {
    return (static_cast<double>(w >> 11) + 1.0) * 0x1.0p-53;
}

}  // namespace

NoiseStream::NoiseStream(std::uint64_t master_seed, std::uint64_t replica_index)
    : replica_(replica_index) {
    std::uint64_t k = splitmix64(master_seed) ^ splitmix64(splitmix64(replica_index) + 0x123456789ABCDEFull);
    key0_ = static_cast<std::uint32_t>(k);
    key1_ = static_cast<std::uint32_t>(k >> 32);
}

void NoiseStream::fill_gaussian_at(std::uint64_t step, std::span<double> out) const {
    const size_t d = out.size();
    if (d == 1) {
        const std::uint64_t pair = step >> 1;
        if (pair != cache_pair_) {
            Words4 ctr{{static_cast<std::uint32_t>(pair), static_cast<std::uint32_t>(pair >> 32),
                        0u, 1u}};  // tag keeps the 1-D counter space disjoint
            Words4 r = philox4x32(ctr, key0_, key1_);
            std::uint64_t w0 = (static_cast<std::uint64_t>(r.v[0]) << 32) | r.v[1];
            std::uint64_t w1 = (static_cast<std::uint64_t>(r.v[2]) << 32) | r.v[3];
            double rad = std::sqrt(-2.0 * std::log(to_unit(w0)));
            double ang = 2.0 * std::numbers::pi * to_unit(w1);
            cache_z_[0] = rad * std::cos(ang);
            cache_z_[1] = rad * std::sin(ang);
            cache_pair_ = pair;
        }
        out[0] = cache_z_[step & 1];
        return;
    }
    for (std::uint32_t slot = 0; 2 * static_cast<size_t>(slot) < d; ++slot) {
        Words4 ctr{{static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(step >> 32), slot, 0u}};
        Words4 r = philox4x32(ctr, key0_, key1_);
        std::uint64_t w0 = (static_cast<std::uint64_t>(r.v[0]) << 32) | r.v[1];
        std::uint64_t w1 = (static_cast<std::uint64_t>(r.v[2]) << 32) | r.v[3];
        double u1 = to_unit(w0);
        double u2 = to_unit(w1);
        double rad = std::sqrt(-2.0 * std::log(u1));
        double ang = 2.0 * std::numbers::pi * u2;
        out[2 * slot] = rad * std::cos(ang);
        if (2 * static_cast<size_t>(slot) + 1 < d) out[2 * slot + 1] = rad * std::sin(ang);
    }
}

double NoiseStream::uniform_at(std::uint64_t step, std::uint32_t slot) const {
    Words4 ctr{{static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(step >> 32), slot, 0x55555555u}};
    Words4 r = philox4x32(ctr, key0_, key1_);
    return to_unit((static_cast<std::uint64_t>(r.v[0]) << 32) | r.v[1]);
}

}  // namespace langsens
