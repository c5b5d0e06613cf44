#pragma once

#include <cstdint>
#include <span>

namespace langsens {

/// Counter-based Gaussian stream derived from (master_seed, replica_index).
///
/// The increments at a given step are a pure function of
/// (master_seed, replica_index, step, component), so replicas can be
/// simulated in any order on any number of workers and replaying the same
/// keys reproduces the identical sequence bit-for-bit. Streams with
/// distinct replica indices use distinct Philox keys and are independent.
class NoiseStream {
  public:
    NoiseStream(std::uint64_t master_seed, std::uint64_t replica_index);

    std::uint64_t replica_index() const { return replica_; }
    std::uint64_t step() const { return step_; }
    void seek(std::uint64_t step) { step_ = step; }

    /// Fill `out` with standard Gaussians for the given step. Stateless.
    void fill_gaussian_at(std::uint64_t step, std::span<double> out) const;

    /// Fill `out` at the internal step counter, then advance it.
    void next_gaussian(std::span<double> out) {
        fill_gaussian_at(step_, out);
        ++step_;
    }

    /// Uniform in (0,1] at (step, slot). Stateless.
    double uniform_at(std::uint64_t step, std::uint32_t slot) const;

  private:
    std::uint64_t replica_ = 0;
    std::uint64_t step_ = 0;
    std::uint32_t key0_ = 0, key1_ = 0;
    // 1-D fast path: one Philox call yields a Box-Muller pair covering two
    // consecutive steps; the spare half is memoized. Output values stay a
    // pure function of (seed, replica, step). A stream object is owned by
    // one worker at a time, so the mutable cache needs no locking.
    mutable std::uint64_t cache_pair_ = ~std::uint64_t{0};
    mutable double cache_z_[2] = {0.0, 0.0};
};

}  // namespace langsens
