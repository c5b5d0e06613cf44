#pragma once

#include <functional>
#include <vector>

#include "langsens/linalg.hpp"

namespace langsens {

/// Deterministic replica-parallel reduction.
///
/// Replicas are grouped into fixed blocks of 64; a worker owns a whole
/// block and accumulates it in replica order, and the block partials are
/// combined in block order with compensated summation afterwards. The
/// result is therefore bit-identical for any worker count.
struct ReplicaReduction {
    struct Out {
        std::vector<double> sum;    // per value index, over completed replicas
        std::vector<double> sumsq;  // per value index
        long n_ok = 0;
        std::vector<long> diverged_replicas;
    };

    /// fill(replica, out_values) returns false if the replica diverged
    /// (its values are then excluded entirely).
    static Out run(long n_replicas, long n_values, int workers,
                   const std::function<bool(long, std::span<double>)>& fill);
};

struct MomentSummary {
    double mean = 0.0, var = 0.0, se = 0.0;
};

/// Sample mean / variance / standard error of the mean from reduction sums.
MomentSummary moments_from_sums(double sum, double sumsq, long n);

/// Moments of a value list using the exact summation order of
/// ReplicaReduction (plain sums inside 64-blocks, compensated across), so
/// lockstep drivers aggregate bit-identically to replica-parallel ones.
MomentSummary blocked_moments(std::span<const double> values);

}  // namespace langsens
