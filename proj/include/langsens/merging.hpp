#pragma once

#include "langsens/estimators.hpp"

namespace langsens {

struct MergeConfig {
    double bin_width = 0.04;      // per coordinate
    long merge_period_steps = 10;
    bool enabled = true;
};

/// Replace every tangent by the arithmetic mean of the tangents sharing its
/// position bin (bins are floor(x_k / bin_width) per coordinate, anchored at
/// the origin). Positions are untouched; the global tangent mean is
/// preserved up to compensated-summation rounding.
void merge_tangents(std::span<const Vec> positions, std::span<Vec> tangents, double bin_width);

/// Ensemble estimator with particle merging: the whole ensemble advances in
/// lockstep and every merge_period_steps the tangents are merged. With
/// merging disabled (or a vanishing bin width) this reproduces
/// ensemble_sensitivity on the same configuration bit for bit.
EstimatorResult merged_ensemble_sensitivity(const SimConfig& cfg, const MergeConfig& merge,
                                            const Model& model, const Observable& obs);

struct MergeComparison {
    std::vector<double> times;
    std::vector<double> mean_merged, se_merged;
    std::vector<double> mean_plain, se_plain;
    std::vector<double> var_ratio;  // se_plain^2 / se_merged^2 at matched cost
    double max_abs_tangent_merged = 0.0;
    long n_batches = 0, batch_size = 0, n_plain = 0;
};

/// Side-by-side comparison: n_batches independent merged ensembles of
/// batch_size members against n_batches*batch_size plain replicas. Standard
/// errors are over batch means (merged) and over replicas (plain).
MergeComparison merge_compare(const SimConfig& cfg, const MergeConfig& merge, const Model& model,
                              const Observable& obs, long n_batches, long batch_size,
                              const RunOptions& opts = {});

}  // namespace langsens
