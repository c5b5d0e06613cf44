#pragma once

#include <optional>
#include <string>
#include <vector>

#include "langsens/dynamics.hpp"
#include "langsens/models.hpp"

namespace langsens {

struct Observable {
    std::string name;
    std::function<double(std::span<const double>)> f;
    std::function<void(std::span<const double>, std::span<double>)> grad_f;
};

/// Built-ins: "x1" (first coordinate), "indicator" (1/2 + atan(10 x)/pi,
/// 1-D), "covariance" (particle-system xy covariance), "const1".
Observable observable_for(const Model& model, const std::string& name);

struct SeriesPoint {
    double time = 0.0;
    double value = 0.0;
    double std_error = 0.0;
};

struct EstimatorResult {
    double value = 0.0;
    double std_error = 0.0;
    long n_effective = 0;
    long n_diverged = 0;
    std::pair<double, double> ci95{0.0, 0.0};
    std::vector<SeriesPoint> series;

    void finalize_ci() {
        ci95 = {value - 1.96 * std_error, value + 1.96 * std_error};
    }
};

struct RunOptions {
    int workers = 1;
};

/// Time-average estimator: per replica (1/t) int grad f(X_s) . T_s ds over
/// the measurement window, trapezoid rule on the recording stride. The
/// burn-in prefix evolves the extended pair (X, T), so the window sees the
/// stationary tangent.
EstimatorResult ergodic_sensitivity(const SimConfig& cfg, const Model& model, const Observable& obs,
                                    const RunOptions& opts = {});

/// Ensemble estimator: series(t) = mean over replicas of grad f(X_t) . T_t,
/// with the tangent started at zero at the window start (the series is the
/// transient being measured). X starts from cfg.init.
EstimatorResult ensemble_sensitivity(const SimConfig& cfg, const Model& model, const Observable& obs,
                                     const RunOptions& opts = {});

/// Green-Kubo estimator: int_0^t_trunc E_pi0[ f(X_0) g(X_s) ] ds with the
/// conjugate observable g = grad V . dforce - div dforce. Each replica is
/// equilibrated independently for cfg.burn_in so that X_0 ~ pi0. The
/// correlator is centered (empirical means of f and g subtracted) unless
/// centered=false. The series holds the running integral.
EstimatorResult green_kubo_sensitivity(const SimConfig& cfg, const Model& model,
                                       const Observable& obs, double t_trunc,
                                       const RunOptions& opts = {}, bool centered = true);

/// Finite-difference NEMD estimator with common random numbers: per replica
/// (time-average of f along X^eps minus along X^0) / eps.
EstimatorResult nemd_finite_difference(const SimConfig& cfg, const Model& model,
                                       const Observable& obs, double eps,
                                       const RunOptions& opts = {});

/// n_replicas draws approximately ~ pi0: each replica runs an independent
/// trajectory from the model default start for cfg.burn_in time.
std::vector<Vec> equilibrium_sampler(const SimConfig& cfg, const Model& model,
                                     const RunOptions& opts = {});

}  // namespace langsens
