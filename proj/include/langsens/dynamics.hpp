#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "langsens/models.hpp"
#include "langsens/rng.hpp"

namespace langsens {

/// Position, tangent vector and clock of one replica of the extended system.
struct ParticleState {
    Vec x;
    Vec tangent;
    double time = 0.0;
};

struct InitialCondition {
    enum class Kind { Point, Gaussian, Equilibrium };
    Kind kind = Kind::Point;
    Vec point;          // Point: empty means the model default start
    double mean = 0.0;  // Gaussian: iid N(mean, sd^2) per coordinate
    double sd = 1.0;
};

struct SimConfig {
    double dt = 1e-3;
    double t_final = 1.0;
    long n_replicas = 1;
    std::uint64_t master_seed = 0;
    /// Equilibration prefix, in time units. How it is consumed depends on
    /// the consumer: see the estimator docs.
    double burn_in = 0.0;
    long record_stride = 1;
    InitialCondition init;

    long n_steps() const { return std::lround(t_final / dt); }
    long burn_steps() const { return std::lround(burn_in / dt); }
};

/// Coordinates beyond this magnitude (or non-finite) mark a replica diverged.
inline constexpr double kDivergenceThreshold = 1e12;

bool state_finite(const ParticleState& s);

/// Scratch buffers for stepping; reuse across steps.
struct StepWorkspace {
    Vec grad, df, hT;
    Mat hess;
    void resize(int dim) {
        grad.resize(dim);
        df.resize(dim);
        hT.resize(dim);
        hess.resize(dim, dim);
    }
};

/// One explicit Euler-Maruyama step of the extended system. All coefficients
/// are evaluated at the pre-step position; dw must be N(0, dt I) distributed.
///   x'       = x - grad V(x) dt + sqrt(2) dw
///   tangent' = tangent + (dforce(x) - hess V(x) tangent) dt
void step_euler_inplace(ParticleState& s, const PotentialModel& pot, const PerturbationModel& pert,
                        double dt, std::span<const double> dw, StepWorkspace& ws);

/// Value-returning variant of the step.
ParticleState step_euler(const ParticleState& s, const PotentialModel& pot,
                         const PerturbationModel& pert, double dt, std::span<const double> dw);

/// Perturbed-drift step at parameter lambda (no tangent): x' = x + F_lambda(x) dt + sqrt(2) dw.
void step_drift_inplace(Vec& x, const PerturbationModel& pert, double lambda, double dt,
                        std::span<const double> dw, Vec& scratch);

/// Resolve the window start (position after IC draw / shared burn-in).
/// For Kind::Equilibrium this runs a single trajectory of length burn_in
/// from the model default start, using a dedicated noise stream.
Vec window_start(const SimConfig& cfg, const Model& model);

using Observer = std::function<double(const ParticleState&)>;

struct Recorded {
    std::vector<double> times;
    std::vector<std::vector<double>> values;  // values[observer][record]
    bool diverged = false;
    double diverged_at = 0.0;
};

/// Drive one replica: burn-in prefix (x and tangent both evolve from
/// (x0, 0)), then a recording window of length t_final with times reset to
/// zero. Records every record_stride steps, always including t=0 and
/// t_final. Deterministic given (cfg, noise).
Recorded simulate_replica(const SimConfig& cfg, const Model& model, NoiseStream& noise,
                          std::span<const Observer> observers);

/// Fundamental matrix R(s_anchor, t) of the tangent equation.
struct ResolventAccumulator {
    Mat matrix;
    double s_anchor = 0.0;
};

ResolventAccumulator make_resolvent(int dim, double s_anchor);

/// One explicit Euler update: R <- R - hess V(X_t) R dt.
void propagate_resolvent_inplace(ResolventAccumulator& acc, const Mat& hessian_at_x, double dt);
ResolventAccumulator propagate_resolvent(const ResolventAccumulator& acc, const Mat& hessian_at_x,
                                         double dt);

/// Full-resolution trajectory dump for the resolvent-based tangent oracle.
struct TrajectoryDump {
    double dt = 0.0;
    long stride = 1;
    std::vector<Vec> positions;  // one entry per step, x_0 .. x_n
};

/// Reconstruct the tangent at the last dump position as
/// sum_s R(s, t) dforce(X_s) dt. Quadratic in the number of steps; this is
/// an oracle for the directly integrated tangent, not a production path.
Vec tangent_via_resolvent(const TrajectoryDump& traj, const Model& model);

struct VecSeries {
    std::vector<double> times;
    std::vector<Vec> values;
    bool diverged = false;
};

/// Simulate X^eps and X^0 with the same noise; series of (X^eps - X^0)/eps.
VecSeries simulate_perturbed_pair(const SimConfig& cfg, const Model& model, double eps,
                                  NoiseStream& noise);

struct ScalarSeries {
    std::vector<double> times;
    std::vector<double> values;
    bool diverged = false;
};

/// Duplicated dynamics from two starts with common noise; series of |Y^x - Y^y|.
ScalarSeries simulate_coupled_pair(std::span<const double> x, std::span<const double> y,
                                   const SimConfig& cfg, const Model& model, NoiseStream& noise);

}  // namespace langsens
