#pragma once

#include <functional>
#include <vector>

#include "langsens/models.hpp"

namespace langsens {

/// Regular mesh with indices -n_half..n_half, spacing dx, Dirichlet at the ends.
struct SpectralGrid {
    double dx = 0.01;
    int n_half = 0;
    double left() const { return -n_half * dx; }
    double right() const { return n_half * dx; }
    int size() const { return 2 * n_half + 1; }
};

/// Grid covering [-L, L] with L = model.domain_halfwidth.
SpectralGrid default_grid(const PotentialModel& model, double dx = 0.01);

/// pi_0-expectation of phi for a 1-D model: int phi e^{-V} / int e^{-V} over
/// [-L, L], by composite Simpson with panel doubling until the ratio moves by
/// less than `tol` (absolute). Errors out after 24 doublings.
double quad_expectation(const std::function<double(double)>& phi, const PotentialModel& model,
                        double tol = 1e-9);

/// Symmetric tridiagonal matrix: diag[i], off[i] couples i and i+1.
struct Tridiag {
    std::vector<double> diag, off;
    int size() const { return static_cast<int>(diag.size()); }
};

/// Discretization of the symmetrized generator e^{-V/2} L e^{V/2} on the grid.
Tridiag build_operator_matrix(const PotentialModel& model, const SpectralGrid& grid);

struct PoincareResult {
    double eta = 0.0;
    /// Successive estimates of the grid-refinement loop (coarsest first).
    std::vector<double> refinement_estimates;
};

/// Spectral gap: minus the second-largest eigenvalue of the operator matrix,
/// by shifted inverse power iteration with deflation against the first
/// eigenvector. The grid is refined (dx/2, 2N) until two successive
/// estimates agree to `tol` relative.
PoincareResult poincare_constant(const PotentialModel& model, SpectralGrid grid, double tol = 1e-3);
PoincareResult poincare_constant(const PotentialModel& model, double tol = 1e-3);

struct RhoResult {
    double rho = 0.0;
    double inf_min_spec = 0.0;
    /// inf min Spec(V'') > 0: the non-convexity criterion is vacuous.
    bool strictly_convex = false;
};

/// rho = -(inf phi) E[phi^2] / E[phi]^2 with phi = min Spec(hess V), for a
/// 1-D model. Returns rho = 0 with the convex flag when inf phi > 0.
RhoResult rho_criterion(const PotentialModel& model);

/// Exponential decay rate of the Feynman-Kac norm, from (eta, inf phi,
/// E[phi], Var[phi]). Positive exactly when the spectral criterion holds.
double decay_rate_beta(double eta, double inf_phi, double E, double Var);

/// Real root of a^3 + a/2 - 1/2 = 0 (torus example), by bisection to 1e-9.
double torus_alpha0();

struct AssumptionReport {
    double eta = 0.0;       // Poincare estimate
    double inf_phi = 0.0;   // inf of phi = beta_moment * min Spec(hess V)
    double E = 0.0;         // int phi dpi0
    double Var = 0.0;       // int (phi - E)^2 dpi0
    double rho = 0.0;       // unscaled criterion value
    double beta = 0.0;      // decay rate for the scaled phi
    bool hyp_poincare_ok = false;
    bool hyp_spec_ok = false;
    bool conv_ok = false;
    bool minspec_bounded_ok = false;
    bool strictly_convex = false;  // hypotheses vacuous (eta-convex case)
};

/// Check the sufficient conditions for a 1-D model with phi scaled by
/// `beta_moment` (the moment order of the tangent being controlled).
AssumptionReport check_assumptions(const PotentialModel& model, double beta_moment);

}  // namespace langsens
