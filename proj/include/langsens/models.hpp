#pragma once

#include <functional>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "langsens/linalg.hpp"

namespace langsens {

/// Energy landscape V with first and second derivatives. Immutable after
/// construction; safe to evaluate from any number of workers.
struct PotentialModel {
    int dim = 1;
    /// Truncation radius for 1-D quadrature and grids: |x| <= L.
    double domain_halfwidth = 0.0;
    std::function<double(std::span<const double>)> value;
    std::function<void(std::span<const double>, std::span<double>)> gradient;
    std::function<void(std::span<const double>, Mat&)> hessian;

    // 1-D conveniences (dim must be 1)
    double value1(double x) const;
    double grad1(double x) const;
    double hess1(double x) const;
};

/// Parametrized drift family F_lambda with F_0 = -grad V. The derivative
/// in lambda at 0 and its divergence are what the estimators consume.
struct PerturbationModel {
    /// |F_lambda - F_0| <= bound_C * lambda.
    double bound_C = 0.0;
    std::function<void(std::span<const double>, double, std::span<double>)> force;
    std::function<void(std::span<const double>, std::span<double>)> dforce;
    /// Divergence of dforce; empty when not available (Green-Kubo refuses then).
    std::function<double(std::span<const double>)> div_dforce;
};

/// A built model plus the experiment defaults that go with it.
struct Model {
    std::string name;
    std::vector<std::pair<std::string, double>> params;  // resolved, in catalog order
    PotentialModel pot;
    PerturbationModel pert;
    Vec default_start;
    double default_dt = 1e-3;
    double default_burn_in = 10.0;
};

struct ModelCatalogEntry {
    std::string name;
    std::vector<std::pair<std::string, double>> defaults;  // parameter name -> default value
    std::function<Model(const std::map<std::string, double>&)> builder;
};

const std::vector<ModelCatalogEntry>& model_catalog();

/// Build a catalog model; unknown names or parameter keys are usage errors.
Model build_model(const std::string& name, const std::map<std::string, double>& params = {});

/// Smallest eigenvalue of a symmetric matrix. Closed forms for d <= 3,
/// shifted inverse iteration above. Rejects inputs asymmetric beyond
/// 1e-9 * ||h||_F.
double min_spec(const Mat& h);

struct EvalBundle {
    double energy;
    Vec gradient;
    Mat hessian;
    double min_spec;
};

/// Evaluate V, grad V, hess V and min Spec(hess V) in one call.
EvalBundle eval_bundle(const PotentialModel& model, std::span<const double> x);

/// Smallest L (to 1e-6) such that v(L) - min v >= 40 and v(-L) - min v >= 40,
/// bracketed by doubling. Used for the catalog's 1-D truncation radii.
double default_domain_halfwidth(const std::function<double(double)>& v1d);

}  // namespace langsens
