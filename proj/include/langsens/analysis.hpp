#pragma once

#include <optional>
#include <span>
#include <vector>

#include "langsens/estimators.hpp"

namespace langsens {

/// Empirical survival function of |T| samples with a log-log tail fit.
struct CdfTail {
    std::vector<double> sorted_magnitudes;  // ascending
    std::vector<double> xs;                 // distinct sample values
    std::vector<double> survival;           // S(x) = #{|T_i| >= x} / N
    double x_lo = 0.0, x_hi = 0.0;          // default fit range
    double slope = 0.0, slope_se = 0.0, intercept = 0.0, r_squared = 0.0;
    bool fitted = false;
};

/// Survival function at the sample points; needs >= 1000 samples. The
/// default fit range is [0.99-quantile, largest x with >= 50 exceedances].
CdfTail empirical_tail_cdf(std::vector<double> samples);

struct SlopeFit {
    double slope = 0.0, se = 0.0, intercept = 0.0, r_squared = 0.0;
    long n_points = 0;
};

/// Least squares of log survival against log x on [x_lo, x_hi]; needs at
/// least 20 distinct abscissae in range. A slope below -alpha is the
/// heuristic signature of a finite alpha-moment.
SlopeFit fit_log_slope(CdfTail& tail);

struct Plateau {
    double value = 0.0;
    double t_onset = 0.0;
};

/// Plateau detection: the last third of the series must have range at most
/// rel_tol |mean| + 2 max(se); the onset extends backwards while values stay
/// inside that band around the window mean.
std::optional<Plateau> plateau_detect(std::span<const SeriesPoint> series, double rel_tol);

}  // namespace langsens
