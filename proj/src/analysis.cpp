#include "langsens/analysis.hpp"

#include <algorithm>
#include <cmath>

#include "langsens/errors.hpp"
#include "langsens/linalg.hpp"

namespace langsens {

CdfTail empirical_tail_cdf(std::vector<double> samples) {
    if (samples.size() < 1000)
        throw UsageError("empirical_tail_cdf: needs at least 1000 samples");
    for (double& s : samples) s = std::abs(s);
    std::sort(samples.begin(), samples.end());
    const size_t n = samples.size();

    CdfTail tail;
    tail.xs.reserve(n);
    tail.survival.reserve(n);
    for (size_t i = 0; i < n;) {
        size_t j = i;
        while (j < n && samples[j] == samples[i]) ++j;
        tail.xs.push_back(samples[i]);
        tail.survival.push_back(static_cast<double>(n - i) / n);  // #{ >= x } / n
        i = j;
    }
    // default fit range: [q_0.99, largest x with >= 50 exceedances]; the
    // asymptotic power law sits well above the bulk shoulder
    tail.x_lo = samples[static_cast<size_t>(0.99 * (n - 1))];
    size_t hi_idx = n >= 50 ? n - 50 : 0;
    tail.x_hi = samples[hi_idx];
    tail.sorted_magnitudes = std::move(samples);
    return tail;
}

SlopeFit fit_log_slope(CdfTail& tail) {
    std::vector<double> lx, ly;
    for (size_t i = 0; i < tail.xs.size(); ++i) {
        double x = tail.xs[i];
        if (x < tail.x_lo || x > tail.x_hi || x <= 0.0) continue;
        lx.push_back(std::log(x));
        ly.push_back(std::log(tail.survival[i]));
    }
    const long n = static_cast<long>(lx.size());
    if (n < 20) throw UsageError("fit_log_slope: fewer than 20 distinct abscissae in fit range");

    double mx = 0, my = 0;
    for (long i = 0; i < n; ++i) {
        mx += lx[i];
        my += ly[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0, syy = 0;
    for (long i = 0; i < n; ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
        syy += (ly[i] - my) * (ly[i] - my);
    }
    SlopeFit fit;
    fit.n_points = n;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ss_res = std::max(0.0, syy - fit.slope * sxy);
    fit.r_squared = (syy > 0) ? 1.0 - ss_res / syy : 1.0;
    fit.se = (n > 2) ? std::sqrt(ss_res / (n - 2) / sxx) : 0.0;

    tail.slope = fit.slope;
    tail.slope_se = fit.se;
    tail.intercept = fit.intercept;
    tail.r_squared = fit.r_squared;
    tail.fitted = true;
    return fit;
}

std::optional<Plateau> plateau_detect(std::span<const SeriesPoint> series, double rel_tol) {
    const long n = static_cast<long>(series.size());
    if (n < 10) throw UsageError("plateau_detect: needs a series of length >= 10");

    const long start = 2 * n / 3;
    double lo = series[start].value, hi = lo, max_se = series[start].std_error;
    KahanSum sum;
    for (long i = start; i < n; ++i) {
        lo = std::min(lo, series[i].value);
        hi = std::max(hi, series[i].value);
        max_se = std::max(max_se, series[i].std_error);
        sum.add(series[i].value);
    }
    const double mean = sum.value() / (n - start);
    const double band = rel_tol * std::abs(mean) + 2.0 * max_se;
    if (hi - lo > band) return std::nullopt;

    long onset = start;
    while (onset > 0 && std::abs(series[onset - 1].value - mean) <= band) --onset;
    return Plateau{mean, series[onset].time};
}

}  // namespace langsens
