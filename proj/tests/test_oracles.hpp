#pragma once

// Independent numerical oracles for the test suite. These deliberately do
// not reuse the library's own solvers.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "langsens/linalg.hpp"

namespace oracle {

/// All eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
inline std::vector<double> jacobi_eigenvalues(langsens::Mat a, int sweeps = 100) {
    const int n = a.rows();
    for (int sweep = 0; sweep < sweeps; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (off < 1e-26) break;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) {
                if (a(p, q) == 0.0) continue;
                double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                double t = (theta >= 0 ? 1.0 : -1.0) /
                           (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
                for (int k = 0; k < n; ++k) {
                    double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
            }
    }
    std::vector<double> ev(n);
    for (int i = 0; i < n; ++i) ev[i] = a(i, i);
    std::sort(ev.begin(), ev.end());
    return ev;
}

/// Smallest real root of the characteristic polynomial of a symmetric 3x3,
/// by bisection on det(A - x I) between Gershgorin bounds.
inline double charpoly_min_root_3x3(const langsens::Mat& m) {
    auto det_shift = [&](double x) {
        double a = m(0, 0) - x, b = m(0, 1), c = m(0, 2);
        double d = m(1, 1) - x, e = m(1, 2), f = m(2, 2) - x;
        return a * (d * f - e * e) - b * (b * f - e * c) + c * (b * e - d * c);
    };
    double lo = m(0, 0), hi = m(0, 0);
    for (int i = 0; i < 3; ++i) {
        double r = 0.0;
        for (int j = 0; j < 3; ++j)
            if (j != i) r += std::abs(m(i, j));
        lo = std::min(lo, m(i, i) - r);
        hi = std::max(hi, m(i, i) + r);
    }
    lo -= 1.0;
    // characteristic polynomial det(A - xI) = -(x-l1)(x-l2)(x-l3):
    // positive left of the smallest root. Find the first sign change.
    double step = (hi - lo) / 4096.0, x = lo;
    while (det_shift(x + step) > 0 && x < hi) x += step;
    double a = x, b = x + step;
    for (int i = 0; i < 100; ++i) {
        double mid = 0.5 * (a + b);
        (det_shift(mid) > 0 ? a : b) = mid;
    }
    return 0.5 * (a + b);
}

/// Plain composite Simpson quadrature on [a, b].
inline double simpson(const std::function<double(double)>& f, double a, double b, int panels) {
    double h = (b - a) / panels;
    double s = f(a) + f(b);
    for (int i = 1; i < panels; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
    return s * h / 3.0;
}

/// pi-expectation of phi for density exp(-V) on [-L, L], fixed 1<<16 panels.
inline double expect(const std::function<double(double)>& phi, const std::function<double(double)>& V,
                     double L) {
    auto w = [&](double x) { return std::exp(-V(x)); };
    auto n = [&](double x) { return phi(x) * w(x); };
    return simpson(n, -L, L, 1 << 16) / simpson(w, -L, L, 1 << 16);
}

/// Central finite difference of a scalar function of one coordinate.
inline double central_diff(const std::function<double(double)>& f, double x, double h) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

/// Pareto(alpha) samples with unit scale, via inverse CDF.
inline std::vector<double> pareto_samples(double alpha, size_t n, unsigned seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::vector<double> out(n);
    for (auto& v : out) v = std::pow(1.0 - uni(gen), -1.0 / alpha);
    return out;
}

}  // namespace oracle
