#include "langsens/linalg.hpp"

#include <algorithm>
#include <cassert>

namespace langsens {

void matvec(const Mat& a, std::span<const double> x, std::span<double> y) {
    assert(a.cols() == static_cast<int>(x.size()) && a.rows() == static_cast<int>(y.size()));
    for (int i = 0; i < a.rows(); ++i) {
        double s = 0.0;
        for (int j = 0; j < a.cols(); ++j) s += a(i, j) * x[j];
        y[i] = s;
    }
}

Mat matmul(const Mat& a, const Mat& b) {
    assert(a.cols() == b.rows());
    Mat c(a.rows(), b.cols());
    for (int i = 0; i < a.rows(); ++i)
        for (int k = 0; k < a.cols(); ++k) {
            double aik = a(i, k);
            if (aik == 0.0) continue;
            for (int j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
        }
    return c;
}

double frobenius_norm(const Mat& a) {
    double s = 0.0;
    for (double v : a.data()) s += v * v;
    return std::sqrt(s);
}

double operator_norm_2(const Mat& a) {
    int n = a.cols();
    if (n == 0 || a.rows() == 0) return 0.0;
    if (n == 1 && a.rows() == 1) return std::abs(a(0, 0));
    // power iteration on A^T A; deterministic start
    Vec v(n, 1.0 / std::sqrt(static_cast<double>(n)));
    Vec av(a.rows()), atav(n);
    double lam = 0.0;
    for (int it = 0; it < 200; ++it) {
        matvec(a, v, av);
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int i = 0; i < a.rows(); ++i) s += a(i, j) * av[i];
            atav[j] = s;
        }
        double nn = norm2(atav);
        if (nn == 0.0) return 0.0;
        for (int j = 0; j < n; ++j) v[j] = atav[j] / nn;
        double prev = lam;
        lam = nn;
        if (it > 4 && std::abs(lam - prev) <= 1e-14 * lam) break;
    }
    return std::sqrt(lam);
}

double dot(std::span<const double> a, std::span<const double> b) {
    assert(a.size() == b.size());
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

}  // namespace langsens
