#pragma once

#include <cmath>
#include <span>
#include <vector>

namespace langsens {

using Vec = std::vector<double>;

/// Small dense row-major matrix. Dimensions in this project are tiny
/// (d <= 2N for the particle system), so everything is kept simple and
/// allocation-free once sized.
class Mat {
  public:
    Mat() = default;
    Mat(int rows, int cols, double fill = 0.0)
        : rows_(rows), cols_(cols), a_(static_cast<size_t>(rows) * cols, fill) {}

    static Mat identity(int n) {
        Mat m(n, n);
        for (int i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    void resize(int rows, int cols) {
        rows_ = rows;
        cols_ = cols;
        a_.assign(static_cast<size_t>(rows) * cols, 0.0);
    }

    void set_identity() {
        for (auto& v : a_) v = 0.0;
        for (int i = 0; i < std::min(rows_, cols_); ++i) (*this)(i, i) = 1.0;
    }

    double& operator()(int i, int j) { return a_[static_cast<size_t>(i) * cols_ + j]; }
    double operator()(int i, int j) const { return a_[static_cast<size_t>(i) * cols_ + j]; }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    std::span<const double> data() const { return a_; }
    std::span<double> data() { return a_; }

  private:
    int rows_ = 0, cols_ = 0;
    std::vector<double> a_;
};

/// y = A x
void matvec(const Mat& a, std::span<const double> x, std::span<double> y);

/// C = A B
Mat matmul(const Mat& a, const Mat& b);

double frobenius_norm(const Mat& a);

/// Operator 2-norm (largest singular value), via power iteration on A^T A.
double operator_norm_2(const Mat& a);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);

/// Compensated (Kahan) summation.
struct KahanSum {
    double s = 0.0, c = 0.0;
    void add(double x) {
        double y = x - c;
        double t = s + y;
        c = (t - s) - y;
        s = t;
    }
    double value() const { return s; }
};

}  // namespace langsens
