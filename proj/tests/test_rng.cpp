#include <doctest.h>

#include <cmath>
#include <vector>

#include "langsens/rng.hpp"

using namespace langsens;

TEST_SUITE_BEGIN("rng");

TEST_CASE("replay is bit-for-bit identical") {
    NoiseStream a(123, 7), b(123, 7);
    std::vector<double> va(5), vb(5);
    for (int step = 0; step < 100; ++step) {
        a.fill_gaussian_at(step, va);
        b.fill_gaussian_at(step, vb);
        for (int i = 0; i < 5; ++i) CHECK(va[i] == vb[i]);
    }
    // stateless access equals sequential access
    NoiseStream c(123, 7);
    c.seek(42);
    std::vector<double> vc(5);
    c.next_gaussian(vc);
    a.fill_gaussian_at(42, va);
    for (int i = 0; i < 5; ++i) CHECK(va[i] == vc[i]);
    CHECK(c.step() == 43);
}

TEST_CASE("distinct replicas and seeds decorrelate") {
    NoiseStream a(123, 0), b(123, 1), c(124, 0);
    std::vector<double> va(1), vb(1), vc(1);
    double sab = 0, sac = 0, saa = 0, ma = 0, mb = 0, mc = 0;
    const int n = 20000;
    for (int k = 0; k < n; ++k) {
        a.fill_gaussian_at(k, va);
        b.fill_gaussian_at(k, vb);
        c.fill_gaussian_at(k, vc);
        ma += va[0];
        mb += vb[0];
        mc += vc[0];
        sab += va[0] * vb[0];
        sac += va[0] * vc[0];
        saa += va[0] * va[0];
    }
    ma /= n;
    mb /= n;
    mc /= n;
    // means near 0, variance near 1, cross-correlations near 0 (4 sigma)
    double tol = 4.0 / std::sqrt(static_cast<double>(n));
    CHECK(std::abs(ma) < tol);
    CHECK(std::abs(mb) < tol);
    CHECK(std::abs(mc) < tol);
    CHECK(std::abs(saa / n - 1.0) < 4.0 * std::sqrt(2.0 / n));
    CHECK(std::abs(sab / n - ma * mb) < tol);
    CHECK(std::abs(sac / n - ma * mc) < tol);
}

TEST_CASE("gaussian moments") {
    NoiseStream a(987, 3);
    std::vector<double> v(4);
    double m1 = 0, m2 = 0, m3 = 0, m4 = 0;
    const int n = 50000;
    for (int k = 0; k < n; ++k) {
        a.fill_gaussian_at(k, v);
        for (double z : v) {
            m1 += z;
            m2 += z * z;
            m3 += z * z * z;
            m4 += z * z * z * z;
        }
    }
    double cnt = 4.0 * n;
    m1 /= cnt;
    m2 /= cnt;
    m3 /= cnt;
    m4 /= cnt;
    CHECK(std::abs(m1) < 0.01);
    CHECK(m2 == doctest::Approx(1.0).epsilon(0.01));
    CHECK(std::abs(m3) < 0.04);
    CHECK(m4 == doctest::Approx(3.0).epsilon(0.05));
}

TEST_CASE("uniform_at lies in (0,1]") {
    NoiseStream a(5, 5);
    for (int k = 0; k < 1000; ++k) {
        double u = a.uniform_at(k, 0);
        CHECK(u > 0.0);
        CHECK(u <= 1.0);
    }
}

TEST_SUITE_END();
