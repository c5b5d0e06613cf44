#include "langsens/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "langsens/errors.hpp"

namespace langsens {

namespace {

void check_dim(const PotentialModel& m, std::span<const double> x) {
    if (static_cast<int>(x.size()) != m.dim) {
        std::ostringstream os;
        os << "dimension mismatch: model.dim=" << m.dim << ", |x|=" << x.size();
        throw UsageError(os.str());
    }
}

// --- symmetric eigenvalue helpers ------------------------------------

double min_eig_2x2(double a, double b, double c) {
    // [[a, b], [b, c]]
    double mean = 0.5 * (a + c);
    double disc = std::hypot(0.5 * (a - c), b);
    return mean - disc;
}

double min_eig_3x3(const Mat& m) {
    // trigonometric closed form for symmetric 3x3
    double p1 = m(0, 1) * m(0, 1) + m(0, 2) * m(0, 2) + m(1, 2) * m(1, 2);
    double q = (m(0, 0) + m(1, 1) + m(2, 2)) / 3.0;
    if (p1 == 0.0) return std::min({m(0, 0), m(1, 1), m(2, 2)});
    double p2 = (m(0, 0) - q) * (m(0, 0) - q) + (m(1, 1) - q) * (m(1, 1) - q) +
                (m(2, 2) - q) * (m(2, 2) - q) + 2.0 * p1;
    double p = std::sqrt(p2 / 6.0);
    Mat b(3, 3);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) b(i, j) = (m(i, j) - (i == j ? q : 0.0)) / p;
    double detb = b(0, 0) * (b(1, 1) * b(2, 2) - b(1, 2) * b(2, 1)) -
                  b(0, 1) * (b(1, 0) * b(2, 2) - b(1, 2) * b(2, 0)) +
                  b(0, 2) * (b(1, 0) * b(2, 1) - b(1, 1) * b(2, 0));
    double r = std::clamp(detb / 2.0, -1.0, 1.0);
    double phi = std::acos(r) / 3.0;
    // smallest eigenvalue uses phi + 2*pi/3
    return q + 2.0 * p * std::cos(phi + 2.0 * std::numbers::pi / 3.0);
}

// LU with partial pivoting; solve in place.
struct DenseLU {
    Mat lu;
    std::vector<int> piv;
    explicit DenseLU(Mat a) : lu(std::move(a)), piv(lu.rows()) {
        int n = lu.rows();
        for (int i = 0; i < n; ++i) piv[i] = i;
        for (int k = 0; k < n; ++k) {
            int p = k;
            for (int i = k + 1; i < n; ++i)
                if (std::abs(lu(i, k)) > std::abs(lu(p, k))) p = i;
            if (p != k) {
                for (int j = 0; j < n; ++j) std::swap(lu(k, j), lu(p, j));
                std::swap(piv[k], piv[p]);
            }
            double d = lu(k, k);
            if (d == 0.0) throw NumericError("singular matrix in inverse iteration");
            for (int i = k + 1; i < n; ++i) {
                double f = lu(i, k) / d;
                lu(i, k) = f;
                for (int j = k + 1; j < n; ++j) lu(i, j) -= f * lu(k, j);
            }
        }
    }
    void solve(std::span<const double> b, std::span<double> x) const {
        int n = lu.rows();
        for (int i = 0; i < n; ++i) x[i] = b[piv[i]];
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < i; ++j) x[i] -= lu(i, j) * x[j];
        for (int i = n - 1; i >= 0; --i) {
            for (int j = i + 1; j < n; ++j) x[i] -= lu(i, j) * x[j];
            x[i] /= lu(i, i);
        }
    }
};

double min_eig_iterative(const Mat& h) {
    // inverse iteration on (h - sigma I), sigma = Gershgorin lower bound - 1
    int n = h.rows();
    double gersh = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
        double offsum = 0.0;
        for (int j = 0; j < n; ++j)
            if (j != i) offsum += std::abs(h(i, j));
        gersh = std::min(gersh, h(i, i) - offsum);
    }
    double sigma = gersh - 1.0;
    Mat shifted = h;
    for (int i = 0; i < n; ++i) shifted(i, i) -= sigma;
    DenseLU lu(std::move(shifted));

    Vec v(n), w(n), hv(n);
    for (int i = 0; i < n; ++i) v[i] = 1.0 / std::sqrt(static_cast<double>(n) + i);
    double nv = norm2(v);
    for (auto& c : v) c /= nv;
    double lam = 0.0;
    for (int it = 0; it < 500; ++it) {
        lu.solve(v, w);
        double nw = norm2(w);
        for (int i = 0; i < n; ++i) v[i] = w[i] / nw;
        matvec(h, v, hv);
        double prev = lam;
        lam = dot(v, hv);
        if (it > 2 && std::abs(lam - prev) <= 1e-13 * (1.0 + std::abs(lam))) break;
    }
    return lam;
}

// --- colloid pair interaction U(r) = Gamma exp(-r)/r ------------------

struct PairForce {
    double gamma;
    static constexpr double r_min = 1e-8;  // singular at 0; clamp below this

    double u(double r) const { return gamma * std::exp(-r) / std::max(r, r_min); }
    // u'(r): radial derivative
    double du(double r) const {
        double rc = std::max(r, r_min);
        return -gamma * std::exp(-rc) * (1.0 / rc + 1.0 / (rc * rc));
    }
    double d2u(double r) const {
        double rc = std::max(r, r_min);
        return gamma * std::exp(-rc) * (1.0 / rc + 2.0 / (rc * rc) + 2.0 / (rc * rc * rc));
    }
};

}  // namespace

double PotentialModel::value1(double x) const { return value(std::span<const double>(&x, 1)); }
double PotentialModel::grad1(double x) const {
    double g;
    gradient(std::span<const double>(&x, 1), std::span<double>(&g, 1));
    return g;
}
double PotentialModel::hess1(double x) const {
    Mat h(1, 1);
    hessian(std::span<const double>(&x, 1), h);
    return h(0, 0);
}

double min_spec(const Mat& h) {
    int n = h.rows();
    if (n != h.cols() || n == 0) throw UsageError("min_spec: matrix must be square and nonempty");
    double scale = frobenius_norm(h);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (std::abs(h(i, j) - h(j, i)) > 1e-9 * std::max(scale, 1e-300))
                throw UsageError("min_spec: matrix not symmetric within tolerance");
    if (n == 1) return h(0, 0);
    if (n == 2) return min_eig_2x2(h(0, 0), 0.5 * (h(0, 1) + h(1, 0)), h(1, 1));
    if (n == 3) return min_eig_3x3(h);
    return min_eig_iterative(h);
}

EvalBundle eval_bundle(const PotentialModel& model, std::span<const double> x) {
    check_dim(model, x);
    for (double xi : x)
        if (!std::isfinite(xi)) throw UsageError("eval_bundle: non-finite input point");
    EvalBundle out;
    out.energy = model.value(x);
    out.gradient.resize(model.dim);
    model.gradient(x, out.gradient);
    out.hessian.resize(model.dim, model.dim);
    model.hessian(x, out.hessian);
    out.min_spec = min_spec(out.hessian);
    bool finite = std::isfinite(out.energy) && std::isfinite(out.min_spec);
    for (double g : out.gradient) finite = finite && std::isfinite(g);
    for (double hv : out.hessian.data()) finite = finite && std::isfinite(hv);
    if (!finite) {
        std::ostringstream os;
        os << "eval_bundle: non-finite output at x = (";
        for (size_t i = 0; i < x.size(); ++i) os << (i ? "," : "") << x[i];
        os << ")";
        throw NumericError(os.str());
    }
    return out;
}

double default_domain_halfwidth(const std::function<double(double)>& v1d) {
    auto min_on = [&](double L) {
        double m = std::numeric_limits<double>::infinity();
        const int n = 4096;
        for (int i = 0; i <= n; ++i) m = std::min(m, v1d(-L + 2.0 * L * i / n));
        return m;
    };
    double L = 1.0;
    double vmin = min_on(L);
    auto ok = [&](double Lq) { return v1d(Lq) - vmin >= 40.0 && v1d(-Lq) - vmin >= 40.0; };
    int guard = 0;
    while (!ok(L)) {
        L *= 2.0;
        vmin = std::min(vmin, min_on(L));
        if (++guard > 60) throw NumericError("domain halfwidth search did not terminate");
    }
    double lo = L / 2.0, hi = L;
    for (int i = 0; i < 40; ++i) {
        double mid = 0.5 * (lo + hi);
        (ok(mid) ? hi : lo) = mid;
    }
    return hi;
}

namespace {

Model build_ou(const std::map<std::string, double>&) {
    Model m;
    m.name = "ou";
    m.pot.dim = 1;
    m.pot.value = [](std::span<const double> x) { return 0.5 * x[0] * x[0]; };
    m.pot.gradient = [](std::span<const double> x, std::span<double> g) { g[0] = x[0]; };
    m.pot.hessian = [](std::span<const double>, Mat& h) { h(0, 0) = 1.0; };
    m.pot.domain_halfwidth = default_domain_halfwidth([](double x) { return 0.5 * x * x; });
    // F_lambda = -grad V + lambda
    m.pert.bound_C = 1.0;
    m.pert.force = [](std::span<const double> x, double lam, std::span<double> f) { f[0] = -x[0] + lam; };
    m.pert.dforce = [](std::span<const double>, std::span<double> df) { df[0] = 1.0; };
    m.pert.div_dforce = [](std::span<const double>) { return 0.0; };
    m.default_start = {0.0};
    m.default_dt = 1e-3;
    m.default_burn_in = 10.0;
    return m;
}

Model build_double_well(const std::map<std::string, double>& p) {
    double c = p.at("c");
    Model m;
    m.name = "double_well";
    m.params = {{"c", c}};
    m.pot.dim = 1;
    m.pot.value = [c](std::span<const double> x) {
        double t = x[0] * x[0];
        return t * t - 0.5 * c * t;
    };
    m.pot.gradient = [c](std::span<const double> x, std::span<double> g) {
        g[0] = 4.0 * x[0] * x[0] * x[0] - c * x[0];
    };
    m.pot.hessian = [c](std::span<const double> x, Mat& h) { h(0, 0) = 12.0 * x[0] * x[0] - c; };
    m.pot.domain_halfwidth =
        default_domain_halfwidth([c](double x) { return x * x * x * x - 0.5 * c * x * x; });
    // tilt V + lambda x, so F_lambda = -V' - lambda
    m.pert.bound_C = 1.0;
    m.pert.force = [c](std::span<const double> x, double lam, std::span<double> f) {
        f[0] = -(4.0 * x[0] * x[0] * x[0] - c * x[0]) - lam;
    };
    m.pert.dforce = [](std::span<const double>, std::span<double> df) { df[0] = -1.0; };
    m.pert.div_dforce = [](std::span<const double>) { return 0.0; };
    m.default_start = {c > 0 ? 0.5 * std::sqrt(c) : 0.0};  // bottom of the right well
    m.default_dt = 1e-3;
    m.default_burn_in = 40.0;
    return m;
}

Model build_quartic_tensor(const std::map<std::string, double>& p) {
    int d = static_cast<int>(p.at("dim"));
    if (d < 1) throw UsageError("quartic_tensor: dim must be >= 1");
    Model m;
    m.name = "quartic_tensor";
    m.params = {{"dim", static_cast<double>(d)}};
    m.pot.dim = d;
    m.pot.value = [](std::span<const double> x) {
        double s = 0.0;
        for (double xi : x) s += xi * xi * xi * xi;
        return s;
    };
    m.pot.gradient = [](std::span<const double> x, std::span<double> g) {
        for (size_t i = 0; i < x.size(); ++i) g[i] = 4.0 * x[i] * x[i] * x[i];
    };
    m.pot.hessian = [d](std::span<const double> x, Mat& h) {
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) h(i, j) = (i == j) ? 12.0 * x[i] * x[i] : 0.0;
    };
    m.pot.domain_halfwidth = default_domain_halfwidth([](double x) { return x * x * x * x; });
    // tilt V + lambda x_1
    m.pert.bound_C = 1.0;
    m.pert.force = [](std::span<const double> x, double lam, std::span<double> f) {
        for (size_t i = 0; i < x.size(); ++i) f[i] = -4.0 * x[i] * x[i] * x[i];
        f[0] -= lam;
    };
    m.pert.dforce = [](std::span<const double> x, std::span<double> df) {
        for (size_t i = 0; i < x.size(); ++i) df[i] = 0.0;
        df[0] = -1.0;
    };
    m.pert.div_dforce = [](std::span<const double>) { return 0.0; };
    m.default_start.assign(d, 0.0);
    m.default_dt = 1e-3;
    m.default_burn_in = 10.0;
    return m;
}

Model build_mexican_hat(const std::map<std::string, double>& p) {
    double beta = p.at("beta"), gamma = p.at("gamma");
    int d = static_cast<int>(p.at("dim"));
    if (beta <= 0 || gamma <= 0) throw UsageError("mexican_hat: beta and gamma must be > 0");
    if (d < 2) throw UsageError("mexican_hat: dim must be >= 2");
    Model m;
    m.name = "mexican_hat";
    m.params = {{"beta", beta}, {"gamma", gamma}, {"dim", static_cast<double>(d)}};
    m.pot.dim = d;
    m.pot.value = [beta, gamma](std::span<const double> x) {
        double r2 = dot(x, x);
        return beta * (r2 * r2 - gamma * r2);
    };
    m.pot.gradient = [beta, gamma](std::span<const double> x, std::span<double> g) {
        double r2 = dot(x, x);
        double s = 2.0 * beta * (2.0 * r2 - gamma);
        for (size_t i = 0; i < x.size(); ++i) g[i] = s * x[i];
    };
    m.pot.hessian = [beta, gamma, d](std::span<const double> x, Mat& h) {
        double r2 = dot(x, x);
        double s = 2.0 * beta * (2.0 * r2 - gamma);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) h(i, j) = 8.0 * beta * x[i] * x[j] + (i == j ? s : 0.0);
    };
    m.pot.domain_halfwidth = default_domain_halfwidth(
        [beta, gamma](double r) { return beta * (r * r * r * r - gamma * r * r); });
    m.pert.bound_C = 1.0;
    m.pert.force = [beta, gamma](std::span<const double> x, double lam, std::span<double> f) {
        double r2 = dot(x, x);
        double s = 2.0 * beta * (2.0 * r2 - gamma);
        for (size_t i = 0; i < x.size(); ++i) f[i] = -s * x[i];
        f[0] -= lam;
    };
    m.pert.dforce = [](std::span<const double> x, std::span<double> df) {
        for (size_t i = 0; i < x.size(); ++i) df[i] = 0.0;
        df[0] = -1.0;
    };
    m.pert.div_dforce = [](std::span<const double>) { return 0.0; };
    m.default_start.assign(d, 0.0);
    m.default_start[0] = std::sqrt(0.5 * gamma);  // bottom of the circular well
    m.default_dt = 1e-3;
    m.default_burn_in = 10.0;
    return m;
}

Model build_colloid(const std::map<std::string, double>& p) {
    int n = static_cast<int>(p.at("n"));
    double kappa = p.at("kappa"), gamma = p.at("gamma");
    if (n < 2) throw UsageError("colloid: n must be >= 2");
    if (kappa <= 0 || gamma <= 0) throw UsageError("colloid: kappa and gamma must be > 0");
    const int d = 2 * n;
    PairForce pf{gamma};

    Model m;
    m.name = "colloid";
    m.params = {{"n", static_cast<double>(n)}, {"kappa", kappa}, {"gamma", gamma}};
    m.pot.dim = d;
    m.pot.value = [n, kappa, pf](std::span<const double> x) {
        double e = 0.0;
        for (int i = 0; i < 2 * n; ++i) e += 0.5 * kappa * x[i] * x[i];
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                double dx = x[2 * i] - x[2 * j], dy = x[2 * i + 1] - x[2 * j + 1];
                e += pf.u(std::hypot(dx, dy));
            }
        return e;
    };
    m.pot.gradient = [n, kappa, pf](std::span<const double> x, std::span<double> g) {
        for (int i = 0; i < 2 * n; ++i) g[i] = kappa * x[i];
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                double dx = x[2 * i] - x[2 * j], dy = x[2 * i + 1] - x[2 * j + 1];
                double r = std::max(std::hypot(dx, dy), PairForce::r_min);
                double s = pf.du(r) / r;  // grad U = u'(r) * dr/dx
                g[2 * i] += s * dx;
                g[2 * i + 1] += s * dy;
                g[2 * j] -= s * dx;
                g[2 * j + 1] -= s * dy;
            }
    };
    m.pot.hessian = [n, kappa, pf, d](std::span<const double> x, Mat& h) {
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) h(i, j) = (i == j) ? kappa : 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                double dx = x[2 * i] - x[2 * j], dy = x[2 * i + 1] - x[2 * j + 1];
                double r = std::max(std::hypot(dx, dy), PairForce::r_min);
                double ex = dx / r, ey = dy / r;
                double a = pf.d2u(r), b = pf.du(r) / r;
                // 2x2 block: u'' e e^T + (u'/r)(I - e e^T)
                double hxx = a * ex * ex + b * (1.0 - ex * ex);
                double hxy = (a - b) * ex * ey;
                double hyy = a * ey * ey + b * (1.0 - ey * ey);
                int I = 2 * i, J = 2 * j;
                h(I, I) += hxx;
                h(I, I + 1) += hxy;
                h(I + 1, I) += hxy;
                h(I + 1, I + 1) += hyy;
                h(J, J) += hxx;
                h(J, J + 1) += hxy;
                h(J + 1, J) += hxy;
                h(J + 1, J + 1) += hyy;
                h(I, J) -= hxx;
                h(I, J + 1) -= hxy;
                h(I + 1, J) -= hxy;
                h(I + 1, J + 1) -= hyy;
                h(J, I) -= hxx;
                h(J, I + 1) -= hxy;
                h(J + 1, I) -= hxy;
                h(J + 1, I + 1) -= hyy;
            }
    };
    m.pot.domain_halfwidth = std::sqrt(80.0 / kappa);
    // shear flow along x with rate lambda: particle i feels lambda * y_i e1.
    // (A uniform forcing would merely translate the invariant measure and
    // couple to nothing the covariance can see.)
    m.pert.bound_C = std::sqrt(static_cast<double>(n)) * m.pot.domain_halfwidth;
    auto grad = m.pot.gradient;
    m.pert.force = [grad, n](std::span<const double> x, double lam, std::span<double> f) {
        grad(x, f);
        for (int i = 0; i < 2 * n; ++i) f[i] = -f[i];
        for (int i = 0; i < n; ++i) f[2 * i] += lam * x[2 * i + 1];
    };
    m.pert.dforce = [n](std::span<const double> x, std::span<double> df) {
        for (int i = 0; i < n; ++i) {
            df[2 * i] = x[2 * i + 1];
            df[2 * i + 1] = 0.0;
        }
    };
    m.pert.div_dforce = [](std::span<const double>) { return 0.0; };
    // particles on a unit circle; distinct positions keep the pair term finite
    m.default_start.assign(d, 0.0);
    for (int i = 0; i < n; ++i) {
        double th = 2.0 * std::numbers::pi * i / n;
        m.default_start[2 * i] = std::cos(th);
        m.default_start[2 * i + 1] = std::sin(th);
    }
    m.default_dt = 1e-5;
    m.default_burn_in = 2.0;
    return m;
}

}  // namespace

const std::vector<ModelCatalogEntry>& model_catalog() {
    static const std::vector<ModelCatalogEntry> catalog = {
        {"ou", {}, build_ou},
        {"double_well", {{"c", 2.0}}, build_double_well},
        {"quartic_tensor", {{"dim", 1.0}}, build_quartic_tensor},
        {"mexican_hat", {{"beta", 1.0}, {"gamma", 1.0}, {"dim", 2.0}}, build_mexican_hat},
        {"colloid", {{"n", 10.0}, {"kappa", 10.0}, {"gamma", 25.0}}, build_colloid},
    };
    return catalog;
}

Model build_model(const std::string& name, const std::map<std::string, double>& params) {
    for (const auto& entry : model_catalog()) {
        if (entry.name != name) continue;
        std::map<std::string, double> resolved;
        for (const auto& [k, v] : entry.defaults) resolved[k] = v;
        for (const auto& [k, v] : params) {
            if (!resolved.count(k)) {
                std::ostringstream os;
                os << "unknown parameter '" << k << "' for model '" << name << "'; accepts:";
                for (const auto& [dk, dv] : entry.defaults) os << " " << dk;
                throw UsageError(os.str());
            }
            resolved[k] = v;
        }
        return entry.builder(resolved);
    }
    std::ostringstream os;
    os << "unknown model '" << name << "'; catalog:";
    for (const auto& entry : model_catalog()) os << " " << entry.name;
    throw UsageError(os.str());
}

}  // namespace langsens
