#include "langsens/estimators.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <sstream>
#include <thread>

#include "langsens/errors.hpp"
#include "langsens/parallel.hpp"

namespace langsens {

namespace {

std::vector<double> record_times(const SimConfig& cfg) {
    std::vector<double> ts{0.0};
    const long n = cfg.n_steps();
    for (long k = 1; k <= n; ++k)
        if (k % cfg.record_stride == 0 || k == n) ts.push_back(k * cfg.dt);
    return ts;
}


void check_all_diverged(long n_ok, long n_total) {
    if (n_ok == 0) {
        std::ostringstream os;
        os << "all " << n_total << " replicas diverged";
        throw DivergenceError(os.str());
    }
}

struct WindowWalker {
    // per-call stepping constants: burn-in and window step counts
    double sdt;
    long nb, n;
    explicit WindowWalker(const SimConfig& cfg)
        : sdt(std::sqrt(cfg.dt)), nb(cfg.burn_steps()), n(cfg.n_steps()) {}
};

}  // namespace

Observable observable_for(const Model& model, const std::string& name) {
    Observable obs;
    obs.name = name;
    if (name == "x1") {
        obs.f = [](std::span<const double> x) { return x[0]; };
        obs.grad_f = [](std::span<const double> x, std::span<double> g) {
            for (size_t i = 0; i < x.size(); ++i) g[i] = 0.0;
            g[0] = 1.0;
        };
        return obs;
    }
    if (name == "indicator") {
        // smooth approximation of the indicator of the positive half line
        obs.f = [](std::span<const double> x) {
            return 0.5 + std::atan(10.0 * x[0]) / std::numbers::pi;
        };
        obs.grad_f = [](std::span<const double> x, std::span<double> g) {
            for (size_t i = 0; i < x.size(); ++i) g[i] = 0.0;
            g[0] = (10.0 / std::numbers::pi) / (1.0 + 100.0 * x[0] * x[0]);
        };
        return obs;
    }
    if (name == "covariance") {
        const int d = model.pot.dim;
        if (d < 4 || d % 2 != 0)
            throw UsageError("observable 'covariance' needs a 2-D particle system model");
        const int n = d / 2;
        obs.f = [n](std::span<const double> x) {
            double mx = 0.0, my = 0.0;
            for (int i = 0; i < n; ++i) {
                mx += x[2 * i];
                my += x[2 * i + 1];
            }
            mx /= n;
            my /= n;
            double s = 0.0;
            for (int i = 0; i < n; ++i) s += (x[2 * i] - mx) * (x[2 * i + 1] - my);
            return s / n;
        };
        obs.grad_f = [n](std::span<const double> x, std::span<double> g) {
            double mx = 0.0, my = 0.0;
            for (int i = 0; i < n; ++i) {
                mx += x[2 * i];
                my += x[2 * i + 1];
            }
            mx /= n;
            my /= n;
            for (int i = 0; i < n; ++i) {
                g[2 * i] = (x[2 * i + 1] - my) / n;
                g[2 * i + 1] = (x[2 * i] - mx) / n;
            }
        };
        return obs;
    }
    if (name == "const1") {
        obs.f = [](std::span<const double>) { return 1.0; };
        obs.grad_f = [](std::span<const double>, std::span<double> g) {
            for (size_t i = 0; i < g.size(); ++i) g[i] = 0.0;
        };
        return obs;
    }
    throw UsageError("unknown observable '" + name + "'; built-ins: x1 indicator covariance const1");
}

EstimatorResult ergodic_sensitivity(const SimConfig& cfg, const Model& model, const Observable& obs,
                                    const RunOptions& opts) {
    if (!obs.grad_f) throw UsageError("ergodic_sensitivity: observable must provide grad_f");
    if (cfg.t_final <= 0) throw UsageError("ergodic_sensitivity: t_final must be > 0");
    const int d = model.pot.dim;
    const Vec x0 = window_start(cfg, model);
    const WindowWalker w(cfg);

    auto fill = [&](long replica, std::span<double> out) {
        NoiseStream ns(cfg.master_seed, static_cast<std::uint64_t>(replica));
        ParticleState s{x0, Vec(d, 0.0), 0.0};
        StepWorkspace ws;
        ws.resize(d);
        Vec dw(d), gf(d);
        for (long k = 0; k < w.nb; ++k) {
            ns.fill_gaussian_at(static_cast<std::uint64_t>(k), dw);
            for (double& c : dw) c *= w.sdt;
            step_euler_inplace(s, model.pot, model.pert, cfg.dt, dw, ws);
            if (!state_finite(s)) return false;
        }
        auto integrand = [&] {
            obs.grad_f(s.x, gf);
            return dot(gf, s.tangent);
        };
        KahanSum integral;
        double prev_y = integrand(), prev_t = 0.0;
        for (long k = 0; k < w.n; ++k) {
            ns.fill_gaussian_at(static_cast<std::uint64_t>(w.nb + k), dw);
            for (double& c : dw) c *= w.sdt;
            step_euler_inplace(s, model.pot, model.pert, cfg.dt, dw, ws);
            if (!state_finite(s)) return false;
            if ((k + 1) % cfg.record_stride == 0 || k + 1 == w.n) {
                double t = (k + 1) * cfg.dt;
                double y = integrand();
                integral.add(0.5 * (t - prev_t) * (prev_y + y));
                prev_t = t;
                prev_y = y;
            }
        }
        out[0] = integral.value() / cfg.t_final;
        return true;
    };

    auto red = ReplicaReduction::run(cfg.n_replicas, 1, opts.workers, fill);
    check_all_diverged(red.n_ok, cfg.n_replicas);
    auto m = moments_from_sums(red.sum[0], red.sumsq[0], red.n_ok);
    EstimatorResult res;
    res.value = m.mean;
    res.std_error = m.se;
    res.n_effective = red.n_ok;
    res.n_diverged = cfg.n_replicas - red.n_ok;
    res.finalize_ci();
    return res;
}

EstimatorResult ensemble_sensitivity(const SimConfig& cfg, const Model& model, const Observable& obs,
                                     const RunOptions& opts) {
    if (!obs.grad_f) throw UsageError("ensemble_sensitivity: observable must provide grad_f");
    const int d = model.pot.dim;
    const Vec x0 = window_start(cfg, model);
    const std::vector<double> times = record_times(cfg);
    const long m = static_cast<long>(times.size());
    const WindowWalker w(cfg);

    auto fill = [&](long replica, std::span<double> out) {
        NoiseStream ns(cfg.master_seed, static_cast<std::uint64_t>(replica));
        // tangent starts at zero at the window start: the series is the
        // transient E[grad f . T_t] itself
        ParticleState s{x0, Vec(d, 0.0), 0.0};
        StepWorkspace ws;
        ws.resize(d);
        Vec dw(d), gf(d);
        auto y = [&] {
            obs.grad_f(s.x, gf);
            return dot(gf, s.tangent);
        };
        long rec = 0;
        out[rec++] = y();
        for (long k = 0; k < w.n; ++k) {
            ns.fill_gaussian_at(static_cast<std::uint64_t>(k), dw);
            for (double& c : dw) c *= w.sdt;
            step_euler_inplace(s, model.pot, model.pert, cfg.dt, dw, ws);
            if (!state_finite(s)) return false;
            if ((k + 1) % cfg.record_stride == 0 || k + 1 == w.n) out[rec++] = y();
        }
        return true;
    };

    auto red = ReplicaReduction::run(cfg.n_replicas, m, opts.workers, fill);
    check_all_diverged(red.n_ok, cfg.n_replicas);
    EstimatorResult res;
    res.series.resize(m);
    for (long k = 0; k < m; ++k) {
        auto mo = moments_from_sums(red.sum[k], red.sumsq[k], red.n_ok);
        res.series[k] = {times[k], mo.mean, mo.se};
    }
    res.value = res.series.back().value;
    res.std_error = res.series.back().std_error;
    res.n_effective = red.n_ok;
    res.n_diverged = cfg.n_replicas - red.n_ok;
    res.finalize_ci();
    return res;
}

EstimatorResult green_kubo_sensitivity(const SimConfig& cfg, const Model& model,
                                       const Observable& obs, double t_trunc,
                                       const RunOptions& opts, bool centered) {
    if (!model.pert.div_dforce)
        throw UsageError("green_kubo_sensitivity: perturbation provides no div_dforce");
    if (t_trunc <= 0) throw UsageError("green_kubo_sensitivity: t_trunc must be > 0");
    if (t_trunc > cfg.t_final + 1e-12)
        throw UsageError("green_kubo_sensitivity: t_trunc exceeds t_final");
    if (cfg.burn_in <= 0)
        throw UsageError("green_kubo_sensitivity: needs burn_in > 0 for the equilibrium start");

    const int d = model.pot.dim;
    SimConfig gk = cfg;
    gk.t_final = t_trunc;  // nothing beyond the truncation time is used
    const std::vector<double> times = record_times(gk);
    const long m = static_cast<long>(times.size());
    const WindowWalker w(gk);

    // conjugate observable g = grad V . dforce - div dforce
    auto conjugate = [&](std::span<const double> x, Vec& grad, Vec& df) {
        model.pot.gradient(x, grad);
        model.pert.dforce(x, df);
        return dot(grad, df) - model.pert.div_dforce(x);
    };

    // per-replica layout: m running integrals of f(X_0) g(X_s), then m
    // values of g(X_s), then f(X_0)
    auto fill = [&](long replica, std::span<double> out) {
        NoiseStream ns(gk.master_seed, static_cast<std::uint64_t>(replica));
        Vec x = model.default_start;  // independent equilibration per replica
        Vec dw(d), scratch(d), grad(d), df(d);
        for (long k = 0; k < w.nb; ++k) {
            ns.fill_gaussian_at(static_cast<std::uint64_t>(k), dw);
            for (double& c : dw) c *= w.sdt;
            step_drift_inplace(x, model.pert, 0.0, gk.dt, dw, scratch);
        }
        for (double c : x)
            if (!std::isfinite(c) || std::abs(c) > kDivergenceThreshold) return false;

        const double f0 = obs.f(x);
        double g = conjugate(x, grad, df);
        long rec = 0;
        KahanSum integral;
        double prev_y = f0 * g, prev_t = 0.0;
        out[rec] = 0.0;
        out[m + rec] = g;
        ++rec;
        for (long k = 0; k < w.n; ++k) {
            ns.fill_gaussian_at(static_cast<std::uint64_t>(w.nb + k), dw);
            for (double& c : dw) c *= w.sdt;
            step_drift_inplace(x, model.pert, 0.0, gk.dt, dw, scratch);
            for (double c : x)
                if (!std::isfinite(c) || std::abs(c) > kDivergenceThreshold) return false;
            if ((k + 1) % gk.record_stride == 0 || k + 1 == w.n) {
                double t = (k + 1) * gk.dt;
                g = conjugate(x, grad, df);
                integral.add(0.5 * (t - prev_t) * (prev_y + f0 * g));
                prev_t = t;
                prev_y = f0 * g;
                out[rec] = integral.value();
                out[m + rec] = g;
                ++rec;
            }
        }
        out[2 * m] = f0;
        return true;
    };

    auto red = ReplicaReduction::run(gk.n_replicas, 2 * m + 1, opts.workers, fill);
    check_all_diverged(red.n_ok, gk.n_replicas);

    const double f_mean = red.sum[2 * m] / red.n_ok;
    EstimatorResult res;
    res.series.resize(m);
    KahanSum center;  // running trapezoid of f_mean * g_mean
    double prev_gy = f_mean * red.sum[m] / red.n_ok, prev_t = times[0];
    for (long k = 0; k < m; ++k) {
        if (k > 0) {
            double gy = f_mean * red.sum[m + k] / red.n_ok;
            center.add(0.5 * (times[k] - prev_t) * (prev_gy + gy));
            prev_t = times[k];
            prev_gy = gy;
        }
        auto mo = moments_from_sums(red.sum[k], red.sumsq[k], red.n_ok);
        double corr = centered ? center.value() : 0.0;
        res.series[k] = {times[k], mo.mean - corr, mo.se};
    }
    res.value = res.series.back().value;
    res.std_error = res.series.back().std_error;
    res.n_effective = red.n_ok;
    res.n_diverged = gk.n_replicas - red.n_ok;
    res.finalize_ci();
    return res;
}

EstimatorResult nemd_finite_difference(const SimConfig& cfg, const Model& model,
                                       const Observable& obs, double eps, const RunOptions& opts) {
    if (!(eps > 0.0 && eps <= 0.1)) throw UsageError("nemd_finite_difference: eps must be in (0, 0.1]");
    if (cfg.t_final <= 0) throw UsageError("nemd_finite_difference: t_final must be > 0");
    const int d = model.pot.dim;
    const Vec x0 = window_start(cfg, model);
    const WindowWalker w(cfg);

    auto fill = [&](long replica, std::span<double> out) {
        NoiseStream ns(cfg.master_seed, static_cast<std::uint64_t>(replica));
        Vec xa = x0, xb = x0;  // lambda = 0 and lambda = eps, same noise
        Vec dw(d), scratch(d);
        auto finite = [](const Vec& v) {
            for (double c : v)
                if (!std::isfinite(c) || std::abs(c) > kDivergenceThreshold) return false;
            return true;
        };
        for (long k = 0; k < w.nb; ++k) {
            ns.fill_gaussian_at(static_cast<std::uint64_t>(k), dw);
            for (double& c : dw) c *= w.sdt;
            step_drift_inplace(xa, model.pert, 0.0, cfg.dt, dw, scratch);
            step_drift_inplace(xb, model.pert, eps, cfg.dt, dw, scratch);
            if (!finite(xa) || !finite(xb)) return false;
        }
        KahanSum ia, ib;
        double prev_a = obs.f(xa), prev_b = obs.f(xb), prev_t = 0.0;
        for (long k = 0; k < w.n; ++k) {
            ns.fill_gaussian_at(static_cast<std::uint64_t>(w.nb + k), dw);
            for (double& c : dw) c *= w.sdt;
            step_drift_inplace(xa, model.pert, 0.0, cfg.dt, dw, scratch);
            step_drift_inplace(xb, model.pert, eps, cfg.dt, dw, scratch);
            if (!finite(xa) || !finite(xb)) return false;
            if ((k + 1) % cfg.record_stride == 0 || k + 1 == w.n) {
                double t = (k + 1) * cfg.dt;
                double ya = obs.f(xa), yb = obs.f(xb);
                ia.add(0.5 * (t - prev_t) * (prev_a + ya));
                ib.add(0.5 * (t - prev_t) * (prev_b + yb));
                prev_t = t;
                prev_a = ya;
                prev_b = yb;
            }
        }
        out[0] = (ib.value() - ia.value()) / (cfg.t_final * eps);
        return true;
    };

    auto red = ReplicaReduction::run(cfg.n_replicas, 1, opts.workers, fill);
    check_all_diverged(red.n_ok, cfg.n_replicas);
    auto m = moments_from_sums(red.sum[0], red.sumsq[0], red.n_ok);
    EstimatorResult res;
    res.value = m.mean;
    res.std_error = m.se;
    res.n_effective = red.n_ok;
    res.n_diverged = cfg.n_replicas - red.n_ok;
    res.finalize_ci();
    return res;
}

std::vector<Vec> equilibrium_sampler(const SimConfig& cfg, const Model& model,
                                     const RunOptions& opts) {
    if (cfg.burn_in <= 0) throw UsageError("equilibrium_sampler: burn_in must be > 0");
    const int d = model.pot.dim;
    const long n = cfg.n_replicas;
    std::vector<Vec> draws(n);
    std::vector<char> ok(n, 0);
    const long nb = cfg.burn_steps();
    const double sdt = std::sqrt(cfg.dt);

    std::atomic<long> next{0};
    auto worker = [&] {
        Vec dw(d), scratch(d);
        for (;;) {
            long r = next.fetch_add(1);
            if (r >= n) return;
            NoiseStream ns(cfg.master_seed, static_cast<std::uint64_t>(r));
            Vec x = model.default_start;
            bool fine = true;
            for (long k = 0; k < nb && fine; ++k) {
                ns.fill_gaussian_at(static_cast<std::uint64_t>(k), dw);
                for (double& c : dw) c *= sdt;
                step_drift_inplace(x, model.pert, 0.0, cfg.dt, dw, scratch);
                for (double c : x)
                    if (!std::isfinite(c) || std::abs(c) > kDivergenceThreshold) fine = false;
            }
            if (fine) {
                draws[r] = std::move(x);
                ok[r] = 1;
            }
        }
    };
    int nw = std::max(1, opts.workers);
    if (nw == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < nw; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    std::vector<Vec> out;
    out.reserve(n);
    for (long r = 0; r < n; ++r)
        if (ok[r]) out.push_back(std::move(draws[r]));
    check_all_diverged(static_cast<long>(out.size()), n);
    return out;
}

}  // namespace langsens
