#include "langsens/dynamics.hpp"

#include <cmath>

#include "langsens/errors.hpp"

namespace langsens {

namespace {

// reserved stream ids / steps, outside anything a simulation reaches
constexpr std::uint64_t kBurnInStreamId = ~std::uint64_t{0};
constexpr std::uint64_t kInitStepBase = 0xFFFF'FFFF'0000'0000ull;

bool vec_finite(const Vec& v) {
    for (double c : v)
        if (!std::isfinite(c) || std::abs(c) > kDivergenceThreshold) return false;
    return true;
}

}  // namespace

bool state_finite(const ParticleState& s) { return vec_finite(s.x) && vec_finite(s.tangent); }

void step_euler_inplace(ParticleState& s, const PotentialModel& pot, const PerturbationModel& pert,
                        double dt, std::span<const double> dw, StepWorkspace& ws) {
    const int d = pot.dim;
    pot.gradient(s.x, ws.grad);
    pot.hessian(s.x, ws.hess);
    pert.dforce(s.x, ws.df);
    matvec(ws.hess, s.tangent, ws.hT);
    const double sq2 = std::sqrt(2.0);
    for (int i = 0; i < d; ++i) {
        s.x[i] += -ws.grad[i] * dt + sq2 * dw[i];
        s.tangent[i] += (ws.df[i] - ws.hT[i]) * dt;
    }
    s.time += dt;
}

ParticleState step_euler(const ParticleState& s, const PotentialModel& pot,
                         const PerturbationModel& pert, double dt, std::span<const double> dw) {
    ParticleState out = s;
    StepWorkspace ws;
    ws.resize(pot.dim);
    step_euler_inplace(out, pot, pert, dt, dw, ws);
    return out;
}

void step_drift_inplace(Vec& x, const PerturbationModel& pert, double lambda, double dt,
                        std::span<const double> dw, Vec& scratch) {
    pert.force(x, lambda, scratch);
    const double sq2 = std::sqrt(2.0);
    for (size_t i = 0; i < x.size(); ++i) x[i] += scratch[i] * dt + sq2 * dw[i];
}

Vec window_start(const SimConfig& cfg, const Model& model) {
    const int d = model.pot.dim;
    switch (cfg.init.kind) {
        case InitialCondition::Kind::Point: {
            if (cfg.init.point.empty()) return model.default_start;
            if (static_cast<int>(cfg.init.point.size()) != d)
                throw UsageError("initial point has wrong dimension");
            return cfg.init.point;
        }
        case InitialCondition::Kind::Gaussian: {
            Vec x(d);
            NoiseStream ic(cfg.master_seed, kBurnInStreamId - 1);
            ic.fill_gaussian_at(kInitStepBase, x);
            for (double& c : x) c = cfg.init.mean + cfg.init.sd * c;
            return x;
        }
        case InitialCondition::Kind::Equilibrium: {
            // single shared burn-in trajectory; replicas fork from its endpoint
            Vec x = model.default_start;
            Vec dw(d), scratch(d);
            NoiseStream ns(cfg.master_seed, kBurnInStreamId);
            const long nb = cfg.burn_steps();
            const double sdt = std::sqrt(cfg.dt);
            for (long k = 0; k < nb; ++k) {
                ns.fill_gaussian_at(static_cast<std::uint64_t>(k), dw);
                for (double& c : dw) c *= sdt;
                step_drift_inplace(x, model.pert, 0.0, cfg.dt, dw, scratch);
            }
            if (!vec_finite(x)) throw DivergenceError("equilibrium burn-in trajectory diverged");
            return x;
        }
    }
    throw UsageError("unknown initial condition kind");
}

Recorded simulate_replica(const SimConfig& cfg, const Model& model, NoiseStream& noise,
                          std::span<const Observer> observers) {
    if (cfg.dt <= 0) throw UsageError("dt must be > 0");
    if (cfg.t_final < 0) throw UsageError("t_final must be >= 0");
    if (cfg.record_stride < 1) throw UsageError("record_stride must be >= 1");

    const int d = model.pot.dim;
    ParticleState s;
    s.x = window_start(cfg, model);
    s.tangent.assign(d, 0.0);
    s.time = 0.0;

    Recorded rec;
    rec.values.resize(observers.size());

    StepWorkspace ws;
    ws.resize(d);
    Vec dw(d);
    const double sdt = std::sqrt(cfg.dt);
    const long nb = cfg.burn_steps(), n = cfg.n_steps();

    // burn-in: the extended pair (x, tangent) evolves, nothing is recorded
    for (long k = 0; k < nb; ++k) {
        noise.fill_gaussian_at(static_cast<std::uint64_t>(k), dw);
        for (double& c : dw) c *= sdt;
        step_euler_inplace(s, model.pot, model.pert, cfg.dt, dw, ws);
        if (!state_finite(s)) {
            rec.diverged = true;
            rec.diverged_at = s.time - cfg.burn_in;
            return rec;
        }
    }
    s.time = 0.0;  // window clock

    auto record = [&](long) {
        rec.times.push_back(s.time);
        for (size_t o = 0; o < observers.size(); ++o) rec.values[o].push_back(observers[o](s));
    };
    record(0);
    for (long k = 0; k < n; ++k) {
        noise.fill_gaussian_at(static_cast<std::uint64_t>(nb + k), dw);
        for (double& c : dw) c *= sdt;
        step_euler_inplace(s, model.pot, model.pert, cfg.dt, dw, ws);
        if (!state_finite(s)) {
            rec.diverged = true;
            rec.diverged_at = s.time;
            return rec;
        }
        if ((k + 1) % cfg.record_stride == 0 || k + 1 == n) record(k + 1);
    }
    return rec;
}

ResolventAccumulator make_resolvent(int dim, double s_anchor) {
    ResolventAccumulator acc;
    acc.matrix = Mat::identity(dim);
    acc.s_anchor = s_anchor;
    return acc;
}

void propagate_resolvent_inplace(ResolventAccumulator& acc, const Mat& hessian_at_x, double dt) {
    const int d = acc.matrix.rows();
    Mat next(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            double hr = 0.0;
            for (int k = 0; k < d; ++k) hr += hessian_at_x(i, k) * acc.matrix(k, j);
            next(i, j) = acc.matrix(i, j) - hr * dt;
        }
    acc.matrix = std::move(next);
}

ResolventAccumulator propagate_resolvent(const ResolventAccumulator& acc, const Mat& hessian_at_x,
                                         double dt) {
    ResolventAccumulator out = acc;
    propagate_resolvent_inplace(out, hessian_at_x, dt);
    return out;
}

Vec tangent_via_resolvent(const TrajectoryDump& traj, const Model& model) {
    if (traj.stride != 1)
        throw UsageError("tangent_via_resolvent: needs a stride-1 trajectory dump");
    const int d = model.pot.dim;
    const long n = static_cast<long>(traj.positions.size()) - 1;
    Vec total(d, 0.0), df(d), rdf(d);
    Mat hess(d, d);
    for (long s = 0; s < n; ++s) {
        ResolventAccumulator acc = make_resolvent(d, s * traj.dt);
        for (long u = s; u < n; ++u) {
            model.pot.hessian(traj.positions[u], hess);
            propagate_resolvent_inplace(acc, hess, traj.dt);
        }
        model.pert.dforce(traj.positions[s], df);
        matvec(acc.matrix, df, rdf);
        for (int i = 0; i < d; ++i) total[i] += rdf[i] * traj.dt;
    }
    return total;
}

VecSeries simulate_perturbed_pair(const SimConfig& cfg, const Model& model, double eps,
                                  NoiseStream& noise) {
    if (!(eps > 0.0 && eps <= 0.1)) throw UsageError("simulate_perturbed_pair: eps must be in (0, 0.1]");
    const int d = model.pot.dim;
    Vec x0 = window_start(cfg, model), xe = x0;
    Vec dw(d), scratch(d);
    VecSeries out;
    const double sdt = std::sqrt(cfg.dt);
    const long nb = cfg.burn_steps(), n = cfg.n_steps();

    auto push = [&](double t) {
        Vec diff(d);
        for (int i = 0; i < d; ++i) diff[i] = (xe[i] - x0[i]) / eps;
        out.times.push_back(t);
        out.values.push_back(std::move(diff));
    };
    for (long k = 0; k < nb + n; ++k) {
        if (k == nb) push(0.0);
        noise.fill_gaussian_at(static_cast<std::uint64_t>(k), dw);
        for (double& c : dw) c *= sdt;
        step_drift_inplace(x0, model.pert, 0.0, cfg.dt, dw, scratch);
        step_drift_inplace(xe, model.pert, eps, cfg.dt, dw, scratch);
        if (!vec_finite(x0) || !vec_finite(xe)) {
            out.diverged = true;
            return out;
        }
        long kw = k - nb + 1;  // window step index
        if (kw >= 1 && (kw % cfg.record_stride == 0 || kw == n)) push(kw * cfg.dt);
    }
    if (n == 0 && out.times.empty()) push(0.0);
    return out;
}

ScalarSeries simulate_coupled_pair(std::span<const double> x, std::span<const double> y,
                                   const SimConfig& cfg, const Model& model, NoiseStream& noise) {
    const int d = model.pot.dim;
    if (static_cast<int>(x.size()) != d || static_cast<int>(y.size()) != d)
        throw UsageError("simulate_coupled_pair: start points have wrong dimension");
    Vec a(x.begin(), x.end()), b(y.begin(), y.end());
    Vec dw(d), scratch(d), diff(d);
    ScalarSeries out;
    const double sdt = std::sqrt(cfg.dt);
    const long n = cfg.n_steps();

    auto sep = [&] {
        for (int i = 0; i < d; ++i) diff[i] = a[i] - b[i];
        return norm2(diff);
    };
    out.times.push_back(0.0);
    out.values.push_back(sep());
    for (long k = 0; k < n; ++k) {
        noise.fill_gaussian_at(static_cast<std::uint64_t>(k), dw);
        for (double& c : dw) c *= sdt;
        step_drift_inplace(a, model.pert, 0.0, cfg.dt, dw, scratch);
        step_drift_inplace(b, model.pert, 0.0, cfg.dt, dw, scratch);
        if (!vec_finite(a) || !vec_finite(b)) {
            out.diverged = true;
            return out;
        }
        if ((k + 1) % cfg.record_stride == 0 || k + 1 == n) {
            out.times.push_back((k + 1) * cfg.dt);
            out.values.push_back(sep());
        }
    }
    return out;
}

}  // namespace langsens
