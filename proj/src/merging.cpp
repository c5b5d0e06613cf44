#include "langsens/merging.hpp"

#include <cmath>
#include <map>
#include <mutex>

#include "langsens/errors.hpp"
#include "langsens/parallel.hpp"

namespace langsens {

namespace {

std::vector<long long> bin_key(const Vec& x, double bin_width) {
    std::vector<long long> key(x.size());
    for (size_t i = 0; i < x.size(); ++i)
        key[i] = static_cast<long long>(std::floor(x[i] / bin_width));
    return key;
}

std::vector<double> ensemble_record_times(const SimConfig& cfg) {
    std::vector<double> ts{0.0};
    const long n = cfg.n_steps();
    for (long k = 1; k <= n; ++k)
        if (k % cfg.record_stride == 0 || k == n) ts.push_back(k * cfg.dt);
    return ts;
}

// One ensemble advanced in lockstep with periodic merging. Fills the
// per-record series of member values of grad f . T via `sink`.
struct LockstepEnsemble {
    std::vector<Vec> xs, ts;
    std::vector<NoiseStream> streams;
    StepWorkspace ws;
    Vec dw, gf;
    double max_abs_tangent = 0.0;

    LockstepEnsemble(const SimConfig& cfg, const Model& model, long count,
                     std::uint64_t replica_base) {
        const int d = model.pot.dim;
        const Vec x0 = window_start(cfg, model);
        xs.assign(count, x0);
        ts.assign(count, Vec(d, 0.0));
        streams.reserve(count);
        for (long r = 0; r < count; ++r)
            streams.emplace_back(cfg.master_seed, replica_base + static_cast<std::uint64_t>(r));
        ws.resize(d);
        dw.resize(d);
        gf.resize(d);
    }

    // returns false on divergence
    bool run(const SimConfig& cfg, const MergeConfig& merge, const Model& model,
             const Observable& obs, const std::function<void(std::span<const double>)>& sink) {
        const long count = static_cast<long>(xs.size());
        const long n_steps = cfg.n_steps();
        const double sdt = std::sqrt(cfg.dt);
        std::vector<double> y(count);
        auto record = [&] {
            for (long r = 0; r < count; ++r) {
                obs.grad_f(xs[r], gf);
                y[r] = dot(gf, ts[r]);
            }
            sink(y);
        };
        record();
        ParticleState st;
        for (long k = 0; k < n_steps; ++k) {
            for (long r = 0; r < count; ++r) {
                st.x = std::move(xs[r]);
                st.tangent = std::move(ts[r]);
                st.time = k * cfg.dt;
                streams[r].fill_gaussian_at(static_cast<std::uint64_t>(k), dw);
                for (double& c : dw) c *= sdt;
                step_euler_inplace(st, model.pot, model.pert, cfg.dt, dw, ws);
                if (!state_finite(st)) return false;
                xs[r] = std::move(st.x);
                ts[r] = std::move(st.tangent);
            }
            if ((k + 1) % merge.merge_period_steps == 0) {
                merge_tangents(xs, ts, merge.bin_width);
                for (long r = 0; r < count; ++r)
                    for (double c : ts[r]) max_abs_tangent = std::max(max_abs_tangent, std::abs(c));
            }
            if ((k + 1) % cfg.record_stride == 0 || k + 1 == n_steps) record();
        }
        return true;
    }
};

}  // namespace

void merge_tangents(std::span<const Vec> positions, std::span<Vec> tangents, double bin_width) {
    if (positions.size() != tangents.size())
        throw UsageError("merge_tangents: positions and tangents differ in length");
    if (positions.empty()) return;
    if (!(bin_width > 0.0)) return;  // degenerate mesh: every particle alone

    struct Bin {
        std::vector<KahanSum> sum;
        long count = 0;
    };
    std::map<std::vector<long long>, Bin> bins;
    const size_t d = positions[0].size();
    for (size_t i = 0; i < positions.size(); ++i) {
        Bin& b = bins[bin_key(positions[i], bin_width)];
        if (b.sum.empty()) b.sum.resize(d);
        for (size_t k = 0; k < d; ++k) b.sum[k].add(tangents[i][k]);
        ++b.count;
    }
    for (size_t i = 0; i < positions.size(); ++i) {
        const Bin& b = bins.at(bin_key(positions[i], bin_width));
        if (b.count < 2) continue;
        for (size_t k = 0; k < d; ++k) tangents[i][k] = b.sum[k].value() / b.count;
    }
}

EstimatorResult merged_ensemble_sensitivity(const SimConfig& cfg, const MergeConfig& merge,
                                            const Model& model, const Observable& obs) {
    if (!merge.enabled) throw UsageError("merged_ensemble_sensitivity: merging is disabled");
    if (merge.merge_period_steps < 1)
        throw UsageError("merged_ensemble_sensitivity: merge_period_steps must be >= 1");
    if (cfg.n_replicas < 2)
        throw UsageError("merged_ensemble_sensitivity: needs an ensemble (n_replicas >= 2)");

    const std::vector<double> times = ensemble_record_times(cfg);
    EstimatorResult res;
    res.series.reserve(times.size());
    size_t rec = 0;
    auto sink = [&](std::span<const double> y) {
        auto mo = blocked_moments(y);
        res.series.push_back({times[rec++], mo.mean, mo.se});
    };
    LockstepEnsemble ens(cfg, model, cfg.n_replicas, 0);
    if (!ens.run(cfg, merge, model, obs, sink))
        throw DivergenceError("merged ensemble member diverged");
    res.value = res.series.back().value;
    res.std_error = res.series.back().std_error;
    res.n_effective = cfg.n_replicas;
    res.finalize_ci();
    return res;
}

MergeComparison merge_compare(const SimConfig& cfg, const MergeConfig& merge, const Model& model,
                              const Observable& obs, long n_batches, long batch_size,
                              const RunOptions& opts) {
    if (n_batches < 2 || batch_size < 2)
        throw UsageError("merge_compare: needs n_batches >= 2 and batch_size >= 2");

    MergeComparison out;
    out.n_batches = n_batches;
    out.batch_size = batch_size;
    out.n_plain = n_batches * batch_size;
    out.times = ensemble_record_times(cfg);
    const long m = static_cast<long>(out.times.size());

    // merged side: one row per batch = that batch's mean series. Batches use
    // disjoint replica-id ranges so their noise streams never collide.
    std::mutex mx;
    double max_t = 0.0;
    auto fill_batch = [&](long batch, std::span<double> row) {
        SimConfig bc = cfg;
        bc.n_replicas = batch_size;
        LockstepEnsemble ens(bc, model, batch_size,
                             static_cast<std::uint64_t>(batch) * batch_size);
        long rec = 0;
        auto sink = [&](std::span<const double> y) {
            KahanSum s;
            for (double v : y) s.add(v);
            row[rec++] = s.value() / batch_size;
        };
        bool ok = ens.run(bc, merge, model, obs, sink);
        if (ok) {
            std::lock_guard<std::mutex> lk(mx);
            max_t = std::max(max_t, ens.max_abs_tangent);
        }
        return ok;
    };
    auto merged = ReplicaReduction::run(n_batches, m, opts.workers, fill_batch);
    if (merged.n_ok < n_batches) throw DivergenceError("merged batches diverged");
    out.max_abs_tangent_merged = max_t;

    // plain side at matched trajectory count
    SimConfig pc = cfg;
    pc.n_replicas = out.n_plain;
    EstimatorResult plain = ensemble_sensitivity(pc, model, obs, opts);
    if (static_cast<long>(plain.series.size()) != m)
        throw NumericError("merge_compare: record grids disagree");

    out.mean_merged.resize(m);
    out.se_merged.resize(m);
    out.mean_plain.resize(m);
    out.se_plain.resize(m);
    out.var_ratio.resize(m);
    for (long k = 0; k < m; ++k) {
        auto mo = moments_from_sums(merged.sum[k], merged.sumsq[k], merged.n_ok);
        out.mean_merged[k] = mo.mean;
        out.se_merged[k] = mo.se;
        out.mean_plain[k] = plain.series[k].value;
        out.se_plain[k] = plain.series[k].std_error;
        out.var_ratio[k] = (mo.se > 0)
                               ? (plain.series[k].std_error * plain.series[k].std_error) / (mo.se * mo.se)
                               : 0.0;
    }
    return out;
}

}  // namespace langsens
