#include "langsens/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

namespace langsens {

namespace {
constexpr long kBlock = 64;
}

ReplicaReduction::Out ReplicaReduction::run(long n_replicas, long n_values, int workers,
                                            const std::function<bool(long, std::span<double>)>& fill) {
    const long n_blocks = (n_replicas + kBlock - 1) / kBlock;
    std::vector<double> block_sum(static_cast<size_t>(n_blocks) * n_values, 0.0);
    std::vector<double> block_sumsq(static_cast<size_t>(n_blocks) * n_values, 0.0);
    std::vector<long> block_ok(n_blocks, 0);
    std::vector<std::vector<long>> block_diverged(n_blocks);

    std::atomic<long> next{0};
    auto worker = [&] {
        std::vector<double> buf(n_values);
        for (;;) {
            long b = next.fetch_add(1);
            if (b >= n_blocks) return;
            double* sum = &block_sum[static_cast<size_t>(b) * n_values];
            double* sumsq = &block_sumsq[static_cast<size_t>(b) * n_values];
            long lo = b * kBlock, hi = std::min(n_replicas, lo + kBlock);
            for (long r = lo; r < hi; ++r) {
                if (!fill(r, buf)) {
                    block_diverged[b].push_back(r);
                    continue;
                }
                ++block_ok[b];
                for (long v = 0; v < n_values; ++v) {
                    sum[v] += buf[v];
                    sumsq[v] += buf[v] * buf[v];
                }
            }
        }
    };

    int nw = std::max(1, workers);
    if (nw == 1 || n_blocks == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(nw);
        for (int i = 0; i < nw; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    Out out;
    out.sum.resize(n_values);
    out.sumsq.resize(n_values);
    for (long v = 0; v < n_values; ++v) {
        KahanSum s, ss;
        for (long b = 0; b < n_blocks; ++b) {
            s.add(block_sum[static_cast<size_t>(b) * n_values + v]);
            ss.add(block_sumsq[static_cast<size_t>(b) * n_values + v]);
        }
        out.sum[v] = s.value();
        out.sumsq[v] = ss.value();
    }
    for (long b = 0; b < n_blocks; ++b) {
        out.n_ok += block_ok[b];
        out.diverged_replicas.insert(out.diverged_replicas.end(), block_diverged[b].begin(),
                                     block_diverged[b].end());
    }
    return out;
}

MomentSummary moments_from_sums(double sum, double sumsq, long n) {
    MomentSummary m;
    if (n <= 0) return m;
    m.mean = sum / n;
    if (n > 1) {
        double ss = sumsq - sum * sum / n;
        m.var = std::max(0.0, ss / (n - 1));
        m.se = std::sqrt(m.var / n);
    }
    return m;
}

MomentSummary blocked_moments(std::span<const double> values) {
    const long n = static_cast<long>(values.size());
    KahanSum s, ss;
    for (long b = 0; b < n; b += kBlock) {
        double ps = 0.0, pss = 0.0;
        long hi = std::min(n, b + kBlock);
        for (long i = b; i < hi; ++i) {
            ps += values[i];
            pss += values[i] * values[i];
        }
        s.add(ps);
        ss.add(pss);
    }
    return moments_from_sums(s.value(), ss.value(), n);
}

}  // namespace langsens
