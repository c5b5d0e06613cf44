#include "langsens/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>

#include "langsens/analysis.hpp"
#include "langsens/csv.hpp"
#include "langsens/errors.hpp"
#include "langsens/estimators.hpp"
#include "langsens/merging.hpp"
#include "langsens/parallel.hpp"
#include "langsens/spectral.hpp"

namespace langsens::cli {

namespace {

constexpr const char* kVersion = "langsens 0.1.0";

const std::set<std::string> kSubcommands = {
    "simulate", "sensitivity", "greenkubo",        "nemd",    "spectral",
    "sweep",    "tail",        "merge-compare",    "colloid", "pair-contraction",
};

const std::set<std::string> kGlobalKeys = {
    "model",  "out",     "workers",  "seed",       "dt",         "t_final",   "n_replicas",
    "burn_in", "record_stride", "init", "x0",      "mean",       "sd",        "estimator",
    "observable", "eps", "t_trunc",  "centered",   "bin",        "period",    "batches",
    "batch_size", "sweep", "beta_moment", "rel_tol", "t",        "in",        "n_pairs",
    "x",      "y",       "desk",     "config",
};

double parse_number(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        double out = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw UsageError("malformed value for '" + key + "': '" + v + "'");
    }
}

long parse_long(const std::string& key, const std::string& v) {
    double d = parse_number(key, v);
    long l = std::lround(d);
    if (std::abs(d - l) > 1e-9) throw UsageError("'" + key + "' expects an integer, got '" + v + "'");
    return l;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "1" || v == "true" || v == "yes") return true;
    if (v == "0" || v == "false" || v == "no") return false;
    throw UsageError("'" + key + "' expects a boolean, got '" + v + "'");
}

Vec parse_vector(const std::string& key, const std::string& v) {
    Vec out;
    std::stringstream ss(v);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(parse_number(key, tok));
    if (out.empty()) throw UsageError("'" + key + "' expects a comma-separated vector");
    return out;
}

SweepSpec parse_sweep(const std::string& v) {
    // param:start:stop:step
    std::stringstream ss(v);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, ':')) parts.push_back(part);
    if (parts.size() != 4) throw UsageError("sweep expects param:start:stop:step, got '" + v + "'");
    SweepSpec sw;
    sw.param = parts[0];
    sw.start = parse_number("sweep", parts[1]);
    sw.stop = parse_number("sweep", parts[2]);
    sw.step = parse_number("sweep", parts[3]);
    if (sw.step <= 0) throw UsageError("sweep step must be > 0");
    return sw;
}

using KvList = std::vector<std::pair<std::string, std::string>>;

KvList read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file '" + path + "'");
    KvList kv;
    std::string line;
    while (std::getline(in, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            bool blank = line.find_first_not_of(" \t\r") == std::string::npos;
            if (!blank) throw UsageError("config file line is not 'key = value': '" + line + "'");
            continue;
        }
        auto trim = [](std::string s) {
            size_t a = s.find_first_not_of(" \t\r");
            size_t b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string{} : s.substr(a, b - a + 1);
        };
        kv.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return kv;
}

// figure presets: key defaults applied under the user's flags
struct Preset {
    std::string base;
    KvList full, desk;
};

const std::map<std::string, Preset>& presets() {
    static const std::map<std::string, Preset> p = {
        {"figure1", {"spectral", {{"model", "double_well"}, {"sweep", "c:0.1:3:0.1"}}, {}}},
        {"figure2", {"spectral", {{"model", "double_well"}, {"sweep", "c:0.1:3:0.1"}}, {}}},
        {"figure3",
         {"tail",
          {{"model", "double_well"}, {"sweep", "c:2:5:1"}, {"t", "40"}, {"n_replicas", "1000000"}},
          {{"n_replicas", "100000"}}}},
        {"figure4",
         {"colloid",
          {{"dt", "1e-5"}, {"n_replicas", "100000"}, {"t_final", "1"}},
          {{"dt", "1e-4"}, {"n_replicas", "2000"}}}},
        {"figure5",
         {"merge-compare",
          {{"c", "2.9"}, {"bin", "0.04"}, {"period", "10"}, {"batches", "1000"},
           {"batch_size", "1000"}, {"t_final", "10"}},
          {{"batches", "200"}, {"batch_size", "200"}}}},
        {"figure6",
         {"merge-compare",
          {{"c", "2.9"}, {"bin", "0.04"}, {"period", "10"}, {"batches", "1000"},
           {"batch_size", "1000"}, {"t_final", "10"}},
          {{"batches", "200"}, {"batch_size", "200"}}}},
    };
    return p;
}

std::string format_long(long v) { return std::to_string(v); }

struct OutputSink {
    std::ofstream file;
    std::ostream* os = nullptr;
    explicit OutputSink(const std::string& path) {
        if (path.empty()) {
            os = &std::cout;
        } else {
            file.open(path, std::ios::binary);
            if (!file) throw UsageError("cannot open output file '" + path + "'");
            os = &file;
        }
    }
    std::ostream& stream() { return *os; }
};

void write_header(CsvWriter& w, const RunSpec& spec) {
    w.comment(kVersion);
    w.comment("subcommand=" + spec.subcommand);
    auto echo = spec.echo;
    std::sort(echo.begin(), echo.end());
    for (const auto& [k, v] : echo) w.comment(k + "=" + v);
}

Model resolved_model(const RunSpec& spec) { return build_model(spec.model_name, spec.model_params); }

// ---------------------------------------------------------------- simulate

int run_simulate(const RunSpec& spec) {
    Model model = resolved_model(spec);
    const int d = model.pot.dim;
    OutputSink sink(spec.out_path);
    CsvWriter w(sink.stream());
    write_header(w, spec);

    std::vector<std::string> cols{"time", "replica"};
    for (int i = 0; i < d; ++i) cols.push_back("x_" + std::to_string(i));
    for (int i = 0; i < d; ++i) cols.push_back("t_" + std::to_string(i));
    w.header(cols);

    std::vector<Observer> obs;
    for (int i = 0; i < d; ++i)
        obs.push_back([i](const ParticleState& s) { return s.x[i]; });
    for (int i = 0; i < d; ++i)
        obs.push_back([i](const ParticleState& s) { return s.tangent[i]; });

    long diverged = 0;
    std::vector<double> row(2 + 2 * d);
    for (long r = 0; r < spec.sim.n_replicas; ++r) {
        NoiseStream ns(spec.sim.master_seed, static_cast<std::uint64_t>(r));
        Recorded rec = simulate_replica(spec.sim, model, ns, obs);
        if (rec.diverged) {
            ++diverged;
            std::cerr << "warning: replica " << r << " diverged at t=" << rec.diverged_at << "\n";
        }
        for (size_t k = 0; k < rec.times.size(); ++k) {
            row[0] = rec.times[k];
            row[1] = static_cast<double>(r);
            for (int i = 0; i < 2 * d; ++i) row[2 + i] = rec.values[i][k];
            w.row(row);
        }
    }
    if (diverged == spec.sim.n_replicas && spec.sim.n_replicas > 0)
        throw DivergenceError("all replicas diverged");
    return 0;
}

// -------------------------------------------------------------- estimators

void write_summary_comment(CsvWriter& w, const std::string& name, const EstimatorResult& r,
                           long n_total) {
    std::ostringstream os;
    os << "summary estimator=" << name << " value=" << format_double(r.value)
       << " std_error=" << format_double(r.std_error) << " ci_lo=" << format_double(r.ci95.first)
       << " ci_hi=" << format_double(r.ci95.second) << " n_replicas=" << n_total
       << " n_diverged=" << r.n_diverged;
    w.comment(os.str());
}

void write_summary_csv(CsvWriter& w, const std::string& name, const EstimatorResult& r,
                       long n_total) {
    const std::vector<std::string> cols{"estimator", "value",      "std_error", "ci_lo",
                                        "ci_hi",     "n_replicas", "n_diverged"};
    w.header(cols);
    std::vector<std::string> row{name,
                                 format_double(r.value),
                                 format_double(r.std_error),
                                 format_double(r.ci95.first),
                                 format_double(r.ci95.second),
                                 format_long(n_total),
                                 format_long(r.n_diverged)};
    w.row_mixed(row);
}

void write_series_csv(CsvWriter& w, const EstimatorResult& r) {
    const std::vector<std::string> cols{"time", "estimate", "std_error"};
    w.header(cols);
    for (const auto& p : r.series) w.row(std::vector<double>{p.time, p.value, p.std_error});
}

void warn_diverged(const EstimatorResult& r) {
    if (r.n_diverged > 0)
        std::cerr << "warning: " << r.n_diverged << " replicas diverged and were excluded\n";
}

int run_sensitivity(const RunSpec& spec) {
    Model model = resolved_model(spec);
    Observable obs = observable_for(model, spec.observable);
    RunOptions opts{spec.workers};
    OutputSink sink(spec.out_path);
    CsvWriter w(sink.stream());
    write_header(w, spec);

    if (spec.estimator == "ergodic") {
        EstimatorResult r = ergodic_sensitivity(spec.sim, model, obs, opts);
        warn_diverged(r);
        write_summary_csv(w, "ergodic", r, spec.sim.n_replicas);
    } else if (spec.estimator == "ensemble") {
        EstimatorResult r = ensemble_sensitivity(spec.sim, model, obs, opts);
        warn_diverged(r);
        write_summary_comment(w, "ensemble", r, spec.sim.n_replicas);
        write_series_csv(w, r);
    } else if (spec.estimator == "merged") {
        MergeConfig mc{spec.bin, spec.period, true};
        EstimatorResult r = merged_ensemble_sensitivity(spec.sim, mc, model, obs);
        write_summary_comment(w, "merged", r, spec.sim.n_replicas);
        write_series_csv(w, r);
    } else {
        throw UsageError("unknown estimator '" + spec.estimator + "' (ergodic|ensemble|merged)");
    }
    return 0;
}

int run_greenkubo(const RunSpec& spec) {
    Model model = resolved_model(spec);
    Observable obs = observable_for(model, spec.observable);
    RunOptions opts{spec.workers};

    double t_trunc = spec.t_trunc;
    SimConfig cfg = spec.sim;
    if (t_trunc <= 0) {
        if (model.pot.dim != 1)
            throw UsageError("greenkubo: t_trunc must be given for models with dim > 1");
        double eta = poincare_constant(model.pot).eta;
        t_trunc = 5.0 / eta;
    }
    // a defaulted horizon stretches to cover the truncation time; an
    // explicit one that is too short is the user's error
    if (cfg.t_final < t_trunc && !spec.t_final_explicit) cfg.t_final = t_trunc;
    EstimatorResult r = green_kubo_sensitivity(cfg, model, obs, t_trunc, opts, spec.centered);
    warn_diverged(r);

    OutputSink sink(spec.out_path);
    CsvWriter w(sink.stream());
    write_header(w, spec);
    w.comment("t_trunc=" + format_double(t_trunc));
    // truncation diagnostic: contribution of the last quarter of the window
    double tail = 0.0;
    if (r.series.size() >= 4) {
        size_t q = r.series.size() - 1 - (r.series.size() - 1) / 4;
        tail = std::abs(r.series.back().value - r.series[q].value);
    }
    w.comment("truncation_tail=" + format_double(tail));
    write_summary_comment(w, "greenkubo", r, spec.sim.n_replicas);
    write_series_csv(w, r);
    return 0;
}

int run_nemd(const RunSpec& spec) {
    Model model = resolved_model(spec);
    Observable obs = observable_for(model, spec.observable);
    RunOptions opts{spec.workers};
    EstimatorResult r = nemd_finite_difference(spec.sim, model, obs, spec.eps, opts);
    warn_diverged(r);
    OutputSink sink(spec.out_path);
    CsvWriter w(sink.stream());
    write_header(w, spec);
    write_summary_csv(w, "nemd", r, spec.sim.n_replicas);
    return 0;
}

// ---------------------------------------------------------------- spectral

std::string flag_text(const AssumptionReport& r) {
    std::ostringstream os;
    os << "poincare:" << (r.hyp_poincare_ok ? 1 : 0) << ",spec:" << (r.hyp_spec_ok ? 1 : 0)
       << ",conv:" << (r.conv_ok ? 1 : 0) << ",minspec:" << (r.minspec_bounded_ok ? 1 : 0)
       << ",convex:" << (r.strictly_convex ? 1 : 0);
    return os.str();
}

int run_spectral(const RunSpec& spec) {
    Model model = resolved_model(spec);
    AssumptionReport rep = check_assumptions(model.pot, spec.beta_moment);
    OutputSink sink(spec.out_path);
    CsvWriter w(sink.stream());
    write_header(w, spec);
    auto& os = sink.stream();
    os << "eta=" << format_double(rep.eta) << "\n";
    os << "rho=" << format_double(rep.rho) << "\n";
    os << "beta=" << format_double(rep.beta) << "\n";
    os << "inf_phi=" << format_double(rep.inf_phi) << "\n";
    os << "E=" << format_double(rep.E) << "\n";
    os << "Var=" << format_double(rep.Var) << "\n";
    os << "flags=" << flag_text(rep) << "\n";
    return 0;
}

int run_sweep(const RunSpec& spec) {
    if (!spec.sweep) throw UsageError("sweep subcommand requires a sweep=param:start:stop:step");
    const SweepSpec& sw = *spec.sweep;
    OutputSink sink(spec.out_path);
    CsvWriter w(sink.stream());
    write_header(w, spec);
    const std::vector<std::string> cols{sw.param, "eta", "rho", "beta"};
    w.header(cols);
    for (double v : sw.values()) {
        auto params = spec.model_params;
        params[sw.param] = v;
        Model model = build_model(spec.model_name, params);
        AssumptionReport rep = check_assumptions(model.pot, spec.beta_moment);
        w.row(std::vector<double>{v, rep.eta, rep.rho, rep.beta});
    }
    return 0;
}

// -------------------------------------------------------------------- tail

std::vector<double> read_samples(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open input file '" + path + "'");
    std::vector<double> samples;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        auto comma = line.find_last_of(',');
        std::string tok = comma == std::string::npos ? line : line.substr(comma + 1);
        try {
            samples.push_back(std::stod(tok));
        } catch (const std::exception&) {
            // header row or stray text
        }
    }
    return samples;
}

std::vector<double> tail_samples(const RunSpec& spec, const Model& model) {
    SimConfig cfg = spec.sim;
    cfg.t_final = spec.tail_t;
    const int d = model.pot.dim;
    const long n = cfg.n_replicas;
    std::vector<double> samples(n);
    std::vector<char> ok(n, 1);
    const long steps = cfg.n_steps();
    const double sdt = std::sqrt(cfg.dt);
    const Vec x0 = window_start(cfg, model);

    std::atomic<long> next{0};
    auto worker = [&] {
        StepWorkspace ws;
        ws.resize(d);
        Vec dw(d);
        for (;;) {
            long r = next.fetch_add(1);
            if (r >= n) return;
            NoiseStream ns(cfg.master_seed, static_cast<std::uint64_t>(r));
            ParticleState s{x0, Vec(d, 0.0), 0.0};
            for (long k = 0; k < steps; ++k) {
                ns.fill_gaussian_at(static_cast<std::uint64_t>(k), dw);
                for (double& c : dw) c *= sdt;
                step_euler_inplace(s, model.pot, model.pert, cfg.dt, dw, ws);
                if (!state_finite(s)) {
                    ok[r] = 0;
                    break;
                }
            }
            samples[r] = ok[r] ? norm2(s.tangent) : 0.0;
        }
    };
    int nw = std::max(1, spec.workers);
    if (nw == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < nw; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    std::vector<double> out;
    out.reserve(n);
    long diverged = 0;
    for (long r = 0; r < n; ++r) {
        if (ok[r])
            out.push_back(samples[r]);
        else
            ++diverged;
    }
    if (diverged > 0)
        std::cerr << "warning: " << diverged << " replicas diverged and were excluded\n";
    if (out.empty()) throw DivergenceError("all replicas diverged");
    return out;
}

void write_tail_csv(CsvWriter& w, const RunSpec& spec, std::vector<double> samples) {
    CdfTail tail = empirical_tail_cdf(std::move(samples));
    SlopeFit fit = fit_log_slope(tail);
    std::ostringstream os;
    os << "fit slope=" << format_double(fit.slope) << " slope_se=" << format_double(fit.se)
       << " intercept=" << format_double(fit.intercept)
       << " r_squared=" << format_double(fit.r_squared) << " x_lo=" << format_double(tail.x_lo)
       << " x_hi=" << format_double(tail.x_hi) << " n_points=" << fit.n_points;
    w.comment(os.str());
    w.comment("n_samples=" + format_long(static_cast<long>(tail.sorted_magnitudes.size())) +
              " t=" + format_double(spec.tail_t));
    const std::vector<std::string> cols{"x", "survival"};
    w.header(cols);
    for (size_t i = 0; i < tail.xs.size(); ++i)
        w.row(std::vector<double>{tail.xs[i], tail.survival[i]});
}

int run_tail(const RunSpec& spec) {
    if (!spec.in_path.empty()) {
        OutputSink sink(spec.out_path);
        CsvWriter w(sink.stream());
        write_header(w, spec);
        write_tail_csv(w, spec, read_samples(spec.in_path));
        return 0;
    }
    if (spec.sweep) {
        std::string stem = spec.out_path.empty() ? "tail" : spec.out_path;
        if (stem.size() > 4 && stem.substr(stem.size() - 4) == ".csv")
            stem = stem.substr(0, stem.size() - 4);
        for (double v : spec.sweep->values()) {
            auto params = spec.model_params;
            params[spec.sweep->param] = v;
            Model model = build_model(spec.model_name, params);
            std::ostringstream name;
            name << stem << "_" << spec.sweep->param << format_double(v) << ".csv";
            RunSpec sub = spec;
            sub.out_path = spec.out_path.empty() ? "" : name.str();
            OutputSink sink(sub.out_path);
            CsvWriter w(sink.stream());
            write_header(w, sub);
            w.comment(spec.sweep->param + "=" + format_double(v));
            write_tail_csv(w, sub, tail_samples(sub, model));
        }
        return 0;
    }
    Model model = resolved_model(spec);
    OutputSink sink(spec.out_path);
    CsvWriter w(sink.stream());
    write_header(w, spec);
    write_tail_csv(w, spec, tail_samples(spec, model));
    return 0;
}

// ------------------------------------------------------------------ merging

int run_merge_compare(const RunSpec& spec) {
    Model model = resolved_model(spec);
    Observable obs = observable_for(model, spec.observable);
    MergeConfig mc{spec.bin, spec.period, true};
    RunOptions opts{spec.workers};
    MergeComparison cmp =
        merge_compare(spec.sim, mc, model, obs, spec.batches, spec.batch_size, opts);

    OutputSink sink(spec.out_path);
    CsvWriter w(sink.stream());
    write_header(w, spec);
    w.comment("n_batches=" + format_long(cmp.n_batches) + " batch_size=" +
              format_long(cmp.batch_size) + " n_plain=" + format_long(cmp.n_plain));
    w.comment("max_abs_tangent_merged=" + format_double(cmp.max_abs_tangent_merged));
    const std::vector<std::string> cols{"time",       "mean_merged", "se_merged",
                                        "mean_plain", "se_plain",    "var_ratio"};
    w.header(cols);
    for (size_t k = 0; k < cmp.times.size(); ++k)
        w.row(std::vector<double>{cmp.times[k], cmp.mean_merged[k], cmp.se_merged[k],
                                  cmp.mean_plain[k], cmp.se_plain[k], cmp.var_ratio[k]});
    return 0;
}

// ---------------------------------------------------------------- colloid

int run_colloid(const RunSpec& spec) {
    Model model = resolved_model(spec);
    Observable obs = observable_for(model, spec.observable);
    RunOptions opts{spec.workers};
    EstimatorResult r = ensemble_sensitivity(spec.sim, model, obs, opts);
    warn_diverged(r);

    OutputSink sink(spec.out_path);
    CsvWriter w(sink.stream());
    write_header(w, spec);
    write_summary_comment(w, "ensemble", r, spec.sim.n_replicas);
    auto plateau = plateau_detect(r.series, spec.rel_tol);
    if (plateau)
        w.comment("plateau value=" + format_double(plateau->value) +
                  " t_onset=" + format_double(plateau->t_onset));
    else
        w.comment("plateau=none");
    write_series_csv(w, r);
    return 0;
}

// --------------------------------------------------------- pair-contraction

int run_pair_contraction(const RunSpec& spec) {
    Model model = resolved_model(spec);
    const int d = model.pot.dim;
    SimConfig cfg = spec.sim;
    const long n_pairs = spec.n_pairs;
    if (n_pairs < 1) throw UsageError("pair-contraction: n_pairs must be >= 1");

    std::vector<double> times;
    {
        NoiseStream probe(cfg.master_seed, 0);
        ScalarSeries s = simulate_coupled_pair(model.default_start, model.default_start, cfg, model,
                                               probe);
        times = s.times;
    }
    const long m = static_cast<long>(times.size());

    auto fill = [&](long pair, std::span<double> out) {
        Vec x(d), y(d);
        if (!spec.pair_x.empty()) {
            x = spec.pair_x;
            y = spec.pair_y;
        } else {
            NoiseStream ic(cfg.master_seed + 0x5151, static_cast<std::uint64_t>(pair));
            ic.fill_gaussian_at(0, x);
            ic.fill_gaussian_at(1, y);
            for (int i = 0; i < d; ++i) {
                x[i] = model.default_start[i] + x[i];
                y[i] = model.default_start[i] + y[i];
            }
        }
        NoiseStream ns(cfg.master_seed, static_cast<std::uint64_t>(pair));
        ScalarSeries s = simulate_coupled_pair(x, y, cfg, model, ns);
        if (s.diverged || static_cast<long>(s.values.size()) != m) return false;
        for (long k = 0; k < m; ++k)
            out[k] = std::log(std::max(s.values[k], 1e-300));
        return true;
    };
    auto red = ReplicaReduction::run(n_pairs, m, spec.workers, fill);
    if (red.n_ok == 0) throw DivergenceError("all pairs diverged");
    if (red.n_ok < n_pairs)
        std::cerr << "warning: " << (n_pairs - red.n_ok) << " pairs diverged and were excluded\n";

    // least-squares slope of the mean log-separation over [t/2, t]
    std::vector<double> mean(m);
    for (long k = 0; k < m; ++k) mean[k] = red.sum[k] / red.n_ok;
    double t_half = 0.5 * cfg.t_final;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    long n_fit = 0;
    for (long k = 0; k < m; ++k) {
        if (times[k] < t_half) continue;
        sx += times[k];
        sy += mean[k];
        sxx += times[k] * times[k];
        sxy += times[k] * mean[k];
        ++n_fit;
    }
    double slope = (n_fit > 1) ? (n_fit * sxy - sx * sy) / (n_fit * sxx - sx * sx) : 0.0;

    OutputSink sink(spec.out_path);
    CsvWriter w(sink.stream());
    write_header(w, spec);
    w.comment("n_pairs=" + format_long(red.n_ok));
    w.comment("slope_last_half=" + format_double(slope));
    const std::vector<std::string> cols{"time", "mean_log_separation"};
    w.header(cols);
    for (long k = 0; k < m; ++k) w.row(std::vector<double>{times[k], mean[k]});
    return 0;
}

}  // namespace

std::vector<double> SweepSpec::values() const {
    std::vector<double> out;
    long count = static_cast<long>(std::floor((stop - start) / step + 1e-9)) + 1;
    for (long i = 0; i < count; ++i) out.push_back(start + i * step);
    return out;
}

RunSpec parse_config(const std::vector<std::string>& args) {
    if (args.empty())
        throw UsageError("missing subcommand; one of: simulate sensitivity greenkubo nemd spectral "
                         "sweep tail merge-compare colloid pair-contraction figure1..figure6");
    std::string sub = args[0];

    // collect raw key=value tokens (checking shape), flags after config file
    KvList raw;
    bool desk_flag = false;
    for (size_t i = 1; i < args.size(); ++i) {
        const std::string& tok = args[i];
        if (tok == "--desk") {
            desk_flag = true;
            continue;
        }
        auto eq = tok.find('=');
        if (eq == std::string::npos || eq == 0)
            throw UsageError("expected key=value token, got '" + tok + "'");
        raw.emplace_back(tok.substr(0, eq), tok.substr(eq + 1));
    }

    // figure presets expand to a base subcommand plus bundled defaults
    KvList preset_kv;
    if (auto it = presets().find(sub); it != presets().end()) {
        bool desk = desk_flag;
        for (const auto& [k, v] : raw)
            if (k == "desk") desk = parse_bool(k, v);
        preset_kv = it->second.full;
        if (desk)
            for (const auto& [k, v] : it->second.desk) preset_kv.emplace_back(k, v);
        sub = it->second.base;
    }
    if (!kSubcommands.count(sub)) throw UsageError("unknown subcommand '" + sub + "'");

    // precedence: preset < config file < flags; duplicate flag keys last-wins
    KvList merged = preset_kv;
    for (const auto& [k, v] : raw)
        if (k == "config")
            for (auto& kv : read_config_file(v)) merged.push_back(kv);
    std::map<std::string, int> seen;
    for (const auto& [k, v] : raw) {
        if (k == "config") continue;
        if (++seen[k] == 2)
            std::cerr << "warning: duplicate key '" << k << "', last value wins\n";
        merged.emplace_back(k, v);
    }
    if (desk_flag) merged.emplace_back("desk", "1");

    // last occurrence of each key wins
    std::map<std::string, std::string> kv;
    std::vector<std::string> order;
    for (const auto& [k, v] : merged) {
        if (!kv.count(k)) order.push_back(k);
        kv[k] = v;
    }

    RunSpec spec;
    spec.subcommand = sub;
    spec.desk = kv.count("desk") ? parse_bool("desk", kv["desk"]) : false;

    // defaults per subcommand
    if (sub == "tail" || sub == "merge-compare") spec.model_name = "double_well";
    if (sub == "pair-contraction") spec.model_name = "mexican_hat";
    if (sub == "colloid") spec.model_name = "colloid";
    if (kv.count("model")) spec.model_name = kv["model"];
    if (spec.model_name.empty())
        throw UsageError("missing required model (model=<name>); catalog: ou double_well "
                         "quartic_tensor mexican_hat colloid");
    if (sub == "merge-compare" && spec.model_name == "double_well" && !kv.count("c"))
        spec.model_params["c"] = 2.9;

    // model parameter keys come from the catalog entry
    std::set<std::string> model_keys;
    for (const auto& entry : model_catalog())
        if (entry.name == spec.model_name)
            for (const auto& [k, v] : entry.defaults) model_keys.insert(k);

    for (const auto& k : order) {
        const std::string& v = kv[k];
        if (model_keys.count(k)) {
            spec.model_params[k] = parse_number(k, v);
            continue;
        }
        if (!kGlobalKeys.count(k)) throw UsageError("unknown key '" + k + "=" + v + "'");
        if (k == "out") spec.out_path = v;
        else if (k == "in") spec.in_path = v;
        else if (k == "workers") spec.workers = static_cast<int>(parse_long(k, v));
        else if (k == "seed") spec.sim.master_seed = static_cast<std::uint64_t>(parse_long(k, v));
        else if (k == "dt") spec.sim.dt = parse_number(k, v);
        else if (k == "t_final") spec.sim.t_final = parse_number(k, v);
        else if (k == "n_replicas") spec.sim.n_replicas = parse_long(k, v);
        else if (k == "burn_in") spec.sim.burn_in = parse_number(k, v);
        else if (k == "record_stride") spec.sim.record_stride = parse_long(k, v);
        else if (k == "init") {
            if (v == "point") spec.sim.init.kind = InitialCondition::Kind::Point;
            else if (v == "gaussian") spec.sim.init.kind = InitialCondition::Kind::Gaussian;
            else if (v == "equilibrium") spec.sim.init.kind = InitialCondition::Kind::Equilibrium;
            else throw UsageError("init must be point|gaussian|equilibrium, got '" + v + "'");
        } else if (k == "x0") spec.sim.init.point = parse_vector(k, v);
        else if (k == "mean") spec.sim.init.mean = parse_number(k, v);
        else if (k == "sd") spec.sim.init.sd = parse_number(k, v);
        else if (k == "estimator") spec.estimator = v;
        else if (k == "observable") spec.observable = v;
        else if (k == "eps") spec.eps = parse_number(k, v);
        else if (k == "t_trunc") spec.t_trunc = parse_number(k, v);
        else if (k == "centered") spec.centered = parse_bool(k, v);
        else if (k == "bin") spec.bin = parse_number(k, v);
        else if (k == "period") spec.period = parse_long(k, v);
        else if (k == "batches") spec.batches = parse_long(k, v);
        else if (k == "batch_size") spec.batch_size = parse_long(k, v);
        else if (k == "sweep") spec.sweep = parse_sweep(v);
        else if (k == "beta_moment") spec.beta_moment = parse_number(k, v);
        else if (k == "rel_tol") spec.rel_tol = parse_number(k, v);
        else if (k == "t") spec.tail_t = parse_number(k, v);
        else if (k == "n_pairs") spec.n_pairs = parse_long(k, v);
        else if (k == "x") spec.pair_x = parse_vector(k, v);
        else if (k == "y") spec.pair_y = parse_vector(k, v);
        // "desk" and "config" already handled
    }

    // spectral + sweep normalizes to the sweep subcommand
    if (spec.subcommand == "spectral" && spec.sweep) spec.subcommand = "sweep";
    if (spec.subcommand == "sweep" && !spec.sweep)
        throw UsageError("sweep subcommand requires sweep=param:start:stop:step");

    // resolve model-driven defaults
    Model model = build_model(spec.model_name, spec.model_params);
    spec.t_final_explicit = kv.count("t_final") > 0;
    if (!kv.count("dt")) spec.sim.dt = model.default_dt;
    if (!kv.count("t_final")) {
        if (sub == "merge-compare" || sub == "pair-contraction") spec.sim.t_final = 10.0;
        else if (sub == "colloid") spec.sim.t_final = 1.0;
        else if (sub == "simulate") spec.sim.t_final = 1.0;
        else spec.sim.t_final = 10.0;
    }
    if (sub == "colloid" && !kv.count("init"))
        spec.sim.init.kind = InitialCondition::Kind::Equilibrium;
    if (!kv.count("burn_in")) {
        bool wants_equilibration =
            sub == "greenkubo" || sub == "nemd" ||
            (sub == "sensitivity" && spec.estimator == "ergodic") ||
            spec.sim.init.kind == InitialCondition::Kind::Equilibrium;
        spec.sim.burn_in = wants_equilibration ? model.default_burn_in : 0.0;
    }
    if (!kv.count("n_replicas")) {
        if (sub == "simulate") spec.sim.n_replicas = 1;
        else if (sub == "colloid") spec.sim.n_replicas = 2000;
        else spec.sim.n_replicas = 1000;
    }
    if (!kv.count("observable")) {
        if (sub == "colloid") spec.observable = "covariance";
        else if (sub == "merge-compare") spec.observable = "indicator";
        else spec.observable = "x1";
    }
    if (!kv.count("record_stride")) {
        long steps = spec.sim.n_steps();
        spec.sim.record_stride = std::max(1L, steps / 1000);
    }
    if (spec.sim.dt <= 0) throw UsageError("dt must be > 0");
    if (spec.sim.t_final < 0) throw UsageError("t_final must be >= 0");
    if (spec.sim.dt > spec.sim.t_final && spec.sim.t_final > 0)
        throw UsageError("dt must not exceed t_final");
    if (spec.sim.n_replicas < 1) throw UsageError("n_replicas must be >= 1");
    if (spec.workers < 1) throw UsageError("workers must be >= 1");
    if (!spec.pair_x.empty() != !spec.pair_y.empty())
        throw UsageError("pair-contraction: give both x= and y= or neither");

    // reproducibility echo (workers deliberately excluded)
    auto put = [&](const std::string& k, const std::string& v) { spec.echo.emplace_back(k, v); };
    put("version", "0.1.0");
    put("model", spec.model_name);
    for (const auto& [k, v] : model.params) put(k, format_double(spec.model_params.count(k)
                                                                     ? spec.model_params.at(k)
                                                                     : v));
    put("seed", format_long(static_cast<long>(spec.sim.master_seed)));
    put("dt", format_double(spec.sim.dt));
    put("t_final", format_double(spec.sim.t_final));
    put("n_replicas", format_long(spec.sim.n_replicas));
    put("burn_in", format_double(spec.sim.burn_in));
    put("record_stride", format_long(spec.sim.record_stride));
    switch (spec.sim.init.kind) {
        case InitialCondition::Kind::Point: put("init", "point"); break;
        case InitialCondition::Kind::Gaussian: put("init", "gaussian"); break;
        case InitialCondition::Kind::Equilibrium: put("init", "equilibrium"); break;
    }
    if (sub == "sensitivity") put("estimator", spec.estimator);
    if (sub == "sensitivity" || sub == "greenkubo" || sub == "nemd" || sub == "colloid" ||
        sub == "merge-compare")
        put("observable", spec.observable);
    if (sub == "nemd") put("eps", format_double(spec.eps));
    if (sub == "greenkubo") {
        put("t_trunc", spec.t_trunc > 0 ? format_double(spec.t_trunc) : "auto");
        put("centered", spec.centered ? "1" : "0");
    }
    if (sub == "merge-compare" || (sub == "sensitivity" && spec.estimator == "merged")) {
        put("bin", format_double(spec.bin));
        put("period", format_long(spec.period));
    }
    if (sub == "merge-compare") {
        put("batches", format_long(spec.batches));
        put("batch_size", format_long(spec.batch_size));
    }
    if (sub == "spectral" || sub == "sweep") put("beta_moment", format_double(spec.beta_moment));
    if (sub == "colloid") put("rel_tol", format_double(spec.rel_tol));
    if (sub == "tail") put("t", format_double(spec.tail_t));
    if (sub == "pair-contraction") put("n_pairs", format_long(spec.n_pairs));
    if (spec.sweep)
        put("sweep", spec.sweep->param + ":" + format_double(spec.sweep->start) + ":" +
                         format_double(spec.sweep->stop) + ":" + format_double(spec.sweep->step));
    return spec;
}

int run(const RunSpec& spec) {
    const std::string& sub = spec.subcommand;
    if (sub == "simulate") return run_simulate(spec);
    if (sub == "sensitivity") return run_sensitivity(spec);
    if (sub == "greenkubo") return run_greenkubo(spec);
    if (sub == "nemd") return run_nemd(spec);
    if (sub == "spectral") return run_spectral(spec);
    if (sub == "sweep") return run_sweep(spec);
    if (sub == "tail") return run_tail(spec);
    if (sub == "merge-compare") return run_merge_compare(spec);
    if (sub == "colloid") return run_colloid(spec);
    if (sub == "pair-contraction") return run_pair_contraction(spec);
    throw UsageError("unknown subcommand '" + sub + "'");
}

int main_entry(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        RunSpec spec = parse_config(args);
        return run(spec);
    } catch (const UsageError& e) {
        std::cerr << "error," << UsageError::exit_code << "," << e.what() << "\n";
        return UsageError::exit_code;
    } catch (const DivergenceError& e) {
        std::cerr << "error," << DivergenceError::exit_code << "," << e.what() << "\n";
        return DivergenceError::exit_code;
    } catch (const NumericError& e) {
        std::cerr << "error," << NumericError::exit_code << "," << e.what() << "\n";
        return NumericError::exit_code;
    } catch (const std::exception& e) {
        std::cerr << "error," << NumericError::exit_code << "," << e.what() << "\n";
        return NumericError::exit_code;
    }
}

}  // namespace langsens::cli
