#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "langsens/dynamics.hpp"

namespace langsens::cli {

struct SweepSpec {
    std::string param;
    double start = 0.0, stop = 0.0, step = 0.0;
    std::vector<double> values() const;
};

struct RunSpec {
    std::string subcommand;
    std::string model_name;
    std::map<std::string, double> model_params;
    SimConfig sim;

    std::string estimator = "ergodic";  // sensitivity: ergodic | ensemble | merged
    std::string observable;
    double eps = 1e-2;       // nemd
    double t_trunc = 0.0;    // greenkubo; 0 = auto (5 / eta estimate)
    bool centered = true;    // greenkubo correlator centering
    double bin = 0.04;       // merging
    long period = 10;
    long batches = 200;
    long batch_size = 200;
    double beta_moment = 1.0;  // spectral
    double rel_tol = 0.1;      // plateau detection
    double tail_t = 40.0;      // tail observation time
    long n_pairs = 100;        // pair-contraction
    Vec pair_x, pair_y;
    std::string in_path;
    std::string out_path;
    int workers = 1;
    bool desk = false;
    bool t_final_explicit = false;
    std::optional<SweepSpec> sweep;

    /// Resolved key=value pairs echoed in the reproducibility header
    /// (workers excluded: results are worker-count independent by contract).
    std::vector<std::pair<std::string, std::string>> echo;
};

/// Parse `subcommand key=value ...` tokens; `config=FILE` pulls in a
/// line-oriented `key = value` file with lower precedence than the flags.
RunSpec parse_config(const std::vector<std::string>& args);

/// Execute; returns the process exit code (0 ok, 2 usage, 3 numeric,
/// 4 divergence-dominated).
int run(const RunSpec& spec);

/// parse + run with error mapping to exit codes and a machine-readable
/// `error,<code>,<message>` line on stderr.
int main_entry(int argc, char** argv);

}  // namespace langsens::cli
