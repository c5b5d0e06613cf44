#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "langsens/cli.hpp"
#include "langsens/errors.hpp"

using namespace langsens;
using cli::RunSpec;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& p) : path(p) {}
    ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_SUITE_BEGIN("cli");

TEST_CASE("parse_config maps tokens onto a resolved spec") {
    RunSpec spec = cli::parse_config(
        {"sensitivity", "model=ou", "t_final=10", "n_replicas=100000", "seed=7"});
    CHECK(spec.subcommand == "sensitivity");
    CHECK(spec.model_name == "ou");
    CHECK(spec.sim.t_final == 10.0);
    CHECK(spec.sim.n_replicas == 100000);
    CHECK(spec.sim.master_seed == 7);
    CHECK(spec.sim.dt == 1e-3);       // model default
    CHECK(spec.sim.burn_in == 10.0);  // ergodic estimator equilibrates
    CHECK(spec.estimator == "ergodic");
    CHECK(spec.observable == "x1");
    CHECK(spec.sim.record_stride >= 1);
}

TEST_CASE("parse_config expands sweeps and normalizes spectral sweeps") {
    RunSpec spec =
        cli::parse_config({"spectral", "model=double_well", "c=2", "sweep=c:0.1:3:0.1"});
    CHECK(spec.subcommand == "sweep");
    REQUIRE(spec.sweep.has_value());
    auto vals = spec.sweep->values();
    REQUIRE(vals.size() == 30);
    CHECK(vals.front() == doctest::Approx(0.1));
    CHECK(vals.back() == doctest::Approx(3.0));
}

TEST_CASE("parse_config rejects malformed input") {
    CHECK_THROWS_AS(cli::parse_config({}), UsageError);
    CHECK_THROWS_AS(cli::parse_config({"frobnicate"}), UsageError);
    CHECK_THROWS_AS(cli::parse_config({"sensitivity", "model=ou", "zzz=1"}), UsageError);
    CHECK_THROWS_AS(cli::parse_config({"sensitivity", "model=ou", "dt=abc"}), UsageError);
    CHECK_THROWS_AS(cli::parse_config({"sensitivity", "model=ou", "noequals"}), UsageError);
    CHECK_THROWS_AS(cli::parse_config({"sensitivity", "t_final=1"}), UsageError);  // no model
    CHECK_THROWS_AS(cli::parse_config({"spectral", "model=ou", "sweep=c:0.1:3"}), UsageError);
}

TEST_CASE("duplicate keys: last one wins") {
    RunSpec spec = cli::parse_config({"sensitivity", "model=ou", "t_final=1", "t_final=2"});
    CHECK(spec.sim.t_final == 2.0);
}

TEST_CASE("config file keys are overridden by flags") {
    TempFile tf("test_cli_config.txt");
    {
        std::ofstream out(tf.path);
        out << "# comment line\n";
        out << "t_final = 5\n";
        out << "n_replicas = 77\n";
    }
    RunSpec spec =
        cli::parse_config({"sensitivity", "model=ou", "config=" + tf.path, "t_final=9"});
    CHECK(spec.sim.t_final == 9.0);
    CHECK(spec.sim.n_replicas == 77);
}

TEST_CASE("run emits a self-describing summary CSV") {
    TempFile tf("test_cli_sens.csv");
    RunSpec spec = cli::parse_config({"sensitivity", "model=ou", "t_final=2", "burn_in=2",
                                      "n_replicas=32", "seed=3", "out=" + tf.path});
    CHECK(cli::run(spec) == 0);
    std::string text = slurp(tf.path);
    CHECK(text.find("# langsens") != std::string::npos);
    CHECK(text.find("# subcommand=sensitivity") != std::string::npos);
    CHECK(text.find("estimator,value,std_error,ci_lo,ci_hi,n_replicas,n_diverged") !=
          std::string::npos);
    CHECK(text.find("ergodic,") != std::string::npos);
    // comments first, then the header, then data
    std::istringstream lines(text);
    std::string line;
    bool in_data = false;
    while (std::getline(lines, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') CHECK(!in_data);
        else in_data = true;
    }
}

TEST_CASE("reruns with the same spec are byte-identical across worker counts") {
    TempFile a("test_cli_rep_a.csv"), b("test_cli_rep_b.csv");
    std::vector<std::string> base{"sensitivity", "model=double_well", "c=1",    "estimator=ensemble",
                                  "t_final=1",   "n_replicas=130",    "seed=99"};
    auto args_a = base;
    args_a.push_back("workers=1");
    args_a.push_back("out=" + a.path);
    auto args_b = base;
    args_b.push_back("workers=8");
    args_b.push_back("out=" + b.path);
    CHECK(cli::run(cli::parse_config(args_a)) == 0);
    CHECK(cli::run(cli::parse_config(args_b)) == 0);
    CHECK(slurp(a.path) == slurp(b.path));
    CHECK(!slurp(a.path).empty());
}

TEST_CASE("spectral report prints the key-value block") {
    TempFile tf("test_cli_spec.txt");
    RunSpec spec = cli::parse_config({"spectral", "model=ou", "out=" + tf.path});
    CHECK(cli::run(spec) == 0);
    std::string text = slurp(tf.path);
    CHECK(text.find("eta=") != std::string::npos);
    CHECK(text.find("rho=") != std::string::npos);
    CHECK(text.find("beta=") != std::string::npos);
    CHECK(text.find("flags=") != std::string::npos);
    // eta of the quadratic model is 1 within 1%
    auto pos = text.find("eta=");
    double eta = std::stod(text.substr(pos + 4));
    CHECK(eta == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("greenkubo emits the running-integral series and diagnostics") {
    TempFile tf("test_cli_gk.csv");
    RunSpec spec = cli::parse_config({"greenkubo", "model=ou", "n_replicas=64", "burn_in=2",
                                      "t_trunc=2", "seed=5", "out=" + tf.path});
    CHECK(cli::run(spec) == 0);
    std::string text = slurp(tf.path);
    CHECK(text.find("# t_trunc=2") != std::string::npos);
    CHECK(text.find("# truncation_tail=") != std::string::npos);
    CHECK(text.find("# summary estimator=greenkubo") != std::string::npos);
    CHECK(text.find("time,estimate,std_error") != std::string::npos);
}

TEST_CASE("simulate dumps the trajectory table") {
    TempFile tf("test_cli_sim.csv");
    RunSpec spec = cli::parse_config({"simulate", "model=ou", "t_final=0.01", "record_stride=1",
                                      "n_replicas=2", "seed=1", "out=" + tf.path});
    CHECK(cli::run(spec) == 0);
    std::string text = slurp(tf.path);
    CHECK(text.find("time,replica,x_0,t_0") != std::string::npos);
}

TEST_CASE("merge-compare emits the comparison table") {
    TempFile tf("test_cli_mc.csv");
    RunSpec spec = cli::parse_config({"merge-compare", "c=1", "t_final=0.5", "batches=4",
                                      "batch_size=16", "seed=9", "out=" + tf.path});
    CHECK(spec.model_name == "double_well");
    CHECK(cli::run(spec) == 0);
    std::string text = slurp(tf.path);
    CHECK(text.find("time,mean_merged,se_merged,mean_plain,se_plain,var_ratio") !=
          std::string::npos);
    CHECK(text.find("# max_abs_tangent_merged=") != std::string::npos);
}

TEST_CASE("figure presets expand to full or desk configurations") {
    RunSpec f3 = cli::parse_config({"figure3", "--desk"});
    CHECK(f3.subcommand == "tail");
    CHECK(f3.sim.n_replicas == 100000);
    REQUIRE(f3.sweep.has_value());
    CHECK(f3.sweep->values().size() == 4);

    RunSpec f5 = cli::parse_config({"figure5"});
    CHECK(f5.subcommand == "merge-compare");
    CHECK(f5.batches == 1000);
    CHECK(f5.batch_size == 1000);
    CHECK(f5.model_params.at("c") == 2.9);

    RunSpec f5d = cli::parse_config({"figure5", "--desk", "batches=50"});
    CHECK(f5d.batches == 50);  // explicit flags override the preset
    CHECK(f5d.batch_size == 200);

    RunSpec f1 = cli::parse_config({"figure1"});
    CHECK(f1.subcommand == "sweep");
    CHECK(f1.sweep->values().size() == 30);
}

TEST_CASE("main_entry maps usage errors to exit code 2") {
    std::vector<const char*> argv{"langsens", "bogus-subcommand"};
    CHECK(cli::main_entry(static_cast<int>(argv.size()), const_cast<char**>(argv.data())) == 2);
}

TEST_CASE("pair-contraction on the quadratic model reports slope near -1") {
    TempFile tf("test_cli_pair.csv");
    RunSpec spec = cli::parse_config({"pair-contraction", "model=ou", "t_final=4", "n_pairs=4",
                                      "x=1.0", "y=-1.0", "seed=2", "out=" + tf.path});
    CHECK(cli::run(spec) == 0);
    std::string text = slurp(tf.path);
    auto pos = text.find("slope_last_half=");
    REQUIRE(pos != std::string::npos);
    double slope = std::stod(text.substr(pos + 16));
    CHECK(slope == doctest::Approx(-1.0).epsilon(0.02));
}

TEST_SUITE_END();
