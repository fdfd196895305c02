#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace dlcox::cli {

enum ExitCode : int {
    kOk = 0,
    kParseError = 2,
    kDataError = 3,
    kSolverError = 4,
    kQpError = 5,
};

struct DataArgs {
    std::string path;
    std::string time_col = "time";
    std::string status_col = "status";
    std::string standardize = "none";
};

struct FitArgs {
    DataArgs data;
    std::optional<double> lambda;
    int folds = 10;
    std::uint64_t seed = 1;
    int threads = 0;
    std::string out = ".";
};

struct InferArgs {
    FitArgs fit;
    std::optional<double> gamma;
    int gamma_folds = 5;
    double alpha = 0.05;
    double threshold_alpha = 0.1;
    std::string threshold_denominator = "sqrt-diag";
    std::vector<std::string> contrasts;
    std::vector<std::string> joints;
    bool sort_by_p = false;
    bool write_theta = false;
};

struct SimulateArgs {
    std::string config;
    std::optional<int> replications;
    std::optional<std::uint64_t> seed;
    int threads = 0;
    std::string out = ".";
};

struct BenchArgs {
    std::vector<int> p_grid{20, 50, 100};
    std::vector<double> gamma_multipliers{0.3, 1.0, 2.0};
    int repetitions = 10;
    int n = 500;
    double rho = 0.5;
    std::uint64_t seed = 1;
    int threads = 1;
    std::string out = ".";
    bool row_csv = false;
};

int cmd_fit(const FitArgs& args, const std::vector<std::string>& argv);
int cmd_infer(const InferArgs& args, const std::vector<std::string>& argv);
int cmd_simulate(const SimulateArgs& args, const std::vector<std::string>& argv);
int cmd_bench_qp(const BenchArgs& args, const std::vector<std::string>& argv);

}  // namespace dlcox::cli
