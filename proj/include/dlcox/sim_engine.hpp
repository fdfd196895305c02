#pragma once

#include "dlcox/inference.hpp"
#include "dlcox/lasso_path.hpp"
#include "dlcox/rng.hpp"
#include "dlcox/theta_inverse.hpp"

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace dlcox {

enum class CovStructure { independent, ar1 };
enum class CensoringKind { none, exponential, uniform };

/// Generative scenario: X ~ N(0, Sigma) clipped to +/-truncation,
/// T ~ Exp(exp(X'beta0)), C from the censoring spec, Y = min(T, C).
struct SimConfig {
    Eigen::Index n = 500;
    Eigen::Index p = 100;
    Vector beta0;
    CovStructure cov = CovStructure::independent;
    double rho = 0.0;
    double truncation = 2.5;  // infinity disables clipping
    CensoringKind censoring = CensoringKind::uniform;
    double kappa = 0.2;       // exponential censoring rate multiplier
    double uniform_a = 1.0;
    double uniform_b = 20.0;
    std::uint64_t seed = 1;
};

void validate_config(const SimConfig& cfg);

/// beta1 at index 0 and (1, 1, 0.5, 0.5) at indices p/5, 2p/5, 3p/5, 4p/5; zero elsewhere.
Vector beta0_benchmark(Eigen::Index p, double beta1);
/// (1, 0.3, 0, ..., 0), the gamma-tuning scenario.
Vector beta0_tuning(Eigen::Index p);

/// n x p covariate draw from the configured covariance, optionally clipped.
Matrix draw_covariates(const SimConfig& cfg, Philox& rng, bool truncate = true);

/// Dataset for one replication; the replication index selects the RNG stream.
SurvivalDataset generate_dataset(const SimConfig& cfg, std::uint64_t replication = 0);

/// Competing-exponentials censoring probability kappa / (1 + kappa).
double expected_censoring_exponential(double kappa);

enum class Method { qp_debias, lasso, mple, oracle };
std::string method_name(Method m);
Method parse_method(const std::string& s);

struct Target {
    std::string name;
    Vector c;
};

/// Tuning choices shared by all replications.
struct MethodSettings {
    std::optional<double> lambda;        // fixed lambda; otherwise K-fold CV
    int lambda_folds = 10;
    int lambda_grid_count = 50;
    double lambda_ratio = 0.01;
    std::optional<double> gamma;         // fixed gamma; otherwise K-fold CV over gamma_grid
    std::vector<double> gamma_grid;      // empty: default grid
    std::vector<double> gamma_sweep;     // if nonempty: report qp_debias at each gamma instead
    int gamma_folds = 5;
    double threshold_alpha = 0.1;
    ThresholdDenominator denominator = ThresholdDenominator::sqrt_diag;
    LassoOptions lasso;
    MpleOptions mple;
    double qp_tol = 1e-10;
};

struct ExperimentSpec {
    SimConfig config;
    std::vector<Method> methods{Method::qp_debias};
    std::vector<Target> targets;
    int replications = 200;
    double alpha = 0.05;  // CI level
    MethodSettings settings;
    int threads = 0;
};

struct TargetEstimate {
    double estimate = 0.0;
    double se = std::numeric_limits<double>::quiet_NaN();  // NaN: no model-based SE
    std::optional<bool> covered;
};

struct MethodOutcome {
    std::string method;
    bool failed = false;
    std::string failure;
    std::vector<TargetEstimate> targets;
    double gamma = std::numeric_limits<double>::quiet_NaN();
    double lambda = std::numeric_limits<double>::quiet_NaN();
};

struct ReplicationRecord {
    std::uint64_t replication = 0;
    double censoring_fraction = 0.0;
    std::vector<MethodOutcome> outcomes;
};

struct MetricRow {
    std::string method;
    std::string target;
    double truth = 0.0;
    double bias = 0.0;
    double coverage = std::numeric_limits<double>::quiet_NaN();
    double mean_se = std::numeric_limits<double>::quiet_NaN();
    double empirical_sd = 0.0;
    double mse = 0.0;
    int replications = 0;  // successful replications aggregated
    int failures = 0;
};

struct SimSummary {
    int replications = 0;
    double mean_censoring_fraction = 0.0;
    std::vector<MetricRow> rows;
    std::map<std::string, std::map<std::string, int>> failure_reasons;  // method -> reason -> count
    std::vector<ReplicationRecord> records;

    const MetricRow& row(const std::string& method, const std::string& target) const;
};

/// Bias, coverage, mean SE and MSE of a set of estimates of one truth.
MetricRow aggregate_metrics(const std::string& method, const std::string& target, double truth,
                            const std::vector<TargetEstimate>& estimates, int failures = 0);

SimSummary summarize(const ExperimentSpec& spec, std::vector<ReplicationRecord> records);

ReplicationRecord run_replication(const ExperimentSpec& spec, std::uint64_t replication);
SimSummary run_replications(const ExperimentSpec& spec);

/// A fit with its model-based covariance of beta_hat (inverse information / n).
struct ModelBasedFit {
    CoxFit fit;
    Matrix covariance;
};

ModelBasedFit fit_mple_with_covariance(const SurvivalDataset& ds, const MpleOptions& opts = {});

/// MPLE restricted to the support columns, embedded back into a p-vector.
ModelBasedFit fit_oracle(const SurvivalDataset& ds, const std::vector<Eigen::Index>& support,
                         const MpleOptions& opts = {});

struct DecompositionDiag {
    double total = 0.0;      // c'(b - beta0)
    double leading = 0.0;    // -c' Theta score(beta0)
    double remainder = 0.0;  // total - leading
};

DecompositionDiag decompose_error(const SurvivalDataset& ds, const Vector& beta0, const Vector& beta_hat,
                                  const Matrix& theta, const Vector& c);

/// Lambda and Theta as configured in spec.settings for one dataset.
struct DebiasedFit {
    double lambda = 0.0;
    Vector beta_hat;
    Vector score;
    ThetaHat theta;
    Vector b;
    std::optional<GammaCurve> gamma_curve;
};

double select_lambda(const SurvivalDataset& ds, const MethodSettings& settings, std::uint64_t seed);
DebiasedFit fit_debiased(const SurvivalDataset& ds, const MethodSettings& settings, std::uint64_t seed);

/// decompose_error over R generated datasets.
std::vector<DecompositionDiag> run_decomposition(const ExperimentSpec& spec, const Vector& c);

/// Per-replication seed for the cross-validation fold draws.
std::uint64_t replication_seed(std::uint64_t seed, std::uint64_t replication);

}  // namespace dlcox
