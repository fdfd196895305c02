#pragma once

#include "dlcox/cox_kernel.hpp"
#include "dlcox/lasso_path.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace dlcox {

/// Row-wise QP estimate of the inverse information matrix. Rows are the
/// independent row-problem solutions; the matrix is not symmetrized.
struct ThetaHat {
    Matrix matrix;
    double gamma = 0.0;
    double ridge = 0.0;  // epsilon added to the diagonal of sigma before solving
    Vector row_kkt;
    std::vector<Eigen::Index> row_active;
    std::vector<double> row_seconds;

    double max_row_kkt() const { return row_kkt.size() ? row_kkt.maxCoeff() : 0.0; }
};

struct ThetaOptions {
    double tol = 1e-10;
    int threads = 0;
};

/// Lifts sigma by eps * I, eps = 1e-8 * trace / p, when its Cholesky factor
/// fails or its smallest eigenvalue is below 1e-10; returns the eps used.
double ridge_lift(Matrix& sigma);

ThetaHat estimate_theta(const Matrix& sigma, double gamma, const ThetaOptions& opts = {});
ThetaHat estimate_theta(const SigmaHat& sigma, double gamma, const ThetaOptions& opts = {});

/// Standardized-statistic denominator used when hard thresholding.
enum class ThresholdDenominator {
    sqrt_diag,  // sqrt(Theta_jj), the standard error scale
    diag,       // Theta_jj, as the thresholding rule is sometimes written
};

ThresholdDenominator parse_threshold_denominator(const std::string& s);

/// Keeps b_j iff sqrt(n) |b_j| / den(Theta_jj) > z_{alpha / (2p)}, else 0.
Vector hard_threshold(const Vector& b, const ThetaHat& theta, Eigen::Index n, double alpha,
                      ThresholdDenominator den = ThresholdDenominator::sqrt_diag);

/// {0.05, 0.1, 0.2, 0.3, 0.5, 0.75, 1, 1.5, 2} * sqrt(log p / n), dropping values >= 1.
std::vector<double> default_gamma_grid(Eigen::Index n, Eigen::Index p);

struct GammaCurve {
    std::vector<double> grid;
    std::vector<double> losses;
    int fold_count = 0;
    double alpha = 0.0;
    std::size_t chosen = 0;
    std::uint64_t seed = 0;

    double chosen_gamma() const { return grid.at(chosen); }
};

using SigmaBuilder = std::function<SigmaHat(const SurvivalDataset&, const Vector&)>;
using TrainingFit = std::function<Vector(const SurvivalDataset&)>;

struct GammaCvOptions {
    int folds = 5;
    double alpha = 0.1;
    std::uint64_t seed = 1;
    ThresholdDenominator denominator = ThresholdDenominator::sqrt_diag;
    ThetaOptions theta;
    int threads = 0;
};

/// Sigma-hat of the training data at its lasso fit (the default builder).
SigmaHat default_sigma_builder(const SurvivalDataset& ds, const Vector& beta);

/// Lasso fit at a fixed lambda, used as the default training-fold fit.
TrainingFit lasso_training_fit(double lambda, LassoOptions opts = {});

/// For each gamma and fold: fit on the other folds, build Theta, debias,
/// hard threshold, and score the thresholded vector by n_k * l^(k) on the
/// held-out fold. Ties resolve to the smaller gamma.
GammaCurve cv_gamma(const SurvivalDataset& ds, const std::vector<double>& gamma_grid, const TrainingFit& fit,
                    const GammaCvOptions& opts = {}, const SigmaBuilder& sigma_builder = default_sigma_builder);

}  // namespace dlcox
