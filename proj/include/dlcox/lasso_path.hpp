#pragma once

#include "dlcox/cox_kernel.hpp"

#include <cstdint>
#include <vector>

namespace dlcox {

struct CoxFit {
    Vector beta;
    double lambda = 0.0;
    double objective = 0.0;  // l_n(beta) + lambda * |beta|_1
    int iterations = 0;
    bool converged = false;
    double tol = 0.0;
    double kkt_residual = 0.0;
    std::vector<double> objective_history;  // after each outer iteration
};

struct LassoOptions {
    double tol = 1e-7;
    int max_iter = 200;
};

struct MpleOptions {
    double tol = 1e-9;
    int max_iter = 200;
    /// Spread of the linear predictor beyond which the fit is declared divergent.
    double divergence_bound = 60.0;
};

/// Largest violation of the lasso stationarity conditions:
///   |g_j + lambda sign(b_j)| for b_j != 0,  max(|g_j| - lambda, 0) for b_j = 0.
double lasso_kkt_residual(const Vector& beta, const Vector& gradient, double lambda);

/// Proximal Newton: quadratic model of l_n at the current iterate minimized by
/// cyclic soft-thresholded coordinate descent, followed by an Armijo line search
/// on the penalized objective. Hitting max_iter returns the best iterate with
/// converged = false.
CoxFit fit_lasso(const CoxData& data, double lambda, const Vector& init, const LassoOptions& opts = {});
CoxFit fit_lasso(const SurvivalDataset& ds, double lambda, const Vector& init, const LassoOptions& opts = {});

/// Damped Newton with step halving. Throws SingularHessian or MonotoneLikelihood.
CoxFit fit_mple(const CoxData& data, const MpleOptions& opts = {});
CoxFit fit_mple(const SurvivalDataset& ds, const MpleOptions& opts = {});

/// count log-spaced values from ||score(0)||_inf down to ratio * that.
std::vector<double> lambda_grid(const CoxData& data, int count, double ratio);
std::vector<double> lambda_grid(const SurvivalDataset& ds, int count = 50, double ratio = 0.01);

/// Fits along a grid with warm starts.
std::vector<CoxFit> fit_lasso_path(const CoxData& data, const std::vector<double>& grid,
                                   const LassoOptions& opts = {});

enum class CvLoss {
    held_out,          // n_k * l^(k) on the test fold alone
    verweij_houwelingen,  // n * l_n(b_-k) - n_-k * l_-k(b_-k)
};

struct CvCurve {
    std::vector<double> grid;
    std::vector<double> losses;
    int fold_count = 0;
    std::size_t chosen = 0;
    std::uint64_t seed = 0;

    double chosen_lambda() const { return grid.at(chosen); }
};

struct CvOptions {
    int folds = 10;
    std::uint64_t seed = 1;
    CvLoss loss = CvLoss::held_out;
    LassoOptions lasso;
    int threads = 0;
};

/// Fold id per subject: a seeded permutation dealt round-robin into K folds.
std::vector<int> fold_assignment(Eigen::Index n, int folds, std::uint64_t seed);

/// Index of the minimum; ties resolve to the earliest index.
std::size_t argmin_first(const std::vector<double>& values);

CvCurve cv_lambda(const SurvivalDataset& ds, const std::vector<double>& grid, const CvOptions& opts = {});

}  // namespace dlcox
