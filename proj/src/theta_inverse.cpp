#include "dlcox/theta_inverse.hpp"

#include "dlcox/distributions.hpp"
#include "dlcox/error.hpp"
#include "dlcox/inference.hpp"
#include "dlcox/parallel.hpp"
#include "dlcox/qp_dual_activeset.hpp"

#include <chrono>
#include <cmath>
#include <limits>

namespace dlcox {

double ridge_lift(Matrix& sigma) {
    const Eigen::Index p = sigma.rows();
    Eigen::LLT<Matrix> llt(sigma);
    bool lift = llt.info() != Eigen::Success;
    if (!lift) {
        Eigen::SelfAdjointEigenSolver<Matrix> eig(sigma, Eigen::EigenvaluesOnly);
        lift = eig.eigenvalues().minCoeff() < 1e-10;
    }
    if (!lift) return 0.0;
    double eps = 1e-8 * sigma.trace() / static_cast<double>(p);
    if (!(eps > 0.0)) eps = 1e-8;
    sigma.diagonal().array() += eps;
    return eps;
}

ThetaHat estimate_theta(const Matrix& sigma_in, double gamma, const ThetaOptions& opts) {
    if (!(gamma >= 0.0)) throw Error(ErrorCode::InvalidArgument, "gamma must be >= 0");
    if (sigma_in.rows() != sigma_in.cols()) throw Error(ErrorCode::DimensionMismatch, "sigma must be square");
    Matrix sigma = sigma_in;
    ThetaHat theta;
    theta.gamma = gamma;
    theta.ridge = ridge_lift(sigma);

    const Eigen::Index p = sigma.rows();
    const QpFactor factor = theta_row_factor(sigma);
    theta.matrix.resize(p, p);
    theta.row_kkt.resize(p);
    theta.row_active.assign(static_cast<std::size_t>(p), 0);
    theta.row_seconds.assign(static_cast<std::size_t>(p), 0.0);
    parallel_for(static_cast<std::size_t>(p), opts.threads, [&](std::size_t j) {
        const auto start = std::chrono::steady_clock::now();
        ThetaRowResult row;
        try {
            row = solve_theta_row(factor, sigma, static_cast<Eigen::Index>(j), gamma, opts.tol);
        } catch (const Error& e) {
            throw Error(e.code(), "row " + std::to_string(j) + ": " + e.what());
        }
        theta.matrix.row(static_cast<Eigen::Index>(j)) = row.m.transpose();
        theta.row_kkt[static_cast<Eigen::Index>(j)] = row.kkt_residual;
        theta.row_active[j] = row.active_count;
        theta.row_seconds[j] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    });
    return theta;
}

ThetaHat estimate_theta(const SigmaHat& sigma, double gamma, const ThetaOptions& opts) {
    return estimate_theta(sigma.matrix, gamma, opts);
}

ThresholdDenominator parse_threshold_denominator(const std::string& s) {
    if (s == "sqrt-diag" || s == "sqrt_diag") return ThresholdDenominator::sqrt_diag;
    if (s == "diag") return ThresholdDenominator::diag;
    throw Error(ErrorCode::InvalidArgument, "unknown threshold denominator '" + s + "'");
}

Vector hard_threshold(const Vector& b, const ThetaHat& theta, Eigen::Index n, double alpha,
                      ThresholdDenominator den) {
    const Eigen::Index p = b.size();
    if (theta.matrix.rows() != p) throw Error(ErrorCode::DimensionMismatch, "theta and b disagree");
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::InvalidArgument, "alpha must be in (0, 1)");
    const double cutoff = dist::normal_upper_quantile(alpha / (2.0 * static_cast<double>(p)));
    const double root_n = std::sqrt(static_cast<double>(n));
    Vector out = Vector::Zero(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        const double djj = theta.matrix(j, j);
        if (!(djj > 0.0)) {
            throw Error(ErrorCode::NonPositiveDiagonal, "Theta(" + std::to_string(j) + "," + std::to_string(j) +
                                                            ") = " + std::to_string(djj));
        }
        const double scale = den == ThresholdDenominator::sqrt_diag ? std::sqrt(djj) : djj;
        if (root_n * std::abs(b[j]) / scale > cutoff) out[j] = b[j];
    }
    return out;
}

std::vector<double> default_gamma_grid(Eigen::Index n, Eigen::Index p) {
    static constexpr double kMultipliers[] = {0.05, 0.1, 0.2, 0.3, 0.5, 0.75, 1.0, 1.5, 2.0};
    const double base = std::sqrt(std::log(static_cast<double>(std::max<Eigen::Index>(p, 2))) /
                                  static_cast<double>(n));
    std::vector<double> grid;
    for (double m : kMultipliers) {
        if (m * base < 1.0) grid.push_back(m * base);
    }
    if (grid.empty()) grid.push_back(0.05 * base < 1.0 ? 0.05 * base : 0.5);
    return grid;
}

SigmaHat default_sigma_builder(const SurvivalDataset& ds, const Vector& beta) {
    return CoxData(ds).sigma_hat(beta);
}

TrainingFit lasso_training_fit(double lambda, LassoOptions opts) {
    return [lambda, opts](const SurvivalDataset& train) {
        return fit_lasso(CoxData(train), lambda, Vector::Zero(train.p()), opts).beta;
    };
}

GammaCurve cv_gamma(const SurvivalDataset& ds, const std::vector<double>& gamma_grid, const TrainingFit& fit,
                    const GammaCvOptions& opts, const SigmaBuilder& sigma_builder) {
    require_valid(ds);
    if (gamma_grid.empty()) throw Error(ErrorCode::InvalidArgument, "empty gamma grid");
    for (std::size_t g = 0; g < gamma_grid.size(); ++g) {
        if (!(gamma_grid[g] >= 0.0) || (g > 0 && gamma_grid[g] < gamma_grid[g - 1])) {
            throw Error(ErrorCode::InvalidArgument, "gamma grid must be nonnegative and ascending");
        }
    }
    const auto folds = fold_assignment(ds.n(), opts.folds, opts.seed);
    std::vector<std::vector<double>> fold_losses(static_cast<std::size_t>(opts.folds));

    parallel_for(static_cast<std::size_t>(opts.folds), opts.threads, [&](std::size_t k) {
        std::vector<Eigen::Index> train_rows, test_rows;
        for (Eigen::Index i = 0; i < ds.n(); ++i) {
            (folds[i] == static_cast<int>(k) ? test_rows : train_rows).push_back(i);
        }
        const auto train = subset_rows(ds, train_rows);
        if (train.event_count() == 0) {
            throw Error(ErrorCode::FoldWithoutEvents, "training set for fold " + std::to_string(k) + " has no events");
        }
        const CoxData train_data(train);
        const CoxData test_data(subset_rows(ds, test_rows));
        const Vector beta = fit(train);
        Vector grad;
        train_data.value_and_score(beta, grad);
        const SigmaHat sigma = sigma_builder(train, beta);
        ThetaOptions theta_opts = opts.theta;
        theta_opts.threads = 1;
        auto& out = fold_losses[k];
        out.resize(gamma_grid.size());
        for (std::size_t g = 0; g < gamma_grid.size(); ++g) {
            const ThetaHat theta = estimate_theta(sigma, gamma_grid[g], theta_opts);
            const Vector b = debias(beta, theta.matrix, grad);
            try {
                const Vector thresholded = hard_threshold(b, theta, train.n(), opts.alpha, opts.denominator);
                out[g] = static_cast<double>(test_data.n()) * test_data.value(thresholded);
            } catch (const Error& e) {
                // A row collapsing to a non-positive diagonal rules this gamma out.
                if (e.code() != ErrorCode::NonPositiveDiagonal) throw;
                out[g] = std::numeric_limits<double>::infinity();
            }
        }
    });

    GammaCurve curve;
    curve.grid = gamma_grid;
    curve.fold_count = opts.folds;
    curve.alpha = opts.alpha;
    curve.seed = opts.seed;
    curve.losses.assign(gamma_grid.size(), 0.0);
    for (const auto& fl : fold_losses) {
        for (std::size_t g = 0; g < gamma_grid.size(); ++g) curve.losses[g] += fl[g];
    }
    curve.chosen = argmin_first(curve.losses);
    return curve;
}

}  // namespace dlcox
