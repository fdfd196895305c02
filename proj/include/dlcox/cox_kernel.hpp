#pragma once

#include "dlcox/data_model.hpp"

namespace dlcox {

/// Risk-set moments at a single time t:
///   mu_r(t; beta) = n^-1 sum_j 1(Y_j >= t) X_j^{(x)r} exp(X_j' beta),  r = 0, 1, 2
/// and eta = mu1 / mu0, the risk-weighted covariate average.
struct MomentSet {
    double mu0 = 0.0;
    Vector mu1;
    Matrix mu2;
    Vector eta;
    double at_time = 0.0;
    Vector at_beta;
};

struct KernelEval {
    double value = 0.0;
    Vector gradient;
    Matrix hessian;
};

struct SigmaHat {
    Matrix matrix;
    Vector at_beta;
};

/// Time-sorted, cache-friendly copy of a dataset used by every partial
/// likelihood evaluation. Covariates are stored transposed (p x n) so that a
/// subject's vector is contiguous.
class CoxData {
public:
    CoxData(const SurvivalDataset& ds, const RiskIndex& index);
    explicit CoxData(const SurvivalDataset& ds);

    Eigen::Index n() const { return xt_.cols(); }
    Eigen::Index p() const { return xt_.rows(); }
    Eigen::Index events() const { return event_count_; }

    /// Negative log partial likelihood (Breslow ties, averaged over n).
    double value(const Vector& beta) const;
    /// Value and score in one backward pass.
    double value_and_score(const Vector& beta, Vector& score) const;
    /// Value, score and Hessian.
    KernelEval evaluate(const Vector& beta) const;
    SigmaHat sigma_hat(const Vector& beta) const;

    Vector score_at_zero() const;
    /// X beta in time-sorted order.
    Vector linear_predictor(const Vector& beta) const { return xt_.transpose() * beta; }

private:
    struct Pass;
    Pass backward_pass(const Vector& beta, bool need_first) const;

    Matrix xt_;                        // p x n, sorted by time
    std::vector<int> status_;          // sorted
    std::vector<Eigen::Index> group_;  // sorted position -> tie group
    std::vector<Eigen::Index> group_start_;
    std::vector<Eigen::Index> group_events_;
    Vector event_x_sum_;               // sum of X_i over events
    Eigen::Index event_count_ = 0;
};

MomentSet moments(const SurvivalDataset& ds, const RiskIndex& index, const Vector& beta, double t);
double neg_log_partial_likelihood(const SurvivalDataset& ds, const RiskIndex& index, const Vector& beta);
Vector score(const SurvivalDataset& ds, const RiskIndex& index, const Vector& beta);
Matrix hessian(const SurvivalDataset& ds, const RiskIndex& index, const Vector& beta);
SigmaHat sigma_hat(const SurvivalDataset& ds, const RiskIndex& index, const Vector& beta_hat);

}  // namespace dlcox
