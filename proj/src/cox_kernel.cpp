#include "dlcox/cox_kernel.hpp"

#include "dlcox/error.hpp"

#include <cmath>
#include <limits>

namespace dlcox {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    const double hi = std::max(a, b);
    return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

}  // namespace

struct CoxData::Pass {
    Vector lp;       // linear predictor, sorted order
    Vector log_s0;   // per tie group: log sum_{risk set} exp(lp)
    Matrix etabar;   // p x G, risk-weighted covariate mean (only if requested)
};

CoxData::CoxData(const SurvivalDataset& ds) : CoxData(ds, risk_index(ds)) {}

CoxData::CoxData(const SurvivalDataset& ds, const RiskIndex& index) {
    const Eigen::Index n = ds.n();
    const Eigen::Index p = ds.p();
    xt_.resize(p, n);
    status_.resize(n);
    group_.resize(n);
    event_x_sum_ = Vector::Zero(p);
    for (Eigen::Index k = 0; k < n; ++k) {
        const Eigen::Index i = index.order[k];
        xt_.col(k) = ds.covariates.row(i).transpose();
        status_[k] = ds.status[i];
        group_[k] = index.group_of[k];
        if (status_[k] == 1) {
            event_x_sum_ += xt_.col(k);
            ++event_count_;
        }
    }
    for (const auto& g : index.tie_groups) {
        group_start_.push_back(g.start);
        group_events_.push_back(g.events);
    }
}

CoxData::Pass CoxData::backward_pass(const Vector& beta, bool need_first) const {
    if (beta.size() != p()) {
        throw Error(ErrorCode::DimensionMismatch,
                    "beta has " + std::to_string(beta.size()) + " entries, expected " + std::to_string(p()));
    }
    Pass pass;
    pass.lp.noalias() = xt_.transpose() * beta;
    if (!pass.lp.allFinite()) throw Error(ErrorCode::NonFiniteLinearPredictor, "X beta is not finite");

    const auto groups = static_cast<Eigen::Index>(group_start_.size());
    pass.log_s0.resize(groups);
    if (need_first) pass.etabar.resize(p(), groups);

    // Running sums are kept relative to the running maximum of the linear predictor.
    double shift = kNegInf;
    double s0 = 0.0;
    Vector s1 = Vector::Zero(need_first ? p() : 0);
    Eigen::Index k = n();
    for (Eigen::Index g = groups - 1; g >= 0; --g) {
        for (; k > group_start_[g];) {
            --k;
            const double v = pass.lp[k];
            if (v > shift) {
                const double rescale = shift == kNegInf ? 0.0 : std::exp(shift - v);
                s0 *= rescale;
                if (need_first) s1 *= rescale;
                shift = v;
            }
            const double w = std::exp(v - shift);
            s0 += w;
            if (need_first) s1.noalias() += w * xt_.col(k);
        }
        pass.log_s0[g] = shift + std::log(s0);
        if (need_first) pass.etabar.col(g) = s1 / s0;
    }
    return pass;
}

double CoxData::value(const Vector& beta) const {
    const Pass pass = backward_pass(beta, false);
    const double log_n = std::log(static_cast<double>(n()));
    double sum = 0.0;
    for (Eigen::Index k = 0; k < n(); ++k) {
        if (status_[k] == 1) sum += pass.lp[k] - (pass.log_s0[group_[k]] - log_n);
    }
    return -sum / static_cast<double>(n());
}

double CoxData::value_and_score(const Vector& beta, Vector& score) const {
    const Pass pass = backward_pass(beta, true);
    const double log_n = std::log(static_cast<double>(n()));
    const double inv_n = 1.0 / static_cast<double>(n());
    double sum = 0.0;
    for (Eigen::Index k = 0; k < n(); ++k) {
        if (status_[k] == 1) sum += pass.lp[k] - (pass.log_s0[group_[k]] - log_n);
    }
    Vector weighted = Vector::Zero(p());
    for (std::size_t g = 0; g < group_events_.size(); ++g) {
        if (group_events_[g] > 0) {
            weighted.noalias() += static_cast<double>(group_events_[g]) * pass.etabar.col(static_cast<Eigen::Index>(g));
        }
    }
    score = -(event_x_sum_ - weighted) * inv_n;
    return -sum * inv_n;
}

KernelEval CoxData::evaluate(const Vector& beta) const {
    const Pass pass = backward_pass(beta, true);
    const double log_n = std::log(static_cast<double>(n()));
    const double inv_n = 1.0 / static_cast<double>(n());

    KernelEval out;
    double sum = 0.0;
    for (Eigen::Index k = 0; k < n(); ++k) {
        if (status_[k] == 1) sum += pass.lp[k] - (pass.log_s0[group_[k]] - log_n);
    }
    out.value = -sum * inv_n;

    // sum_i d_i mu2/mu0 at Y_i = sum_j c_j x_j x_j' with
    // c_j = exp(lp_j) * sum_{event groups g at or before j's group} d_g / S0_g.
    const auto groups = static_cast<Eigen::Index>(group_start_.size());
    Vector log_acc(groups);
    double acc = kNegInf;
    Eigen::Index event_groups = 0;
    for (Eigen::Index g = 0; g < groups; ++g) {
        if (group_events_[g] > 0) {
            acc = log_add(acc, std::log(static_cast<double>(group_events_[g])) - pass.log_s0[g]);
            ++event_groups;
        }
        log_acc[g] = acc;
    }
    Matrix weighted_x(p(), n());
    for (Eigen::Index k = 0; k < n(); ++k) {
        const double la = log_acc[group_[k]];
        const double c = la == kNegInf ? 0.0 : std::exp(0.5 * (pass.lp[k] + la));
        weighted_x.col(k) = c * xt_.col(k);
    }
    Matrix centers(p(), event_groups);
    Vector weighted_mean = Vector::Zero(p());
    Eigen::Index col = 0;
    for (Eigen::Index g = 0; g < groups; ++g) {
        if (group_events_[g] == 0) continue;
        const double d = static_cast<double>(group_events_[g]);
        centers.col(col++) = std::sqrt(d) * pass.etabar.col(g);
        weighted_mean.noalias() += d * pass.etabar.col(g);
    }
    Matrix h = Matrix::Zero(p(), p());
    h.selfadjointView<Eigen::Lower>().rankUpdate(weighted_x, inv_n);
    h.selfadjointView<Eigen::Lower>().rankUpdate(centers, -inv_n);
    out.hessian = h.selfadjointView<Eigen::Lower>();
    out.gradient = -(event_x_sum_ - weighted_mean) * inv_n;
    return out;
}

SigmaHat CoxData::sigma_hat(const Vector& beta) const {
    const Pass pass = backward_pass(beta, true);
    Matrix resid(p(), event_count_);
    Eigen::Index col = 0;
    for (Eigen::Index k = 0; k < n(); ++k) {
        if (status_[k] == 1) resid.col(col++) = xt_.col(k) - pass.etabar.col(group_[k]);
    }
    Matrix s = Matrix::Zero(p(), p());
    s.selfadjointView<Eigen::Lower>().rankUpdate(resid, 1.0 / static_cast<double>(n()));
    return {Matrix(s.selfadjointView<Eigen::Lower>()), beta};
}

Vector CoxData::score_at_zero() const {
    Vector g;
    value_and_score(Vector::Zero(p()), g);
    return g;
}

MomentSet moments(const SurvivalDataset& ds, const RiskIndex& index, const Vector& beta, double t) {
    (void)index;
    if (beta.size() != ds.p()) throw Error(ErrorCode::DimensionMismatch, "beta length differs from p");
    const Vector lp = ds.covariates * beta;
    if (!lp.allFinite()) throw Error(ErrorCode::NonFiniteLinearPredictor, "X beta is not finite");
    double shift = kNegInf;
    for (Eigen::Index j = 0; j < ds.n(); ++j) {
        if (ds.times[j] >= t) shift = std::max(shift, lp[j]);
    }
    if (shift == kNegInf) {
        throw Error(ErrorCode::EmptyRiskSet, "no subject at risk at t = " + std::to_string(t));
    }
    double s0 = 0.0;
    Vector s1 = Vector::Zero(ds.p());
    Matrix s2 = Matrix::Zero(ds.p(), ds.p());
    for (Eigen::Index j = 0; j < ds.n(); ++j) {
        if (ds.times[j] < t) continue;
        const double w = std::exp(lp[j] - shift);
        const auto x = ds.covariates.row(j).transpose();
        s0 += w;
        s1.noalias() += w * x;
        s2.selfadjointView<Eigen::Lower>().rankUpdate(x, w);
    }
    MomentSet m;
    const double scale = std::exp(shift) / static_cast<double>(ds.n());
    m.mu0 = s0 * scale;
    m.mu1 = s1 * scale;
    m.mu2 = Matrix(s2.selfadjointView<Eigen::Lower>()) * scale;
    m.eta = s1 / s0;
    m.at_time = t;
    m.at_beta = beta;
    return m;
}

double neg_log_partial_likelihood(const SurvivalDataset& ds, const RiskIndex& index, const Vector& beta) {
    return CoxData(ds, index).value(beta);
}

Vector score(const SurvivalDataset& ds, const RiskIndex& index, const Vector& beta) {
    Vector g;
    CoxData(ds, index).value_and_score(beta, g);
    return g;
}

Matrix hessian(const SurvivalDataset& ds, const RiskIndex& index, const Vector& beta) {
    return CoxData(ds, index).evaluate(beta).hessian;
}

SigmaHat sigma_hat(const SurvivalDataset& ds, const RiskIndex& index, const Vector& beta_hat) {
    return CoxData(ds, index).sigma_hat(beta_hat);
}

}  // namespace dlcox
