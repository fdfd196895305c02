#include "dlcox/inference.hpp"

#include "dlcox/distributions.hpp"
#include "dlcox/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dlcox {

namespace {

void check_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw Error(ErrorCode::InvalidArgument, "alpha must be in (0, 1]");
}

void check_dims(const Vector& b, const Matrix& theta) {
    if (theta.rows() != b.size() || theta.cols() != b.size()) {
        throw Error(ErrorCode::DimensionMismatch, "Theta is " + std::to_string(theta.rows()) + "x" +
                                                      std::to_string(theta.cols()) + ", b has " +
                                                      std::to_string(b.size()) + " entries");
    }
}

}  // namespace

Vector debias(const Vector& beta_hat, const Matrix& theta, const Vector& grad) {
    if (grad.size() != beta_hat.size()) throw Error(ErrorCode::DimensionMismatch, "score and beta lengths differ");
    check_dims(beta_hat, theta);
    return beta_hat - theta * grad;
}

double loading_variance(const Vector& c, const Matrix& theta) {
    if (c.size() != theta.rows()) throw Error(ErrorCode::DimensionMismatch, "loading length differs from p");
    return c.dot(theta * c);
}

double loading_asymmetry(const Vector& c, const Matrix& theta) {
    const Vector ac = c.cwiseAbs();
    const double skew = ac.dot((theta - theta.transpose()).cwiseAbs() * ac);
    return skew / std::abs(loading_variance(c, theta));
}

DebiasedInference make_inference(const Vector& b, const Matrix& theta, Eigen::Index n, double alpha,
                                 std::vector<std::string> labels) {
    check_dims(b, theta);
    check_alpha(alpha);
    const Eigen::Index p = b.size();
    if (labels.empty()) {
        for (Eigen::Index j = 0; j < p; ++j) labels.push_back("x" + std::to_string(j + 1));
    }
    if (static_cast<Eigen::Index>(labels.size()) != p) throw Error(ErrorCode::DimensionMismatch, "label count");
    DebiasedInference inf;
    inf.b = b;
    inf.theta = theta;
    inf.n = n;
    inf.alpha = alpha;
    const double z = dist::normal_upper_quantile(alpha / 2.0);
    for (Eigen::Index j = 0; j < p; ++j) {
        const double var = theta(j, j);
        if (!(var > 0.0)) {
            throw Error(ErrorCode::NonPositiveVariance, "Theta(" + std::to_string(j) + "," + std::to_string(j) +
                                                            ") = " + std::to_string(var));
        }
        CoefficientRow row;
        row.label = labels[j];
        row.estimate = b[j];
        row.se = std::sqrt(var / static_cast<double>(n));
        row.statistic = row.estimate / row.se;
        row.p_value = dist::two_sided_p(row.statistic);
        row.ci = {row.estimate - z * row.se, row.estimate + z * row.se};
        inf.per_coord.push_back(std::move(row));
    }
    return inf;
}

Interval ci_linear(const Vector& b, const Matrix& theta, Eigen::Index n, const Vector& c, double alpha) {
    check_dims(b, theta);
    check_alpha(alpha);
    const double var = loading_variance(c, theta);
    if (!(var > 0.0)) throw Error(ErrorCode::NonPositiveVariance, "c' Theta c = " + std::to_string(var));
    const double center = c.dot(b);
    const double half = dist::normal_upper_quantile(alpha / 2.0) * std::sqrt(var / static_cast<double>(n));
    return {center - half, center + half};
}

LinearTest wald_test(const Vector& b, const Matrix& theta, Eigen::Index n, const Vector& c, double a0,
                     double alpha) {
    check_dims(b, theta);
    check_alpha(alpha);
    LinearTest t;
    t.c = c;
    t.a0 = a0;
    t.alpha = alpha;
    const double var = loading_variance(c, theta);
    if (!(var > 0.0)) throw Error(ErrorCode::NonPositiveVariance, "c' Theta c = " + std::to_string(var));
    t.estimate = c.dot(b);
    t.se = std::sqrt(var / static_cast<double>(n));
    t.statistic = std::sqrt(static_cast<double>(n)) * (t.estimate - a0) / std::sqrt(var);
    t.p_value = dist::two_sided_p(t.statistic);
    t.reject = std::abs(t.statistic) > dist::normal_upper_quantile(alpha / 2.0);
    t.ci = ci_linear(b, theta, n, c, alpha);
    t.asymmetry_warning = loading_asymmetry(c, theta) > 1e-3;
    return t;
}

namespace {

double chisq_statistic(const Vector& b, const Matrix& theta, Eigen::Index n, const Matrix& A, const Vector& a) {
    check_dims(b, theta);
    if (A.cols() != b.size() || a.size() != A.rows()) {
        throw Error(ErrorCode::DimensionMismatch, "A must be l x p and a0 of length l");
    }
    Eigen::ColPivHouseholderQR<Matrix> qr(A);
    if (A.rows() == 0 || qr.rank() < A.rows()) {
        throw Error(ErrorCode::RankDeficientA, "A has rank " + std::to_string(qr.rank()) + " < " +
                                                   std::to_string(A.rows()) + " rows");
    }
    const Matrix f = A * theta * A.transpose();
    const Matrix sym = 0.5 * (f + f.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(sym, Eigen::EigenvaluesOnly);
    const double norm = eig.eigenvalues().cwiseAbs().maxCoeff();
    if (!(eig.eigenvalues().minCoeff() > 1e-12 * norm)) {
        throw Error(ErrorCode::NonPdF, "A Theta A' failed the positive-definiteness check");
    }
    const Vector resid = A * b - a;
    return static_cast<double>(n) * resid.dot(f.partialPivLu().solve(resid));
}

}  // namespace

MultiTest chisq_test(const Vector& b, const Matrix& theta, Eigen::Index n, const Matrix& A, const Vector& a0,
                     double alpha) {
    check_alpha(alpha);
    MultiTest t;
    t.A = A;
    t.a0 = a0;
    t.alpha = alpha;
    t.statistic = chisq_statistic(b, theta, n, A, a0);
    t.df = static_cast<int>(A.rows());
    t.p_value = dist::chisq_sf(t.statistic, t.df);
    t.critical = dist::chisq_upper_quantile(alpha, t.df);
    t.reject = t.statistic > t.critical;
    return t;
}

bool region_contains(const Vector& b, const Matrix& theta, Eigen::Index n, const Matrix& A, const Vector& a,
                     double alpha) {
    check_alpha(alpha);
    return chisq_statistic(b, theta, n, A, a) <= dist::chisq_upper_quantile(alpha, static_cast<double>(A.rows()));
}

std::vector<CoefficientRow> report_table(const DebiasedInference& inf, const std::vector<std::string>& labels,
                                         bool sort_by_p) {
    if (labels.size() != inf.per_coord.size()) throw Error(ErrorCode::DimensionMismatch, "label count");
    std::vector<CoefficientRow> rows = inf.per_coord;
    for (std::size_t j = 0; j < rows.size(); ++j) rows[j].label = labels[j];
    if (sort_by_p) {
        std::stable_sort(rows.begin(), rows.end(),
                         [](const CoefficientRow& a, const CoefficientRow& b) { return a.p_value < b.p_value; });
    }
    return rows;
}

}  // namespace dlcox
