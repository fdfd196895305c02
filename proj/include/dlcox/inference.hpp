#pragma once

#include "dlcox/theta_inverse.hpp"

#include <string>
#include <vector>

namespace dlcox {

/// One-step bias correction b = beta_hat - Theta * score(beta_hat).
Vector debias(const Vector& beta_hat, const Matrix& theta, const Vector& grad);

struct Interval {
    double lower = 0.0;
    double upper = 0.0;

    bool contains(double v) const { return lower <= v && v <= upper; }
    double center() const { return 0.5 * (lower + upper); }
};

struct CoefficientRow {
    std::string label;
    double estimate = 0.0;
    double se = 0.0;
    double statistic = 0.0;
    double p_value = 1.0;
    Interval ci;
};

struct DebiasedInference {
    Vector b;
    Matrix theta;
    Eigen::Index n = 0;
    double alpha = 0.05;
    std::vector<CoefficientRow> per_coord;
};

/// Per-coordinate estimates with SE = sqrt(Theta_jj / n). Throws
/// NonPositiveVariance when a diagonal entry is not positive.
DebiasedInference make_inference(const Vector& b, const Matrix& theta, Eigen::Index n, double alpha,
                                 std::vector<std::string> labels = {});

/// c' Theta c with Theta used as given (not symmetrized).
double loading_variance(const Vector& c, const Matrix& theta);

/// Relative asymmetry of Theta seen through c:
///   sum_ij |c_i c_j| |Theta_ij - Theta_ji| / |c' Theta c|.
double loading_asymmetry(const Vector& c, const Matrix& theta);

Interval ci_linear(const Vector& b, const Matrix& theta, Eigen::Index n, const Vector& c, double alpha);

struct LinearTest {
    Vector c;
    double a0 = 0.0;
    double estimate = 0.0;  // c'b
    double se = 0.0;
    double statistic = 0.0;
    double p_value = 1.0;
    double alpha = 0.05;
    bool reject = false;
    Interval ci;
    bool asymmetry_warning = false;
};

/// T = sqrt(n) (c'b - a0) / sqrt(c' Theta c); rejects iff |T| > z_{alpha/2}.
LinearTest wald_test(const Vector& b, const Matrix& theta, Eigen::Index n, const Vector& c, double a0, double alpha);

struct MultiTest {
    Matrix A;
    Vector a0;
    double statistic = 0.0;
    int df = 0;
    double p_value = 1.0;
    double alpha = 0.05;
    double critical = 0.0;
    bool reject = false;
};

/// T' = n (A b - a0)' F^{-1} (A b - a0) with F = A Theta A'; chi-square with l = rows(A) df.
MultiTest chisq_test(const Vector& b, const Matrix& theta, Eigen::Index n, const Matrix& A, const Vector& a0,
                     double alpha);

/// Membership of a in the chi-square confidence region for A beta.
bool region_contains(const Vector& b, const Matrix& theta, Eigen::Index n, const Matrix& A, const Vector& a,
                     double alpha);

/// Coefficient table rows; with sort_by_p the rows are stably ordered by p-value.
std::vector<CoefficientRow> report_table(const DebiasedInference& inf, const std::vector<std::string>& labels,
                                         bool sort_by_p = false);

}  // namespace dlcox
