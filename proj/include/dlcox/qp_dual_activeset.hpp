#pragma once

#include "dlcox/data_model.hpp"

#include <vector>

namespace dlcox {

/// minimize 0.5 x'Qx + d'x  subject to  C x >= b  (rows of C are constraint normals).
struct QpProblem {
    Matrix Q;
    Vector d;
    Matrix C;
    Vector b;
};

struct QpSolution {
    Vector x;
    double objective = 0.0;
    std::vector<Eigen::Index> active_set;
    Vector multipliers;  // aligned with active_set, all >= 0
    double kkt_residual = 0.0;
    int active_set_changes = 0;

    /// Multipliers expanded to one entry per constraint row.
    Vector full_multipliers(Eigen::Index constraint_count) const;
};

struct KktReport {
    double stationarity = 0.0;       // ||Qx + d - C'mu||_inf
    double min_slack = 0.0;          // min(Cx - b); negative means infeasible
    double complementarity = 0.0;    // max |mu_i (Cx - b)_i|
    double min_multiplier = 0.0;

    /// Largest violation across stationarity, feasibility, complementarity and dual sign.
    double max_violation() const;
};

/// Cholesky-derived factor of Q shared across solves with the same Q.
/// Holds J0 = L^{-T} with Q = L L'.
class QpFactor {
public:
    explicit QpFactor(const Matrix& q);

    const Matrix& q() const { return q_; }
    const Matrix& inverse_transpose_factor() const { return j0_; }
    Vector solve(const Vector& rhs) const { return llt_.solve(rhs); }

private:
    Matrix q_;
    Eigen::LLT<Matrix> llt_;
    Matrix j0_;
};

/// Dual active-set method: starts at the unconstrained minimum -Q^{-1} d and
/// adds the most violated constraint one at a time while keeping the
/// multipliers dual feasible. max_changes <= 0 selects 50 * dim.
QpSolution solve_qp(const QpProblem& prob, double tol = 1e-10, int max_changes = 0);
QpSolution solve_qp(const QpFactor& factor, const Vector& d, const Matrix& c, const Vector& b,
                    double tol = 1e-10, int max_changes = 0);

KktReport kkt_check(const QpProblem& prob, const QpSolution& sol);

struct ThetaRowResult {
    Vector m;
    Eigen::Index active_count = 0;
    int active_set_changes = 0;
    double kkt_residual = 0.0;
};

/// Row problem for the inverse information estimate:
///   minimize m' S m  subject to  ||S m - e_j||_inf <= gamma,
/// written as the 2p inequalities +/-(S m - e_j) >= -gamma. gamma = 0 is solved
/// directly as S m = e_j.
ThetaRowResult solve_theta_row(const QpFactor& factor, const Matrix& sigma, Eigen::Index j, double gamma,
                               double tol = 1e-10);
Vector solve_theta_row(const Matrix& sigma, Eigen::Index j, double gamma, double tol = 1e-10);

/// Factor for the row problems: Q = 2 * sigma.
QpFactor theta_row_factor(const Matrix& sigma);

}  // namespace dlcox
