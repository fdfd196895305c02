#include "dlcox/qp_dual_activeset.hpp"

#include "dlcox/error.hpp"

#include <cmath>
#include <limits>

namespace dlcox {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Givens {
    double c = 1.0;
    double s = 0.0;

    // Rotation mapping (a, b) to (hypot(a, b), 0).
    static Givens zeroing(double a, double b, double& r) {
        r = std::hypot(a, b);
        if (r == 0.0) return {};
        return {a / r, b / r};
    }

    template <class U, class V>
    void apply(U&& x, V&& y) const {
        for (Eigen::Index k = 0; k < x.size(); ++k) {
            const double xk = x[k];
            const double yk = y[k];
            x[k] = c * xk + s * yk;
            y[k] = -s * xk + c * yk;
        }
    }
};

// Working set of the dual method. With N the matrix of active normals the
// factorization keeps J' Q J = I and J' N = [R; 0], R upper triangular.
class ActiveSetFactor {
public:
    explicit ActiveSetFactor(const Matrix& j0) : j_(j0), r_(Matrix::Zero(j0.rows(), j0.rows())) {}

    Eigen::Index size() const { return q_; }
    Eigen::Index dim() const { return j_.rows(); }

    // Primal step direction z = J2 J2' n and dual direction r = R^{-1} J1' n.
    void directions(const Vector& normal, Vector& dvec, Vector& z, Vector& r) const {
        dvec.noalias() = j_.transpose() * normal;
        z.noalias() = j_.rightCols(dim() - q_) * dvec.tail(dim() - q_);
        r = r_.topLeftCorner(q_, q_).triangularView<Eigen::Upper>().solve(dvec.head(q_));
    }

    void add(Vector dvec) {
        for (Eigen::Index i = dim() - 1; i > q_; --i) {
            double h = 0.0;
            const Givens g = Givens::zeroing(dvec[i - 1], dvec[i], h);
            dvec[i - 1] = h;
            dvec[i] = 0.0;
            g.apply(j_.col(i - 1), j_.col(i));
        }
        r_.col(q_).head(q_ + 1) = dvec.head(q_ + 1);
        ++q_;
    }

    void drop(Eigen::Index l) {
        for (Eigen::Index k = l; k + 1 < q_; ++k) r_.col(k).head(k + 2) = r_.col(k + 1).head(k + 2);
        r_.col(q_ - 1).setZero();
        for (Eigen::Index k = l; k + 1 < q_; ++k) {
            double h = 0.0;
            const Givens g = Givens::zeroing(r_(k, k), r_(k + 1, k), h);
            r_(k, k) = h;
            r_(k + 1, k) = 0.0;
            const Eigen::Index tail = q_ - 2 - k;
            if (tail > 0) g.apply(r_.row(k).segment(k + 1, tail), r_.row(k + 1).segment(k + 1, tail));
            g.apply(j_.col(k), j_.col(k + 1));
        }
        --q_;
    }

private:
    Matrix j_;
    Matrix r_;
    Eigen::Index q_ = 0;
};

}  // namespace

Vector QpSolution::full_multipliers(Eigen::Index constraint_count) const {
    Vector mu = Vector::Zero(constraint_count);
    for (std::size_t k = 0; k < active_set.size(); ++k) mu[active_set[k]] = multipliers[static_cast<Eigen::Index>(k)];
    return mu;
}

double KktReport::max_violation() const {
    return std::max({stationarity, std::max(0.0, -min_slack), complementarity, std::max(0.0, -min_multiplier)});
}

QpFactor::QpFactor(const Matrix& q) : q_(q), llt_(q) {
    if (llt_.info() != Eigen::Success || q.rows() != q.cols()) {
        throw Error(ErrorCode::NotPositiveDefinite, "Cholesky factorization of Q failed");
    }
    const Matrix lower = llt_.matrixL();
    for (Eigen::Index i = 0; i < q.rows(); ++i) {
        if (!(lower(i, i) > 0.0) || !std::isfinite(lower(i, i))) {
            throw Error(ErrorCode::NotPositiveDefinite, "Q has a non-positive pivot");
        }
    }
    const Matrix inv_l = lower.triangularView<Eigen::Lower>().solve(Matrix::Identity(q.rows(), q.rows()));
    j0_ = inv_l.transpose();
}

QpSolution solve_qp(const QpFactor& factor, const Vector& d, const Matrix& c, const Vector& b, double tol,
                    int max_changes) {
    const Eigen::Index n = factor.q().rows();
    const Eigen::Index m = c.rows();
    if (d.size() != n || c.cols() != n || b.size() != m) {
        throw Error(ErrorCode::DimensionMismatch, "QP dimensions disagree");
    }
    if (max_changes <= 0) max_changes = static_cast<int>(50 * std::max<Eigen::Index>(n, 1));

    QpSolution sol;
    sol.x = factor.solve(-d);
    ActiveSetFactor work(factor.inverse_transpose_factor());
    std::vector<Eigen::Index>& active = sol.active_set;
    std::vector<double> u;
    std::vector<char> is_active(static_cast<std::size_t>(m), 0);

    Vector dvec(n), z(n), r;
    Vector slack(m);
    for (;;) {
        // Step 1: most violated inactive constraint.
        slack.noalias() = c * sol.x - b;
        Eigen::Index pick = -1;
        double worst = 0.0;
        for (Eigen::Index i = 0; i < m; ++i) {
            if (is_active[i]) continue;
            const double threshold = -tol * (1.0 + std::abs(b[i]));
            if (slack[i] < threshold && slack[i] < worst) {
                worst = slack[i];
                pick = i;
            }
        }
        if (pick < 0) break;

        const Vector normal = c.row(pick).transpose();
        double u_new = 0.0;
        for (;;) {
            if (sol.active_set_changes >= max_changes) {
                throw Error(ErrorCode::MaxActiveSetChanges,
                            "exceeded " + std::to_string(max_changes) + " active-set changes");
            }
            // Step 2(a): search directions.
            work.directions(normal, dvec, z, r);
            // Step 2(b): partial (dual) and full (primal) step lengths.
            double t1 = kInf;
            Eigen::Index drop = -1;
            for (Eigen::Index k = 0; k < r.size(); ++k) {
                if (r[k] > 0.0) {
                    const double ratio = u[k] / r[k];
                    if (ratio < t1) {
                        t1 = ratio;
                        drop = k;
                    }
                }
            }
            const double tail_norm = dvec.tail(n - work.size()).norm();
            const bool dependent = tail_norm <= 1e-12 * std::max(dvec.norm(), 1e-300);
            double t2 = kInf;
            const double s_pick = normal.dot(sol.x) - b[pick];
            if (!dependent) {
                const double zn = z.dot(normal);
                if (zn > 0.0) t2 = std::max(0.0, -s_pick / zn);
            }
            // Step 2(c).
            if (t1 == kInf && t2 == kInf) {
                throw Error(ErrorCode::Infeasible, "constraint " + std::to_string(pick) +
                                                       " cannot be satisfied with the current active set");
            }
            if (t2 == kInf) {
                for (Eigen::Index k = 0; k < r.size(); ++k) u[k] -= t1 * r[k];
                u_new += t1;
                is_active[active[drop]] = 0;
                active.erase(active.begin() + drop);
                u.erase(u.begin() + drop);
                work.drop(drop);
                ++sol.active_set_changes;
                continue;
            }
            const double t = std::min(t1, t2);
            sol.x += t * z;
            for (Eigen::Index k = 0; k < r.size(); ++k) u[k] -= t * r[k];
            u_new += t;
            if (t2 <= t1) {
                active.push_back(pick);
                u.push_back(u_new);
                is_active[pick] = 1;
                work.add(dvec);
                ++sol.active_set_changes;
                break;
            }
            is_active[active[drop]] = 0;
            active.erase(active.begin() + drop);
            u.erase(u.begin() + drop);
            work.drop(drop);
            ++sol.active_set_changes;
        }
    }

    sol.multipliers = Eigen::Map<const Vector>(u.data(), static_cast<Eigen::Index>(u.size()));
    for (Eigen::Index k = 0; k < sol.multipliers.size(); ++k) sol.multipliers[k] = std::max(0.0, sol.multipliers[k]);
    sol.objective = 0.5 * sol.x.dot(factor.q() * sol.x) + d.dot(sol.x);
    const QpProblem view{factor.q(), d, c, b};
    sol.kkt_residual = kkt_check(view, sol).max_violation();
    return sol;
}

QpSolution solve_qp(const QpProblem& prob, double tol, int max_changes) {
    if (prob.Q.rows() != prob.Q.cols() || (prob.Q - prob.Q.transpose()).lpNorm<Eigen::Infinity>() >
                                              1e-12 * std::max(1.0, prob.Q.lpNorm<Eigen::Infinity>())) {
        throw Error(ErrorCode::NotPositiveDefinite, "Q must be square and symmetric");
    }
    return solve_qp(QpFactor(prob.Q), prob.d, prob.C, prob.b, tol, max_changes);
}

KktReport kkt_check(const QpProblem& prob, const QpSolution& sol) {
    KktReport rep;
    const Eigen::Index m = prob.C.rows();
    const Vector mu = sol.full_multipliers(m);
    Vector stationarity = prob.Q * sol.x + prob.d;
    if (m > 0) stationarity.noalias() -= prob.C.transpose() * mu;
    rep.stationarity = stationarity.lpNorm<Eigen::Infinity>();
    if (m > 0) {
        const Vector slack = prob.C * sol.x - prob.b;
        rep.min_slack = slack.minCoeff();
        rep.complementarity = mu.cwiseProduct(slack).cwiseAbs().maxCoeff();
        rep.min_multiplier = mu.minCoeff();
    }
    return rep;
}

QpFactor theta_row_factor(const Matrix& sigma) { return QpFactor(2.0 * sigma); }

ThetaRowResult solve_theta_row(const QpFactor& factor, const Matrix& sigma, Eigen::Index j, double gamma,
                               double tol) {
    const Eigen::Index p = sigma.rows();
    if (j < 0 || j >= p) throw Error(ErrorCode::InvalidArgument, "row index out of range");
    if (!(gamma >= 0.0)) throw Error(ErrorCode::InvalidArgument, "gamma must be >= 0");
    ThetaRowResult out;
    if (gamma == 0.0) {
        // Equality case: S m = e_j, i.e. 2 S m = 2 e_j.
        out.m = factor.solve(2.0 * Vector::Unit(p, j));
        out.active_count = p;
        out.kkt_residual = (sigma * out.m - Vector::Unit(p, j)).lpNorm<Eigen::Infinity>();
        return out;
    }
    Matrix c(2 * p, p);
    c.topRows(p) = sigma;
    c.bottomRows(p) = -sigma;
    Vector b(2 * p);
    b.head(p).setConstant(-gamma);
    b.tail(p).setConstant(-gamma);
    b[j] += 1.0;
    b[p + j] -= 1.0;
    auto sol = solve_qp(factor, Vector::Zero(p), c, b, tol);
    out.m = std::move(sol.x);
    out.active_count = static_cast<Eigen::Index>(sol.active_set.size());
    out.active_set_changes = sol.active_set_changes;
    out.kkt_residual = sol.kkt_residual;
    return out;
}

Vector solve_theta_row(const Matrix& sigma, Eigen::Index j, double gamma, double tol) {
    return solve_theta_row(theta_row_factor(sigma), sigma, j, gamma, tol).m;
}

}  // namespace dlcox
