#include "dlcox/lasso_path.hpp"

#include "dlcox/error.hpp"
#include "dlcox/parallel.hpp"
#include "dlcox/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dlcox {

namespace {

double soft_threshold(double z, double t) {
    if (z > t) return z - t;
    if (z < -t) return z + t;
    return 0.0;
}

double coordinate_violation(double x, double g, double lambda) {
    if (x > 0.0) return std::abs(g + lambda);
    if (x < 0.0) return std::abs(g - lambda);
    return std::max(std::abs(g) - lambda, 0.0);
}

// Minimizes g'(x - x0) + 0.5 (x - x0)' H (x - x0) + lambda |x|_1 by cyclic
// coordinate descent, alternating full sweeps with sweeps over the nonzeros.
Vector solve_quadratic_model(const Matrix& h, const Vector& g, const Vector& x0, double lambda, double tol) {
    const Eigen::Index p = x0.size();
    Vector x = x0;
    Vector model_grad = g;
    auto update = [&](Eigen::Index j) {
        const double hjj = h(j, j);
        if (!(hjj > 1e-300)) return 0.0;
        const double next = soft_threshold(hjj * x[j] - model_grad[j], lambda) / hjj;
        const double delta = next - x[j];
        if (delta != 0.0) {
            x[j] = next;
            model_grad.noalias() += delta * h.col(j);
        }
        return std::abs(delta) * hjj;
    };
    auto residual = [&](bool active_only) {
        double r = 0.0;
        for (Eigen::Index j = 0; j < p; ++j) {
            if (active_only && x[j] == 0.0) continue;
            if (!(h(j, j) > 1e-300)) continue;
            r = std::max(r, coordinate_violation(x[j], model_grad[j], lambda));
        }
        return r;
    };

    std::vector<Eigen::Index> active;
    for (int outer = 0; outer < 1000; ++outer) {
        for (Eigen::Index j = 0; j < p; ++j) update(j);
        if (residual(false) <= tol) break;
        active.clear();
        for (Eigen::Index j = 0; j < p; ++j) {
            if (x[j] != 0.0) active.push_back(j);
        }
        for (int sweep = 0; sweep < 10000; ++sweep) {
            double change = 0.0;
            for (auto j : active) change = std::max(change, update(j));
            if (change <= 0.1 * tol && residual(true) <= tol) break;
        }
    }
    return x;
}

}  // namespace

double lasso_kkt_residual(const Vector& beta, const Vector& gradient, double lambda) {
    double r = 0.0;
    for (Eigen::Index j = 0; j < beta.size(); ++j) {
        r = std::max(r, coordinate_violation(beta[j], gradient[j], lambda));
    }
    return r;
}

CoxFit fit_lasso(const CoxData& data, double lambda, const Vector& init, const LassoOptions& opts) {
    if (!(lambda >= 0.0)) throw Error(ErrorCode::InvalidArgument, "lambda must be >= 0");
    if (init.size() != data.p()) throw Error(ErrorCode::DimensionMismatch, "init length differs from p");

    CoxFit fit;
    fit.lambda = lambda;
    fit.tol = opts.tol;
    fit.beta = init;

    KernelEval ev = data.evaluate(fit.beta);
    double objective = ev.value + lambda * fit.beta.lpNorm<1>();
    if (!std::isfinite(objective)) throw Error(ErrorCode::NonFiniteObjective, "objective at the initial point");
    fit.objective_history.push_back(objective);

    for (;;) {
        fit.kkt_residual = lasso_kkt_residual(fit.beta, ev.gradient, lambda);
        if (fit.kkt_residual <= opts.tol) {
            fit.converged = true;
            break;
        }
        if (fit.iterations >= opts.max_iter) break;

        const Vector target =
            solve_quadratic_model(ev.hessian, ev.gradient, fit.beta, lambda, 0.01 * opts.tol);
        const Vector direction = target - fit.beta;
        const double predicted =
            ev.gradient.dot(direction) + lambda * (target.lpNorm<1>() - fit.beta.lpNorm<1>());
        if (!(predicted < 0.0)) break;

        double step = 1.0;
        Vector candidate;
        double candidate_objective = 0.0;
        bool accepted = false;
        if (-predicted <= 1e-14 * std::max(1.0, std::abs(objective))) {
            // The objective cannot resolve the decrease any more; judge the
            // full step by the stationarity residual instead.
            candidate = target;
            KernelEval next = data.evaluate(candidate);
            if (!(lasso_kkt_residual(candidate, next.gradient, lambda) < fit.kkt_residual)) break;
            fit.beta = std::move(candidate);
            objective = next.value + lambda * fit.beta.lpNorm<1>();
            ++fit.iterations;
            fit.objective_history.push_back(objective);
            ev = std::move(next);
            continue;
        }
        for (int halving = 0; halving < 50 && !accepted; ++halving) {
            candidate = fit.beta + step * direction;
            candidate_objective = data.value(candidate) + lambda * candidate.lpNorm<1>();
            if (std::isfinite(candidate_objective) && candidate_objective <= objective + 1e-4 * step * predicted) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;

        fit.beta = std::move(candidate);
        objective = candidate_objective;
        ++fit.iterations;
        fit.objective_history.push_back(objective);
        ev = data.evaluate(fit.beta);
    }
    if (!fit.converged) fit.kkt_residual = lasso_kkt_residual(fit.beta, ev.gradient, lambda);
    fit.objective = objective;
    return fit;
}

CoxFit fit_lasso(const SurvivalDataset& ds, double lambda, const Vector& init, const LassoOptions& opts) {
    require_valid(ds);
    return fit_lasso(CoxData(ds), lambda, init, opts);
}

CoxFit fit_mple(const CoxData& data, const MpleOptions& opts) {
    CoxFit fit;
    fit.tol = opts.tol;
    fit.beta = Vector::Zero(data.p());
    KernelEval ev = data.evaluate(fit.beta);
    fit.objective_history.push_back(ev.value);
    double spread = 0.0;
    int growing_steps = 0;

    for (;;) {
        Eigen::SelfAdjointEigenSolver<Matrix> eig(ev.hessian, Eigen::EigenvaluesOnly);
        const double lo = eig.eigenvalues().minCoeff();
        const double hi = eig.eigenvalues().maxCoeff();
        if (!(lo > 0.0) || hi / lo > 1e12) {
            // Curvature vanishing while the iterates run off along a growing
            // linear predictor is separation, not rank deficiency.
            if (growing_steps >= 3) {
                throw Error(ErrorCode::MonotoneLikelihood,
                            "Hessian degenerated while the linear predictor spread kept growing (" +
                                std::to_string(spread) + ") at iteration " + std::to_string(fit.iterations));
            }
            throw Error(ErrorCode::SingularHessian, "Hessian condition estimate " +
                                                        std::to_string(lo > 0.0 ? hi / lo : INFINITY) +
                                                        " at iteration " + std::to_string(fit.iterations));
        }
        const Vector step = ev.hessian.llt().solve(-ev.gradient);
        const double grad_norm = ev.gradient.lpNorm<Eigen::Infinity>();
        // A tiny score with a large Newton step means the likelihood is still
        // climbing toward infinity, not that it has converged.
        if (grad_norm <= opts.tol && step.lpNorm<Eigen::Infinity>() <= 1e-6 * std::max(1.0, fit.beta.lpNorm<Eigen::Infinity>())) {
            fit.converged = true;
            break;
        }
        if (fit.iterations >= opts.max_iter) break;

        double t = 1.0;
        Vector candidate;
        double value = 0.0;
        bool accepted = false;
        for (int halving = 0; halving < 40; ++halving) {
            candidate = fit.beta + t * step;
            value = data.value(candidate);
            if (std::isfinite(value) && value <= ev.value + 1e-12 * std::abs(ev.value)) {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) {
            fit.converged = grad_norm <= opts.tol;
            break;
        }
        fit.beta = std::move(candidate);
        ++fit.iterations;
        const Vector lp = data.linear_predictor(fit.beta);
        const double next_spread = lp.maxCoeff() - lp.minCoeff();
        growing_steps = next_spread > spread ? growing_steps + 1 : 0;
        spread = next_spread;
        if (spread > opts.divergence_bound) {
            throw Error(ErrorCode::MonotoneLikelihood,
                        "linear predictor spread exceeds " + std::to_string(opts.divergence_bound) +
                            " after " + std::to_string(fit.iterations) + " iterations");
        }
        ev = data.evaluate(fit.beta);
        fit.objective_history.push_back(ev.value);
    }
    fit.objective = ev.value;
    fit.kkt_residual = ev.gradient.lpNorm<Eigen::Infinity>();
    return fit;
}

CoxFit fit_mple(const SurvivalDataset& ds, const MpleOptions& opts) {
    require_valid(ds);
    return fit_mple(CoxData(ds), opts);
}

std::vector<double> lambda_grid(const CoxData& data, int count, double ratio) {
    if (count < 1) throw Error(ErrorCode::InvalidArgument, "grid count must be >= 1");
    if (!(ratio > 0.0 && ratio < 1.0)) throw Error(ErrorCode::InvalidArgument, "grid ratio must be in (0, 1)");
    const double lambda_max = data.score_at_zero().lpNorm<Eigen::Infinity>();
    std::vector<double> grid(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k) {
        grid[k] = count == 1 ? lambda_max
                             : lambda_max * std::pow(ratio, static_cast<double>(k) / static_cast<double>(count - 1));
    }
    return grid;
}

std::vector<double> lambda_grid(const SurvivalDataset& ds, int count, double ratio) {
    require_valid(ds);
    return lambda_grid(CoxData(ds), count, ratio);
}

std::vector<CoxFit> fit_lasso_path(const CoxData& data, const std::vector<double>& grid, const LassoOptions& opts) {
    std::vector<CoxFit> fits;
    fits.reserve(grid.size());
    Vector warm = Vector::Zero(data.p());
    for (double lambda : grid) {
        fits.push_back(fit_lasso(data, lambda, warm, opts));
        warm = fits.back().beta;
    }
    return fits;
}

std::vector<int> fold_assignment(Eigen::Index n, int folds, std::uint64_t seed) {
    if (folds < 2) throw Error(ErrorCode::InvalidArgument, "need at least 2 folds");
    if (n < folds) throw Error(ErrorCode::InvalidArgument, "fewer subjects than folds");
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), Eigen::Index{0});
    Philox rng(seed, 0x66'6f'6c'64);  // "fold"
    for (std::size_t i = perm.size() - 1; i > 0; --i) {
        std::swap(perm[i], perm[rng.uniform_below(i + 1)]);
    }
    std::vector<int> fold(static_cast<std::size_t>(n));
    for (std::size_t i = 0; i < perm.size(); ++i) fold[perm[i]] = static_cast<int>(i % folds);
    return fold;
}

std::size_t argmin_first(const std::vector<double>& values) {
    if (values.empty()) throw Error(ErrorCode::InvalidArgument, "argmin of an empty list");
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] < values[best]) best = i;
    }
    return best;
}

CvCurve cv_lambda(const SurvivalDataset& ds, const std::vector<double>& grid, const CvOptions& opts) {
    require_valid(ds);
    if (grid.empty()) throw Error(ErrorCode::InvalidArgument, "empty lambda grid");
    const auto folds = fold_assignment(ds.n(), opts.folds, opts.seed);
    const CoxData full(ds);

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
        const auto path = fit_lasso_path(train_data, grid, opts.lasso);
        auto& out = fold_losses[k];
        out.resize(grid.size());
        for (std::size_t g = 0; g < grid.size(); ++g) {
            const Vector& b = path[g].beta;
            if (opts.loss == CvLoss::held_out) {
                out[g] = static_cast<double>(test_data.n()) * test_data.value(b);
            } else {
                out[g] = static_cast<double>(full.n()) * full.value(b) -
                         static_cast<double>(train_data.n()) * train_data.value(b);
            }
        }
    });

    CvCurve curve;
    curve.grid = grid;
    curve.fold_count = opts.folds;
    curve.seed = opts.seed;
    curve.losses.assign(grid.size(), 0.0);
    for (const auto& fl : fold_losses) {
        for (std::size_t g = 0; g < grid.size(); ++g) curve.losses[g] += fl[g];
    }
    curve.chosen = argmin_first(curve.losses);
    return curve;
}

}  // namespace dlcox
