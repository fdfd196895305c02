#include "dlcox/error.hpp"
#include "dlcox/lasso_path.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <random>
#include <set>

using namespace dlcox;

namespace {

// Exhaustive recomputation of the held-out CV losses using the naive
// likelihood and independently drawn fold membership lists.
std::vector<double> naive_cv_losses(const SurvivalDataset& ds, const std::vector<double>& grid, int folds,
                                    std::uint64_t seed) {
    const auto fold = fold_assignment(ds.n(), folds, seed);
    std::vector<double> losses(grid.size(), 0.0);
    for (int k = 0; k < folds; ++k) {
        std::vector<Eigen::Index> tr, te;
        for (Eigen::Index i = 0; i < ds.n(); ++i) (fold[i] == k ? te : tr).push_back(i);
        const auto train = subset_rows(ds, tr);
        const auto test = subset_rows(ds, te);
        for (std::size_t g = 0; g < grid.size(); ++g) {
            // Cold start at every lambda: converged solutions do not depend on warm starts.
            const Vector b = fit_lasso(train, grid[g], Vector::Zero(ds.p())).beta;
            losses[g] += static_cast<double>(test.n()) * oracle::naive_nll(test, b);
        }
    }
    return losses;
}

}  // namespace

TEST_SUITE("lasso_path") {

TEST_CASE("lambda at or above the max score gives zero") {
    const auto ds = oracle::hand_dataset();
    const auto fit = fit_lasso(ds, 1.0, Vector::Zero(1));
    CHECK(fit.converged);
    CHECK(fit.beta[0] == 0.0);
    const auto at_max = fit_lasso(ds, 0.5, Vector::Constant(1, 0.3));
    CHECK(at_max.converged);
    CHECK(std::abs(at_max.beta[0]) < 1e-7);
}

TEST_CASE("lambda = 0 matches the score root") {
    const auto ds = oracle::overlap_dataset();
    const double root = oracle::bisect([&](double b) { return oracle::naive_score(ds, Vector::Constant(1, b))[0]; },
                                       -5.0, 5.0);
    const auto fit = fit_lasso(ds, 0.0, Vector::Zero(1), {1e-12, 200});
    CHECK(fit.converged);
    CHECK(std::abs(fit.beta[0] - root) < 1e-6);
    const auto mple = fit_mple(ds);
    CHECK(mple.converged);
    CHECK(std::abs(oracle::naive_score(ds, mple.beta)[0]) < 1e-8);
    CHECK(std::abs(mple.beta[0] - root) < 1e-8);
}

TEST_CASE("one-dimensional lasso equals the soft-thresholded root") {
    std::mt19937_64 gen(77);
    for (int rep = 0; rep < 10; ++rep) {
        const auto ds = oracle::random_dataset(gen, 40, 1, 0.8);
        const double g0 = oracle::naive_score(ds, Vector::Zero(1))[0];
        for (double frac : {0.2, 0.6, 1.2}) {
            const double lambda = frac * std::abs(g0);
            double expected = 0.0;
            if (std::abs(g0) > lambda) {
                // Stationarity of l(b) + lambda |b| away from zero: l'(b) + lambda sign(b) = 0.
                const double sign = g0 < 0 ? 1.0 : -1.0;
                expected = oracle::bisect(
                    [&](double b) { return oracle::naive_score(ds, Vector::Constant(1, b))[0] + lambda * sign; },
                    sign > 0 ? 0.0 : -20.0, sign > 0 ? 20.0 : 0.0);
            }
            const auto fit = fit_lasso(ds, lambda, Vector::Zero(1), {1e-12, 200});
            CHECK(fit.converged);
            CHECK(std::abs(fit.beta[0] - expected) < 1e-8);
        }
    }
}

TEST_CASE("KKT conditions and monotone objective on random instances") {
    std::mt19937_64 gen(2);
    for (int rep = 0; rep < 15; ++rep) {
        const auto ds = oracle::random_dataset(gen, 80, 12, 0.4, rep % 3 == 0 ? 0.5 : 0.0);
        const double lmax = oracle::naive_score(ds, Vector::Zero(12)).lpNorm<Eigen::Infinity>();
        for (double frac : {0.05, 0.3, 0.8}) {
            const double lambda = frac * lmax;
            const auto fit = fit_lasso(ds, lambda, Vector::Zero(12));
            REQUIRE(fit.converged);
            const Vector g = oracle::naive_score(ds, fit.beta);
            for (Eigen::Index j = 0; j < 12; ++j) {
                if (fit.beta[j] != 0.0) CHECK(std::abs(g[j] + lambda * (fit.beta[j] > 0 ? 1 : -1)) <= 1e-6);
                else CHECK(std::abs(g[j]) <= lambda + 1e-6);
            }
            for (std::size_t k = 1; k < fit.objective_history.size(); ++k) {
                CHECK(fit.objective_history[k] <= fit.objective_history[k - 1]);
            }
            CHECK(fit.objective == doctest::Approx(oracle::naive_nll(ds, fit.beta) + lambda * fit.beta.lpNorm<1>())
                                       .epsilon(1e-12));
        }
    }
}

TEST_CASE("lasso at lambda = 0 matches MPLE") {
    std::mt19937_64 gen(8);
    for (int rep = 0; rep < 5; ++rep) {
        const auto ds = oracle::random_dataset(gen, 150, 4);
        const auto lasso = fit_lasso(ds, 0.0, Vector::Zero(4), {1e-10, 200});
        const auto mple = fit_mple(ds);
        REQUIRE(lasso.converged);
        REQUIRE(mple.converged);
        CHECK((lasso.beta - mple.beta).lpNorm<Eigen::Infinity>() < 1e-5);
        CHECK(oracle::naive_score(ds, mple.beta).lpNorm<Eigen::Infinity>() <= 1e-9);
    }
}

TEST_CASE("MPLE detects monotone likelihood") {
    try {
        fit_mple(oracle::hand_dataset());
        FAIL("expected MonotoneLikelihood");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::MonotoneLikelihood);
    }
    const auto ds = make_dataset((Vector(2) << 1, 2).finished(), {1, 1}, (Matrix(2, 1) << 1, -1).finished());
    try {
        fit_mple(ds);
        FAIL("expected MonotoneLikelihood");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::MonotoneLikelihood);
    }
}

TEST_CASE("MPLE flags a singular Hessian") {
    std::mt19937_64 gen(4);
    auto ds = oracle::random_dataset(gen, 30, 2);
    ds.covariates.col(1) = ds.covariates.col(0);
    try {
        fit_mple(ds);
        FAIL("expected SingularHessian");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::SingularHessian);
    }
}

TEST_CASE("max_iter exhaustion returns the best iterate unconverged") {
    std::mt19937_64 gen(6);
    const auto ds = oracle::random_dataset(gen, 80, 10);
    const auto fit = fit_lasso(ds, 0.01, Vector::Zero(10), {1e-14, 1});
    CHECK_FALSE(fit.converged);
    CHECK(fit.iterations == 1);
    CHECK(fit.objective <= fit.objective_history.front());
}

TEST_CASE("lambda grid") {
    const auto ds = oracle::hand_dataset();
    const auto one = lambda_grid(ds, 1, 0.01);
    REQUIRE(one.size() == 1);
    CHECK(one[0] == doctest::Approx(0.5).epsilon(1e-14));
    const auto three = lambda_grid(ds, 3, 0.01);
    CHECK(three[0] == doctest::Approx(0.5));
    CHECK(three[1] == doctest::Approx(0.05));
    CHECK(three[2] == doctest::Approx(0.005));
    CHECK_THROWS_AS(lambda_grid(ds, 0, 0.5), Error);
    CHECK_THROWS_AS(lambda_grid(ds, 3, 1.5), Error);
}

TEST_CASE("warm starts do not change converged solutions") {
    std::mt19937_64 gen(10);
    const auto ds = oracle::random_dataset(gen, 100, 8);
    const CoxData data(ds);
    const auto grid = lambda_grid(data, 8, 0.05);
    const auto path = fit_lasso_path(data, grid);
    for (std::size_t g = 0; g < grid.size(); ++g) {
        const auto cold = fit_lasso(data, grid[g], Vector::Zero(8));
        CHECK((cold.beta - path[g].beta).lpNorm<Eigen::Infinity>() < 1e-6);
    }
}

TEST_CASE("fold assignment is a balanced deterministic partition") {
    const auto a = fold_assignment(103, 10, 5);
    const auto b = fold_assignment(103, 10, 5);
    CHECK(a == b);
    CHECK(a != fold_assignment(103, 10, 6));
    std::vector<int> counts(10, 0);
    for (int f : a) ++counts[f];
    for (int c : counts) CHECK((c == 10 || c == 11));
    CHECK_THROWS_AS(fold_assignment(5, 1, 1), Error);
}

TEST_CASE("argmin ties go to the first index") {
    CHECK(argmin_first({3.0, 1.0, 1.0}) == 1);
    CHECK(argmin_first({2.0}) == 0);
}

TEST_CASE("cv_lambda") {
    std::mt19937_64 gen(12);
    const auto ds = oracle::random_dataset(gen, 90, 6);
    CvOptions opts;
    opts.folds = 5;
    opts.seed = 3;

    const auto single = cv_lambda(ds, {0.05}, opts);
    CHECK(single.chosen == 0);

    const auto twin = cv_lambda(ds, {0.05, 0.05}, opts);
    CHECK(twin.losses[0] == twin.losses[1]);
    CHECK(twin.chosen == 0);

    const auto grid = lambda_grid(ds, 6, 0.05);
    const auto curve = cv_lambda(ds, grid, opts);
    const auto naive = naive_cv_losses(ds, grid, 5, 3);
    for (std::size_t g = 0; g < grid.size(); ++g) CHECK(curve.losses[g] == doctest::Approx(naive[g]).epsilon(1e-6));
    std::size_t best = 0;
    for (std::size_t g = 1; g < naive.size(); ++g)
        if (naive[g] < naive[best]) best = g;
    CHECK(curve.chosen == best);
    CHECK(curve.losses[curve.chosen] == *std::min_element(curve.losses.begin(), curve.losses.end()));

    auto threaded = opts;
    threaded.threads = 3;
    CHECK(cv_lambda(ds, grid, threaded).losses == curve.losses);

    opts.loss = CvLoss::verweij_houwelingen;
    const auto vh = cv_lambda(ds, grid, opts);
    CHECK(vh.chosen < grid.size());
}

TEST_CASE("cv_lambda rejects folds whose training part has no events") {
    // Only one event: the fold that holds it leaves its training set eventless.
    auto ds = make_dataset(Vector::LinSpaced(6, 1, 6), {1, 0, 0, 0, 0, 0}, Matrix::Random(6, 2));
    try {
        cv_lambda(ds, {0.1}, {2, 1});
        FAIL("expected FoldWithoutEvents");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::FoldWithoutEvents);
    }
}

}
