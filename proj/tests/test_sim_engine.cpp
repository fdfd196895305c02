#include "dlcox/error.hpp"
#include "dlcox/sim_engine.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

using namespace dlcox;

namespace {

SimConfig small_config(Eigen::Index n, Eigen::Index p) {
    SimConfig cfg;
    cfg.n = n;
    cfg.p = p;
    cfg.beta0 = Vector::Zero(p);
    cfg.seed = 99;
    return cfg;
}

// Composite Simpson rule on [a, b] with an even number of panels.
double simpson(const std::function<double(double)>& f, double a, double b, int panels = 20000) {
    const double h = (b - a) / panels;
    double s = f(a) + f(b);
    for (int k = 1; k < panels; ++k) s += (k % 2 ? 4.0 : 2.0) * f(a + k * h);
    return s * h / 3.0;
}

bool same(double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); }

}  // namespace

TEST_SUITE("sim_engine") {

TEST_CASE("config validation") {
    SimConfig cfg = small_config(50, 3);
    CHECK_NOTHROW(validate_config(cfg));
    auto expect = [](SimConfig c) {
        try {
            validate_config(c);
        } catch (const Error& e) {
            return e.code() == ErrorCode::ConfigError;
        }
        return false;
    };
    SimConfig bad = cfg;
    bad.n = 1;
    CHECK(expect(bad));
    bad = cfg;
    bad.cov = CovStructure::ar1;
    bad.rho = 1.0;
    CHECK(expect(bad));
    bad = cfg;
    bad.truncation = 0.0;
    CHECK(expect(bad));
    bad = cfg;
    bad.uniform_a = 5;
    bad.uniform_b = 5;
    CHECK(expect(bad));
    bad = cfg;
    bad.beta0 = Vector::Zero(2);
    CHECK(expect(bad));
}

TEST_CASE("coefficient layouts") {
    const Vector b = beta0_benchmark(100, 1.0);
    CHECK(b[0] == 1.0);
    CHECK(b[20] == 1.0);
    CHECK(b[40] == 1.0);
    CHECK(b[60] == 0.5);
    CHECK(b[80] == 0.5);
    CHECK((b.array() != 0.0).count() == 5);
    const Vector t = beta0_tuning(10);
    CHECK(t[0] == 1.0);
    CHECK(t[1] == 0.3);
    CHECK(t.tail(8).isZero());
}

TEST_CASE("generation is deterministic per seed and replication") {
    SimConfig cfg = small_config(200, 4);
    cfg.beta0 = Vector::LinSpaced(4, -0.5, 0.5);
    const auto a = generate_dataset(cfg, 3);
    const auto b = generate_dataset(cfg, 3);
    CHECK(a.times == b.times);
    CHECK(a.status == b.status);
    CHECK(a.covariates == b.covariates);
    CHECK(generate_dataset(cfg, 4).times != a.times);
    CHECK(a.covariates.cwiseAbs().maxCoeff() <= cfg.truncation);
    CHECK(validate(a).ok());
}

TEST_CASE("AR(1) covariates before truncation") {
    SimConfig cfg = small_config(50000, 5);
    cfg.cov = CovStructure::ar1;
    cfg.rho = 0.5;
    Philox rng(cfg.seed, 0);
    const Matrix x = draw_covariates(cfg, rng, false);
    const Matrix centered = x.rowwise() - x.colwise().mean();
    const Matrix cov = centered.transpose() * centered / double(cfg.n - 1);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) CHECK(std::abs(cov(i, j) - std::pow(0.5, std::abs(i - j))) <= 0.02);
}

TEST_CASE("event times are unit exponential when beta0 = 0") {
    SimConfig cfg = small_config(50000, 2);
    cfg.censoring = CensoringKind::none;
    const auto ds = generate_dataset(cfg);
    CHECK(ds.times.mean() == doctest::Approx(1.0).epsilon(0.02));
    CHECK(ds.event_count() == ds.n());
}

TEST_CASE("censoring fractions against closed form and quadrature") {
    SimConfig cfg = small_config(10000, 100);
    cfg.beta0 = beta0_tuning(100);
    cfg.censoring = CensoringKind::exponential;
    cfg.kappa = 0.2;
    const auto ds = generate_dataset(cfg);
    const double frac = 1.0 - double(ds.event_count()) / double(ds.n());
    CHECK(expected_censoring_exponential(0.2) == doctest::Approx(1.0 / 6.0));
    CHECK(std::abs(frac - 1.0 / 6.0) <= 0.02);

    SimConfig uni = small_config(10000, 3);
    uni.censoring = CensoringKind::uniform;
    const auto du = generate_dataset(uni);
    // P(C < T) with T ~ Exp(1), C ~ U(1, 20): integral of exp(-c) / 19 over [1, 20].
    const double expected = simpson([](double c) { return std::exp(-c) / 19.0; }, 1.0, 20.0);
    const double ufrac = 1.0 - double(du.event_count()) / double(du.n());
    CHECK(std::abs(ufrac - expected) <= 0.02);
}

TEST_CASE("metric aggregation") {
    std::vector<TargetEstimate> est(2);
    est[0].estimate = 0.9;
    est[1].estimate = 1.1;
    const auto row = aggregate_metrics("m", "t", 1.0, est);
    CHECK(std::abs(row.bias) < 1e-15);
    CHECK(row.mse == doctest::Approx(0.01));
    CHECK(std::isnan(row.coverage));
    CHECK(std::isnan(row.mean_se));

    est[0].se = 0.1;
    est[0].covered = true;
    est[1].se = 0.3;
    est[1].covered = false;
    const auto r2 = aggregate_metrics("m", "t", 0.5, est, 3);
    CHECK(r2.coverage == 0.5);
    CHECK(r2.mean_se == doctest::Approx(0.2));
    CHECK(r2.failures == 3);
    CHECK(r2.mse >= r2.bias * r2.bias - 1e-12);
    CHECK(r2.empirical_sd == doctest::Approx(std::sqrt(0.02)));
}

TEST_CASE("oracle fit") {
    const auto ds = oracle::overlap_dataset();
    const auto fit = fit_oracle(ds, {0});
    const double root = oracle::bisect(
        [&](double b) { return oracle::naive_score(ds, Vector::Constant(1, b))[0]; }, -5.0, 5.0);
    CHECK(fit.fit.beta[0] == doctest::Approx(root).epsilon(1e-8));
    try {
        fit_oracle(ds, {});
        FAIL("expected EmptySupport");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::EmptySupport);
    }

    std::mt19937_64 gen(4);
    const auto rd = oracle::random_dataset(gen, 150, 4);
    const auto all = fit_oracle(rd, {0, 1, 2, 3});
    const auto mple = fit_mple_with_covariance(rd);
    CHECK((all.fit.beta - mple.fit.beta).lpNorm<Eigen::Infinity>() == 0.0);
    CHECK((all.covariance - mple.covariance).lpNorm<Eigen::Infinity>() == 0.0);
    const auto part = fit_oracle(rd, {1, 3});
    CHECK(part.fit.beta[0] == 0.0);
    CHECK(part.fit.beta[2] == 0.0);
    CHECK(part.covariance.row(0).isZero());
    CHECK(part.covariance(1, 1) > 0.0);
}

TEST_CASE("error decomposition") {
    SimConfig cfg = small_config(200, 6);
    cfg.beta0 = beta0_benchmark(6, 1.0);
    const auto ds = generate_dataset(cfg);
    const Matrix theta = Matrix::Identity(6, 6) * 2.0;
    const Vector c = Vector::Unit(6, 0);
    const auto exact = decompose_error(ds, cfg.beta0, cfg.beta0, theta, c);
    CHECK(std::abs(exact.remainder) < 1e-14);
    CHECK(exact.total == doctest::Approx(exact.leading));

    const Vector beta_hat = cfg.beta0 * 0.8;
    const auto d1 = decompose_error(ds, cfg.beta0, beta_hat, theta, c);
    const auto d2 = decompose_error(ds, cfg.beta0, beta_hat, theta, 2.0 * c);
    CHECK(std::abs(d1.total - (d1.leading + d1.remainder)) <= 1e-14);
    CHECK(d2.total == doctest::Approx(2.0 * d1.total).epsilon(1e-14));
    CHECK(d2.leading == doctest::Approx(2.0 * d1.leading).epsilon(1e-14));
    CHECK(d2.remainder == doctest::Approx(2.0 * d1.remainder).epsilon(1e-12));
    CHECK_THROWS_AS(decompose_error(ds, cfg.beta0, beta_hat, theta, Vector::Ones(3)), Error);
}

TEST_CASE("single replication of the oracle") {
    ExperimentSpec spec;
    spec.config = small_config(300, 5);
    spec.config.beta0 = beta0_benchmark(5, 1.0);
    spec.methods = {Method::oracle};
    spec.targets = {{"x1", Vector::Unit(5, 0)}};
    spec.replications = 1;
    const auto s = run_replications(spec);
    REQUIRE(s.rows.size() == 1);
    CHECK((s.rows[0].coverage == 0.0 || s.rows[0].coverage == 1.0));
    CHECK(s.rows[0].replications == 1);
}

TEST_CASE("oracle coverage is near nominal") {
    ExperimentSpec spec;
    spec.config = small_config(500, 5);
    spec.config.beta0 = beta0_benchmark(5, 1.0);
    spec.methods = {Method::oracle};
    spec.targets = {{"x1", Vector::Unit(5, 0)}};
    spec.replications = 200;
    const auto s = run_replications(spec);
    const auto& row = s.row("oracle", "x1");
    CHECK(row.coverage >= 0.91);
    CHECK(row.coverage <= 0.98);
    CHECK(row.failures == 0);
}

TEST_CASE("runs are deterministic and failures are tallied") {
    ExperimentSpec spec;
    spec.config = small_config(40, 45);
    spec.config.beta0 = beta0_benchmark(45, 1.0);
    spec.methods = {Method::qp_debias, Method::lasso, Method::mple};
    spec.targets = {{"x1", Vector::Unit(45, 0)}};
    spec.replications = 3;
    spec.settings.lambda = 0.1;
    spec.settings.gamma = 0.3;
    const auto a = run_replications(spec);
    spec.threads = 3;
    const auto b = run_replications(spec);
    REQUIRE(a.rows.size() == b.rows.size());
    for (std::size_t k = 0; k < a.rows.size(); ++k) {
        CHECK(a.rows[k].method == b.rows[k].method);
        CHECK(same(a.rows[k].bias, b.rows[k].bias));
        CHECK(same(a.rows[k].mse, b.rows[k].mse));
    }
    // p = 45 exceeds n = 40, so the Hessian is singular in every replication.
    const auto& mple = a.row("mple", "x1");
    CHECK(mple.failures == 3);
    CHECK(mple.replications == 0);
    CHECK(a.failure_reasons.at("mple").size() >= 1);
    const auto& qp = a.row("qp_debias", "x1");
    CHECK(qp.failures + qp.replications == 3);
    CHECK(std::isnan(a.row("lasso", "x1").coverage));
}

TEST_CASE("gamma sweep labels") {
    ExperimentSpec spec;
    spec.config = small_config(150, 8);
    spec.config.beta0 = beta0_tuning(8);
    spec.methods = {Method::qp_debias};
    spec.targets = {{"x1", Vector::Unit(8, 0)}};
    spec.replications = 2;
    spec.settings.lambda = 0.05;
    spec.settings.gamma_sweep = {0.05, 0.2};
    const auto s = run_replications(spec);
    REQUIRE(s.rows.size() == 2);
    CHECK(s.rows[0].method == "qp_debias@gamma=0.05");
    CHECK(s.rows[1].method == "qp_debias@gamma=0.2");
}

TEST_CASE("method names") {
    for (Method m : {Method::qp_debias, Method::lasso, Method::mple, Method::oracle}) CHECK(parse_method(method_name(m)) == m);
    CHECK_THROWS_AS(parse_method("nw"), Error);
}

}
