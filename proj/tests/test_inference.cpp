#include "dlcox/distributions.hpp"
#include "dlcox/error.hpp"
#include "dlcox/inference.hpp"
#include "dlcox/serialize.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <doctest.h>

#include <random>

using namespace dlcox;

namespace {

double z_upper(double a) { return boost::math::quantile(boost::math::complement(boost::math::normal(), a)); }

Matrix random_theta(std::mt19937_64& gen, int p) {
    std::normal_distribution<double> normal;
    Matrix a(p, p + 3);
    for (auto& v : a.reshaped()) v = normal(gen);
    Matrix t = a * a.transpose() / (p + 3);
    // A little asymmetry, as row-wise estimates have.
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j)
            if (i != j) t(i, j) += 0.01 * normal(gen);
    return t;
}

}  // namespace

TEST_SUITE("inference") {

TEST_CASE("debias") {
    const Vector b = debias((Vector(2) << 0.5, 0).finished(), Matrix::Identity(2, 2), (Vector(2) << -0.1, 0.02).finished());
    CHECK(b[0] == doctest::Approx(0.6));
    CHECK(b[1] == doctest::Approx(-0.02));
    const Vector beta = (Vector(2) << 0.3, -0.1).finished();
    CHECK(debias(beta, Matrix::Identity(2, 2), Vector::Zero(2)) == beta);
    CHECK(debias(Vector::Zero(1), 2.0 * Matrix::Identity(1, 1), Vector::Constant(1, 0.25))[0] == -0.5);
    CHECK_THROWS_AS(debias(Vector::Zero(2), Matrix::Identity(3, 3), Vector::Zero(2)), Error);

    std::mt19937_64 gen(1);
    const Matrix theta = random_theta(gen, 4);
    const Vector g1 = Vector::Random(4), g2 = Vector::Random(4);
    CHECK((debias(beta.head(1).replicate(4, 1), theta, g1 + g2) -
           (debias(beta.head(1).replicate(4, 1), theta, g1) - theta * g2))
              .lpNorm<Eigen::Infinity>() < 1e-14);
}

TEST_CASE("confidence interval arithmetic") {
    // c'b = 0.6, c'Theta c = 2, n = 100, alpha = 0.05.
    const Vector b = Vector::Constant(1, 0.6);
    const Matrix theta = Matrix::Constant(1, 1, 2.0);
    const Interval ci = ci_linear(b, theta, 100, Vector::Ones(1), 0.05);
    const double half = z_upper(0.025) * std::sqrt(0.02);
    CHECK(ci.lower == doctest::Approx(0.6 - half).epsilon(1e-12));
    CHECK(ci.upper == doctest::Approx(0.6 + half).epsilon(1e-12));
    CHECK(ci.lower == doctest::Approx(0.32283).epsilon(1e-5));
    CHECK(ci.upper == doctest::Approx(0.87717).epsilon(1e-5));
    CHECK(ci.center() == doctest::Approx(0.6));

    const Interval degenerate = ci_linear(b, theta, 100, Vector::Ones(1), 1.0);
    CHECK(degenerate.lower == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(degenerate.upper == doctest::Approx(0.6).epsilon(1e-15));

    CHECK_THROWS_AS(ci_linear(b, Matrix::Constant(1, 1, -1.0), 100, Vector::Ones(1), 0.05), Error);
}

TEST_CASE("per-coordinate inference agrees with ci_linear and widens as alpha falls") {
    std::mt19937_64 gen(2);
    const Matrix theta = random_theta(gen, 5);
    const Vector b = Vector::LinSpaced(5, -0.4, 0.4);
    const auto inf = make_inference(b, theta, 200, 0.05);
    for (Eigen::Index j = 0; j < 5; ++j) {
        const auto& row = inf.per_coord[j];
        const Interval ci = ci_linear(b, theta, 200, Vector::Unit(5, j), 0.05);
        CHECK(row.ci.lower == ci.lower);
        CHECK(row.ci.upper == ci.upper);
        CHECK(row.se == doctest::Approx(std::sqrt(theta(j, j) / 200.0)));
        CHECK(row.ci.upper - row.ci.lower == doctest::Approx(2.0 * z_upper(0.025) * row.se).epsilon(1e-14));
        CHECK(row.p_value >= 0.0);
        CHECK(row.p_value <= 1.0);
    }
    double prev = 0.0;
    for (double alpha : {0.5, 0.2, 0.1, 0.05, 0.01, 0.001}) {
        const Interval ci = ci_linear(b, theta, 200, Vector::Unit(5, 0), alpha);
        CHECK(ci.upper - ci.lower > prev);
        prev = ci.upper - ci.lower;
    }
    Matrix bad = theta;
    bad(2, 2) = 0.0;
    try {
        make_inference(b, bad, 200, 0.05);
        FAIL("expected NonPositiveVariance");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NonPositiveVariance);
    }
}

TEST_CASE("wald test") {
    const Vector b = Vector::Constant(1, 0.6);
    const Matrix theta = Matrix::Constant(1, 1, 2.0);
    const auto null = wald_test(b, theta, 100, Vector::Ones(1), 0.6, 0.05);
    CHECK(null.statistic == 0.0);
    CHECK(null.p_value == doctest::Approx(1.0));
    CHECK_FALSE(null.reject);

    // Place T exactly at z_{0.025}: a0 = 0.6 - z * sqrt(2 / 100).
    const double z = dist::normal_upper_quantile(0.025);
    const double a0 = 0.6 - z * std::sqrt(0.02);
    const auto edge = wald_test(b, theta, 100, Vector::Ones(1), a0, 0.05);
    CHECK(edge.statistic == doctest::Approx(z).epsilon(1e-12));
    const auto inside = wald_test(b, theta, 100, Vector::Ones(1), 0.6 - 0.999999 * z * std::sqrt(0.02), 0.05);
    CHECK_FALSE(inside.reject);
    const auto outside = wald_test(b, theta, 100, Vector::Ones(1), 0.6 - 1.000001 * z * std::sqrt(0.02), 0.05);
    CHECK(outside.reject);
    CHECK(edge.p_value == doctest::Approx(0.05).epsilon(1e-9));
}

TEST_CASE("wald test rejects strictly at the boundary") {
    // Constructed so that |T| == z exactly in floating point: c'b - a0 = z, n = 1, c'Theta c = 1.
    const double z = dist::normal_upper_quantile(0.025);
    const auto t = wald_test(Vector::Constant(1, z), Matrix::Identity(1, 1), 1, Vector::Ones(1), 0.0, 0.05);
    REQUIRE(t.statistic == z);
    CHECK_FALSE(t.reject);
}

TEST_CASE("CI and test duality") {
    std::mt19937_64 gen(3);
    const Matrix theta = random_theta(gen, 4);
    const Vector b = Vector::LinSpaced(4, 0.1, 0.7);
    std::uniform_real_distribution<double> unif(-1, 1);
    for (int rep = 0; rep < 200; ++rep) {
        Vector c(4);
        for (auto& v : c) v = unif(gen);
        if (loading_variance(c, theta) <= 0) continue;
        for (double alpha : {0.01, 0.05, 0.2}) {
            const Interval ci = ci_linear(b, theta, 150, c, alpha);
            const double a0 = c.dot(b) + unif(gen) * 0.5;
            const bool inside = ci.contains(a0);
            CHECK(inside == !wald_test(b, theta, 150, c, a0, alpha).reject);
        }
    }
}

TEST_CASE("chi-square test") {
    std::mt19937_64 gen(4);
    const Matrix theta = random_theta(gen, 5);
    const Vector b = Vector::LinSpaced(5, -0.3, 0.5);
    Matrix a = Matrix::Zero(2, 5);
    a(0, 1) = 1;
    a(1, 2) = 1;
    const auto null = chisq_test(b, theta, 300, a, a * b, 0.05);
    CHECK(null.statistic == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(null.p_value == doctest::Approx(1.0));
    CHECK(null.df == 2);

    const auto t = chisq_test(b, theta, 300, a, Vector::Zero(2), 0.05);
    CHECK(t.statistic >= 0.0);
    const Matrix f = a * theta * a.transpose();
    const Vector r = a * b;
    CHECK(t.statistic == doctest::Approx(300.0 * r.dot(f.lu().solve(r))).epsilon(1e-12));
    boost::math::chi_squared chi2(2);
    CHECK(t.p_value == doctest::Approx(boost::math::cdf(boost::math::complement(chi2, t.statistic))).epsilon(1e-9));
    CHECK(t.critical == doctest::Approx(boost::math::quantile(boost::math::complement(chi2, 0.05))).epsilon(1e-10));
    CHECK(t.reject == (t.statistic > t.critical));

    // l = 1 reduces to the squared Wald statistic.
    const Vector c = (Vector(5) << 0.2, -1, 0.5, 0, 0.3).finished();
    const auto w = wald_test(b, theta, 300, c, 0.1, 0.05);
    const auto q = chisq_test(b, theta, 300, c.transpose(), Vector::Constant(1, 0.1), 0.05);
    CHECK(std::abs(q.statistic - w.statistic * w.statistic) <= 1e-12 * std::max(1.0, q.statistic));
    CHECK(q.p_value == doctest::Approx(w.p_value).epsilon(1e-10));

    CHECK(region_contains(b, theta, 300, a, a * b, 0.05));
    CHECK_FALSE(region_contains(b, theta, 300, a, a * b + Vector::Constant(2, 10.0), 0.05));
}

TEST_CASE("chi-square test preconditions") {
    const Matrix theta = Matrix::Identity(3, 3);
    const Vector b = Vector::Zero(3);
    Matrix dup(2, 3);
    dup << 1, 0, 0, 2, 0, 0;
    try {
        chisq_test(b, theta, 100, dup, Vector::Zero(2), 0.05);
        FAIL("expected RankDeficientA");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::RankDeficientA);
    }
    Matrix a = Matrix::Zero(2, 3);
    a(0, 0) = 1;
    a(1, 1) = 1;
    Matrix neg = theta;
    neg(1, 1) = -1.0;
    try {
        chisq_test(b, neg, 100, a, Vector::Zero(2), 0.05);
        FAIL("expected NonPdF");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NonPdF);
    }
}

TEST_CASE("asymmetry diagnostic") {
    Matrix sym = Matrix::Identity(2, 2);
    sym(0, 1) = sym(1, 0) = 0.2;
    const Vector c = Vector::Ones(2);
    CHECK(loading_asymmetry(c, sym) == 0.0);
    CHECK_FALSE(wald_test(Vector::Zero(2), sym, 50, c, 0.0, 0.05).asymmetry_warning);
    Matrix skew = sym;
    skew(0, 1) = 0.3;
    CHECK(loading_asymmetry(c, skew) == doctest::Approx(0.2 / 2.5));
    CHECK(wald_test(Vector::Zero(2), skew, 50, c, 0.0, 0.05).asymmetry_warning);
}

TEST_CASE("report table") {
    const auto one = make_inference(Vector::Zero(1), Matrix::Constant(1, 1, 7.0), 7, 0.05);
    const auto rows = report_table(one, {"a"});
    CHECK(rows[0].p_value == 1.0);
    CHECK(rows[0].ci.lower == -rows[0].ci.upper);
    CHECK(rows[0].se == doctest::Approx(1.0));

    Vector b(4);
    b << 0.1, 0.5, 0.1, -0.9;
    const auto inf = make_inference(b, Matrix::Identity(4, 4), 25, 0.05);
    const auto sorted = report_table(inf, {"a", "b", "c", "d"}, true);
    std::vector<std::string> order;
    for (const auto& r : sorted) order.push_back(r.label);
    CHECK(order == std::vector<std::string>{"d", "b", "a", "c"});  // a and c tie and keep their order

    const auto j = to_json(sorted);
    const auto back = nlohmann::json::parse(j.dump());
    for (std::size_t k = 0; k < sorted.size(); ++k) {
        CHECK(back[k]["estimate"].get<double>() == sorted[k].estimate);
        CHECK(back[k]["p_value"].get<double>() == sorted[k].p_value);
    }
}

}
