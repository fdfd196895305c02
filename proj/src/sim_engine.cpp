#include "dlcox/sim_engine.hpp"

#include "dlcox/distributions.hpp"
#include "dlcox/error.hpp"
#include "dlcox/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace dlcox {

void validate_config(const SimConfig& cfg) {
    auto fail = [](const std::string& msg) { throw Error(ErrorCode::ConfigError, msg); };
    if (cfg.n < 2) fail("n must be >= 2");
    if (cfg.p < 1) fail("p must be >= 1");
    if (cfg.beta0.size() != cfg.p) fail("beta0 must have p = " + std::to_string(cfg.p) + " entries");
    if (!cfg.beta0.allFinite()) fail("beta0 must be finite");
    if (cfg.cov == CovStructure::ar1 && !(cfg.rho > -1.0 && cfg.rho < 1.0)) fail("rho must lie in (-1, 1)");
    if (!(cfg.truncation > 0.0)) fail("truncation must be > 0");
    if (cfg.censoring == CensoringKind::exponential && !(cfg.kappa > 0.0)) fail("kappa must be > 0");
    if (cfg.censoring == CensoringKind::uniform && !(cfg.uniform_a < cfg.uniform_b)) fail("need a < b");
    if (cfg.censoring == CensoringKind::uniform && cfg.uniform_a < 0.0) fail("uniform censoring must be >= 0");
}

Vector beta0_benchmark(Eigen::Index p, double beta1) {
    if (p < 5) throw Error(ErrorCode::ConfigError, "the benchmark coefficient layout needs p >= 5");
    Vector b = Vector::Zero(p);
    b[0] = beta1;
    b[p / 5] = 1.0;
    b[2 * p / 5] = 1.0;
    b[3 * p / 5] = 0.5;
    b[4 * p / 5] = 0.5;
    return b;
}

Vector beta0_tuning(Eigen::Index p) {
    if (p < 2) throw Error(ErrorCode::ConfigError, "the tuning coefficient layout needs p >= 2");
    Vector b = Vector::Zero(p);
    b[0] = 1.0;
    b[1] = 0.3;
    return b;
}

Matrix draw_covariates(const SimConfig& cfg, Philox& rng, bool truncate) {
    Matrix x(cfg.n, cfg.p);
    const double innovation = std::sqrt(1.0 - cfg.rho * cfg.rho);
    for (Eigen::Index i = 0; i < cfg.n; ++i) {
        double prev = 0.0;
        for (Eigen::Index j = 0; j < cfg.p; ++j) {
            const double e = rng.normal();
            // AR(1) recursion keeps unit marginal variance with corr rho^|i-j|.
            const double v = (cfg.cov == CovStructure::ar1 && j > 0) ? cfg.rho * prev + innovation * e : e;
            prev = v;
            x(i, j) = v;
        }
    }
    if (truncate && std::isfinite(cfg.truncation)) {
        x = x.cwiseMax(-cfg.truncation).cwiseMin(cfg.truncation);
    }
    return x;
}

SurvivalDataset generate_dataset(const SimConfig& cfg, std::uint64_t replication) {
    validate_config(cfg);
    Philox rng(cfg.seed, replication);
    SurvivalDataset ds;
    ds.covariates = draw_covariates(cfg, rng, true);
    ds.times.resize(cfg.n);
    ds.status.resize(static_cast<std::size_t>(cfg.n));
    const Vector lp = ds.covariates * cfg.beta0;
    for (Eigen::Index i = 0; i < cfg.n; ++i) {
        const double hazard = std::exp(lp[i]);
        const double t = rng.exponential(hazard);
        double c = std::numeric_limits<double>::infinity();
        switch (cfg.censoring) {
        case CensoringKind::none: break;
        case CensoringKind::exponential: c = rng.exponential(cfg.kappa * hazard); break;
        case CensoringKind::uniform: c = rng.uniform(cfg.uniform_a, cfg.uniform_b); break;
        }
        ds.times[i] = std::min(t, c);
        ds.status[i] = t <= c ? 1 : 0;
    }
    for (Eigen::Index j = 0; j < cfg.p; ++j) ds.covariate_names.push_back("x" + std::to_string(j + 1));
    return ds;
}

double expected_censoring_exponential(double kappa) { return kappa / (1.0 + kappa); }

std::string method_name(Method m) {
    switch (m) {
    case Method::qp_debias: return "qp_debias";
    case Method::lasso: return "lasso";
    case Method::mple: return "mple";
    case Method::oracle: return "oracle";
    }
    return "unknown";
}

Method parse_method(const std::string& s) {
    if (s == "qp_debias" || s == "qp") return Method::qp_debias;
    if (s == "lasso") return Method::lasso;
    if (s == "mple") return Method::mple;
    if (s == "oracle") return Method::oracle;
    throw Error(ErrorCode::ConfigError, "unknown method '" + s + "'");
}

const MetricRow& SimSummary::row(const std::string& method, const std::string& target) const {
    for (const auto& r : rows) {
        if (r.method == method && r.target == target) return r;
    }
    throw Error(ErrorCode::InvalidArgument, "no summary row for " + method + "/" + target);
}

MetricRow aggregate_metrics(const std::string& method, const std::string& target, double truth,
                            const std::vector<TargetEstimate>& estimates, int failures) {
    MetricRow row;
    row.method = method;
    row.target = target;
    row.truth = truth;
    row.failures = failures;
    row.replications = static_cast<int>(estimates.size());
    if (estimates.empty()) {
        row.bias = row.mse = row.empirical_sd = std::numeric_limits<double>::quiet_NaN();
        return row;
    }
    double sum = 0.0, sq = 0.0, se_sum = 0.0;
    int se_count = 0, cover_count = 0, covered = 0;
    for (const auto& e : estimates) {
        sum += e.estimate;
        sq += (e.estimate - truth) * (e.estimate - truth);
        if (std::isfinite(e.se)) {
            se_sum += e.se;
            ++se_count;
        }
        if (e.covered) {
            ++cover_count;
            covered += *e.covered ? 1 : 0;
        }
    }
    const double count = static_cast<double>(estimates.size());
    const double mean = sum / count;
    row.bias = mean - truth;
    row.mse = sq / count;
    if (se_count > 0) row.mean_se = se_sum / se_count;
    if (cover_count > 0) row.coverage = static_cast<double>(covered) / cover_count;
    double var = 0.0;
    for (const auto& e : estimates) var += (e.estimate - mean) * (e.estimate - mean);
    row.empirical_sd = estimates.size() > 1 ? std::sqrt(var / (count - 1.0)) : 0.0;
    return row;
}

SimSummary summarize(const ExperimentSpec& spec, std::vector<ReplicationRecord> records) {
    SimSummary summary;
    summary.replications = static_cast<int>(records.size());
    std::vector<std::string> labels;
    double censored = 0.0;
    for (const auto& rec : records) {
        censored += rec.censoring_fraction;
        for (const auto& o : rec.outcomes) {
            if (std::find(labels.begin(), labels.end(), o.method) == labels.end()) labels.push_back(o.method);
        }
    }
    if (!records.empty()) summary.mean_censoring_fraction = censored / static_cast<double>(records.size());
    for (const auto& label : labels) {
        for (std::size_t t = 0; t < spec.targets.size(); ++t) {
            std::vector<TargetEstimate> est;
            int failures = 0;
            for (const auto& rec : records) {
                for (const auto& o : rec.outcomes) {
                    if (o.method != label) continue;
                    if (o.failed) ++failures;
                    else est.push_back(o.targets[t]);
                }
            }
            const double truth = spec.targets[t].c.dot(spec.config.beta0);
            summary.rows.push_back(aggregate_metrics(label, spec.targets[t].name, truth, est, failures));
        }
        for (const auto& rec : records) {
            for (const auto& o : rec.outcomes) {
                if (o.method == label && o.failed) ++summary.failure_reasons[label][o.failure];
            }
        }
    }
    summary.records = std::move(records);
    return summary;
}

std::uint64_t replication_seed(std::uint64_t seed, std::uint64_t replication) {
    return Philox(seed ^ 0x9E3779B97F4A7C15ull, replication).next_u64();
}

double select_lambda(const SurvivalDataset& ds, const MethodSettings& settings, std::uint64_t seed) {
    if (settings.lambda) return *settings.lambda;
    const CoxData data(ds);
    const auto grid = lambda_grid(data, settings.lambda_grid_count, settings.lambda_ratio);
    CvOptions cv;
    cv.folds = settings.lambda_folds;
    cv.seed = seed;
    cv.lasso = settings.lasso;
    cv.threads = 1;
    return cv_lambda(ds, grid, cv).chosen_lambda();
}

namespace {

GammaCvOptions gamma_cv_options(const MethodSettings& settings, std::uint64_t seed) {
    GammaCvOptions opts;
    opts.folds = settings.gamma_folds;
    opts.alpha = settings.threshold_alpha;
    opts.seed = seed;
    opts.denominator = settings.denominator;
    opts.theta.tol = settings.qp_tol;
    opts.threads = 1;
    return opts;
}

TargetEstimate normal_target(double estimate, double variance, double truth, double alpha) {
    TargetEstimate t;
    t.estimate = estimate;
    if (variance > 0.0 && std::isfinite(variance)) {
        t.se = std::sqrt(variance);
        const double half = dist::normal_upper_quantile(alpha / 2.0) * t.se;
        t.covered = std::abs(estimate - truth) <= half;
    }
    return t;
}

template <class Body>
MethodOutcome guarded(const std::string& label, Body&& body) {
    MethodOutcome out;
    out.method = label;
    try {
        body(out);
    } catch (const Error& e) {
        out.failed = true;
        out.failure = std::string(error_code_name(e.code()));
        out.targets.clear();
    } catch (const std::exception& e) {
        out.failed = true;
        out.failure = "exception";
        out.targets.clear();
    }
    return out;
}

std::string sweep_label(double gamma) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "qp_debias@gamma=%.6g", gamma);
    return buf;
}

}  // namespace

DebiasedFit fit_debiased(const SurvivalDataset& ds, const MethodSettings& settings, std::uint64_t seed) {
    DebiasedFit out;
    out.lambda = select_lambda(ds, settings, seed);
    const CoxData data(ds);
    out.beta_hat = fit_lasso(data, out.lambda, Vector::Zero(ds.p()), settings.lasso).beta;
    data.value_and_score(out.beta_hat, out.score);
    const SigmaHat sigma = data.sigma_hat(out.beta_hat);
    double gamma = 0.0;
    if (settings.gamma) {
        gamma = *settings.gamma;
    } else {
        const auto grid = settings.gamma_grid.empty() ? default_gamma_grid(ds.n(), ds.p()) : settings.gamma_grid;
        out.gamma_curve = cv_gamma(ds, grid, lasso_training_fit(out.lambda, settings.lasso),
                                   gamma_cv_options(settings, seed));
        gamma = out.gamma_curve->chosen_gamma();
    }
    ThetaOptions theta_opts;
    theta_opts.tol = settings.qp_tol;
    theta_opts.threads = 1;
    out.theta = estimate_theta(sigma, gamma, theta_opts);
    out.b = debias(out.beta_hat, out.theta.matrix, out.score);
    return out;
}

ModelBasedFit fit_mple_with_covariance(const SurvivalDataset& ds, const MpleOptions& opts) {
    const CoxData data(ds);
    ModelBasedFit out;
    out.fit = fit_mple(data, opts);
    if (!out.fit.converged) {
        throw Error(ErrorCode::MaxIterExceeded, "MPLE did not converge in " + std::to_string(opts.max_iter) +
                                                    " iterations");
    }
    const Matrix h = data.evaluate(out.fit.beta).hessian;
    out.covariance = h.llt().solve(Matrix::Identity(ds.p(), ds.p())) / static_cast<double>(ds.n());
    return out;
}

ModelBasedFit fit_oracle(const SurvivalDataset& ds, const std::vector<Eigen::Index>& support,
                         const MpleOptions& opts) {
    if (support.empty()) throw Error(ErrorCode::EmptySupport, "oracle support is empty");
    for (auto j : support) {
        if (j < 0 || j >= ds.p()) throw Error(ErrorCode::InvalidArgument, "support index out of range");
    }
    const auto restricted = fit_mple_with_covariance(subset_columns(ds, support), opts);
    ModelBasedFit out;
    out.fit = restricted.fit;
    out.fit.beta = Vector::Zero(ds.p());
    out.covariance = Matrix::Zero(ds.p(), ds.p());
    for (std::size_t a = 0; a < support.size(); ++a) {
        out.fit.beta[support[a]] = restricted.fit.beta[static_cast<Eigen::Index>(a)];
        for (std::size_t b = 0; b < support.size(); ++b) {
            out.covariance(support[a], support[b]) =
                restricted.covariance(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
        }
    }
    return out;
}

ReplicationRecord run_replication(const ExperimentSpec& spec, std::uint64_t replication) {
    const SurvivalDataset ds = generate_dataset(spec.config, replication);
    const std::uint64_t seed = replication_seed(spec.config.seed, replication);
    const MethodSettings& settings = spec.settings;
    ReplicationRecord rec;
    rec.replication = replication;
    rec.censoring_fraction = 1.0 - static_cast<double>(ds.event_count()) / static_cast<double>(ds.n());

    auto has = [&](Method m) { return std::find(spec.methods.begin(), spec.methods.end(), m) != spec.methods.end(); };
    const auto truth = [&](std::size_t t) { return spec.targets[t].c.dot(spec.config.beta0); };

    // Lasso fit shared by the lasso and debiased methods.
    std::optional<double> lambda;
    Vector beta_hat;
    std::string lasso_failure;
    if (has(Method::lasso) || has(Method::qp_debias)) {
        try {
            lambda = select_lambda(ds, settings, seed);
            beta_hat = fit_lasso(CoxData(ds), *lambda, Vector::Zero(ds.p()), settings.lasso).beta;
        } catch (const Error& e) {
            lasso_failure = std::string(error_code_name(e.code()));
            lambda.reset();
        }
    }
    auto require_lasso = [&] {
        if (!lambda) throw Error(ErrorCode::NonFiniteObjective, "lasso fit failed: " + lasso_failure);
    };

    for (Method m : spec.methods) {
        if (m == Method::lasso) {
            rec.outcomes.push_back(guarded("lasso", [&](MethodOutcome& o) {
                require_lasso();
                o.lambda = *lambda;
                for (std::size_t t = 0; t < spec.targets.size(); ++t) {
                    TargetEstimate e;
                    e.estimate = spec.targets[t].c.dot(beta_hat);
                    o.targets.push_back(e);
                }
            }));
        } else if (m == Method::qp_debias) {
            const CoxData data(ds);
            std::vector<double> gammas = settings.gamma_sweep;
            const bool sweep = !gammas.empty();
            auto outcome_for = [&](const std::string& label, std::optional<double> fixed_gamma) {
                return guarded(label, [&](MethodOutcome& o) {
                    require_lasso();
                    o.lambda = *lambda;
                    Vector grad;
                    data.value_and_score(beta_hat, grad);
                    const SigmaHat sigma = data.sigma_hat(beta_hat);
                    double gamma = 0.0;
                    if (fixed_gamma) {
                        gamma = *fixed_gamma;
                    } else {
                        const auto grid =
                            settings.gamma_grid.empty() ? default_gamma_grid(ds.n(), ds.p()) : settings.gamma_grid;
                        gamma = cv_gamma(ds, grid, lasso_training_fit(*lambda, settings.lasso),
                                         gamma_cv_options(settings, seed))
                                    .chosen_gamma();
                    }
                    o.gamma = gamma;
                    ThetaOptions theta_opts;
                    theta_opts.tol = settings.qp_tol;
                    theta_opts.threads = 1;
                    const ThetaHat theta = estimate_theta(sigma, gamma, theta_opts);
                    const Vector b = debias(beta_hat, theta.matrix, grad);
                    for (std::size_t t = 0; t < spec.targets.size(); ++t) {
                        const Vector& c = spec.targets[t].c;
                        const double var = loading_variance(c, theta.matrix) / static_cast<double>(ds.n());
                        o.targets.push_back(normal_target(c.dot(b), var, truth(t), spec.alpha));
                    }
                });
            };
            if (sweep) {
                for (double g : gammas) rec.outcomes.push_back(outcome_for(sweep_label(g), g));
            } else {
                rec.outcomes.push_back(outcome_for("qp_debias", settings.gamma));
            }
        } else {
            const bool oracle = m == Method::oracle;
            rec.outcomes.push_back(guarded(method_name(m), [&](MethodOutcome& o) {
                ModelBasedFit fit;
                if (oracle) {
                    std::vector<Eigen::Index> support;
                    for (Eigen::Index j = 0; j < spec.config.p; ++j) {
                        if (spec.config.beta0[j] != 0.0) support.push_back(j);
                    }
                    fit = fit_oracle(ds, support, settings.mple);
                } else {
                    fit = fit_mple_with_covariance(ds, settings.mple);
                }
                for (std::size_t t = 0; t < spec.targets.size(); ++t) {
                    const Vector& c = spec.targets[t].c;
                    o.targets.push_back(normal_target(c.dot(fit.fit.beta), c.dot(fit.covariance * c), truth(t),
                                                      spec.alpha));
                }
            }));
        }
    }
    return rec;
}

SimSummary run_replications(const ExperimentSpec& spec) {
    validate_config(spec.config);
    if (spec.replications < 1) throw Error(ErrorCode::ConfigError, "replications must be >= 1");
    if (spec.methods.empty()) throw Error(ErrorCode::ConfigError, "no methods selected");
    for (const auto& t : spec.targets) {
        if (t.c.size() != spec.config.p) throw Error(ErrorCode::ConfigError, "target '" + t.name + "' has wrong length");
    }
    std::vector<ReplicationRecord> records(static_cast<std::size_t>(spec.replications));
    parallel_for(records.size(), spec.threads,
                 [&](std::size_t r) { records[r] = run_replication(spec, static_cast<std::uint64_t>(r)); });
    return summarize(spec, std::move(records));
}

DecompositionDiag decompose_error(const SurvivalDataset& ds, const Vector& beta0, const Vector& beta_hat,
                                  const Matrix& theta, const Vector& c) {
    const Eigen::Index p = ds.p();
    if (beta0.size() != p || beta_hat.size() != p || c.size() != p || theta.rows() != p || theta.cols() != p) {
        throw Error(ErrorCode::DimensionMismatch, "decompose_error inputs must all have dimension p");
    }
    const CoxData data(ds);
    Vector grad_hat, grad_true;
    data.value_and_score(beta_hat, grad_hat);
    data.value_and_score(beta0, grad_true);
    const Vector b = debias(beta_hat, theta, grad_hat);
    DecompositionDiag d;
    d.total = c.dot(b - beta0);
    d.leading = -c.dot(theta * grad_true);
    d.remainder = d.total - d.leading;
    return d;
}

std::vector<DecompositionDiag> run_decomposition(const ExperimentSpec& spec, const Vector& c) {
    validate_config(spec.config);
    std::vector<DecompositionDiag> out(static_cast<std::size_t>(spec.replications));
    parallel_for(out.size(), spec.threads, [&](std::size_t r) {
        const auto ds = generate_dataset(spec.config, r);
        const auto fit = fit_debiased(ds, spec.settings, replication_seed(spec.config.seed, r));
        out[r] = decompose_error(ds, spec.config.beta0, fit.beta_hat, fit.theta.matrix, c);
    });
    return out;
}

}  // namespace dlcox
