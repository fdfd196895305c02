#include "commands.hpp"

#include "dlcox/config.hpp"
#include "dlcox/error.hpp"
#include "dlcox/manifest.hpp"
#include "dlcox/parallel.hpp"
#include "dlcox/serialize.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace dlcox::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int exit_code_for(ErrorCode code) {
    switch (code) {
    case ErrorCode::FileNotFound:
    case ErrorCode::MissingColumn:
    case ErrorCode::NonNumericCell:
    case ErrorCode::EmptyFile:
    case ErrorCode::InvalidArgument:
        return kParseError;
    case ErrorCode::InvalidDataset:
    case ErrorCode::ConstantColumn:
    case ErrorCode::ConfigError:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::RankDeficientA:
        return kDataError;
    case ErrorCode::Infeasible:
    case ErrorCode::NotPositiveDefinite:
    case ErrorCode::MaxActiveSetChanges:
    case ErrorCode::NonPositiveDiagonal:
    case ErrorCode::NonPositiveVariance:
    case ErrorCode::NonPdF:
        return kQpError;
    default:
        return kSolverError;
    }
}

template <class Body>
int guarded(Body&& body) {
    try {
        return body();
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kSolverError;
    }
}

// Parses and validates; a failed validation prints the report as JSON lines.
std::optional<SurvivalDataset> load_data(const DataArgs& args) {
    if (!fs::exists(args.path)) throw Error(ErrorCode::FileNotFound, "no such file '" + args.path + "'");
    SurvivalDataset ds = parse_csv(args.path, args.time_col, args.status_col);
    const ValidationReport report = validate(ds);
    if (!report.ok()) {
        std::cerr << report.to_json_lines();
        return std::nullopt;
    }
    return ds;
}

void prepare_out(const std::string& dir) { fs::create_directories(dir); }

json data_config(const DataArgs& d) {
    return {{"time_col", d.time_col}, {"status_col", d.status_col}, {"standardize", d.standardize}};
}

struct FittedLasso {
    SurvivalDataset raw;
    SurvivalDataset work;  // standardized
    ScalingInfo scaling;
    CoxFit fit;
    std::optional<CvCurve> cv;
};

FittedLasso run_lasso(const FitArgs& args, const SurvivalDataset& raw, RunManifest& manifest) {
    FittedLasso out;
    out.raw = raw;
    {
        StageTimer t(manifest, "standardize");
        auto [work, scaling] = standardize(raw, parse_standardize_mode(args.data.standardize));
        out.work = std::move(work);
        out.scaling = std::move(scaling);
    }
    double lambda = 0.0;
    if (args.lambda) {
        if (!(*args.lambda >= 0.0)) throw Error(ErrorCode::InvalidArgument, "--lambda must be >= 0");
        lambda = *args.lambda;
    } else {
        StageTimer t(manifest, "cv_lambda");
        CvOptions cv;
        cv.folds = args.folds;
        cv.seed = args.seed;
        cv.threads = args.threads;
        out.cv = cv_lambda(out.work, lambda_grid(out.work), cv);
        lambda = out.cv->chosen_lambda();
    }
    StageTimer t(manifest, "fit_lasso");
    out.fit = fit_lasso(out.work, lambda, Vector::Zero(out.work.p()));
    if (!out.fit.converged) {
        throw Error(ErrorCode::MaxIterExceeded, "lasso did not converge at lambda = " + std::to_string(lambda));
    }
    return out;
}

json fit_json(const FittedLasso& f) {
    json j = to_json(f.fit, f.work.covariate_names);
    j["beta_original_scale"] = vector_json(unscale_coefficients(f.fit.beta, f.scaling));
    j["scaling"] = {{"centers", vector_json(f.scaling.centers)}, {"scales", vector_json(f.scaling.scales)}};
    j["lambda_source"] = f.cv ? "cv" : "fixed";
    if (f.cv) j["cv"] = to_json(*f.cv);
    return j;
}

RunManifest base_manifest(const std::string& command, const std::vector<std::string>& argv, const FitArgs& args) {
    RunManifest m;
    m.command = command;
    m.argv = argv;
    m.add_input(args.data.path);
    m.seeds["cv"] = args.seed;
    m.config["data"] = data_config(args.data);
    m.config["lambda"] = args.lambda ? json(*args.lambda) : json("cv");
    m.config["folds"] = args.folds;
    return m;
}

void write_manifest(const fs::path& out, const RunManifest& m) {
    std::ofstream f(out / "manifest.json");
    if (!f) throw Error(ErrorCode::FileNotFound, "cannot write manifest in '" + out.string() + "'");
    f << m.to_json().dump(2) << '\n';
}

}  // namespace

int cmd_fit(const FitArgs& args, const std::vector<std::string>& argv) {
    return guarded([&] {
        const auto raw = load_data(args.data);
        if (!raw) return int(kDataError);
        if (args.threads > 0) set_default_threads(args.threads);
        RunManifest manifest = base_manifest("fit", argv, args);
        const FittedLasso f = run_lasso(args, *raw, manifest);
        prepare_out(args.out);
        const std::string digest = manifest.digest();
        write_json(fs::path(args.out) / "fit.json", fit_json(f), digest);
        write_manifest(args.out, manifest);
        std::cout << "lambda = " << format_double(f.fit.lambda) << ", nonzero = " << (f.fit.beta.array() != 0.0).count()
                  << ", wrote " << (fs::path(args.out) / "fit.json").string() << '\n';
        return int(kOk);
    });
}

int cmd_infer(const InferArgs& args, const std::vector<std::string>& argv) {
    return guarded([&] {
        const auto raw = load_data(args.fit.data);
        if (!raw) return int(kDataError);
        if (!(args.alpha > 0.0 && args.alpha < 1.0)) throw Error(ErrorCode::InvalidArgument, "--alpha must be in (0, 1)");
        if (args.fit.threads > 0) set_default_threads(args.fit.threads);
        const auto denominator = parse_threshold_denominator(args.threshold_denominator);
        // Parse contrasts up front so a typo fails before any fitting.
        std::vector<Contrast> contrasts;
        for (const auto& text : args.contrasts) contrasts.push_back(parse_contrast(text, raw->covariate_names));
        std::vector<Matrix> joints;
        for (const auto& text : args.joints) joints.push_back(parse_joint(text, raw->covariate_names));

        RunManifest manifest = base_manifest("infer", argv, args.fit);
        manifest.config["gamma"] = args.gamma ? json(*args.gamma) : json("cv");
        manifest.config["gamma_folds"] = args.gamma_folds;
        manifest.config["alpha"] = args.alpha;
        manifest.config["threshold_alpha"] = args.threshold_alpha;
        manifest.config["threshold_denominator"] = args.threshold_denominator;
        manifest.config["contrasts"] = args.contrasts;
        manifest.config["joints"] = args.joints;

        const FittedLasso f = run_lasso(args.fit, *raw, manifest);
        const SurvivalDataset& ds = f.work;
        const CoxData data(ds);
        Vector grad;
        SigmaHat sigma;
        {
            StageTimer t(manifest, "sigma_hat");
            data.value_and_score(f.fit.beta, grad);
            sigma = data.sigma_hat(f.fit.beta);
        }
        std::optional<GammaCurve> gamma_curve;
        double gamma = 0.0;
        if (args.gamma) {
            gamma = *args.gamma;
        } else {
            StageTimer t(manifest, "cv_gamma");
            GammaCvOptions opts;
            opts.folds = args.gamma_folds;
            opts.alpha = args.threshold_alpha;
            opts.seed = args.fit.seed;
            opts.denominator = denominator;
            opts.threads = args.fit.threads;
            gamma_curve = cv_gamma(ds, default_gamma_grid(ds.n(), ds.p()), lasso_training_fit(f.fit.lambda), opts);
            gamma = gamma_curve->chosen_gamma();
        }
        ThetaHat theta;
        {
            StageTimer t(manifest, "estimate_theta");
            ThetaOptions opts;
            opts.threads = args.fit.threads;
            theta = estimate_theta(sigma, gamma, opts);
        }
        // Back to the original covariate scale: beta_orig = D^{-1} beta_std, Theta_orig = D^{-1} Theta D^{-1}.
        const Vector inv_scale = f.scaling.scales.cwiseInverse();
        const Vector b_std = debias(f.fit.beta, theta.matrix, grad);
        const Vector b = b_std.cwiseProduct(inv_scale);
        const Matrix theta_orig = inv_scale.asDiagonal() * theta.matrix * inv_scale.asDiagonal();
        StageTimer t(manifest, "report");
        const auto inf = make_inference(b, theta_orig, ds.n(), args.alpha, ds.covariate_names);
        const auto table = report_table(inf, ds.covariate_names, args.sort_by_p);

        json j;
        j["n"] = ds.n();
        j["p"] = ds.p();
        j["alpha"] = args.alpha;
        j["lambda"] = f.fit.lambda;
        j["lambda_source"] = f.cv ? "cv" : "fixed";
        if (f.cv) j["cv_lambda"] = to_json(*f.cv);
        j["gamma"] = gamma;
        j["gamma_source"] = gamma_curve ? "cv" : "fixed";
        if (gamma_curve) j["cv_gamma"] = to_json(*gamma_curve);
        j["theta"] = to_json(theta, args.write_theta);
        j["lasso_beta"] = vector_json(unscale_coefficients(f.fit.beta, f.scaling));
        j["coefficients"] = to_json(table);
        json lin = json::array();
        for (const auto& c : contrasts) {
            lin.push_back(to_json(wald_test(b, theta_orig, ds.n(), c.c, c.a0, args.alpha), c.text));
        }
        j["linear_tests"] = lin;
        json multi = json::array();
        for (std::size_t k = 0; k < joints.size(); ++k) {
            const Vector a0 = Vector::Zero(joints[k].rows());
            multi.push_back(to_json(chisq_test(b, theta_orig, ds.n(), joints[k], a0, args.alpha), {args.joints[k]}));
        }
        j["joint_tests"] = multi;

        prepare_out(args.fit.out);
        const std::string digest = manifest.digest();
        write_json(fs::path(args.fit.out) / "inference.json", j, digest);
        write_csv(fs::path(args.fit.out) / "coefficients.csv", coefficient_csv_header(), coefficient_csv_rows(table),
                  digest);
        write_manifest(args.fit.out, manifest);

        std::cout << "lambda = " << format_double(f.fit.lambda) << ", gamma = " << format_double(gamma) << '\n';
        std::printf("%-16s %12s %12s %10s %12s\n", "covariate", "estimate", "se", "z", "p");
        for (const auto& r : table) {
            std::printf("%-16s %12.5f %12.5f %10.3f %12.4g\n", r.label.c_str(), r.estimate, r.se, r.statistic,
                        r.p_value);
        }
        return int(kOk);
    });
}

int cmd_simulate(const SimulateArgs& args, const std::vector<std::string>& argv) {
    return guarded([&] {
        ConfigTable table = ConfigTable::load(args.config);
        if (args.replications) table.set("replications", {static_cast<double>(*args.replications)});
        if (args.seed) table.set("seed", {static_cast<double>(*args.seed)});
        ExperimentSpec spec = experiment_from_config(table);
        if (args.threads > 0) spec.threads = args.threads;

        RunManifest manifest;
        manifest.command = "simulate";
        manifest.argv = argv;
        manifest.add_input(args.config);
        manifest.config = to_json(spec);
        manifest.seeds["scenario"] = spec.config.seed;

        SimSummary summary;
        {
            StageTimer t(manifest, "run_replications");
            summary = run_replications(spec);
        }
        prepare_out(args.out);
        const std::string digest = manifest.digest();
        json j = to_json(summary);
        j["config"] = manifest.config;
        write_json(fs::path(args.out) / "summary.json", j, digest);
        write_csv(fs::path(args.out) / "summary.csv", summary_csv_header(), summary_csv_rows(summary), digest);
        write_csv(fs::path(args.out) / "replications.csv", replication_csv_header(),
                  replication_csv_rows(summary, spec.targets), digest);
        write_manifest(args.out, manifest);

        std::printf("R = %d, mean censoring = %.4f\n", summary.replications, summary.mean_censoring_fraction);
        std::printf("%-28s %-10s %9s %9s %9s %9s %5s\n", "method", "target", "bias", "coverage", "se", "mse", "fail");
        for (const auto& r : summary.rows) {
            std::printf("%-28s %-10s %9.4f %9.4f %9.4f %9.5f %5d\n", r.method.c_str(), r.target.c_str(), r.bias,
                        r.coverage, r.mean_se, r.mse, r.failures);
        }
        return int(kOk);
    });
}

int cmd_bench_qp(const BenchArgs& args, const std::vector<std::string>& argv) {
    return guarded([&] {
        if (args.repetitions < 1) throw Error(ErrorCode::InvalidArgument, "--repetitions must be >= 1");
        RunManifest manifest;
        manifest.command = "bench qp";
        manifest.argv = argv;
        manifest.config = {{"p_grid", args.p_grid},   {"gamma_multipliers", args.gamma_multipliers},
                           {"repetitions", args.repetitions}, {"n", args.n},
                           {"rho", args.rho},         {"threads", args.threads}};
        manifest.seeds["scenario"] = args.seed;

        std::vector<std::vector<std::string>> rows, row_rows;
        for (int p : args.p_grid) {
            SimConfig cfg;
            cfg.n = args.n;
            cfg.p = p;
            cfg.cov = CovStructure::ar1;
            cfg.rho = args.rho;
            cfg.beta0 = beta0_benchmark(p, 1.0);
            cfg.seed = args.seed;
            const auto ds = generate_dataset(cfg, 0);
            const double base = std::sqrt(std::log(static_cast<double>(p)) / static_cast<double>(args.n));
            const CoxData data(ds);
            const Vector beta = fit_lasso(data, base, Vector::Zero(p)).beta;
            const SigmaHat sigma = data.sigma_hat(beta);
            for (double mult : args.gamma_multipliers) {
                const double gamma = mult * base;
                double total = 0.0, row_total = 0.0, active = 0.0;
                std::vector<double> per_row(static_cast<std::size_t>(p), 0.0);
                for (int rep = 0; rep < args.repetitions; ++rep) {
                    ThetaOptions opts;
                    opts.threads = args.threads;
                    const auto start = std::chrono::steady_clock::now();
                    const ThetaHat theta = estimate_theta(sigma, gamma, opts);
                    total += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
                    for (std::size_t j = 0; j < per_row.size(); ++j) {
                        per_row[j] += theta.row_seconds[j];
                        row_total += theta.row_seconds[j];
                        active += static_cast<double>(theta.row_active[j]);
                    }
                }
                const double reps = args.repetitions;
                rows.push_back({std::to_string(p), format_double(mult), format_double(gamma), format_double(total / reps),
                                format_double(row_total / (reps * p)), format_double(active / (reps * p))});
                for (std::size_t j = 0; j < per_row.size(); ++j) {
                    row_rows.push_back({std::to_string(p), format_double(gamma), std::to_string(j),
                                        format_double(per_row[j] / reps)});
                }
                std::printf("p = %4d  gamma = %.5f  mean %.4f s  row %.3g s\n", p, gamma, total / reps,
                            row_total / (reps * p));
            }
        }
        prepare_out(args.out);
        const std::string digest = manifest.digest();
        write_csv(fs::path(args.out) / "bench_qp.csv",
                  {"p", "gamma_multiplier", "gamma", "mean_seconds", "mean_row_seconds", "mean_active_set"}, rows,
                  digest);
        if (args.row_csv) {
            write_csv(fs::path(args.out) / "bench_qp_rows.csv", {"p", "gamma", "row", "mean_seconds"}, row_rows, digest);
        }
        write_manifest(args.out, manifest);
        return int(kOk);
    });
}

}  // namespace dlcox::cli
