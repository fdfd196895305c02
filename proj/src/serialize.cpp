#include "dlcox/serialize.hpp"

#include "dlcox/error.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace dlcox {

using nlohmann::json;

std::string format_double(double v) {
    if (std::isnan(v)) return "NaN";
    if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

json vector_json(const Vector& v) {
    json j = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v[i]);
    return j;
}

json matrix_json(const Matrix& m) {
    json j = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) j.push_back(vector_json(m.row(i).transpose()));
    return j;
}

Vector vector_from_json(const json& j) {
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    return v;
}

json to_json(const CoxFit& fit, const std::vector<std::string>& names) {
    json j;
    j["lambda"] = fit.lambda;
    j["beta"] = vector_json(fit.beta);
    j["names"] = names;
    j["objective"] = fit.objective;
    j["iterations"] = fit.iterations;
    j["converged"] = fit.converged;
    j["tol"] = fit.tol;
    j["kkt_residual"] = fit.kkt_residual;
    j["objective_history"] = fit.objective_history;
    return j;
}

json to_json(const CvCurve& curve) {
    return {{"grid", curve.grid},         {"losses", curve.losses}, {"folds", curve.fold_count},
            {"chosen_index", curve.chosen}, {"chosen", curve.chosen_lambda()}, {"seed", curve.seed}};
}

json to_json(const GammaCurve& curve) {
    return {{"grid", curve.grid},     {"losses", curve.losses},         {"folds", curve.fold_count},
            {"alpha", curve.alpha},   {"chosen_index", curve.chosen}, {"chosen", curve.chosen_gamma()},
            {"seed", curve.seed}};
}

json to_json(const ThetaHat& theta, bool include_matrix) {
    json j;
    j["gamma"] = theta.gamma;
    j["ridge"] = theta.ridge;
    j["max_row_kkt"] = theta.max_row_kkt();
    j["row_active"] = theta.row_active;
    if (include_matrix) j["matrix"] = matrix_json(theta.matrix);
    return j;
}

json to_json(const std::vector<CoefficientRow>& table) {
    json j = json::array();
    for (const auto& r : table) {
        j.push_back({{"label", r.label},
                     {"estimate", r.estimate},
                     {"se", r.se},
                     {"statistic", r.statistic},
                     {"p_value", r.p_value},
                     {"ci_lower", r.ci.lower},
                     {"ci_upper", r.ci.upper}});
    }
    return j;
}

json to_json(const LinearTest& t, const std::string& text) {
    return {{"contrast", text},       {"c", vector_json(t.c)},  {"a0", t.a0},
            {"estimate", t.estimate}, {"se", t.se},             {"statistic", t.statistic},
            {"p_value", t.p_value},   {"alpha", t.alpha},       {"reject", t.reject},
            {"ci_lower", t.ci.lower}, {"ci_upper", t.ci.upper}, {"asymmetry_warning", t.asymmetry_warning}};
}

json to_json(const MultiTest& t, const std::vector<std::string>& row_names) {
    return {{"rows", row_names},   {"A", matrix_json(t.A)},   {"a0", vector_json(t.a0)},
            {"statistic", t.statistic}, {"df", t.df},         {"p_value", t.p_value},
            {"alpha", t.alpha},    {"critical", t.critical},  {"reject", t.reject}};
}

json to_json(const SimSummary& s) {
    json j;
    j["replications"] = s.replications;
    j["mean_censoring_fraction"] = s.mean_censoring_fraction;
    json rows = json::array();
    for (const auto& r : s.rows) {
        rows.push_back({{"method", r.method},
                        {"target", r.target},
                        {"truth", r.truth},
                        {"bias", r.bias},
                        {"coverage", r.coverage},
                        {"mean_se", r.mean_se},
                        {"empirical_sd", r.empirical_sd},
                        {"mse", r.mse},
                        {"replications", r.replications},
                        {"failures", r.failures}});
    }
    j["rows"] = rows;
    j["failure_reasons"] = s.failure_reasons;
    return j;
}

namespace {

const char* cov_name(CovStructure c) { return c == CovStructure::ar1 ? "ar1" : "independent"; }

const char* censoring_name(CensoringKind c) {
    switch (c) {
    case CensoringKind::none: return "none";
    case CensoringKind::exponential: return "exponential";
    case CensoringKind::uniform: return "uniform";
    }
    return "unknown";
}

}  // namespace

json to_json(const SimConfig& cfg) {
    return {{"n", cfg.n},
            {"p", cfg.p},
            {"beta0", vector_json(cfg.beta0)},
            {"cov", cov_name(cfg.cov)},
            {"rho", cfg.rho},
            {"truncation", cfg.truncation},
            {"truncation_order", "per-entry after correlated draw"},
            {"censoring", censoring_name(cfg.censoring)},
            {"kappa", cfg.kappa},
            {"uniform_a", cfg.uniform_a},
            {"uniform_b", cfg.uniform_b},
            {"seed", cfg.seed}};
}

json to_json(const ExperimentSpec& spec) {
    json j;
    j["scenario"] = to_json(spec.config);
    json methods = json::array();
    for (Method m : spec.methods) methods.push_back(method_name(m));
    j["methods"] = methods;
    json targets = json::array();
    for (const auto& t : spec.targets) targets.push_back({{"name", t.name}, {"c", vector_json(t.c)}});
    j["targets"] = targets;
    j["replications"] = spec.replications;
    j["alpha"] = spec.alpha;
    const auto& s = spec.settings;
    json settings;
    settings["lambda"] = s.lambda ? json(*s.lambda) : json("cv");
    settings["lambda_folds"] = s.lambda_folds;
    settings["lambda_grid_count"] = s.lambda_grid_count;
    settings["lambda_ratio"] = s.lambda_ratio;
    settings["gamma"] = s.gamma ? json(*s.gamma) : json("cv");
    settings["gamma_grid"] = s.gamma_grid;
    settings["gamma_sweep"] = s.gamma_sweep;
    settings["gamma_folds"] = s.gamma_folds;
    settings["threshold_alpha"] = s.threshold_alpha;
    settings["threshold_denominator"] = s.denominator == ThresholdDenominator::diag ? "diag" : "sqrt-diag";
    settings["lasso_tol"] = s.lasso.tol;
    settings["lasso_max_iter"] = s.lasso.max_iter;
    settings["mple_tol"] = s.mple.tol;
    settings["mple_max_iter"] = s.mple.max_iter;
    settings["qp_tol"] = s.qp_tol;
    j["settings"] = settings;
    return j;
}

void write_json(const std::filesystem::path& path, json j, const std::string& manifest_digest) {
    j["schema_version"] = kSchemaVersion;
    j["manifest_digest"] = manifest_digest;
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::FileNotFound, "cannot write '" + path.string() + "'");
    out << j.dump(2) << '\n';
}

namespace {

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + "\"";
}

}  // namespace

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows, const std::string& manifest_digest) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::FileNotFound, "cannot write '" + path.string() + "'");
    out << "# manifest_digest=" << manifest_digest << '\n';
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << csv_field(cells[i]);
        out << '\n';
    };
    line(header);
    for (const auto& r : rows) line(r);
}

std::vector<std::string> summary_csv_header() {
    return {"method", "target", "truth", "bias", "coverage", "se", "empirical_sd", "mse", "R", "failures"};
}

std::vector<std::vector<std::string>> summary_csv_rows(const SimSummary& s) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& r : s.rows) {
        rows.push_back({r.method, r.target, format_double(r.truth), format_double(r.bias), format_double(r.coverage),
                        format_double(r.mean_se), format_double(r.empirical_sd), format_double(r.mse),
                        std::to_string(r.replications), std::to_string(r.failures)});
    }
    return rows;
}

std::vector<std::string> replication_csv_header() {
    return {"replication", "method", "target", "estimate", "se", "covered", "gamma", "lambda", "failure"};
}

std::vector<std::vector<std::string>> replication_csv_rows(const SimSummary& s, const std::vector<Target>& targets) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& rec : s.records) {
        for (const auto& o : rec.outcomes) {
            for (std::size_t t = 0; t < targets.size(); ++t) {
                if (o.failed) {
                    rows.push_back({std::to_string(rec.replication), o.method, targets[t].name, "", "", "",
                                    format_double(o.gamma), format_double(o.lambda), o.failure});
                    continue;
                }
                const auto& e = o.targets[t];
                rows.push_back({std::to_string(rec.replication), o.method, targets[t].name, format_double(e.estimate),
                                format_double(e.se), e.covered ? (*e.covered ? "1" : "0") : "",
                                format_double(o.gamma), format_double(o.lambda), ""});
            }
        }
    }
    return rows;
}

std::vector<std::string> coefficient_csv_header() {
    return {"label", "estimate", "se", "statistic", "p_value", "ci_lower", "ci_upper"};
}

std::vector<std::vector<std::string>> coefficient_csv_rows(const std::vector<CoefficientRow>& table) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& r : table) {
        rows.push_back({r.label, format_double(r.estimate), format_double(r.se), format_double(r.statistic),
                        format_double(r.p_value), format_double(r.ci.lower), format_double(r.ci.upper)});
    }
    return rows;
}

}  // namespace dlcox
