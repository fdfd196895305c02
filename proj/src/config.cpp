#include "dlcox/config.hpp"

#include "dlcox/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <charconv>
#include <fstream>
#include <sstream>

namespace dlcox {

namespace {

[[noreturn]] void config_error(const std::string& msg) { throw Error(ErrorCode::ConfigError, msg); }

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    const char* first = s.data();
    if (*first == '+') ++first;
    const auto res = std::from_chars(first, s.data() + s.size(), out);
    if (res.ec == std::errc() && res.ptr == s.data() + s.size()) return true;
    if (s == "inf" || s == "+inf") {
        out = std::numeric_limits<double>::infinity();
        return true;
    }
    return false;
}

// Strips a trailing comment that is not inside a quoted string.
std::string strip_comment(const std::string& line) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') quoted = !quoted;
        if (line[i] == '#' && !quoted) return line.substr(0, i);
    }
    return line;
}

std::variant<double, std::string> scalar(const std::string& raw, const std::string& where) {
    const std::string s = trim(raw);
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') return s.substr(1, s.size() - 2);
    double v = 0.0;
    if (parse_double(s, v)) return v;
    config_error(where + ": cannot parse value '" + s + "'");
}

ConfigValue parse_value(const std::string& raw, const std::string& where) {
    const std::string s = trim(raw);
    if (s.empty()) config_error(where + ": missing value");
    if (s == "true") return {true};
    if (s == "false") return {false};
    if (s.front() == '[') {
        if (s.back() != ']') config_error(where + ": unterminated array");
        ConfigValue::Array arr;
        const std::string body = trim(s.substr(1, s.size() - 2));
        if (body.empty()) return {arr};
        std::string item;
        bool quoted = false;
        for (char ch : body) {
            if (ch == '"') quoted = !quoted;
            if (ch == ',' && !quoted) {
                arr.push_back(scalar(item, where));
                item.clear();
            } else {
                item += ch;
            }
        }
        if (!trim(item).empty()) arr.push_back(scalar(item, where));
        return {arr};
    }
    const auto v = scalar(s, where);
    if (std::holds_alternative<double>(v)) return {std::get<double>(v)};
    return {std::get<std::string>(v)};
}

}  // namespace

ConfigTable ConfigTable::parse(const std::string& text, const std::string& origin) {
    ConfigTable table;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string where = origin + ":" + std::to_string(lineno);
        const std::string s = trim(strip_comment(line));
        if (s.empty()) continue;
        if (s.front() == '[' && s.find('=') == std::string::npos) {
            if (s.back() != ']') config_error(where + ": bad section header");
            section = trim(s.substr(1, s.size() - 2));
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos) config_error(where + ": expected key = value");
        std::string key = trim(s.substr(0, eq));
        if (key.empty()) config_error(where + ": empty key");
        if (!section.empty()) key = section + "." + key;
        if (table.values_.count(key)) config_error(where + ": duplicate key '" + key + "'");
        table.values_[key] = parse_value(s.substr(eq + 1), where);
    }
    return table;
}

ConfigTable ConfigTable::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::FileNotFound, "cannot open config '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse(buf.str(), path);
}

const ConfigValue& ConfigTable::at(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) config_error("missing key '" + key + "'");
    read_[key] = true;
    return it->second;
}

double ConfigTable::number(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    const auto& v = at(key);
    if (!v.is_number()) config_error("key '" + key + "' must be a number");
    return std::get<double>(v.data);
}

long long ConfigTable::integer(const std::string& key, long long fallback) const {
    const double v = number(key, static_cast<double>(fallback));
    if (v != std::floor(v) || std::abs(v) > 9.0e15) config_error("key '" + key + "' must be an integer");
    return static_cast<long long>(v);
}

std::string ConfigTable::string(const std::string& key, const std::string& fallback) const {
    if (!has(key)) return fallback;
    const auto& v = at(key);
    if (!v.is_string()) config_error("key '" + key + "' must be a string");
    return std::get<std::string>(v.data);
}

bool ConfigTable::boolean(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const auto& v = at(key);
    if (!v.is_bool()) config_error("key '" + key + "' must be true or false");
    return std::get<bool>(v.data);
}

std::vector<double> ConfigTable::numbers(const std::string& key) const {
    const auto& v = at(key);
    if (v.is_number()) return {std::get<double>(v.data)};
    if (!v.is_array()) config_error("key '" + key + "' must be an array of numbers");
    std::vector<double> out;
    for (const auto& item : std::get<ConfigValue::Array>(v.data)) {
        if (!std::holds_alternative<double>(item)) config_error("key '" + key + "' must hold numbers only");
        out.push_back(std::get<double>(item));
    }
    return out;
}

std::vector<std::string> ConfigTable::strings(const std::string& key) const {
    const auto& v = at(key);
    if (v.is_string()) return {std::get<std::string>(v.data)};
    if (!v.is_array()) config_error("key '" + key + "' must be an array of strings");
    std::vector<std::string> out;
    for (const auto& item : std::get<ConfigValue::Array>(v.data)) {
        if (!std::holds_alternative<std::string>(item)) config_error("key '" + key + "' must hold strings only");
        out.push_back(std::get<std::string>(item));
    }
    return out;
}

std::vector<std::string> ConfigTable::unused_keys() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : values_) {
        if (!read_.count(k)) out.push_back(k);
    }
    return out;
}

Contrast parse_contrast(const std::string& text, const std::vector<std::string>& names) {
    Contrast out;
    out.text = text;
    out.c = Vector::Zero(static_cast<Eigen::Index>(names.size()));
    std::string lhs = text;
    const auto eq = text.find('=');
    if (eq != std::string::npos) {
        lhs = text.substr(0, eq);
        if (!parse_double(trim(text.substr(eq + 1)), out.a0)) {
            throw Error(ErrorCode::InvalidArgument, "contrast '" + text + "': right-hand side must be a number");
        }
    }
    // Split into signed terms "coef*name" or "name".
    std::vector<std::pair<double, std::string>> terms;
    std::string cur;
    double sign = 1.0;
    bool dangling = false;  // an operator not yet followed by a term
    auto flush = [&] {
        const std::string t = trim(cur);
        cur.clear();
        if (t.empty()) return;
        double coef = 1.0;
        std::string name = t;
        const auto star = t.find('*');
        if (star != std::string::npos) {
            name = trim(t.substr(star + 1));
            if (!parse_double(trim(t.substr(0, star)), coef)) {
                throw Error(ErrorCode::InvalidArgument, "contrast '" + text + "': bad coefficient in '" + t + "'");
            }
        }
        terms.emplace_back(sign * coef, name);
    };
    for (std::size_t i = 0; i < lhs.size(); ++i) {
        const char ch = lhs[i];
        // A sign after 'e' inside a number is an exponent, not a term break.
        const bool exponent = i > 0 && (lhs[i - 1] == 'e' || lhs[i - 1] == 'E') && i > 1 &&
                              std::isdigit(static_cast<unsigned char>(lhs[i - 2])) &&
                              cur.find('*') == std::string::npos;
        if ((ch == '+' || ch == '-') && !exponent) {
            if (dangling) throw Error(ErrorCode::InvalidArgument, "contrast '" + text + "': missing term");
            flush();
            sign = ch == '-' ? -1.0 : 1.0;
            dangling = true;
        } else {
            cur += ch;
            if (!std::isspace(static_cast<unsigned char>(ch))) dangling = false;
        }
    }
    if (dangling) throw Error(ErrorCode::InvalidArgument, "contrast '" + text + "': missing term");
    flush();
    if (terms.empty()) throw Error(ErrorCode::InvalidArgument, "contrast '" + text + "' has no terms");
    for (const auto& [coef, name] : terms) {
        auto it = std::find(names.begin(), names.end(), name);
        if (it == names.end()) {
            throw Error(ErrorCode::InvalidArgument, "contrast '" + text + "': unknown covariate '" + name + "'");
        }
        out.c[it - names.begin()] += coef;
    }
    return out;
}

Matrix parse_joint(const std::string& text, const std::vector<std::string>& names) {
    std::vector<Eigen::Index> rows;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const std::string name = trim(item);
        auto it = std::find(names.begin(), names.end(), name);
        if (it == names.end()) throw Error(ErrorCode::InvalidArgument, "--joint: unknown covariate '" + name + "'");
        rows.push_back(it - names.begin());
    }
    if (rows.empty()) throw Error(ErrorCode::InvalidArgument, "--joint needs at least one covariate");
    Matrix a = Matrix::Zero(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(names.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) a(static_cast<Eigen::Index>(r), rows[r]) = 1.0;
    return a;
}

namespace {

CovStructure parse_cov(const std::string& s) {
    if (s == "independent") return CovStructure::independent;
    if (s == "ar1") return CovStructure::ar1;
    config_error("cov must be \"independent\" or \"ar1\", got '" + s + "'");
}

CensoringKind parse_censoring(const std::string& s) {
    if (s == "none") return CensoringKind::none;
    if (s == "exponential") return CensoringKind::exponential;
    if (s == "uniform") return CensoringKind::uniform;
    config_error("censoring must be none, exponential or uniform, got '" + s + "'");
}

}  // namespace

ExperimentSpec experiment_from_config(const ConfigTable& t) {
    ExperimentSpec spec;
    SimConfig& cfg = spec.config;
    cfg.n = t.integer("n", cfg.n);
    cfg.p = t.integer("p", cfg.p);
    cfg.cov = parse_cov(t.string("cov", "independent"));
    cfg.rho = t.number("rho", cfg.rho);
    cfg.truncation = t.number("truncation", cfg.truncation);
    cfg.censoring = parse_censoring(t.string("censoring", "uniform"));
    cfg.kappa = t.number("kappa", cfg.kappa);
    cfg.uniform_a = t.number("uniform_a", cfg.uniform_a);
    cfg.uniform_b = t.number("uniform_b", cfg.uniform_b);
    cfg.seed = static_cast<std::uint64_t>(t.integer("seed", static_cast<long long>(cfg.seed)));
    if (cfg.p < 1) config_error("p must be >= 1");

    if (t.has("beta0") && t.at("beta0").is_array()) {
        const auto v = t.numbers("beta0");
        cfg.beta0 = Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
    } else {
        const std::string layout = t.string("beta0", "benchmark");
        if (layout == "benchmark") cfg.beta0 = beta0_benchmark(cfg.p, t.number("beta1", 1.0));
        else if (layout == "tuning") cfg.beta0 = beta0_tuning(cfg.p);
        else if (layout == "zero") cfg.beta0 = Vector::Zero(cfg.p);
        else config_error("beta0 must be an array or one of benchmark, tuning, zero");
    }

    spec.methods.clear();
    const auto methods = t.has("methods") ? t.strings("methods") : std::vector<std::string>{"qp_debias"};
    for (const auto& m : methods) spec.methods.push_back(parse_method(m));
    spec.replications = static_cast<int>(t.integer("replications", spec.replications));
    spec.alpha = t.number("alpha", spec.alpha);
    spec.threads = static_cast<int>(t.integer("threads", spec.threads));

    std::vector<std::string> names;
    for (Eigen::Index j = 0; j < cfg.p; ++j) names.push_back("x" + std::to_string(j + 1));
    const auto targets = t.has("targets") ? t.strings("targets") : std::vector<std::string>{"x1"};
    for (const auto& expr : targets) {
        try {
            const Contrast c = parse_contrast(expr, names);
            if (c.a0 != 0.0) config_error("target '" + expr + "' must not have a right-hand side");
            spec.targets.push_back({expr, c.c});
        } catch (const Error& e) {
            if (e.code() == ErrorCode::ConfigError) throw;
            config_error(e.what());
        }
    }

    MethodSettings& s = spec.settings;
    if (t.has("lambda")) s.lambda = t.number("lambda", 0.0);
    s.lambda_folds = static_cast<int>(t.integer("lambda_folds", s.lambda_folds));
    s.lambda_grid_count = static_cast<int>(t.integer("lambda_grid_count", s.lambda_grid_count));
    s.lambda_ratio = t.number("lambda_ratio", s.lambda_ratio);
    if (t.has("gamma")) s.gamma = t.number("gamma", 0.0);
    auto grid_or_default = [&](const std::string& key) {
        if (t.at(key).is_string()) {
            if (t.string(key, "") != "default") config_error(key + " must be an array or \"default\"");
            return default_gamma_grid(cfg.n, cfg.p);
        }
        return t.numbers(key);
    };
    if (t.has("gamma_grid")) s.gamma_grid = grid_or_default("gamma_grid");
    if (t.has("gamma_sweep")) s.gamma_sweep = grid_or_default("gamma_sweep");
    s.gamma_folds = static_cast<int>(t.integer("gamma_folds", s.gamma_folds));
    s.threshold_alpha = t.number("threshold_alpha", s.threshold_alpha);
    try {
        s.denominator = parse_threshold_denominator(t.string("threshold_denominator", "sqrt-diag"));
    } catch (const Error& e) {
        config_error(e.what());
    }
    s.lasso.tol = t.number("lasso_tol", s.lasso.tol);
    s.lasso.max_iter = static_cast<int>(t.integer("lasso_max_iter", s.lasso.max_iter));
    s.mple.tol = t.number("mple_tol", s.mple.tol);
    s.mple.max_iter = static_cast<int>(t.integer("mple_max_iter", s.mple.max_iter));
    s.qp_tol = t.number("qp_tol", s.qp_tol);

    const auto unused = t.unused_keys();
    if (!unused.empty()) config_error("unknown config key '" + unused.front() + "'");
    if (spec.replications < 1) config_error("replications must be >= 1");
    if (!(spec.alpha > 0.0 && spec.alpha < 1.0)) config_error("alpha must be in (0, 1)");
    if (s.lambda_folds < 2 || s.gamma_folds < 2) config_error("folds must be >= 2");
    validate_config(cfg);
    return spec;
}

}  // namespace dlcox
