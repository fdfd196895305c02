#include "dlcox/data_model.hpp"

#include "dlcox/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace dlcox {

std::string_view error_code_name(ErrorCode code) {
    switch (code) {
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::NonNumericCell: return "NonNumericCell";
    case ErrorCode::EmptyFile: return "EmptyFile";
    case ErrorCode::FileNotFound: return "FileNotFound";
    case ErrorCode::InvalidDataset: return "InvalidDataset";
    case ErrorCode::ConstantColumn: return "ConstantColumn";
    case ErrorCode::EmptyRiskSet: return "EmptyRiskSet";
    case ErrorCode::NonFiniteLinearPredictor: return "NonFiniteLinearPredictor";
    case ErrorCode::NonFiniteObjective: return "NonFiniteObjective";
    case ErrorCode::MaxIterExceeded: return "MaxIterExceeded";
    case ErrorCode::SingularHessian: return "SingularHessian";
    case ErrorCode::MonotoneLikelihood: return "MonotoneLikelihood";
    case ErrorCode::FoldWithoutEvents: return "FoldWithoutEvents";
    case ErrorCode::Infeasible: return "Infeasible";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::MaxActiveSetChanges: return "MaxActiveSetChanges";
    case ErrorCode::NonPositiveDiagonal: return "NonPositiveDiagonal";
    case ErrorCode::NonPositiveVariance: return "NonPositiveVariance";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::RankDeficientA: return "RankDeficientA";
    case ErrorCode::NonPdF: return "NonPdF";
    case ErrorCode::EmptySupport: return "EmptySupport";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

Eigen::Index SurvivalDataset::event_count() const {
    return std::count(status.begin(), status.end(), 1);
}

Eigen::Index RiskIndex::risk_set_size(std::size_t group) const {
    return static_cast<Eigen::Index>(order.size()) - tie_groups.at(group).start;
}

ScalingInfo ScalingInfo::identity(Eigen::Index p) {
    return {Vector::Zero(p), Vector::Ones(p)};
}

std::string ValidationReport::to_json_lines() const {
    std::ostringstream out;
    auto index = [](Eigen::Index v) { return v < 0 ? std::string("null") : std::to_string(v); };
    for (const auto& v : violations) {
        out << "{\"code\":\"" << v.code << "\",\"row\":" << index(v.row)
            << ",\"col\":" << index(v.col) << "}\n";
    }
    return out.str();
}

SurvivalDataset make_dataset(Vector times, std::vector<int> status, Matrix covariates,
                             std::vector<std::string> names) {
    SurvivalDataset ds{std::move(times), std::move(status), std::move(covariates), std::move(names)};
    if (ds.covariate_names.empty()) {
        for (Eigen::Index j = 0; j < ds.p(); ++j) ds.covariate_names.push_back("x" + std::to_string(j + 1));
    }
    require_valid(ds);
    return ds;
}

ValidationReport validate(const SurvivalDataset& ds) {
    ValidationReport report;
    auto flag = [&](std::string code, Eigen::Index row = -1, Eigen::Index col = -1) {
        report.violations.push_back({std::move(code), row, col});
    };
    const Eigen::Index n = ds.covariates.rows();
    if (ds.times.size() != n || static_cast<Eigen::Index>(ds.status.size()) != n) {
        flag("ShapeMismatch");
        return report;
    }
    if (!ds.covariate_names.empty() && static_cast<Eigen::Index>(ds.covariate_names.size()) != ds.p()) {
        flag("ShapeMismatch");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!std::isfinite(ds.times[i])) flag("NonFiniteTime", i);
        else if (ds.times[i] < 0.0) flag("NegativeTime", i);
        if (ds.status[i] != 0 && ds.status[i] != 1) flag("InvalidStatus", i);
    }
    for (Eigen::Index j = 0; j < ds.p(); ++j) {
        for (Eigen::Index i = 0; i < n; ++i) {
            if (!std::isfinite(ds.covariates(i, j))) flag("NonFiniteCovariate", i, j);
        }
    }
    if (n < 2) flag("TooFewSubjects");
    if (ds.event_count() == 0) flag("NoEvents");
    return report;
}

void require_valid(const SurvivalDataset& ds) {
    auto report = validate(ds);
    if (report.ok()) return;
    std::string msg;
    for (const auto& v : report.violations) {
        if (!msg.empty()) msg += "; ";
        msg += v.code;
        if (v.row >= 0) msg += " at row " + std::to_string(v.row);
        if (v.col >= 0) msg += " col " + std::to_string(v.col);
        if (msg.size() > 400) {
            msg += "; ...";
            break;
        }
    }
    throw Error(ErrorCode::InvalidDataset, msg);
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    bool quoted = false;
    for (char c : line) {
        if (c == '"') {
            quoted = !quoted;
        } else if (c == ',' && !quoted) {
            cells.push_back(cell);
            cell.clear();
        } else if (c != '\r') {
            cell.push_back(c);
        }
    }
    cells.push_back(cell);
    for (auto& s : cells) {
        auto b = s.find_first_not_of(" \t");
        auto e = s.find_last_not_of(" \t");
        s = b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    }
    return cells;
}

std::optional<double> parse_number(const std::string& s) {
    if (s.empty()) return std::nullopt;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (*first == '+') ++first;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) return std::nullopt;
    return v;
}

}  // namespace

SurvivalDataset parse_csv_text(const std::string& text, const std::string& time_col,
                               const std::string& status_col) {
    std::istringstream in(text);
    std::string line;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        header = split_line(line);
        break;
    }
    if (header.empty()) throw Error(ErrorCode::EmptyFile, "no header row");

    auto find_col = [&](const std::string& name) -> std::size_t {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw Error(ErrorCode::MissingColumn, "column '" + name + "' not found");
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t tcol = find_col(time_col);
    const std::size_t scol = find_col(status_col);

    std::vector<std::size_t> xcols;
    std::vector<std::string> names;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (c == tcol || c == scol) continue;
        xcols.push_back(c);
        names.push_back(header[c]);
    }

    std::vector<double> times;
    std::vector<int> status;
    std::vector<double> values;  // row-major
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto cells = split_line(line);
        if (cells.size() != header.size()) {
            throw Error(ErrorCode::NonNumericCell, "row " + std::to_string(row) + ": expected " +
                                                       std::to_string(header.size()) + " cells, got " +
                                                       std::to_string(cells.size()));
        }
        auto number = [&](std::size_t c) {
            auto v = parse_number(cells[c]);
            if (!v) {
                throw Error(ErrorCode::NonNumericCell, "row " + std::to_string(row) + " col " +
                                                           std::to_string(c) + " ('" + header[c] +
                                                           "'): '" + cells[c] + "'");
            }
            return *v;
        };
        times.push_back(number(tcol));
        double s = number(scol);
        // Non-integral status values are kept as an out-of-range code so validate() reports them.
        status.push_back(s == std::floor(s) && std::abs(s) < 1e9 ? static_cast<int>(s) : -1);
        for (auto c : xcols) values.push_back(number(c));
        ++row;
    }
    if (row == 0) throw Error(ErrorCode::EmptyFile, "no data rows");

    SurvivalDataset ds;
    ds.times = Eigen::Map<Vector>(times.data(), static_cast<Eigen::Index>(times.size()));
    ds.status = std::move(status);
    ds.covariates = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        values.data(), static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(xcols.size()));
    ds.covariate_names = std::move(names);
    return ds;
}

SurvivalDataset parse_csv(const std::filesystem::path& path, const std::string& time_col,
                          const std::string& status_col) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::FileNotFound, "cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_csv_text(buf.str(), time_col, status_col);
}

SurvivalDataset load_csv(const std::filesystem::path& path, const std::string& time_col,
                         const std::string& status_col) {
    auto ds = parse_csv(path, time_col, status_col);
    require_valid(ds);
    return ds;
}

std::string to_csv_text(const SurvivalDataset& ds) {
    std::string out = "time,status";
    for (const auto& name : ds.covariate_names) out += "," + name;
    out += "\n";
    char buf[64];
    auto put = [&](double v) {
        auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
        out.append(buf, ptr);
    };
    for (Eigen::Index i = 0; i < ds.n(); ++i) {
        put(ds.times[i]);
        out += "," + std::to_string(ds.status[i]);
        for (Eigen::Index j = 0; j < ds.p(); ++j) {
            out += ",";
            put(ds.covariates(i, j));
        }
        out += "\n";
    }
    return out;
}

void write_csv(const SurvivalDataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::FileNotFound, "cannot write " + path.string());
    out << to_csv_text(ds);
}

StandardizeMode parse_standardize_mode(const std::string& s) {
    if (s == "none") return StandardizeMode::none;
    if (s == "center") return StandardizeMode::center;
    if (s == "zscore") return StandardizeMode::zscore;
    throw Error(ErrorCode::InvalidArgument, "unknown standardize mode '" + s + "'");
}

std::pair<SurvivalDataset, ScalingInfo> standardize(const SurvivalDataset& ds, StandardizeMode mode) {
    auto info = ScalingInfo::identity(ds.p());
    SurvivalDataset out = ds;
    if (mode == StandardizeMode::none) return {std::move(out), std::move(info)};

    const double n = static_cast<double>(ds.n());
    for (Eigen::Index j = 0; j < ds.p(); ++j) {
        auto col = out.covariates.col(j);
        const double mean = col.mean();
        info.centers[j] = mean;
        col.array() -= mean;
        if (mode == StandardizeMode::zscore) {
            const double sd = std::sqrt(col.squaredNorm() / (n - 1.0));
            if (!(sd > 0.0)) {
                throw Error(ErrorCode::ConstantColumn,
                            "column " + std::to_string(j) + " ('" +
                                (j < static_cast<Eigen::Index>(ds.covariate_names.size()) ? ds.covariate_names[j] : "") +
                                "') is constant");
            }
            info.scales[j] = sd;
            col /= sd;
        }
    }
    return {std::move(out), std::move(info)};
}

Vector unscale_coefficients(const Vector& beta, const ScalingInfo& info) {
    return beta.cwiseQuotient(info.scales);
}

RiskIndex risk_index(const SurvivalDataset& ds) {
    RiskIndex idx;
    const Eigen::Index n = ds.n();
    idx.order.resize(n);
    std::iota(idx.order.begin(), idx.order.end(), Eigen::Index{0});
    std::stable_sort(idx.order.begin(), idx.order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return ds.times[a] < ds.times[b]; });
    idx.group_of.resize(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const Eigen::Index subject = idx.order[k];
        const double t = ds.times[subject];
        if (idx.tie_groups.empty() || idx.tie_groups.back().time != t) {
            idx.tie_groups.push_back({k, k, t, 0});
        }
        auto& g = idx.tie_groups.back();
        g.end = k + 1;
        idx.group_of[k] = static_cast<Eigen::Index>(idx.tie_groups.size()) - 1;
        if (ds.status[subject] == 1) {
            ++g.events;
            idx.event_positions.push_back(k);
        }
    }
    return idx;
}

SurvivalDataset subset_rows(const SurvivalDataset& ds, std::span<const Eigen::Index> rows) {
    SurvivalDataset out;
    const auto m = static_cast<Eigen::Index>(rows.size());
    out.times.resize(m);
    out.status.resize(rows.size());
    out.covariates.resize(m, ds.p());
    for (Eigen::Index r = 0; r < m; ++r) {
        out.times[r] = ds.times[rows[r]];
        out.status[r] = ds.status[rows[r]];
        out.covariates.row(r) = ds.covariates.row(rows[r]);
    }
    out.covariate_names = ds.covariate_names;
    return out;
}

SurvivalDataset subset_columns(const SurvivalDataset& ds, std::span<const Eigen::Index> cols) {
    SurvivalDataset out;
    out.times = ds.times;
    out.status = ds.status;
    out.covariates.resize(ds.n(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) {
        out.covariates.col(static_cast<Eigen::Index>(c)) = ds.covariates.col(cols[c]);
        if (cols[c] < static_cast<Eigen::Index>(ds.covariate_names.size())) {
            out.covariate_names.push_back(ds.covariate_names[cols[c]]);
        }
    }
    return out;
}

}  // namespace dlcox
