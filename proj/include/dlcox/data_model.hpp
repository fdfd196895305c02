#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dlcox {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Right-censored survival data: observed time, event indicator and an n x p
/// covariate matrix. Plain value type; treated as immutable once built.
struct SurvivalDataset {
    Vector times;
    std::vector<int> status;
    Matrix covariates;
    std::vector<std::string> covariate_names;

    Eigen::Index n() const { return covariates.rows(); }
    Eigen::Index p() const { return covariates.cols(); }
    Eigen::Index event_count() const;
};

struct TieGroup {
    Eigen::Index start = 0;  // first sorted position of the group
    Eigen::Index end = 0;    // one past the last sorted position
    double time = 0.0;
    Eigen::Index events = 0;
};

/// Time-sorted view of a dataset. Under the Breslow convention every subject
/// in a tie group shares the risk set {sorted positions >= group.start}.
struct RiskIndex {
    std::vector<Eigen::Index> order;            // sorted position -> subject
    std::vector<Eigen::Index> event_positions;  // sorted positions with status 1
    std::vector<TieGroup> tie_groups;           // ascending in time
    std::vector<Eigen::Index> group_of;         // sorted position -> tie group

    Eigen::Index risk_set_size(std::size_t group) const;
};

struct ScalingInfo {
    Vector centers;
    Vector scales;

    static ScalingInfo identity(Eigen::Index p);
};

enum class StandardizeMode { none, center, zscore };

struct Violation {
    std::string code;
    Eigen::Index row = -1;  // -1: not tied to a row
    Eigen::Index col = -1;
};

struct ValidationReport {
    std::vector<Violation> violations;

    bool ok() const { return violations.empty(); }
    /// One JSON object per line: {"code":..., "row":..., "col":...}
    std::string to_json_lines() const;
};

SurvivalDataset make_dataset(Vector times, std::vector<int> status, Matrix covariates,
                             std::vector<std::string> names = {});

ValidationReport validate(const SurvivalDataset& ds);
void require_valid(const SurvivalDataset& ds);

/// Parses without validating the survival invariants (structural errors still throw).
SurvivalDataset parse_csv(const std::filesystem::path& path, const std::string& time_col = "time",
                          const std::string& status_col = "status");
SurvivalDataset parse_csv_text(const std::string& text, const std::string& time_col = "time",
                               const std::string& status_col = "status");
SurvivalDataset load_csv(const std::filesystem::path& path, const std::string& time_col = "time",
                         const std::string& status_col = "status");

void write_csv(const SurvivalDataset& ds, const std::filesystem::path& path);
std::string to_csv_text(const SurvivalDataset& ds);

std::pair<SurvivalDataset, ScalingInfo> standardize(const SurvivalDataset& ds, StandardizeMode mode);
StandardizeMode parse_standardize_mode(const std::string& s);

/// Maps a coefficient (or its standard error) fitted on standardized data back
/// to the original covariate scale.
Vector unscale_coefficients(const Vector& beta, const ScalingInfo& info);

RiskIndex risk_index(const SurvivalDataset& ds);

SurvivalDataset subset_rows(const SurvivalDataset& ds, std::span<const Eigen::Index> rows);
SurvivalDataset subset_columns(const SurvivalDataset& ds, std::span<const Eigen::Index> cols);

}  // namespace dlcox
