#pragma once

#include "dlcox/inference.hpp"
#include "dlcox/lasso_path.hpp"
#include "dlcox/sim_engine.hpp"
#include "dlcox/theta_inverse.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace dlcox {

inline constexpr int kSchemaVersion = 1;

/// %.17g: enough digits for any double to round-trip.
std::string format_double(double v);

nlohmann::json vector_json(const Vector& v);
nlohmann::json matrix_json(const Matrix& m);
Vector vector_from_json(const nlohmann::json& j);

nlohmann::json to_json(const CoxFit& fit, const std::vector<std::string>& names);
nlohmann::json to_json(const CvCurve& curve);
nlohmann::json to_json(const GammaCurve& curve);
nlohmann::json to_json(const ThetaHat& theta, bool include_matrix);
nlohmann::json to_json(const std::vector<CoefficientRow>& table);
nlohmann::json to_json(const LinearTest& test, const std::string& text);
nlohmann::json to_json(const MultiTest& test, const std::vector<std::string>& row_names);
nlohmann::json to_json(const SimSummary& summary);
nlohmann::json to_json(const SimConfig& cfg);
nlohmann::json to_json(const ExperimentSpec& spec);

/// Writes j with schema_version and manifest_digest fields added.
void write_json(const std::filesystem::path& path, nlohmann::json j, const std::string& manifest_digest);

/// Writes a CSV whose first line is "# manifest_digest=<digest>".
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows, const std::string& manifest_digest);

std::vector<std::vector<std::string>> summary_csv_rows(const SimSummary& summary);
std::vector<std::string> summary_csv_header();
std::vector<std::vector<std::string>> replication_csv_rows(const SimSummary& summary,
                                                           const std::vector<Target>& targets);
std::vector<std::string> replication_csv_header();
std::vector<std::vector<std::string>> coefficient_csv_rows(const std::vector<CoefficientRow>& table);
std::vector<std::string> coefficient_csv_header();

}  // namespace dlcox
