#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "fmaml/harness/experiment.hpp"
#include "json.hpp"

namespace fmaml::harness {

/// Stable report schema. Wall-clock data lives under "timestamps" only.
nlohmann::ordered_json report_to_json(const ExperimentReport& report);
ExperimentReport report_from_json(const nlohmann::json& j);

void write_report(const std::filesystem::path& path, const ExperimentReport& report);
ExperimentReport read_report(const std::filesystem::path& path);

/// "12.34%" for 0.1234; failed or missing cells render as "—".
std::string format_percent(const std::optional<double>& value);

/// Display name of a variant ("Supervised", "MAML", "F-MAML").
std::string variant_title(const std::string& variant);

/// One row per variant, one column per K, percentages to two decimals.
std::string emit_text_table(const ExperimentReport& report);

/// Same grid as CSV with full-precision fractions; failed cells are "—".
std::string emit_csv_table(const ExperimentReport& report);

/// Numeric content of a CSV table: (variant, K) → mean, nullopt for "—".
struct CsvTable {
    std::vector<std::size_t> k_shots;
    std::vector<std::pair<std::string, std::vector<std::optional<double>>>> rows;
};
CsvTable parse_csv_table(const std::string& csv);

/// Rows per variant, one column per report's target language, at shot count k.
std::string emit_language_table(const std::vector<ExperimentReport>& reports, std::size_t k);

/// Columns iter, meta_loss, query_acc.
std::string emit_trace_csv(const std::vector<TracePoint>& trace);

}  // namespace fmaml::harness
