#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "protovae/cli/config.hpp"
#include "protovae/model/vae.hpp"

namespace protovae::cli {

/// One measurement with its full factor combination. `K` is empty for the
/// standard prior. `run` names the run directory the row came from.
struct MetricRow {
    std::string metric;
    std::string prior;
    std::optional<std::size_t> K;
    double epsilon = 0.0;
    std::size_t removed = 0;
    std::string split;
    double value = 0.0;
    std::string run;

    bool operator==(const MetricRow&) const = default;
};

struct RunRecord {
    std::string name;
    std::vector<model::EpochStats> trace;
    Json artifacts = Json::object();  // paths relative to the report's directory
};

/// Everything that should be bit-identical across reruns. Wall-clock timings
/// live in a sidecar file so they do not break that.
struct Report {
    Json config;
    std::vector<RunRecord> runs;
    std::vector<MetricRow> metrics;
};

inline constexpr const char* kReportFormat = "protovae-report/1";

Json to_json(const Report& report);
Report report_from_json(const Json& doc);

/// Flat CSV: metric,prior,K,epsilon,removed,split,value,run.
std::string metrics_csv(const std::vector<MetricRow>& rows);
/// One line per run and split, one column per metric name:
/// {"columns": [...], "rows": [[...], ...]} with null for missing cells.
Json pivot_table(const std::vector<MetricRow>& rows);
std::string pivot_csv(const std::vector<MetricRow>& rows);

/// report.json plus metrics.csv in `dir`.
void write_report(const std::filesystem::path& dir, const Report& report);
Report read_report(const std::filesystem::path& path);

/// Values are written with round-trip precision.
std::string format_number(double v);

/// Writes `text` to `path` through a temporary file and a rename.
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace protovae::cli
