#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "protovae/cli/config.hpp"
#include "protovae/cli/report.hpp"
#include "protovae/dataio/dataset.hpp"

namespace protovae::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitRuntime = 2;
inline constexpr int kExitThreshold = 3;

inline constexpr const char* kCacheEnv = "PROTOVAE_CACHE_DIR";

/// $PROTOVAE_CACHE_DIR when set, else <output_dir>/cache.
std::filesystem::path cache_dir(const ExperimentConfig& cfg);

struct PreparedData {
    dataio::RawDataset train, test;
    std::string key;  // hash of the dataset section and seed
};

/// Load, remove classes, split, binarize, smooth. Results are cached under
/// the cache directory keyed by the dataset section and master seed.
PreparedData prepare_data(const ExperimentConfig& cfg, std::ostream& log);

/// Every stage takes the validated config and writes into cfg.output_dir.
void run_perturb(const ExperimentConfig& cfg, std::ostream& log);
void run_train(const ExperimentConfig& cfg, std::ostream& log);
Report run_eval(const ExperimentConfig& cfg, std::ostream& log);
Report run_sweep(const ExperimentConfig& cfg, std::ostream& log);
void run_report(const ExperimentConfig& cfg, std::ostream& log);

/// Threshold rows that fail, as messages.
std::vector<std::string> threshold_failures(const ExperimentConfig& cfg, const std::vector<MetricRow>& rows);

/// Dispatch by subcommand name. Returns kExitOk or kExitThreshold; errors
/// propagate as exceptions.
int run_command(const std::string& command, const ExperimentConfig& cfg, std::ostream& log);

/// Cell configs of a sweep: prior x K (vamp only) x epsilon x removed classes.
/// Empty factor lists fall back to the base config's value.
std::vector<std::pair<std::string, ExperimentConfig>> sweep_cells(const ExperimentConfig& cfg);

}  // namespace protovae::cli
