#pragma once

#include <filesystem>
#include <string>

#include "memalign/experiment.hpp"

namespace memalign {

inline constexpr int kConfigSchemaVersion = 1;
inline constexpr int kReportSchemaVersion = 1;
inline constexpr int kSweepSchemaVersion = 1;

/// Parses a JSON experiment config. Missing keys take defaults; unknown keys,
/// wrong types and invariant violations throw ConfigError naming the key.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config_file(const std::filesystem::path& path);

/// Fully resolved config as JSON text; parse_config() of it gives back an
/// equal config.
std::string config_to_json(const ExperimentConfig& config, int indent = 2);

/// report.json: schema header, resolved config, metrics. Output depends only
/// on its inputs, so identical runs give identical bytes.
std::string report_to_json(const ExperimentConfig& config, const MetricsReport& report);

/// sweep.csv, one row per value.
std::string sweep_to_csv(const SweepTable& table);
std::string sweep_to_json(const ExperimentConfig& config, const SweepTable& table);

}  // namespace memalign
