#pragma once

// JSON-configured experiments: dataset construction, partitioning, training
// dispatch, artifact writing, log comparison and parameter sweeps.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "fedsim/federated.hpp"
#include "fedsim/partition.hpp"

namespace fedsim {

enum class DataSource { synthetic, idx, csv };

struct DatasetSection {
    DataSource source = DataSource::synthetic;
    std::size_t num_classes = 10;
    // synthetic
    SyntheticOptions synthetic;     // synthetic.samples is the training size
    std::size_t test_samples = 0;   // synthetic test size, or rows held out of a file source
    // idx
    std::filesystem::path train_images, train_labels, test_images, test_labels;
    // csv
    std::filesystem::path train_path, test_path;
    bool header = false;
};

struct OutputSection {
    std::filesystem::path dir = "runs";
    std::string run_name = "run";
};

struct ExperimentConfig {
    DatasetSection dataset;
    std::vector<std::size_t> hidden;
    PartitionPlan partition;
    TrainingConfig train;
    OutputSection output;
};

/// Strict parse: unknown keys, wrong types and inconsistent sections raise
/// ConfigError. Relative paths resolve against `base_dir`.
ExperimentConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});

/// Reads a config file and applies the FEDSIM_SEED override when set.
ExperimentConfig load_config(const std::filesystem::path& path);

/// Replaces every seed (dataset, init, shuffle, partition) with `seed`.
void override_seeds(ExperimentConfig& config, std::uint64_t seed);

/// Fully resolved config; parse_config(to_json(c)) reproduces c.
nlohmann::json to_json(const ExperimentConfig& config);

struct ExperimentData {
    Dataset train;
    Dataset test;
};

ExperimentData load_data(const DatasetSection& section);
NetworkSpec network_spec(const ExperimentConfig& config, const Dataset& train);

struct RunResult {
    NetworkSpec spec;
    MetricsLog log;
};

RunResult run_experiment(const ExperimentConfig& config);

struct ArtifactPaths {
    std::filesystem::path csv;
    std::filesystem::path sidecar;
};

/// Writes <dir>/<run_name>.csv and the JSON sidecar, each atomically.
ArtifactPaths write_artifacts(const ExperimentConfig& config, const RunResult& result);

struct LogSummary {
    double max_accuracy = 0.0;
    std::size_t round_of_max = 0;
    std::optional<std::size_t> rounds_to_target;
};

struct Comparison {
    std::optional<DiscordanceReport> discordance;  // empty when round sets differ
    std::string discordance_error;
    LogSummary first, second;
    std::optional<double> target_accuracy;
};

Comparison compare_logs(const MetricsLog& a, const MetricsLog& b, double epsilon,
                        std::optional<double> target_accuracy);
std::string format_comparison(const Comparison& comparison);
nlohmann::json comparison_json(const Comparison& comparison);

struct SweepRun {
    std::string value;
    std::string run_name;
    LogSummary summary;
};

/// Sets a dotted key ("train.C") in a resolved config document. Values are
/// read as JSON when possible, otherwise as strings. Unknown keys throw
/// ConfigError.
void set_config_value(nlohmann::json& doc, const std::string& dotted_key, const std::string& value);

/// One run per value with otherwise identical config and seeds. Writes each
/// run's artifacts plus <run_name>_sweep.csv.
std::vector<SweepRun> run_sweep(const ExperimentConfig& base, const std::string& dotted_key,
                                const std::vector<std::string>& values, std::optional<double> target_accuracy);

std::string sweep_index_csv(const std::vector<SweepRun>& runs);

}  // namespace fedsim
