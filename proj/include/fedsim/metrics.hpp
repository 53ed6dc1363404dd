#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace fedsim {

struct MetricsRow {
    std::size_t round = 0;  // rounds completed when evaluated
    double test_loss = 0.0;
    double test_accuracy = 0.0;
    std::optional<double> train_loss;
    std::uint64_t cum_local_updates = 0;
    std::uint64_t cum_bytes = 0;

    friend bool operator==(const MetricsRow&, const MetricsRow&) = default;
};

struct MetricsLog {
    std::vector<MetricsRow> rows;

    friend bool operator==(const MetricsLog&, const MetricsLog&) = default;
};

inline constexpr std::string_view kMetricsHeader =
    "round,test_loss,test_accuracy,train_loss,cum_local_updates,cum_bytes";

std::string to_csv(const MetricsLog& log);
MetricsLog parse_metrics_csv(std::string_view text);
MetricsLog read_metrics_csv(const std::filesystem::path& path);

/// Writes through a sibling temp file and renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

struct DiscordanceReport {
    double delta = 0.0;
    double epsilon = 0.0;
    bool concordant = false;
    std::size_t evaluated_rounds = 0;
    std::size_t max_round = 0;
};

/// Mean squared difference of the test-loss trajectories over the shared
/// evaluated rounds; concordant when delta < epsilon.
DiscordanceReport discordance(const MetricsLog& federated, const MetricsLog& centralized, double epsilon);

double max_accuracy(const MetricsLog& log);
/// First evaluated round whose accuracy reaches the maximum.
std::size_t round_of_max_accuracy(const MetricsLog& log);
std::optional<std::size_t> rounds_to_accuracy(const MetricsLog& log, double target);

}  // namespace fedsim
