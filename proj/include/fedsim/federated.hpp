#pragma once

// Multi-mini-batch federated training (FedMMB, with FedSMB as C = 1),
// federated averaging, and the centralized mini-batch baseline.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "fedsim/dataset.hpp"
#include "fedsim/metrics.hpp"
#include "fedsim/schedule.hpp"

namespace fedsim {

enum class TrainingMode { fedmmb, fedavg, centralized };

// Where centralized batches come from. `lockstep` replays the batches the
// FedSMB clients would use, concatenated in client order; it exists for
// equivalence testing.
enum class CentralizedBatches { shuffled, lockstep };

std::string_view to_string(TrainingMode mode);
TrainingMode parse_training_mode(std::string_view text);
std::string_view to_string(CentralizedBatches source);
CentralizedBatches parse_centralized_batches(std::string_view text);

struct Seeds {
    std::uint64_t init = 0;
    std::uint64_t shuffle = 0;
    std::uint64_t partition = 0;
};

struct TrainingConfig {
    TrainingMode mode = TrainingMode::fedmmb;
    std::size_t clients = 1;                  // K
    std::size_t batch_size = 1;               // B (client) or B' (centralized, shuffled)
    std::optional<std::size_t> batch_count;   // C, fedmmb only
    std::optional<std::size_t> local_epochs;  // E, fedavg only
    double learning_rate = 0.01;              // eta
    std::size_t max_rounds = 1;               // I_max
    std::size_t eval_every = 1;
    Seeds seeds;
    std::size_t threads = 1;
    bool train_loss = false;
    CentralizedBatches centralized_batches = CentralizedBatches::shuffled;
};

/// Throws ConfigError when the mode-specific hyperparameters are missing,
/// present for the wrong mode, or out of range.
void validate(const TrainingConfig& config);

struct ClientState {
    ClientDataset data;
    BatchSchedule schedule;
    std::uint64_t local_updates = 0;  // mu_j, cumulative
};

ClientState make_client(ClientDataset data, std::size_t batch_size, std::size_t batch_count,
                        std::uint64_t shuffle_seed);

struct RoundReport {
    std::size_t client = 0;
    ModelWeights weights;
    std::size_t samples = 0;         // n_ij
    std::size_t local_updates = 0;   // SGD steps this round
};

/// Copies the batches of round `round`'s window and reshuffles the client
/// afterwards when the window closes a pass over its data.
std::vector<Batch> take_window(ClientState& client, std::size_t round);

RoundReport client_update_mmb(std::size_t round, const NetworkSpec& spec, const ModelWeights& global,
                              ClientState& client, double learning_rate);

/// E local epochs over all batches. Each epoch consumes the current shuffle
/// and then reshuffles, so every epoch sees a fresh permutation.
RoundReport client_update_fedavg(const NetworkSpec& spec, const ModelWeights& global, ClientState& client,
                                 std::size_t local_epochs, double learning_rate);

/// Sample-weighted mean of the local models, accumulated in ascending
/// client order as offsets from the lowest-indexed client's weights.
ModelWeights aggregate(std::span<const RoundReport> reports);

struct CommCost {
    std::uint64_t bytes_per_round = 0;
    std::uint64_t cumulative(std::size_t rounds) const { return bytes_per_round * rounds; }
};

/// 8-byte parameters, both directions, all K clients. Zero for centralized runs.
CommCost comm_cost(const TrainingConfig& config, const NetworkSpec& spec);

/// Called with (rounds completed, weights after that round).
using RoundObserver = std::function<void(std::size_t, const ModelWeights&)>;

MetricsLog run_fedmmb(const TrainingConfig& config, const NetworkSpec& spec,
                      std::span<const ClientDataset> clients, const Dataset& test_set,
                      const RoundObserver& observer = {});

MetricsLog run_fedavg(const TrainingConfig& config, const NetworkSpec& spec,
                      std::span<const ClientDataset> clients, const Dataset& test_set,
                      const RoundObserver& observer = {});

/// Free-running mini-batch SGD with batch size B' over `train_set`,
/// reshuffled every epoch.
MetricsLog run_centralized(const TrainingConfig& config, const NetworkSpec& spec, const Dataset& train_set,
                           const Dataset& test_set, const RoundObserver& observer = {});

/// Centralized SGD whose batch at iteration i is the concatenation of the
/// K clients' FedSMB batches for round i (batch size B per client).
MetricsLog run_centralized_lockstep(const TrainingConfig& config, const NetworkSpec& spec,
                                    std::span<const ClientDataset> clients, const Dataset& test_set,
                                    const RoundObserver& observer = {});

/// Dispatches on config.mode (and centralized_batches for centralized runs).
MetricsLog run_training(const TrainingConfig& config, const NetworkSpec& spec,
                        std::span<const ClientDataset> clients, const Dataset& test_set,
                        const RoundObserver& observer = {});

}  // namespace fedsim
