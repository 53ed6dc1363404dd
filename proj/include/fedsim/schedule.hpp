#pragma once

// Per-client batch schedule for multi-mini-batch training. A client's data
// is shuffled and cut into T = ceil(N_j / B) batches; round i trains on the
// window of C consecutive batches starting at (i mod f) * C, where
// f = ceil(T / C), and the client reshuffles after every f-th round.

#include <cstdint>
#include <vector>

#include "fedsim/dataset.hpp"

namespace fedsim {

struct BatchSchedule {
    std::vector<Batch> batches;
    std::size_t batch_size = 1;   // B
    std::size_t batch_count = 1;  // C
    std::size_t windows = 1;      // f
    std::uint64_t seed = 0;       // base shuffle seed
    std::size_t client = 0;
    std::uint64_t generation = 0; // reshuffles performed so far

    std::size_t total_batches() const { return batches.size(); }  // T
    std::size_t total_samples() const;
};

struct BatchWindow {
    std::size_t first = 0;  // p
    std::size_t last = 0;   // q, inclusive
    bool reshuffle_after = false;

    std::size_t size() const { return last - first + 1; }
    friend bool operator==(const BatchWindow&, const BatchWindow&) = default;
};

/// Seed of the permutation used for a client's `generation`-th shuffle.
std::uint64_t shuffle_stream_seed(std::uint64_t base_seed, std::size_t client, std::uint64_t generation);

BatchSchedule make_schedule(const ClientDataset& client, std::size_t batch_size, std::size_t batch_count,
                            std::uint64_t seed);

/// Replaces the batches with a fresh shuffle of the same client data.
void reshuffle(BatchSchedule& schedule, const ClientDataset& client);

BatchWindow batch_window(const BatchSchedule& schedule, std::size_t round);
BatchWindow batch_window(std::size_t total_batches, std::size_t batch_count, std::size_t round);

constexpr std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

}  // namespace fedsim
