#include "fedsim/schedule.hpp"

#include <numeric>

namespace fedsim {

std::size_t BatchSchedule::total_samples() const {
    std::size_t n = 0;
    for (const auto& b : batches) n += b.size();
    return n;
}

std::uint64_t shuffle_stream_seed(std::uint64_t base_seed, std::size_t client, std::uint64_t generation) {
    return derive_seed(base_seed, {0x5348554646ULL, client, generation});
}

namespace {

std::vector<Batch> shuffled_batches(const ClientDataset& client, std::size_t batch_size, std::uint64_t seed) {
    const std::size_t n = client.data.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Xoshiro256pp rng(seed);
    shuffle(std::span(order), rng);

    std::vector<Batch> batches;
    batches.reserve(ceil_div(n, batch_size));
    for (std::size_t start = 0; start < n; start += batch_size) {
        const std::size_t len = std::min(batch_size, n - start);
        auto part = client.data.gather(std::span(order).subspan(start, len));
        batches.push_back({std::move(part.features), std::move(part.labels)});
    }
    return batches;
}

}  // namespace

BatchSchedule make_schedule(const ClientDataset& client, std::size_t batch_size, std::size_t batch_count,
                            std::uint64_t seed) {
    if (client.data.size() == 0) throw DataError("client " + std::to_string(client.index) + " has no samples");
    require(batch_size >= 1, "batch size B must be >= 1");
    require(batch_count >= 1, "batch count C must be >= 1");

    BatchSchedule schedule;
    schedule.batch_size = batch_size;
    schedule.batch_count = batch_count;
    schedule.seed = seed;
    schedule.client = client.index;
    schedule.generation = 0;
    schedule.batches = shuffled_batches(client, batch_size, shuffle_stream_seed(seed, client.index, 0));
    schedule.windows = ceil_div(schedule.batches.size(), batch_count);
    return schedule;
}

void reshuffle(BatchSchedule& schedule, const ClientDataset& client) {
    require(client.index == schedule.client, "schedule belongs to a different client");
    ++schedule.generation;
    schedule.batches = shuffled_batches(client, schedule.batch_size,
                                        shuffle_stream_seed(schedule.seed, client.index, schedule.generation));
}

BatchWindow batch_window(std::size_t total_batches, std::size_t batch_count, std::size_t round) {
    require(total_batches >= 1 && batch_count >= 1, "window needs T >= 1 and C >= 1");
    const std::size_t windows = ceil_div(total_batches, batch_count);
    BatchWindow w;
    w.first = (round % windows) * batch_count;
    w.last = std::min(w.first + batch_count - 1, total_batches - 1);
    w.reshuffle_after = (round + 1) % windows == 0;
    return w;
}

BatchWindow batch_window(const BatchSchedule& schedule, std::size_t round) {
    return batch_window(schedule.total_batches(), schedule.batch_count, round);
}

}  // namespace fedsim
