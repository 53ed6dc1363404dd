#include "fedsim/federated.hpp"

#include <algorithm>
#include <exception>
#include <string>
#include <thread>

namespace fedsim {

std::string_view to_string(TrainingMode mode) {
    switch (mode) {
        case TrainingMode::fedmmb: return "fedmmb";
        case TrainingMode::fedavg: return "fedavg";
        case TrainingMode::centralized: return "centralized";
    }
    return "unknown";
}

TrainingMode parse_training_mode(std::string_view text) {
    if (text == "fedmmb") return TrainingMode::fedmmb;
    if (text == "fedavg") return TrainingMode::fedavg;
    if (text == "centralized") return TrainingMode::centralized;
    throw ConfigError("unknown training mode '" + std::string(text) + "'");
}

std::string_view to_string(CentralizedBatches source) {
    return source == CentralizedBatches::lockstep ? "lockstep" : "shuffled";
}

CentralizedBatches parse_centralized_batches(std::string_view text) {
    if (text == "shuffled") return CentralizedBatches::shuffled;
    if (text == "lockstep") return CentralizedBatches::lockstep;
    throw ConfigError("unknown centralized batch source '" + std::string(text) + "'");
}

void validate(const TrainingConfig& config) {
    auto fail = [](const std::string& what) { throw ConfigError(what); };
    if (config.clients < 1) fail("K must be >= 1");
    if (config.batch_size < 1) fail("B must be >= 1");
    if (!(config.learning_rate > 0.0)) fail("eta must be > 0");
    if (config.max_rounds < 1) fail("I_max must be >= 1");
    if (config.eval_every < 1) fail("eval_every must be >= 1");
    if (config.max_rounds % config.eval_every != 0) fail("eval_every must divide I_max");
    if (config.threads < 1) fail("threads must be >= 1");
    switch (config.mode) {
        case TrainingMode::fedmmb:
            if (!config.batch_count) fail("fedmmb requires C");
            if (config.local_epochs) fail("fedmmb does not take E");
            if (*config.batch_count < 1) fail("C must be >= 1");
            break;
        case TrainingMode::fedavg:
            if (!config.local_epochs) fail("fedavg requires E");
            if (config.batch_count) fail("fedavg does not take C");
            if (*config.local_epochs < 1) fail("E must be >= 1");
            break;
        case TrainingMode::centralized:
            if (config.batch_count || config.local_epochs) fail("centralized mode takes neither C nor E");
            break;
    }
}

ClientState make_client(ClientDataset data, std::size_t batch_size, std::size_t batch_count,
                        std::uint64_t shuffle_seed) {
    ClientState state;
    state.schedule = make_schedule(data, batch_size, batch_count, shuffle_seed);
    state.data = std::move(data);
    return state;
}

std::vector<Batch> take_window(ClientState& client, std::size_t round) {
    const BatchWindow window = batch_window(client.schedule, round);
    std::vector<Batch> batches(client.schedule.batches.begin() + static_cast<std::ptrdiff_t>(window.first),
                               client.schedule.batches.begin() + static_cast<std::ptrdiff_t>(window.last + 1));
    if (window.reshuffle_after) reshuffle(client.schedule, client.data);
    return batches;
}

RoundReport client_update_mmb(std::size_t round, const NetworkSpec& spec, const ModelWeights& global,
                              ClientState& client, double learning_rate) {
    RoundReport report{client.data.index, global, 0, 0};
    for (const Batch& batch : take_window(client, round)) {
        report.weights = sgd_step(report.weights, compute_gradients(spec, report.weights, batch).grads,
                                  learning_rate);
        report.samples += batch.size();
        ++report.local_updates;
    }
    client.local_updates += report.local_updates;
    return report;
}

RoundReport client_update_fedavg(const NetworkSpec& spec, const ModelWeights& global, ClientState& client,
                                 std::size_t local_epochs, double learning_rate) {
    require(local_epochs >= 1, "E must be >= 1");
    RoundReport report{client.data.index, global, 0, 0};
    for (std::size_t epoch = 0; epoch < local_epochs; ++epoch) {
        for (const Batch& batch : client.schedule.batches) {
            report.weights = sgd_step(report.weights, compute_gradients(spec, report.weights, batch).grads,
                                      learning_rate);
            report.samples += batch.size();
            ++report.local_updates;
        }
        reshuffle(client.schedule, client.data);
    }
    client.local_updates += report.local_updates;
    return report;
}

ModelWeights aggregate(std::span<const RoundReport> reports) {
    require(!reports.empty(), "cannot aggregate an empty report list");
    std::vector<const RoundReport*> ordered;
    ordered.reserve(reports.size());
    for (const auto& r : reports) ordered.push_back(&r);
    std::sort(ordered.begin(), ordered.end(),
              [](const RoundReport* a, const RoundReport* b) { return a->client < b->client; });

    const ModelWeights& reference = ordered.front()->weights;
    double total = 0.0;
    ModelWeights offset = reference;
    for (auto& layer : offset.layers) {
        layer.weight.setZero();
        layer.bias.setZero();
    }
    for (const RoundReport* r : ordered) {
        require(r->samples >= 1, "round report with zero samples");
        require(same_shape(r->weights, reference), "local weights are not shape-congruent");
        const auto n = static_cast<double>(r->samples);
        total += n;
        for (std::size_t l = 0; l < offset.layers.size(); ++l) {
            offset.layers[l].weight += n * (r->weights.layers[l].weight - reference.layers[l].weight);
            offset.layers[l].bias += n * (r->weights.layers[l].bias - reference.layers[l].bias);
        }
    }
    ModelWeights out = reference;
    for (std::size_t l = 0; l < out.layers.size(); ++l) {
        out.layers[l].weight += offset.layers[l].weight / total;
        out.layers[l].bias += offset.layers[l].bias / total;
    }
    return out;
}

CommCost comm_cost(const TrainingConfig& config, const NetworkSpec& spec) {
    require(config.clients >= 1, "K must be >= 1");
    if (config.mode == TrainingMode::centralized) return {0};
    return {static_cast<std::uint64_t>(spec.parameter_count()) * 8u * 2u * config.clients};
}

namespace {

template <typename Update>
std::vector<RoundReport> collect_reports(std::vector<ClientState>& clients, std::size_t threads,
                                         const Update& update) {
    std::vector<RoundReport> reports(clients.size());
    const std::size_t workers = std::min(threads, clients.size());
    if (workers <= 1) {
        for (std::size_t j = 0; j < clients.size(); ++j) reports[j] = update(clients[j]);
        return reports;
    }
    std::vector<std::exception_ptr> errors(clients.size());
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                for (std::size_t j = w; j < clients.size(); j += workers) {
                    try {
                        reports[j] = update(clients[j]);
                    } catch (...) {
                        errors[j] = std::current_exception();
                    }
                }
            });
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return reports;
}

class Recorder {
public:
    Recorder(const TrainingConfig& config, const NetworkSpec& spec, const Dataset& test_set,
             std::optional<Dataset> train_set)
        : config_(config), spec_(spec), test_(test_set), train_(std::move(train_set)),
          cost_(comm_cost(config, spec)) {
        validate(test_);
    }

    void after_round(std::size_t completed, const ModelWeights& weights, std::uint64_t cum_updates) {
        if (completed % config_.eval_every != 0) return;
        const Evaluation test = evaluate(spec_, weights, test_);
        MetricsRow row;
        row.round = completed;
        row.test_loss = test.loss;
        row.test_accuracy = test.accuracy;
        if (train_) row.train_loss = evaluate(spec_, weights, *train_).loss;
        row.cum_local_updates = cum_updates;
        row.cum_bytes = cost_.cumulative(completed);
        log_.rows.push_back(row);
    }

    MetricsLog finish() { return std::move(log_); }

private:
    const TrainingConfig& config_;
    const NetworkSpec& spec_;
    const Dataset& test_;
    std::optional<Dataset> train_;
    CommCost cost_;
    MetricsLog log_;
};

std::optional<Dataset> training_union(const TrainingConfig& config, std::span<const ClientDataset> clients) {
    if (!config.train_loss) return std::nullopt;
    return concatenate(clients);
}

void check_run(const TrainingConfig& config, const NetworkSpec& spec, TrainingMode expected) {
    validate(config);
    validate(spec);
    require(config.mode == expected, "driver called with a config for mode " + std::string(to_string(config.mode)));
}

void check_clients(const TrainingConfig& config, std::span<const ClientDataset> clients) {
    require(clients.size() == config.clients, "client count differs from K");
    for (std::size_t j = 0; j < clients.size(); ++j)
        require(clients[j].index == j, "clients must be indexed 0..K-1 in order");
}

std::vector<ClientState> build_clients(std::span<const ClientDataset> clients, std::size_t batch_size,
                                       std::size_t batch_count, std::uint64_t shuffle_seed) {
    std::vector<ClientState> states;
    states.reserve(clients.size());
    for (const auto& c : clients) states.push_back(make_client(c, batch_size, batch_count, shuffle_seed));
    return states;
}

template <typename Update>
MetricsLog run_federated(const TrainingConfig& config, const NetworkSpec& spec,
                         std::span<const ClientDataset> clients, const Dataset& test_set,
                         const RoundObserver& observer, std::size_t batch_count, const Update& update) {
    check_clients(config, clients);
    auto states = build_clients(clients, config.batch_size, batch_count, config.seeds.shuffle);
    Recorder recorder(config, spec, test_set, training_union(config, clients));

    ModelWeights global = init_weights(spec, config.seeds.init);
    std::uint64_t cum_updates = 0;
    for (std::size_t round = 0; round < config.max_rounds; ++round) {
        const auto reports = collect_reports(states, config.threads,
                                             [&](ClientState& c) { return update(round, global, c); });
        require(reports.size() == config.clients, "every client must report each round");
        for (const auto& r : reports) cum_updates += r.local_updates;
        global = aggregate(reports);
        if (observer) observer(round + 1, global);
        recorder.after_round(round + 1, global, cum_updates);
    }
    return recorder.finish();
}

// Shared loop for both centralized batch sources; `next_batch(i)` yields
// the batch for iteration i.
template <typename NextBatch>
MetricsLog run_centralized_loop(const TrainingConfig& config, const NetworkSpec& spec, const Dataset& test_set,
                                std::optional<Dataset> train_for_loss, const RoundObserver& observer,
                                const NextBatch& next_batch) {
    Recorder recorder(config, spec, test_set, std::move(train_for_loss));
    ModelWeights weights = init_weights(spec, config.seeds.init);
    for (std::size_t iteration = 0; iteration < config.max_rounds; ++iteration) {
        const Batch batch = next_batch(iteration);
        weights = sgd_step(weights, compute_gradients(spec, weights, batch).grads, config.learning_rate);
        if (observer) observer(iteration + 1, weights);
        recorder.after_round(iteration + 1, weights, iteration + 1);
    }
    return recorder.finish();
}

}  // namespace

MetricsLog run_fedmmb(const TrainingConfig& config, const NetworkSpec& spec,
                      std::span<const ClientDataset> clients, const Dataset& test_set,
                      const RoundObserver& observer) {
    check_run(config, spec, TrainingMode::fedmmb);
    return run_federated(config, spec, clients, test_set, observer, *config.batch_count,
                         [&](std::size_t round, const ModelWeights& global, ClientState& c) {
                             return client_update_mmb(round, spec, global, c, config.learning_rate);
                         });
}

MetricsLog run_fedavg(const TrainingConfig& config, const NetworkSpec& spec,
                      std::span<const ClientDataset> clients, const Dataset& test_set,
                      const RoundObserver& observer) {
    check_run(config, spec, TrainingMode::fedavg);
    return run_federated(config, spec, clients, test_set, observer, 1,
                         [&](std::size_t, const ModelWeights& global, ClientState& c) {
                             return client_update_fedavg(spec, global, c, *config.local_epochs,
                                                         config.learning_rate);
                         });
}

MetricsLog run_centralized(const TrainingConfig& config, const NetworkSpec& spec, const Dataset& train_set,
                           const Dataset& test_set, const RoundObserver& observer) {
    check_run(config, spec, TrainingMode::centralized);
    validate(train_set);
    // The whole training set behaves as a single client with C = 1 (one
    // batch per iteration, reshuffle at every epoch boundary).
    ClientState stream = make_client({0, train_set}, config.batch_size, 1, config.seeds.shuffle);
    std::optional<Dataset> train_for_loss;
    if (config.train_loss) train_for_loss = train_set;
    return run_centralized_loop(config, spec, test_set, std::move(train_for_loss), observer,
                                [&](std::size_t iteration) { return std::move(take_window(stream, iteration).front()); });
}

MetricsLog run_centralized_lockstep(const TrainingConfig& config, const NetworkSpec& spec,
                                    std::span<const ClientDataset> clients, const Dataset& test_set,
                                    const RoundObserver& observer) {
    check_run(config, spec, TrainingMode::centralized);
    check_clients(config, clients);
    auto states = build_clients(clients, config.batch_size, 1, config.seeds.shuffle);
    return run_centralized_loop(config, spec, test_set, training_union(config, clients), observer,
                                [&](std::size_t iteration) {
                                    std::vector<Dataset> parts;
                                    parts.reserve(states.size());
                                    for (auto& state : states) {
                                        Batch b = std::move(take_window(state, iteration).front());
                                        parts.push_back({std::move(b.features), std::move(b.labels),
                                                         state.data.data.num_classes});
                                    }
                                    return concatenate(std::span<const Dataset>(parts)).as_batch();
                                });
}

MetricsLog run_training(const TrainingConfig& config, const NetworkSpec& spec,
                        std::span<const ClientDataset> clients, const Dataset& test_set,
                        const RoundObserver& observer) {
    switch (config.mode) {
        case TrainingMode::fedmmb: return run_fedmmb(config, spec, clients, test_set, observer);
        case TrainingMode::fedavg: return run_fedavg(config, spec, clients, test_set, observer);
        case TrainingMode::centralized:
            if (config.centralized_batches == CentralizedBatches::lockstep)
                return run_centralized_lockstep(config, spec, clients, test_set, observer);
            return run_centralized(config, spec, concatenate(clients), test_set, observer);
    }
    throw ContractViolation("unhandled training mode");
}

}  // namespace fedsim
