#include "fedsim/partition.hpp"

#include <numeric>
#include <set>
#include <string>

namespace fedsim {

std::string_view to_string(PartitionKind kind) {
    switch (kind) {
        case PartitionKind::iid: return "iid";
        case PartitionKind::noniid_l: return "noniid_l";
        case PartitionKind::manual: return "manual";
    }
    return "unknown";
}

PartitionKind parse_partition_kind(std::string_view text) {
    if (text == "iid") return PartitionKind::iid;
    if (text == "noniid_l") return PartitionKind::noniid_l;
    if (text == "manual") return PartitionKind::manual;
    throw ConfigError("unknown partition kind '" + std::string(text) + "'");
}

std::vector<ClientDataset> partition_iid(const Dataset& dataset, std::size_t clients, std::uint64_t seed) {
    validate(dataset);
    if (clients < 1) throw DataError("need at least one client");
    if (dataset.size() % clients != 0)
        throw DataError("IID partition needs K to divide N (N=" + std::to_string(dataset.size()) +
                        ", K=" + std::to_string(clients) + ")");

    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Xoshiro256pp rng(seed);
    shuffle(std::span(order), rng);

    const std::size_t chunk = dataset.size() / clients;
    std::vector<ClientDataset> out;
    out.reserve(clients);
    for (std::size_t j = 0; j < clients; ++j)
        out.push_back({j, dataset.gather(std::span(order).subspan(j * chunk, chunk))});
    return out;
}

std::vector<ClientDataset> partition_noniid_l(const Dataset& dataset, std::size_t clients,
                                              std::size_t labels_per_client, std::uint64_t seed) {
    validate(dataset);
    const std::size_t classes = dataset.num_classes;
    if (clients < 1) throw DataError("need at least one client");
    if (labels_per_client < 1 || labels_per_client > classes)
        throw DataError("labels per client must lie in [1, num_classes]");
    if ((clients * labels_per_client) % classes != 0)
        throw DataError("K*L must be divisible by num_classes (K=" + std::to_string(clients) +
                        ", L=" + std::to_string(labels_per_client) + ")");
    const std::size_t shards_per_label = clients * labels_per_client / classes;

    std::vector<std::vector<std::size_t>> groups(classes);
    for (std::size_t i = 0; i < dataset.size(); ++i)
        groups[static_cast<std::size_t>(dataset.labels[i])].push_back(i);

    Xoshiro256pp rng(seed);
    for (std::size_t c = 0; c < classes; ++c) {
        if (groups[c].empty()) throw DataError("label " + std::to_string(c) + " has no samples");
        if (groups[c].size() % shards_per_label != 0)
            throw DataError("label " + std::to_string(c) + " group of " + std::to_string(groups[c].size()) +
                            " samples is not divisible into " + std::to_string(shards_per_label) + " shards");
        shuffle(std::span(groups[c]), rng);
    }
    std::vector<std::size_t> label_order(classes);
    std::iota(label_order.begin(), label_order.end(), std::size_t{0});
    shuffle(std::span(label_order), rng);
    std::vector<std::size_t> client_order(clients);
    std::iota(client_order.begin(), client_order.end(), std::size_t{0});
    shuffle(std::span(client_order), rng);

    // Shards are dealt round-robin in label-major order. Shard t goes to slot
    // t mod K; since shards_per_label <= K, the L shards of one slot carry
    // distinct labels.
    std::vector<std::vector<std::size_t>> rows(clients);
    std::vector<std::set<std::size_t>> held(clients);
    std::size_t t = 0;
    for (std::size_t label : label_order) {
        const std::size_t shard = groups[label].size() / shards_per_label;
        for (std::size_t k = 0; k < shards_per_label; ++k, ++t) {
            const std::size_t client = client_order[t % clients];
            if (!held[client].insert(label).second)
                throw DataError("infeasible Non-IID assignment: client would hold a label twice");
            const auto begin = groups[label].begin() + static_cast<std::ptrdiff_t>(k * shard);
            rows[client].insert(rows[client].end(), begin, begin + static_cast<std::ptrdiff_t>(shard));
        }
    }

    std::vector<ClientDataset> out;
    out.reserve(clients);
    for (std::size_t j = 0; j < clients; ++j) {
        if (held[j].size() != labels_per_client)
            throw DataError("infeasible Non-IID assignment: client label count differs from L");
        out.push_back({j, dataset.gather(rows[j])});
    }
    return out;
}

std::vector<ClientDataset> partition_manual(const Dataset& dataset, std::size_t clients,
                                            const std::vector<std::size_t>& assignment) {
    validate(dataset);
    if (clients < 1) throw DataError("need at least one client");
    if (assignment.size() != dataset.size())
        throw DataError("manual assignment length differs from dataset size");
    std::vector<std::vector<std::size_t>> rows(clients);
    for (std::size_t i = 0; i < assignment.size(); ++i) {
        if (assignment[i] >= clients) throw DataError("manual assignment names a client index >= K");
        rows[assignment[i]].push_back(i);
    }
    std::vector<ClientDataset> out;
    for (std::size_t j = 0; j < clients; ++j) {
        if (rows[j].empty()) throw DataError("client " + std::to_string(j) + " receives no samples");
        out.push_back({j, dataset.gather(rows[j])});
    }
    return out;
}

std::vector<ClientDataset> partition(const Dataset& dataset, const PartitionPlan& plan) {
    switch (plan.kind) {
        case PartitionKind::iid: return partition_iid(dataset, plan.clients, plan.seed);
        case PartitionKind::noniid_l:
            return partition_noniid_l(dataset, plan.clients, plan.labels_per_client, plan.seed);
        case PartitionKind::manual: return partition_manual(dataset, plan.clients, plan.assignment);
    }
    throw ContractViolation("unhandled partition kind");
}

}  // namespace fedsim
