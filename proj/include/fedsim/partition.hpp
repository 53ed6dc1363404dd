#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "fedsim/dataset.hpp"

namespace fedsim {

enum class PartitionKind { iid, noniid_l, manual };

std::string_view to_string(PartitionKind kind);
PartitionKind parse_partition_kind(std::string_view text);

struct PartitionPlan {
    PartitionKind kind = PartitionKind::iid;
    std::size_t clients = 1;            // K
    std::size_t labels_per_client = 0;  // L, noniid_l only
    std::uint64_t seed = 0;
    std::vector<std::size_t> assignment;  // manual only: client index per sample
};

/// Seeded shuffle, then K contiguous chunks of N/K samples. K must divide N.
std::vector<ClientDataset> partition_iid(const Dataset& dataset, std::size_t clients, std::uint64_t seed);

/// Label-skew split: each label group is cut into K*L/num_classes shards and
/// every client receives L shards with pairwise distinct labels.
std::vector<ClientDataset> partition_noniid_l(const Dataset& dataset, std::size_t clients,
                                              std::size_t labels_per_client, std::uint64_t seed);

/// Explicit sample-to-client map; every client must receive a sample.
std::vector<ClientDataset> partition_manual(const Dataset& dataset, std::size_t clients,
                                            const std::vector<std::size_t>& assignment);

std::vector<ClientDataset> partition(const Dataset& dataset, const PartitionPlan& plan);

}  // namespace fedsim
