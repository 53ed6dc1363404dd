#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "fedsim/nn.hpp"

namespace fedsim {

/// Feature matrix [N, input_dim] plus integer class labels.
template <typename Scalar>
struct DatasetT {
    Matrix<Scalar> features;
    std::vector<int> labels;
    std::size_t num_classes = 0;

    std::size_t size() const { return labels.size(); }
    std::size_t input_dim() const { return static_cast<std::size_t>(features.cols()); }

    /// Rows in the given order (repeats allowed).
    DatasetT gather(std::span<const std::size_t> rows) const {
        DatasetT out;
        out.num_classes = num_classes;
        out.features.resize(static_cast<Eigen::Index>(rows.size()), features.cols());
        out.labels.reserve(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            out.features.row(static_cast<Eigen::Index>(i)) = features.row(static_cast<Eigen::Index>(rows[i]));
            out.labels.push_back(labels[rows[i]]);
        }
        return out;
    }

    BatchT<Scalar> as_batch() const { return {features, labels}; }

    friend bool operator==(const DatasetT& a, const DatasetT& b) {
        return a.num_classes == b.num_classes && a.labels == b.labels &&
               a.features.rows() == b.features.rows() && a.features.cols() == b.features.cols() &&
               a.features == b.features;
    }
};

using Dataset = DatasetT<double>;

struct ClientDataset {
    std::size_t index = 0;
    Dataset data;
};

void validate(const Dataset& dataset);

/// Row-wise concatenation; all parts must agree on width and class count.
Dataset concatenate(std::span<const Dataset> parts);
Dataset concatenate(std::span<const ClientDataset> clients);

/// Per-class sample counts, length num_classes.
std::vector<std::size_t> label_histogram(const Dataset& dataset);

template <typename Scalar>
Evaluation evaluate(const NetworkSpec& spec, const ModelWeightsT<Scalar>& weights,
                    const DatasetT<Scalar>& dataset) {
    return evaluate(spec, weights, dataset.features, dataset.labels);
}

/// IDX image/label pair (gzip-compressed or plain). Pixels are scaled by
/// 1/255 and flattened row-major. num_classes == 0 infers max label + 1.
Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                 std::size_t num_classes = 0);

/// One sample per row: label first, then feature values.
Dataset load_csv(const std::filesystem::path& path, std::size_t num_classes, bool has_header = false);

struct SyntheticOptions {
    std::uint64_t seed = 0;
    std::size_t samples = 0;
    std::size_t input_dim = 0;
    std::size_t num_classes = 0;
    double center_scale = 2.0;
    double noise_sigma = 1.0;
};

/// Gaussian blobs: class c is centred at a seeded random unit direction
/// times center_scale; sample i has label i mod num_classes.
Dataset synthetic(const SyntheticOptions& options);

/// First `head` rows and the remainder, order preserved.
std::pair<Dataset, Dataset> split_head(const Dataset& dataset, std::size_t head);

}  // namespace fedsim
