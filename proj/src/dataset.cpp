#include "fedsim/dataset.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

namespace fedsim {

void validate(const Dataset& dataset) {
    if (dataset.size() == 0) throw DataError("dataset is empty");
    if (dataset.num_classes < 1) throw DataError("dataset must declare at least one class");
    if (static_cast<std::size_t>(dataset.features.rows()) != dataset.size())
        throw DataError("feature rows and labels differ in length");
    for (int label : dataset.labels)
        if (label < 0 || static_cast<std::size_t>(label) >= dataset.num_classes)
            throw DataError("label " + std::to_string(label) + " outside [0, num_classes)");
}

Dataset concatenate(std::span<const Dataset> parts) {
    require(!parts.empty(), "nothing to concatenate");
    Eigen::Index rows = 0;
    for (const auto& part : parts) {
        require(part.features.cols() == parts.front().features.cols(), "feature widths differ");
        require(part.num_classes == parts.front().num_classes, "class counts differ");
        rows += part.features.rows();
    }
    Dataset out;
    out.num_classes = parts.front().num_classes;
    out.features.resize(rows, parts.front().features.cols());
    out.labels.reserve(static_cast<std::size_t>(rows));
    Eigen::Index at = 0;
    for (const auto& part : parts) {
        out.features.middleRows(at, part.features.rows()) = part.features;
        at += part.features.rows();
        out.labels.insert(out.labels.end(), part.labels.begin(), part.labels.end());
    }
    return out;
}

Dataset concatenate(std::span<const ClientDataset> clients) {
    std::vector<Dataset> parts;
    parts.reserve(clients.size());
    for (const auto& c : clients) parts.push_back(c.data);
    return concatenate(std::span<const Dataset>(parts));
}

std::vector<std::size_t> label_histogram(const Dataset& dataset) {
    std::vector<std::size_t> counts(dataset.num_classes, 0);
    for (int label : dataset.labels) ++counts[static_cast<std::size_t>(label)];
    return counts;
}

namespace {

struct GzCloser {
    void operator()(gzFile f) const { gzclose(f); }
};
using GzHandle = std::unique_ptr<std::remove_pointer_t<gzFile>, GzCloser>;

// Reads the whole file, inflating it when gzip-compressed.
std::vector<unsigned char> read_bytes(const std::filesystem::path& path) {
    GzHandle file(gzopen(path.string().c_str(), "rb"));
    if (!file) throw DataError("cannot open " + path.string());
    std::vector<unsigned char> bytes;
    std::array<unsigned char, 1 << 16> chunk{};
    for (;;) {
        const int got = gzread(file.get(), chunk.data(), static_cast<unsigned>(chunk.size()));
        if (got < 0) throw DataError("read error in " + path.string());
        if (got == 0) break;
        bytes.insert(bytes.end(), chunk.begin(), chunk.begin() + got);
    }
    return bytes;
}

std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset) {
    return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
           (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

}  // namespace

Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                 std::size_t num_classes) {
    const auto images = read_bytes(images_path);
    const auto labels = read_bytes(labels_path);

    if (images.size() < 16) throw DataError(images_path.string() + ": truncated IDX header");
    if (read_be32(images, 0) != kImageMagic)
        throw DataError(images_path.string() + ": bad IDX image magic");
    if (labels.size() < 8) throw DataError(labels_path.string() + ": truncated IDX header");
    if (read_be32(labels, 0) != kLabelMagic)
        throw DataError(labels_path.string() + ": bad IDX label magic");

    const std::size_t count = read_be32(images, 4);
    const std::size_t rows = read_be32(images, 8);
    const std::size_t cols = read_be32(images, 12);
    const std::size_t label_count = read_be32(labels, 4);
    if (count != label_count)
        throw DataError("IDX image count " + std::to_string(count) + " != label count " +
                        std::to_string(label_count));
    if (count == 0 || rows == 0 || cols == 0) throw DataError(images_path.string() + ": empty IDX file");
    const std::size_t pixels = rows * cols;
    if (images.size() < 16 + count * pixels) throw DataError(images_path.string() + ": truncated IDX data");
    if (labels.size() < 8 + count) throw DataError(labels_path.string() + ": truncated IDX data");

    Dataset out;
    out.features.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(pixels));
    for (std::size_t i = 0; i < count * pixels; ++i)
        out.features.data()[i] = static_cast<double>(images[16 + i]) / 255.0;
    out.labels.assign(labels.begin() + 8, labels.begin() + 8 + static_cast<std::ptrdiff_t>(count));
    if (num_classes == 0) {
        const int peak = *std::max_element(out.labels.begin(), out.labels.end());
        num_classes = std::max<std::size_t>(2, static_cast<std::size_t>(peak) + 1);
    }
    out.num_classes = num_classes;
    validate(out);
    return out;
}

namespace {

std::vector<std::string_view> split_cells(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    for (;;) {
        const auto comma = line.find(',', start);
        cells.push_back(line.substr(start, comma == std::string_view::npos ? comma : comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return cells;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

template <typename T>
T parse_cell(std::string_view cell, std::size_t line_no) {
    cell = trim(cell);
    T value{};
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (ec != std::errc{} || ptr != cell.data() + cell.size() || cell.empty())
        throw DataError("line " + std::to_string(line_no) + ": non-numeric cell '" + std::string(cell) + "'");
    return value;
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path, std::size_t num_classes, bool has_header) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());

    std::vector<int> labels;
    std::vector<double> values;
    std::size_t width = 0;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (has_header && line_no == 1) continue;
        if (trim(line).empty()) continue;
        const auto cells = split_cells(line);
        if (cells.size() < 2) throw DataError("line " + std::to_string(line_no) + ": need a label and features");
        const std::size_t features = cells.size() - 1;
        if (width == 0) width = features;
        if (features != width)
            throw DataError("line " + std::to_string(line_no) + ": ragged row (" + std::to_string(features) +
                            " features, expected " + std::to_string(width) + ")");
        const int label = parse_cell<int>(cells[0], line_no);
        if (label < 0 || static_cast<std::size_t>(label) >= num_classes)
            throw DataError("line " + std::to_string(line_no) + ": label out of range");
        labels.push_back(label);
        for (std::size_t c = 1; c < cells.size(); ++c) {
            const double v = parse_cell<double>(cells[c], line_no);
            if (!std::isfinite(v)) throw DataError("line " + std::to_string(line_no) + ": non-finite value");
            values.push_back(v);
        }
    }
    if (labels.empty()) throw DataError(path.string() + ": no samples");

    Dataset out;
    out.num_classes = num_classes;
    out.labels = std::move(labels);
    out.features = Eigen::Map<const Matrix<double>>(values.data(), static_cast<Eigen::Index>(out.labels.size()),
                                                    static_cast<Eigen::Index>(width));
    validate(out);
    return out;
}

Dataset synthetic(const SyntheticOptions& options) {
    if (options.num_classes < 2) throw DataError("synthetic data needs at least 2 classes");
    if (options.input_dim < 1) throw DataError("synthetic data needs input_dim >= 1");
    if (options.samples < options.num_classes) throw DataError("synthetic data needs N >= num_classes");

    Xoshiro256pp rng(options.seed);
    const auto d = static_cast<Eigen::Index>(options.input_dim);
    Matrix<double> centers(static_cast<Eigen::Index>(options.num_classes), d);
    for (Eigen::Index c = 0; c < centers.rows(); ++c) {
        double norm = 0.0;
        while (norm == 0.0) {
            for (Eigen::Index k = 0; k < d; ++k) centers(c, k) = rng.normal();
            norm = centers.row(c).norm();
        }
        centers.row(c) *= options.center_scale / norm;
    }

    Dataset out;
    out.num_classes = options.num_classes;
    out.features.resize(static_cast<Eigen::Index>(options.samples), d);
    out.labels.resize(options.samples);
    for (std::size_t i = 0; i < options.samples; ++i) {
        const auto label = static_cast<int>(i % options.num_classes);
        out.labels[i] = label;
        for (Eigen::Index k = 0; k < d; ++k)
            out.features(static_cast<Eigen::Index>(i), k) = centers(label, k) + options.noise_sigma * rng.normal();
    }
    return out;
}

std::pair<Dataset, Dataset> split_head(const Dataset& dataset, std::size_t head) {
    require(head <= dataset.size(), "split point beyond dataset size");
    Dataset first, rest;
    first.num_classes = rest.num_classes = dataset.num_classes;
    const auto h = static_cast<Eigen::Index>(head);
    first.features = dataset.features.topRows(h);
    rest.features = dataset.features.bottomRows(dataset.features.rows() - h);
    first.labels.assign(dataset.labels.begin(), dataset.labels.begin() + h);
    rest.labels.assign(dataset.labels.begin() + h, dataset.labels.end());
    return {std::move(first), std::move(rest)};
}

}  // namespace fedsim
