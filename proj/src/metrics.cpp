#include "fedsim/metrics.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>

#include "fedsim/errors.hpp"

namespace fedsim {

namespace {

template <typename T>
void append_number(std::string& out, T value) {
    std::array<char, 64> buf{};
    const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    require(ec == std::errc{}, "number formatting failed");
    out.append(buf.data(), ptr);
}

template <typename T>
T parse_number(std::string_view cell, std::size_t line_no) {
    T value{};
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (cell.empty() || ec != std::errc{} || ptr != cell.data() + cell.size())
        throw DataError("metrics line " + std::to_string(line_no) + ": bad value '" + std::string(cell) + "'");
    return value;
}

}  // namespace

std::string to_csv(const MetricsLog& log) {
    std::string out(kMetricsHeader);
    out += '\n';
    for (const auto& row : log.rows) {
        append_number(out, row.round);
        out += ',';
        append_number(out, row.test_loss);
        out += ',';
        append_number(out, row.test_accuracy);
        out += ',';
        if (row.train_loss) append_number(out, *row.train_loss);
        out += ',';
        append_number(out, row.cum_local_updates);
        out += ',';
        append_number(out, row.cum_bytes);
        out += '\n';
    }
    return out;
}

MetricsLog parse_metrics_csv(std::string_view text) {
    MetricsLog log;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line_no == 1) {
            if (line != kMetricsHeader) throw DataError("metrics CSV header mismatch");
            continue;
        }
        if (line.empty()) continue;

        std::array<std::string_view, 6> cells;
        std::size_t count = 0;
        for (std::size_t start = 0;;) {
            const auto comma = line.find(',', start);
            if (count == cells.size()) throw DataError("metrics line " + std::to_string(line_no) + ": too many cells");
            cells[count++] = line.substr(start, comma == std::string_view::npos ? comma : comma - start);
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        if (count != cells.size()) throw DataError("metrics line " + std::to_string(line_no) + ": expected 6 cells");

        MetricsRow row;
        row.round = parse_number<std::size_t>(cells[0], line_no);
        row.test_loss = parse_number<double>(cells[1], line_no);
        row.test_accuracy = parse_number<double>(cells[2], line_no);
        if (!cells[3].empty()) row.train_loss = parse_number<double>(cells[3], line_no);
        row.cum_local_updates = parse_number<std::uint64_t>(cells[4], line_no);
        row.cum_bytes = parse_number<std::uint64_t>(cells[5], line_no);
        if (!log.rows.empty() && row.round <= log.rows.back().round)
            throw DataError("metrics line " + std::to_string(line_no) + ": rounds must strictly increase");
        log.rows.push_back(row);
    }
    if (line_no == 0) throw DataError("metrics CSV is empty");
    return log;
}

MetricsLog read_metrics_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_metrics_csv(buffer.str());
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto temp = path;
    temp += ".tmp";
    {
        std::ofstream out(temp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write " + temp.string());
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        out.flush();
        if (!out) throw DataError("write failed for " + temp.string());
    }
    std::filesystem::rename(temp, path);
}

DiscordanceReport discordance(const MetricsLog& federated, const MetricsLog& centralized, double epsilon) {
    require(epsilon > 0.0, "epsilon must be positive");
    if (federated.rows.size() != centralized.rows.size())
        throw DataError("logs have different numbers of evaluated rounds");
    if (federated.rows.empty()) throw DataError("logs contain no evaluated rounds");
    double sum = 0.0;
    for (std::size_t i = 0; i < federated.rows.size(); ++i) {
        if (federated.rows[i].round != centralized.rows[i].round)
            throw DataError("logs were evaluated at different rounds");
        const double diff = federated.rows[i].test_loss - centralized.rows[i].test_loss;
        sum += diff * diff;
    }
    DiscordanceReport report;
    report.evaluated_rounds = federated.rows.size();
    report.max_round = federated.rows.back().round;
    report.delta = sum / static_cast<double>(report.evaluated_rounds);
    report.epsilon = epsilon;
    report.concordant = report.delta < epsilon;
    return report;
}

double max_accuracy(const MetricsLog& log) {
    require(!log.rows.empty(), "empty metrics log");
    double best = log.rows.front().test_accuracy;
    for (const auto& row : log.rows) best = std::max(best, row.test_accuracy);
    return best;
}

std::size_t round_of_max_accuracy(const MetricsLog& log) {
    const double best = max_accuracy(log);
    for (const auto& row : log.rows)
        if (row.test_accuracy == best) return row.round;
    return log.rows.back().round;
}

std::optional<std::size_t> rounds_to_accuracy(const MetricsLog& log, double target) {
    for (const auto& row : log.rows)
        if (row.test_accuracy >= target) return row.round;
    return std::nullopt;
}

}  // namespace fedsim
