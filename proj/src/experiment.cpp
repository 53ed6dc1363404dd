#include "fedsim/experiment.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace fedsim {

using nlohmann::json;

namespace {

// Reads one JSON object, tracking which keys were consumed so that anything
// left over can be rejected.
class Section {
public:
    Section(const json& doc, std::string name) : doc_(doc), name_(std::move(name)) {
        if (!doc_.is_object()) throw ConfigError("'" + name_ + "' must be an object");
    }

    // Documents built in code hold signed integers; parsed text holds unsigned.
    static bool non_negative(const json& v) {
        return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
    }

    bool has(const std::string& key) const { return doc_.contains(key); }

    const json& raw(const std::string& key) {
        if (!doc_.contains(key)) throw ConfigError("missing key '" + name_ + "." + key + "'");
        used_.insert(key);
        return doc_.at(key);
    }

    std::size_t count(const std::string& key) { return seed(key); }
    std::uint64_t seed(const std::string& key) {
        const json& v = raw(key);
        if (!non_negative(v)) throw ConfigError("'" + name_ + "." + key + "' must be a non-negative integer");
        return v.get<std::uint64_t>();
    }
    double number(const std::string& key) {
        const json& v = raw(key);
        if (!v.is_number()) throw ConfigError("'" + name_ + "." + key + "' must be a number");
        return v.get<double>();
    }
    bool flag(const std::string& key) {
        const json& v = raw(key);
        if (!v.is_boolean()) throw ConfigError("'" + name_ + "." + key + "' must be a boolean");
        return v.get<bool>();
    }
    std::string text(const std::string& key) {
        const json& v = raw(key);
        if (!v.is_string()) throw ConfigError("'" + name_ + "." + key + "' must be a string");
        return v.get<std::string>();
    }
    std::vector<std::size_t> counts(const std::string& key) {
        const json& v = raw(key);
        if (!v.is_array()) throw ConfigError("'" + name_ + "." + key + "' must be an array");
        std::vector<std::size_t> out;
        for (const auto& item : v) {
            if (!non_negative(item))
                throw ConfigError("'" + name_ + "." + key + "' must hold non-negative integers");
            out.push_back(item.get<std::size_t>());
        }
        return out;
    }

    template <typename Fn>
    auto optional(const std::string& key, Fn&& read) -> std::optional<decltype(read(key))> {
        if (!has(key)) return std::nullopt;
        return read(key);
    }

    void finish() const {
        for (const auto& [key, value] : doc_.items())
            if (!used_.count(key)) throw ConfigError("unknown key '" + name_ + "." + key + "'");
    }

private:
    const json& doc_;
    std::string name_;
    std::set<std::string> used_;
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    if (path.is_relative() && !base.empty()) path = base / path;
    return path.lexically_normal();
}

std::string_view to_string(DataSource s) {
    switch (s) {
        case DataSource::synthetic: return "synthetic";
        case DataSource::idx: return "idx";
        case DataSource::csv: return "csv";
    }
    return "unknown";
}

DatasetSection parse_dataset(const json& doc, const std::filesystem::path& base) {
    Section s(doc, "dataset");
    DatasetSection d;
    const std::string source = s.text("source");
    if (source == "synthetic") {
        d.source = DataSource::synthetic;
        d.synthetic.seed = s.seed("seed");
        d.synthetic.samples = s.count("train_samples");
        d.test_samples = s.count("test_samples");
        d.synthetic.input_dim = s.count("input_dim");
        d.num_classes = s.count("num_classes");
        d.synthetic.num_classes = d.num_classes;
        if (s.has("center_scale")) d.synthetic.center_scale = s.number("center_scale");
        if (s.has("noise_sigma")) d.synthetic.noise_sigma = s.number("noise_sigma");
        if (d.test_samples < 1) throw ConfigError("dataset.test_samples must be >= 1");
    } else if (source == "idx") {
        d.source = DataSource::idx;
        d.train_images = resolve(base, s.text("train_images"));
        d.train_labels = resolve(base, s.text("train_labels"));
        if (s.has("test_images") || s.has("test_labels")) {
            d.test_images = resolve(base, s.text("test_images"));
            d.test_labels = resolve(base, s.text("test_labels"));
        }
        if (s.has("num_classes")) d.num_classes = s.count("num_classes");
        if (s.has("test_samples")) d.test_samples = s.count("test_samples");
    } else if (source == "csv") {
        d.source = DataSource::csv;
        d.train_path = resolve(base, s.text("train_path"));
        if (s.has("test_path")) d.test_path = resolve(base, s.text("test_path"));
        d.num_classes = s.count("num_classes");
        if (s.has("header")) d.header = s.flag("header");
        if (s.has("test_samples")) d.test_samples = s.count("test_samples");
    } else {
        throw ConfigError("unknown dataset.source '" + source + "'");
    }
    if (d.source != DataSource::synthetic) {
        const bool has_test_file = d.source == DataSource::idx ? !d.test_images.empty() : !d.test_path.empty();
        if (has_test_file == (d.test_samples > 0))
            throw ConfigError("dataset needs exactly one of a test file or test_samples");
    }
    if (d.num_classes < 2) throw ConfigError("dataset.num_classes must be >= 2");
    s.finish();
    return d;
}

PartitionPlan parse_partition(const json& doc) {
    Section s(doc, "partition");
    PartitionPlan plan;
    plan.kind = parse_partition_kind(s.text("kind"));
    plan.clients = s.count("K");
    if (plan.kind == PartitionKind::noniid_l) plan.labels_per_client = s.count("L");
    if (plan.kind == PartitionKind::manual) plan.assignment = s.counts("assignment");
    if (plan.clients < 1) throw ConfigError("partition.K must be >= 1");
    s.finish();
    return plan;
}

TrainingConfig parse_train(const json& doc) {
    Section s(doc, "train");
    TrainingConfig t;
    t.mode = parse_training_mode(s.text("mode"));
    t.batch_size = s.count("B");
    t.batch_count = s.optional("C", [&](const std::string& k) { return s.count(k); });
    t.local_epochs = s.optional("E", [&](const std::string& k) { return s.count(k); });
    t.learning_rate = s.number("eta");
    t.max_rounds = s.count("I_max");
    if (s.has("eval_every")) t.eval_every = s.count("eval_every");
    if (s.has("threads")) t.threads = s.count("threads");
    if (s.has("train_loss")) t.train_loss = s.flag("train_loss");
    if (s.has("centralized_batches")) t.centralized_batches = parse_centralized_batches(s.text("centralized_batches"));
    if (s.has("seeds")) {
        Section seeds(s.raw("seeds"), "train.seeds");
        if (seeds.has("init")) t.seeds.init = seeds.seed("init");
        if (seeds.has("shuffle")) t.seeds.shuffle = seeds.seed("shuffle");
        if (seeds.has("partition")) t.seeds.partition = seeds.seed("partition");
        seeds.finish();
    }
    s.finish();
    return t;
}

}  // namespace

ExperimentConfig parse_config(const json& doc, const std::filesystem::path& base_dir) {
    try {
        Section top(doc, "config");
        ExperimentConfig config;
        config.dataset = parse_dataset(top.raw("dataset"), base_dir);
        {
            Section model(top.raw("model"), "model");
            config.hidden = model.counts("hidden");
            model.finish();
        }
        config.train = parse_train(top.raw("train"));
        if (top.has("partition")) {
            config.partition = parse_partition(top.raw("partition"));
        } else if (config.train.mode != TrainingMode::centralized) {
            throw ConfigError("federated modes need a 'partition' section");
        }
        if (top.has("output")) {
            Section out(top.raw("output"), "output");
            if (out.has("dir")) config.output.dir = resolve(base_dir, out.text("dir"));
            if (out.has("run_name")) config.output.run_name = out.text("run_name");
            out.finish();
        } else {
            config.output.dir = resolve(base_dir, "runs");
        }
        if (top.has("metadata")) top.raw("metadata");  // informational, written by `run`
        top.finish();

        config.train.clients = config.partition.clients;
        config.partition.seed = config.train.seeds.partition;
        if (config.output.run_name.empty() || config.output.run_name.find('/') != std::string::npos)
            throw ConfigError("output.run_name must be a plain file stem");
        if (config.train.mode == TrainingMode::centralized &&
            config.train.centralized_batches == CentralizedBatches::lockstep && !top.has("partition"))
            throw ConfigError("lockstep centralized batches need a 'partition' section");
        validate(config.train);
        return config;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

void override_seeds(ExperimentConfig& config, std::uint64_t seed) {
    config.dataset.synthetic.seed = seed;
    config.train.seeds = {seed, seed, seed};
    config.partition.seed = seed;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("config " + path.string() + ": " + e.what());
    }
    auto base = std::filesystem::absolute(path).parent_path();
    ExperimentConfig config = parse_config(doc, base);
    if (const char* env = std::getenv("FEDSIM_SEED"); env && *env) {
        std::uint64_t seed = 0;
        const std::string_view text(env);
        const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), seed);
        if (ec != std::errc{} || ptr != text.data() + text.size())
            throw ConfigError("FEDSIM_SEED must be an unsigned integer");
        override_seeds(config, seed);
    }
    return config;
}

json to_json(const ExperimentConfig& c) {
    json dataset;
    dataset["source"] = std::string(to_string(c.dataset.source));
    switch (c.dataset.source) {
        case DataSource::synthetic:
            dataset["seed"] = c.dataset.synthetic.seed;
            dataset["train_samples"] = c.dataset.synthetic.samples;
            dataset["test_samples"] = c.dataset.test_samples;
            dataset["input_dim"] = c.dataset.synthetic.input_dim;
            dataset["num_classes"] = c.dataset.num_classes;
            dataset["center_scale"] = c.dataset.synthetic.center_scale;
            dataset["noise_sigma"] = c.dataset.synthetic.noise_sigma;
            break;
        case DataSource::idx:
            dataset["train_images"] = c.dataset.train_images.string();
            dataset["train_labels"] = c.dataset.train_labels.string();
            if (!c.dataset.test_images.empty()) {
                dataset["test_images"] = c.dataset.test_images.string();
                dataset["test_labels"] = c.dataset.test_labels.string();
            }
            dataset["num_classes"] = c.dataset.num_classes;
            if (c.dataset.test_samples > 0) dataset["test_samples"] = c.dataset.test_samples;
            break;
        case DataSource::csv:
            dataset["train_path"] = c.dataset.train_path.string();
            if (!c.dataset.test_path.empty()) dataset["test_path"] = c.dataset.test_path.string();
            dataset["num_classes"] = c.dataset.num_classes;
            dataset["header"] = c.dataset.header;
            if (c.dataset.test_samples > 0) dataset["test_samples"] = c.dataset.test_samples;
            break;
    }

    json partition;
    partition["kind"] = std::string(to_string(c.partition.kind));
    partition["K"] = c.partition.clients;
    if (c.partition.kind == PartitionKind::noniid_l) partition["L"] = c.partition.labels_per_client;
    if (c.partition.kind == PartitionKind::manual) partition["assignment"] = c.partition.assignment;

    const TrainingConfig& t = c.train;
    json train;
    train["mode"] = std::string(to_string(t.mode));
    train["B"] = t.batch_size;
    if (t.batch_count) train["C"] = *t.batch_count;
    if (t.local_epochs) train["E"] = *t.local_epochs;
    train["eta"] = t.learning_rate;
    train["I_max"] = t.max_rounds;
    train["eval_every"] = t.eval_every;
    train["threads"] = t.threads;
    train["train_loss"] = t.train_loss;
    train["centralized_batches"] = std::string(to_string(t.centralized_batches));
    train["seeds"] = {{"init", t.seeds.init}, {"shuffle", t.seeds.shuffle}, {"partition", t.seeds.partition}};

    json doc;
    doc["dataset"] = dataset;
    doc["model"] = {{"hidden", c.hidden}};
    doc["partition"] = partition;
    doc["train"] = train;
    doc["output"] = {{"dir", c.output.dir.string()}, {"run_name", c.output.run_name}};
    return doc;
}

ExperimentData load_data(const DatasetSection& d) {
    ExperimentData data;
    switch (d.source) {
        case DataSource::synthetic: {
            SyntheticOptions options = d.synthetic;
            options.samples = d.synthetic.samples + d.test_samples;
            auto [train, test] = split_head(synthetic(options), d.synthetic.samples);
            data = {std::move(train), std::move(test)};
            break;
        }
        case DataSource::idx:
            data.train = load_idx(d.train_images, d.train_labels, d.num_classes);
            if (!d.test_images.empty()) data.test = load_idx(d.test_images, d.test_labels, d.num_classes);
            break;
        case DataSource::csv:
            data.train = load_csv(d.train_path, d.num_classes, d.header);
            if (!d.test_path.empty()) data.test = load_csv(d.test_path, d.num_classes, d.header);
            break;
    }
    if (d.source != DataSource::synthetic && d.test_samples > 0) {
        if (d.test_samples >= data.train.size()) throw DataError("test_samples leaves no training data");
        auto [train, test] = split_head(data.train, data.train.size() - d.test_samples);
        data = {std::move(train), std::move(test)};
    }
    validate(data.train);
    validate(data.test);
    if (data.train.input_dim() != data.test.input_dim())
        throw DataError("train and test feature widths differ");
    return data;
}

NetworkSpec network_spec(const ExperimentConfig& config, const Dataset& train) {
    NetworkSpec spec{train.input_dim(), config.hidden, config.dataset.num_classes};
    try {
        validate(spec);
    } catch (const ContractViolation& e) {
        throw ConfigError(e.what());
    }
    return spec;
}

RunResult run_experiment(const ExperimentConfig& config) {
    const ExperimentData data = load_data(config.dataset);
    RunResult result;
    result.spec = network_spec(config, data.train);
    const TrainingConfig& t = config.train;
    if (t.mode == TrainingMode::centralized && t.centralized_batches == CentralizedBatches::shuffled) {
        result.log = run_centralized(t, result.spec, data.train, data.test);
        return result;
    }
    const auto clients = partition(data.train, config.partition);
    result.log = run_training(t, result.spec, clients, data.test);
    return result;
}

ArtifactPaths write_artifacts(const ExperimentConfig& config, const RunResult& result) {
    ArtifactPaths paths{config.output.dir / (config.output.run_name + ".csv"),
                        config.output.dir / (config.output.run_name + ".json")};
    json sidecar = to_json(config);
    const CommCost cost = comm_cost(config.train, result.spec);
    sidecar["metadata"] = {{"parameters", result.spec.parameter_count()},
                           {"input_dim", result.spec.input_dim},
                           {"bytes_per_round", cost.bytes_per_round},
                           {"evaluated_rounds", result.log.rows.size()},
                           {"metrics_csv", paths.csv.filename().string()}};
    write_file_atomic(paths.csv, to_csv(result.log));
    write_file_atomic(paths.sidecar, sidecar.dump(2) + "\n");
    return paths;
}

namespace {

LogSummary summarize(const MetricsLog& log, std::optional<double> target) {
    LogSummary s;
    s.max_accuracy = max_accuracy(log);
    s.round_of_max = round_of_max_accuracy(log);
    if (target) s.rounds_to_target = rounds_to_accuracy(log, *target);
    return s;
}

std::string format_number(double v) {
    std::ostringstream out;
    out.precision(6);
    out << v;
    return out.str();
}

std::string rounds_text(const std::optional<std::size_t>& r) { return r ? std::to_string(*r) : "never"; }

}  // namespace

Comparison compare_logs(const MetricsLog& a, const MetricsLog& b, double epsilon,
                        std::optional<double> target_accuracy) {
    if (!(epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
    if (target_accuracy && !(*target_accuracy > 0.0 && *target_accuracy < 1.0))
        throw ConfigError("target accuracy must lie in (0, 1)");
    Comparison c;
    c.target_accuracy = target_accuracy;
    try {
        c.discordance = discordance(a, b, epsilon);
    } catch (const DataError& e) {
        c.discordance_error = e.what();
    }
    c.first = summarize(a, target_accuracy);
    c.second = summarize(b, target_accuracy);
    return c;
}

std::string format_comparison(const Comparison& c) {
    std::ostringstream out;
    if (c.discordance) {
        out << "delta: " << format_number(c.discordance->delta) << "\n";
        out << "epsilon: " << format_number(c.discordance->epsilon) << "\n";
        out << "concordant: " << (c.discordance->concordant ? "yes" : "no") << "\n";
        out << "evaluated rounds: " << c.discordance->evaluated_rounds << "\n";
    }
    out << "max accuracy: a=" << format_number(c.first.max_accuracy) << " (round " << c.first.round_of_max
        << ") b=" << format_number(c.second.max_accuracy) << " (round " << c.second.round_of_max << ")\n";
    if (c.target_accuracy) {
        out << "rounds to accuracy " << format_number(*c.target_accuracy) << ": a=" << rounds_text(c.first.rounds_to_target)
            << " b=" << rounds_text(c.second.rounds_to_target) << "\n";
    }
    return out.str();
}

json comparison_json(const Comparison& c) {
    auto summary = [&](const LogSummary& s) {
        json j = {{"max_accuracy", s.max_accuracy}, {"round_of_max", s.round_of_max}};
        if (c.target_accuracy)
            j["rounds_to_target"] = s.rounds_to_target ? json(*s.rounds_to_target) : json("never");
        return j;
    };
    json j;
    if (c.discordance) {
        j["delta"] = c.discordance->delta;
        j["epsilon"] = c.discordance->epsilon;
        j["concordant"] = c.discordance->concordant;
        j["evaluated_rounds"] = c.discordance->evaluated_rounds;
    }
    j["a"] = summary(c.first);
    j["b"] = summary(c.second);
    if (c.target_accuracy) j["target_accuracy"] = *c.target_accuracy;
    return j;
}

void set_config_value(json& doc, const std::string& dotted_key, const std::string& value) {
    json* node = &doc;
    std::size_t start = 0;
    for (;;) {
        const auto dot = dotted_key.find('.', start);
        const std::string part = dotted_key.substr(start, dot == std::string::npos ? dot : dot - start);
        if (!node->is_object() || !node->contains(part)) throw ConfigError("unknown config key '" + dotted_key + "'");
        node = &(*node)[part];
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    json parsed = json::parse(value, nullptr, false);
    *node = parsed.is_discarded() ? json(value) : parsed;
}

std::vector<SweepRun> run_sweep(const ExperimentConfig& base, const std::string& dotted_key,
                                const std::vector<std::string>& values, std::optional<double> target_accuracy) {
    if (values.empty()) throw ConfigError("sweep needs at least one value");
    const json resolved = to_json(base);
    std::string stem = dotted_key.substr(dotted_key.rfind('.') + 1);
    std::vector<SweepRun> runs;
    for (const auto& value : values) {
        json doc = resolved;
        set_config_value(doc, dotted_key, value);
        ExperimentConfig variant = parse_config(doc);
        variant.output.run_name = base.output.run_name + "_" + stem + "=" + value;
        const RunResult result = run_experiment(variant);
        write_artifacts(variant, result);
        runs.push_back({value, variant.output.run_name, summarize(result.log, target_accuracy)});
    }
    write_file_atomic(base.output.dir / (base.output.run_name + "_sweep.csv"), sweep_index_csv(runs));
    return runs;
}

std::string sweep_index_csv(const std::vector<SweepRun>& runs) {
    std::string out = "value,run_name,max_accuracy,round_of_max,rounds_to_target\n";
    for (const auto& r : runs) {
        std::ostringstream row;
        row.precision(17);
        row << r.value << ',' << r.run_name << ',' << r.summary.max_accuracy << ',' << r.summary.round_of_max << ','
            << (r.summary.rounds_to_target ? std::to_string(*r.summary.rounds_to_target) : std::string())
            << '\n';
        out += row.str();
    }
    return out;
}

}  // namespace fedsim
