// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit when any
// criterion fails. Pass criterion numbers as arguments to run a subset.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <set>
#include <sstream>
#include <string>

#include "fedsim/experiment.hpp"
#include "oracles.hpp"

namespace {

using namespace fedsim;
using nlohmann::json;
namespace fs = std::filesystem;

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    int number;
    std::string name;
    double budget_seconds;
    std::function<Outcome()> check;
};

std::string fmt(double v, int precision = 4) {
    std::ostringstream out;
    out.precision(precision);
    out << v;
    return out.str();
}

fs::path output_dir() {
    static const fs::path dir = fs::current_path() / "acceptance_runs";
    fs::create_directories(dir);
    return dir;
}

MetricsLog run_doc(const json& doc) {
    const ExperimentConfig config = parse_config(doc);
    const RunResult result = run_experiment(config);
    write_artifacts(config, result);
    return result.log;
}

// 1. Analytic gradients agree with central differences.
Outcome gradient_correctness() {
    Xoshiro256pp rng(20240601);
    double worst = 0.0;
    std::size_t largest = 0;
    for (int trial = 0; trial < 20; ++trial) {
        NetworkSpec spec;
        do {
            spec.input_dim = 1 + rng.below(40);
            spec.hidden.assign(rng.below(3), 0);
            for (auto& h : spec.hidden) h = 1 + rng.below(48);
            spec.output_dim = 2 + rng.below(9);
        } while (spec.parameter_count() > 10000);
        largest = std::max(largest, spec.parameter_count());
        const std::size_t rows = 1 + rng.below(16);
        const Batch batch = testing::random_batch(rows, spec.input_dim, spec.output_dim, rng());
        const ModelWeights w = testing::random_weights(spec, rng());
        const auto analytic = compute_gradients(spec, w, batch).grads;
        const auto numeric = finite_diff_grad(spec, w, batch, 1e-5);
        worst = std::max(worst, testing::max_relative_error(analytic, numeric));
    }
    return {worst <= 1e-6, "max relative error " + fmt(worst) + " over 20 instances (largest " +
                               std::to_string(largest) + " params)"};
}

// 2. FedSMB and the lockstep centralized oracle follow the same trajectory.
Outcome lockstep_equivalence() {
    const Dataset all = synthetic({1, 1000, 20, 10});
    auto [train, test] = split_head(all, 800);
    PartitionPlan plan{PartitionKind::iid, 4, 0, 17, {}};
    const auto clients = partition(train, plan);
    const NetworkSpec spec{20, {32}, 10};

    TrainingConfig fed;
    fed.mode = TrainingMode::fedmmb;
    fed.clients = 4;
    fed.batch_size = 10;
    fed.batch_count = 1;
    fed.learning_rate = 0.05;
    fed.max_rounds = 100;
    fed.seeds = {7, 11, 17};
    TrainingConfig cen = fed;
    cen.mode = TrainingMode::centralized;
    cen.batch_count.reset();
    cen.centralized_batches = CentralizedBatches::lockstep;

    std::vector<ModelWeights> fed_w, cen_w;
    run_training(fed, spec, clients, test, [&](std::size_t, const ModelWeights& w) { fed_w.push_back(w); });
    run_training(cen, spec, clients, test, [&](std::size_t, const ModelWeights& w) { cen_w.push_back(w); });
    double worst = 0.0;
    for (std::size_t i = 0; i < fed_w.size(); ++i) worst = std::max(worst, testing::max_abs_diff(fed_w[i], cen_w[i]));
    const bool complete = fed_w.size() == 100 && cen_w.size() == 100;
    return {complete && worst <= 1e-10,
            "max |W_g - W_c| over 100 rounds = " + fmt(worst) + " (batch B'=40 concatenated from 4x10)"};
}

json mnist_dataset() {
    const fs::path base = fs::path(FEDSIM_DATA_DIR) / "mnist-subset";
    return {{"source", "idx"},
            {"train_images", (base / "train-images-idx3-ubyte.gz").string()},
            {"train_labels", (base / "train-labels-idx1-ubyte.gz").string()},
            {"test_images", (base / "t10k-images-idx3-ubyte.gz").string()},
            {"test_labels", (base / "t10k-labels-idx1-ubyte.gz").string()},
            {"num_classes", 10}};
}

json seeds() { return {{"init", 1}, {"shuffle", 2}, {"partition", 3}}; }

// 3. Free-running FedSMB vs centralized MBGD on an MNIST subset.
Outcome mnist_concordance() {
    auto base = [](const std::string& name) {
        return json{{"dataset", mnist_dataset()},
                    {"model", {{"hidden", {32, 32}}}},
                    {"train", {{"eta", 0.01}, {"I_max", 2000}, {"eval_every", 10}, {"seeds", seeds()}}},
                    {"output", {{"dir", output_dir().string()}, {"run_name", name}}}};
    };
    json cen = base("c3_centralized");
    cen["train"].update(json{{"mode", "centralized"}, {"B", 50}});
    const MetricsLog central = run_doc(cen);

    Outcome out{true, ""};
    for (const auto& [label, partition] :
         {std::pair{"IID", json{{"kind", "iid"}, {"K", 10}}},
          std::pair{"Non-IID-1", json{{"kind", "noniid_l"}, {"K", 10}, {"L", 1}}}}) {
        json fed = base(std::string("c3_fedsmb_") + label);
        fed["partition"] = partition;
        fed["train"].update(json{{"mode", "fedmmb"}, {"B", 5}, {"C", 1}});
        const MetricsLog log = run_doc(fed);
        const auto report = discordance(log, central, 0.01);
        out.pass = out.pass && report.concordant;
        out.detail += std::string(label) + " delta=" + fmt(report.delta) + " acc=" + fmt(max_accuracy(log)) + "; ";
    }
    out.detail += "centralized acc=" + fmt(max_accuracy(central));
    return out;
}

json synthetic_dataset(std::size_t train_samples, std::size_t test_samples) {
    return {{"source", "synthetic"}, {"seed", 1},          {"train_samples", train_samples},
            {"test_samples", test_samples}, {"input_dim", 20}, {"num_classes", 10},
            {"center_scale", 3.0}};
}

// 4. IID: larger C reaches the target sooner at similar final accuracy.
Outcome iid_batch_count() {
    std::vector<std::optional<std::size_t>> rounds;
    std::vector<double> accuracy;
    std::string detail;
    for (std::size_t c : {1u, 5u, 20u}) {
        const json doc{{"dataset", synthetic_dataset(2000, 1000)},
                       {"model", {{"hidden", {32}}}},
                       {"partition", {{"kind", "iid"}, {"K", 10}}},
                       {"train",
                        {{"mode", "fedmmb"}, {"B", 10}, {"C", c}, {"eta", 0.05}, {"I_max", 600}, {"eval_every", 2},
                         {"seeds", seeds()}}},
                       {"output", {{"dir", output_dir().string()}, {"run_name", "c4_C" + std::to_string(c)}}}};
        const MetricsLog log = run_doc(doc);
        rounds.push_back(rounds_to_accuracy(log, 0.75));
        accuracy.push_back(max_accuracy(log));
        detail += "C=" + std::to_string(c) + ": rounds->0.75=" +
                  (rounds.back() ? std::to_string(*rounds.back()) : std::string("never")) +
                  " max acc=" + fmt(accuracy.back()) + "; ";
    }
    bool decreasing = rounds[0] && rounds[1] && rounds[2] && *rounds[0] > *rounds[1] && *rounds[1] > *rounds[2];
    const double spread = *std::max_element(accuracy.begin(), accuracy.end()) -
                          *std::min_element(accuracy.begin(), accuracy.end());
    detail += "accuracy spread " + fmt(spread);
    return {decreasing && spread <= 0.03, detail};
}

// Shared Non-IID-2 setup for criteria 5 and 6. Each client holds
// N_j = 1000 samples of two labels, so B=10 gives T=100 batches.
struct SkewSetup {
    std::size_t train_samples = 10000;
    std::vector<std::size_t> hidden{64, 64};
    double eta = 0.12;
    std::size_t rounds = 1000;
};

MetricsLog skew_run(const SkewSetup& s, const std::string& name, const json& train) {
    json doc{{"dataset", synthetic_dataset(s.train_samples, 2000)},
             {"model", {{"hidden", s.hidden}}},
             {"partition", {{"kind", "noniid_l"}, {"K", 10}, {"L", 2}}},
             {"train",
              {{"eta", s.eta},
               {"I_max", s.rounds},
               {"eval_every", 10},
               {"seeds", {{"init", 7}, {"shuffle", 11}, {"partition", 13}}}}},
             {"output", {{"dir", output_dir().string()}, {"run_name", name}}}};
    doc["train"].update(train);
    return run_doc(doc);
}

// Rounds between the best accuracy and the end of the budget, as a rough
// plateau indicator.
std::string plateau_note(const MetricsLog& log) {
    const double tail = std::max_element(log.rows.end() - static_cast<long>(log.rows.size() / 5), log.rows.end(),
                                         [](const auto& a, const auto& b) { return a.test_accuracy < b.test_accuracy; })
                            ->test_accuracy;
    return "peak at round " + std::to_string(round_of_max_accuracy(log)) + ", last-20% best " + fmt(tail);
}

// 5. Under Non-IID-2, C=1 beats C=20 by at least 0.02.
Outcome skew_tradeoff() {
    const SkewSetup s;
    const MetricsLog c1 = skew_run(s, "c5_C1", {{"mode", "fedmmb"}, {"B", 10}, {"C", 1}});
    const MetricsLog c20 = skew_run(s, "c5_C20", {{"mode", "fedmmb"}, {"B", 10}, {"C", 20}});
    const double gap = max_accuracy(c1) - max_accuracy(c20);
    return {gap >= 0.02, "C=1 max acc " + fmt(max_accuracy(c1)) + " (" + plateau_note(c1) + "), C=20 max acc " +
                             fmt(max_accuracy(c20)) + " (" + plateau_note(c20) + "), gap " + fmt(gap)};
}

// 6. FedMMB (B=10, C=20) against FedAvg with B=10 and with the large batch
// giving the same 20 local updates.
Outcome fedmmb_vs_fedavg() {
    const SkewSetup s;
    const std::size_t per_client = s.train_samples / 10;
    const std::size_t large_batch = per_client / 20;
    const MetricsLog mmb = skew_run(s, "c6_fedmmb_C20", {{"mode", "fedmmb"}, {"B", 10}, {"C", 20}});
    const MetricsLog avg = skew_run(s, "c6_fedavg_B10", {{"mode", "fedavg"}, {"B", 10}, {"E", 1}});
    const MetricsLog avg_large =
        skew_run(s, "c6_fedavg_B" + std::to_string(large_batch), {{"mode", "fedavg"}, {"B", large_batch}, {"E", 1}});
    const double gap = max_accuracy(mmb) - max_accuracy(avg);
    const double large_gap = max_accuracy(mmb) - max_accuracy(avg_large);
    const std::uint64_t mmb_updates = mmb.rows.front().cum_local_updates / mmb.rows.front().round / 10;
    const std::uint64_t large_updates = avg_large.rows.front().cum_local_updates / avg_large.rows.front().round / 10;
    return {gap >= 0.02 && large_gap > 0.0 && mmb_updates == 20 && large_updates == 20,
            "FedMMB(B=10,C=20) " + fmt(max_accuracy(mmb)) + ", FedAvg(B=10,E=1) " + fmt(max_accuracy(avg)) +
                " gap " + fmt(gap) + "; FedAvg(B=" + std::to_string(large_batch) + ",E=1) " +
                fmt(max_accuracy(avg_large)) + " gap " + fmt(large_gap) + " (mu_j " +
                std::to_string(mmb_updates) + " vs " + std::to_string(large_updates) + ")"};
}

// 7. Local-update and byte accounting.
Outcome accounting() {
    std::vector<std::string> failures;
    auto expect = [&](bool ok, const std::string& what) {
        if (!ok) failures.push_back(what);
    };
    const BatchWindow expected[] = {{0, 2, false}, {3, 5, false}, {6, 8, false}, {9, 9, true}};
    for (std::size_t i = 0; i < 4; ++i) expect(batch_window(10, 3, i) == expected[i], "window " + std::to_string(i));

    const NetworkSpec spec{5, {7}, 3};
    const Dataset data = synthetic({2, 95, 5, 3});
    for (std::size_t epochs : {1u, 3u}) {
        for (std::size_t b : {1u, 10u, 20u, 95u, 200u}) {
            ClientState client = make_client({0, data}, b, 1, 4);
            const auto r = client_update_fedavg(spec, init_weights(spec, 1), client, epochs, 0.01);
            expect(r.local_updates == epochs * ceil_div(95, b), "fedavg mu B=" + std::to_string(b));
        }
    }
    ClientState client = make_client({0, synthetic({2, 100, 5, 3})}, 10, 3, 4);
    for (std::size_t round = 0; round < 8; ++round) {
        const auto r = client_update_mmb(round, spec, init_weights(spec, 1), client, 0.01);
        expect(r.local_updates == expected[round % 4].size(), "fedmmb mu round " + std::to_string(round));
    }
    for (std::size_t k : {1u, 4u, 10u}) {
        TrainingConfig config;
        config.clients = k;
        expect(comm_cost(config, spec).bytes_per_round == spec.parameter_count() * 8 * 2 * k, "bytes K=" + std::to_string(k));
    }
    std::string detail = failures.empty() ? "windows, mu_j and bytes/round all match" : "";
    for (const auto& f : failures) detail += f + " mismatch; ";
    return {failures.empty(), detail};
}

// 8. Reruns are byte-identical and threads do not change results.
Outcome determinism() {
    const json doc{{"dataset", synthetic_dataset(400, 200)},
                   {"model", {{"hidden", {16}}}},
                   {"partition", {{"kind", "noniid_l"}, {"K", 5}, {"L", 2}}},
                   {"train", {{"mode", "fedmmb"}, {"B", 8}, {"C", 3}, {"eta", 0.05}, {"I_max", 50}, {"seeds", seeds()}}},
                   {"output", {{"dir", output_dir().string()}, {"run_name", "c8_rerun"}}}};
    const ExperimentConfig config = parse_config(doc);
    const auto paths = write_artifacts(config, run_experiment(config));
    const std::string first = to_csv(read_metrics_csv(paths.csv));
    write_artifacts(config, run_experiment(config));
    bool ok = to_csv(read_metrics_csv(paths.csv)) == first;

    Xoshiro256pp rng(88);
    int identical = 0;
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t k = 2 + rng.below(7);
        const Dataset train = synthetic({rng(), k * (20 + rng.below(30)), 8, 4});
        const Dataset test = synthetic({rng(), 50, 8, 4});
        const auto clients = partition_iid(train, k, rng());
        const NetworkSpec spec{8, {4 + rng.below(12)}, 4};
        TrainingConfig t;
        t.clients = k;
        t.batch_size = 1 + rng.below(10);
        t.learning_rate = 0.05;
        t.max_rounds = 20;
        t.seeds = {rng(), rng(), rng()};
        t.train_loss = true;
        if (rng.below(2)) {
            t.mode = TrainingMode::fedavg;
            t.local_epochs = 1 + rng.below(2);
        } else {
            t.batch_count = 1 + rng.below(5);
        }
        const std::string sequential = to_csv(run_training(t, spec, clients, test));
        t.threads = k;
        if (to_csv(run_training(t, spec, clients, test)) == sequential) ++identical;
    }
    ok = ok && identical == 10;
    return {ok, std::string("rerun CSV ") + (to_csv(read_metrics_csv(paths.csv)) == first ? "identical" : "differs") +
                    "; threaded == sequential on " + std::to_string(identical) + "/10 configs"};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> criteria{
        {1, "gradient correctness", 10, gradient_correctness},
        {2, "FedSMB/centralized lockstep equivalence", 30, lockstep_equivalence},
        {3, "free-running concordance on MNIST subset", 1200, mnist_concordance},
        {4, "IID batch-count efficiency", 300, iid_batch_count},
        {5, "Non-IID-2 batch-count trade-off", 600, skew_tradeoff},
        {6, "FedMMB vs FedAvg under skew", 900, fedmmb_vs_fedavg},
        {7, "accounting identities", 1, accounting},
        {8, "determinism", 120, determinism},
    };
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::stoi(argv[i]));

    int failed = 0;
    for (const auto& c : criteria) {
        if (!selected.empty() && !selected.count(c.number)) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome outcome;
        try {
            outcome = c.check();
        } catch (const std::exception& e) {
            outcome = {false, std::string("exception: ") + e.what()};
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool in_budget = seconds < c.budget_seconds;
        const bool pass = outcome.pass && in_budget;
        if (!pass) ++failed;
        std::printf("%s criterion %d (%s): %s [%.1fs, budget %.0fs%s]\n", pass ? "PASS" : "FAIL", c.number,
                    c.name.c_str(), outcome.detail.c_str(), seconds, c.budget_seconds, in_budget ? "" : ", EXCEEDED");
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
