// fedsim: run, compare and sweep federated training experiments.

#include <cstdlib>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "fedsim/experiment.hpp"

namespace {

constexpr int kConfigError = 2;
constexpr int kDataError = 3;
constexpr int kContractError = 4;

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) out.push_back(item);
    return out;
}

template <typename Fn>
int guarded(Fn&& fn) {
    try {
        fn();
        return 0;
    } catch (const fedsim::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const fedsim::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kDataError;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kDataError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kContractError;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Federated multi-mini-batch training simulator"};
    app.require_subcommand(1);

    std::string run_config;
    auto* run = app.add_subcommand("run", "Run one experiment and write metrics CSV + JSON sidecar");
    run->add_option("config", run_config, "Experiment config (JSON)")->required();

    std::string log_a, log_b;
    double epsilon = 0.01;
    std::optional<double> target;
    bool as_json = false;
    auto* compare = app.add_subcommand("compare", "Discordance and accuracy summary of two metrics logs");
    compare->add_option("a", log_a, "First metrics CSV")->required();
    compare->add_option("b", log_b, "Second metrics CSV")->required();
    compare->add_option("--epsilon", epsilon, "Concordance threshold")->capture_default_str();
    compare->add_option("--target-acc", target, "Report the first round reaching this accuracy");
    compare->add_flag("--json", as_json, "Print JSON instead of text");

    std::string sweep_config, sweep_set;
    std::optional<double> sweep_target;
    auto* sweep = app.add_subcommand("sweep", "Run one experiment per value of a config key");
    sweep->add_option("config", sweep_config, "Experiment config (JSON)")->required();
    sweep->add_option("--set", sweep_set, "key=v1,v2,... e.g. train.C=1,5,10")->required();
    sweep->add_option("--target-acc", sweep_target, "Accuracy target for the rounds_to_target column");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : kConfigError;
    }

    if (*run) {
        return guarded([&] {
            const auto config = fedsim::load_config(run_config);
            const auto result = fedsim::run_experiment(config);
            const auto paths = fedsim::write_artifacts(config, result);
            std::cout << "wrote " << paths.csv.string() << " (" << result.log.rows.size() << " rows)\n"
                      << "wrote " << paths.sidecar.string() << "\n";
        });
    }
    if (*compare) {
        return guarded([&] {
            const auto a = fedsim::read_metrics_csv(log_a);
            const auto b = fedsim::read_metrics_csv(log_b);
            const auto c = fedsim::compare_logs(a, b, epsilon, target);
            if (as_json) {
                std::cout << fedsim::comparison_json(c).dump(2) << "\n";
            } else {
                std::cout << fedsim::format_comparison(c);
            }
            if (!c.discordance) throw fedsim::DataError(c.discordance_error);
        });
    }
    return guarded([&] {
        const auto eq = sweep_set.find('=');
        if (eq == std::string::npos) throw fedsim::ConfigError("--set expects key=v1,v2,...");
        const auto config = fedsim::load_config(sweep_config);
        const auto runs = fedsim::run_sweep(config, sweep_set.substr(0, eq), split_list(sweep_set.substr(eq + 1)),
                                            sweep_target);
        std::cout << fedsim::sweep_index_csv(runs);
    });
}
