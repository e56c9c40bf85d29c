// bicoclust: fit, tune, impute and simulate from the command line.

#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "bicoclust/cli.hpp"
#include "bicoclust/io.hpp"

namespace {

namespace cli = bicoclust::cli;

struct Common {
    std::string config;
    std::string out = "out";
    bool to_stdout = false;
    std::string log_level = "info";
    std::map<std::string, std::string> flags;
};

bool is_boolean_key(const std::string& key) { return key == "adaptive" || key == "tune-gamma"; }

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--config", c.config, "key = value settings file; flags override it");
    sub->add_option("--out", c.out, "output directory")->capture_default_str();
    sub->add_flag("--stdout", c.to_stdout, "also print the main result table to standard output");
    sub->add_option("--log-level", c.log_level, "quiet, info or debug")
        ->check(CLI::IsMember({"quiet", "info", "debug"}))
        ->capture_default_str();
    for (const auto& [key, help] : cli::setting_keys()) {
        std::string& slot = c.flags[key];
        if (is_boolean_key(key)) {
            sub->add_flag("--" + key + "{true}", slot, help);
        } else {
            sub->add_option("--" + key, slot, help);
        }
    }
}

cli::Settings merged_settings(CLI::App* sub, const Common& c) {
    cli::Settings s;
    if (!c.config.empty()) {
        s = bicoclust::read_config(c.config);
    }
    for (const auto& [key, value] : c.flags) {
        if (sub->count("--" + key) > 0) {
            s[key] = value;
        }
    }
    return s;
}

void configure_logging(const std::string& level) {
    auto logger = spdlog::stderr_color_mt("bicoclust");
    logger->set_pattern("[%l] %v");
    spdlog::set_default_logger(logger);
    if (level == "quiet") {
        spdlog::set_level(spdlog::level::warn);
    } else if (level == "debug") {
        spdlog::set_level(spdlog::level::debug);
    } else {
        spdlog::set_level(spdlog::level::info);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Biconvex biclustering with learned feature weights"};
    app.require_subcommand(1);

    Common common;
    std::string target;
    auto* fit = app.add_subcommand("fit", "fit at fixed gamma and lambda");
    auto* tune = app.add_subcommand("tune", "select gamma by hold-out and lambda by eBIC, then fit");
    auto* impute = app.add_subcommand("impute", "fill NA entries by missing-data fitting");
    auto* sim = app.add_subcommand("sim", "run a simulation study: 1, 2 or theorem1");
    for (auto* sub : {fit, tune, impute}) {
        sub->add_option("input", target, "input CSV")->required();
        add_common(sub, common);
    }
    sim->add_option("study", target, "1, 2 or theorem1")->required();
    add_common(sim, common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : cli::input_error;
    }

    configure_logging(common.log_level);
    CLI::App* sub = app.get_subcommands().front();
    cli::Settings settings;
    try {
        settings = merged_settings(sub, common);
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return cli::input_error;
    }
    cli::OutputSpec out;
    out.out_dir = common.out;
    out.to_stdout = common.to_stdout;
    const cli::Command cmd = sub == fit      ? cli::Command::fit
                             : sub == tune   ? cli::Command::tune
                             : sub == impute ? cli::Command::impute
                                             : cli::Command::sim;
    return cli::run(cmd, target, settings, out);
}
