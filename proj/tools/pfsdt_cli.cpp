// SPDX-License-Identifier: Apache-2.0
//! Command-line runner for field-detection experiments.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "pfsdt/experiments.hpp"

namespace ex = pfsdt::experiments;

int main(int argc, char** argv)
{
    CLI::App app{"Prequantum field detection laboratory"};
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    bool quiet = false;
    app.add_option("--config", config_path, "Experiment config (JSON)")->required();
    app.add_option("--seed", seed, "Override the Monte Carlo seed");
    app.add_option("--out", out, "Report output path (overrides config)");
    app.add_flag("--quiet", quiet, "Suppress the summary on stdout");
    try {
        app.parse(argc, argv);
    } catch (CLI::ParseError const& e) {
        int const rc = app.exit(e);
        return rc == 0 ? 0 : ex::exit_config_error;
    }

    ex::Outcome outcome;
    std::string output;
    try {
        std::ifstream in(config_path);
        if (!in) {
            throw pfsdt::ConfigError("cannot open config '" + config_path + "'");
        }
        pfsdt::json doc;
        try {
            doc = pfsdt::json::parse(in);
        } catch (pfsdt::json::parse_error const& e) {
            throw pfsdt::ConfigError(std::string("malformed config: ") + e.what());
        }
        auto const cfg = ex::parse_config(std::move(doc), seed, out);
        output = cfg.output;
        outcome = ex::run(cfg);
    } catch (pfsdt::ConfigError const& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return ex::exit_config_error;
    } catch (std::invalid_argument const& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return ex::exit_config_error;
    } catch (pfsdt::DegenerateError const& e) {
        std::cerr << "degenerate configuration: " << e.what() << "\n";
        return ex::exit_config_error;
    }

    if (output.empty() || output == "-") {
        std::cout << outcome.report;
    } else {
        std::ofstream f(output);
        if (!f) {
            std::cerr << "config error: cannot write '" << output << "'\n";
            return ex::exit_config_error;
        }
        f << outcome.report;
    }
    if (!quiet) {
        (output.empty() || output == "-" ? std::cerr : std::cout) << outcome.summary;
    }
    return outcome.exit_code;
}
