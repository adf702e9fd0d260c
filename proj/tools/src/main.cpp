/*
 * Copyright 2026 The misspec Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "misspec/cli/commands.hpp"

namespace
{

void configure_logging()
{
    auto logger = spdlog::stderr_color_mt("misspec");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%l] %v");
    const char* level = std::getenv("MISSPEC_LOG");
    spdlog::set_level(level != nullptr ? spdlog::level::from_str(level)
                                       : spdlog::level::warn);
}

}  // namespace

int main(int argc, char** argv)
{
    using namespace misspec::cli;
    configure_logging();

    CLI::App app{"Linear misspecification experiments: certificates, sweeps, training "
                 "and ID/OOD landscapes"};
    app.require_subcommand(1);

    CommandOptions options;
    std::vector<int> mask;
    int add_feature = 0;
    int fixed_epoch = 0;
    std::uint64_t seed = 0;
    std::string out_dir;

    auto add_common = [&](CLI::App* cmd, bool config_required) {
        auto* cfg = cmd->add_option("--config", options.config_path, "experiment YAML file");
        if (config_required)
        {
            cfg->required();
        }
        cfg->check(CLI::ExistingFile);
        cmd->add_option("--out", out_dir, "output directory (overrides config)");
        cmd->add_option("--seed", seed, "global seed (overrides config)");
    };

    auto* certify = app.add_subcommand("certify", "certificate for adding one spurious feature");
    add_common(certify, true);
    certify->add_option("--mask", mask, "0-based columns of the starting mask")
        ->delimiter(',');
    certify->add_option("--add-feature", add_feature, "0-based spurious column to add");

    auto* sweep = app.add_subcommand("sweep", "ID and OOD risk while adding spurious features");
    add_common(sweep, true);

    auto* train = app.add_subcommand("train", "train ERM seeds and one diverse set");
    add_common(train, true);

    auto* landscape = app.add_subcommand("landscape", "pattern and selection report for points");
    add_common(landscape, false);
    landscape->add_option("--points", options.points_path, "trainer CSV")
        ->required()
        ->check(CLI::ExistingFile);
    landscape->add_option("--fixed-epoch", fixed_epoch, "epoch for the filtered pattern");

    auto* shift = app.add_subcommand("shift-sweep", "patterns across a shift family");
    add_common(shift, true);

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError& e)
    {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    auto given = [](CLI::App* cmd, const char* name) { return cmd->count(name) > 0; };
    auto* active = app.get_subcommands().front();
    if (given(active, "--out"))
    {
        options.out_dir = out_dir;
    }
    if (given(active, "--seed"))
    {
        options.seed = seed;
    }
    if (active == certify && given(active, "--mask"))
    {
        options.mask = mask;
    }
    if (active == certify && given(active, "--add-feature"))
    {
        options.add_feature = add_feature;
    }
    if (active == landscape && given(active, "--fixed-epoch"))
    {
        options.fixed_epoch = fixed_epoch;
    }

    if (active == certify)
    {
        return cmd_certify(options, std::cout, std::cerr);
    }
    if (active == sweep)
    {
        return cmd_sweep(options, std::cout, std::cerr);
    }
    if (active == train)
    {
        return cmd_train(options, std::cout, std::cerr);
    }
    if (active == landscape)
    {
        return cmd_landscape(options, std::cout, std::cerr);
    }
    return cmd_shift_sweep(options, std::cout, std::cerr);
}
