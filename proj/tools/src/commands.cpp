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


#include "misspec/cli/commands.hpp"

#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "misspec/cli/config.hpp"
#include "misspec/cli/svg.hpp"
#include "misspec/error.hpp"
#include "misspec/json.hpp"
#include "misspec/landscape.hpp"
#include "misspec/seed.hpp"
#include "misspec/theorem.hpp"
#include "misspec/trainer.hpp"

namespace fs = std::filesystem;

namespace misspec::cli
{

void write_file_atomic(const std::string& path, const std::string& content)
{
    const fs::path target(path);
    if (target.has_parent_path())
    {
        fs::create_directories(target.parent_path());
    }
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
        {
            throw Error(fmt::format("cannot write {}", tmp.string()));
        }
        out << content;
        out.flush();
        if (!out)
        {
            throw Error(fmt::format("failed writing {}", tmp.string()));
        }
    }
    fs::rename(tmp, target);
}

namespace
{

template <typename Body>
int guarded(std::ostream& err, Body&& body)
{
    try
    {
        return body();
    }
    catch (const ConfigError& e)
    {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    }
    catch (const PreconditionError& e)
    {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    }
    catch (const std::exception& e)
    {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
}

auto load(const CommandOptions& options) -> ExperimentConfig
{
    auto config = load_config(options.config_path);
    auto& e = config.experiment;
    if (options.seed)
    {
        e.seed = *options.seed;
    }
    if (options.mask)
    {
        e.mask = *options.mask;
    }
    if (options.add_feature)
    {
        e.add_feature = *options.add_feature;
    }
    if (options.fixed_epoch)
    {
        e.fixed_epoch = *options.fixed_epoch;
    }
    if (options.out_dir)
    {
        e.output_dir = *options.out_dir;
    }
    validate(config);
    return config;
}

auto output_path(const std::string& dir, const char* name) -> std::string
{
    return (fs::path(dir) / name).string();
}

auto summary_line(const Theorem1Certificate& c) -> std::string
{
    return fmt::format("verdict {}: delta_id {} 0 ({:.6g}), delta_ood {} 0 ({:+.6g})",
                       to_string(c.verdict), c.delta_id < 0.0 ? "<" : ">=", c.delta_id,
                       c.delta_ood_transfer > 0.0 ? ">" : "<=", c.delta_ood_transfer);
}

struct TrainingData
{
    Dataset train;
    Dataset eval_id;
    Dataset eval_ood;
};

auto training_data(const ExperimentConfig& config) -> TrainingData
{
    const auto& e = config.experiment;
    return {sample_dataset(config.task, config.env_id, e.n_train, derive_seed(e.seed, 1000)),
            sample_dataset(config.task, config.env_id, e.n_eval, derive_seed(e.seed, 1)),
            sample_dataset(config.task, config.env_ood, e.n_eval, derive_seed(e.seed, 2))};
}

template <typename Train>
auto run_named(const std::string& name, Train&& train) -> TrainResult
{
    try
    {
        return train();
    }
    catch (const TrainingFailure& f)
    {
        throw TrainingFailure(fmt::format("run {} failed: {}", name, f.what()), f.epoch());
    }
}

}  // namespace

int cmd_certify(const CommandOptions& options, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        const auto config = load(options);
        const auto cert = certify(config.task, config.env_id, config.env_ood,
                                  config.mask_before(), config.new_index());
        const auto json = to_json(cert).dump(2) + "\n";
        write_file_atomic(output_path(config.experiment.output_dir, "certificate.json"),
                          json);
        err << summary_line(cert) << '\n';
        out << json;
        return kExitOk;
    });
}

int cmd_sweep(const CommandOptions& options, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        const auto config = load(options);
        const auto order = config.sweep_order();
        const auto steps = spurious_sweep(config.task, config.env_id, config.env_ood, order);
        std::ostringstream csv;
        write_sweep_csv(csv, steps);
        const auto& dir = config.experiment.output_dir;
        write_file_atomic(output_path(dir, "sweep.csv"), csv.str());
        write_file_atomic(output_path(dir, "sweep.svg"), risk_curves_svg(steps));
        out << csv.str();
        return kExitOk;
    });
}

int cmd_train(const CommandOptions& options, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        const auto config = load(options);
        const auto data = training_data(config);
        const auto seed = config.experiment.seed;

        std::vector<RunRecords> runs;
        for (int s = 0; s < config.experiment.n_seeds; ++s)
        {
            TrainConfig erm = config.train;
            erm.n_models = 1;
            erm.seed = seed + static_cast<std::uint64_t>(s);
            const auto name = fmt::format("erm-{}", erm.seed);
            spdlog::info("training {}", name);
            auto result = run_named(
                name, [&] { return train_erm(data.train, data.eval_id, data.eval_ood, erm); });
            runs.push_back({"erm", erm.seed, std::move(result.records)});
        }
        if (config.train.n_models >= 2)
        {
            TrainConfig diverse = config.train;
            diverse.seed = seed;
            const auto name = fmt::format("diverse-{}", seed);
            spdlog::info("training {} ({} models)", name, diverse.n_models);
            auto result = run_named(name, [&] {
                return train_diverse(data.train, data.eval_id, data.eval_ood, diverse);
            });
            runs.push_back({"diverse", seed, std::move(result.records)});
        }

        std::ostringstream csv;
        write_records_csv(csv, runs);
        const auto path = output_path(config.experiment.output_dir, "records.csv");
        write_file_atomic(path, csv.str());
        std::size_t rows = 0;
        for (const auto& r : runs)
        {
            rows += r.records.size();
        }
        out << fmt::format("wrote {} records to {}\n", rows, path);
        return kExitOk;
    });
}

int cmd_landscape(const CommandOptions& options, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        PatternThresholds thresholds;
        std::string out_dir = options.out_dir.value_or("out");
        std::optional<int> fixed_epoch = options.fixed_epoch;
        if (!options.config_path.empty())
        {
            const auto config = load(options);
            thresholds = config.thresholds;
            out_dir = config.experiment.output_dir;
            if (!fixed_epoch)
            {
                fixed_epoch = config.experiment.fixed_epoch;
            }
        }

        std::ifstream in(options.points_path);
        if (!in)
        {
            throw ConfigError(fmt::format("{}: cannot open points file", options.points_path));
        }
        std::vector<ModelPoint> points;
        try
        {
            points = read_points_csv(in);
        }
        catch (const ConfigError& e)
        {
            throw ConfigError(fmt::format("{}:{}", options.points_path, e.what()));
        }
        if (!fixed_epoch)
        {
            int last = 0;
            for (const auto& p : points)
            {
                last = std::max(last, p.epoch);
            }
            fixed_epoch = last;
        }

        const auto report = selection_bias_report(points, *fixed_epoch, thresholds);
        const auto json = to_json(report).dump(2) + "\n";
        std::ostringstream csv;
        write_points_csv(csv, points, &report);
        write_file_atomic(output_path(out_dir, "selection_report.json"), json);
        write_file_atomic(output_path(out_dir, "scatter.csv"), csv.str());
        write_file_atomic(output_path(out_dir, "scatter.svg"),
                          scatter_svg(points, &report, "ID vs OOD accuracy"));
        err << fmt::format("full: {}, epoch {}: {}, ood_regret {:.4f}\n",
                           to_string(report.pattern_full.pattern), report.fixed_epoch,
                           to_string(report.pattern_filtered.pattern), report.ood_regret);
        out << json;
        return kExitOk;
    });
}

int cmd_shift_sweep(const CommandOptions& options, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        const auto config = load(options);
        const auto family = make_shift_family(config.task, config.env_id.alpha,
                                              config.shift.alpha_far, config.shift.steps);
        TrainConfig train = config.train;
        train.seed = config.experiment.seed;
        ShiftSweepSetup setup;
        setup.n_seeds = config.experiment.n_seeds;
        setup.n_train = config.experiment.n_train;
        setup.n_eval = config.experiment.n_eval;
        setup.data_seed = config.experiment.seed;
        const auto rows = shift_sweep_report(config.task, config.env_id, family, train, setup,
                                             config.thresholds);
        std::ostringstream csv;
        write_shift_sweep_csv(csv, rows);
        const auto& dir = config.experiment.output_dir;
        write_file_atomic(output_path(dir, "shift_sweep.csv"), csv.str());
        write_file_atomic(output_path(dir, "shift_sweep.svg"), panel_strip_svg(rows));
        out << csv.str();
        return kExitOk;
    });
}

}  // namespace misspec::cli
