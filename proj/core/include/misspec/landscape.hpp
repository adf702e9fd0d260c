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


#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "misspec/sem.hpp"
#include "misspec/trainer.hpp"

namespace misspec
{

/// One trained classifier at one epoch, placed in the ID/OOD accuracy plane.
struct ModelPoint
{
    double id_metric = 0.0;
    double ood_metric = 0.0;
    std::string method;
    std::uint64_t seed = 0;
    int model_idx = 0;
    int epoch = 0;
    double id_risk = 0.0;
    double ood_risk = 0.0;

    /// method + "-" + seed.
    [[nodiscard]] auto run_id() const -> std::string;

    friend bool operator==(const ModelPoint&, const ModelPoint&) = default;
};

enum class Pattern
{
    Positive,
    Vertical,
    Horizontal,
    Negative,
    NoTrend,
};

[[nodiscard]] auto to_string(Pattern pattern) -> std::string;
[[nodiscard]] auto parse_pattern(const std::string& name) -> Pattern;

struct PatternLabel
{
    Pattern pattern = Pattern::NoTrend;
    double pearson_r = 0.0;
    double id_spread = 0.0;
    double ood_spread = 0.0;
    double mean_id = 0.0;
    double mean_ood = 0.0;
    int n_points = 0;
};

/// Decision rule, checked in order:
///   Horizontal  ood_spread < eps_y and mean_ood <= chance + delta
///   Vertical    id_spread < eps_x and ood_spread >= eps_y
///   Positive    r >= r_cut
///   Negative    r <= -r_cut
///   NoTrend     otherwise
/// Spreads are population standard deviations; r is 0 when either is 0.
struct PatternThresholds
{
    double eps_x = 0.01;
    double eps_y = 0.01;
    double delta = 0.05;
    double chance = 0.5;
    double r_cut = 0.5;
};

void validate(const PatternThresholds& thresholds);

/// Throws PreconditionError for fewer than 3 points. Invariant under point
/// order.
[[nodiscard]] auto classify_pattern(std::span<const ModelPoint> points,
                                    const PatternThresholds& thresholds = {})
    -> PatternLabel;

/// Points of the given epoch, in input order. Logs a warning when none match.
[[nodiscard]] auto filter_fixed_epoch(std::span<const ModelPoint> points, int epoch)
    -> std::vector<ModelPoint>;

/// Per run_id, the point with the largest id_metric (ties: earliest epoch,
/// then lowest model_idx). Sorted by run_id.
[[nodiscard]] auto select_max_id(std::span<const ModelPoint> points)
    -> std::vector<ModelPoint>;

/// As select_max_id with ood_metric.
[[nodiscard]] auto select_max_ood(std::span<const ModelPoint> points)
    -> std::vector<ModelPoint>;

/// max ood_metric over all points minus the ood_metric of the point with the
/// largest id_metric (same tie rule as select_max_id). Empty input gives 0.
[[nodiscard]] double ood_regret(std::span<const ModelPoint> points);

struct RunPattern
{
    std::string run_id;
    PatternLabel label;
};

struct SelectionReport
{
    int fixed_epoch = 0;
    PatternLabel pattern_full;
    PatternLabel pattern_filtered;
    /// Patterns of individual runs with at least 3 points.
    std::vector<RunPattern> run_patterns;
    std::vector<ModelPoint> selected_by_id;
    std::vector<ModelPoint> selected_by_ood;
    double ood_regret = 0.0;
};

/// Requires >= 2 distinct epochs and >= 2 runs. The filtered pattern pools
/// all runs at `fixed_epoch`.
[[nodiscard]] auto selection_bias_report(std::span<const ModelPoint> points,
                                         int fixed_epoch,
                                         const PatternThresholds& thresholds = {})
    -> SelectionReport;

[[nodiscard]] auto points_from_records(std::span<const RunRecords> runs)
    -> std::vector<ModelPoint>;

/// Reads the trainer CSV schema. Extra trailing columns are ignored. Throws
/// ConfigError naming the 1-based line on any schema or range violation,
/// including duplicate (run_id, epoch, model_idx).
[[nodiscard]] auto read_points_csv(std::istream& in) -> std::vector<ModelPoint>;

/// Trainer schema plus a trailing `selected` column (none, id, ood, both).
void write_points_csv(std::ostream& out, std::span<const ModelPoint> points,
                      const SelectionReport* report = nullptr);

struct ShiftSweepRow
{
    int step = 0;
    double t = 0.0;
    std::string env_id;
    PatternLabel label;
    std::vector<ModelPoint> points;
};

struct ShiftSweepSetup
{
    int n_seeds = 10;
    Eigen::Index n_train = 2000;
    Eigen::Index n_eval = 10000;
    std::uint64_t data_seed = 0;
};

/// For every environment of `family`, trains setup.n_seeds ERM runs on ID
/// data, records all epochs against that environment, and classifies the
/// pooled cloud. Run s uses training seed config.seed + s and its own ID
/// training sample; evaluation sets are shared across runs.
[[nodiscard]] auto shift_sweep_report(const TaskSpec& task, const Environment& env_id,
                                      std::span<const Environment> family,
                                      const TrainConfig& config,
                                      const ShiftSweepSetup& setup,
                                      const PatternThresholds& thresholds = {})
    -> std::vector<ShiftSweepRow>;

/// CSV with header step,t,env_id,pattern,pearson_r,mean_id,mean_ood.
void write_shift_sweep_csv(std::ostream& out, std::span<const ShiftSweepRow> rows);

}  // namespace misspec
