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
#include <optional>
#include <string>
#include <vector>

#include "misspec/landscape.hpp"
#include "misspec/oracle.hpp"
#include "misspec/sem.hpp"
#include "misspec/trainer.hpp"

namespace misspec::cli
{

struct ShiftFamilySpec
{
    Eigen::VectorXd alpha_far;
    int steps = 5;
};

struct ExperimentSettings
{
    std::uint64_t seed = 0;
    int n_seeds = 10;
    Eigen::Index n_train = 2000;
    Eigen::Index n_eval = 10000;
    std::string output_dir = "out";
    /// Global 0-based columns of the mask before the addition.
    std::optional<std::vector<int>> mask;
    std::optional<int> add_feature;
    std::optional<std::vector<int>> sweep_order;
    std::optional<int> fixed_epoch;
};

/// One file drives a whole experiment. Sections: TaskSpec, Environments,
/// ShiftFamily, TrainConfig, PatternThresholds, Experiment.
struct ExperimentConfig
{
    std::string source;
    TaskSpec task;
    Environment env_id;
    Environment env_ood;
    ShiftFamilySpec shift;
    TrainConfig train;
    PatternThresholds thresholds;
    ExperimentSettings experiment;

    /// Experiment.mask, or the invariant-only mask.
    [[nodiscard]] auto mask_before() const -> FeatureMask;
    /// Experiment.add_feature, or the first spurious column outside the mask.
    [[nodiscard]] int new_index() const;
    /// Experiment.sweep_order, or all spurious columns ascending.
    [[nodiscard]] auto sweep_order() const -> std::vector<int>;
    /// Experiment.fixed_epoch, or TrainConfig.epochs.
    [[nodiscard]] int fixed_epoch() const;
};

/// Parses YAML text. Throws ConfigError as "<source>:<line>: <field>: <problem>".
[[nodiscard]] auto parse_config(const std::string& text, const std::string& source)
    -> ExperimentConfig;

[[nodiscard]] auto load_config(const std::string& path) -> ExperimentConfig;

/// Cross-module checks: dimensions of every alpha, mask and feature indices,
/// shift family, trainer and thresholds. Throws ConfigError.
void validate(const ExperimentConfig& config);

}  // namespace misspec::cli
