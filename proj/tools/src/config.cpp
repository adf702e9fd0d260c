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


#include "misspec/cli/config.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include "misspec/error.hpp"

namespace misspec::cli
{

auto ExperimentConfig::mask_before() const -> FeatureMask
{
    if (experiment.mask)
    {
        return FeatureMask::from_columns(task, *experiment.mask);
    }
    return FeatureMask::invariant_only(task);
}

int ExperimentConfig::new_index() const
{
    if (experiment.add_feature)
    {
        return *experiment.add_feature;
    }
    const auto mask = mask_before();
    for (int c = task.d_inv; c < task.dim(); ++c)
    {
        if (!mask.contains(c))
        {
            return c;
        }
    }
    throw ConfigError("Experiment.add_feature: every spurious column is already masked in");
}

auto ExperimentConfig::sweep_order() const -> std::vector<int>
{
    if (experiment.sweep_order)
    {
        return *experiment.sweep_order;
    }
    std::vector<int> order;
    for (int c = task.d_inv; c < task.dim(); ++c)
    {
        order.push_back(c);
    }
    return order;
}

int ExperimentConfig::fixed_epoch() const
{
    return experiment.fixed_epoch.value_or(train.epochs);
}

namespace
{

class Reader
{
  public:
    explicit Reader(std::string source) : source_(std::move(source)) {}

    [[noreturn]] void fail(const YAML::Node& at, const std::string& field,
                           const std::string& problem) const
    {
        const auto mark = at.IsDefined() ? at.Mark() : YAML::Mark::null_mark();
        if (mark.line >= 0)
        {
            throw ConfigError(
                fmt::format("{}:{}: {}: {}", source_, mark.line + 1, field, problem));
        }
        throw ConfigError(fmt::format("{}: {}: {}", source_, field, problem));
    }

    auto section(const YAML::Node& root, const char* name, bool required) const
        -> YAML::Node
    {
        const auto node = root[name];
        if (!node)
        {
            if (required)
            {
                fail(root, name, "missing required section");
            }
            return node;
        }
        if (!node.IsMap())
        {
            fail(node, name, "expected a mapping");
        }
        return node;
    }

    void reject_unknown(const YAML::Node& map, const std::string& section,
                        std::initializer_list<const char*> allowed) const
    {
        for (const auto& kv : map)
        {
            const auto key = kv.first.as<std::string>();
            if (std::none_of(allowed.begin(), allowed.end(),
                             [&](const char* a) { return key == a; }))
            {
                fail(kv.first, section + "." + key, "unknown field");
            }
        }
    }

    // Returns the node for `key`, failing if it is required and absent.
    auto field(const YAML::Node& map, const std::string& section, const char* key,
               bool required) const -> YAML::Node
    {
        auto node = map[key];
        if (!node && required)
        {
            fail(map, section + "." + key, "missing required field");
        }
        return node;
    }

    template <typename T>
    void read(const YAML::Node& map, const std::string& section, const char* key,
              T& target, bool required = false) const
    {
        const auto node = field(map, section, key, required);
        if (!node)
        {
            return;
        }
        target = convert<T>(node, section + "." + key);
    }

    template <typename T>
    void read_optional(const YAML::Node& map, const std::string& section,
                       const char* key, std::optional<T>& target) const
    {
        const auto node = map[key];
        if (node && !node.IsNull())
        {
            target = convert<T>(node, section + "." + key);
        }
    }

  private:
    template <typename T>
    auto convert(const YAML::Node& node, const std::string& name) const -> T
    {
        if constexpr (std::is_same_v<T, Eigen::VectorXd>)
        {
            const auto values = convert<std::vector<double>>(node, name);
            return Eigen::Map<const Eigen::VectorXd>(values.data(),
                                                     static_cast<Eigen::Index>(values.size()));
        }
        else if constexpr (std::is_same_v<T, std::vector<double>>
                           || std::is_same_v<T, std::vector<int>>)
        {
            if (!node.IsSequence())
            {
                fail(node, name, "expected a sequence");
            }
            T out;
            for (std::size_t i = 0; i < node.size(); ++i)
            {
                out.push_back(convert<typename T::value_type>(
                    node[i], fmt::format("{}[{}]", name, i)));
            }
            return out;
        }
        else if constexpr (std::is_same_v<T, int> || std::is_same_v<T, Eigen::Index>)
        {
            const auto wide = scalar<long long>(node, name, "an integer");
            if (wide < std::numeric_limits<T>::min() || wide > std::numeric_limits<T>::max())
            {
                fail(node, name, "integer out of range");
            }
            return static_cast<T>(wide);
        }
        else if constexpr (std::is_same_v<T, std::uint64_t>)
        {
            return scalar<std::uint64_t>(node, name, "a nonnegative integer");
        }
        else if constexpr (std::is_same_v<T, double>)
        {
            return scalar<double>(node, name, "a number");
        }
        else if constexpr (std::is_same_v<T, bool>)
        {
            return scalar<bool>(node, name, "true or false");
        }
        else
        {
            return scalar<T>(node, name, "a string");
        }
    }

    template <typename T>
    auto scalar(const YAML::Node& node, const std::string& name, const char* what) const
        -> T
    {
        if (!node.IsScalar())
        {
            fail(node, name, fmt::format("expected {}", what));
        }
        try
        {
            return node.as<T>();
        }
        catch (const YAML::BadConversion&)
        {
            fail(node, name, fmt::format("expected {}, got '{}'", what, node.Scalar()));
        }
    }

    std::string source_;
};

// Re-throws core validation errors with the config source and section.
template <typename F>
void checked(const std::string& source, const char* section, F&& check)
{
    try
    {
        check();
    }
    catch (const ConfigError& e)
    {
        throw ConfigError(fmt::format("{}: {}: {}", source, section, e.what()));
    }
}

}  // namespace

auto parse_config(const std::string& text, const std::string& source) -> ExperimentConfig
{
    YAML::Node root;
    try
    {
        root = YAML::Load(text);
    }
    catch (const YAML::ParserException& e)
    {
        throw ConfigError(fmt::format("{}:{}: syntax error: {}", source, e.mark.line + 1,
                                      e.msg));
    }
    const Reader r(source);
    if (!root.IsMap())
    {
        r.fail(root, "<root>", "expected a mapping of sections");
    }
    r.reject_unknown(root, "", {"TaskSpec", "Environments", "ShiftFamily", "TrainConfig",
                                "PatternThresholds", "Experiment"});

    ExperimentConfig config;
    config.source = source;

    const auto task = r.section(root, "TaskSpec", true);
    r.reject_unknown(task, "TaskSpec", {"d_inv", "d_spu", "gamma", "sigma_inv_sq",
                                        "sigma_spu_sq", "inv_scale_sq"});
    r.read(task, "TaskSpec", "d_inv", config.task.d_inv, true);
    r.read(task, "TaskSpec", "d_spu", config.task.d_spu, true);
    r.read(task, "TaskSpec", "gamma", config.task.gamma, true);
    r.read(task, "TaskSpec", "sigma_inv_sq", config.task.sigma_inv_sq);
    r.read(task, "TaskSpec", "sigma_spu_sq", config.task.sigma_spu_sq, true);
    r.read(task, "TaskSpec", "inv_scale_sq", config.task.inv_scale_sq);
    if (config.task.gamma.size() != config.task.d_inv)
    {
        r.fail(task["gamma"], "TaskSpec.gamma",
               fmt::format("expected {} entries (d_inv), got {}", config.task.d_inv,
                           config.task.gamma.size()));
    }
    if (config.task.sigma_spu_sq.size() != config.task.d_spu)
    {
        r.fail(task["sigma_spu_sq"], "TaskSpec.sigma_spu_sq",
               fmt::format("expected {} entries (d_spu), got {}", config.task.d_spu,
                           config.task.sigma_spu_sq.size()));
    }

    const auto envs = r.section(root, "Environments", true);
    r.reject_unknown(envs, "Environments", {"id", "ood"});
    r.read(envs, "Environments", "id", config.env_id.alpha, true);
    r.read(envs, "Environments", "ood", config.env_ood.alpha, true);
    config.env_id.env_id = "id";
    config.env_ood.env_id = "ood";
    for (const char* key : {"id", "ood"})
    {
        const auto& alpha = std::string(key) == "id" ? config.env_id.alpha
                                                     : config.env_ood.alpha;
        if (alpha.size() != config.task.d_spu)
        {
            r.fail(envs[key], fmt::format("Environments.{}", key),
                   fmt::format("expected {} entries (d_spu), got {}", config.task.d_spu,
                               alpha.size()));
        }
    }

    config.shift.alpha_far = config.env_ood.alpha;
    if (const auto shift = r.section(root, "ShiftFamily", false))
    {
        r.reject_unknown(shift, "ShiftFamily", {"alpha_far", "steps"});
        r.read(shift, "ShiftFamily", "alpha_far", config.shift.alpha_far);
        r.read(shift, "ShiftFamily", "steps", config.shift.steps);
        if (config.shift.alpha_far.size() != config.task.d_spu)
        {
            r.fail(shift["alpha_far"], "ShiftFamily.alpha_far",
                   fmt::format("expected {} entries (d_spu), got {}", config.task.d_spu,
                               config.shift.alpha_far.size()));
        }
        if (config.shift.steps < 2)
        {
            r.fail(shift["steps"], "ShiftFamily.steps",
                   fmt::format("must be >= 2, got {}", config.shift.steps));
        }
    }

    if (const auto train = r.section(root, "TrainConfig", false))
    {
        const std::string s = "TrainConfig";
        r.reject_unknown(train, s, {"n_models", "diversity_weight", "similarity",
                                    "learning_rate", "epochs", "batch_size",
                                    "record_every_epoch", "init_std"});
        auto& t = config.train;
        r.read(train, s, "n_models", t.n_models);
        r.read(train, s, "diversity_weight", t.diversity_weight);
        std::string similarity = to_string(t.similarity);
        r.read(train, s, "similarity", similarity);
        try
        {
            t.similarity = parse_similarity(similarity);
        }
        catch (const ConfigError& e)
        {
            r.fail(train["similarity"], "TrainConfig.similarity", e.what());
        }
        r.read(train, s, "learning_rate", t.learning_rate);
        r.read(train, s, "epochs", t.epochs);
        r.read(train, s, "batch_size", t.batch_size);
        r.read(train, s, "record_every_epoch", t.record_every_epoch);
        r.read(train, s, "init_std", t.init_std);
    }

    if (const auto th = r.section(root, "PatternThresholds", false))
    {
        const std::string s = "PatternThresholds";
        r.reject_unknown(th, s, {"eps_x", "eps_y", "delta", "chance", "r_cut"});
        r.read(th, s, "eps_x", config.thresholds.eps_x);
        r.read(th, s, "eps_y", config.thresholds.eps_y);
        r.read(th, s, "delta", config.thresholds.delta);
        r.read(th, s, "chance", config.thresholds.chance);
        r.read(th, s, "r_cut", config.thresholds.r_cut);
    }

    if (const auto ex = r.section(root, "Experiment", false))
    {
        const std::string s = "Experiment";
        r.reject_unknown(ex, s, {"seed", "n_seeds", "n_train", "n_eval", "output_dir",
                                 "mask", "add_feature", "sweep_order", "fixed_epoch"});
        auto& e = config.experiment;
        r.read(ex, s, "seed", e.seed);
        r.read(ex, s, "n_seeds", e.n_seeds);
        r.read(ex, s, "n_train", e.n_train);
        r.read(ex, s, "n_eval", e.n_eval);
        r.read(ex, s, "output_dir", e.output_dir);
        r.read_optional(ex, s, "mask", e.mask);
        r.read_optional(ex, s, "add_feature", e.add_feature);
        r.read_optional(ex, s, "sweep_order", e.sweep_order);
        r.read_optional(ex, s, "fixed_epoch", e.fixed_epoch);
    }

    validate(config);
    return config;
}

auto load_config(const std::string& path) -> ExperimentConfig
{
    std::ifstream in(path);
    if (!in)
    {
        throw ConfigError(fmt::format("{}: cannot open config file", path));
    }
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str(), path);
}

void validate(const ExperimentConfig& config)
{
    const auto& src = config.source;
    checked(src, "TaskSpec", [&] { misspec::validate(config.task); });
    checked(src, "Environments.id", [&] { misspec::validate(config.task, config.env_id); });
    checked(src, "Environments.ood",
            [&] { misspec::validate(config.task, config.env_ood); });
    checked(src, "ShiftFamily", [&] {
        if (config.shift.steps < 2)
        {
            throw ConfigError(fmt::format("steps must be >= 2, got {}", config.shift.steps));
        }
        misspec::validate(config.task, Environment{config.shift.alpha_far, "far"});
    });
    checked(src, "TrainConfig", [&] { misspec::validate(config.train); });
    checked(src, "PatternThresholds", [&] { misspec::validate(config.thresholds); });
    checked(src, "Experiment", [&] {
        const auto& e = config.experiment;
        if (e.n_seeds < 1 || e.n_train < 1 || e.n_eval < 1)
        {
            throw ConfigError("n_seeds, n_train and n_eval must be >= 1");
        }
        if (e.output_dir.empty())
        {
            throw ConfigError("output_dir must not be empty");
        }
        if (e.fixed_epoch && (*e.fixed_epoch < 1 || *e.fixed_epoch > config.train.epochs))
        {
            throw ConfigError(fmt::format("fixed_epoch must lie in [1, {}], got {}",
                                          config.train.epochs, *e.fixed_epoch));
        }
        const auto mask = config.mask_before();
        if (e.add_feature)
        {
            const int c = *e.add_feature;
            if (!config.task.is_spurious(c))
            {
                throw ConfigError(fmt::format(
                    "add_feature {} is not a spurious column (valid: {}..{})", c,
                    config.task.d_inv, config.task.dim() - 1));
            }
            if (mask.contains(c))
            {
                throw ConfigError(fmt::format("add_feature {} is already in the mask", c));
            }
        }
        if (e.sweep_order)
        {
            std::set<int> seen;
            for (int c : *e.sweep_order)
            {
                if (!config.task.is_spurious(c) || !seen.insert(c).second)
                {
                    throw ConfigError(fmt::format(
                        "sweep_order entry {} is not a distinct spurious column", c));
                }
            }
        }
    });
}

}  // namespace misspec::cli
