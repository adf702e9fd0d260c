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
#include "misspec/sem.hpp"

#include <cmath>
#include <ostream>
#include <random>

#include <fmt/format.h>

#include "misspec/error.hpp"

namespace misspec
{

double TaskSpec::target_second_moment() const
{
    return inv_scale_sq * gamma.squaredNorm() + sigma_inv_sq;
}

void validate(const TaskSpec& task)
{
    if (task.d_inv < 1)
    {
        throw ConfigError(fmt::format("d_inv must be >= 1, got {}", task.d_inv));
    }
    if (task.d_spu < 1)
    {
        throw ConfigError(fmt::format("d_spu must be >= 1, got {}", task.d_spu));
    }
    if (task.gamma.size() != task.d_inv)
    {
        throw ConfigError(fmt::format("gamma has length {}, expected d_inv = {}",
                                      task.gamma.size(), task.d_inv));
    }
    if (task.sigma_spu_sq.size() != task.d_spu)
    {
        throw ConfigError(
            fmt::format("sigma_spu_sq has length {}, expected d_spu = {}",
                        task.sigma_spu_sq.size(), task.d_spu));
    }
    if (!task.gamma.allFinite())
    {
        throw ConfigError("gamma must be finite");
    }
    if (task.gamma.cwiseAbs().maxCoeff() == 0.0)
    {
        throw ConfigError("gamma must have at least one nonzero entry");
    }
    if (!(task.sigma_inv_sq > 0.0) || !std::isfinite(task.sigma_inv_sq))
    {
        throw ConfigError("sigma_inv_sq must be finite and > 0");
    }
    if (!task.sigma_spu_sq.allFinite() || !(task.sigma_spu_sq.minCoeff() > 0.0))
    {
        throw ConfigError("every sigma_spu_sq entry must be finite and > 0");
    }
    if (!(task.inv_scale_sq > 0.0) || !std::isfinite(task.inv_scale_sq))
    {
        throw ConfigError("inv_scale_sq must be finite and > 0");
    }
}

void validate(const TaskSpec& task, const Environment& env)
{
    if (env.alpha.size() != task.d_spu)
    {
        throw ConfigError(
            fmt::format("environment '{}': alpha has length {}, expected d_spu = {}",
                        env.env_id, env.alpha.size(), task.d_spu));
    }
    if (!env.alpha.allFinite())
    {
        throw ConfigError(
            fmt::format("environment '{}': alpha must be finite", env.env_id));
    }
}

auto sample_dataset(const TaskSpec& task, const Environment& env, Eigen::Index n,
                    std::uint64_t seed) -> Dataset
{
    validate(task);
    validate(task, env);
    if (n < 1)
    {
        throw PreconditionError(fmt::format("sample size must be >= 1, got {}", n));
    }

    Dataset data;
    data.features.resize(n, task.dim());
    data.target.resize(n);
    data.label.resize(n);
    data.env_id = env.env_id;
    data.seed = seed;

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> standard(0.0, 1.0);
    const double inv_sd = std::sqrt(task.inv_scale_sq);
    const double noise_sd = std::sqrt(task.sigma_inv_sq);
    const Eigen::VectorXd spu_sd = task.sigma_spu_sq.cwiseSqrt();

    for (Eigen::Index row = 0; row < n; ++row)
    {
        double y = 0.0;
        for (int j = 0; j < task.d_inv; ++j)
        {
            const double x = inv_sd * standard(rng);
            data.features(row, j) = x;
            y += task.gamma[j] * x;
        }
        y += noise_sd * standard(rng);
        for (int i = 0; i < task.d_spu; ++i)
        {
            const double eps = spu_sd[i] * standard(rng);
            data.features(row, task.d_inv + i) = y + env.alpha[i] * eps;
        }
        data.target[row] = y;
        data.label[row] = y >= 0.0 ? 1 : -1;
    }
    return data;
}

double shift_parameter(int k, int steps)
{
    return static_cast<double>(k) / static_cast<double>(steps - 1);
}

auto make_shift_family(const TaskSpec& task, const Eigen::VectorXd& alpha_id,
                       const Eigen::VectorXd& alpha_far, int steps)
    -> std::vector<Environment>
{
    if (steps < 2)
    {
        throw ConfigError(fmt::format("shift family needs steps >= 2, got {}", steps));
    }
    if (alpha_id.size() != task.d_spu || alpha_far.size() != task.d_spu)
    {
        throw ConfigError(fmt::format(
            "shift family endpoints have lengths {} and {}, expected d_spu = {}",
            alpha_id.size(), alpha_far.size(), task.d_spu));
    }

    std::vector<Environment> family;
    family.reserve(static_cast<std::size_t>(steps));
    for (int k = 0; k < steps; ++k)
    {
        Environment env;
        if (k == 0)
        {
            env.alpha = alpha_id;
        }
        else if (k == steps - 1)
        {
            env.alpha = alpha_far;
        }
        else
        {
            const double t = shift_parameter(k, steps);
            env.alpha = (1.0 - t) * alpha_id + t * alpha_far;
        }
        env.env_id = fmt::format("shift_{}", k);
        validate(task, env);
        family.push_back(std::move(env));
    }
    return family;
}

void write_dataset_csv(std::ostream& out, const Dataset& data, int d_inv)
{
    out << "y,label";
    for (int j = 0; j < d_inv; ++j)
    {
        out << ",x_inv_" << (j + 1);
    }
    for (Eigen::Index i = d_inv; i < data.cols(); ++i)
    {
        out << ",x_spu_" << (i - d_inv + 1);
    }
    out << '\n';
    for (Eigen::Index row = 0; row < data.rows(); ++row)
    {
        out << fmt::format("{},{}", data.target[row], data.label[row]);
        for (Eigen::Index c = 0; c < data.cols(); ++c)
        {
            out << fmt::format(",{}", data.features(row, c));
        }
        out << '\n';
    }
}

}  // namespace misspec
