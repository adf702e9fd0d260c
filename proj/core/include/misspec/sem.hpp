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
#include <string>
#include <vector>

#include <Eigen/Core>

namespace misspec
{

// Linear structural-equation model with invariant and spurious features:
//
//   y       = gamma^T x_inv + eps_inv
//   x_spu,i = y + alpha_i * eps_spu,i
//
// x_inv ~ N(0, inv_scale_sq * I), eps_inv ~ N(0, sigma_inv_sq),
// eps_spu,i ~ N(0, sigma_spu_sq[i]). Only alpha changes across environments.

struct TaskSpec
{
    int d_inv = 0;
    int d_spu = 0;
    Eigen::VectorXd gamma;
    double sigma_inv_sq = 1.0;
    Eigen::VectorXd sigma_spu_sq;
    double inv_scale_sq = 1.0;

    [[nodiscard]] int dim() const noexcept { return d_inv + d_spu; }
    [[nodiscard]] bool is_spurious(int column) const noexcept
    {
        return column >= d_inv && column < dim();
    }
    /// E[y^2]; y is zero-mean so this is also Var(y).
    [[nodiscard]] double target_second_moment() const;
};

/// Throws ConfigError describing the first violated invariant.
void validate(const TaskSpec& task);

struct Environment
{
    Eigen::VectorXd alpha;
    std::string env_id;
};

/// Throws ConfigError if alpha does not match the task or is not finite.
void validate(const TaskSpec& task, const Environment& env);

struct Dataset
{
    /// n x (d_inv + d_spu), invariant block first.
    Eigen::MatrixXd features;
    Eigen::VectorXd target;
    /// sign(target) in {-1, +1} with sign(0) = +1.
    Eigen::VectorXi label;
    std::string env_id;
    std::uint64_t seed = 0;

    [[nodiscard]] Eigen::Index rows() const noexcept { return target.size(); }
    [[nodiscard]] Eigen::Index cols() const noexcept { return features.cols(); }
};

/// Draws n rows. Rows are generated sequentially from one mt19937_64 stream,
/// so the first k rows of an n-sample equal a k-sample with the same seed.
[[nodiscard]] auto sample_dataset(const TaskSpec& task, const Environment& env,
                                  Eigen::Index n, std::uint64_t seed)
    -> Dataset;

/// Linearly interpolated environments from alpha_id (t = 0) to alpha_far
/// (t = 1), evaluated at t = k / (steps - 1).
[[nodiscard]] auto make_shift_family(const TaskSpec& task,
                                     const Eigen::VectorXd& alpha_id,
                                     const Eigen::VectorXd& alpha_far,
                                     int steps) -> std::vector<Environment>;

/// Interpolation parameter of step k in a family of the given size.
[[nodiscard]] double shift_parameter(int k, int steps);

/// CSV with header y,label,x_inv_1..x_inv_{d_inv},x_spu_1..x_spu_{d_spu}.
void write_dataset_csv(std::ostream& out, const Dataset& data, int d_inv);

}  // namespace misspec
