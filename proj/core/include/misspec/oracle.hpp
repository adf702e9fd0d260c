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

#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "misspec/sem.hpp"

namespace misspec
{

/// Binary selection over the columns [x_inv | x_spu].
class FeatureMask
{
  public:
    FeatureMask() = default;
    FeatureMask(std::vector<bool> selected, int d_inv);

    static auto all(const TaskSpec& task) -> FeatureMask;
    static auto invariant_only(const TaskSpec& task) -> FeatureMask;
    /// Columns are 0-based over the full feature vector. Throws ConfigError on
    /// out-of-range or duplicate indices.
    static auto from_columns(const TaskSpec& task, std::span<const int> columns)
        -> FeatureMask;

    [[nodiscard]] int width() const noexcept
    {
        return static_cast<int>(selected_.size());
    }
    [[nodiscard]] int d_inv() const noexcept { return d_inv_; }
    [[nodiscard]] int d_hat() const noexcept { return d_hat_inv_ + d_hat_spu_; }
    [[nodiscard]] int d_hat_inv() const noexcept { return d_hat_inv_; }
    [[nodiscard]] int d_hat_spu() const noexcept { return d_hat_spu_; }
    [[nodiscard]] bool contains(int column) const;
    /// Selected columns in ascending order.
    [[nodiscard]] auto columns() const -> std::vector<int>;
    /// Position of a selected column inside the restricted vector.
    [[nodiscard]] int position_of(int column) const;
    [[nodiscard]] auto with(int column) const -> FeatureMask;
    [[nodiscard]] auto selected() const noexcept -> const std::vector<bool>&
    {
        return selected_;
    }

    friend bool operator==(const FeatureMask&, const FeatureMask&) = default;

  private:
    std::vector<bool> selected_;
    int d_inv_ = 0;
    int d_hat_inv_ = 0;
    int d_hat_spu_ = 0;
};

enum class MomentSource
{
    Population,
    Empirical,
};

/// Second moments of the masked features: M = E[phi phi^T], b = E[phi y],
/// s_y = E[y^2].
struct MomentSet
{
    Eigen::MatrixXd M;
    Eigen::VectorXd b;
    double s_y = 0.0;
    MomentSource source = MomentSource::Population;
    std::string env_id;
    FeatureMask mask;
    Eigen::Index n_samples = 0;
    /// Set for empirical moments with fewer rows than selected features.
    bool rank_deficient_warning = false;
};

struct RegressionSolution
{
    Eigen::VectorXd beta;
    std::string fit_env;
    FeatureMask mask;
    /// 2-norm condition number of the fitting M.
    double condition = 1.0;
};

/// Columns of `vectors` are orthonormal eigenvectors; lambdas descending.
struct EigenSystem
{
    Eigen::VectorXd lambdas;
    Eigen::MatrixXd vectors;
};

inline constexpr double kMaxCondition = 1e12;

[[nodiscard]] auto population_moments(const TaskSpec& task,
                                      const Environment& env,
                                      const FeatureMask& mask) -> MomentSet;

[[nodiscard]] auto empirical_moments(const Dataset& data,
                                     const FeatureMask& mask) -> MomentSet;

/// beta = M^{-1} b through a Cholesky solve. Throws SingularMomentError when
/// M is not positive definite or its condition number exceeds kMaxCondition.
[[nodiscard]] auto solve_regression(const MomentSet& moments)
    -> RegressionSolution;

/// Mean squared error of beta under the evaluation moments:
/// s_y - 2 beta^T b + beta^T M beta, clamped at zero.
[[nodiscard]] double risk(const RegressionSolution& solution,
                          const MomentSet& eval_moments);

/// Symmetric eigendecomposition with descending eigenvalues and each
/// eigenvector's first non-negligible component made positive.
[[nodiscard]] auto eigendecompose(const Eigen::MatrixXd& M) -> EigenSystem;

[[nodiscard]] auto to_string(MomentSource source) -> std::string;

}  // namespace misspec
