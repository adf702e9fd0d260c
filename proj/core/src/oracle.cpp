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


#include "misspec/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "misspec/error.hpp"

namespace misspec
{

FeatureMask::FeatureMask(std::vector<bool> selected, int d_inv)
    : selected_(std::move(selected)), d_inv_(d_inv)
{
    if (d_inv_ < 0 || d_inv_ > width())
    {
        throw ConfigError(fmt::format(
            "mask d_inv = {} out of range for width {}", d_inv_, width()));
    }
    for (int c = 0; c < width(); ++c)
    {
        if (selected_[static_cast<std::size_t>(c)])
        {
            (c < d_inv_ ? d_hat_inv_ : d_hat_spu_) += 1;
        }
    }
}

auto FeatureMask::all(const TaskSpec& task) -> FeatureMask
{
    return {std::vector<bool>(static_cast<std::size_t>(task.dim()), true),
            task.d_inv};
}

auto FeatureMask::invariant_only(const TaskSpec& task) -> FeatureMask
{
    std::vector<bool> selected(static_cast<std::size_t>(task.dim()), false);
    std::fill_n(selected.begin(), task.d_inv, true);
    return {std::move(selected), task.d_inv};
}

auto FeatureMask::from_columns(const TaskSpec& task, std::span<const int> columns)
    -> FeatureMask
{
    std::vector<bool> selected(static_cast<std::size_t>(task.dim()), false);
    for (const int c : columns)
    {
        if (c < 0 || c >= task.dim())
        {
            throw ConfigError(fmt::format(
                "mask column {} out of range [0, {})", c, task.dim()));
        }
        if (selected[static_cast<std::size_t>(c)])
        {
            throw ConfigError(fmt::format("mask column {} listed twice", c));
        }
        selected[static_cast<std::size_t>(c)] = true;
    }
    return {std::move(selected), task.d_inv};
}

bool FeatureMask::contains(int column) const
{
    return column >= 0 && column < width()
           && selected_[static_cast<std::size_t>(column)];
}

auto FeatureMask::columns() const -> std::vector<int>
{
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(d_hat()));
    for (int c = 0; c < width(); ++c)
    {
        if (selected_[static_cast<std::size_t>(c)])
        {
            out.push_back(c);
        }
    }
    return out;
}

int FeatureMask::position_of(int column) const
{
    if (!contains(column))
    {
        throw PreconditionError(fmt::format("column {} is not in the mask", column));
    }
    return static_cast<int>(std::count(selected_.begin(),
                                       selected_.begin() + column, true));
}

auto FeatureMask::with(int column) const -> FeatureMask
{
    if (column < 0 || column >= width())
    {
        throw ConfigError(fmt::format(
            "column {} out of range [0, {})", column, width()));
    }
    auto selected = selected_;
    selected[static_cast<std::size_t>(column)] = true;
    return {std::move(selected), d_inv_};
}

namespace
{

void require_compatible(const TaskSpec& task, const FeatureMask& mask)
{
    if (mask.width() != task.dim() || mask.d_inv() != task.d_inv)
    {
        throw ConfigError(fmt::format(
            "mask of width {} (d_inv {}) does not match task with {} columns "
            "(d_inv {})",
            mask.width(), mask.d_inv(), task.dim(), task.d_inv));
    }
    if (mask.d_hat() < 1)
    {
        throw ConfigError("feature mask selects no columns");
    }
}

}  // namespace

auto population_moments(const TaskSpec& task, const Environment& env,
                        const FeatureMask& mask) -> MomentSet
{
    validate(task);
    validate(task, env);
    require_compatible(task, mask);

    const double s_y = task.target_second_moment();
    const double scale = task.inv_scale_sq;
    const int dim = task.dim();

    Eigen::MatrixXd full = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::VectorXd cross(dim);
    for (int j = 0; j < task.d_inv; ++j)
    {
        full(j, j) = scale;
        cross[j] = scale * task.gamma[j];
        for (int i = 0; i < task.d_spu; ++i)
        {
            full(j, task.d_inv + i) = scale * task.gamma[j];
            full(task.d_inv + i, j) = scale * task.gamma[j];
        }
    }
    for (int i = 0; i < task.d_spu; ++i)
    {
        const int ci = task.d_inv + i;
        cross[ci] = s_y;
        for (int k = 0; k < task.d_spu; ++k)
        {
            full(ci, task.d_inv + k) = s_y;
        }
        full(ci, ci) += env.alpha[i] * env.alpha[i] * task.sigma_spu_sq[i];
    }

    const auto cols = mask.columns();
    const auto d_hat = static_cast<Eigen::Index>(cols.size());
    MomentSet out;
    out.M.resize(d_hat, d_hat);
    out.b.resize(d_hat);
    for (Eigen::Index r = 0; r < d_hat; ++r)
    {
        out.b[r] = cross[cols[static_cast<std::size_t>(r)]];
        for (Eigen::Index c = 0; c < d_hat; ++c)
        {
            out.M(r, c) = full(cols[static_cast<std::size_t>(r)],
                               cols[static_cast<std::size_t>(c)]);
        }
    }
    out.s_y = s_y;
    out.source = MomentSource::Population;
    out.env_id = env.env_id;
    out.mask = mask;
    return out;
}

auto empirical_moments(const Dataset& data, const FeatureMask& mask) -> MomentSet
{
    if (data.rows() < 1)
    {
        throw PreconditionError("empirical moments need a nonempty dataset");
    }
    if (mask.width() != data.cols())
    {
        throw ConfigError(fmt::format(
            "mask width {} does not match dataset width {}", mask.width(),
            data.cols()));
    }
    if (mask.d_hat() < 1)
    {
        throw ConfigError("feature mask selects no columns");
    }

    const auto cols = mask.columns();
    const auto n = data.rows();
    Eigen::MatrixXd X(n, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k)
    {
        X.col(static_cast<Eigen::Index>(k)) = data.features.col(cols[k]);
    }

    const double inv_n = 1.0 / static_cast<double>(n);
    MomentSet out;
    out.M = inv_n * (X.transpose() * X);
    out.M = 0.5 * (out.M + out.M.transpose()).eval();
    out.b = inv_n * (X.transpose() * data.target);
    out.s_y = inv_n * data.target.squaredNorm();
    out.source = MomentSource::Empirical;
    out.env_id = data.env_id;
    out.mask = mask;
    out.n_samples = n;
    out.rank_deficient_warning = n < mask.d_hat();
    if (out.rank_deficient_warning)
    {
        spdlog::warn("empirical moments from {} rows for {} features; M may be "
                     "singular",
                     n, mask.d_hat());
    }
    return out;
}

auto solve_regression(const MomentSet& moments) -> RegressionSolution
{
    const auto& M = moments.M;
    if (M.rows() != M.cols() || M.rows() != moments.b.size() || M.rows() == 0)
    {
        throw ConfigError(fmt::format(
            "moment set has M {}x{} and b of length {}", M.rows(), M.cols(),
            moments.b.size()));
    }

    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> spectrum(
        M, Eigen::EigenvaluesOnly);
    const double lo = spectrum.eigenvalues().minCoeff();
    const double hi = spectrum.eigenvalues().maxCoeff();
    const double condition
        = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
    if (!(condition <= kMaxCondition))
    {
        throw SingularMomentError(
            fmt::format("moment matrix for '{}' is singular or ill-conditioned "
                        "(condition estimate {:.3g})",
                        moments.env_id, condition),
            condition);
    }

    const Eigen::LLT<Eigen::MatrixXd> chol(M);
    if (chol.info() != Eigen::Success)
    {
        throw SingularMomentError(
            fmt::format("Cholesky factorization failed for '{}'", moments.env_id),
            condition);
    }
    Eigen::VectorXd beta = chol.solve(moments.b);
    // one step of iterative refinement
    beta += chol.solve(moments.b - M * beta);

    RegressionSolution out;
    out.beta = std::move(beta);
    out.fit_env = moments.env_id;
    out.mask = moments.mask;
    out.condition = condition;
    return out;
}

double risk(const RegressionSolution& solution, const MomentSet& eval_moments)
{
    const auto& beta = solution.beta;
    if (beta.size() != eval_moments.b.size()
        || eval_moments.M.rows() != beta.size())
    {
        throw ConfigError(fmt::format(
            "beta of length {} cannot be evaluated on moments of dimension {}",
            beta.size(), eval_moments.b.size()));
    }
    if (!(solution.mask == eval_moments.mask))
    {
        throw ConfigError("regression solution and evaluation moments use "
                          "different feature masks");
    }
    const double value = eval_moments.s_y - 2.0 * beta.dot(eval_moments.b)
                         + beta.dot(eval_moments.M * beta);
    return std::max(0.0, value);
}

auto eigendecompose(const Eigen::MatrixXd& M) -> EigenSystem
{
    if (M.rows() != M.cols() || M.rows() == 0)
    {
        throw ConfigError(fmt::format(
            "eigendecomposition needs a nonempty square matrix, got {}x{}",
            M.rows(), M.cols()));
    }
    const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
    const double asymmetry = (M - M.transpose()).cwiseAbs().maxCoeff();
    if (asymmetry > 1e-10 * scale)
    {
        throw ConfigError(fmt::format(
            "matrix is not symmetric (max |M - M^T| = {:.3g})", asymmetry));
    }

    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(M);
    if (solver.info() != Eigen::Success)
    {
        throw Error("symmetric eigensolver did not converge");
    }

    // Eigen returns ascending eigenvalues; reverse for descending order.
    const auto n = M.rows();
    EigenSystem out;
    out.lambdas = solver.eigenvalues().reverse();
    out.vectors = solver.eigenvectors().rowwise().reverse();
    for (Eigen::Index k = 0; k < n; ++k)
    {
        auto v = out.vectors.col(k);
        for (Eigen::Index r = 0; r < n; ++r)
        {
            if (std::abs(v[r]) > 1e-10)
            {
                if (v[r] < 0.0)
                {
                    v = -v;
                }
                break;
            }
        }
    }
    return out;
}

auto to_string(MomentSource source) -> std::string
{
    return source == MomentSource::Population ? "population" : "empirical";
}

}  // namespace misspec
