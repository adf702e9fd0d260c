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

#include <random>
#include <vector>

#include "misspec/oracle.hpp"
#include "misspec/sem.hpp"

namespace misspec::testing
{

struct SampledCase
{
    TaskSpec task;
    Environment env_id;
    Environment env_ood;
    FeatureMask mask_before;
    int new_index = 0;
};

enum class CaseKind
{
    /// Small alpha in training, large alpha out of distribution.
    Shifted,
    /// Same alpha in both environments.
    Unshifted,
    /// Selected invariant columns carry no signal, so the added column is
    /// uncorrelated with the rest of the mask.
    Decoupled,
};

/// d_inv, d_spu in 1..4; |gamma| in [0.1, 2] with random signs; noise
/// variances in [0.25, 4]; alpha_ID in [0, 0.5], alpha_OOD in [2, 6]. The
/// starting mask is a nonempty subset of the invariant columns.
inline auto sample_case(std::mt19937_64& rng, CaseKind kind = CaseKind::Shifted)
    -> SampledCase
{
    auto uniform = [&](double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(rng);
    };
    auto integer = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };

    SampledCase c;
    auto& t = c.task;
    t.d_inv = integer(kind == CaseKind::Decoupled ? 2 : 1, 4);
    t.d_spu = integer(1, 4);
    t.gamma.resize(t.d_inv);
    for (auto& g : t.gamma)
    {
        g = uniform(0.1, 2.0) * (integer(0, 1) == 0 ? -1.0 : 1.0);
    }
    t.sigma_inv_sq = uniform(0.25, 4.0);
    t.sigma_spu_sq.resize(t.d_spu);
    for (auto& s : t.sigma_spu_sq)
    {
        s = uniform(0.25, 4.0);
    }
    c.env_id = {Eigen::VectorXd(t.d_spu), "id"};
    c.env_ood = {Eigen::VectorXd(t.d_spu), "ood"};
    for (int k = 0; k < t.d_spu; ++k)
    {
        c.env_id.alpha[k] = uniform(0.0, 0.5);
        c.env_ood.alpha[k] = kind == CaseKind::Unshifted ? c.env_id.alpha[k] : uniform(2.0, 6.0);
    }

    // Decoupled cases keep at least one unselected invariant column so gamma
    // stays nonzero.
    const int max_count = kind == CaseKind::Decoupled ? t.d_inv - 1 : t.d_inv;
    std::vector<bool> selected(static_cast<std::size_t>(t.dim()), false);
    int count = 0;
    while (count == 0 || count > max_count)
    {
        count = 0;
        for (int j = 0; j < t.d_inv; ++j)
        {
            selected[static_cast<std::size_t>(j)] = integer(0, 1) == 1;
            count += selected[static_cast<std::size_t>(j)] ? 1 : 0;
        }
    }
    if (kind == CaseKind::Decoupled)
    {
        for (int j = 0; j < t.d_inv; ++j)
        {
            if (selected[static_cast<std::size_t>(j)])
            {
                t.gamma[j] = 0.0;
            }
        }
    }
    c.mask_before = FeatureMask(selected, t.d_inv);
    c.new_index = t.d_inv + integer(0, t.d_spu - 1);
    return c;
}

}  // namespace misspec::testing
