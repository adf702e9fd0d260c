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


#include "misspec/theorem.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <set>

#include <fmt/format.h>

#include "misspec/error.hpp"

namespace misspec
{

auto to_string(Verdict verdict) -> std::string
{
    switch (verdict)
    {
        case Verdict::InverseCertified:
            return "InverseCertified";
        case Verdict::IdOnlyImproved:
            return "IdOnlyImproved";
        case Verdict::DecompositionInvalid:
            return "DecompositionInvalid";
        case Verdict::AssumptionViolated:
            return "AssumptionViolated";
    }
    return "Unknown";
}

auto check_assumption1(const MomentSet& moments, const EigenSystem& eig,
                       double tol) -> std::vector<bool>
{
    if (eig.vectors.rows() != moments.b.size())
    {
        throw ConfigError(fmt::format(
            "eigensystem of dimension {} does not match moments of dimension {}",
            eig.vectors.rows(), moments.b.size()));
    }
    const Eigen::VectorXd projections = eig.vectors.transpose() * moments.b;
    std::vector<bool> ok(static_cast<std::size_t>(projections.size()));
    for (Eigen::Index i = 0; i < projections.size(); ++i)
    {
        ok[static_cast<std::size_t>(i)] = std::abs(projections[i]) > tol;
    }
    return ok;
}

bool shares_eigenvectors(const EigenSystem& eig, const Eigen::MatrixXd& other,
                         double tol)
{
    const double scale = std::max(1.0, other.cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i < eig.vectors.cols(); ++i)
    {
        const Eigen::VectorXd v = eig.vectors.col(i);
        const Eigen::VectorXd mv = other * v;
        if ((mv - v.dot(mv) * v).norm() > tol * scale)
        {
            return false;
        }
    }
    return true;
}

namespace
{

void require_spurious_addition(const TaskSpec& task, const FeatureMask& before,
                               int new_index)
{
    if (!task.is_spurious(new_index))
    {
        throw PreconditionError(fmt::format(
            "new_index must be spurious: column {} is not in [{}, {})", new_index,
            task.d_inv, task.dim()));
    }
    if (before.contains(new_index))
    {
        throw PreconditionError(fmt::format(
            "column {} is already selected in mask_before", new_index));
    }
}

bool all_true(const std::vector<bool>& flags)
{
    return std::all_of(flags.begin(), flags.end(), [](bool f) { return f; });
}

// Moments and eigen-quantities of one mask under both environments.
struct MaskAnalysis
{
    MomentSet id;
    MomentSet ood;
    EigenSystem eig_ood;
    Eigen::VectorXd projections;   // (v_i^OOD)^T b
    Eigen::VectorXd lambda_id;     // v_i^T M^ID v_i
    Eigen::VectorXd excess_terms;  // summands of xi1
    double oracle_ood_risk = 0.0;  // xi2
    bool assumption1_ok = true;
    bool shared = true;
};

auto analyse(const TaskSpec& task, const Environment& env_id,
             const Environment& env_ood, const FeatureMask& mask,
             const CertifyTolerances& tol) -> MaskAnalysis
{
    MaskAnalysis a;
    a.id = population_moments(task, env_id, mask);
    a.ood = population_moments(task, env_ood, mask);
    a.eig_ood = eigendecompose(a.ood.M);
    const auto& V = a.eig_ood.vectors;
    const auto& lambda_ood = a.eig_ood.lambdas;

    a.projections = V.transpose() * a.ood.b;
    a.lambda_id.resize(lambda_ood.size());
    a.excess_terms.resize(lambda_ood.size());
    for (Eigen::Index i = 0; i < lambda_ood.size(); ++i)
    {
        a.lambda_id[i] = V.col(i).dot(a.id.M * V.col(i));
        const double gap = 1.0 / a.lambda_id[i] - 1.0 / lambda_ood[i];
        a.excess_terms[i]
            = a.projections[i] * a.projections[i] * lambda_ood[i] * gap * gap;
    }
    a.oracle_ood_risk = risk(solve_regression(a.ood), a.ood);

    const auto eig_id = eigendecompose(a.id.M);
    a.assumption1_ok = all_true(check_assumption1(a.id, eig_id, tol.assumption1))
                       && all_true(check_assumption1(a.ood, a.eig_ood,
                                                     tol.assumption1));
    a.shared = shares_eigenvectors(a.eig_ood, a.id.M, tol.shared_eigvec);
    return a;
}

}  // namespace

auto q_decomposition(const TaskSpec& task, const Environment& env_id,
                     const Environment& env_ood, const FeatureMask& mask_before,
                     int new_index, const CertifyTolerances& tol) -> QDecomposition
{
    validate(task);
    require_spurious_addition(task, mask_before, new_index);
    const FeatureMask mask_after = mask_before.with(new_index);

    const auto before = analyse(task, env_id, env_ood, mask_before, tol);
    const auto after = analyse(task, env_id, env_ood, mask_after, tol);

    const int row = mask_after.position_of(new_index);
    Eigen::Index j = 0;
    after.eig_ood.vectors.row(row).cwiseAbs().maxCoeff(&j);

    QDecomposition q;
    q.q1 = after.oracle_ood_risk - before.oracle_ood_risk;
    q.q2 = after.excess_terms.sum() - after.excess_terms[j]
           - before.excess_terms.sum();

    const int spu = new_index - task.d_inv;
    const double a_id = env_id.alpha[spu];
    const double a_ood = env_ood.alpha[spu];
    q.new_noise_variance = task.sigma_spu_sq[spu];
    const double eig_gap = q.new_noise_variance * (a_id * a_id - a_ood * a_ood);

    q.new_eigen_index = static_cast<int>(j);
    q.new_projection = after.projections[j];
    q.new_lambda_id = after.lambda_id[j];
    q.new_lambda_ood = after.eig_ood.lambdas[j];
    q.q3 = q.new_projection * q.new_projection * eig_gap * eig_gap
           / (q.new_lambda_id * q.new_lambda_id * q.new_lambda_ood);
    q.assumption1_ok = before.assumption1_ok && after.assumption1_ok;
    q.shared_eigvec_ok = before.shared && after.shared;
    return q;
}

double sufficient_alpha_threshold(const QDecomposition& q, double tol)
{
    if (!(std::abs(q.new_projection) > tol))
    {
        throw AssumptionError(fmt::format(
            "projection of E[x y] on the new eigenvector is {:.3g}; the "
            "sufficient alpha threshold is undefined",
            q.new_projection));
    }
    const double scale = q.new_lambda_id * q.new_lambda_id * q.new_lambda_ood
                         / (q.new_projection * q.new_projection);
    return std::sqrt(scale * std::abs(q.q1 + q.q2)) / q.new_noise_variance;
}

double sufficient_alpha_threshold(const TaskSpec& task, const Environment& env_id,
                                  const Environment& env_ood,
                                  const FeatureMask& mask_before, int new_index,
                                  const CertifyTolerances& tol)
{
    return sufficient_alpha_threshold(
        q_decomposition(task, env_id, env_ood, mask_before, new_index, tol),
        tol.assumption1);
}

auto certify(const TaskSpec& task, const Environment& env_id,
             const Environment& env_ood, const FeatureMask& mask_before,
             int new_index, const CertifyTolerances& tol) -> Theorem1Certificate
{
    const auto q = q_decomposition(task, env_id, env_ood, mask_before, new_index,
                                   tol);

    Theorem1Certificate cert;
    cert.mask_before = mask_before;
    cert.mask_after = mask_before.with(new_index);
    cert.new_index = new_index;

    auto fill = [&](const FeatureMask& mask, double& l_id, double& l_transfer,
                    double& l_oracle)
    {
        const auto id = population_moments(task, env_id, mask);
        const auto ood = population_moments(task, env_ood, mask);
        const auto beta_id = solve_regression(id);
        l_id = risk(beta_id, id);
        l_transfer = risk(beta_id, ood);
        l_oracle = risk(solve_regression(ood), ood);
    };
    fill(cert.mask_before, cert.l_id_before, cert.l_ood_transfer_before,
         cert.l_ood_oracle_before);
    fill(cert.mask_after, cert.l_id_after, cert.l_ood_transfer_after,
         cert.l_ood_oracle_after);

    cert.delta_id = cert.l_id_after - cert.l_id_before;
    cert.delta_ood_transfer = cert.l_ood_transfer_after - cert.l_ood_transfer_before;
    cert.delta_ood_oracle = cert.l_ood_oracle_after - cert.l_ood_oracle_before;
    cert.q1 = q.q1;
    cert.q2 = q.q2;
    cert.q3 = q.q3;
    cert.q_identity_residual
        = std::abs(cert.delta_ood_transfer - (q.q1 + q.q2 + q.q3));
    cert.assumption1_ok = q.assumption1_ok;
    cert.shared_eigvec_ok = q.shared_eigvec_ok;

    const int spu = new_index - task.d_inv;
    const double a_id = env_id.alpha[spu];
    const double a_ood = env_ood.alpha[spu];
    cert.alpha_gap = std::abs(a_id * a_id - a_ood * a_ood);
    if (std::abs(q.new_projection) > tol.assumption1)
    {
        cert.alpha_threshold = sufficient_alpha_threshold(q, tol.assumption1);
    }

    const bool inverse = cert.delta_id < 0.0 && cert.delta_ood_transfer > 0.0;
    const bool predicted_increase
        = cert.alpha_threshold && cert.alpha_gap > *cert.alpha_threshold;
    if (inverse)
    {
        cert.verdict = Verdict::InverseCertified;
    }
    else if (!cert.assumption1_ok)
    {
        cert.verdict = Verdict::AssumptionViolated;
    }
    else if (predicted_increase)
    {
        cert.verdict = Verdict::DecompositionInvalid;
    }
    else
    {
        cert.verdict = Verdict::IdOnlyImproved;
    }
    return cert;
}

auto spurious_sweep(const TaskSpec& task, const Environment& env_id,
                    const Environment& env_ood, std::span<const int> order)
    -> std::vector<SweepStep>
{
    validate(task);
    std::set<int> seen;
    for (const int column : order)
    {
        if (!task.is_spurious(column))
        {
            throw PreconditionError(fmt::format(
                "sweep order entry {} is not a spurious column", column));
        }
        if (!seen.insert(column).second)
        {
            throw PreconditionError(
                fmt::format("sweep order lists column {} twice", column));
        }
    }

    std::vector<SweepStep> steps;
    steps.reserve(order.size() + 1);
    auto record = [&](const FeatureMask& mask)
    {
        const auto id = population_moments(task, env_id, mask);
        const auto beta = solve_regression(id);
        steps.push_back(
            {mask, risk(beta, id), risk(beta, population_moments(task, env_ood, mask))});
    };

    FeatureMask mask = FeatureMask::invariant_only(task);
    record(mask);
    for (const int column : order)
    {
        mask = mask.with(column);
        record(mask);
    }
    return steps;
}

void write_sweep_csv(std::ostream& out, std::span<const SweepStep> steps)
{
    out << "step,d_hat,L_ID,L_OOD\n";
    for (std::size_t k = 0; k < steps.size(); ++k)
    {
        out << fmt::format("{},{},{},{}\n", k, steps[k].mask.d_hat(), steps[k].l_id,
                           steps[k].l_ood);
    }
}

}  // namespace misspec
