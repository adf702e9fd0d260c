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

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "misspec/oracle.hpp"
#include "misspec/sem.hpp"

namespace misspec
{

// Population-level certificate for adding one spurious feature to a linear
// regressor. Risks come straight from the oracle closed forms; the Q-terms
// decompose the change in OOD transfer risk (ID-fitted beta applied OOD):
//
//   xi2(mask) = OOD risk of the OOD-fitted beta
//   xi1(mask) = sum_i (b^T v_i)^2 lambda_i^OOD (1/lambda_i^ID - 1/lambda_i^OOD)^2
//
// with v_i, lambda_i^OOD the OOD eigensystem and lambda_i^ID = v_i^T M^ID v_i.
// xi1 equals the excess transfer risk exactly when M^ID and M^OOD share
// eigenvectors. All differences are taken as (after - before):
//
//   q1 = xi2(after) - xi2(before)
//   q2 = sum over eigen-indices of `after` except the new one, minus the
//        full sum for `before`
//   q3 = (b^T v_new)^2 (sigma_new^2 (alpha_ID^2 - alpha_OOD^2))^2
//        / ((lambda_new^ID)^2 lambda_new^OOD)
//
// where v_new is the eigenvector of M^OOD(after) with the largest weight on
// the added column.

struct CertifyTolerances
{
    /// Absolute threshold on |b^T v_i| for the eigen-alignment assumption.
    double assumption1 = 1e-9;
    /// Relative eigen-residual below which M^ID and M^OOD count as sharing
    /// eigenvectors.
    double shared_eigvec = 1e-8;
};

enum class Verdict
{
    /// delta_id < 0 and delta_ood_transfer > 0.
    InverseCertified,
    /// Not certified, and nothing contradicts the decomposition.
    IdOnlyImproved,
    /// Eigenvectors are not shared and the sufficient condition predicted an
    /// OOD increase that the direct risks do not show.
    DecompositionInvalid,
    /// Some projection |b^T v_i| is below tolerance.
    AssumptionViolated,
};

[[nodiscard]] auto to_string(Verdict verdict) -> std::string;

struct QDecomposition
{
    double q1 = 0.0;
    double q2 = 0.0;
    double q3 = 0.0;
    /// Eigen-index (descending order) of `after` matched to the new column.
    int new_eigen_index = 0;
    /// b^T v_new under the OOD eigensystem of `after`.
    double new_projection = 0.0;
    double new_lambda_id = 0.0;
    double new_lambda_ood = 0.0;
    /// Variance of the added feature's noise term.
    double new_noise_variance = 1.0;
    bool assumption1_ok = true;
    bool shared_eigvec_ok = true;
};

struct Theorem1Certificate
{
    FeatureMask mask_before;
    FeatureMask mask_after;
    int new_index = 0;
    double l_id_before = 0.0;
    double l_id_after = 0.0;
    double l_ood_transfer_before = 0.0;
    double l_ood_transfer_after = 0.0;
    double l_ood_oracle_before = 0.0;
    double l_ood_oracle_after = 0.0;
    double delta_id = 0.0;
    double delta_ood_transfer = 0.0;
    double delta_ood_oracle = 0.0;
    double q1 = 0.0;
    double q2 = 0.0;
    double q3 = 0.0;
    double q_identity_residual = 0.0;
    bool assumption1_ok = true;
    bool shared_eigvec_ok = true;
    double alpha_gap = 0.0;
    /// Empty when the new projection vanishes (threshold undefined).
    std::optional<double> alpha_threshold;
    Verdict verdict = Verdict::IdOnlyImproved;
};

/// Per eigen-index: |b^T v_i| > tol.
[[nodiscard]] auto check_assumption1(const MomentSet& moments,
                                     const EigenSystem& eig, double tol)
    -> std::vector<bool>;

/// True iff every eigenvector in `eig` is also an eigenvector of `other`
/// up to a residual of tol * max(1, max|other|).
[[nodiscard]] bool shares_eigenvectors(const EigenSystem& eig,
                                       const Eigen::MatrixXd& other, double tol);

[[nodiscard]] auto q_decomposition(const TaskSpec& task, const Environment& env_id,
                                   const Environment& env_ood,
                                   const FeatureMask& mask_before, int new_index,
                                   const CertifyTolerances& tol = {})
    -> QDecomposition;

/// Smallest |alpha_ID^2 - alpha_OOD^2| on the new column for which
/// q3 > |q1 + q2|. Throws AssumptionError when the new projection vanishes.
[[nodiscard]] double sufficient_alpha_threshold(const TaskSpec& task,
                                                const Environment& env_id,
                                                const Environment& env_ood,
                                                const FeatureMask& mask_before,
                                                int new_index,
                                                const CertifyTolerances& tol = {});

/// Same threshold from an already computed decomposition.
[[nodiscard]] double sufficient_alpha_threshold(const QDecomposition& q,
                                                double tol);

[[nodiscard]] auto certify(const TaskSpec& task, const Environment& env_id,
                           const Environment& env_ood,
                           const FeatureMask& mask_before, int new_index,
                           const CertifyTolerances& tol = {})
    -> Theorem1Certificate;

struct SweepStep
{
    FeatureMask mask;
    double l_id = 0.0;
    double l_ood = 0.0;
};

/// Starts from the invariant-only mask and adds the spurious columns of
/// `order` one by one, recording ID risk and OOD transfer risk.
[[nodiscard]] auto spurious_sweep(const TaskSpec& task, const Environment& env_id,
                                  const Environment& env_ood,
                                  std::span<const int> order)
    -> std::vector<SweepStep>;

/// CSV with header step,d_hat,L_ID,L_OOD.
void write_sweep_csv(std::ostream& out, std::span<const SweepStep> steps);

}  // namespace misspec
