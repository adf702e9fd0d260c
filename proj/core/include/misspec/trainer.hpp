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
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "misspec/sem.hpp"

namespace misspec
{

/// Two-logit linear head: logits = W h + bias. Class 1 is label +1.
struct LinearClassifier
{
    Eigen::Matrix<double, 2, Eigen::Dynamic> W;
    Eigen::Vector2d bias = Eigen::Vector2d::Zero();

    [[nodiscard]] Eigen::Index dim() const noexcept { return W.cols(); }
    [[nodiscard]] auto logits(const Eigen::Ref<const Eigen::VectorXd>& h) const
        -> Eigen::Vector2d
    {
        return W * h + bias;
    }
    /// Index of the largest logit; ties go to class 0.
    [[nodiscard]] int predict(const Eigen::Ref<const Eigen::VectorXd>& h) const;
};

enum class Similarity
{
    RawDot,
    SquaredDot,
    Cosine,
};

[[nodiscard]] auto to_string(Similarity similarity) -> std::string;
/// Accepts raw_dot, squared_dot, cosine. Throws ConfigError otherwise.
[[nodiscard]] auto parse_similarity(const std::string& name) -> Similarity;

struct TrainConfig
{
    int n_models = 24;
    double diversity_weight = 10.0;
    Similarity similarity = Similarity::RawDot;
    double learning_rate = 0.1;
    int epochs = 10;
    int batch_size = 64;
    std::uint64_t seed = 0;
    bool record_every_epoch = true;
    double init_std = 0.01;
};

/// Throws ConfigError on nonpositive sizes or rates.
void validate(const TrainConfig& config);

struct EpochRecord
{
    int epoch = 0;  // 1-based
    int model_idx = 0;
    double id_accuracy = 0.0;
    double ood_accuracy = 0.0;
    double id_logistic_risk = 0.0;
    double ood_logistic_risk = 0.0;
    /// Mean cross-entropy on the training set after the epoch.
    double classification_loss = 0.0;
    /// diversity_weight times the per-row diversity loss of the whole set on
    /// the training set; zero for single-model runs.
    double diversity_loss = 0.0;

    friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainResult
{
    std::vector<EpochRecord> records;
    std::vector<LinearClassifier> models;
};

struct Evaluation
{
    double accuracy = 0.0;
    double logistic_risk = 0.0;
};

/// Gradient of the largest logit with respect to the input, i.e. the W row of
/// the argmax class (ties to the lower index).
[[nodiscard]] auto input_gradient(const LinearClassifier& model,
                                  const Eigen::Ref<const Eigen::VectorXd>& h)
    -> Eigen::VectorXd;

[[nodiscard]] double similarity(Similarity kind,
                                const Eigen::Ref<const Eigen::VectorXd>& a,
                                const Eigen::Ref<const Eigen::VectorXd>& b);

/// Sum over batch rows and model pairs i < j of the similarity between the
/// models' input gradients. Fewer than two models gives 0 and a warning.
[[nodiscard]] double diversity_loss(std::span<const LinearClassifier> models,
                                    const Eigen::MatrixXd& batch,
                                    Similarity kind = Similarity::RawDot);

/// Accuracy against sign labels and mean softmax cross-entropy.
[[nodiscard]] auto evaluate(const LinearClassifier& model, const Dataset& data)
    -> Evaluation;

/// Training objective on one batch with its gradient for every model:
///   sum_i mean_rows CE_i + diversity_weight * diversity_loss / rows.
/// The argmax selections inside the diversity term are held fixed.
struct ObjectiveGradient
{
    double value = 0.0;
    std::vector<LinearClassifier> gradients;
};

[[nodiscard]] auto training_objective(std::span<const LinearClassifier> models,
                                      const Eigen::MatrixXd& batch,
                                      const Eigen::VectorXi& labels,
                                      double diversity_weight, Similarity kind)
    -> ObjectiveGradient;

/// Gaussian(0, init_std) weights and zero bias from the sub-seed of
/// (seed, model_index).
[[nodiscard]] auto initial_classifier(Eigen::Index dim, std::uint64_t seed,
                                      int model_index, double init_std)
    -> LinearClassifier;

/// Minibatch gradient descent on mean cross-entropy for one model. The model
/// starts from initial_classifier(dim, config.seed, init_index, ...), and the
/// shuffling stream depends only on config.seed. Requires n_models == 1.
/// Throws TrainingFailure if parameters or loss become non-finite.
[[nodiscard]] auto train_erm(const Dataset& train, const Dataset& eval_id,
                             const Dataset& eval_ood, const TrainConfig& config,
                             int init_index = 0) -> TrainResult;

/// Joint minibatch descent of n_models heads on the summed cross-entropy plus
/// the weighted diversity term. Requires n_models >= 2.
[[nodiscard]] auto train_diverse(const Dataset& train, const Dataset& eval_id,
                                 const Dataset& eval_ood, const TrainConfig& config)
    -> TrainResult;

struct RunRecords
{
    std::string method;
    std::uint64_t seed = 0;
    std::vector<EpochRecord> records;
};

inline constexpr const char* kRecordsCsvHeader
    = "method,seed,model_idx,epoch,id_acc,ood_acc,id_risk,ood_risk";

void write_records_csv(std::ostream& out, std::span<const RunRecords> runs);

}  // namespace misspec
