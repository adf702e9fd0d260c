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


#include "misspec/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "misspec/error.hpp"
#include "misspec/seed.hpp"

namespace misspec
{

int LinearClassifier::predict(const Eigen::Ref<const Eigen::VectorXd>& h) const
{
    const Eigen::Vector2d z = logits(h);
    return z[1] > z[0] ? 1 : 0;
}

auto to_string(Similarity similarity) -> std::string
{
    switch (similarity)
    {
        case Similarity::RawDot:
            return "raw_dot";
        case Similarity::SquaredDot:
            return "squared_dot";
        case Similarity::Cosine:
            return "cosine";
    }
    return "unknown";
}

auto parse_similarity(const std::string& name) -> Similarity
{
    if (name == "raw_dot")
    {
        return Similarity::RawDot;
    }
    if (name == "squared_dot")
    {
        return Similarity::SquaredDot;
    }
    if (name == "cosine")
    {
        return Similarity::Cosine;
    }
    throw ConfigError(fmt::format(
        "unknown similarity '{}' (expected raw_dot, squared_dot or cosine)", name));
}

void validate(const TrainConfig& config)
{
    if (config.n_models < 1)
    {
        throw ConfigError(fmt::format("n_models must be >= 1, got {}", config.n_models));
    }
    if (!(config.diversity_weight >= 0.0) || !std::isfinite(config.diversity_weight))
    {
        throw ConfigError("diversity_weight must be finite and >= 0");
    }
    if (!(config.learning_rate > 0.0) || !std::isfinite(config.learning_rate))
    {
        throw ConfigError("learning_rate must be finite and > 0");
    }
    if (config.epochs < 1)
    {
        throw ConfigError(fmt::format("epochs must be >= 1, got {}", config.epochs));
    }
    if (config.batch_size < 1)
    {
        throw ConfigError(
            fmt::format("batch_size must be >= 1, got {}", config.batch_size));
    }
    if (!(config.init_std >= 0.0))
    {
        throw ConfigError("init_std must be >= 0");
    }
}

auto input_gradient(const LinearClassifier& model,
                    const Eigen::Ref<const Eigen::VectorXd>& h) -> Eigen::VectorXd
{
    if (h.size() != model.dim())
    {
        throw ConfigError(fmt::format("input of length {} for a model of width {}",
                                      h.size(), model.dim()));
    }
    return model.W.row(model.predict(h)).transpose();
}

double similarity(Similarity kind, const Eigen::Ref<const Eigen::VectorXd>& a,
                  const Eigen::Ref<const Eigen::VectorXd>& b)
{
    const double dot = a.dot(b);
    switch (kind)
    {
        case Similarity::RawDot:
            return dot;
        case Similarity::SquaredDot:
            return dot * dot;
        case Similarity::Cosine:
        {
            const double norms = a.norm() * b.norm();
            return norms > 0.0 ? dot / norms : 0.0;
        }
    }
    return 0.0;
}

namespace
{

// d similarity(a, b) / da
auto similarity_gradient(Similarity kind, const Eigen::VectorXd& a,
                         const Eigen::VectorXd& b) -> Eigen::VectorXd
{
    switch (kind)
    {
        case Similarity::RawDot:
            return b;
        case Similarity::SquaredDot:
            return 2.0 * a.dot(b) * b;
        case Similarity::Cosine:
        {
            const double na = a.norm();
            const double nb = b.norm();
            if (na == 0.0 || nb == 0.0)
            {
                return Eigen::VectorXd::Zero(a.size());
            }
            return b / (na * nb) - (a.dot(b) / (na * na * na * nb)) * a;
        }
    }
    return Eigen::VectorXd::Zero(a.size());
}

int class_of(int label) { return label > 0 ? 1 : 0; }

// Cross-entropy of logits z for class c, and softmax probabilities.
double cross_entropy(const Eigen::Vector2d& z, int c, Eigen::Vector2d& prob)
{
    const double top = z.maxCoeff();
    const double e0 = std::exp(z[0] - top);
    const double e1 = std::exp(z[1] - top);
    const double sum = e0 + e1;
    prob = Eigen::Vector2d(e0 / sum, e1 / sum);
    return top + std::log(sum) - z[c];
}

auto zero_like(const LinearClassifier& model) -> LinearClassifier
{
    LinearClassifier g;
    g.W = Eigen::Matrix<double, 2, Eigen::Dynamic>::Zero(2, model.dim());
    g.bias.setZero();
    return g;
}

void require_width(std::span<const LinearClassifier> models, Eigen::Index width)
{
    for (const auto& m : models)
    {
        if (m.dim() != width)
        {
            throw ConfigError(fmt::format(
                "model of width {} applied to features of width {}", m.dim(), width));
        }
    }
}

// Batch objective and gradient; `gradients` must be zeroed and sized.
double accumulate_batch(std::span<const LinearClassifier> models,
                        const Eigen::MatrixXd& X, const std::vector<int>& classes,
                        double diversity_weight, Similarity kind,
                        std::vector<LinearClassifier>& gradients)
{
    const auto rows = X.rows();
    const double inv_rows = 1.0 / static_cast<double>(rows);
    double value = 0.0;

    for (std::size_t m = 0; m < models.size(); ++m)
    {
        const auto& model = models[m];
        Eigen::Matrix<double, Eigen::Dynamic, 2> residual(rows, 2);
        double ce = 0.0;
        Eigen::Vector2d prob;
        for (Eigen::Index r = 0; r < rows; ++r)
        {
            const int c = classes[static_cast<std::size_t>(r)];
            ce += cross_entropy(model.logits(X.row(r).transpose()), c, prob);
            prob[c] -= 1.0;
            residual.row(r) = inv_rows * prob.transpose();
        }
        value += ce * inv_rows;
        gradients[m].W.noalias() += residual.transpose() * X;
        gradients[m].bias += residual.colwise().sum().transpose();
    }

    if (diversity_weight == 0.0 || models.size() < 2)
    {
        return value;
    }

    const double weight = diversity_weight * inv_rows;
    const auto n = models.size();
    std::vector<int> selected(n);
    std::vector<Eigen::VectorXd> g(n);
    for (Eigen::Index r = 0; r < rows; ++r)
    {
        for (std::size_t i = 0; i < n; ++i)
        {
            selected[i] = models[i].predict(X.row(r).transpose());
            g[i] = models[i].W.row(selected[i]).transpose();
        }
        for (std::size_t i = 0; i < n; ++i)
        {
            for (std::size_t j = i + 1; j < n; ++j)
            {
                value += weight * similarity(kind, g[i], g[j]);
                gradients[i].W.row(selected[i])
                    += weight * similarity_gradient(kind, g[i], g[j]).transpose();
                gradients[j].W.row(selected[j])
                    += weight * similarity_gradient(kind, g[j], g[i]).transpose();
            }
        }
    }
    return value;
}

auto classes_of(const Eigen::VectorXi& labels) -> std::vector<int>
{
    std::vector<int> out(static_cast<std::size_t>(labels.size()));
    for (Eigen::Index r = 0; r < labels.size(); ++r)
    {
        out[static_cast<std::size_t>(r)] = class_of(labels[r]);
    }
    return out;
}

double mean_cross_entropy(const LinearClassifier& model, const Dataset& data)
{
    return evaluate(model, data).logistic_risk;
}

void require_consistent(const Dataset& train, const Dataset& eval_id,
                        const Dataset& eval_ood)
{
    if (train.rows() < 1 || eval_id.rows() < 1 || eval_ood.rows() < 1)
    {
        throw PreconditionError("training and evaluation sets must be nonempty");
    }
    if (eval_id.cols() != train.cols() || eval_ood.cols() != train.cols())
    {
        throw ConfigError(fmt::format(
            "feature widths differ: train {}, eval_id {}, eval_ood {}", train.cols(),
            eval_id.cols(), eval_ood.cols()));
    }
}

auto train_models(std::vector<LinearClassifier> models, const Dataset& train,
                  const Dataset& eval_id, const Dataset& eval_ood,
                  const TrainConfig& config) -> TrainResult
{
    validate(config);
    require_consistent(train, eval_id, eval_ood);
    require_width(models, train.cols());

    const auto n_rows = train.rows();
    const auto classes = classes_of(train.label);
    const double lambda = models.size() >= 2 ? config.diversity_weight : 0.0;

    std::mt19937_64 shuffle_rng(derive_seed(config.seed, 0));
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n_rows));
    std::iota(order.begin(), order.end(), Eigen::Index{0});

    std::vector<LinearClassifier> gradients;
    gradients.reserve(models.size());
    for (const auto& m : models)
    {
        gradients.push_back(zero_like(m));
    }

    TrainResult result;
    Eigen::MatrixXd batch;
    std::vector<int> batch_classes;
    for (int epoch = 1; epoch <= config.epochs; ++epoch)
    {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        for (Eigen::Index start = 0; start < n_rows; start += config.batch_size)
        {
            const auto rows = std::min<Eigen::Index>(config.batch_size, n_rows - start);
            batch.resize(rows, train.cols());
            batch_classes.resize(static_cast<std::size_t>(rows));
            for (Eigen::Index r = 0; r < rows; ++r)
            {
                const auto src = order[static_cast<std::size_t>(start + r)];
                batch.row(r) = train.features.row(src);
                batch_classes[static_cast<std::size_t>(r)]
                    = classes[static_cast<std::size_t>(src)];
            }
            for (auto& g : gradients)
            {
                g.W.setZero();
                g.bias.setZero();
            }
            accumulate_batch(models, batch, batch_classes, lambda, config.similarity,
                             gradients);
            for (std::size_t m = 0; m < models.size(); ++m)
            {
                models[m].W -= config.learning_rate * gradients[m].W;
                models[m].bias -= config.learning_rate * gradients[m].bias;
                if (!models[m].W.allFinite() || !models[m].bias.allFinite())
                {
                    throw TrainingFailure(
                        fmt::format("training diverged in epoch {}: model {} has "
                                    "non-finite parameters",
                                    epoch, m),
                        epoch);
                }
            }
        }

        if (!config.record_every_epoch && epoch != config.epochs)
        {
            continue;
        }
        const double set_diversity
            = lambda > 0.0
                  ? lambda * diversity_loss(models, train.features, config.similarity)
                        / static_cast<double>(n_rows)
                  : 0.0;
        for (std::size_t m = 0; m < models.size(); ++m)
        {
            const auto id = evaluate(models[m], eval_id);
            const auto ood = evaluate(models[m], eval_ood);
            EpochRecord rec;
            rec.epoch = epoch;
            rec.model_idx = static_cast<int>(m);
            rec.id_accuracy = id.accuracy;
            rec.ood_accuracy = ood.accuracy;
            rec.id_logistic_risk = id.logistic_risk;
            rec.ood_logistic_risk = ood.logistic_risk;
            rec.classification_loss = mean_cross_entropy(models[m], train);
            rec.diversity_loss = set_diversity;
            if (!std::isfinite(rec.classification_loss)
                || !std::isfinite(rec.diversity_loss))
            {
                throw TrainingFailure(
                    fmt::format("training loss became non-finite in epoch {}", epoch),
                    epoch);
            }
            result.records.push_back(rec);
        }
    }
    result.models = std::move(models);
    return result;
}

}  // namespace

double diversity_loss(std::span<const LinearClassifier> models,
                      const Eigen::MatrixXd& batch, Similarity kind)
{
    if (models.size() < 2)
    {
        spdlog::warn("diversity loss needs at least two models; returning 0");
        return 0.0;
    }
    require_width(models, batch.cols());
    const auto n = models.size();
    std::vector<Eigen::VectorXd> g(n);
    double total = 0.0;
    for (Eigen::Index r = 0; r < batch.rows(); ++r)
    {
        for (std::size_t i = 0; i < n; ++i)
        {
            g[i] = input_gradient(models[i], batch.row(r).transpose());
        }
        for (std::size_t i = 0; i < n; ++i)
        {
            for (std::size_t j = i + 1; j < n; ++j)
            {
                total += similarity(kind, g[i], g[j]);
            }
        }
    }
    return total;
}

auto evaluate(const LinearClassifier& model, const Dataset& data) -> Evaluation
{
    if (model.dim() != data.cols())
    {
        throw ConfigError(fmt::format("model of width {} evaluated on {} columns",
                                      model.dim(), data.cols()));
    }
    if (data.rows() == 0)
    {
        return {};
    }
    std::size_t correct = 0;
    double ce = 0.0;
    Eigen::Vector2d prob;
    for (Eigen::Index r = 0; r < data.rows(); ++r)
    {
        const Eigen::Vector2d z = model.logits(data.features.row(r).transpose());
        const int c = class_of(data.label[r]);
        const int predicted = z[1] > z[0] ? 1 : 0;
        correct += predicted == c ? 1 : 0;
        ce += cross_entropy(z, c, prob);
    }
    const auto n = static_cast<double>(data.rows());
    return {static_cast<double>(correct) / n, ce / n};
}

auto training_objective(std::span<const LinearClassifier> models,
                        const Eigen::MatrixXd& batch, const Eigen::VectorXi& labels,
                        double diversity_weight, Similarity kind) -> ObjectiveGradient
{
    if (batch.rows() != labels.size() || batch.rows() == 0)
    {
        throw ConfigError(fmt::format("batch has {} rows but {} labels", batch.rows(),
                                      labels.size()));
    }
    require_width(models, batch.cols());
    ObjectiveGradient out;
    out.gradients.reserve(models.size());
    for (const auto& m : models)
    {
        out.gradients.push_back(zero_like(m));
    }
    out.value = accumulate_batch(models, batch, classes_of(labels), diversity_weight,
                                 kind, out.gradients);
    return out;
}

auto initial_classifier(Eigen::Index dim, std::uint64_t seed, int model_index,
                        double init_std) -> LinearClassifier
{
    std::mt19937_64 rng(derive_seed(seed, 1 + static_cast<std::uint64_t>(model_index)));
    std::normal_distribution<double> normal(0.0, 1.0);
    LinearClassifier model;
    model.W.resize(2, dim);
    for (Eigen::Index c = 0; c < dim; ++c)
    {
        for (int k = 0; k < 2; ++k)
        {
            model.W(k, c) = init_std * normal(rng);
        }
    }
    model.bias.setZero();
    return model;
}

auto train_erm(const Dataset& train, const Dataset& eval_id, const Dataset& eval_ood,
               const TrainConfig& config, int init_index) -> TrainResult
{
    if (config.n_models != 1)
    {
        throw PreconditionError(fmt::format(
            "train_erm trains a single model; got n_models = {}", config.n_models));
    }
    std::vector<LinearClassifier> models{
        initial_classifier(train.cols(), config.seed, init_index, config.init_std)};
    return train_models(std::move(models), train, eval_id, eval_ood, config);
}

auto train_diverse(const Dataset& train, const Dataset& eval_id,
                   const Dataset& eval_ood, const TrainConfig& config) -> TrainResult
{
    if (config.n_models < 2)
    {
        throw PreconditionError(fmt::format(
            "train_diverse needs n_models >= 2, got {}", config.n_models));
    }
    std::vector<LinearClassifier> models;
    models.reserve(static_cast<std::size_t>(config.n_models));
    for (int i = 0; i < config.n_models; ++i)
    {
        models.push_back(
            initial_classifier(train.cols(), config.seed, i, config.init_std));
    }
    return train_models(std::move(models), train, eval_id, eval_ood, config);
}

void write_records_csv(std::ostream& out, std::span<const RunRecords> runs)
{
    out << kRecordsCsvHeader << '\n';
    for (const auto& run : runs)
    {
        for (const auto& rec : run.records)
        {
            out << fmt::format("{},{},{},{},{},{},{},{}\n", run.method, run.seed,
                               rec.model_idx, rec.epoch, rec.id_accuracy,
                               rec.ood_accuracy, rec.id_logistic_risk,
                               rec.ood_logistic_risk);
        }
    }
}

}  // namespace misspec
