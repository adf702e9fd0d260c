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


#include <benchmark/benchmark.h>

#include <Eigen/Dense>

#include "misspec/landscape.hpp"
#include "misspec/oracle.hpp"
#include "misspec/seed.hpp"
#include "misspec/sem.hpp"
#include "misspec/theorem.hpp"
#include "misspec/trainer.hpp"

namespace
{

using namespace misspec;

auto make_task(int d) -> TaskSpec
{
    TaskSpec t;
    t.d_inv = d;
    t.d_spu = d;
    t.gamma = Eigen::VectorXd::Constant(d, 0.5);
    t.sigma_inv_sq = 1.0;
    t.sigma_spu_sq = Eigen::VectorXd::Ones(d);
    return t;
}

auto make_env(int d, double alpha, const char* name) -> Environment
{
    return {Eigen::VectorXd::Constant(d, alpha), name};
}

void BM_PopulationMoments(benchmark::State& state)
{
    const int d = static_cast<int>(state.range(0));
    const auto task = make_task(d);
    const auto env = make_env(d, 0.1, "id");
    const auto mask = FeatureMask::all(task);
    for (auto _ : state)
    {
        benchmark::DoNotOptimize(population_moments(task, env, mask));
    }
}
BENCHMARK(BM_PopulationMoments)->Arg(4)->Arg(32)->Arg(128);

void BM_EmpiricalMoments(benchmark::State& state)
{
    const auto task = make_task(4);
    const auto data = sample_dataset(task, make_env(4, 0.1, "id"), state.range(0), 7);
    const auto mask = FeatureMask::all(task);
    for (auto _ : state)
    {
        benchmark::DoNotOptimize(empirical_moments(data, mask));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EmpiricalMoments)->Arg(10'000)->Arg(100'000);

void BM_Eigendecompose(benchmark::State& state)
{
    const int d = static_cast<int>(state.range(0));
    const auto task = make_task(d);
    const auto m = population_moments(task, make_env(d, 0.1, "id"), FeatureMask::all(task)).M;
    for (auto _ : state)
    {
        benchmark::DoNotOptimize(eigendecompose(m));
    }
}
BENCHMARK(BM_Eigendecompose)->Arg(8)->Arg(64)->Arg(256);

void BM_Certify(benchmark::State& state)
{
    const int d = static_cast<int>(state.range(0));
    const auto task = make_task(d);
    const auto id = make_env(d, 0.1, "id");
    const auto ood = make_env(d, 3.0, "ood");
    const auto mask = FeatureMask::invariant_only(task);
    for (auto _ : state)
    {
        benchmark::DoNotOptimize(certify(task, id, ood, mask, d));
    }
}
BENCHMARK(BM_Certify)->Arg(1)->Arg(8)->Arg(64);

void BM_DiverseEpoch(benchmark::State& state)
{
    const auto task = make_task(4);
    const auto train = sample_dataset(task, make_env(4, 0.1, "id"), 2000, 1);
    const auto eval_id = sample_dataset(task, make_env(4, 0.1, "id"), 1000, 2);
    const auto eval_ood = sample_dataset(task, make_env(4, 3.0, "ood"), 1000, 3);
    TrainConfig config;
    config.n_models = static_cast<int>(state.range(0));
    config.similarity = Similarity::Cosine;
    config.epochs = 1;
    for (auto _ : state)
    {
        benchmark::DoNotOptimize(train_diverse(train, eval_id, eval_ood, config));
    }
}
BENCHMARK(BM_DiverseEpoch)->Arg(2)->Arg(24)->Unit(benchmark::kMillisecond);

void BM_ClassifyPattern(benchmark::State& state)
{
    std::vector<ModelPoint> points;
    for (int i = 0; i < state.range(0); ++i)
    {
        ModelPoint p;
        p.id_metric = 0.8 + 1e-4 * i;
        p.ood_metric = 0.7 - 5e-5 * i;
        p.method = "erm";
        p.seed = static_cast<std::uint64_t>(i);
        p.epoch = 10;
        points.push_back(p);
    }
    for (auto _ : state)
    {
        benchmark::DoNotOptimize(classify_pattern(points));
    }
}
BENCHMARK(BM_ClassifyPattern)->Arg(100)->Arg(10'000);

}  // namespace

BENCHMARK_MAIN();
