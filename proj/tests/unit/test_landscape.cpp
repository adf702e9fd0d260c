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


#include <algorithm>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "misspec/error.hpp"
#include "misspec/json.hpp"
#include "misspec/landscape.hpp"

namespace
{

using misspec::ModelPoint;
using misspec::Pattern;

auto point(double id, double ood, std::uint64_t seed = 0, int epoch = 1,
           const std::string& method = "erm", int model = 0) -> ModelPoint
{
    ModelPoint p;
    p.id_metric = id;
    p.ood_metric = ood;
    p.seed = seed;
    p.epoch = epoch;
    p.method = method;
    p.model_idx = model;
    return p;
}

// Per-run trajectories trading OOD for ID over epochs, with final epochs
// sharing nearly the same ID accuracy.
auto collapse_cloud() -> std::vector<ModelPoint>
{
    std::vector<ModelPoint> pts;
    for (int run = 0; run < 5; ++run)
    {
        for (int e = 1; e <= 10; ++e)
        {
            pts.push_back(point(0.80 + 0.01 * e + 0.0005 * run, 0.9 - 0.02 * e + 0.03 * run,
                                static_cast<std::uint64_t>(run), e));
        }
    }
    return pts;
}

TEST(Landscape, LineIsPositive)
{
    std::vector<ModelPoint> pts;
    for (int i = 0; i < 10; ++i)
    {
        pts.push_back(point(0.5 + 0.04 * i, 0.5 + 0.04 * i));
    }
    const auto label = misspec::classify_pattern(pts);
    EXPECT_EQ(label.pattern, Pattern::Positive);
    EXPECT_NEAR(label.pearson_r, 1.0, 1e-12);
    EXPECT_EQ(label.n_points, 10);
}

TEST(Landscape, AntiLineIsNegative)
{
    std::vector<ModelPoint> pts;
    for (int i = 0; i < 10; ++i)
    {
        pts.push_back(point(0.5 + 0.04 * i, 0.5 - 0.04 * i));
    }
    const auto label = misspec::classify_pattern(pts);
    EXPECT_EQ(label.pattern, Pattern::Negative);
    EXPECT_NEAR(label.pearson_r, -1.0, 1e-12);
}

TEST(Landscape, NarrowIdWideOodIsVertical)
{
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> id(0.899, 0.901);
    std::uniform_real_distribution<double> ood(0.3, 0.9);
    std::vector<ModelPoint> pts;
    for (int i = 0; i < 50; ++i)
    {
        pts.push_back(point(id(rng), ood(rng)));
    }
    EXPECT_EQ(misspec::classify_pattern(pts).pattern, Pattern::Vertical);
}

TEST(Landscape, FlatAtChanceIsHorizontal)
{
    std::vector<ModelPoint> pts;
    for (int i = 0; i < 10; ++i)
    {
        pts.push_back(point(0.6 + 0.03 * i, 0.5 + 0.001 * (i % 3)));
    }
    EXPECT_EQ(misspec::classify_pattern(pts).pattern, Pattern::Horizontal);
}

TEST(Landscape, IndependentCloudHasNoTrend)
{
    std::vector<ModelPoint> pts;
    const double id[] = {0.6, 0.7, 0.8, 0.6, 0.7, 0.8};
    const double ood[] = {0.6, 0.8, 0.6, 0.8, 0.6, 0.8};
    for (int i = 0; i < 6; ++i)
    {
        pts.push_back(point(id[i], ood[i]));
    }
    EXPECT_EQ(misspec::classify_pattern(pts).pattern, Pattern::NoTrend);
}

TEST(Landscape, NeedsThreePoints)
{
    const std::vector<ModelPoint> pts{point(0.5, 0.5), point(0.6, 0.6)};
    EXPECT_THROW((void)misspec::classify_pattern(pts), misspec::PreconditionError);
}

TEST(Landscape, ClassificationIgnoresOrderAndRunNames)
{
    auto pts = collapse_cloud();
    const auto base = misspec::classify_pattern(pts);
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 5; ++trial)
    {
        std::shuffle(pts.begin(), pts.end(), rng);
        for (auto& p : pts)
        {
            p.method = "renamed" + std::to_string(trial);
            p.seed += 100;
        }
        const auto again = misspec::classify_pattern(pts);
        EXPECT_EQ(again.pattern, base.pattern);
        EXPECT_EQ(again.pearson_r, base.pearson_r);
        EXPECT_EQ(again.mean_ood, base.mean_ood);
    }
}

TEST(Landscape, FilterKeepsEpochInOrder)
{
    const auto pts = collapse_cloud();
    const auto kept = misspec::filter_fixed_epoch(pts, 10);
    ASSERT_EQ(kept.size(), 5u);
    for (std::size_t i = 0; i < kept.size(); ++i)
    {
        EXPECT_EQ(kept[i].epoch, 10);
        EXPECT_EQ(kept[i].seed, i);
    }
    EXPECT_TRUE(misspec::filter_fixed_epoch(pts, 99).empty());
}

TEST(Landscape, SelectMaxIdPerRun)
{
    std::vector<ModelPoint> monotone;
    std::vector<ModelPoint> peaked;
    const double peak[] = {0.6, 0.7, 0.9, 0.8, 0.75};
    for (int e = 1; e <= 5; ++e)
    {
        monotone.push_back(point(0.5 + 0.05 * e, 0.5, 1, e));
        peaked.push_back(point(peak[e - 1], 0.5, 2, e));
    }
    EXPECT_EQ(misspec::select_max_id(monotone).at(0).epoch, 5);
    EXPECT_EQ(misspec::select_max_id(peaked).at(0).epoch, 3);

    const std::vector<ModelPoint> tied{point(0.9, 0.1, 1, 4), point(0.9, 0.2, 1, 2)};
    EXPECT_EQ(misspec::select_max_id(tied).at(0).epoch, 2);

    auto both = monotone;
    both.insert(both.end(), peaked.begin(), peaked.end());
    const auto chosen = misspec::select_max_id(both);
    ASSERT_EQ(chosen.size(), 2u);
    for (const auto& c : chosen)
    {
        EXPECT_NE(std::find(both.begin(), both.end(), c), both.end());
    }
}

TEST(Landscape, RegretVanishesForComonotoneClouds)
{
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.5, 1.0);
    for (int trial = 0; trial < 20; ++trial)
    {
        std::vector<ModelPoint> pts;
        for (int i = 0; i < 30; ++i)
        {
            const double x = u(rng);
            pts.push_back(point(x, 0.3 + 0.5 * x * x, static_cast<std::uint64_t>(i % 3), i));
        }
        EXPECT_EQ(misspec::ood_regret(pts), 0.0);
    }
    EXPECT_EQ(misspec::ood_regret(std::vector<ModelPoint>{}), 0.0);
}

TEST(Landscape, SelectionReportShowsCollapse)
{
    const auto pts = collapse_cloud();
    const auto report = misspec::selection_bias_report(pts, 10);
    EXPECT_EQ(report.pattern_full.pattern, Pattern::Negative);
    EXPECT_EQ(report.pattern_filtered.pattern, Pattern::Vertical);
    EXPECT_EQ(report.run_patterns.size(), 5u);
    for (const auto& rp : report.run_patterns)
    {
        EXPECT_EQ(rp.label.pattern, Pattern::Negative);
    }
    EXPECT_EQ(report.selected_by_id.size(), 5u);
    EXPECT_GT(report.ood_regret, 0.1);
    for (std::size_t i = 0; i < 5; ++i)
    {
        EXPECT_EQ(report.selected_by_id[i].epoch, 10);
        EXPECT_EQ(report.selected_by_ood[i].epoch, 1);
    }
}

TEST(Landscape, SelectionReportNeedsRunsAndEpochs)
{
    std::vector<ModelPoint> one_run;
    for (int e = 1; e <= 5; ++e)
    {
        one_run.push_back(point(0.5 + 0.01 * e, 0.5, 0, e));
    }
    EXPECT_THROW((void)misspec::selection_bias_report(one_run, 5), misspec::PreconditionError);
}

TEST(Landscape, CsvRoundTripReproducesReport)
{
    auto pts = collapse_cloud();
    for (auto& p : pts)
    {
        p.id_metric += 1.0 / 3.0 * 1e-3;
        p.ood_risk = 0.1 * p.epoch;
    }
    const auto report = misspec::selection_bias_report(pts, 10);
    std::ostringstream out;
    misspec::write_points_csv(out, pts, &report);
    std::istringstream in(out.str());
    const auto back = misspec::read_points_csv(in);
    EXPECT_EQ(back, pts);
    const auto again = misspec::selection_bias_report(back, 10);
    EXPECT_EQ(misspec::to_json(again).dump(), misspec::to_json(report).dump());
}

TEST(Landscape, CsvRejectsBadRows)
{
    const std::string header = "method,seed,model_idx,epoch,id_acc,ood_acc,id_risk,ood_risk\n";
    auto expect_error = [](const std::string& text, const std::string& needle) {
        std::istringstream in(text);
        try
        {
            (void)misspec::read_points_csv(in);
            FAIL() << "accepted: " << text;
        }
        catch (const misspec::ConfigError& e)
        {
            EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
        }
    };
    expect_error(header + "erm,0,0,1,0.5,0.5,0,0\nerm,0,0,2,1.2,0.5,0,0\n", "line 3");
    expect_error(header + "erm,0,0,1,0.5,0.5,0,0\nerm,0,0,1,0.6,0.5,0,0\n", "duplicate");
    expect_error(header + "erm,0,0,1,0.5\n", "line 2");
    expect_error(header + "erm,x,0,1,0.5,0.5,0,0\n", "seed");
    expect_error("a,b,c\n", "header");
}

TEST(Landscape, PointsFromRecords)
{
    misspec::EpochRecord rec;
    rec.epoch = 3;
    rec.model_idx = 2;
    rec.id_accuracy = 0.9;
    rec.ood_accuracy = 0.4;
    const std::vector<misspec::RunRecords> runs{{"diverse", 7, {rec}}};
    const auto pts = misspec::points_from_records(runs);
    ASSERT_EQ(pts.size(), 1u);
    EXPECT_EQ(pts[0].run_id(), "diverse-7");
    EXPECT_EQ(pts[0].epoch, 3);
    EXPECT_EQ(pts[0].model_idx, 2);
    EXPECT_EQ(pts[0].ood_metric, 0.4);
}

TEST(Landscape, ShiftSweepWithoutShiftIsPositive)
{
    misspec::TaskSpec t;
    t.d_inv = 4;
    t.d_spu = 4;
    t.gamma = Eigen::VectorXd::Constant(4, 0.5);
    t.sigma_spu_sq = Eigen::VectorXd::Ones(4);
    const misspec::Environment id{Eigen::VectorXd::Constant(4, 0.1), "id"};
    const auto family = misspec::make_shift_family(t, id.alpha, id.alpha, 2);
    misspec::TrainConfig cfg;
    cfg.epochs = 5;
    misspec::ShiftSweepSetup setup;
    setup.n_seeds = 4;
    setup.n_train = 1000;
    setup.n_eval = 5000;
    const auto rows = misspec::shift_sweep_report(t, id, family, cfg, setup);
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[0].label.pattern, rows[1].label.pattern);
    EXPECT_EQ(rows[0].label.pattern, Pattern::Positive);
    EXPECT_NEAR(rows[0].label.mean_ood, rows[0].label.mean_id, 0.01);
    EXPECT_EQ(rows[1].t, 1.0);
    EXPECT_EQ(rows[0].points.size(), 20u);
}

}  // namespace
