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


#include "misspec/landscape.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <tuple>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "misspec/error.hpp"
#include "misspec/seed.hpp"

namespace misspec
{

auto ModelPoint::run_id() const -> std::string { return fmt::format("{}-{}", method, seed); }

auto to_string(Pattern pattern) -> std::string
{
    switch (pattern)
    {
        case Pattern::Positive:
            return "Positive";
        case Pattern::Vertical:
            return "Vertical";
        case Pattern::Horizontal:
            return "Horizontal";
        case Pattern::Negative:
            return "Negative";
        case Pattern::NoTrend:
            return "NoTrend";
    }
    return "NoTrend";
}

auto parse_pattern(const std::string& name) -> Pattern
{
    for (auto p : {Pattern::Positive, Pattern::Vertical, Pattern::Horizontal,
                   Pattern::Negative, Pattern::NoTrend})
    {
        if (to_string(p) == name)
        {
            return p;
        }
    }
    throw ConfigError(fmt::format("unknown pattern '{}'", name));
}

void validate(const PatternThresholds& th)
{
    auto finite_nonneg = [](double v) { return std::isfinite(v) && v >= 0.0; };
    if (!finite_nonneg(th.eps_x) || !finite_nonneg(th.eps_y) || !finite_nonneg(th.delta))
    {
        throw ConfigError("pattern thresholds eps_x, eps_y, delta must be finite and >= 0");
    }
    if (!(th.chance >= 0.0 && th.chance <= 1.0))
    {
        throw ConfigError(fmt::format("chance must lie in [0, 1], got {}", th.chance));
    }
    if (!(th.r_cut > 0.0 && th.r_cut <= 1.0))
    {
        throw ConfigError(fmt::format("r_cut must lie in (0, 1], got {}", th.r_cut));
    }
}

namespace
{

bool canonical_less(const ModelPoint& a, const ModelPoint& b)
{
    if (a.id_metric != b.id_metric)
    {
        return a.id_metric < b.id_metric;
    }
    return a.ood_metric < b.ood_metric;
}

template <typename Metric>
auto best_of(std::span<const ModelPoint> points, Metric metric) -> const ModelPoint&
{
    const ModelPoint* best = &points.front();
    for (const auto& p : points.subspan(1))
    {
        if (metric(p) != metric(*best))
        {
            if (metric(p) > metric(*best))
            {
                best = &p;
            }
            continue;
        }
        if (std::tie(p.epoch, p.model_idx, p.method, p.seed)
            < std::tie(best->epoch, best->model_idx, best->method, best->seed))
        {
            best = &p;
        }
    }
    return *best;
}

template <typename Metric>
auto select_per_run(std::span<const ModelPoint> points, Metric metric)
    -> std::vector<ModelPoint>
{
    std::map<std::pair<std::string, std::uint64_t>, std::vector<ModelPoint>> runs;
    for (const auto& p : points)
    {
        runs[{p.method, p.seed}].push_back(p);
    }
    std::vector<ModelPoint> out;
    out.reserve(runs.size());
    for (const auto& [key, members] : runs)
    {
        out.push_back(best_of(std::span<const ModelPoint>(members), metric));
    }
    return out;
}

double id_of(const ModelPoint& p) { return p.id_metric; }
double ood_of(const ModelPoint& p) { return p.ood_metric; }

}  // namespace

auto classify_pattern(std::span<const ModelPoint> points,
                      const PatternThresholds& th) -> PatternLabel
{
    if (points.size() < 3)
    {
        throw PreconditionError(fmt::format(
            "pattern classification needs at least 3 points, got {}", points.size()));
    }
    validate(th);

    std::vector<ModelPoint> sorted(points.begin(), points.end());
    std::sort(sorted.begin(), sorted.end(), canonical_less);

    const auto n = static_cast<double>(sorted.size());
    double mx = 0.0;
    double my = 0.0;
    for (const auto& p : sorted)
    {
        mx += p.id_metric;
        my += p.ood_metric;
    }
    mx /= n;
    my /= n;
    double sxx = 0.0;
    double syy = 0.0;
    double sxy = 0.0;
    for (const auto& p : sorted)
    {
        const double dx = p.id_metric - mx;
        const double dy = p.ood_metric - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }

    PatternLabel label;
    label.n_points = static_cast<int>(sorted.size());
    label.mean_id = mx;
    label.mean_ood = my;
    label.id_spread = std::sqrt(sxx / n);
    label.ood_spread = std::sqrt(syy / n);
    label.pearson_r = (sxx > 0.0 && syy > 0.0)
                          ? std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0)
                          : 0.0;

    if (label.ood_spread < th.eps_y && label.mean_ood <= th.chance + th.delta)
    {
        label.pattern = Pattern::Horizontal;
    }
    else if (label.id_spread < th.eps_x && label.ood_spread >= th.eps_y)
    {
        label.pattern = Pattern::Vertical;
    }
    else if (label.pearson_r >= th.r_cut)
    {
        label.pattern = Pattern::Positive;
    }
    else if (label.pearson_r <= -th.r_cut)
    {
        label.pattern = Pattern::Negative;
    }
    else
    {
        label.pattern = Pattern::NoTrend;
    }
    return label;
}

auto filter_fixed_epoch(std::span<const ModelPoint> points, int epoch)
    -> std::vector<ModelPoint>
{
    std::vector<ModelPoint> out;
    std::copy_if(points.begin(), points.end(), std::back_inserter(out),
                 [epoch](const ModelPoint& p) { return p.epoch == epoch; });
    if (out.empty())
    {
        spdlog::warn("no points recorded at epoch {}", epoch);
    }
    return out;
}

auto select_max_id(std::span<const ModelPoint> points) -> std::vector<ModelPoint>
{
    return select_per_run(points, id_of);
}

auto select_max_ood(std::span<const ModelPoint> points) -> std::vector<ModelPoint>
{
    return select_per_run(points, ood_of);
}

double ood_regret(std::span<const ModelPoint> points)
{
    if (points.empty())
    {
        return 0.0;
    }
    const auto& chosen = best_of(points, id_of);
    const auto& top = best_of(points, ood_of);
    return std::max(0.0, top.ood_metric - chosen.ood_metric);
}

auto selection_bias_report(std::span<const ModelPoint> points, int fixed_epoch,
                           const PatternThresholds& thresholds) -> SelectionReport
{
    std::set<int> epochs;
    std::map<std::pair<std::string, std::uint64_t>, std::vector<ModelPoint>> runs;
    for (const auto& p : points)
    {
        epochs.insert(p.epoch);
        runs[{p.method, p.seed}].push_back(p);
    }
    if (epochs.size() < 2 || runs.size() < 2)
    {
        throw PreconditionError(fmt::format(
            "selection report needs >= 2 epochs and >= 2 runs, got {} and {}",
            epochs.size(), runs.size()));
    }

    SelectionReport report;
    report.fixed_epoch = fixed_epoch;
    report.pattern_full = classify_pattern(points, thresholds);
    const auto filtered = filter_fixed_epoch(points, fixed_epoch);
    report.pattern_filtered = classify_pattern(filtered, thresholds);
    for (const auto& [key, members] : runs)
    {
        if (members.size() >= 3)
        {
            report.run_patterns.push_back(
                {members.front().run_id(), classify_pattern(members, thresholds)});
        }
    }
    report.selected_by_id = select_max_id(points);
    report.selected_by_ood = select_max_ood(points);
    report.ood_regret = ood_regret(points);
    return report;
}

auto points_from_records(std::span<const RunRecords> runs) -> std::vector<ModelPoint>
{
    std::vector<ModelPoint> out;
    for (const auto& run : runs)
    {
        for (const auto& rec : run.records)
        {
            ModelPoint p;
            p.id_metric = rec.id_accuracy;
            p.ood_metric = rec.ood_accuracy;
            p.method = run.method;
            p.seed = run.seed;
            p.model_idx = rec.model_idx;
            p.epoch = rec.epoch;
            p.id_risk = rec.id_logistic_risk;
            p.ood_risk = rec.ood_logistic_risk;
            out.push_back(std::move(p));
        }
    }
    return out;
}

namespace
{

auto split_csv(const std::string& line) -> std::vector<std::string>
{
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true)
    {
        const auto comma = line.find(',', start);
        fields.push_back(line.substr(start, comma - start));
        if (comma == std::string::npos)
        {
            break;
        }
        start = comma + 1;
    }
    return fields;
}

template <typename T>
T parse_field(const std::string& text, const char* name, std::size_t line_no)
{
    T value{};
    const auto* first = text.data();
    const auto* last = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last || text.empty())
    {
        throw ConfigError(fmt::format("line {}: field {} has invalid value '{}'",
                                      line_no, name, text));
    }
    return value;
}

}  // namespace

auto read_points_csv(std::istream& in) -> std::vector<ModelPoint>
{
    static const std::vector<std::string> expected = split_csv(kRecordsCsvHeader);

    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line))
    {
        throw ConfigError("line 1: missing header");
    }
    ++line_no;
    if (!line.empty() && line.back() == '\r')
    {
        line.pop_back();
    }
    const auto header = split_csv(line);
    if (header.size() < expected.size()
        || !std::equal(expected.begin(), expected.end(), header.begin()))
    {
        throw ConfigError(
            fmt::format("line 1: header must start with '{}'", kRecordsCsvHeader));
    }

    std::vector<ModelPoint> points;
    std::set<std::tuple<std::string, std::uint64_t, int, int>> seen;
    while (std::getline(in, line))
    {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
        {
            line.pop_back();
        }
        if (line.empty())
        {
            continue;
        }
        const auto f = split_csv(line);
        if (f.size() != header.size())
        {
            throw ConfigError(fmt::format("line {}: expected {} fields, got {}", line_no,
                                          header.size(), f.size()));
        }
        ModelPoint p;
        p.method = f[0];
        if (p.method.empty())
        {
            throw ConfigError(fmt::format("line {}: empty method", line_no));
        }
        p.seed = parse_field<std::uint64_t>(f[1], "seed", line_no);
        p.model_idx = parse_field<int>(f[2], "model_idx", line_no);
        p.epoch = parse_field<int>(f[3], "epoch", line_no);
        p.id_metric = parse_field<double>(f[4], "id_acc", line_no);
        p.ood_metric = parse_field<double>(f[5], "ood_acc", line_no);
        p.id_risk = parse_field<double>(f[6], "id_risk", line_no);
        p.ood_risk = parse_field<double>(f[7], "ood_risk", line_no);
        if (p.model_idx < 0 || p.epoch < 1)
        {
            throw ConfigError(fmt::format(
                "line {}: model_idx must be >= 0 and epoch >= 1", line_no));
        }
        for (auto [value, name] : {std::pair{p.id_metric, "id_acc"},
                                   std::pair{p.ood_metric, "ood_acc"}})
        {
            if (!(value >= 0.0 && value <= 1.0))
            {
                throw ConfigError(fmt::format(
                    "line {}: {} = {} is outside [0, 1]", line_no, name, value));
            }
        }
        if (!seen.emplace(p.method, p.seed, p.epoch, p.model_idx).second)
        {
            throw ConfigError(fmt::format(
                "line {}: duplicate point for run {} epoch {} model {}", line_no,
                p.run_id(), p.epoch, p.model_idx));
        }
        points.push_back(std::move(p));
    }
    return points;
}

void write_points_csv(std::ostream& out, std::span<const ModelPoint> points,
                      const SelectionReport* report)
{
    auto contains = [](const std::vector<ModelPoint>& set, const ModelPoint& p) {
        return std::find(set.begin(), set.end(), p) != set.end();
    };
    out << kRecordsCsvHeader << ",selected\n";
    for (const auto& p : points)
    {
        const bool by_id = report != nullptr && contains(report->selected_by_id, p);
        const bool by_ood = report != nullptr && contains(report->selected_by_ood, p);
        const char* tag = by_id ? (by_ood ? "both" : "id") : (by_ood ? "ood" : "none");
        out << fmt::format("{},{},{},{},{},{},{},{},{}\n", p.method, p.seed, p.model_idx,
                           p.epoch, p.id_metric, p.ood_metric, p.id_risk, p.ood_risk,
                           tag);
    }
}

auto shift_sweep_report(const TaskSpec& task, const Environment& env_id,
                        std::span<const Environment> family, const TrainConfig& config,
                        const ShiftSweepSetup& setup, const PatternThresholds& thresholds)
    -> std::vector<ShiftSweepRow>
{
    validate(task, env_id);
    validate(thresholds);
    if (family.size() < 2)
    {
        throw ConfigError("shift family needs at least 2 environments");
    }
    if (setup.n_seeds < 1 || setup.n_train < 1 || setup.n_eval < 1)
    {
        throw ConfigError("n_seeds, n_train and n_eval must be >= 1");
    }
    TrainConfig erm = config;
    erm.n_models = 1;
    erm.record_every_epoch = true;
    validate(erm);

    std::vector<Dataset> train_sets;
    for (int s = 0; s < setup.n_seeds; ++s)
    {
        train_sets.push_back(sample_dataset(
            task, env_id, setup.n_train,
            derive_seed(setup.data_seed, 1000 + static_cast<std::uint64_t>(s))));
    }
    const auto eval_id = sample_dataset(task, env_id, setup.n_eval,
                                        derive_seed(setup.data_seed, 1));

    std::vector<ShiftSweepRow> rows;
    const int steps = static_cast<int>(family.size());
    for (int k = 0; k < steps; ++k)
    {
        const auto& env = family[static_cast<std::size_t>(k)];
        validate(task, env);
        const auto eval_ood = sample_dataset(
            task, env, setup.n_eval, derive_seed(setup.data_seed, 2 + static_cast<std::uint64_t>(k)));
        std::vector<RunRecords> runs;
        for (int s = 0; s < setup.n_seeds; ++s)
        {
            TrainConfig run_config = erm;
            run_config.seed = config.seed + static_cast<std::uint64_t>(s);
            auto result = train_erm(train_sets[static_cast<std::size_t>(s)], eval_id,
                                    eval_ood, run_config);
            runs.push_back({"erm", run_config.seed, std::move(result.records)});
        }
        const auto points = points_from_records(runs);
        ShiftSweepRow row;
        row.step = k;
        row.t = shift_parameter(k, steps);
        row.env_id = env.env_id;
        row.label = classify_pattern(points, thresholds);
        row.points = points;
        spdlog::info("shift step {} (t = {:.3f}): {} r = {:.3f} mean_ood = {:.4f}", k,
                     row.t, to_string(row.label.pattern), row.label.pearson_r,
                     row.label.mean_ood);
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_shift_sweep_csv(std::ostream& out, std::span<const ShiftSweepRow> rows)
{
    out << "step,t,env_id,pattern,pearson_r,mean_id,mean_ood\n";
    for (const auto& r : rows)
    {
        out << fmt::format("{},{},{},{},{},{},{}\n", r.step, r.t, r.env_id,
                           to_string(r.label.pattern), r.label.pearson_r,
                           r.label.mean_id, r.label.mean_ood);
    }
}

}  // namespace misspec
