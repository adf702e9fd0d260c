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


#include "misspec/json.hpp"

namespace misspec
{

auto to_json(const Eigen::VectorXd& v) -> Json
{
    Json out = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i)
    {
        out.push_back(v[i]);
    }
    return out;
}

auto to_json(const Eigen::MatrixXd& m) -> Json
{
    Json out = Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r)
    {
        out.push_back(to_json(Eigen::VectorXd(m.row(r).transpose())));
    }
    return out;
}

auto to_json(const FeatureMask& mask) -> Json
{
    return Json{{"columns", mask.columns()},
                {"d_inv", mask.d_inv()},
                {"d_hat_inv", mask.d_hat_inv()},
                {"d_hat_spu", mask.d_hat_spu()}};
}

auto to_json(const MomentSet& moments) -> Json
{
    return Json{{"source", to_string(moments.source)},
                {"env_id", moments.env_id},
                {"mask", to_json(moments.mask)},
                {"n_samples", moments.n_samples},
                {"s_y", moments.s_y},
                {"M", to_json(moments.M)},
                {"b", to_json(moments.b)},
                {"rank_deficient_warning", moments.rank_deficient_warning}};
}

auto to_json(const RegressionSolution& solution) -> Json
{
    return Json{{"fit_env", solution.fit_env},
                {"mask", to_json(solution.mask)},
                {"beta", to_json(solution.beta)},
                {"condition", solution.condition}};
}

auto to_json(const Theorem1Certificate& c) -> Json
{
    Json out{{"verdict", to_string(c.verdict)},
             {"mask_before", to_json(c.mask_before)},
             {"mask_after", to_json(c.mask_after)},
             {"new_index", c.new_index},
             {"l_id_before", c.l_id_before},
             {"l_id_after", c.l_id_after},
             {"l_ood_transfer_before", c.l_ood_transfer_before},
             {"l_ood_transfer_after", c.l_ood_transfer_after},
             {"l_ood_oracle_before", c.l_ood_oracle_before},
             {"l_ood_oracle_after", c.l_ood_oracle_after},
             {"delta_id", c.delta_id},
             {"delta_ood_transfer", c.delta_ood_transfer},
             {"delta_ood_oracle", c.delta_ood_oracle},
             {"q1", c.q1},
             {"q2", c.q2},
             {"q3", c.q3},
             {"q_identity_residual", c.q_identity_residual},
             {"assumption1_ok", c.assumption1_ok},
             {"shared_eigvec_ok", c.shared_eigvec_ok},
             {"alpha_gap", c.alpha_gap}};
    out["alpha_threshold"] = c.alpha_threshold ? Json(*c.alpha_threshold) : Json(nullptr);
    return out;
}

auto to_json(const PatternLabel& label) -> Json
{
    return Json{{"label", to_string(label.pattern)},
                {"pearson_r", label.pearson_r},
                {"id_spread", label.id_spread},
                {"ood_spread", label.ood_spread},
                {"mean_id", label.mean_id},
                {"mean_ood", label.mean_ood},
                {"n_points", label.n_points}};
}

auto to_json(const ModelPoint& p) -> Json
{
    return Json{{"run_id", p.run_id()},
                {"method", p.method},
                {"seed", p.seed},
                {"model_idx", p.model_idx},
                {"epoch", p.epoch},
                {"id_metric", p.id_metric},
                {"ood_metric", p.ood_metric}};
}

auto to_json(const SelectionReport& report) -> Json
{
    Json runs = Json::array();
    for (const auto& rp : report.run_patterns)
    {
        runs.push_back(Json{{"run_id", rp.run_id}, {"pattern", to_json(rp.label)}});
    }
    Json by_id = Json::array();
    for (const auto& p : report.selected_by_id)
    {
        by_id.push_back(to_json(p));
    }
    Json by_ood = Json::array();
    for (const auto& p : report.selected_by_ood)
    {
        by_ood.push_back(to_json(p));
    }
    return Json{{"fixed_epoch", report.fixed_epoch},
                {"pattern_full", to_json(report.pattern_full)},
                {"pattern_filtered", to_json(report.pattern_filtered)},
                {"ood_regret", report.ood_regret},
                {"run_patterns", std::move(runs)},
                {"selected_by_id", std::move(by_id)},
                {"selected_by_ood", std::move(by_ood)}};
}

auto to_json(const ShiftSweepRow& row) -> Json
{
    return Json{{"step", row.step},
                {"t", row.t},
                {"env_id", row.env_id},
                {"pattern", to_json(row.label)}};
}

}  // namespace misspec
