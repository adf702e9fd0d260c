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

#include <nlohmann/json.hpp>

#include "misspec/landscape.hpp"
#include "misspec/oracle.hpp"
#include "misspec/theorem.hpp"

namespace misspec
{

using Json = nlohmann::ordered_json;

[[nodiscard]] auto to_json(const Eigen::VectorXd& v) -> Json;
[[nodiscard]] auto to_json(const Eigen::MatrixXd& m) -> Json;
[[nodiscard]] auto to_json(const FeatureMask& mask) -> Json;
[[nodiscard]] auto to_json(const MomentSet& moments) -> Json;
[[nodiscard]] auto to_json(const RegressionSolution& solution) -> Json;
[[nodiscard]] auto to_json(const Theorem1Certificate& certificate) -> Json;
[[nodiscard]] auto to_json(const PatternLabel& label) -> Json;
[[nodiscard]] auto to_json(const ModelPoint& point) -> Json;
[[nodiscard]] auto to_json(const SelectionReport& report) -> Json;
[[nodiscard]] auto to_json(const ShiftSweepRow& row) -> Json;

}  // namespace misspec
