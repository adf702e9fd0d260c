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

#include <span>
#include <string>

#include "misspec/landscape.hpp"
#include "misspec/theorem.hpp"

namespace misspec::cli
{

/// ID accuracy on x, OOD accuracy on y. ERM points grey circles, other
/// methods orange squares; points selected by ID ringed blue, by OOD red.
[[nodiscard]] auto scatter_svg(std::span<const ModelPoint> points,
                               const SelectionReport* report, const std::string& title)
    -> std::string;

/// L_ID and L_OOD against the number of added spurious features.
[[nodiscard]] auto risk_curves_svg(std::span<const SweepStep> steps) -> std::string;

/// One small scatter per shift step, left to right.
[[nodiscard]] auto panel_strip_svg(std::span<const ShiftSweepRow> rows) -> std::string;

}  // namespace misspec::cli
