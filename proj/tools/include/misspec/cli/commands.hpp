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
#include <optional>
#include <string>
#include <vector>

namespace misspec::cli
{

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

/// Command-line overrides; unset fields fall back to the config file.
struct CommandOptions
{
    std::string config_path;
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> fixed_epoch;
    std::optional<std::vector<int>> mask;
    std::optional<int> add_feature;
    std::string points_path;
};

/// Each command writes its artifacts atomically under the output directory,
/// prints its primary result to `out` and diagnostics to `err`, and returns
/// 0, 2 (configuration or schema error) or 3 (runtime failure).
int cmd_certify(const CommandOptions& options, std::ostream& out, std::ostream& err);
int cmd_sweep(const CommandOptions& options, std::ostream& out, std::ostream& err);
int cmd_train(const CommandOptions& options, std::ostream& out, std::ostream& err);
int cmd_landscape(const CommandOptions& options, std::ostream& out, std::ostream& err);
int cmd_shift_sweep(const CommandOptions& options, std::ostream& out, std::ostream& err);

/// Writes `content` to a temporary sibling and renames it over `path`.
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace misspec::cli
