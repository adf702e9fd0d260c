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

#include <stdexcept>
#include <string>

namespace misspec
{

class Error : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

/// Malformed or mutually inconsistent inputs (dimensions, ranges, schema).
class ConfigError : public Error
{
  public:
    using Error::Error;
};

/// A documented operation precondition was violated by the caller.
class PreconditionError : public Error
{
  public:
    using Error::Error;
};

/// Second-moment matrix too ill-conditioned for a normal-equations solve.
class SingularMomentError : public Error
{
  public:
    SingularMomentError(const std::string& what, double condition);

    [[nodiscard]] double condition() const noexcept { return condition_; }

  private:
    double condition_;
};

/// Projection of E[x y] onto an eigenvector vanished, so a quantity that
/// divides by it is undefined.
class AssumptionError : public Error
{
  public:
    using Error::Error;
};

/// Training produced non-finite parameters or loss.
class TrainingFailure : public Error
{
  public:
    TrainingFailure(const std::string& what, int epoch);

    [[nodiscard]] int epoch() const noexcept { return epoch_; }

  private:
    int epoch_;
};

}  // namespace misspec
