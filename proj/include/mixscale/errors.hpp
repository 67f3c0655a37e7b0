// Copyright 2026 The mixscale Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace mixscale {

/// A value lies outside the domain an operation accepts (bad level index,
/// point outside a map's range, init state outside its cell).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Linear algebra broke down: non-SPD covariance, singular conditioning block.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A stochastic integrator could not reach the requested accuracy.
class AccuracyError : public std::runtime_error {
 public:
  AccuracyError(const std::string& what, double achieved_std_error)
      : std::runtime_error(what), achieved_std_error_(achieved_std_error) {}

  [[nodiscard]] double achieved_std_error() const noexcept { return achieved_std_error_; }

 private:
  double achieved_std_error_;
};

/// Two densities do not live on the same outcome space.
class SchemaMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace mixscale
