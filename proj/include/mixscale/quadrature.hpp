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

#include <functional>
#include <span>
#include <vector>

namespace mixscale {

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;
  std::size_t evaluations = 0;
};

struct QuadratureSettings {
  double abs_tol = 1e-10;
  double rel_tol = 1e-8;
  std::size_t max_panels = 2000;
};

/// Globally adaptive 15-point Gauss-Kronrod over [breaks.front(), breaks.back()],
/// starting from one panel per consecutive pair of breakpoints and bisecting
/// the panel with the largest error estimate until the total error is below
/// max(abs_tol, rel_tol * |value|) or the panel budget is spent.
[[nodiscard]] QuadratureResult integrate_1d(const std::function<double(double)>& f, std::span<const double> breaks,
                                            const QuadratureSettings& settings = {});

/// Iterated adaptive rule over the rectangle spanned by two breakpoint lists.
[[nodiscard]] QuadratureResult integrate_2d(const std::function<double(double, double)>& f,
                                            std::span<const double> breaks_x, std::span<const double> breaks_y,
                                            const QuadratureSettings& settings = {});

/// Sorted breakpoints covering [lo, hi] from the candidate set, dropping
/// points outside the range or within min_gap of a kept neighbour.
[[nodiscard]] std::vector<double> make_breaks(double lo, double hi, std::vector<double> candidates, double min_gap);

}  // namespace mixscale
