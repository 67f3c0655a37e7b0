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

#include "mixscale/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "mixscale/errors.hpp"

namespace mixscale {

namespace {

using Rule = boost::math::quadrature::gauss_kronrod<double, 15>;

struct Panel {
  double a;
  double b;
  double value;
  double error;
  friend bool operator<(const Panel& lhs, const Panel& rhs) { return lhs.error < rhs.error; }
};

Panel evaluate(const std::function<double(double)>& f, double a, double b, std::size_t& evaluations) {
  // Kronrod nodes on [-1, 1]: abscissa()[0] is the centre.
  const auto& x = Rule::abscissa();
  const auto& wk = Rule::weights();
  const auto& wg = boost::math::quadrature::gauss<double, 7>::weights();
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  const double fc = f(mid);
  double kronrod = wk[0] * fc;
  double gauss = wg[0] * fc;
  for (std::size_t i = 1; i < x.size(); ++i) {
    const double f1 = f(mid - half * x[i]);
    const double f2 = f(mid + half * x[i]);
    kronrod += wk[i] * (f1 + f2);
    if (i % 2 == 0) {
      gauss += wg[i / 2] * (f1 + f2);
    }
  }
  evaluations += 2 * x.size() - 1;
  return {a, b, half * kronrod, std::abs(half * (kronrod - gauss))};
}

}  // namespace

QuadratureResult integrate_1d(const std::function<double(double)>& f, std::span<const double> breaks,
                              const QuadratureSettings& settings) {
  QuadratureResult out;
  if (breaks.size() < 2) {
    return out;
  }
  std::priority_queue<Panel> panels;
  double total = 0.0;
  double error = 0.0;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    if (!(breaks[i] < breaks[i + 1])) {
      continue;
    }
    auto p = evaluate(f, breaks[i], breaks[i + 1], out.evaluations);
    total += p.value;
    error += p.error;
    panels.push(p);
  }
  while (!panels.empty() && panels.size() < settings.max_panels &&
         error > std::max(settings.abs_tol, settings.rel_tol * std::abs(total))) {
    const Panel worst = panels.top();
    panels.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(worst.a < mid && mid < worst.b)) {
      break;
    }
    const auto left = evaluate(f, worst.a, mid, out.evaluations);
    const auto right = evaluate(f, mid, worst.b, out.evaluations);
    total += left.value + right.value - worst.value;
    error += left.error + right.error - worst.error;
    panels.push(left);
    panels.push(right);
  }
  // Re-sum to shed the drift of the running updates.
  out.value = 0.0;
  out.error = 0.0;
  while (!panels.empty()) {
    out.value += panels.top().value;
    out.error += panels.top().error;
    panels.pop();
  }
  if (!std::isfinite(out.value)) {
    throw NumericalError("integrate_1d: integrand produced a non-finite value");
  }
  return out;
}

QuadratureResult integrate_2d(const std::function<double(double, double)>& f, std::span<const double> breaks_x,
                              std::span<const double> breaks_y, const QuadratureSettings& settings) {
  QuadratureSettings inner = settings;
  inner.abs_tol = settings.abs_tol * 0.1;
  inner.rel_tol = settings.rel_tol * 0.1;
  double inner_error = 0.0;
  std::size_t inner_evals = 0;
  auto outer = [&](double x) {
    const auto r = integrate_1d([&](double y) { return f(x, y); }, breaks_y, inner);
    inner_error = std::max(inner_error, r.error);
    inner_evals += r.evaluations;
    return r.value;
  };
  auto result = integrate_1d(outer, breaks_x, settings);
  const double width = breaks_x.back() - breaks_x.front();
  result.error += inner_error * width;
  result.evaluations = inner_evals;
  return result;
}

std::vector<double> make_breaks(double lo, double hi, std::vector<double> candidates, double min_gap) {
  std::vector<double> out{lo};
  std::sort(candidates.begin(), candidates.end());
  for (const double c : candidates) {
    if (c > out.back() + min_gap && c < hi - min_gap) {
      out.push_back(c);
    }
  }
  out.push_back(hi);
  return out;
}

}  // namespace mixscale
