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

// Scalar standard-normal helpers shared by every module.

#include <cmath>
#include <numbers>

namespace mixscale::normal {

inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;

inline double log_pdf(double z) { return -0.5 * z * z - kLogSqrt2Pi; }

inline double pdf(double z) { return std::exp(log_pdf(z)); }

inline double cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

/// Upper tail 1 - cdf(z), accurate for large positive z.
inline double sf(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }

/// P(lower <= Z < upper), evaluated on whichever tail keeps precision.
inline double interval(double lower, double upper) {
  if (!(lower < upper)) {
    return 0.0;
  }
  if (lower > 0.0) {
    return sf(lower) - sf(upper);
  }
  if (upper < 0.0) {
    return cdf(upper) - cdf(lower);
  }
  return 1.0 - cdf(lower) - sf(upper);
}

/// Inverse of cdf. Returns +-inf at the endpoints.
double quantile(double p);

/// Inverse of sf, precise when q is tiny.
double upper_quantile(double q);

}  // namespace mixscale::normal
