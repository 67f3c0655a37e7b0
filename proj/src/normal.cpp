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

#include "mixscale/normal.hpp"

#include <limits>

#include <boost/math/special_functions/erf.hpp>

namespace mixscale::normal {

double quantile(double p) {
  if (p <= 0.0) {
    return -std::numeric_limits<double>::infinity();
  }
  if (p >= 1.0) {
    return std::numeric_limits<double>::infinity();
  }
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

double upper_quantile(double q) {
  if (q <= 0.0) {
    return std::numeric_limits<double>::infinity();
  }
  if (q >= 1.0) {
    return -std::numeric_limits<double>::infinity();
  }
  return std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * q);
}

}  // namespace mixscale::normal
