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

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <tuple>
#include <utility>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/minima.hpp>

#include "mixscale/errors.hpp"
#include "mixscale/gaussian.hpp"
#include "mixscale/normal.hpp"
#include "mixscale/quadrature.hpp"

namespace mixscale {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Gauss-Legendre half-rules (6, 12 and 20 points) for the bivariate algorithm.
constexpr std::array<double, 3> kW6{0.1713244923791705, 0.3607615730481384, 0.4679139345726904};
constexpr std::array<double, 3> kX6{0.9324695142031522, 0.6612093864662647, 0.2386191860831970};
constexpr std::array<double, 6> kW12{0.04717533638651177, 0.1069393259953183, 0.1600783285433464,
                                     0.2031674267230659,  0.2334925365383547, 0.2491470458134029};
constexpr std::array<double, 6> kX12{0.9815606342467191, 0.9041172563704750, 0.7699026741943050,
                                     0.5873179542866171, 0.3678314989981802, 0.1252334085114692};
constexpr std::array<double, 10> kW20{0.01761400713915212, 0.04060142980038694, 0.06267204833410906,
                                      0.08327674157670475, 0.1019301198172404,  0.1181945319615184,
                                      0.1316886384491766,  0.1420961093183821,  0.1491729864726037,
                                      0.1527533871307259};
constexpr std::array<double, 10> kX20{0.9931285991850949, 0.9639719272779138, 0.9122344282513259,
                                      0.8391169718222188, 0.7463319064601508, 0.6360536807265150,
                                      0.5108670019508271, 0.3737060887154196, 0.2277858511416451,
                                      0.07652652113349733};

// Drezner-Wesolowsky type evaluation with Genz's refinements; absolute error
// around 1e-15.
double bvn_upper_finite(double h, double k, double r) {
  std::span<const double> w;
  std::span<const double> x;
  if (std::abs(r) < 0.3) {
    w = kW6;
    x = kX6;
  } else if (std::abs(r) < 0.75) {
    w = kW12;
    x = kX12;
  } else {
    w = kW20;
    x = kX20;
  }
  double hk = h * k;
  double bvn = 0.0;
  if (std::abs(r) < 0.925) {
    const double hs = (h * h + k * k) / 2.0;
    const double asr = std::asin(r);
    for (std::size_t i = 0; i < w.size(); ++i) {
      double sn = std::sin(asr * (x[i] + 1.0) / 2.0);
      bvn += w[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
      sn = std::sin(asr * (-x[i] + 1.0) / 2.0);
      bvn += w[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
    }
    return bvn * asr / (2.0 * kTwoPi) + normal::sf(h) * normal::sf(k);
  }
  if (r < 0.0) {
    k = -k;
    hk = -hk;
  }
  if (std::abs(r) < 1.0) {
    const double as = (1.0 - r) * (1.0 + r);
    double a = std::sqrt(as);
    const double bs = (h - k) * (h - k);
    const double c = (4.0 - hk) / 8.0;
    const double d = (12.0 - hk) / 16.0;
    double asr = -(bs / as + hk) / 2.0;
    if (asr > -100.0) {
      bvn = a * std::exp(asr) * (1.0 - c * (bs - as) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as * as / 5.0);
    }
    if (hk > -100.0) {
      const double b = std::sqrt(bs);
      bvn -= std::exp(-hk / 2.0) * std::sqrt(kTwoPi) * normal::cdf(-b / a) * b * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
    }
    a /= 2.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      for (const double sign : {-1.0, 1.0}) {
        const double xs = (a * (sign * x[i] + 1.0)) * (a * (sign * x[i] + 1.0));
        const double rs = std::sqrt(1.0 - xs);
        asr = -(bs / xs + hk) / 2.0;
        if (asr > -100.0) {
          bvn += a * w[i] * std::exp(asr) *
                 (std::exp(-hk * xs / (2.0 * (1.0 + rs) * (1.0 + rs))) / rs - (1.0 + c * xs * (1.0 + d * xs)));
        }
      }
    }
    bvn = -bvn / kTwoPi;
  }
  if (r > 0.0) {
    return bvn + normal::sf(std::max(h, k));
  }
  bvn = -bvn;
  if (k > h) {
    bvn += h < 0.0 ? normal::cdf(k) - normal::cdf(h) : normal::sf(h) - normal::sf(k);
  }
  return bvn;
}

// P(lower <= X < upper) for a standard bivariate normal with correlation r,
// as the integral over x1 of phi(x1) times the conditional interval
// probability of x2. The integrand is log-concave with curvature at least 1,
// so a window of 9 units around its mode holds all but a 1e-18 fraction.
// Slower than inclusion-exclusion but keeps relative accuracy for tiny boxes.
double bvn_box_integral(double a1, double b1, double a2, double b2, double r) {
  const double s = std::sqrt((1.0 - r) * (1.0 + r));
  const auto log_g = [&](double x) {
    const double j = normal::interval((a2 - r * x) / s, (b2 - r * x) / s);
    return j > 0.0 ? normal::log_pdf(x) + std::log(j) : -kInf;
  };
  const double lo = std::max(a1, -40.0);
  const double hi = std::min(b1, 40.0);
  if (!(lo < hi)) {
    return 0.0;
  }
  const auto [mode, neg_peak] = boost::math::tools::brent_find_minima(
      [&](double x) {
        const double v = log_g(x);
        return std::isfinite(v) ? -v : std::numeric_limits<double>::max();
      },
      lo, hi, 20);
  const double peak = -neg_peak;
  if (!std::isfinite(peak)) {
    return 0.0;
  }
  // Shrink the window to where the integrand falls 41 log units below its
  // peak; sharp conditional tails make it far narrower than 9 units.
  const auto edge = [&](double inside, double outside) {
    if (log_g(outside) >= peak - 41.0) {
      return outside;
    }
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (inside + outside);
      (log_g(mid) >= peak - 41.0 ? inside : outside) = mid;
    }
    return outside;
  };
  const double from = mode > lo ? edge(mode, std::max(lo, mode - 9.0)) : mode;
  const double to = mode < hi ? edge(mode, std::min(hi, mode + 9.0)) : mode;
  const auto scaled = [&](double x) {
    const double v = log_g(x);
    return std::isfinite(v) ? std::exp(v - peak) : 0.0;
  };
  double total = 0.0;
  if (from < mode) {
    total += boost::math::quadrature::gauss_kronrod<double, 21>::integrate(scaled, from, mode, 6, 1e-9);
  }
  if (mode < to) {
    total += boost::math::quadrature::gauss_kronrod<double, 21>::integrate(scaled, mode, to, 6, 1e-9);
  }
  return total * std::exp(peak);
}

double bvn_box(double a1, double b1, double a2, double b2, double r) {
  // Reflect intervals lying below zero so small boxes are built from small
  // orthant terms.
  if (b1 <= 0.0) {
    std::tie(a1, b1) = std::pair{-b1, -a1};
    r = -r;
  }
  if (b2 <= 0.0) {
    std::tie(a2, b2) = std::pair{-b2, -a2};
    r = -r;
  }
  const std::array<double, 4> terms{bivariate_upper_orthant(a1, a2, r), bivariate_upper_orthant(a1, b2, r),
                                    bivariate_upper_orthant(b1, a2, r), bivariate_upper_orthant(b1, b2, r)};
  double p = terms[0] - terms[1] - terms[2] + terms[3];
  if (p < 1e-7 * terms[0] || p < 1e-10) {
    // Cancellation or a tail box below the absolute accuracy of the orthant
    // series: integrate along the coordinate with the narrower marginal
    // interval instead.
    p = normal::interval(a1, b1) <= normal::interval(a2, b2) ? bvn_box_integral(a1, b1, a2, b2, r)
                                                             : bvn_box_integral(a2, b2, a1, b1, r);
  }
  return std::clamp(p, 0.0, 1.0);
}

// Three dimensions: integrate the outer standardized coordinate against the
// exact bivariate box probability of the other two given it.
double trivariate_box(const GaussianComponent& shape, const Eigen::VectorXd& mean, const Cell& cell) {
  const auto& cov = shape.covariance();
  std::array<double, 3> lo{}, hi{}, sd{}, mass{};
  for (int i = 0; i < 3; ++i) {
    sd[i] = std::sqrt(cov(i, i));
    lo[i] = (cell.lower[i] - mean[i]) / sd[i];
    hi[i] = (cell.upper[i] - mean[i]) / sd[i];
    mass[i] = normal::interval(lo[i], hi[i]);
  }
  const int o = static_cast<int>(std::min_element(mass.begin(), mass.end()) - mass.begin());
  const int i = o == 0 ? 1 : 0;
  const int j = o == 2 ? 1 : 2;
  const auto corr = [&](int a, int b) { return cov(a, b) / (sd[a] * sd[b]); };
  const double roi = corr(o, i);
  const double roj = corr(o, j);
  const double si = std::sqrt(1.0 - roi * roi);
  const double sj = std::sqrt(1.0 - roj * roj);
  const double rho = std::clamp((corr(i, j) - roi * roj) / (si * sj), -1.0, 1.0);
  const double a = std::max(lo[o], -10.0);
  const double b = std::min(hi[o], 10.0);
  if (!(a < b)) {
    return 0.0;
  }
  std::vector<double> breaks{a};
  if (a < 0.0 && 0.0 < b) {
    breaks.push_back(0.0);
  }
  breaks.push_back(b);
  const auto integrand = [&](double t) {
    return normal::pdf(t) *
           bvn_box((lo[i] - roi * t) / si, (hi[i] - roi * t) / si, (lo[j] - roj * t) / sj, (hi[j] - roj * t) / sj, rho);
  };
  const auto result = integrate_1d(integrand, breaks, {1e-15, 1e-11, 500});
  return std::clamp(result.value, 0.0, 1.0);
}

constexpr std::array<double, 20> kPrimes{2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71};

struct StandardizedBox {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  Eigen::MatrixXd cholesky;
};

// Orders variables by increasing marginal interval probability, which keeps
// the Genz integrand flatter.
StandardizedBox reorder(const GaussianComponent& shape, const Eigen::VectorXd& mean, const Cell& cell) {
  const auto p = mean.size();
  const auto& cov = shape.covariance();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(p));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::vector<double> mass(static_cast<std::size_t>(p));
  for (Eigen::Index i = 0; i < p; ++i) {
    const double sd = std::sqrt(cov(i, i));
    mass[static_cast<std::size_t>(i)] = normal::interval((cell.lower[i] - mean[i]) / sd, (cell.upper[i] - mean[i]) / sd);
  }
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return mass[static_cast<std::size_t>(a)] < mass[static_cast<std::size_t>(b)];
  });
  StandardizedBox box{Eigen::VectorXd(p), Eigen::VectorXd(p), Eigen::MatrixXd(p, p)};
  Eigen::MatrixXd permuted(p, p);
  for (Eigen::Index a = 0; a < p; ++a) {
    box.lower[a] = cell.lower[order[a]] - mean[order[a]];
    box.upper[a] = cell.upper[order[a]] - mean[order[a]];
    for (Eigen::Index b = 0; b < p; ++b) {
      permuted(a, b) = cov(order[a], order[b]);
    }
  }
  Eigen::LLT<Eigen::MatrixXd> llt(permuted);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("box_probability: covariance is not positive definite");
  }
  box.cholesky = llt.matrixL();
  return box;
}

// Genz's separation-of-variables integrand on [0,1]^{p-1}.
double genz_integrand(const StandardizedBox& box, std::span<const double> w, std::span<double> y) {
  const auto p = box.lower.size();
  const auto& l = box.cholesky;
  double lo = box.lower[0] / l(0, 0);
  double hi = box.upper[0] / l(0, 0);
  double value = normal::interval(lo, hi);
  for (Eigen::Index i = 1; i < p && value > 0.0; ++i) {
    const double width = normal::interval(lo, hi);
    const double u = w[static_cast<std::size_t>(i - 1)];
    double yi = 0.0;
    if (lo > 0.0) {
      yi = normal::upper_quantile(normal::sf(lo) - u * width);
    } else {
      yi = normal::quantile(normal::cdf(lo) + u * width);
    }
    yi = std::clamp(yi, std::max(lo, -40.0), std::min(hi, 40.0));
    y[static_cast<std::size_t>(i - 1)] = yi;
    double shift = 0.0;
    for (Eigen::Index j = 0; j < i; ++j) {
      shift += l(i, j) * y[static_cast<std::size_t>(j)];
    }
    lo = (box.lower[i] - shift) / l(i, i);
    hi = (box.upper[i] - shift) / l(i, i);
    value *= normal::interval(lo, hi);
  }
  return value;
}

BoxEstimate qmc_box(const StandardizedBox& box, const BoxSettings& settings) {
  const auto p = box.lower.size();
  const auto dims = static_cast<std::size_t>(p - 1);
  if (dims > kPrimes.size()) {
    throw DomainError("box_probability: dimension too large for the lattice rule");
  }
  std::vector<double> generator(dims);
  for (std::size_t j = 0; j < dims; ++j) {
    generator[j] = std::fmod(std::sqrt(kPrimes[j]), 1.0);
  }
  const int shifts = std::max(2, settings.shifts);
  Rng rng{mix64(settings.seed)};
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> w(dims);
  std::vector<double> w_anti(dims);
  std::vector<double> y(dims);
  std::vector<double> shift(dims);
  std::size_t points = 256;
  std::size_t used = 0;
  BoxEstimate best{0.0, kInf};
  while (true) {
    double sum = 0.0;
    double sum_sq = 0.0;
    for (int s = 0; s < shifts; ++s) {
      for (auto& d : shift) {
        d = unif(rng);
      }
      double acc = 0.0;
      for (std::size_t k = 1; k <= points; ++k) {
        for (std::size_t j = 0; j < dims; ++j) {
          const double frac = std::fmod(static_cast<double>(k) * generator[j] + shift[j], 1.0);
          w[j] = std::abs(2.0 * frac - 1.0);
          w_anti[j] = 1.0 - w[j];
        }
        acc += 0.5 * (genz_integrand(box, w, y) + genz_integrand(box, w_anti, y));
      }
      const double estimate = acc / static_cast<double>(points);
      sum += estimate;
      sum_sq += estimate * estimate;
    }
    used += 2 * points * static_cast<std::size_t>(shifts);
    const double n = shifts;
    const double mean = sum / n;
    const double var = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0));
    best = {std::clamp(mean, 0.0, 1.0), std::sqrt(var / n)};
    if (best.std_error <= settings.accuracy) {
      return best;
    }
    points *= 2;
    if (used + 2 * points * static_cast<std::size_t>(shifts) > settings.max_points) {
      break;
    }
  }
  std::ostringstream msg;
  msg << "box_probability: std error " << best.std_error << " above requested accuracy " << settings.accuracy
      << " after " << used << " points";
  throw AccuracyError(msg.str(), best.std_error);
}

}  // namespace

double bivariate_upper_orthant(double h, double k, double r) {
  if (h == kInf || k == kInf) {
    return 0.0;
  }
  if (h == -kInf) {
    return k == -kInf ? 1.0 : normal::sf(k);
  }
  if (k == -kInf) {
    return normal::sf(h);
  }
  return std::clamp(bvn_upper_finite(h, k, r), 0.0, 1.0);
}

BoxEstimate box_probability(const GaussianComponent& comp, const Cell& cell, const BoxSettings& settings) {
  return box_probability(comp, comp.mean(), cell, settings);
}

BoxEstimate box_probability(const GaussianComponent& shape, const Eigen::VectorXd& mean, const Cell& cell,
                            const BoxSettings& settings) {
  const auto p = shape.dimension();
  if (cell.dimension() != p || mean.size() != p) {
    throw DomainError("box_probability: cell dimension does not match the component");
  }
  if (!(settings.accuracy > 0.0)) {
    throw DomainError("box_probability: accuracy must be positive");
  }
  if (p == 0) {
    return {1.0, 0.0};
  }
  for (Eigen::Index i = 0; i < p; ++i) {
    if (!(cell.lower[i] < cell.upper[i])) {
      return {0.0, 0.0};
    }
  }
  const auto& cov = shape.covariance();
  if (p == 1) {
    const double sd = std::sqrt(cov(0, 0));
    return {normal::interval((cell.lower[0] - mean[0]) / sd, (cell.upper[0] - mean[0]) / sd), 0.0};
  }
  if (p == 2 && settings.exact_low_dim) {
    const double s1 = std::sqrt(cov(0, 0));
    const double s2 = std::sqrt(cov(1, 1));
    const double r = std::clamp(cov(0, 1) / (s1 * s2), -1.0, 1.0);
    return {bvn_box((cell.lower[0] - mean[0]) / s1, (cell.upper[0] - mean[0]) / s1, (cell.lower[1] - mean[1]) / s2,
                    (cell.upper[1] - mean[1]) / s2, r),
            0.0};
  }
  if (p == 3 && settings.exact_low_dim) {
    return {trivariate_box(shape, mean, cell), 0.0};
  }
  return qmc_box(reorder(shape, mean, cell), settings);
}

}  // namespace mixscale
