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

#include "mixscale/latent_mixture.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "mixscale/errors.hpp"

namespace mixscale {

LatentMixture::LatentMixture(std::vector<double> weights, std::vector<GaussianComponent> components)
    : weights_(std::move(weights)), components_(std::move(components)) {
  if (weights_.empty() || weights_.size() != components_.size()) {
    throw DomainError("mixture needs one weight per component and at least one component");
  }
  const auto p = components_.front().dimension();
  for (const auto& c : components_) {
    if (c.dimension() != p) {
      throw DomainError("mixture components have different dimensions");
    }
  }
  double total = 0.0;
  for (const double w : weights_) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw DomainError("mixture weights must be finite and nonnegative");
    }
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    std::ostringstream msg;
    msg << "mixture weights sum to " << total << ", expected 1";
    throw DomainError(msg.str());
  }
  for (auto& w : weights_) {
    w /= total;
  }
}

LatentMixture LatentMixture::single(GaussianComponent component) {
  return LatentMixture({1.0}, {std::move(component)});
}

double LatentMixture::log_density(const Eigen::VectorXd& x) const {
  if (x.size() != dimension()) {
    throw DomainError("latent log_density: dimension mismatch");
  }
  double peak = -std::numeric_limits<double>::infinity();
  std::vector<double> terms(size());
  for (std::size_t k = 0; k < size(); ++k) {
    terms[k] = weights_[k] > 0.0 ? std::log(weights_[k]) + components_[k].log_density(x)
                                 : -std::numeric_limits<double>::infinity();
    peak = std::max(peak, terms[k]);
  }
  if (!std::isfinite(peak)) {
    return peak;
  }
  double acc = 0.0;
  for (const double t : terms) {
    acc += std::exp(t - peak);
  }
  return peak + std::log(acc);
}

Eigen::VectorXd LatentMixture::sample(Rng& rng) const {
  std::size_t k = 0;
  if (size() > 1) {
    std::discrete_distribution<std::size_t> pick(weights_.begin(), weights_.end());
    k = pick(rng);
  }
  return components_[k].sample(rng);
}

std::vector<Eigen::VectorXd> LatentMixture::sample(std::size_t n, Rng& rng) const {
  std::vector<Eigen::VectorXd> out;
  out.reserve(n);
  std::discrete_distribution<std::size_t> pick(weights_.begin(), weights_.end());
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(components_[size() > 1 ? pick(rng) : 0].sample(rng));
  }
  return out;
}

Eigen::VectorXd LatentMixture::mean() const {
  Eigen::VectorXd m = Eigen::VectorXd::Zero(dimension());
  for (std::size_t k = 0; k < size(); ++k) {
    m += weights_[k] * components_[k].mean();
  }
  return m;
}

Eigen::MatrixXd LatentMixture::covariance() const {
  const Eigen::VectorXd m = mean();
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(dimension(), dimension());
  for (std::size_t k = 0; k < size(); ++k) {
    const Eigen::VectorXd d = components_[k].mean() - m;
    s += weights_[k] * (components_[k].covariance() + d * d.transpose());
  }
  return s;
}

LatentMixture flatten(const std::vector<LatentMixture>& mixtures) {
  if (mixtures.empty()) {
    throw DomainError("flatten: no mixtures");
  }
  std::vector<double> weights;
  std::vector<GaussianComponent> components;
  const double share = 1.0 / static_cast<double>(mixtures.size());
  for (const auto& m : mixtures) {
    for (std::size_t k = 0; k < m.size(); ++k) {
      weights.push_back(m.weights()[k] * share);
      components.push_back(m.component(k));
    }
  }
  return {std::move(weights), std::move(components)};
}

namespace {

void append_number(std::string& out, double value) {
  std::array<char, 32> buf{};
  const auto result = std::to_chars(buf.data(), buf.data() + buf.size(), value, std::chars_format::general, 17);
  out.push_back(' ');
  out.append(buf.data(), result.ptr);
}

class Tokens {
 public:
  explicit Tokens(std::string_view text) : text_(text) {}

  template <class T>
  T next() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t' || text_[pos_] == '\r')) {
      ++pos_;
    }
    if (pos_ >= text_.size()) {
      throw DomainError("mixture line ends early");
    }
    T value{};
    const auto* first = text_.data() + pos_;
    const auto* last = text_.data() + text_.size();
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{}) {
      throw DomainError("mixture line has a malformed number near '" + std::string(first, std::min<std::size_t>(16, last - first)) + "'");
    }
    pos_ = static_cast<std::size_t>(ptr - text_.data());
    return value;
  }

  [[nodiscard]] bool exhausted() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_])) != 0) {
      ++pos_;
    }
    return pos_ >= text_.size();
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize(const LatentMixture& mixture) {
  const auto p = mixture.dimension();
  std::string out = std::to_string(mixture.size()) + " " + std::to_string(p);
  for (std::size_t k = 0; k < mixture.size(); ++k) {
    append_number(out, mixture.weights()[k]);
    const auto& c = mixture.component(k);
    for (Eigen::Index i = 0; i < p; ++i) {
      append_number(out, c.mean()[i]);
    }
    for (Eigen::Index i = 0; i < p; ++i) {
      for (Eigen::Index j = 0; j < p; ++j) {
        append_number(out, c.covariance()(i, j));
      }
    }
  }
  return out;
}

LatentMixture parse_mixture(std::string_view line) {
  Tokens tokens(line);
  const auto k = tokens.next<long long>();
  const auto p = tokens.next<long long>();
  if (k < 1 || p < 1 || p > 1000) {
    throw DomainError("mixture line has an invalid header");
  }
  std::vector<double> weights;
  std::vector<GaussianComponent> components;
  for (long long c = 0; c < k; ++c) {
    weights.push_back(tokens.next<double>());
    Eigen::VectorXd mean(p);
    Eigen::MatrixXd cov(p, p);
    for (Eigen::Index i = 0; i < p; ++i) {
      mean[i] = tokens.next<double>();
    }
    for (Eigen::Index i = 0; i < p; ++i) {
      for (Eigen::Index j = 0; j < p; ++j) {
        cov(i, j) = tokens.next<double>();
      }
    }
    try {
      components.emplace_back(std::move(mean), std::move(cov));
    } catch (const NumericalError& e) {
      throw DomainError(std::string("mixture component ") + std::to_string(c) + ": " + e.what());
    }
  }
  if (!tokens.exhausted()) {
    throw DomainError("mixture line has trailing content");
  }
  return {std::move(weights), std::move(components)};
}

std::vector<LatentMixture> read_mixtures(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw DomainError("cannot open mixture file " + path);
  }
  std::vector<LatentMixture> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line.front() == '#') {
      continue;
    }
    try {
      out.push_back(parse_mixture(line));
    } catch (const DomainError& e) {
      throw DomainError(path + ":" + std::to_string(number) + ": " + e.what());
    }
  }
  return out;
}

void write_mixtures(const std::string& path, const std::vector<LatentMixture>& mixtures) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw DomainError("cannot write mixture file " + path);
  }
  for (const auto& m : mixtures) {
    out << serialize(m) << '\n';
  }
}

}  // namespace mixscale
