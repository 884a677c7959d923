// Copyright 2026 The detcal Authors. All Rights Reserved.
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
// =============================================================================

#include "detcal/calibrate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace detcal {

namespace {

constexpr double kTemperatureLo = 0.05;
constexpr double kTemperatureHi = 20.0;
constexpr double kTemperatureTol = 1e-4;
constexpr double kPlattGradTol = 1e-8;
constexpr std::size_t kPlattMaxIter = 10000;

// log(1 + e^x) without overflow.
double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double log_sum_exp(std::span<const double> v, std::size_t skip = std::numeric_limits<std::size_t>::max()) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i != skip) m = std::max(m, v[i]);
  }
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i != skip) s += std::exp(v[i] - m);
  }
  return m + std::log(s);
}

const LogitVector& require_logits(const DetectionRecord& r) {
  if (!r.logits) throw Error(ErrorCode::missing_logits, "record '" + r.id + "' has no logits");
  return *r.logits;
}

void require_both_outcomes(std::span<const FitPair> pairs, const char* what) {
  bool any_pos = false, any_neg = false;
  for (const auto& p : pairs) (p.positive ? any_pos : any_neg) = true;
  if (!any_pos || !any_neg) {
    throw Error(ErrorCode::degenerate_labels,
                std::string(what) + " needs both positive and negative targets");
  }
}

struct DominantSample {
  std::vector<double> logits;
  std::size_t index;
  bool correct;
};

// Binary NLL of the dominant confidence after dividing logits by T.
double temperature_nll(std::span<const DominantSample> samples, Activation activation, double t) {
  double nll = 0.0;
  std::vector<double> scaled;
  for (const auto& s : samples) {
    double log_q, log_not_q;
    if (activation == Activation::sigmoid) {
      double z = s.logits[s.index] / t;
      log_q = -softplus(-z);
      log_not_q = -softplus(z);
    } else {
      scaled.resize(s.logits.size());
      for (std::size_t c = 0; c < scaled.size(); ++c) scaled[c] = s.logits[c] / t;
      double lse = log_sum_exp(scaled);
      log_q = scaled[s.index] - lse;
      log_not_q = log_sum_exp(scaled, s.index) - lse;
    }
    nll -= s.correct ? log_q : log_not_q;
  }
  return nll;
}

struct PlattState {
  double nll;
  double ga, gb;
  double haa, hab, hbb;
};

PlattState platt_state(std::span<const FitPair> pairs, double a, double b) {
  PlattState st{};
  for (const auto& p : pairs) {
    double s = a * p.logit + b;
    double y = p.positive ? 1.0 : 0.0;
    st.nll += softplus(s) - y * s;
    double q = sigmoid(s);
    double r = q - y;
    st.ga += r * p.logit;
    st.gb += r;
    double w = q * (1.0 - q);
    st.haa += w * p.logit * p.logit;
    st.hab += w * p.logit;
    st.hbb += w;
  }
  const double n = static_cast<double>(pairs.size());
  st.nll /= n;
  st.ga /= n;
  st.gb /= n;
  st.haa /= n;
  st.hab /= n;
  st.hbb /= n;
  return st;
}

DetectionRecord with_confidences(const DetectionRecord& r, std::vector<double> conf) {
  return DetectionRecord{r.id, std::nullopt, ConfidenceVector(std::move(conf)), r.label, r.features};
}

}  // namespace

double IsotonicMap::operator()(double confidence) const {
  auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), confidence);
  if (it == breakpoints.begin()) return values.front();
  return values[static_cast<std::size_t>(it - breakpoints.begin()) - 1];
}

double HistogramMap::operator()(double confidence) const {
  return outputs[bin_coordinate({"confidence", outputs.size(), 0.0, 1.0}, confidence)];
}

std::string method_name(const Calibrator& calibrator) {
  struct Visitor {
    std::string operator()(const TemperatureParams&) const { return "temperature"; }
    std::string operator()(const PlattParams&) const { return "platt"; }
    std::string operator()(const IsotonicMap&) const { return "isotonic"; }
    std::string operator()(const HistogramMap&) const { return "histogram"; }
  };
  return std::visit(Visitor{}, calibrator);
}

std::vector<FitPair> fit_pairs(const Dataset& dataset, FitMode mode) {
  std::vector<FitPair> pairs;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  pairs.reserve(mode == FitMode::dominant ? dataset.size() : dataset.size() * dataset.num_classes());
  for (const auto& r : dataset.records()) {
    if (mode == FitMode::dominant) {
      auto dom = dominant(r.confidences);
      pairs.push_back({dom.confidence, r.logits ? (*r.logits)[dom.class_index] : nan,
                       dom.class_index == r.label});
    } else {
      for (std::size_t c = 0; c < r.confidences.size(); ++c) {
        pairs.push_back({r.confidences[c], r.logits ? (*r.logits)[c] : nan, c == r.label});
      }
    }
  }
  return pairs;
}

TemperatureParams fit_temperature(const Dataset& dataset) {
  if (dataset.size() < 2) throw Error(ErrorCode::invalid_argument, "temperature fit needs >= 2 records");
  std::vector<DominantSample> samples;
  samples.reserve(dataset.size());
  std::size_t correct = 0;
  for (const auto& r : dataset.records()) {
    const auto& z = require_logits(r);
    auto dom = dominant(r.confidences);
    samples.push_back({{z.values().begin(), z.values().end()}, dom.class_index, dom.class_index == r.label});
    correct += dom.class_index == r.label ? 1 : 0;
  }
  if (correct == 0 || correct == dataset.size()) {
    throw Error(ErrorCode::degenerate_labels,
                "temperature fit needs both correct and incorrect dominant predictions");
  }

  const Activation act = dataset.activation();
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = kTemperatureLo, hi = kTemperatureHi;
  double x1 = hi - inv_phi * (hi - lo);
  double x2 = lo + inv_phi * (hi - lo);
  double f1 = temperature_nll(samples, act, x1);
  double f2 = temperature_nll(samples, act, x2);
  while (hi - lo > kTemperatureTol) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - inv_phi * (hi - lo);
      f1 = temperature_nll(samples, act, x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + inv_phi * (hi - lo);
      f2 = temperature_nll(samples, act, x2);
    }
  }
  return {0.5 * (lo + hi)};
}

DetectionRecord apply_temperature(const TemperatureParams& params, const DetectionRecord& record,
                                  Activation activation) {
  if (!(params.temperature > 0.0)) throw Error(ErrorCode::invalid_argument, "temperature must be > 0");
  const auto& z = require_logits(record);
  std::vector<double> scaled(z.values().begin(), z.values().end());
  for (double& v : scaled) v /= params.temperature;
  LogitVector logits(std::move(scaled));
  auto conf = activate(logits, activation);
  return DetectionRecord{record.id, std::move(logits), std::move(conf), record.label, record.features};
}

PlattParams fit_platt(const Dataset& dataset, FitMode mode) {
  for (const auto& r : dataset.records()) require_logits(r);
  auto pairs = fit_pairs(dataset, mode);
  if (pairs.size() < 2) throw Error(ErrorCode::invalid_argument, "Platt fit needs >= 2 pairs");
  require_both_outcomes(pairs, "Platt fit");

  PlattParams best{1.0, 0.0, false, 0};
  auto st = platt_state(pairs, best.a, best.b);
  for (std::size_t it = 0; it < kPlattMaxIter; ++it) {
    best.iterations = it;
    if (std::hypot(st.ga, st.gb) < kPlattGradTol) {
      best.converged = true;
      return best;
    }
    // Newton direction when the Hessian is positive definite, else steepest descent.
    double da = -st.ga, db = -st.gb;
    const double det = st.haa * st.hbb - st.hab * st.hab;
    if (st.haa > 0.0 && det > 1e-300) {
      da = -(st.hbb * st.ga - st.hab * st.gb) / det;
      db = -(st.haa * st.gb - st.hab * st.ga) / det;
    }
    double step = 1.0;
    bool moved = false;
    for (int k = 0; k < 60; ++k, step *= 0.5) {
      double a = best.a + step * da;
      double b = best.b + step * db;
      auto trial = platt_state(pairs, a, b);
      if (std::isfinite(trial.nll) && trial.nll <= st.nll + 1e-15 * std::abs(st.nll)) {
        best.a = a;
        best.b = b;
        st = trial;
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  best.converged = std::hypot(st.ga, st.gb) < kPlattGradTol;
  return best;
}

DetectionRecord apply_platt(const PlattParams& params, const DetectionRecord& record) {
  const auto& z = require_logits(record);
  std::vector<double> scaled(z.size());
  for (std::size_t c = 0; c < z.size(); ++c) scaled[c] = params.a * z[c] + params.b;
  LogitVector logits(std::move(scaled));
  auto conf = sigmoid_activate(logits);
  return DetectionRecord{record.id, std::move(logits), std::move(conf), record.label, record.features};
}

std::vector<double> pava(std::span<const double> targets, std::span<const double> weights) {
  if (targets.size() != weights.size()) {
    throw Error(ErrorCode::dimension_mismatch, "pava: targets and weights differ in length");
  }
  struct Block {
    double weighted_sum;
    double weight;
    std::size_t size;
    double mean() const { return weighted_sum / weight; }
  };
  std::vector<Block> blocks;
  blocks.reserve(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    blocks.push_back({targets[i] * weights[i], weights[i], 1});
    while (blocks.size() > 1 && blocks[blocks.size() - 2].mean() > blocks.back().mean()) {
      Block last = blocks.back();
      blocks.pop_back();
      blocks.back().weighted_sum += last.weighted_sum;
      blocks.back().weight += last.weight;
      blocks.back().size += last.size;
    }
  }
  std::vector<double> out;
  out.reserve(targets.size());
  for (const auto& b : blocks) out.insert(out.end(), b.size, b.mean());
  return out;
}

namespace {

struct TieGroup {
  double confidence;
  double target_sum;
  double weight;
};

// Sorts by confidence and pools exact ties; `order` receives the sort
// permutation and `group_of` the group of each sorted position.
std::vector<TieGroup> group_ties(std::span<const double> confidences, std::span<const double> targets,
                                 std::vector<std::size_t>& order, std::vector<std::size_t>& group_of) {
  order.resize(confidences.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return confidences[a] < confidences[b]; });
  std::vector<TieGroup> groups;
  group_of.resize(order.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    double c = confidences[order[k]];
    if (groups.empty() || groups.back().confidence != c) groups.push_back({c, 0.0, 0.0});
    groups.back().target_sum += targets[order[k]];
    groups.back().weight += 1.0;
    group_of[k] = groups.size() - 1;
  }
  return groups;
}

std::vector<double> fit_groups(const std::vector<TieGroup>& groups) {
  std::vector<double> means(groups.size()), weights(groups.size());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    means[g] = groups[g].target_sum / groups[g].weight;
    weights[g] = groups[g].weight;
  }
  return pava(means, weights);
}

}  // namespace

std::vector<double> isotonic_fit_values(std::span<const double> confidences,
                                        std::span<const double> targets) {
  if (confidences.size() != targets.size()) {
    throw Error(ErrorCode::dimension_mismatch, "isotonic fit: confidences and targets differ in length");
  }
  std::vector<std::size_t> order, group_of;
  auto groups = group_ties(confidences, targets, order, group_of);
  auto fitted = fit_groups(groups);
  std::vector<double> out(confidences.size());
  for (std::size_t k = 0; k < order.size(); ++k) out[order[k]] = fitted[group_of[k]];
  return out;
}

IsotonicMap fit_isotonic(std::span<const FitPair> pairs, FitMode mode) {
  if (pairs.size() < 2) throw Error(ErrorCode::invalid_argument, "isotonic fit needs >= 2 pairs");
  std::vector<double> conf(pairs.size()), target(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    conf[i] = pairs[i].confidence;
    target[i] = pairs[i].positive ? 1.0 : 0.0;
  }
  std::vector<std::size_t> order, group_of;
  auto groups = group_ties(conf, target, order, group_of);
  auto fitted = fit_groups(groups);

  IsotonicMap map;
  map.fit_mode = mode;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (!map.values.empty() && map.values.back() == fitted[g]) continue;
    map.breakpoints.push_back(groups[g].confidence);
    map.values.push_back(fitted[g]);
  }
  return map;
}

IsotonicMap fit_isotonic(const Dataset& dataset, FitMode mode) {
  auto pairs = fit_pairs(dataset, mode);
  return fit_isotonic(pairs, mode);
}

DetectionRecord apply_isotonic(const IsotonicMap& map, const DetectionRecord& record) {
  if (map.breakpoints.empty() || map.breakpoints.size() != map.values.size()) {
    throw Error(ErrorCode::invalid_argument, "isotonic map is empty or inconsistent");
  }
  std::vector<double> conf(record.confidences.size());
  for (std::size_t c = 0; c < conf.size(); ++c) conf[c] = map(record.confidences[c]);
  return with_confidences(record, std::move(conf));
}

HistogramMap fit_histogram(const Dataset& dataset, std::size_t num_bins, FitMode mode) {
  if (dataset.empty()) throw Error(ErrorCode::empty_dataset, "histogram fit on an empty dataset");
  if (num_bins < 1) throw Error(ErrorCode::invalid_argument, "histogram binning needs >= 1 bin");
  const BinDimension dim{"confidence", num_bins, 0.0, 1.0};
  std::vector<std::size_t> count(num_bins, 0), positive(num_bins, 0);
  for (const auto& p : fit_pairs(dataset, mode)) {
    auto b = bin_coordinate(dim, p.confidence);
    count[b] += 1;
    positive[b] += p.positive ? 1 : 0;
  }
  HistogramMap map;
  map.fit_mode = mode;
  map.outputs.resize(num_bins);
  for (std::size_t b = 0; b < num_bins; ++b) {
    map.outputs[b] = count[b] == 0
                         ? (static_cast<double>(b) + 0.5) / static_cast<double>(num_bins)
                         : static_cast<double>(positive[b]) / static_cast<double>(count[b]);
  }
  return map;
}

DetectionRecord apply_histogram(const HistogramMap& map, const DetectionRecord& record) {
  if (map.outputs.empty()) throw Error(ErrorCode::invalid_argument, "histogram map has no bins");
  std::vector<double> conf(record.confidences.size());
  for (std::size_t c = 0; c < conf.size(); ++c) conf[c] = map(record.confidences[c]);
  return with_confidences(record, std::move(conf));
}

Dataset calibrate_dataset(const Dataset& dataset, const Calibrator& calibrator) {
  const bool platt = std::holds_alternative<PlattParams>(calibrator);
  Dataset out = dataset.empty_like(platt ? Activation::sigmoid : dataset.activation());
  out.reserve(dataset.size());
  for (const auto& r : dataset.records()) {
    if (auto* t = std::get_if<TemperatureParams>(&calibrator)) {
      out.add(apply_temperature(*t, r, dataset.activation()));
    } else if (auto* p = std::get_if<PlattParams>(&calibrator)) {
      out.add(apply_platt(*p, r));
    } else if (auto* iso = std::get_if<IsotonicMap>(&calibrator)) {
      out.add(apply_isotonic(*iso, r));
    } else {
      out.add(apply_histogram(std::get<HistogramMap>(calibrator), r));
    }
  }
  return out;
}

}  // namespace detcal
