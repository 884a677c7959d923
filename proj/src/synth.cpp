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

#include "detcal/synth.hpp"

#include <cmath>

namespace detcal {

namespace {

// Index whose cumulative weight first exceeds `target`; falls back to the
// last admissible index when rounding leaves the target uncovered.
std::size_t pick_cumulative(std::span<const double> weights, double target, std::size_t skip) {
  double acc = 0.0;
  std::size_t last = skip == 0 ? 1 : 0;
  for (std::size_t c = 0; c < weights.size(); ++c) {
    if (c == skip) continue;
    last = c;
    acc += weights[c];
    if (target < acc) return c;
  }
  return last;
}

constexpr std::size_t kNoSkip = static_cast<std::size_t>(-1);

}  // namespace

const char* to_string(LabelSampling s) {
  return s == LabelSampling::sigmoid_bernoulli ? "sigmoid_bernoulli" : "softmax_categorical";
}

LabelSampling parse_label_sampling(const std::string& s) {
  if (s == "sigmoid_bernoulli" || s == "sigmoid") return LabelSampling::sigmoid_bernoulli;
  if (s == "softmax_categorical" || s == "softmax") return LabelSampling::softmax_categorical;
  throw Error(ErrorCode::invalid_argument, "unknown label sampling '" + s + "'");
}

void SynthConfig::validate() const {
  if (n < 1) throw Error(ErrorCode::invalid_argument, "synth: n must be >= 1");
  if (num_classes < 2) throw Error(ErrorCode::invalid_argument, "synth: need >= 2 classes");
  if (!(logit_scale > 0.0) || !std::isfinite(logit_scale)) {
    throw Error(ErrorCode::invalid_argument, "synth: logit_scale must be > 0");
  }
  if (!class_bias.empty() && class_bias.size() != num_classes) {
    throw Error(ErrorCode::dimension_mismatch, "synth: class_bias length differs from num_classes");
  }
  for (const auto& f : features) {
    if (!(f.lo < f.hi)) throw Error(ErrorCode::invalid_argument, "synth: feature '" + f.name + "' needs lo < hi");
  }
}

Dataset generate_calibrated(const SynthConfig& config) {
  config.validate();
  const std::size_t C = config.num_classes;
  const Activation act = config.sampling == LabelSampling::sigmoid_bernoulli ? Activation::sigmoid
                                                                            : Activation::softmax;
  std::vector<std::string> feature_names;
  for (const auto& f : config.features) feature_names.push_back(f.name);
  Dataset out(C, act, {}, feature_names);
  out.reserve(config.n);

  Rng rng(config.seed);
  for (std::size_t i = 0; i < config.n; ++i) {
    std::vector<double> z(C);
    for (std::size_t c = 0; c < C; ++c) {
      z[c] = config.logit_scale * rng.normal() + (config.class_bias.empty() ? 0.0 : config.class_bias[c]);
    }
    std::vector<double> features(config.features.size());
    for (std::size_t k = 0; k < features.size(); ++k) {
      const auto& f = config.features[k];
      features[k] = f.lo + (f.hi - f.lo) * rng.uniform();
    }
    LogitVector logits(std::move(z));
    ConfidenceVector conf = activate(logits, act);

    std::size_t label;
    const double u = rng.uniform();
    if (config.sampling == LabelSampling::softmax_categorical) {
      label = pick_cumulative(conf.values(), u, kNoSkip);
    } else {
      auto dom = dominant(conf);
      if (u < dom.confidence) {
        label = dom.class_index;
      } else {
        double others = 0.0;
        for (std::size_t c = 0; c < C; ++c) {
          if (c != dom.class_index) others += conf[c];
        }
        label = pick_cumulative(conf.values(), rng.uniform() * others, dom.class_index);
      }
    }
    out.add({"syn" + std::to_string(i), std::move(logits), std::move(conf), label, std::move(features)});
  }
  return out;
}

Dataset distort(const Dataset& dataset, const Distortion& distortion) {
  if (auto* s = std::get_if<SharpenDistortion>(&distortion)) {
    if (!(s->kappa > 0.0)) throw Error(ErrorCode::invalid_argument, "sharpen: kappa must be > 0");
    Dataset out = dataset.empty_like();
    out.reserve(dataset.size());
    for (const auto& r : dataset.records()) {
      std::vector<double> p(r.confidences.size());
      double sum = 0.0;
      for (std::size_t c = 0; c < p.size(); ++c) {
        p[c] = std::pow(r.confidences[c], 1.0 / s->kappa);
        sum += p[c];
      }
      if (dataset.activation() == Activation::softmax && sum > 0.0) {
        for (double& v : p) v /= sum;
      }
      out.add({r.id, std::nullopt, ConfidenceVector(std::move(p)), r.label, r.features});
    }
    return out;
  }

  double a = 1.0, b = 0.0;
  if (auto* t = std::get_if<TemperatureDistortion>(&distortion)) {
    if (!(t->temperature > 0.0)) throw Error(ErrorCode::invalid_argument, "temperature distortion must be > 0");
    a = t->temperature;
  } else {
    const auto& aff = std::get<AffineDistortion>(distortion);
    a = aff.a;
    b = aff.b;
  }
  Dataset out = dataset.empty_like();
  out.reserve(dataset.size());
  for (const auto& r : dataset.records()) {
    if (!r.logits) throw Error(ErrorCode::missing_logits, "record '" + r.id + "' has no logits to distort");
    std::vector<double> z(r.logits->size());
    for (std::size_t c = 0; c < z.size(); ++c) z[c] = a * (*r.logits)[c] + b;
    LogitVector logits(std::move(z));
    auto conf = activate(logits, dataset.activation());
    out.add({r.id, std::move(logits), std::move(conf), r.label, r.features});
  }
  return out;
}

}  // namespace detcal
