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

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "detcal/core.hpp"

namespace detcal {

/// How labels are drawn given the confidence vector.
///
/// sigmoid_bernoulli: confidences are per-class sigmoids; the dominant
/// prediction is correct with probability equal to its confidence, otherwise
/// the label is drawn from the other classes in proportion to their
/// confidences. Calibrated for the dominant prediction only.
///
/// softmax_categorical: confidences are a softmax; the label is drawn from
/// the categorical distribution they define. Calibrated for every class.
enum class LabelSampling { sigmoid_bernoulli, softmax_categorical };

const char* to_string(LabelSampling s);
LabelSampling parse_label_sampling(const std::string& s);

struct FeatureRange {
  std::string name;
  double lo;
  double hi;
};

struct SynthConfig {
  std::size_t n = 1000;
  std::size_t num_classes = 3;
  std::uint64_t seed = 0;
  double logit_scale = 2.0;
  LabelSampling sampling = LabelSampling::softmax_categorical;
  std::vector<FeatureRange> features;
  // Added to every record's logits; empty means no offset.
  std::vector<double> class_bias;

  void validate() const;
};

/// Generates `config.n` records with the following draw order per record,
/// all from one Rng seeded with `config.seed`:
///   1. C logits, z_c = logit_scale * normal() + class_bias[c]
///   2. one uniform per feature, lo + (hi - lo) * uniform()
///   3. one uniform u for the label; sigmoid_bernoulli draws a second
///      uniform only when the dominant prediction is judged incorrect.
Dataset generate_calibrated(const SynthConfig& config);

struct TemperatureDistortion {
  double temperature;  // z -> z * temperature
};
struct AffineDistortion {
  double a;
  double b;  // z -> a * z + b
};
struct SharpenDistortion {
  double kappa;  // p -> p^(1/kappa), renormalised for softmax datasets
};
using Distortion = std::variant<TemperatureDistortion, AffineDistortion, SharpenDistortion>;

// Labels, ids and features are untouched. Sharpening drops logits.
Dataset distort(const Dataset& dataset, const Distortion& distortion);

}  // namespace detcal
