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

#include <string>
#include <vector>

#include "detcal/core.hpp"

namespace detcal::testing {

inline DetectionRecord rec(std::vector<double> conf, std::size_t label, std::vector<double> features = {},
                           std::string id = "r") {
  return {std::move(id), std::nullopt, ConfidenceVector(std::move(conf)), label, std::move(features)};
}

inline DetectionRecord rec_logits(std::vector<double> z, std::size_t label, Activation act = Activation::sigmoid,
                                  std::string id = "r") {
  LogitVector logits(std::move(z));
  auto conf = activate(logits, act);
  return {std::move(id), std::move(logits), std::move(conf), label, {}};
}

inline Dataset make_dataset(std::size_t classes, std::vector<DetectionRecord> records,
                            std::vector<std::string> feature_names = {},
                            Activation act = Activation::sigmoid) {
  Dataset d(classes, act, {}, std::move(feature_names));
  for (auto& r : records) d.add(std::move(r));
  return d;
}

// Random dataset with confidences uniform on [0,1] (no logits).
inline Dataset random_dataset(Rng& rng, std::size_t n, std::size_t classes, std::size_t feature_dims = 0,
                              double feature_hi = 1.0) {
  Dataset d(classes);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> conf(classes), feats(feature_dims);
    for (auto& c : conf) c = rng.uniform();
    for (auto& f : feats) f = feature_hi * rng.uniform();
    d.add(rec(std::move(conf), rng.below(classes), std::move(feats), "r" + std::to_string(i)));
  }
  return d;
}

}  // namespace detcal::testing
