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
#include <span>
#include <string>
#include <vector>

#include "detcal/core.hpp"
#include "detcal/metrics.hpp"

namespace detcal {

enum class BaseLoss { focal, cross_entropy };
enum class AuxLoss { none, dece, full_dece };

const char* to_string(AuxLoss a);
AuxLoss parse_aux_loss(const std::string& s);

/// L = L_base + alpha * L_aux.
///
/// focal: per-class binary focal loss with exponent `gamma`, averaged over
/// records. cross_entropy: categorical -log p_label, averaged over records.
struct LossConfig {
  BaseLoss base = BaseLoss::focal;
  double gamma = 2.0;
  AuxLoss aux = AuxLoss::none;
  double alpha = 1.0;
  std::size_t train_bins = kTrainBins;
  Denominator denominator = Denominator::predictions;

  void validate() const;
};

struct ScalarWithGradient {
  double value;
  std::vector<double> gradient;
};

// Inputs are clamped to [1e-7, 1 - 1e-7] before the log.
ScalarWithGradient focal_loss(std::span<const double> confidences, std::size_t label, double gamma);
inline ScalarWithGradient focal_loss(const ConfidenceVector& conf, std::size_t label, double gamma) {
  return focal_loss(conf.values(), label, gamma);
}

struct AuxTerm {
  double value;
  Matrix gradient;  // N x C, d value / d confidence
};

// Binned calibration losses with straight-through gradients: bin membership
// and per-bin positive counts are held constant, so each entry that takes
// part receives sign(confidence_sum_b - positive_count_b) / denominator.
// sign(0) is 0.
AuxTerm aux_dece(const BatchView& batch, std::size_t num_bins = kTrainBins);
AuxTerm aux_dece(const Dataset& batch, std::size_t num_bins = kTrainBins);
AuxTerm aux_full_dece(const BatchView& batch, std::size_t num_bins = kTrainBins,
                      Denominator denominator = Denominator::predictions);
AuxTerm aux_full_dece(const Dataset& batch, std::size_t num_bins = kTrainBins,
                      Denominator denominator = Denominator::predictions);

struct LossValue {
  double total;
  double base_part;
  double aux_part;  // unweighted; total = base_part + alpha * aux_part
  Matrix grad_confidences;
};

LossValue combined_loss(const BatchView& batch, const LossConfig& config);
LossValue combined_loss(const Dataset& batch, const LossConfig& config);

}  // namespace detcal
