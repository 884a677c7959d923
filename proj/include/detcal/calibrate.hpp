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
#include <variant>
#include <vector>

#include "detcal/core.hpp"

namespace detcal {

using FitMode = PredictionMode;

struct TemperatureParams {
  double temperature = 1.0;
};

struct PlattParams {
  double a = 1.0;
  double b = 0.0;
  bool converged = true;
  std::size_t iterations = 0;
};

/// Right-continuous step function: an input maps to the value of the largest
/// breakpoint not above it; inputs below the first breakpoint take the first
/// value.
struct IsotonicMap {
  std::vector<double> breakpoints;
  std::vector<double> values;
  FitMode fit_mode = FitMode::dominant;

  double operator()(double confidence) const;
};

struct HistogramMap {
  std::vector<double> outputs;
  FitMode fit_mode = FitMode::dominant;

  std::size_t num_bins() const { return outputs.size(); }
  double operator()(double confidence) const;
};

using Calibrator = std::variant<TemperatureParams, PlattParams, IsotonicMap, HistogramMap>;

std::string method_name(const Calibrator& calibrator);

// One (confidence, logit, target) sample used for fitting. `logit` is NaN
// when the record carries no logits.
struct FitPair {
  double confidence;
  double logit;
  bool positive;
};

// dominant: one pair per record (argmax entry, target = argmax is the label).
// full: C pairs per record (every entry, target = entry is the label).
std::vector<FitPair> fit_pairs(const Dataset& dataset, FitMode mode);

/// Temperature minimising the binary NLL of the dominant confidence against
/// dominant correctness, found by golden-section search on [0.05, 20].
TemperatureParams fit_temperature(const Dataset& dataset);
DetectionRecord apply_temperature(const TemperatureParams& params, const DetectionRecord& record,
                                  Activation activation);

/// Binary NLL of sigmoid(a*z + b) minimised by damped Newton from (1, 0).
/// Non-convergence is reported through `PlattParams::converged` with the
/// best parameters found.
PlattParams fit_platt(const Dataset& dataset, FitMode mode);
DetectionRecord apply_platt(const PlattParams& params, const DetectionRecord& record);

// Weighted pool-adjacent-violators on already-ordered targets. Returns the
// non-decreasing weighted least-squares fit, one value per input.
std::vector<double> pava(std::span<const double> targets, std::span<const double> weights);

// Isotonic fit of targets against confidences in input order; tied
// confidences are pooled before PAVA. Returns one fitted value per input.
std::vector<double> isotonic_fit_values(std::span<const double> confidences,
                                        std::span<const double> targets);

IsotonicMap fit_isotonic(const Dataset& dataset, FitMode mode);
IsotonicMap fit_isotonic(std::span<const FitPair> pairs, FitMode mode);
DetectionRecord apply_isotonic(const IsotonicMap& map, const DetectionRecord& record);

HistogramMap fit_histogram(const Dataset& dataset, std::size_t num_bins, FitMode mode);
DetectionRecord apply_histogram(const HistogramMap& map, const DetectionRecord& record);

// Applies the calibrator to every record; ids, labels and features are kept.
Dataset calibrate_dataset(const Dataset& dataset, const Calibrator& calibrator);

}  // namespace detcal
