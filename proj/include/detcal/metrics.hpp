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
#include <optional>
#include <string>
#include <vector>

#include "detcal/core.hpp"

namespace detcal {

inline constexpr std::size_t kEvalBins = 25;
inline constexpr std::size_t kTrainBins = 15;

enum class MetricKind { ece, d_ece, full_d_ece };

// Normaliser of Full D-ECE: all C*N confidence entries, or the N detections.
enum class Denominator { predictions, detections };

const char* to_string(MetricKind k);
const char* display_name(MetricKind k);
const char* to_string(Denominator d);
MetricKind parse_metric_kind(const std::string& s);
Denominator parse_denominator(const std::string& s);

/// A metric value together with the per-bin statistics it was computed from.
///
/// `bins` holds every bin of `scheme` in flat-index order, empty ones
/// included. `total_count` is the normaliser: N for ECE/D-ECE, C*N or N for
/// Full D-ECE depending on `denominator`. Except for the detections
/// denominator, the bin counts sum to `total_count`.
struct MetricReport {
  MetricKind metric;
  double value = 0.0;
  std::size_t total_count = 0;
  std::optional<Denominator> denominator = std::nullopt;
  std::vector<BinStats> bins = {};
  BinningScheme scheme = BinningScheme::confidence_only(1);

  // sum_b |positive_count_b - confidence_sum_b| / total_count
  double recompute() const;
};

MetricReport compute_ece(const Dataset& dataset, std::size_t num_bins = kEvalBins);
MetricReport compute_ece(const BatchView& batch, std::size_t num_bins = kEvalBins);

MetricReport compute_d_ece(const Dataset& dataset, const BinningScheme& scheme);
MetricReport compute_d_ece(const BatchView& batch, const BinningScheme& scheme);

MetricReport compute_full_d_ece(const Dataset& dataset, std::size_t num_bins = kEvalBins,
                                Denominator denominator = Denominator::predictions);
MetricReport compute_full_d_ece(const BatchView& batch, std::size_t num_bins = kEvalBins,
                                Denominator denominator = Denominator::predictions);

struct ReliabilityPoint {
  double bin_center;
  double empirical;
  double mean_confidence;
  std::size_t count;
};

// One point per non-empty confidence bin.
std::vector<ReliabilityPoint> reliability_data(const Dataset& dataset, std::size_t num_bins,
                                               PredictionMode mode);

}  // namespace detcal
