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

#include "detcal/metrics.hpp"

#include <cmath>

namespace detcal {

namespace {

void require_non_empty(std::size_t n) {
  if (n == 0) throw Error(ErrorCode::empty_dataset, "metric requested on an empty dataset");
}

MetricReport make_report(MetricKind kind, const BinningScheme& scheme) {
  MetricReport report{.metric = kind, .scheme = scheme};
  report.bins.resize(scheme.total_bins());
  for (std::size_t b = 0; b < report.bins.size(); ++b) report.bins[b].bin_index = scheme.unflatten(b);
  return report;
}

void finish(MetricReport& report, std::size_t denominator) {
  report.total_count = denominator;
  report.value = report.recompute();
}

// Dominant-prediction binning shared by ECE and D-ECE.
MetricReport dominant_metric(const BatchView& batch, const BinningScheme& scheme, MetricKind kind) {
  require_non_empty(batch.size());
  if (scheme.feature_dimensions() != batch.feature_dims && scheme.feature_dimensions() != 0) {
    throw Error(ErrorCode::dimension_mismatch,
                "binning scheme has " + std::to_string(scheme.feature_dimensions()) +
                    " feature dimensions, records have " + std::to_string(batch.feature_dims));
  }
  const bool use_features = scheme.feature_dimensions() > 0;
  MetricReport report = make_report(kind, scheme);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    auto dom = dominant(batch.row(i));
    std::size_t b = use_features ? scheme.flat_index(dom.confidence, batch.feature_row(i))
                                 : bin_coordinate(scheme.dims()[0], dom.confidence);
    auto& bin = report.bins[b];
    bin.count += 1;
    bin.positive_count += dom.class_index == batch.labels[i] ? 1 : 0;
    bin.confidence_sum += dom.confidence;
  }
  finish(report, batch.size());
  return report;
}

}  // namespace

const char* to_string(MetricKind k) {
  switch (k) {
    case MetricKind::ece: return "ece";
    case MetricKind::d_ece: return "d_ece";
    case MetricKind::full_d_ece: return "full_d_ece";
  }
  return "?";
}

const char* display_name(MetricKind k) {
  switch (k) {
    case MetricKind::ece: return "ECE";
    case MetricKind::d_ece: return "D-ECE";
    case MetricKind::full_d_ece: return "Full D-ECE";
  }
  return "?";
}

const char* to_string(Denominator d) {
  return d == Denominator::predictions ? "predictions" : "detections";
}

MetricKind parse_metric_kind(const std::string& s) {
  if (s == "ece") return MetricKind::ece;
  if (s == "d_ece") return MetricKind::d_ece;
  if (s == "full_d_ece") return MetricKind::full_d_ece;
  throw Error(ErrorCode::invalid_argument, "unknown metric '" + s + "'");
}

Denominator parse_denominator(const std::string& s) {
  if (s == "predictions") return Denominator::predictions;
  if (s == "detections") return Denominator::detections;
  throw Error(ErrorCode::invalid_argument, "unknown denominator '" + s + "'");
}

double MetricReport::recompute() const {
  if (total_count == 0) return 0.0;
  double total = 0.0;
  for (const auto& bin : bins) {
    total += std::abs(static_cast<double>(bin.positive_count) - bin.confidence_sum);
  }
  return total / static_cast<double>(total_count);
}

MetricReport compute_ece(const Dataset& dataset, std::size_t num_bins) {
  return compute_ece(FlatBatch(dataset).view(), num_bins);
}

MetricReport compute_ece(const BatchView& batch, std::size_t num_bins) {
  return dominant_metric(batch, BinningScheme::confidence_only(num_bins), MetricKind::ece);
}

MetricReport compute_d_ece(const Dataset& dataset, const BinningScheme& scheme) {
  return compute_d_ece(FlatBatch(dataset).view(), scheme);
}

MetricReport compute_d_ece(const BatchView& batch, const BinningScheme& scheme) {
  return dominant_metric(batch, scheme, MetricKind::d_ece);
}

MetricReport compute_full_d_ece(const Dataset& dataset, std::size_t num_bins, Denominator denominator) {
  return compute_full_d_ece(FlatBatch(dataset).view(), num_bins, denominator);
}

MetricReport compute_full_d_ece(const BatchView& batch, std::size_t num_bins, Denominator denominator) {
  require_non_empty(batch.size());
  auto scheme = BinningScheme::confidence_only(num_bins);
  MetricReport report = make_report(MetricKind::full_d_ece, scheme);
  report.denominator = denominator;
  const auto& dim = scheme.dims()[0];
  for (std::size_t i = 0; i < batch.size(); ++i) {
    auto row = batch.row(i);
    for (std::size_t c = 0; c < row.size(); ++c) {
      auto& bin = report.bins[bin_coordinate(dim, row[c])];
      bin.count += 1;
      bin.positive_count += c == batch.labels[i] ? 1 : 0;
      bin.confidence_sum += row[c];
    }
  }
  finish(report, denominator == Denominator::predictions ? batch.size() * batch.num_classes
                                                         : batch.size());
  return report;
}

std::vector<ReliabilityPoint> reliability_data(const Dataset& dataset, std::size_t num_bins,
                                               PredictionMode mode) {
  auto report = mode == PredictionMode::dominant ? compute_ece(dataset, num_bins)
                                                 : compute_full_d_ece(dataset, num_bins);
  std::vector<ReliabilityPoint> points;
  for (std::size_t b = 0; b < report.bins.size(); ++b) {
    const auto& bin = report.bins[b];
    if (bin.count == 0) continue;
    const double n = static_cast<double>(bin.count);
    points.push_back({(static_cast<double>(b) + 0.5) / static_cast<double>(num_bins),
                      static_cast<double>(bin.positive_count) / n, bin.confidence_sum / n, bin.count});
  }
  return points;
}

}  // namespace detcal
