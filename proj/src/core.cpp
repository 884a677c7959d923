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

#include "detcal/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace detcal {

const char* to_string(Activation a) {
  return a == Activation::sigmoid ? "sigmoid" : "softmax";
}

const char* to_string(PredictionMode m) {
  return m == PredictionMode::dominant ? "dominant" : "full";
}

Activation parse_activation(const std::string& s) {
  if (s == "sigmoid") return Activation::sigmoid;
  if (s == "softmax") return Activation::softmax;
  throw Error(ErrorCode::invalid_argument, "unknown activation '" + s + "'");
}

PredictionMode parse_prediction_mode(const std::string& s) {
  if (s == "dominant") return PredictionMode::dominant;
  if (s == "full") return PredictionMode::full;
  throw Error(ErrorCode::invalid_argument, "unknown mode '" + s + "'");
}

ConfidenceVector::ConfidenceVector(std::vector<double> values) : values_(std::move(values)) {
  if (values_.size() < 2) {
    throw Error(ErrorCode::invalid_argument, "confidence vector needs at least 2 classes");
  }
  for (double v : values_) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
      std::ostringstream os;
      os << "confidence " << v << " outside [0,1]";
      throw Error(ErrorCode::invalid_argument, os.str());
    }
  }
}

LogitVector::LogitVector(std::vector<double> values) : values_(std::move(values)) {
  if (values_.size() < 2) {
    throw Error(ErrorCode::invalid_argument, "logit vector needs at least 2 classes");
  }
  for (double v : values_) {
    if (!std::isfinite(v)) throw Error(ErrorCode::invalid_argument, "non-finite logit");
  }
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

ConfidenceVector sigmoid_activate(const LogitVector& logits) {
  std::vector<double> out(logits.size());
  for (std::size_t c = 0; c < logits.size(); ++c) out[c] = sigmoid(logits[c]);
  return ConfidenceVector(std::move(out));
}

ConfidenceVector softmax_activate(const LogitVector& logits) {
  auto z = logits.values();
  double zmax = *std::max_element(z.begin(), z.end());
  std::vector<double> out(z.size());
  double sum = 0.0;
  for (std::size_t c = 0; c < z.size(); ++c) {
    out[c] = std::exp(z[c] - zmax);
    sum += out[c];
  }
  for (double& v : out) v /= sum;
  return ConfidenceVector(std::move(out));
}

ConfidenceVector activate(const LogitVector& logits, Activation activation) {
  return activation == Activation::sigmoid ? sigmoid_activate(logits) : softmax_activate(logits);
}

Dominant dominant(std::span<const double> confidences) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < confidences.size(); ++c) {
    if (confidences[c] > confidences[best]) best = c;
  }
  return {best, confidences[best]};
}

Dataset::Dataset(std::size_t num_classes, Activation activation,
                 std::vector<std::string> class_names,
                 std::vector<std::string> feature_names)
    : num_classes_(num_classes),
      activation_(activation),
      class_names_(std::move(class_names)),
      feature_names_(std::move(feature_names)) {
  if (num_classes_ < 2) throw Error(ErrorCode::invalid_argument, "num_classes must be >= 2");
  if (!class_names_.empty() && class_names_.size() != num_classes_) {
    throw Error(ErrorCode::dimension_mismatch, "class_names length differs from num_classes");
  }
  if (!feature_names_.empty()) feature_dims_ = feature_names_.size();
}

void Dataset::add(DetectionRecord record) {
  check(record);
  if (!feature_dims_) feature_dims_ = record.features.size();
  records_.push_back(std::move(record));
}

void Dataset::check(const DetectionRecord& record) const {
  if (record.confidences.size() != num_classes_) {
    throw Error(ErrorCode::dimension_mismatch,
                "record '" + record.id + "' has " + std::to_string(record.confidences.size()) +
                    " confidences, expected " + std::to_string(num_classes_));
  }
  if (record.label >= num_classes_) {
    throw Error(ErrorCode::invalid_argument,
                "record '" + record.id + "' label " + std::to_string(record.label) +
                    " out of range for " + std::to_string(num_classes_) + " classes");
  }
  if (record.logits) {
    if (record.logits->size() != num_classes_) {
      throw Error(ErrorCode::dimension_mismatch, "record '" + record.id + "' logits length mismatch");
    }
    auto expected = activate(*record.logits, activation_);
    for (std::size_t c = 0; c < num_classes_; ++c) {
      if (std::abs(expected[c] - record.confidences[c]) > 1e-9) {
        throw Error(ErrorCode::invalid_argument,
                    "record '" + record.id + "' confidences disagree with " +
                        to_string(activation_) + "(logits)");
      }
    }
  }
  if (feature_dims_ && record.features.size() != *feature_dims_) {
    throw Error(ErrorCode::dimension_mismatch,
                "record '" + record.id + "' has " + std::to_string(record.features.size()) +
                    " features, expected " + std::to_string(*feature_dims_));
  }
  for (double f : record.features) {
    if (!std::isfinite(f)) throw Error(ErrorCode::invalid_argument, "non-finite feature");
  }
}

Dataset Dataset::empty_like() const { return empty_like(activation_); }

Dataset Dataset::empty_like(Activation activation) const {
  Dataset out(num_classes_, activation, class_names_, feature_names_);
  out.feature_dims_ = feature_dims_;
  return out;
}

std::size_t bin_coordinate(const BinDimension& dim, double value) {
  double scaled = std::floor((value - dim.lo) * static_cast<double>(dim.bins) / (dim.hi - dim.lo));
  if (!(scaled > 0.0)) return 0;  // also catches NaN
  auto j = static_cast<std::size_t>(std::min(scaled, static_cast<double>(dim.bins - 1)));
  return j;
}

BinningScheme::BinningScheme(std::vector<BinDimension> dims) : dims_(std::move(dims)), total_(1) {
  if (dims_.empty()) throw Error(ErrorCode::invalid_argument, "binning scheme needs a confidence dimension");
  if (dims_[0].lo != 0.0 || dims_[0].hi != 1.0) {
    throw Error(ErrorCode::invalid_argument, "first binning dimension must be confidence on [0,1]");
  }
  for (const auto& d : dims_) {
    if (d.bins < 1) throw Error(ErrorCode::invalid_argument, "dimension '" + d.name + "' needs >= 1 bin");
    if (!(d.lo < d.hi) || !std::isfinite(d.lo) || !std::isfinite(d.hi)) {
      throw Error(ErrorCode::invalid_argument, "dimension '" + d.name + "' needs lo < hi");
    }
    total_ *= d.bins;
  }
}

BinningScheme BinningScheme::confidence_only(std::size_t bins) {
  return BinningScheme({{"confidence", bins, 0.0, 1.0}});
}

BinningScheme BinningScheme::with_feature(std::string name, std::size_t bins, double lo, double hi) const {
  auto dims = dims_;
  dims.push_back({std::move(name), bins, lo, hi});
  return BinningScheme(std::move(dims));
}

std::vector<std::size_t> BinningScheme::bin_index(std::span<const double> values) const {
  if (values.size() != dims_.size()) {
    throw Error(ErrorCode::dimension_mismatch,
                "expected " + std::to_string(dims_.size()) + " binning values, got " +
                    std::to_string(values.size()));
  }
  std::vector<std::size_t> out(dims_.size());
  for (std::size_t k = 0; k < dims_.size(); ++k) out[k] = bin_coordinate(dims_[k], values[k]);
  return out;
}

std::size_t BinningScheme::flat_index(std::span<const double> values) const {
  if (values.size() != dims_.size()) {
    throw Error(ErrorCode::dimension_mismatch,
                "expected " + std::to_string(dims_.size()) + " binning values, got " +
                    std::to_string(values.size()));
  }
  return flat_index(values[0], values.subspan(1));
}

std::size_t BinningScheme::flat_index(double confidence, std::span<const double> features) const {
  if (features.size() + 1 != dims_.size()) {
    throw Error(ErrorCode::dimension_mismatch,
                "scheme has " + std::to_string(dims_.size() - 1) + " feature dimensions, record has " +
                    std::to_string(features.size()));
  }
  std::size_t flat = bin_coordinate(dims_[0], confidence);
  for (std::size_t k = 1; k < dims_.size(); ++k) {
    flat = flat * dims_[k].bins + bin_coordinate(dims_[k], features[k - 1]);
  }
  return flat;
}

std::vector<std::size_t> BinningScheme::unflatten(std::size_t flat) const {
  std::vector<std::size_t> out(dims_.size());
  for (std::size_t k = dims_.size(); k-- > 0;) {
    out[k] = flat % dims_[k].bins;
    flat /= dims_[k].bins;
  }
  return out;
}

bool operator==(const BinningScheme& a, const BinningScheme& b) {
  if (a.dims_.size() != b.dims_.size()) return false;
  for (std::size_t k = 0; k < a.dims_.size(); ++k) {
    const auto& x = a.dims_[k];
    const auto& y = b.dims_[k];
    if (x.name != y.name || x.bins != y.bins || x.lo != y.lo || x.hi != y.hi) return false;
  }
  return true;
}

FlatBatch::FlatBatch(const Dataset& dataset)
    : num_classes_(dataset.num_classes()), feature_dims_(dataset.feature_dims()) {
  confidences_.reserve(dataset.size() * num_classes_);
  labels_.reserve(dataset.size());
  features_.reserve(dataset.size() * feature_dims_);
  for (const auto& r : dataset.records()) {
    auto v = r.confidences.values();
    confidences_.insert(confidences_.end(), v.begin(), v.end());
    labels_.push_back(r.label);
    features_.insert(features_.end(), r.features.begin(), r.features.end());
  }
}

BatchView FlatBatch::view() const {
  return {confidences_, num_classes_, labels_, features_, feature_dims_};
}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  double u1 = uniform_open_low();
  double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t Rng::below(std::size_t n) {
  if (n == 0) throw Error(ErrorCode::invalid_argument, "Rng::below(0)");
  const std::uint64_t range = static_cast<std::uint64_t>(n);
  // Largest multiple of range that fits; reject draws above it.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % range;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return static_cast<std::size_t>(x % range);
}

}  // namespace detcal
