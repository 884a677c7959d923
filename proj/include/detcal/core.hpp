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
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace detcal {

enum class ErrorCode {
  invalid_argument,
  dimension_mismatch,
  empty_dataset,
  missing_logits,
  degenerate_labels,
  parse_error,
  io_error,
  divergence,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

enum class Activation { sigmoid, softmax };

// Which confidence entries of a detection take part in a computation: only the
// argmax entry, or all C entries.
enum class PredictionMode { dominant, full };

const char* to_string(Activation a);
const char* to_string(PredictionMode m);
Activation parse_activation(const std::string& s);
PredictionMode parse_prediction_mode(const std::string& s);

/// Per-class confidences in [0,1]. Not required to sum to one.
class ConfidenceVector {
 public:
  explicit ConfidenceVector(std::vector<double> values);

  std::span<const double> values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }

  friend bool operator==(const ConfidenceVector&, const ConfidenceVector&) = default;

 private:
  std::vector<double> values_;
};

/// Pre-activation class scores.
class LogitVector {
 public:
  explicit LogitVector(std::vector<double> values);

  std::span<const double> values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }

  friend bool operator==(const LogitVector&, const LogitVector&) = default;

 private:
  std::vector<double> values_;
};

double sigmoid(double z);
ConfidenceVector sigmoid_activate(const LogitVector& logits);
ConfidenceVector softmax_activate(const LogitVector& logits);
ConfidenceVector activate(const LogitVector& logits, Activation activation);

struct Dominant {
  std::size_t class_index;
  double confidence;
};

// Ties resolve to the lowest class index.
Dominant dominant(std::span<const double> confidences);
inline Dominant dominant(const ConfidenceVector& conf) { return dominant(conf.values()); }

struct DetectionRecord {
  std::string id;
  std::optional<LogitVector> logits;
  ConfidenceVector confidences;
  std::size_t label;
  std::vector<double> features;
};

/// A set of pre-matched detections sharing class count and feature layout.
///
/// The feature dimensionality is fixed by `feature_names` when non-empty,
/// otherwise by the first record added.
class Dataset {
 public:
  explicit Dataset(std::size_t num_classes,
                   Activation activation = Activation::sigmoid,
                   std::vector<std::string> class_names = {},
                   std::vector<std::string> feature_names = {});

  void add(DetectionRecord record);
  // Throws unless `record` could be added.
  void check(const DetectionRecord& record) const;
  void reserve(std::size_t n) { records_.reserve(n); }

  std::span<const DetectionRecord> records() const { return records_; }
  const DetectionRecord& operator[](std::size_t i) const { return records_[i]; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

  std::size_t num_classes() const { return num_classes_; }
  std::size_t feature_dims() const { return feature_dims_.value_or(feature_names_.size()); }
  Activation activation() const { return activation_; }
  const std::vector<std::string>& class_names() const { return class_names_; }
  const std::vector<std::string>& feature_names() const { return feature_names_; }

  // Same header (classes, names, activation), no records.
  Dataset empty_like() const;
  Dataset empty_like(Activation activation) const;

 private:
  std::size_t num_classes_;
  Activation activation_;
  std::vector<std::string> class_names_;
  std::vector<std::string> feature_names_;
  std::optional<std::size_t> feature_dims_;
  std::vector<DetectionRecord> records_;
};

struct BinDimension {
  std::string name;
  std::size_t bins;
  double lo;
  double hi;
};

// Coordinate of `value` along one equal-width dimension. Bins are [lo,hi)
// except the top one, which also takes `hi`. Values outside clamp to the edge
// bins.
std::size_t bin_coordinate(const BinDimension& dim, double value);

/// K-dimensional equal-width binning. Dimension 0 is always confidence on
/// [0,1]; flat indices are row-major with confidence as the slowest axis.
class BinningScheme {
 public:
  explicit BinningScheme(std::vector<BinDimension> dims);
  static BinningScheme confidence_only(std::size_t bins);

  BinningScheme with_feature(std::string name, std::size_t bins, double lo, double hi) const;

  const std::vector<BinDimension>& dims() const { return dims_; }
  std::size_t dimensions() const { return dims_.size(); }
  std::size_t feature_dimensions() const { return dims_.size() - 1; }
  std::size_t total_bins() const { return total_; }

  std::vector<std::size_t> bin_index(std::span<const double> values) const;
  std::size_t flat_index(std::span<const double> values) const;
  // Flat index for a confidence plus the remaining feature coordinates.
  std::size_t flat_index(double confidence, std::span<const double> features) const;
  std::vector<std::size_t> unflatten(std::size_t flat) const;

  friend bool operator==(const BinningScheme& a, const BinningScheme& b);

 private:
  std::vector<BinDimension> dims_;
  std::size_t total_;
};

struct BinStats {
  std::vector<std::size_t> bin_index;
  std::size_t count = 0;
  std::size_t positive_count = 0;
  double confidence_sum = 0.0;
};

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Non-owning view of a batch in flat form: N x C confidences, N labels and
/// N x F features (F may be zero).
struct BatchView {
  std::span<const double> confidences;
  std::size_t num_classes = 0;
  std::span<const std::size_t> labels;
  std::span<const double> features;
  std::size_t feature_dims = 0;

  std::size_t size() const { return labels.size(); }
  std::span<const double> row(std::size_t i) const {
    return confidences.subspan(i * num_classes, num_classes);
  }
  std::span<const double> feature_row(std::size_t i) const {
    return features.subspan(i * feature_dims, feature_dims);
  }
};

/// Owning flat copy of a Dataset's confidences, labels and features.
class FlatBatch {
 public:
  explicit FlatBatch(const Dataset& dataset);
  BatchView view() const;

 private:
  std::size_t num_classes_;
  std::size_t feature_dims_;
  std::vector<double> confidences_;
  std::vector<std::size_t> labels_;
  std::vector<double> features_;
};

/// Seeded generator with a fixed, documented output sequence.
///
/// Raw bits come from std::mt19937_64, whose sequence is fixed by the C++
/// standard. Uniforms take the top 53 bits; normals use Box-Muller, one
/// variate per two uniforms; bounded integers use rejection sampling. None of
/// the std distributions are used because their algorithms are
/// implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t bits() { return engine_(); }
  // Uniform on [0,1).
  double uniform();
  // Uniform on (0,1].
  double uniform_open_low() { return 1.0 - uniform(); }
  double normal();
  // Uniform integer in [0, n).
  std::size_t below(std::size_t n);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = below(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace detcal
