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

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>

#include "json.hpp"

#include "detcal/calibrate.hpp"
#include "detcal/core.hpp"
#include "detcal/metrics.hpp"
#include "detcal/traindemo.hpp"

namespace detcal {

inline constexpr int kDetectionFormatVersion = 1;
inline constexpr const char* kToolVersion = "1.0.0";

// Canonical decimal form of a double: 17 significant digits, as printf "%.17g".
std::string format_double(double v);

struct DetectionHeader {
  int version = kDetectionFormatVersion;
  std::size_t num_classes = 0;
  std::vector<std::string> class_names;
  std::vector<std::string> feature_names;
  Activation activation = Activation::sigmoid;
};

/// Line-at-a-time reader for detection JSON-Lines files.
class DetectionReader {
 public:
  explicit DetectionReader(const std::filesystem::path& path);

  const DetectionHeader& header() const { return header_; }
  // Next record, or nullopt at end of file. Validates each record against
  // the header.
  std::optional<DetectionRecord> next();
  std::size_t line_number() const { return line_; }

 private:
  [[noreturn]] void fail(const std::string& message) const;
  bool next_line(std::string& line);

  std::filesystem::path path_;
  std::ifstream in_;
  std::size_t line_ = 0;
  DetectionHeader header_;
  std::optional<Dataset> validator_;
};

Dataset read_detections(const std::filesystem::path& path);
void write_detections(const Dataset& dataset, std::ostream& out);
void write_detections(const Dataset& dataset, const std::filesystem::path& path);
std::string detection_header_line(const Dataset& dataset);
std::string detection_record_line(const DetectionRecord& record);

/// Seeded shuffle, then positions alternate: even -> calibration half,
/// odd -> evaluation half.
std::pair<Dataset, Dataset> split_dataset(const Dataset& dataset, std::uint64_t seed);

using ordered_json = nlohmann::ordered_json;

// Only non-empty bins are serialised; empty bins contribute nothing.
ordered_json report_to_json(const MetricReport& report);
MetricReport report_from_json(const nlohmann::json& j);
ordered_json reliability_to_json(std::span<const ReliabilityPoint> points, std::size_t num_bins,
                                 PredictionMode mode);

struct CalibratorMetadata {
  std::string source;
  std::size_t num_records = 0;
  std::size_t num_fit_pairs = 0;
};
ordered_json calibrator_to_json(const Calibrator& calibrator, const CalibratorMetadata& meta);
Calibrator calibrator_from_json(const nlohmann::json& j);

void write_reliability_csv(std::span<const ReliabilityPoint> points, std::ostream& out);
void write_epoch_log_csv(std::span<const EpochLog> log, std::ostream& out);

// "name:bins:lo:hi" entries separated by commas, one per feature column in
// order. Names must match the dataset's feature names when it has them.
BinningScheme parse_scheme_spec(const std::string& spec, std::size_t confidence_bins,
                                const std::vector<std::string>& feature_names);

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace detcal
