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

#include "detcal/io.hpp"

#include <charconv>
#include <cmath>
#include <numeric>
#include <sstream>

namespace detcal {

namespace {

using nlohmann::json;

std::string format_array(std::span<const double> values) {
  std::string s = "[";
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) s += ',';
    s += format_double(values[i]);
  }
  s += ']';
  return s;
}

std::string string_array(const std::vector<std::string>& values) {
  return json(values).dump();
}

std::vector<std::string> read_string_array(const json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return {};
  if (!j[key].is_array()) throw std::invalid_argument(std::string("'") + key + "' must be an array");
  std::vector<std::string> out;
  for (const auto& v : j[key]) {
    if (!v.is_string()) throw std::invalid_argument(std::string("'") + key + "' must hold strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

std::vector<double> read_number_array(const json& j, const char* key) {
  const auto& a = j.at(key);
  if (!a.is_array()) throw std::invalid_argument(std::string("'") + key + "' must be an array");
  std::vector<double> out;
  out.reserve(a.size());
  for (const auto& v : a) {
    if (!v.is_number()) throw std::invalid_argument(std::string("'") + key + "' must hold numbers");
    double x = v.get<double>();
    if (!std::isfinite(x)) throw std::invalid_argument(std::string("non-finite number in '") + key + "'");
    out.push_back(x);
  }
  return out;
}

std::size_t read_size(const json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0)) {
    throw std::invalid_argument(std::string("'") + key + "' must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

double read_finite(const json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_number()) throw std::invalid_argument(std::string("'") + key + "' must be a number");
  double x = v.get<double>();
  if (!std::isfinite(x)) throw std::invalid_argument(std::string("'") + key + "' is not finite");
  return x;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

DetectionReader::DetectionReader(const std::filesystem::path& path) : path_(path), in_(path) {
  if (!in_) throw Error(ErrorCode::io_error, "cannot open detection file " + path.string());
  std::string line;
  if (!next_line(line)) fail("missing header line");
  try {
    json h = json::parse(line);
    if (!h.is_object()) throw std::invalid_argument("header must be a JSON object");
    header_.version = static_cast<int>(read_size(h, "version"));
    if (header_.version != kDetectionFormatVersion) {
      throw std::invalid_argument("unsupported version " + std::to_string(header_.version));
    }
    header_.num_classes = read_size(h, "num_classes");
    header_.class_names = read_string_array(h, "class_names");
    header_.feature_names = read_string_array(h, "feature_names");
    if (h.contains("activation")) header_.activation = parse_activation(h.at("activation").get<std::string>());
  } catch (const Error& e) {
    fail(e.what());
  } catch (const std::exception& e) {
    fail(std::string("bad header: ") + e.what());
  }
  try {
    validator_.emplace(header_.num_classes, header_.activation, header_.class_names, header_.feature_names);
  } catch (const Error& e) {
    fail(e.what());
  }
}

void DetectionReader::fail(const std::string& message) const {
  throw Error(ErrorCode::parse_error, path_.string() + ":" + std::to_string(line_) + ": " + message);
}

bool DetectionReader::next_line(std::string& line) {
  while (std::getline(in_, line)) {
    ++line_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") != std::string::npos) return true;
  }
  return false;
}

std::optional<DetectionRecord> DetectionReader::next() {
  std::string line;
  if (!next_line(line)) return std::nullopt;
  try {
    json j = json::parse(line);
    if (!j.is_object()) throw std::invalid_argument("record must be a JSON object");
    if (!j.contains("id") || !j["id"].is_string()) throw std::invalid_argument("'id' must be a string");
    std::optional<LogitVector> logits;
    if (j.contains("logits") && !j["logits"].is_null()) logits.emplace(read_number_array(j, "logits"));
    ConfidenceVector conf(read_number_array(j, "confidences"));
    std::size_t label = read_size(j, "label");
    std::vector<double> features;
    if (j.contains("features") && !j["features"].is_null()) features = read_number_array(j, "features");
    if (features.size() != header_.feature_names.size()) {
      throw std::invalid_argument("record has " + std::to_string(features.size()) + " features, header names " +
                                  std::to_string(header_.feature_names.size()));
    }
    DetectionRecord record{j["id"].get<std::string>(), std::move(logits), std::move(conf), label,
                           std::move(features)};
    validator_->check(record);
    return record;
  } catch (const json::exception& e) {
    fail(std::string("malformed JSON: ") + e.what());
  } catch (const std::exception& e) {
    fail(e.what());
  }
}

Dataset read_detections(const std::filesystem::path& path) {
  DetectionReader reader(path);
  const auto& h = reader.header();
  Dataset out(h.num_classes, h.activation, h.class_names, h.feature_names);
  while (auto record = reader.next()) out.add(std::move(*record));
  return out;
}

std::string detection_header_line(const Dataset& dataset) {
  std::string s = "{\"version\":" + std::to_string(kDetectionFormatVersion);
  s += ",\"num_classes\":" + std::to_string(dataset.num_classes());
  s += ",\"class_names\":" + string_array(dataset.class_names());
  s += ",\"feature_names\":" + string_array(dataset.feature_names());
  s += ",\"activation\":\"" + std::string(to_string(dataset.activation())) + "\"}";
  return s;
}

std::string detection_record_line(const DetectionRecord& record) {
  std::string s = "{\"id\":" + json(record.id).dump();
  if (record.logits) s += ",\"logits\":" + format_array(record.logits->values());
  s += ",\"confidences\":" + format_array(record.confidences.values());
  s += ",\"label\":" + std::to_string(record.label);
  if (!record.features.empty()) s += ",\"features\":" + format_array(record.features);
  s += '}';
  return s;
}

void write_detections(const Dataset& dataset, std::ostream& out) {
  if (dataset.feature_names().size() != dataset.feature_dims()) {
    throw Error(ErrorCode::invalid_argument, "dataset needs one feature name per feature column to be written");
  }
  out << detection_header_line(dataset) << '\n';
  for (const auto& r : dataset.records()) out << detection_record_line(r) << '\n';
}

void write_detections(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io_error, "cannot write " + path.string());
  write_detections(dataset, out);
  if (!out) throw Error(ErrorCode::io_error, "write failed for " + path.string());
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& dataset, std::uint64_t seed) {
  if (dataset.size() < 2) throw Error(ErrorCode::invalid_argument, "split needs at least 2 records");
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(order);
  std::pair<Dataset, Dataset> halves{dataset.empty_like(), dataset.empty_like()};
  halves.first.reserve((order.size() + 1) / 2);
  halves.second.reserve(order.size() / 2);
  for (std::size_t k = 0; k < order.size(); ++k) {
    (k % 2 == 0 ? halves.first : halves.second).add(dataset[order[k]]);
  }
  return halves;
}

ordered_json report_to_json(const MetricReport& report) {
  ordered_json j;
  j["metric"] = to_string(report.metric);
  j["value"] = report.value;
  j["total_count"] = report.total_count;
  if (report.denominator) j["denominator"] = to_string(*report.denominator);
  ordered_json dims = ordered_json::array();
  for (const auto& d : report.scheme.dims()) {
    dims.push_back({{"name", d.name}, {"bins", d.bins}, {"lo", d.lo}, {"hi", d.hi}});
  }
  j["scheme"] = {{"dims", dims}};
  ordered_json bins = ordered_json::array();
  for (const auto& b : report.bins) {
    if (b.count == 0) continue;
    bins.push_back({{"index", b.bin_index},
                    {"count", b.count},
                    {"positive_count", b.positive_count},
                    {"confidence_sum", b.confidence_sum}});
  }
  j["bins"] = bins;
  return j;
}

MetricReport report_from_json(const nlohmann::json& j) {
  try {
    std::vector<BinDimension> dims;
    for (const auto& d : j.at("scheme").at("dims")) {
      dims.push_back({d.at("name").get<std::string>(), read_size(d, "bins"), read_finite(d, "lo"),
                      read_finite(d, "hi")});
    }
    BinningScheme scheme(std::move(dims));
    MetricReport report{.metric = parse_metric_kind(j.at("metric").get<std::string>()), .scheme = scheme};
    report.value = read_finite(j, "value");
    report.total_count = read_size(j, "total_count");
    if (j.contains("denominator")) report.denominator = parse_denominator(j.at("denominator").get<std::string>());
    report.bins.resize(scheme.total_bins());
    for (std::size_t b = 0; b < report.bins.size(); ++b) report.bins[b].bin_index = scheme.unflatten(b);
    for (const auto& b : j.at("bins")) {
      auto index = b.at("index").get<std::vector<std::size_t>>();
      if (index.size() != scheme.dimensions()) throw std::invalid_argument("bin index has wrong arity");
      std::size_t flat = 0;
      for (std::size_t k = 0; k < index.size(); ++k) {
        if (index[k] >= scheme.dims()[k].bins) throw std::invalid_argument("bin index out of range");
        flat = flat * scheme.dims()[k].bins + index[k];
      }
      auto& bin = report.bins[flat];
      bin.count = read_size(b, "count");
      bin.positive_count = read_size(b, "positive_count");
      bin.confidence_sum = read_finite(b, "confidence_sum");
    }
    return report;
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::parse_error, std::string("bad metric report: ") + e.what());
  }
}

ordered_json reliability_to_json(std::span<const ReliabilityPoint> points, std::size_t num_bins,
                                 PredictionMode mode) {
  ordered_json j;
  j["mode"] = to_string(mode);
  j["num_bins"] = num_bins;
  ordered_json pts = ordered_json::array();
  for (const auto& p : points) {
    pts.push_back({{"bin_center", p.bin_center},
                   {"empirical", p.empirical},
                   {"mean_confidence", p.mean_confidence},
                   {"count", p.count}});
  }
  j["points"] = pts;
  return j;
}

ordered_json calibrator_to_json(const Calibrator& calibrator, const CalibratorMetadata& meta) {
  ordered_json j;
  j["format"] = "detcal-calibrator";
  j["version"] = 1;
  j["method"] = method_name(calibrator);
  ordered_json params;
  std::string fit_mode = "dominant";
  if (auto* t = std::get_if<TemperatureParams>(&calibrator)) {
    params["temperature"] = t->temperature;
  } else if (auto* p = std::get_if<PlattParams>(&calibrator)) {
    params["a"] = p->a;
    params["b"] = p->b;
    params["converged"] = p->converged;
    params["iterations"] = p->iterations;
  } else if (auto* iso = std::get_if<IsotonicMap>(&calibrator)) {
    params["breakpoints"] = iso->breakpoints;
    params["values"] = iso->values;
    fit_mode = to_string(iso->fit_mode);
  } else {
    const auto& h = std::get<HistogramMap>(calibrator);
    params["num_bins"] = h.num_bins();
    params["outputs"] = h.outputs;
    fit_mode = to_string(h.fit_mode);
  }
  j["fit_mode"] = fit_mode;
  j["params"] = params;
  j["metadata"] = {{"tool_version", kToolVersion},
                   {"source", meta.source},
                   {"num_records", meta.num_records},
                   {"num_fit_pairs", meta.num_fit_pairs}};
  return j;
}

Calibrator calibrator_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "detcal-calibrator") {
      throw std::invalid_argument("not a detcal calibrator file");
    }
    const auto method = j.at("method").get<std::string>();
    const auto mode = parse_prediction_mode(j.at("fit_mode").get<std::string>());
    const auto& p = j.at("params");
    if (method == "temperature") {
      double t = read_finite(p, "temperature");
      if (!(t > 0.0)) throw std::invalid_argument("temperature must be > 0");
      return TemperatureParams{t};
    }
    if (method == "platt") {
      return PlattParams{read_finite(p, "a"), read_finite(p, "b"), p.value("converged", true),
                         p.value("iterations", std::size_t{0})};
    }
    if (method == "isotonic") {
      IsotonicMap map{read_number_array(p, "breakpoints"), read_number_array(p, "values"), mode};
      if (map.breakpoints.empty() || map.breakpoints.size() != map.values.size()) {
        throw std::invalid_argument("isotonic map needs equally many breakpoints and values");
      }
      for (std::size_t k = 1; k < map.breakpoints.size(); ++k) {
        if (!(map.breakpoints[k - 1] < map.breakpoints[k])) throw std::invalid_argument("breakpoints not increasing");
        if (map.values[k - 1] > map.values[k]) throw std::invalid_argument("values not non-decreasing");
      }
      for (double v : map.values) {
        if (v < 0.0 || v > 1.0) throw std::invalid_argument("isotonic value outside [0,1]");
      }
      return map;
    }
    if (method == "histogram") {
      HistogramMap map{read_number_array(p, "outputs"), mode};
      if (map.outputs.empty()) throw std::invalid_argument("histogram map has no bins");
      for (double v : map.outputs) {
        if (v < 0.0 || v > 1.0) throw std::invalid_argument("histogram output outside [0,1]");
      }
      return map;
    }
    throw std::invalid_argument("unknown method '" + method + "'");
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::parse_error, std::string("bad calibrator: ") + e.what());
  }
}

void write_reliability_csv(std::span<const ReliabilityPoint> points, std::ostream& out) {
  out << "bin_center,empirical,mean_confidence,count\n";
  for (const auto& p : points) {
    out << format_double(p.bin_center) << ',' << format_double(p.empirical) << ','
        << format_double(p.mean_confidence) << ',' << p.count << '\n';
  }
}

void write_epoch_log_csv(std::span<const EpochLog> log, std::ostream& out) {
  out << "epoch,base_part,aux_part,total,heldout_accuracy,heldout_ece,heldout_full_d_ece\n";
  for (const auto& e : log) {
    out << e.epoch << ',' << format_double(e.base_part) << ',' << format_double(e.aux_part) << ','
        << format_double(e.total) << ',' << format_double(e.heldout_accuracy) << ','
        << format_double(e.heldout_ece) << ',' << format_double(e.heldout_full_d_ece) << '\n';
  }
}

BinningScheme parse_scheme_spec(const std::string& spec, std::size_t confidence_bins,
                                const std::vector<std::string>& feature_names) {
  BinningScheme scheme = BinningScheme::confidence_only(confidence_bins);
  if (spec.empty()) return scheme;
  std::stringstream ss(spec);
  std::string entry;
  std::size_t k = 0;
  while (std::getline(ss, entry, ',')) {
    std::vector<std::string> parts;
    std::stringstream es(entry);
    std::string part;
    while (std::getline(es, part, ':')) parts.push_back(part);
    if (parts.size() != 4) {
      throw Error(ErrorCode::invalid_argument, "feature binning '" + entry + "' is not name:bins:lo:hi");
    }
    if (k < feature_names.size() && parts[0] != feature_names[k]) {
      throw Error(ErrorCode::invalid_argument, "feature binning '" + parts[0] + "' does not match feature column " +
                                                   std::to_string(k) + " ('" + feature_names[k] + "')");
    }
    try {
      std::size_t pos = 0;
      long long bins = std::stoll(parts[1], &pos);
      if (pos != parts[1].size() || bins < 1) throw std::invalid_argument("bins");
      double lo = std::stod(parts[2]);
      double hi = std::stod(parts[3]);
      scheme = scheme.with_feature(parts[0], static_cast<std::size_t>(bins), lo, hi);
    } catch (const Error&) {
      throw;
    } catch (const std::exception&) {
      throw Error(ErrorCode::invalid_argument, "feature binning '" + entry + "' has bad numbers");
    }
    ++k;
  }
  return scheme;
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, "cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse_error, path.string() + ": " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io_error, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::io_error, "write failed for " + path.string());
}

}  // namespace detcal
