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

#include "detcal/losses.hpp"

#include <algorithm>
#include <cmath>

namespace detcal {

namespace {

constexpr double kClampLo = 1e-7;
constexpr double kClampHi = 1.0 - 1e-7;

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

std::vector<double> bin_signs(const MetricReport& report) {
  std::vector<double> s(report.bins.size());
  for (std::size_t b = 0; b < s.size(); ++b) {
    s[b] = sign(report.bins[b].confidence_sum - static_cast<double>(report.bins[b].positive_count));
  }
  return s;
}

}  // namespace

const char* to_string(AuxLoss a) {
  switch (a) {
    case AuxLoss::none: return "none";
    case AuxLoss::dece: return "dece";
    case AuxLoss::full_dece: return "full_dece";
  }
  return "?";
}

AuxLoss parse_aux_loss(const std::string& s) {
  if (s == "none") return AuxLoss::none;
  if (s == "dece") return AuxLoss::dece;
  if (s == "full_dece") return AuxLoss::full_dece;
  throw Error(ErrorCode::invalid_argument, "unknown auxiliary loss '" + s + "'");
}

void LossConfig::validate() const {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw Error(ErrorCode::invalid_argument, "alpha must be >= 0");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw Error(ErrorCode::invalid_argument, "gamma must be >= 0");
  if (train_bins < 1) throw Error(ErrorCode::invalid_argument, "train_bins must be >= 1");
}

ScalarWithGradient focal_loss(std::span<const double> confidences, std::size_t label, double gamma) {
  ScalarWithGradient out{0.0, std::vector<double>(confidences.size(), 0.0)};
  for (std::size_t c = 0; c < confidences.size(); ++c) {
    const double p = confidences[c];
    const bool clamped = p < kClampLo || p > kClampHi;
    const double pc = std::clamp(p, kClampLo, kClampHi);
    const bool target = c == label;
    const double q = target ? pc : 1.0 - pc;
    const double log_q = std::log(q);
    const double mod = std::pow(1.0 - q, gamma);
    out.value -= mod * log_q;
    if (!clamped) {
      double d_dq = -mod / q;
      if (gamma != 0.0) d_dq += gamma * std::pow(1.0 - q, gamma - 1.0) * log_q;
      out.gradient[c] = target ? d_dq : -d_dq;
    }
  }
  return out;
}

AuxTerm aux_dece(const BatchView& batch, std::size_t num_bins) {
  auto report = compute_d_ece(batch, BinningScheme::confidence_only(num_bins));
  auto signs = bin_signs(report);
  const BinDimension dim = report.scheme.dims()[0];
  const double inv_n = 1.0 / static_cast<double>(report.total_count);
  AuxTerm out{report.value, Matrix(batch.size(), batch.num_classes)};
  for (std::size_t i = 0; i < batch.size(); ++i) {
    auto dom = dominant(batch.row(i));
    out.gradient(i, dom.class_index) = signs[bin_coordinate(dim, dom.confidence)] * inv_n;
  }
  return out;
}

AuxTerm aux_dece(const Dataset& batch, std::size_t num_bins) {
  return aux_dece(FlatBatch(batch).view(), num_bins);
}

AuxTerm aux_full_dece(const BatchView& batch, std::size_t num_bins, Denominator denominator) {
  auto report = compute_full_d_ece(batch, num_bins, denominator);
  auto signs = bin_signs(report);
  const BinDimension dim = report.scheme.dims()[0];
  const double inv_d = 1.0 / static_cast<double>(report.total_count);
  AuxTerm out{report.value, Matrix(batch.size(), batch.num_classes)};
  for (std::size_t i = 0; i < batch.size(); ++i) {
    auto row = batch.row(i);
    for (std::size_t c = 0; c < row.size(); ++c) {
      out.gradient(i, c) = signs[bin_coordinate(dim, row[c])] * inv_d;
    }
  }
  return out;
}

AuxTerm aux_full_dece(const Dataset& batch, std::size_t num_bins, Denominator denominator) {
  return aux_full_dece(FlatBatch(batch).view(), num_bins, denominator);
}

LossValue combined_loss(const BatchView& batch, const LossConfig& config) {
  config.validate();
  if (batch.size() == 0) throw Error(ErrorCode::empty_dataset, "loss requested on an empty batch");
  const std::size_t n = batch.size();
  const double inv_n = 1.0 / static_cast<double>(n);

  LossValue out{0.0, 0.0, 0.0, Matrix(n, batch.num_classes)};
  for (std::size_t i = 0; i < n; ++i) {
    auto row = batch.row(i);
    if (config.base == BaseLoss::focal) {
      auto term = focal_loss(row, batch.labels[i], config.gamma);
      out.base_part += term.value;
      for (std::size_t c = 0; c < row.size(); ++c) out.grad_confidences(i, c) = term.gradient[c] * inv_n;
    } else {
      const std::size_t y = batch.labels[i];
      const double p = std::clamp(row[y], kClampLo, kClampHi);
      out.base_part -= std::log(p);
      if (row[y] >= kClampLo && row[y] <= kClampHi) out.grad_confidences(i, y) = -inv_n / p;
    }
  }
  out.base_part *= inv_n;

  if (config.aux != AuxLoss::none) {
    auto aux = config.aux == AuxLoss::dece
                   ? aux_dece(batch, config.train_bins)
                   : aux_full_dece(batch, config.train_bins, config.denominator);
    out.aux_part = aux.value;
    auto g = out.grad_confidences.data();
    auto a = aux.gradient.data();
    for (std::size_t k = 0; k < g.size(); ++k) g[k] += config.alpha * a[k];
  }
  out.total = out.base_part + config.alpha * out.aux_part;
  return out;
}

LossValue combined_loss(const Dataset& batch, const LossConfig& config) {
  return combined_loss(FlatBatch(batch).view(), config);
}

}  // namespace detcal
