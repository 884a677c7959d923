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

#include "detcal/traindemo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "detcal/metrics.hpp"

namespace detcal {

namespace {

constexpr double kMixtureRadius = 2.0;

// Independent streams per purpose, all derived from one user seed.
constexpr std::uint64_t kInitStream = 0x9e3779b97f4a7c15ULL;
constexpr std::uint64_t kShuffleStream = 0xbf58476d1ce4e5b9ULL;
constexpr std::uint64_t kHeldoutStream = 0x94d049bb133111ebULL;

BatchView view_of(const Matrix& probs, std::span<const std::size_t> labels) {
  return {probs.data(), probs.cols(), labels, {}, 0};
}

}  // namespace

MixtureData make_mixture_data(std::size_t num_classes, std::size_t n, double overlap, std::uint64_t seed) {
  if (num_classes < 2) throw Error(ErrorCode::invalid_argument, "mixture: need >= 2 classes");
  if (n < 1) throw Error(ErrorCode::invalid_argument, "mixture: n must be >= 1");
  if (!(overlap > 0.0) || !std::isfinite(overlap)) {
    throw Error(ErrorCode::invalid_argument, "mixture: overlap must be > 0");
  }
  MixtureData data{Matrix(n, 2), std::vector<std::size_t>(n), num_classes};
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % num_classes;
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(c) / static_cast<double>(num_classes);
    data.labels[i] = c;
    data.inputs(i, 0) = kMixtureRadius * std::cos(angle) + overlap * rng.normal();
    data.inputs(i, 1) = kMixtureRadius * std::sin(angle) + overlap * rng.normal();
  }
  return data;
}

ToyClassifier::ToyClassifier(std::size_t input_dim, std::size_t hidden_dim, std::size_t num_classes,
                             std::uint64_t seed)
    : input_dim_(input_dim), hidden_dim_(hidden_dim), num_classes_(num_classes) {
  if (input_dim < 1 || hidden_dim < 1 || num_classes < 2) {
    throw Error(ErrorCode::invalid_argument, "classifier: invalid layer sizes");
  }
  params_.assign(b2_offset() + num_classes_, 0.0);
  Rng rng(seed);
  const double s1 = 1.0 / std::sqrt(static_cast<double>(input_dim_));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden_dim_));
  for (std::size_t k = 0; k < hidden_dim_ * input_dim_; ++k) params_[w1_offset() + k] = s1 * rng.normal();
  for (std::size_t k = 0; k < num_classes_ * hidden_dim_; ++k) params_[w2_offset() + k] = s2 * rng.normal();
}

ToyClassifier::Forward ToyClassifier::forward(const Matrix& inputs) const {
  if (inputs.cols() != input_dim_) throw Error(ErrorCode::dimension_mismatch, "classifier: input width mismatch");
  const std::size_t n = inputs.rows();
  Forward fwd{Matrix(n, hidden_dim_), Matrix(n, num_classes_)};
  const double* w1 = params_.data() + w1_offset();
  const double* b1 = params_.data() + b1_offset();
  const double* w2 = params_.data() + w2_offset();
  const double* b2 = params_.data() + b2_offset();
  std::vector<double> logits(num_classes_);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t h = 0; h < hidden_dim_; ++h) {
      double s = b1[h];
      for (std::size_t d = 0; d < input_dim_; ++d) s += w1[h * input_dim_ + d] * inputs(i, d);
      fwd.hidden(i, h) = std::tanh(s);
    }
    double zmax = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < num_classes_; ++c) {
      double s = b2[c];
      for (std::size_t h = 0; h < hidden_dim_; ++h) s += w2[c * hidden_dim_ + h] * fwd.hidden(i, h);
      logits[c] = s;
      zmax = std::max(zmax, s);
    }
    double sum = 0.0;
    for (std::size_t c = 0; c < num_classes_; ++c) {
      fwd.probs(i, c) = std::exp(logits[c] - zmax);
      sum += fwd.probs(i, c);
    }
    for (std::size_t c = 0; c < num_classes_; ++c) fwd.probs(i, c) /= sum;
  }
  return fwd;
}

std::vector<double> ToyClassifier::backward(const Matrix& inputs, const Forward& fwd,
                                            const Matrix& grad_probs) const {
  const std::size_t n = inputs.rows();
  std::vector<double> grad(params_.size(), 0.0);
  double* gw1 = grad.data() + w1_offset();
  double* gb1 = grad.data() + b1_offset();
  double* gw2 = grad.data() + w2_offset();
  double* gb2 = grad.data() + b2_offset();
  const double* w2 = params_.data() + w2_offset();
  std::vector<double> dz(num_classes_), dpre(hidden_dim_);
  for (std::size_t i = 0; i < n; ++i) {
    // Softmax Jacobian: dz_j = p_j (g_j - sum_k g_k p_k).
    double dot = 0.0;
    for (std::size_t c = 0; c < num_classes_; ++c) dot += grad_probs(i, c) * fwd.probs(i, c);
    for (std::size_t c = 0; c < num_classes_; ++c) dz[c] = fwd.probs(i, c) * (grad_probs(i, c) - dot);

    for (std::size_t c = 0; c < num_classes_; ++c) {
      gb2[c] += dz[c];
      for (std::size_t h = 0; h < hidden_dim_; ++h) gw2[c * hidden_dim_ + h] += dz[c] * fwd.hidden(i, h);
    }
    for (std::size_t h = 0; h < hidden_dim_; ++h) {
      double da = 0.0;
      for (std::size_t c = 0; c < num_classes_; ++c) da += dz[c] * w2[c * hidden_dim_ + h];
      const double a = fwd.hidden(i, h);
      dpre[h] = da * (1.0 - a * a);
      gb1[h] += dpre[h];
      for (std::size_t d = 0; d < input_dim_; ++d) gw1[h * input_dim_ + d] += dpre[h] * inputs(i, d);
    }
  }
  return grad;
}

void TrainConfig::validate() const {
  loss.validate();
  if (epochs < 1) throw Error(ErrorCode::invalid_argument, "train: epochs must be >= 1");
  if (batch_size < 1) throw Error(ErrorCode::invalid_argument, "train: batch_size must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw Error(ErrorCode::invalid_argument, "train: learning_rate must be > 0");
  }
}

BatchLoss batch_loss(const ToyClassifier& model, const Matrix& inputs, std::span<const std::size_t> labels,
                     const LossConfig& config) {
  auto fwd = model.forward(inputs);
  auto loss = combined_loss(view_of(fwd.probs, labels), config);
  auto grad = model.backward(inputs, fwd, loss.grad_confidences);
  return {std::move(loss), std::move(grad)};
}

HeldoutMetrics evaluate(const ToyClassifier& model, const MixtureData& data) {
  auto fwd = model.forward(data.inputs);
  auto view = view_of(fwd.probs, data.labels);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    correct += dominant(view.row(i)).class_index == data.labels[i] ? 1 : 0;
  }
  return {static_cast<double>(correct) / static_cast<double>(data.size()),
          compute_ece(view, kEvalBins).value,
          compute_full_d_ece(view, kEvalBins, Denominator::predictions).value};
}

TrainResult train(ToyClassifier model, const MixtureData& data, const MixtureData& heldout,
                  const TrainConfig& config) {
  config.validate();
  if (data.num_classes != model.num_classes() || heldout.num_classes != model.num_classes()) {
    throw Error(ErrorCode::dimension_mismatch, "train: class count differs between data and model");
  }
  if (data.size() == 0 || heldout.size() == 0) throw Error(ErrorCode::empty_dataset, "train: no data");

  TrainResult result{std::move(model), {}};
  ToyClassifier& net = result.model;
  Rng shuffle_rng(config.seed ^ kShuffleStream);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double base_sum = 0.0, aux_sum = 0.0, total_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t m = std::min(config.batch_size, order.size() - start);
      Matrix x(m, data.inputs.cols());
      std::vector<std::size_t> y(m);
      for (std::size_t k = 0; k < m; ++k) {
        const std::size_t idx = order[start + k];
        for (std::size_t d = 0; d < x.cols(); ++d) x(k, d) = data.inputs(idx, d);
        y[k] = data.labels[idx];
      }
      auto step = batch_loss(net, x, y, config.loss);
      if (!std::isfinite(step.loss.total)) {
        throw Error(ErrorCode::divergence, "training diverged at epoch " + std::to_string(epoch) +
                                               ", batch " + std::to_string(batches) + ": loss is not finite");
      }
      auto params = net.parameters();
      for (std::size_t k = 0; k < params.size(); ++k) params[k] -= config.learning_rate * step.gradient[k];
      base_sum += step.loss.base_part;
      aux_sum += step.loss.aux_part;
      total_sum += step.loss.total;
      ++batches;
    }
    auto metrics = evaluate(net, heldout);
    const double nb = static_cast<double>(batches);
    result.log.push_back({epoch, base_sum / nb, aux_sum / nb, total_sum / nb, metrics.accuracy, metrics.ece,
                          metrics.full_d_ece});
  }
  return result;
}

TrainResult run_toy_experiment(const ToyExperiment& experiment, const TrainConfig& config) {
  auto data = make_mixture_data(experiment.num_classes, experiment.n, experiment.overlap, config.seed);
  auto heldout = make_mixture_data(experiment.num_classes, experiment.heldout_n, experiment.overlap,
                                   config.seed ^ kHeldoutStream);
  ToyClassifier model(2, experiment.hidden_dim, experiment.num_classes, config.seed ^ kInitStream);
  return train(std::move(model), data, heldout, config);
}

}  // namespace detcal
