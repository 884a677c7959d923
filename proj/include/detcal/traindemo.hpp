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
#include <span>
#include <vector>

#include "detcal/core.hpp"
#include "detcal/losses.hpp"

namespace detcal {

struct MixtureData {
  Matrix inputs;  // n x 2
  std::vector<std::size_t> labels;
  std::size_t num_classes = 0;

  std::size_t size() const { return labels.size(); }
};

/// C isotropic Gaussian clusters with standard deviation `overlap`, centred
/// on a circle of radius 2. Record i belongs to class i % C.
MixtureData make_mixture_data(std::size_t num_classes, std::size_t n, double overlap, std::uint64_t seed);

/// input -> tanh(W1 x + b1) -> softmax(W2 h + b2).
///
/// All parameters live in one flat vector: W1 (hidden x input, row-major),
/// b1, W2 (classes x hidden, row-major), b2.
class ToyClassifier {
 public:
  ToyClassifier(std::size_t input_dim, std::size_t hidden_dim, std::size_t num_classes, std::uint64_t seed);

  std::size_t input_dim() const { return input_dim_; }
  std::size_t hidden_dim() const { return hidden_dim_; }
  std::size_t num_classes() const { return num_classes_; }

  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }

  struct Forward {
    Matrix hidden;  // n x hidden, post-tanh
    Matrix probs;   // n x classes
  };
  Forward forward(const Matrix& inputs) const;

  // Gradient of a scalar loss w.r.t. the flat parameter vector, given the
  // loss gradient w.r.t. the softmax outputs.
  std::vector<double> backward(const Matrix& inputs, const Forward& fwd, const Matrix& grad_probs) const;

 private:
  std::size_t w1_offset() const { return 0; }
  std::size_t b1_offset() const { return hidden_dim_ * input_dim_; }
  std::size_t w2_offset() const { return b1_offset() + hidden_dim_; }
  std::size_t b2_offset() const { return w2_offset() + num_classes_ * hidden_dim_; }

  std::size_t input_dim_;
  std::size_t hidden_dim_;
  std::size_t num_classes_;
  std::vector<double> params_;
};

struct TrainConfig {
  LossConfig loss;
  std::size_t epochs = 20;
  std::size_t batch_size = 64;
  double learning_rate = 0.1;
  std::uint64_t seed = 0;
  std::vector<double> alpha_sweep{0.5, 1.0, 2.0, 5.0, 10.0, 20.0};

  void validate() const;
};

struct EpochLog {
  std::size_t epoch;
  double base_part;  // means over the epoch's minibatches
  double aux_part;
  double total;
  double heldout_accuracy;
  double heldout_ece;
  double heldout_full_d_ece;
};

struct TrainResult {
  ToyClassifier model;
  std::vector<EpochLog> log;
};

// Loss and parameter gradient on one batch.
struct BatchLoss {
  LossValue loss;
  std::vector<double> gradient;
};
BatchLoss batch_loss(const ToyClassifier& model, const Matrix& inputs, std::span<const std::size_t> labels,
                     const LossConfig& config);

struct HeldoutMetrics {
  double accuracy;
  double ece;
  double full_d_ece;
};
HeldoutMetrics evaluate(const ToyClassifier& model, const MixtureData& data);

/// Plain minibatch SGD. Throws Error(divergence) on a non-finite loss.
TrainResult train(ToyClassifier model, const MixtureData& data, const MixtureData& heldout,
                  const TrainConfig& config);

/// Whole toy experiment for one seed: data, held-out data, init and
/// shuffling all derive from `config.seed`.
struct ToyExperiment {
  std::size_t num_classes = 3;
  std::size_t n = 20000;
  std::size_t heldout_n = 10000;
  double overlap = 1.5;
  std::size_t hidden_dim = 32;
};
TrainResult run_toy_experiment(const ToyExperiment& experiment, const TrainConfig& config);

}  // namespace detcal
