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

#include <cmath>

#include "doctest.h"

#include "detcal/calibrate.hpp"
#include "detcal/metrics.hpp"
#include "detcal/synth.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace detcal;
using detcal::testing::make_dataset;
using detcal::testing::rec;
using detcal::testing::rec_logits;

namespace {

// NLL objective of fit_temperature, evaluated independently.
double temperature_nll(const Dataset& d, double t) {
  double s = 0.0;
  for (const auto& r : d.records()) {
    std::vector<double> z(r.logits->values().begin(), r.logits->values().end());
    for (auto& v : z) v /= t;
    auto p = activate(LogitVector(z), d.activation());
    const auto dom = dominant(r.confidences);
    const double q = std::clamp(p[dom.class_index], 1e-12, 1 - 1e-12);
    s -= dom.class_index == r.label ? std::log(q) : std::log(1 - q);
  }
  return s / static_cast<double>(d.size());
}

Dataset sigmoid_synth(std::size_t n, std::uint64_t seed) {
  SynthConfig cfg;
  cfg.n = n;
  cfg.seed = seed;
  cfg.sampling = LabelSampling::sigmoid_bernoulli;
  return generate_calibrated(cfg);
}

}  // namespace

TEST_CASE("temperature on calibrated sigmoid data is near one") {
  auto d = sigmoid_synth(50000, 3);
  auto t = fit_temperature(d);
  CHECK(t.temperature >= 0.95);
  CHECK(t.temperature <= 1.05);
}

TEST_CASE("temperature agrees with a grid search") {
  auto d = distort(sigmoid_synth(20000, 5), TemperatureDistortion{2.5});
  auto t = fit_temperature(d).temperature;
  double best_t = 0.0, best = INFINITY;
  for (double g = 1.5; g <= 4.0; g += 1e-3) {
    const double v = temperature_nll(d, g);
    if (v < best) {
      best = v;
      best_t = g;
    }
  }
  CHECK(std::fabs(t - best_t) < 2e-3);
  CHECK(t == doctest::Approx(2.5).epsilon(0.05));
}

TEST_CASE("temperature application") {
  auto r = rec_logits({2.0, -1.0, 0.5}, 0);
  auto same = apply_temperature({1.0}, r, Activation::sigmoid);
  for (std::size_t c = 0; c < 3; ++c) CHECK(same.confidences[c] == r.confidences[c]);

  auto flat = apply_temperature({1e9}, r, Activation::sigmoid);
  for (std::size_t c = 0; c < 3; ++c) CHECK(flat.confidences[c] == doctest::Approx(0.5));

  auto sharp = apply_temperature({0.5}, r, Activation::softmax);
  CHECK(dominant(sharp.confidences).class_index == 0);
  CHECK(sharp.confidences[0] == doctest::Approx(softmax_activate(LogitVector({4.0, -2.0, 1.0}))[0]));

  DetectionRecord no_logits = rec({0.6, 0.4}, 0);
  try {
    apply_temperature({2.0}, no_logits, Activation::sigmoid);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::missing_logits);
  }
}

TEST_CASE("temperature preserves argmax") {
  auto d = distort(sigmoid_synth(2000, 9), TemperatureDistortion{3.0});
  auto out = calibrate_dataset(d, fit_temperature(d));
  for (std::size_t i = 0; i < d.size(); ++i) {
    CHECK(dominant(out[i].confidences).class_index == dominant(d[i].confidences).class_index);
  }
}

TEST_CASE("fit refuses degenerate labels") {
  auto d = make_dataset(2, {rec_logits({1.0, 0.0}, 0), rec_logits({2.0, 0.0}, 0)});
  for (auto f : {+[](const Dataset& x) { fit_temperature(x); }, +[](const Dataset& x) { fit_platt(x, FitMode::dominant); }}) {
    try {
      f(d);
      FAIL("expected throw");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::degenerate_labels);
    }
  }
}

TEST_CASE("platt on calibrated data is near identity") {
  auto p = fit_platt(sigmoid_synth(50000, 21), FitMode::dominant);
  CHECK(p.converged);
  CHECK(p.a == doctest::Approx(1.0).epsilon(0.1));
  CHECK(std::fabs(p.b) <= 0.1);
}

TEST_CASE("platt inverts an affine distortion") {
  auto d = distort(sigmoid_synth(50000, 22), AffineDistortion{2.0, 1.0});
  auto p = fit_platt(d, FitMode::dominant);
  CHECK(p.converged);
  CHECK(p.a == doctest::Approx(0.5).epsilon(0.1));
  CHECK(p.b == doctest::Approx(-0.5).epsilon(0.1));

  // Positive slope keeps each record's class ranking.
  auto out = calibrate_dataset(d, p);
  for (std::size_t i = 0; i < 200; ++i) {
    for (std::size_t a = 0; a < 3; ++a) {
      for (std::size_t b = 0; b < 3; ++b) {
        if (d[i].confidences[a] < d[i].confidences[b]) CHECK(out[i].confidences[a] <= out[i].confidences[b]);
      }
    }
  }
}

TEST_CASE("platt matches a grid refinement") {
  auto d = distort(sigmoid_synth(5000, 23), AffineDistortion{1.5, -0.3});
  auto pairs = fit_pairs(d, FitMode::dominant);
  auto nll = [&](double a, double b) {
    double s = 0.0;
    for (const auto& p : pairs) {
      const double q = sigmoid(a * p.logit + b);
      s -= p.positive ? std::log(q) : std::log1p(-q);
    }
    return s;
  };
  double ca = 1.0, cb = 0.0, step = 0.5;
  while (step > 1e-5) {
    double ba = ca, bb = cb, best = nll(ca, cb);
    for (int i = -2; i <= 2; ++i) {
      for (int j = -2; j <= 2; ++j) {
        const double v = nll(ca + i * step, cb + j * step);
        if (v < best) {
          best = v;
          ba = ca + i * step;
          bb = cb + j * step;
        }
      }
    }
    if (ba == ca && bb == cb) step /= 2;
    ca = ba;
    cb = bb;
  }
  auto p = fit_platt(d, FitMode::dominant);
  CHECK(p.a == doctest::Approx(ca).epsilon(1e-3));
  CHECK(p.b == doctest::Approx(cb).epsilon(1e-3));
}

TEST_CASE("platt output is sigmoid") {
  auto d = distort(sigmoid_synth(1000, 2), AffineDistortion{2.0, 1.0});
  auto out = calibrate_dataset(d, fit_platt(d, FitMode::full));
  CHECK(out.activation() == Activation::sigmoid);
}

TEST_CASE("pava examples") {
  std::vector<double> w(2, 1.0);
  CHECK(pava(std::vector<double>{0.0, 1.0}, w) == std::vector<double>{0.0, 1.0});
  auto v = isotonic_fit_values(std::vector<double>{0.1, 0.2, 0.3}, std::vector<double>{1, 0, 1});
  REQUIRE(v.size() == 3);
  CHECK(v[0] == 0.5);
  CHECK(v[1] == 0.5);
  CHECK(v[2] == 1.0);
}

TEST_CASE("pava matches the exhaustive optimum") {
  Rng rng(99);
  for (int t = 0; t < 300; ++t) {
    const std::size_t n = 1 + rng.below(8);
    std::vector<double> x(n), y(n);
    // Coarse grid so ties occur.
    for (auto& v : x) v = static_cast<double>(rng.below(5)) / 4.0;
    for (auto& v : y) v = rng.below(2) ? 1.0 : 0.0;
    auto fit = isotonic_fit_values(x, y);
    auto ref = oracle::isotonic_exhaustive(x, y);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::fabs(fit[i] - ref[i]) < 1e-9);
  }
}

TEST_CASE("isotonic map lookup") {
  IsotonicMap m{{0.2, 0.8}, {0.1, 0.9}, FitMode::dominant};
  CHECK(m(0.5) == 0.1);
  CHECK(m(0.05) == 0.1);
  CHECK(m(0.8) == 0.9);
  CHECK(m(1.0) == 0.9);
}

TEST_CASE("isotonic fit is monotone and applies to every entry") {
  auto d = distort(sigmoid_synth(3000, 4), AffineDistortion{2.0, 0.5});
  for (auto mode : {FitMode::dominant, FitMode::full}) {
    auto m = fit_isotonic(d, mode);
    CHECK(m.fit_mode == mode);
    REQUIRE(!m.values.empty());
    for (std::size_t i = 1; i < m.values.size(); ++i) {
      CHECK(m.breakpoints[i] > m.breakpoints[i - 1]);
      CHECK(m.values[i] >= m.values[i - 1]);
    }
    auto r = apply_isotonic(m, d[0]);
    CHECK(!r.logits);
    for (std::size_t c = 0; c < 3; ++c) CHECK(r.confidences[c] == m(d[0].confidences[c]));
  }
}

TEST_CASE("histogram binning") {
  auto two = make_dataset(2, {rec({0.6, 0.4}, 0), rec({0.8, 0.2}, 1)});
  auto h = fit_histogram(two, 1, FitMode::dominant);
  REQUIRE(h.num_bins() == 1);
  CHECK(h.outputs[0] == 0.5);

  auto all = make_dataset(2, {rec({0.9, 0.1}, 0), rec({0.95, 0.05}, 0)});
  h = fit_histogram(all, 5, FitMode::dominant);
  CHECK(h.outputs[4] == 1.0);
  CHECK(h.outputs[1] == doctest::Approx(0.3));  // empty bin [0.2,0.4) keeps its centre

  auto r = apply_histogram(h, rec({0.92, 0.3}, 0));
  CHECK(r.confidences[0] == 1.0);
  CHECK(r.confidences[1] == doctest::Approx(0.3));
}

TEST_CASE("calibrate_dataset identity and empty input") {
  auto d = sigmoid_synth(500, 1);
  auto same = calibrate_dataset(d, TemperatureParams{1.0});
  CHECK(compute_ece(same).value == compute_ece(d).value);
  CHECK(compute_full_d_ece(same).value == compute_full_d_ece(d).value);
  for (std::size_t i = 0; i < d.size(); ++i) {
    CHECK(same[i].id == d[i].id);
    CHECK(same[i].label == d[i].label);
  }
  Dataset empty(3);
  CHECK(calibrate_dataset(empty, TemperatureParams{2.0}).empty());
  CHECK(calibrate_dataset(empty, IsotonicMap{{0.0}, {0.5}, FitMode::full}).empty());
}
