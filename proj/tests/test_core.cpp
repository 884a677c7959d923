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
#include <numeric>

#include "doctest.h"

#include "detcal/core.hpp"
#include "helpers.hpp"

using namespace detcal;
using detcal::testing::rec;

TEST_CASE("sigmoid activation") {
  auto p = sigmoid_activate(LogitVector({0.0, 0.0}));
  CHECK(p[0] == 0.5);
  CHECK(p[1] == 0.5);

  p = sigmoid_activate(LogitVector({20.0, -20.0}));
  CHECK(p[0] == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(p[1] < 1e-8);

  p = sigmoid_activate(LogitVector({0.5, -0.5, 0.0}));
  CHECK(std::fabs(p[0] - 0.62246) < 1e-5);
  CHECK(std::fabs(p[1] - 0.37754) < 1e-5);
  CHECK(p[2] == 0.5);
}

TEST_CASE("sigmoid is stable at extreme logits") {
  CHECK(sigmoid(-800.0) == 0.0);
  CHECK(sigmoid(800.0) == 1.0);
  CHECK(std::isfinite(sigmoid(-1e308)));
}

TEST_CASE("softmax activation") {
  auto p = softmax_activate(LogitVector({0.0, 0.0, 0.0}));
  for (std::size_t c = 0; c < 3; ++c) CHECK(p[c] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  p = softmax_activate(LogitVector({1000.0, 0.0}));
  CHECK(p[0] == doctest::Approx(1.0));
  CHECK(p[1] < 1e-300);

  p = softmax_activate(LogitVector({1.0, 2.0}));
  CHECK(std::fabs(p[0] - 0.26894) < 1e-5);
  CHECK(std::fabs(p[1] - 0.73106) < 1e-5);
}

TEST_CASE("softmax sums to one and preserves argmax") {
  Rng rng(11);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> z(2 + rng.below(6));
    for (auto& v : z) v = 10.0 * rng.normal();
    auto p = softmax_activate(LogitVector(z));
    CHECK(std::accumulate(p.values().begin(), p.values().end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
    auto zmax = std::max_element(z.begin(), z.end()) - z.begin();
    CHECK(dominant(p).class_index == static_cast<std::size_t>(zmax));
  }
}

TEST_CASE("dominant prediction") {
  auto d = dominant(ConfidenceVector({0.1, 0.7, 0.2}));
  CHECK(d.class_index == 1);
  CHECK(d.confidence == 0.7);
  CHECK(dominant(ConfidenceVector({0.4, 0.4})).class_index == 0);
  d = dominant(ConfidenceVector({0.25, 0.25, 0.25, 0.25}));
  CHECK(d.class_index == 0);
  CHECK(d.confidence == 0.25);
}

TEST_CASE("confidence and logit validation") {
  CHECK_THROWS_AS(ConfidenceVector({0.5}), Error);
  CHECK_THROWS_AS(ConfidenceVector({0.5, 1.5}), Error);
  CHECK_THROWS_AS(ConfidenceVector({0.5, -0.1}), Error);
  CHECK_THROWS_AS(ConfidenceVector({0.5, std::nan("")}), Error);
  CHECK_THROWS_AS(LogitVector({0.5, INFINITY}), Error);
  CHECK_NOTHROW(ConfidenceVector({0.9, 0.9}));  // need not sum to one
}

TEST_CASE("dataset validation") {
  Dataset d(3);
  d.add(rec({0.1, 0.2, 0.3}, 2, {1.0}));
  SUBCASE("label out of range") {
    try {
      d.add(rec({0.1, 0.2, 0.3}, 7, {1.0}));
      FAIL("expected throw");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::invalid_argument);
    }
  }
  SUBCASE("class count mismatch") {
    try {
      d.add(rec({0.1, 0.2}, 0, {1.0}));
      FAIL("expected throw");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::dimension_mismatch);
    }
  }
  SUBCASE("feature width mismatch") {
    CHECK_THROWS_AS(d.add(rec({0.1, 0.2, 0.3}, 0, {1.0, 2.0})), Error);
  }
  SUBCASE("logits disagree with confidences") {
    DetectionRecord r{"x", LogitVector({0.0, 0.0, 0.0}), ConfidenceVector({0.5, 0.5, 0.4}), 0, {1.0}};
    CHECK_THROWS_AS(d.add(r), Error);
  }
  CHECK(d.size() == 1);
}

TEST_CASE("bin coordinates") {
  auto s = BinningScheme::confidence_only(25);
  CHECK(s.bin_index(std::vector<double>{0.0}) == std::vector<std::size_t>{0});
  CHECK(s.bin_index(std::vector<double>{1.0}) == std::vector<std::size_t>{24});

  auto k2 = BinningScheme::confidence_only(10).with_feature("range", 4, 0.0, 80.0);
  CHECK(k2.bin_index(std::vector<double>{0.55, 79.9}) == std::vector<std::size_t>{5, 3});
  CHECK(k2.total_bins() == 40);
  CHECK(k2.flat_index(std::vector<double>{0.55, 79.9}) == 5 * 4 + 3);
  // Outside the range clamps to the edge bins.
  CHECK(k2.bin_index(std::vector<double>{0.55, 120.0}) == std::vector<std::size_t>{5, 3});
  CHECK(k2.bin_index(std::vector<double>{0.55, -3.0}) == std::vector<std::size_t>{5, 0});
}

TEST_CASE("flat index round trips through unflatten") {
  auto s = BinningScheme::confidence_only(3).with_feature("a", 4, 0, 1).with_feature("b", 5, -1, 1);
  CHECK(s.total_bins() == 60);
  for (std::size_t f = 0; f < s.total_bins(); ++f) {
    auto idx = s.unflatten(f);
    CHECK(idx.size() == 3);
    CHECK((idx[0] * 4 + idx[1]) * 5 + idx[2] == f);
  }
}

TEST_CASE("binning scheme validation") {
  CHECK_THROWS_AS(BinningScheme::confidence_only(0), Error);
  CHECK_THROWS_AS(BinningScheme::confidence_only(5).with_feature("d", 2, 3.0, 3.0), Error);
  CHECK_THROWS_AS(BinningScheme::confidence_only(5).with_feature("d", 0, 0.0, 1.0), Error);
}

TEST_CASE("rng is deterministic and in range") {
  Rng a(5), b(5);
  for (int i = 0; i < 1000; ++i) {
    const double u = a.uniform();
    CHECK(u == b.uniform());
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  Rng c(9);
  std::vector<std::size_t> counts(7, 0);
  for (int i = 0; i < 70000; ++i) ++counts[c.below(7)];
  for (auto k : counts) CHECK(std::fabs(static_cast<double>(k) - 10000.0) < 500.0);

  Rng n(3);
  double s = 0.0, s2 = 0.0;
  const int m = 100000;
  for (int i = 0; i < m; ++i) {
    const double v = n.normal();
    s += v;
    s2 += v * v;
  }
  CHECK(std::fabs(s / m) < 0.02);
  CHECK(std::fabs(s2 / m - 1.0) < 0.02);
}

TEST_CASE("shuffle is a permutation") {
  Rng rng(1);
  std::vector<int> v(100);
  std::iota(v.begin(), v.end(), 0);
  auto w = v;
  rng.shuffle(w);
  CHECK(w != v);
  std::sort(w.begin(), w.end());
  CHECK(w == v);
}
