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

#include "detcal/metrics.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace detcal;
using detcal::testing::make_dataset;
using detcal::testing::random_dataset;
using detcal::testing::rec;

TEST_CASE("ECE examples") {
  auto one = make_dataset(2, {rec({1.0, 0.0}, 0)});
  CHECK(compute_ece(one, 10).value == 0.0);

  auto two = make_dataset(2, {rec({0.6, 0.4}, 0), rec({0.8, 0.2}, 1)});
  CHECK(compute_ece(two, 1).value == doctest::Approx(0.2).epsilon(1e-12));

  auto four = make_dataset(2, {rec({0.6, 0.4}, 0), rec({0.7, 0.3}, 0), rec({0.8, 0.2}, 1), rec({0.9, 0.1}, 0)});
  CHECK(compute_ece(four, 2).value < 1e-15);
}

TEST_CASE("ECE report carries every bin") {
  auto two = make_dataset(2, {rec({0.6, 0.4}, 0), rec({0.8, 0.2}, 1)});
  auto r = compute_ece(two, 5);
  CHECK(r.metric == MetricKind::ece);
  CHECK(r.bins.size() == 5);
  CHECK(r.total_count == 2);
  CHECK(r.bins[3].count == 1);
  CHECK(r.bins[4].count == 1);
  CHECK(r.bins[4].positive_count == 0);
  CHECK(r.recompute() == doctest::Approx(r.value).epsilon(1e-12));
}

TEST_CASE("D-ECE examples") {
  Rng rng(4);
  auto d = random_dataset(rng, 300, 4);
  CHECK(std::fabs(compute_d_ece(d, BinningScheme::confidence_only(25)).value - compute_ece(d, 25).value) < 1e-12);

  auto dist = make_dataset(2, {rec({0.9, 0.1}, 0, {10.0}), rec({0.9, 0.1}, 1, {70.0})}, {"dist"});
  auto scheme = BinningScheme::confidence_only(1).with_feature("dist", 2, 0.0, 80.0);
  CHECK(compute_d_ece(dist, scheme).value == doctest::Approx(0.5).epsilon(1e-12));
  // Without the distance axis the two cancel out partially.
  CHECK(compute_ece(dist, 1).value == doctest::Approx(0.4).epsilon(1e-12));
}

TEST_CASE("D-ECE rejects mismatched feature layout") {
  auto d = make_dataset(2, {rec({0.9, 0.1}, 0)});
  auto scheme = BinningScheme::confidence_only(1).with_feature("dist", 2, 0.0, 80.0);
  try {
    compute_d_ece(d, scheme);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::dimension_mismatch);
  }
}

TEST_CASE("D-ECE is zero when confidence equals bin precision") {
  // Bin [0.5,0.75): four records at 0.5 with two correct; bin [0.75,1]: four
  // at 0.75 with three correct.
  Dataset d(2);
  for (int i = 0; i < 4; ++i) d.add(rec({0.5, 0.3}, i < 2 ? 0 : 1));
  for (int i = 0; i < 4; ++i) d.add(rec({0.75, 0.1}, i < 3 ? 0 : 1));
  CHECK(compute_d_ece(d, BinningScheme::confidence_only(4)).value < 1e-15);
}

TEST_CASE("Full D-ECE examples") {
  auto a = make_dataset(2, {rec({0.8, 0.2}, 0), rec({0.6, 0.4}, 1)});
  CHECK(compute_full_d_ece(a, 1).value < 1e-15);

  auto b = make_dataset(2, {rec({0.9, 0.1}, 0), rec({0.9, 0.1}, 1)});
  auto r = compute_full_d_ece(b, 2);
  CHECK(r.value == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(r.total_count == 4);
  CHECK(*r.denominator == Denominator::predictions);

  auto det = compute_full_d_ece(b, 2, Denominator::detections);
  CHECK(det.value == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(det.total_count == 2);
}

TEST_CASE("Full D-ECE is near zero for uniform confidences") {
  Rng rng(2);
  Dataset d(4);
  for (int i = 0; i < 40000; ++i) d.add(rec({0.25, 0.25, 0.25, 0.25}, rng.below(4)));
  CHECK(compute_full_d_ece(d, 4).value < 0.01);
}

TEST_CASE("metrics refuse an empty dataset") {
  Dataset d(3);
  for (auto f : {+[](const Dataset& x) { compute_ece(x); }, +[](const Dataset& x) { compute_full_d_ece(x); }}) {
    try {
      f(d);
      FAIL("expected throw");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::empty_dataset);
    }
  }
}

TEST_CASE("reliability data") {
  auto one = make_dataset(2, {rec({1.0, 0.0}, 0)});
  auto pts = reliability_data(one, 2, PredictionMode::dominant);
  REQUIRE(pts.size() == 1);
  CHECK(pts[0].bin_center == 0.75);
  CHECK(pts[0].empirical == 1.0);
  CHECK(pts[0].mean_confidence == 1.0);
  CHECK(pts[0].count == 1);

  auto b = make_dataset(2, {rec({0.9, 0.1}, 0), rec({0.9, 0.1}, 1)});
  pts = reliability_data(b, 2, PredictionMode::full);
  REQUIRE(pts.size() == 2);
  CHECK(pts[0].bin_center == 0.25);
  CHECK(pts[0].empirical == 0.5);
  CHECK(pts[0].mean_confidence == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(pts[0].count == 2);
  CHECK(pts[1].bin_center == 0.75);
  CHECK(pts[1].empirical == 0.5);
  CHECK(pts[1].mean_confidence == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(pts[1].count == 2);
}

TEST_CASE("metrics match the brute-force oracle") {
  Rng rng(2024);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 1 + rng.below(60), c = 2 + rng.below(4), b = 1 + rng.below(10);
    const std::size_t fb = 1 + rng.below(5);
    auto d = random_dataset(rng, n, c, 1, 50.0);
    CHECK(std::fabs(compute_ece(d, b).value - oracle::dominant_metric(d, {{b, 0, 1}})) < 1e-12);
    auto scheme = BinningScheme::confidence_only(b).with_feature("f", fb, 0.0, 50.0);
    CHECK(std::fabs(compute_d_ece(d, scheme).value - oracle::dominant_metric(d, {{b, 0, 1}, {fb, 0, 50}})) < 1e-12);
    CHECK(std::fabs(compute_full_d_ece(d, b).value - oracle::full_metric(d, b, false)) < 1e-12);
    CHECK(std::fabs(compute_full_d_ece(d, b, Denominator::detections).value - oracle::full_metric(d, b, true)) <
          1e-12);
  }
}

TEST_CASE("metric invariants") {
  Rng rng(77);
  for (int t = 0; t < 50; ++t) {
    const std::size_t b = 1 + rng.below(12);
    auto d = random_dataset(rng, 1 + rng.below(40), 2 + rng.below(3));

    auto ece = compute_ece(d, b), full = compute_full_d_ece(d, b);
    for (const auto* r : {&ece, &full}) {
      CHECK(r->value >= 0.0);
      CHECK(r->value <= 1.0);
      CHECK(std::fabs(r->recompute() - r->value) < 1e-12);
      std::size_t count = 0;
      for (const auto& bin : r->bins) count += bin.count;
      CHECK(count == r->total_count);
    }

    // Permuting the records does not change any metric.
    std::vector<std::size_t> order(d.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    Dataset perm = d.empty_like();
    for (auto i : order) perm.add(d[i]);
    CHECK(std::fabs(compute_ece(perm, b).value - ece.value) < 1e-12);
    CHECK(std::fabs(compute_full_d_ece(perm, b).value - full.value) < 1e-12);

    // Duplicating every record leaves the normalised metrics unchanged.
    Dataset twice = d.empty_like();
    for (const auto& r : d.records()) {
      twice.add(r);
      twice.add(r);
    }
    CHECK(std::fabs(compute_ece(twice, b).value - ece.value) < 1e-12);
    CHECK(std::fabs(compute_full_d_ece(twice, b).value - full.value) < 1e-12);
  }
}

TEST_CASE("batch view and dataset overloads agree") {
  Rng rng(8);
  auto d = random_dataset(rng, 50, 3);
  FlatBatch flat(d);
  CHECK(compute_ece(flat.view(), 7).value == compute_ece(d, 7).value);
  CHECK(compute_full_d_ece(flat.view(), 7).value == compute_full_d_ece(d, 7).value);
}
