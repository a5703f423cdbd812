#include <doctest.h>

#include <cmath>

#include "segfuse/metrics.hpp"
#include "test_support.hpp"

using namespace segfuse;
using namespace testing_support;

TEST_CASE("dice") {
  const auto a = box_mask({6, 6, 6}, {1, 1, 1}, {2, 2, 2});
  CHECK(dice(a, a) == 1.0);
  CHECK(dice(a, box_mask({6, 6, 6}, {4, 4, 4}, {5, 5, 5})) == 0.0);
  // |P| = 8, |G| = 4, |P ∩ G| = 4
  const auto g = box_mask({6, 6, 6}, {1, 1, 1}, {2, 2, 1});
  CHECK(dice(a, g) == doctest::Approx(2.0 * 4.0 / 12.0).epsilon(1e-12));
  CHECK(std::abs(dice(a, g) - 0.6667) < 1e-4);
  const BinaryMask empty(Grid({6, 6, 6}));
  CHECK(dice(empty, empty) == 1.0);
  CHECK_THROWS_AS(dice(a, BinaryMask(Grid({6, 6, 5}))), GridMismatchError);
}

TEST_CASE("lesion_f1") {
  const Dims d{10, 3, 3};
  const auto gt = mask_from_points(d, {{0, 0, 0}, {1, 0, 0}, {5, 0, 0}});
  CHECK(lesion_f1(gt, gt, Connectivity::k26) == 1.0);

  // gt components A = {0,1}, B = {5}; pred hits A and has a stray blob at 8.
  const auto pred = mask_from_points(d, {{1, 0, 0}, {8, 2, 2}});
  const auto lc = lesion_counts(pred, gt, Connectivity::k26);
  CHECK(lc.true_positives == 1);
  CHECK(lc.false_positives == 1);
  CHECK(lc.false_negatives == 1);
  CHECK(lesion_f1(pred, gt, Connectivity::k26) == 0.5);
  CHECK(lesion_f1(pred, gt, Connectivity::k26) ==
        oracle::brute_lesion_f1(to_raw(pred), to_raw(gt), 26));

  const BinaryMask empty{Grid(d)};
  CHECK(lesion_f1(empty, empty, Connectivity::k26) == 1.0);
}

TEST_CASE("simple_lesion_count") {
  const Dims d{12, 1, 1};
  const auto three = mask_from_points(d, {{0, 0, 0}, {2, 0, 0}, {4, 0, 0}});
  const auto five = mask_from_points(d, {{0, 0, 0}, {2, 0, 0}, {4, 0, 0}, {6, 0, 0}, {8, 0, 0}});
  const auto four = mask_from_points(d, {{1, 0, 0}, {3, 0, 0}, {5, 0, 0}, {7, 0, 0}});
  CHECK(simple_lesion_count(three, three, Connectivity::k26) == 0);
  CHECK(simple_lesion_count(three, five, Connectivity::k26) == 2);
  CHECK(simple_lesion_count(BinaryMask(Grid(d)), four, Connectivity::k26) == 4);
}

TEST_CASE("volume_difference") {
  const Grid g({10, 10, 10}, {2.0, 1.0, 0.5});
  auto first_n = [&](std::size_t n) {
    std::vector<std::uint8_t> v(g.voxel_count(), 0);
    std::fill_n(v.begin(), n, 1);
    return BinaryMask(g, std::move(v));
  };
  CHECK(volume_difference(first_n(120), first_n(120)) == 0);
  CHECK(volume_difference(first_n(120), first_n(100)) == 20);
  CHECK(volume_difference(first_n(0), first_n(57)) == 57);
  CHECK(volume_difference_mm3(first_n(120), first_n(100)) == 20.0);
}

TEST_CASE("hausdorff95 single voxels") {
  const auto a = mask_from_points({5, 1, 1}, {{0, 0, 0}});
  const auto b = mask_from_points({5, 1, 1}, {{3, 0, 0}});
  CHECK(hausdorff95(a, a) == 0.0);
  CHECK(*hausdorff95(a, b) == 3.0);
  const auto a2 = mask_from_points({5, 1, 1}, {{0, 0, 0}}, {2, 1, 1});
  const auto b2 = mask_from_points({5, 1, 1}, {{3, 0, 0}}, {2, 1, 1});
  CHECK(*hausdorff95(a2, b2) == 6.0);
  CHECK_FALSE(hausdorff95(a, BinaryMask(Grid({5, 1, 1}))).has_value());
  CHECK_FALSE(hausdorff95(BinaryMask(Grid({5, 1, 1})), BinaryMask(Grid({5, 1, 1}))).has_value());
}

TEST_CASE("hausdorff95 of nested boxes") {
  // P: 2x2x2 box, G: its bottom 2x2x1 layer. Pooled distances are eight 0s
  // and four 1s; rank 0.95 * 11 = 10.45 falls between two 1s.
  const auto p = box_mask({6, 6, 6}, {1, 1, 1}, {2, 2, 2});
  const auto g = box_mask({6, 6, 6}, {1, 1, 1}, {2, 2, 1});
  CHECK(*hausdorff95(p, g) == 1.0);
  CHECK(*hausdorff95(p, g, HausdorffVariant::kMaxOfDirected) == 1.0);
}

TEST_CASE("surface voxels treat the grid edge as background") {
  const BinaryMask full(Grid({3, 3, 3}), std::vector<std::uint8_t>(27, 1));
  const auto s = surface_voxels(full);
  CHECK(foreground_count(s) == 26);
  CHECK(s.at(1, 1, 1) == 0);
}

TEST_CASE("distance transform matches brute force") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    std::uniform_real_distribution<double> sp(0.5, 3.0);
    const Grid g(random_dims(rng, 9), {sp(rng), sp(rng), sp(rng)});
    std::bernoulli_distribution on(0.05);
    std::vector<std::uint8_t> v(g.voxel_count());
    for (auto& x : v) x = on(rng);
    const BinaryMask sites(g, v);
    const auto d = distance_to_sites(sites);
    for (std::size_t i = 0; i < v.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      const auto a = g.coords(i);
      for (std::size_t j = 0; j < v.size(); ++j) {
        if (!v[j]) continue;
        const auto b = g.coords(j);
        double d2 = 0;
        for (int k = 0; k < 3; ++k) d2 += std::pow((a[k] - b[k]) * g.spacing()[k], 2);
        best = std::min(best, std::sqrt(d2));
      }
      if (std::isinf(best)) {
        CHECK(std::isinf(d[i]));
      } else {
        CHECK(std::abs(d[i] - best) < 1e-9);
      }
    }
  }
}

TEST_CASE("percentile uses linear interpolation between closest ranks") {
  CHECK(percentile({5.0}, 0.95) == 5.0);
  CHECK(percentile({0.0, 10.0}, 0.95) == doctest::Approx(9.5));
  CHECK(percentile({4.0, 1.0, 3.0, 2.0}, 0.5) == 2.5);
  CHECK(percentile({4.0, 1.0, 3.0, 2.0}, 1.0) == 4.0);
  CHECK_THROWS_AS(percentile({}, 0.5), ValidationError);
}

TEST_CASE("property: symmetry and bounds on random masks") {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> sp(0.5, 3.0);
  for (int trial = 0; trial < 40; ++trial) {
    const Grid g(random_dims(rng, 8), {sp(rng), sp(rng), sp(rng)});
    const auto a = random_nonempty_mask(rng, g);
    const auto b = random_nonempty_mask(rng, g);
    CHECK(dice(a, b) == dice(b, a));
    CHECK(*hausdorff95(a, b) == *hausdorff95(b, a));
    CHECK(volume_difference(a, b) == volume_difference(b, a));
    CHECK(simple_lesion_count(a, b, Connectivity::k26) == simple_lesion_count(b, a, Connectivity::k26));
    CHECK(dice(a, a) == 1.0);
    CHECK(*hausdorff95(a, a) == 0.0);
    CHECK(*hausdorff95(a, b) <= *hausdorff_percentile(a, b, 1.0));
    const double f1 = lesion_f1(a, b, Connectivity::k6);
    CHECK(f1 >= 0.0);
    CHECK(f1 <= 1.0);
  }
}

TEST_CASE("evaluate_case and aggregate") {
  const auto p = box_mask({6, 6, 6}, {1, 1, 1}, {2, 2, 2});
  const auto g = box_mask({6, 6, 6}, {1, 1, 1}, {2, 2, 1});
  const MetricReport r = evaluate_case(p, g);
  CHECK(r.dice == doctest::Approx(2.0 / 3.0));
  CHECK(r.lesion_f1 == 1.0);
  CHECK(r.slc == 0);
  CHECK(r.vd == 4.0);
  CHECK(*r.hd95 == 1.0);
  CHECK(r.pred_components == 1);
  CHECK(r.gt_components == 1);

  SUBCASE("singleton") {
    const MetricReport reports[] = {r};
    const auto agg = aggregate(reports);
    CHECK(agg.dice.mean == r.dice);
    CHECK(agg.dice.std == 0.0);
    CHECK(agg.subjects == 1);
  }
  SUBCASE("two-point statistics and undefined hd95") {
    MetricReport a = r, b = r;
    a.dice = 0.5;
    b.dice = 0.7;
    b.hd95.reset();
    const MetricReport reports[] = {a, b};
    const auto agg = aggregate(reports);
    CHECK(agg.dice.mean == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(agg.dice.std == doctest::Approx(0.1).epsilon(1e-12));
    REQUIRE(agg.hd95.has_value());
    CHECK(agg.hd95->count == 1);
    CHECK(agg.hd95_undefined == 1);
    const MetricReport reversed[] = {b, a};
    const auto agg2 = aggregate(reversed);
    CHECK(agg2.dice.mean == agg.dice.mean);
    CHECK(agg2.dice.std == agg.dice.std);
  }
  CHECK_THROWS_AS(aggregate(std::span<const MetricReport>{}), ValidationError);
}
