#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "tsnescope/quality.hpp"
#include "tsnescope/stats.hpp"

namespace ts = tsnescope;
using fixtures::Rng;
using ts::Matrix;

namespace {

// Random instance with occasional exact distance ties from a coarse grid.
Matrix grid_points(Rng& rng, std::size_t n, std::size_t d, int levels) {
  Matrix m(n, d);
  for (double& v : m.data()) v = static_cast<double>(rng.below(levels));
  return m;
}

ts::Embedding random_embedding(Rng& rng, std::size_t n) { return {fixtures::normal_matrix(rng, n, 2)}; }

}  // namespace

TEST(Metric, ParseAndPrint) {
  for (auto m : {ts::Metric::nh, ts::Metric::t, ts::Metric::c, ts::Metric::s, ts::Metric::sdc, ts::Metric::qma})
    EXPECT_EQ(ts::parse_metric(ts::to_string(m)), m);
  EXPECT_EQ(ts::parse_metric("qma"), ts::Metric::qma);
  EXPECT_THROW(ts::parse_metric("XYZ"), ts::Error);
}

TEST(Selection, Validation) {
  EXPECT_THROW(ts::Selection::create({}, 5), ts::Error);
  EXPECT_THROW(ts::Selection::create({1, 1}, 5), ts::Error);
  EXPECT_THROW(ts::Selection::create({5}, 5), ts::Error);
  EXPECT_EQ(ts::Selection::create({3, 0, 2}, 5).indices(), (std::vector<std::size_t>{0, 2, 3}));
  EXPECT_EQ(ts::Selection::all(3).indices(), (std::vector<std::size_t>{0, 1, 2}));
}

TEST(Shepard, MassAndPairOracle) {
  Rng rng(31);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 2 + rng.below(40);
    const Matrix hd = ts::pairwise_distances(grid_points(rng, n, 3, 4 + trial));
    const Matrix ld = ts::pairwise_distances(fixtures::normal_matrix(rng, n, 2));
    bool degenerate = false;
    try {
      const std::size_t bins = 2 + rng.below(15);
      const auto map = ts::shepard_heatmap(hd, ld, bins);
      EXPECT_EQ(map.total(), n * (n - 1) / 2);

      // Oracle: bin each pair from the normalized distances.
      double hmax = 0.0, lmax = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          hmax = std::max(hmax, hd(i, j));
          lmax = std::max(lmax, ld(i, j));
        }
      std::vector<std::uint64_t> want(bins * bins, 0);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
          auto bin = [bins](double v) {
            const double f = std::floor(v * static_cast<double>(bins));
            return f >= static_cast<double>(bins) ? bins - 1 : static_cast<std::size_t>(f);
          };
          ++want[bin(hd(i, j) / hmax) * bins + bin(ld(i, j) / lmax)];
        }
      EXPECT_EQ(map.counts, want);
    } catch (const ts::Error& e) {
      degenerate = e.kind() == ts::ErrorKind::computation;
      EXPECT_TRUE(degenerate);  // all-identical points only
    }
  }
}

TEST(Shepard, IdentityProjectionIsDiagonal) {
  Rng rng(2);
  const auto ds = fixtures::dataset_from(fixtures::uniform_matrix(rng, 60, 2, 7.0));
  const Matrix d = ts::pairwise_distances(ds);
  const auto map = ts::shepard_heatmap(d, ts::pairwise_distances(ds.norm_values()));
  std::uint64_t diag = 0;
  for (std::size_t b = 0; b < map.bins; ++b) diag += map.at(b, b);
  EXPECT_EQ(diag, map.total());
}

TEST(Shepard, PairsSampledWithoutReplacement) {
  Rng rng(3);
  const Matrix hd = ts::pairwise_distances(fixtures::normal_matrix(rng, 30, 4));
  const Matrix ld = ts::pairwise_distances(fixtures::normal_matrix(rng, 30, 2));
  const auto all = ts::shepard_pairs(hd, ld, 10000);
  EXPECT_EQ(all.size(), 435u);
  const auto some = ts::shepard_pairs(hd, ld, 100, 9);
  ASSERT_EQ(some.size(), 100u);
  for (std::size_t k = 1; k < some.size(); ++k)
    EXPECT_TRUE(some[k - 1].i < some[k].i || (some[k - 1].i == some[k].i && some[k - 1].j < some[k].j));
  for (const auto& p : some) {
    EXPECT_LT(p.i, p.j);
    EXPECT_LE(p.x, 1.0);
    EXPECT_LE(p.y, 1.0);
  }
  const auto again = ts::shepard_pairs(hd, ld, 100, 9);
  for (std::size_t k = 0; k < 100; ++k) EXPECT_EQ(again[k].i * 30 + again[k].j, some[k].i * 30 + some[k].j);
}

TEST(NeighborhoodPreservation, MatchesJaccardOracle) {
  Rng rng(41);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 3 + rng.below(13);
    const Matrix hd = ts::pairwise_distances(grid_points(rng, n, 2, 3));  // many ties
    const Matrix ld = ts::pairwise_distances(grid_points(rng, n, 2, 4));
    const auto sel = ts::Selection::create({0, n - 1}, n);
    const auto curve = ts::neighborhood_preservation(hd, ld, sel, n - 1);
    for (std::size_t k = 1; k <= n - 1; ++k) {
      EXPECT_EQ(curve.global[k - 1], oracle::np(hd, ld, k, ts::Selection::all(n).indices()));
      EXPECT_EQ((*curve.selection)[k - 1], oracle::np(hd, ld, k, sel.indices()));
    }
    EXPECT_EQ(curve.global.back(), 1.0);
  }
}

TEST(NeighborhoodPreservation, Bounds) {
  const Matrix d(5, 5, 1.0);
  EXPECT_THROW(ts::neighborhood_preservation(d, d, std::nullopt, 0), ts::Error);
  EXPECT_THROW(ts::neighborhood_preservation(d, d, std::nullopt, 5), ts::Error);
  EXPECT_EQ(ts::default_np_k_max(1000), 50u);
  EXPECT_EQ(ts::default_np_k_max(10), 9u);
}

TEST(QualityMetrics, MatchOracles) {
  Rng rng(51);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 12 + rng.below(30);
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < n; ++i) labels.push_back(rng.below(2) ? "a" : "b");
    const auto ds = fixtures::dataset_from(grid_points(rng, n, 4, 6), labels);
    const auto emb = random_embedding(rng, n);
    const Matrix hd = ts::pairwise_distances(ds), ld = ts::pairwise_distances(emb.coords);
    const std::size_t k = ts::effective_k(n, 7);
    const auto q = ts::compute_quality_scores(ds, emb);
    EXPECT_NEAR(q.t, oracle::trustworthiness(hd, ld, k), 1e-12);
    EXPECT_NEAR(q.c, oracle::continuity(hd, ld, k), 1e-12);
    EXPECT_NEAR(q.s, oracle::stress_score(hd, ld), 1e-12);

    std::vector<double> a, b;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        a.push_back(hd(i, j));
        b.push_back(ld(i, j));
      }
    EXPECT_NEAR(q.sdc, std::max(0.0, oracle::spearman(a, b)), 1e-12);

    double nh = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t same = 0;
      for (std::size_t j : oracle::knn_set(ld, i, k)) same += labels[j] == labels[i];
      nh += static_cast<double>(same) / static_cast<double>(k);
    }
    ASSERT_TRUE(q.nh.has_value());
    EXPECT_NEAR(*q.nh, nh / static_cast<double>(n), 1e-12);
    EXPECT_NEAR(q.qma, (*q.nh + q.t + q.c + q.s + q.sdc) / 5.0, 1e-12);
    for (double v : {*q.nh, q.t, q.c, q.s, q.sdc, q.qma}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(QualityMetrics, PerfectProjectionScoresOne) {
  Rng rng(3);
  const auto ds = fixtures::dataset_from(fixtures::uniform_matrix(rng, 40, 2));
  const ts::Embedding emb{ds.norm_values()};
  const auto q = ts::compute_quality_scores(ds, emb);
  EXPECT_FALSE(q.nh.has_value());
  EXPECT_DOUBLE_EQ(q.t, 1.0);
  EXPECT_DOUBLE_EQ(q.c, 1.0);
  EXPECT_NEAR(q.s, 1.0, 1e-12);
  EXPECT_NEAR(q.sdc, 1.0, 1e-12);
  EXPECT_NEAR(q.qma, (q.t + q.c + q.s + q.sdc) / 4.0, 1e-15);  // QMA over four without labels
  EXPECT_THROW(q.get(ts::Metric::nh), ts::Error);
  EXPECT_THROW(ts::selection_quality(ds, emb, ts::Selection::all(40), ts::Metric::nh), ts::Error);
}

TEST(QualityMetrics, ScaleInvariantStress) {
  Rng rng(4);
  const auto ds = fixtures::dataset_from(fixtures::uniform_matrix(rng, 30, 3));
  ts::Embedding emb{fixtures::normal_matrix(rng, 30, 2)};
  const double s1 = ts::compute_quality_scores(ds, emb).s;
  for (double& v : emb.coords.data()) v *= 37.0;
  EXPECT_NEAR(ts::compute_quality_scores(ds, emb).s, s1, 1e-12);
}

TEST(QualityMetrics, EffectiveK) {
  EXPECT_EQ(ts::effective_k(1000, 7), 7u);
  EXPECT_EQ(ts::effective_k(5, 7), 2u);
  EXPECT_EQ(ts::effective_k(3, 7), 1u);
  EXPECT_THROW(ts::effective_k(2, 7), ts::Error);
  EXPECT_THROW(ts::effective_k(10, 0), ts::Error);
  for (std::size_t n = 3; n < 40; ++n) {
    const std::size_t k = ts::effective_k(n, 7);
    EXPECT_GT(2 * n, 3 * k + 1);
    EXPECT_LE(k, n - 2);
  }
}

TEST(QualityMetrics, SelectionAllIsBitExact) {
  Rng rng(61);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 10 + rng.below(40);
    std::optional<std::vector<std::string>> labels;
    if (trial % 2 == 0) {
      labels.emplace();
      for (std::size_t i = 0; i < n; ++i) labels->push_back(std::to_string(rng.below(3)));
    }
    const auto ds = fixtures::dataset_from(fixtures::normal_matrix(rng, n, 5), labels);
    const auto emb = random_embedding(rng, n);
    const auto global = ts::compute_quality_scores(ds, emb);
    const auto all = ts::Selection::all(n);
    for (auto m : {ts::Metric::nh, ts::Metric::t, ts::Metric::c, ts::Metric::s, ts::Metric::sdc, ts::Metric::qma}) {
      if (m == ts::Metric::nh && !labels) continue;
      EXPECT_EQ(ts::selection_quality(ds, emb, all, m), global.get(m));
    }
  }
}

TEST(QualityMetrics, SelectionScopesToSubset) {
  // A projection that is exact for the first half and scrambled for the rest.
  Rng rng(7);
  const std::size_t n = 40;
  const auto ds = fixtures::dataset_from(fixtures::uniform_matrix(rng, n, 2));
  ts::Embedding emb{ds.norm_values()};
  for (std::size_t i = 20; i < n; ++i) {
    emb.coords(i, 0) = rng.uniform();
    emb.coords(i, 1) = rng.uniform();
  }
  std::vector<std::size_t> good(10), bad(10);
  std::iota(good.begin(), good.end(), 0);
  std::iota(bad.begin(), bad.end(), 25);
  for (auto m : {ts::Metric::t, ts::Metric::c, ts::Metric::qma})
    EXPECT_GT(ts::selection_quality(ds, emb, ts::Selection::create(good, n), m),
              ts::selection_quality(ds, emb, ts::Selection::create(bad, n), m));
}

TEST(Histogram, MatchesBinningOracle) {
  Rng rng(71);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> v(1 + rng.below(200));
    for (double& x : v) x = std::floor(rng.normal() * 10.0) / 4.0;
    const std::size_t bins = 1 + rng.below(30);
    const auto h = ts::histogram(v, bins);
    ASSERT_EQ(h.edges.size(), bins + 1);
    ASSERT_EQ(h.counts.size(), bins);
    const double lo = *std::min_element(v.begin(), v.end()), hi = *std::max_element(v.begin(), v.end());
    EXPECT_EQ(h.edges.front(), lo);
    EXPECT_EQ(h.edges.back(), hi);
    std::vector<std::uint64_t> want(bins, 0);
    for (double x : v) {
      std::size_t b = 0;
      if (hi > lo) {
        b = static_cast<std::size_t>(std::floor((x - lo) / (hi - lo) * static_cast<double>(bins)));
        b = std::min(b, bins - 1);
      }
      ++want[b];
    }
    EXPECT_EQ(h.counts, want);
  }
  EXPECT_THROW(ts::histogram({}, 3), ts::Error);
  EXPECT_THROW(ts::histogram({1.0}, 0), ts::Error);
}

TEST(Stats, SpearmanMatchesTieCorrectedOracle) {
  Rng rng(81);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 2 + rng.below(60);
    const int levels = 2 + static_cast<int>(rng.below(20));
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = static_cast<double>(rng.below(levels));
      b[i] = trial % 3 == 0 ? rng.normal() : static_cast<double>(rng.below(levels));
    }
    EXPECT_NEAR(ts::spearman(a, b), oracle::spearman(a, b), 1e-12);
  }
  const std::vector<double> c(5, 2.0), r{1, 2, 3, 4, 5};
  EXPECT_EQ(ts::spearman(c, r), 0.0);
  EXPECT_THROW(ts::spearman(std::vector<double>{1.0}, std::vector<double>{1.0}), ts::Error);
  EXPECT_THROW(ts::spearman(r, std::vector<double>{1.0, 2.0}), ts::Error);
}

TEST(Stats, FractionalRanks) {
  const std::vector<double> v{10, 20, 10, 30, 20, 20};
  EXPECT_EQ(ts::fractional_ranks(v), (std::vector<double>{1.5, 4, 1.5, 6, 4, 4}));
}
