#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "oracles.hpp"
#include "wcam/metrics.hpp"

using namespace wcam;

namespace {

// Per-cell contribution of a pixel-linear model: sum of w * x over the block.
Grid pixel_contributions(const Image& w, const Image& x, Eigen::Index g) {
  const Eigen::Index f = x.rows() / g;
  Grid out = Grid::Zero(g, g);
  for (std::size_t c = 0; c < x.channel_count(); ++c)
    for (Eigen::Index r = 0; r < g; ++r)
      for (Eigen::Index k = 0; k < g; ++k)
        out(r, k) += w[c].block(r * f, k * f, f, f).cwiseProduct(x[c].block(r * f, k * f, f, f)).sum();
  return out;
}

// Same for a wavelet-linear model: sum of w * coefficient over the cell.
Grid wavelet_contributions(const WaveletPyramid& w, const Image& x, Eigen::Index g) {
  const auto coeffs = dwt_forward(x, w.spec);
  const Eigen::Index f = x.rows() / g;
  Grid out = Grid::Zero(g, g);
  for (std::size_t c = 0; c < x.channel_count(); ++c)
    for (Eigen::Index r = 0; r < g; ++r)
      for (Eigen::Index k = 0; k < g; ++k)
        out(r, k) += w.channels[c].block(r * f, k * f, f, f).cwiseProduct(coeffs.channels[c].block(r * f, k * f, f, f)).sum();
  return out;
}

MetricOptions no_clamp() {
  MetricOptions o;
  o.clamp = false;
  return o;
}

}  // namespace

TEST(Curves, StepCountsAndAuc) {
  EXPECT_EQ(step_count(0, 4, 16), 0);
  EXPECT_EQ(step_count(1, 4, 16), 4);
  EXPECT_EQ(step_count(4, 4, 16), 16);
  EXPECT_EQ(step_count(1, 3, 4), 1);
  EXPECT_NEAR(curve_auc(Eigen::Vector2d(1, 0)), 0.5, 1e-15);
  EXPECT_NEAR(curve_auc(Eigen::Vector3d(1, 1, 0)), 0.75, 1e-15);
}

TEST(Curves, ConstantScorerIsFlat) {
  SyntheticScorer scorer(synthetic::ConstantScore{0.37});
  const auto image = oracle::random_image(8, 8, 3, 1);
  AttributionGrid attr{oracle::random_image(4, 4, 1, 2)[0], FeatureSpace::WaveletCells, 0.0, {WaveletFamily::Haar, 1}};
  for (const auto& curve : {deletion(image, attr, scorer, 1), insertion(image, attr, scorer, 1)}) {
    EXPECT_EQ(curve.scores.size(), 17);
    EXPECT_NEAR((curve.scores.array() - 0.37).abs().maxCoeff(), 0.0, 1e-15);
    EXPECT_NEAR(curve.auc, 0.37, 1e-15);
  }
}

TEST(Curves, EndpointIdentities) {
  const auto image = oracle::random_image(16, 16, 3, 3);
  SyntheticScorer scorer(synthetic::PixelRegionMean{0.1, 0.2, 0.9, 0.7});
  const Image empty(16, 16, 3, 0.0);
  const double full = evaluate(scorer.model(), image);
  const double none = evaluate(scorer.model(), empty);
  for (const auto space : {FeatureSpace::WaveletCells, FeatureSpace::PixelCells}) {
    AttributionGrid attr{oracle::random_image(8, 8, 1, 4)[0], space, 0.0, {WaveletFamily::Daubechies4, 2}};
    MetricOptions options;
    options.steps = 5;
    const auto del = deletion(image, attr, scorer, 1, options);
    const auto ins = insertion(image, attr, scorer, 1, options);
    ASSERT_EQ(del.scores.size(), 6);
    EXPECT_NEAR(del.scores(0), full, 1e-12);
    EXPECT_NEAR(ins.scores(5), full, 1e-12);
    EXPECT_NEAR(del.scores(5), none, 1e-12);
    EXPECT_NEAR(ins.scores(0), none, 1e-12);
    EXPECT_EQ(del.counts.back(), 64);
  }
}

TEST(Curves, TrueWeightsGiveSteepestCurvesAtGridTwo) {
  // f = sum of per-cell contributions; compare against every ordering of 4 cells.
  const auto image = oracle::random_image(8, 8, 1, 5);
  const auto w = oracle::random_image(8, 8, 1, 6);
  SyntheticScorer scorer(synthetic::PixelLinear{w});
  AttributionGrid attr{pixel_contributions(w, image, 2), FeatureSpace::PixelCells, 0.0, {}};
  const auto best_del = deletion(image, attr, scorer, 1, no_clamp());
  const auto best_ins = insertion(image, attr, scorer, 1, no_clamp());

  std::vector<Eigen::Index> order{0, 1, 2, 3};
  int orderings = 0;
  do {
    const auto del = deletion_along(image, attr, order, scorer, 1, no_clamp());
    const auto ins = insertion_along(image, attr, order, scorer, 1, no_clamp());
    for (Eigen::Index t = 0; t <= 4; ++t) {
      EXPECT_LE(best_del.scores(t), del.scores(t) + 1e-12);
      EXPECT_GE(best_ins.scores(t), ins.scores(t) - 1e-12);
    }
    EXPECT_LE(best_del.auc, del.auc + 1e-12);
    EXPECT_GE(best_ins.auc, ins.auc - 1e-12);
    ++orderings;
  } while (std::next_permutation(order.begin(), order.end()));
  EXPECT_EQ(orderings, 24);
}

TEST(Curves, TiesFollowFlatIndex) {
  const auto image = oracle::random_image(8, 8, 3, 7);
  SyntheticScorer scorer(synthetic::PixelRegionMean{0.0, 0.0, 0.6, 0.9});
  AttributionGrid attr{Grid::Constant(4, 4, 0.2), FeatureSpace::WaveletCells, 0.0, {WaveletFamily::Haar, 1}};
  std::vector<Eigen::Index> flat(16);
  std::iota(flat.begin(), flat.end(), Eigen::Index{0});
  EXPECT_EQ(feature_order(attr), flat);
  EXPECT_TRUE(deletion(image, attr, scorer, 1).scores == deletion_along(image, attr, flat, scorer, 1).scores);
}

TEST(Curves, DependOnlyOnTheOrdering) {
  const auto image = oracle::random_image(16, 16, 3, 8);
  SyntheticScorer scorer(synthetic::SubbandEnergy{{WaveletFamily::Haar, 2}, {1, 1, 0, 2, 0, 1, 3}});
  AttributionGrid attr{oracle::random_image(8, 8, 1, 9)[0], FeatureSpace::WaveletCells, 0.0, {WaveletFamily::Haar, 2}};
  AttributionGrid warped = attr;
  warped.importance = (3.0 * attr.importance.array()).exp().matrix();
  EXPECT_TRUE(deletion(image, attr, scorer, 1).scores == deletion(image, warped, scorer, 1).scores);
  EXPECT_TRUE(insertion(image, attr, scorer, 1).scores == insertion(image, warped, scorer, 1).scores);
}

TEST(Curves, Validation) {
  const auto image = oracle::random_image(8, 8, 1, 1);
  SyntheticScorer scorer(synthetic::ConstantScore{});
  AttributionGrid attr{Grid::Zero(4, 4), FeatureSpace::PixelCells, 0.0, {}};
  MetricOptions options;
  options.steps = 17;
  EXPECT_THROW(deletion(image, attr, scorer, 1, options), InvalidParam);
  EXPECT_THROW(deletion_along(image, attr, {0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14}, scorer, 1),
               InvalidParam);
  attr.importance = Grid::Zero(3, 3);
  EXPECT_THROW(deletion(image, attr, scorer, 1), ShapeError);
}

TEST(Materialize, PixelBaselineAndWaveletZeroing) {
  const auto image = oracle::random_image(8, 8, 2, 11);
  Grid keep = Grid::Ones(2, 2);
  EXPECT_TRUE(materialize(image, {keep, FeatureSpace::PixelCells, 0.3, {}}, keep, true)[0] == image[0]);
  keep(0, 1) = 0.0;
  const auto px = materialize(image, {keep, FeatureSpace::PixelCells, 0.3, {}}, keep, true);
  EXPECT_EQ(px[1].block(0, 4, 4, 4).maxCoeff(), 0.3);
  EXPECT_EQ(px[1].block(0, 4, 4, 4).minCoeff(), 0.3);
  EXPECT_TRUE(px[0].leftCols(4) == image[0].leftCols(4));

  const WaveletSpec spec{WaveletFamily::Haar, 1};
  const auto wv = materialize(image, {keep, FeatureSpace::WaveletCells, 0.0, spec}, keep, false);
  auto pyr = dwt_forward(image, spec);
  for (std::size_t c = 0; c < 2; ++c) pyr.subband(c, {1, Orientation::Horizontal}).setZero();
  EXPECT_LE(max_abs_difference(wv, dwt_inverse(pyr)), 1e-12);
}

TEST(MuFidelity, LinearModelsGivePlusMinusOne) {
  const auto image = oracle::random_image(16, 16, 3, 12);
  {
    const auto w = oracle::random_image(16, 16, 3, 13);
    SyntheticScorer scorer(synthetic::PixelLinear{w});
    AttributionGrid attr{pixel_contributions(w, image, 4), FeatureSpace::PixelCells, 0.0, {}};
    auto options = no_clamp();
    EXPECT_NEAR(mu_fidelity(image, attr, scorer, 1, options).correlation, 1.0, 1e-9);
    attr.importance = -attr.importance;
    EXPECT_NEAR(mu_fidelity(image, attr, scorer, 1, options).correlation, -1.0, 1e-9);
  }
  {
    const WaveletSpec spec{WaveletFamily::Daubechies4, 2};
    WaveletPyramid w{dwt_forward(oracle::random_image(16, 16, 3, 14), spec).channels, spec};
    SyntheticScorer scorer(synthetic::WaveletLinear{w});
    AttributionGrid attr{wavelet_contributions(w, image, 8), FeatureSpace::WaveletCells, 0.0, spec};
    const auto r = mu_fidelity(image, attr, scorer, 1, no_clamp());
    EXPECT_NEAR(r.correlation, 1.0, 1e-9);
    EXPECT_FALSE(r.degenerate);
    EXPECT_EQ(r.drops.size(), 200);
  }
}

TEST(MuFidelity, RandomAttributionIsUncorrelated) {
  // Default grid, K = 784. The correlation of subset sums is close to the
  // cell-level sample correlation of the attribution with the true
  // contributions, whose spread shrinks like 1/sqrt(K).
  const auto image = oracle::random_image(56, 56, 3, 15);
  const auto w = oracle::random_image(56, 56, 3, 16);
  SyntheticScorer scorer(synthetic::PixelLinear{w});
  int small = 0;
  const int seeds = 40;
  for (int s = 0; s < seeds; ++s) {
    AttributionGrid attr{oracle::random_image(28, 28, 1, 1000 + s)[0], FeatureSpace::PixelCells, 0.0, {}};
    MetricOptions options;
    options.subset_size = 392;
    options.seed = static_cast<std::uint64_t>(s);
    if (std::abs(mu_fidelity(image, attr, scorer, 1, options).correlation) < 0.2) ++small;
  }
  EXPECT_GE(small, 38);  // at least 95% of seeds
}

TEST(MuFidelity, AffineInvarianceAndDeterminism) {
  const auto image = oracle::random_image(16, 16, 3, 17);
  SyntheticScorer scorer(synthetic::PixelRegionMean{0.0, 0.0, 0.5, 1.0});
  AttributionGrid attr{oracle::random_image(4, 4, 1, 18)[0], FeatureSpace::WaveletCells, 0.0, {WaveletFamily::Haar, 2}};
  const auto base = mu_fidelity(image, attr, scorer, 1);
  AttributionGrid moved = attr;
  moved.importance = (2.5 * attr.importance.array() + 7.0).matrix();
  EXPECT_NEAR(mu_fidelity(image, moved, scorer, 1).correlation, base.correlation, 1e-12);
  EXPECT_EQ(mu_fidelity(image, attr, scorer, 1).correlation, base.correlation);
  MetricOptions other;
  other.seed = 1;
  EXPECT_NE(mu_fidelity(image, attr, scorer, 1, other).correlation, base.correlation);
}

TEST(MuFidelity, ConstantScorerIsDegenerate) {
  SyntheticScorer scorer(synthetic::ConstantScore{0.5});
  AttributionGrid attr{oracle::random_image(4, 4, 1, 1)[0], FeatureSpace::PixelCells, 0.0, {}};
  const auto r = mu_fidelity(oracle::random_image(8, 8, 1, 2), attr, scorer, 1);
  EXPECT_TRUE(r.degenerate);
  EXPECT_EQ(r.correlation, 0.0);
  MetricOptions bad;
  bad.n_subsets = 1;
  EXPECT_THROW(mu_fidelity(oracle::random_image(8, 8, 1, 2), attr, scorer, 1, bad), InvalidParam);
}

TEST(Pearson, KnownValues) {
  EXPECT_NEAR(pearson(Eigen::Vector3d(1, 2, 3), Eigen::Vector3d(2, 4, 6.5)), 0.9979487157886733, 1e-12);
  bool degenerate = false;
  EXPECT_EQ(pearson(Eigen::Vector3d(1, 1, 1), Eigen::Vector3d(1, 2, 3), &degenerate), 0.0);
  EXPECT_TRUE(degenerate);
}
