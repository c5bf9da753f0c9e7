#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "oracles.hpp"
#include "wcam/remote.hpp"
#include "wcam/scorer.hpp"

using namespace wcam;

TEST(Synthetic, ConstantAndClassComplement) {
  SyntheticScorer s(synthetic::ConstantScore{0.3});
  const std::vector<Image> images(3, Image(4, 4, 1, 0.0));
  EXPECT_EQ(s.score(images, 1), std::vector<double>(3, 0.3));
  for (const double v : s.score(images, 0)) EXPECT_NEAR(v, 0.7, 1e-15);
  const auto all = s.score_all(images);
  ASSERT_EQ(all.size(), 3u);
  EXPECT_NEAR(all[0][0], 0.7, 1e-15);
  EXPECT_NEAR(all[0][1], 0.3, 1e-15);
  EXPECT_THROW(s.score(images, 2), ScorerError);
}

TEST(Synthetic, RegionMeanAveragesOverChannels) {
  Image image(4, 4, 2, 0.0);
  image[0].topLeftCorner(2, 2).setConstant(1.0);
  image[1].topLeftCorner(2, 2).setConstant(0.5);
  image[0](3, 3) = 100.0;  // outside the region
  EXPECT_NEAR(evaluate(synthetic::PixelRegionMean{}, image), 0.75, 1e-15);
  EXPECT_NEAR(evaluate(synthetic::PixelRegionMean{0.5, 0.5, 1.0, 1.0}, image), 100.0 / 8.0, 1e-12);
  EXPECT_THROW(evaluate(synthetic::PixelRegionMean{0.5, 0.5, 0.5, 1.0}, image), InvalidParam);
}

TEST(Synthetic, PixelLinearIsDotProduct) {
  const auto w = oracle::random_image(3, 5, 2, 1);
  const auto x = oracle::random_image(3, 5, 2, 2);
  double expected = 0.0;
  for (std::size_t c = 0; c < 2; ++c)
    for (Eigen::Index r = 0; r < 3; ++r)
      for (Eigen::Index k = 0; k < 5; ++k) expected += w[c](r, k) * x[c](r, k);
  EXPECT_NEAR(evaluate(synthetic::PixelLinear{w}, x), expected, 1e-12);
  EXPECT_THROW(evaluate(synthetic::PixelLinear{w}, oracle::random_image(3, 4, 2, 2)), ShapeError);
}

TEST(Synthetic, WaveletLinearMatchesCoefficientDotProduct) {
  // With a single unit weight the model returns that one coefficient.
  const WaveletSpec spec{WaveletFamily::Haar, 1};
  WaveletPyramid w{{Plane<double>::Zero(2, 2)}, spec};
  w.channels[0](0, 1) = 1.0;  // horizontal detail
  Image x(2, 2, 1);
  x[0] << 1, 2, 3, 4;
  EXPECT_NEAR(evaluate(synthetic::WaveletLinear{w}, x), -2.0, 1e-14);
}

TEST(Synthetic, SubbandEnergyPicksSubband) {
  const WaveletSpec spec{WaveletFamily::Haar, 1};
  Image x(2, 2, 1);
  x[0] << 1, 2, 3, 4;  // a=5 h=-2 v=-1 d=0
  EXPECT_NEAR(evaluate(synthetic::SubbandEnergy{spec, {1, 0, 0, 0}}, x), 25.0, 1e-12);
  EXPECT_NEAR(evaluate(synthetic::SubbandEnergy{spec, {0, 1, 1, 0}}, x), 5.0, 1e-12);
  EXPECT_THROW(evaluate(synthetic::SubbandEnergy{spec, {1.0}}, x), InvalidParam);
}

TEST(ScoreBatch, KeepsInputOrder) {
  FunctionScorer s([](const Image& im) { return im[0](0, 0); });
  std::vector<Image> images;
  for (int i = 0; i < 5; ++i) images.emplace_back(1, 1, 1, 0.1 * i);
  const auto out = score_batch(s, images, 0);
  for (int i = 0; i < 5; ++i) EXPECT_DOUBLE_EQ(out[static_cast<std::size_t>(i)], 0.1 * i);
}

TEST(ScoreBatch, RejectsOversizedBatch) {
  FunctionScorer s([](const Image&) { return 0.0; }, 2);
  const std::vector<Image> images(3, Image(1, 1, 1));
  EXPECT_THROW(score_batch(s, images, 0), InvalidParam);
}

TEST(ScoreBatch, NonFiniteIsTaggedWithBatch) {
  FunctionScorer s([](const Image& im) { return im[0](0, 0) > 0.5 ? std::numeric_limits<double>::quiet_NaN() : 1.0; });
  std::vector<Image> images{Image(1, 1, 1, 0.0), Image(1, 1, 1, 1.0)};
  try {
    score_batch(s, images, 0, 7);
    FAIL() << "expected ScorerError";
  } catch (const ScorerError& e) {
    EXPECT_EQ(e.kind(), ScorerError::Kind::NonFinite);
    EXPECT_EQ(e.batch_index(), 7);
  }
}

namespace {

class ShortScorer final : public Scorer {
 public:
  std::vector<double> score(std::span<const Image> images, int) override {
    return std::vector<double>(images.size() - 1, 0.0);
  }
  std::string describe() const override { return "short"; }
};

class ThrowingScorer final : public Scorer {
 public:
  std::vector<double> score(std::span<const Image>, int) override {
    throw ScorerError(ScorerError::Kind::Transport, "down");
  }
  std::string describe() const override { return "throwing"; }
};

}  // namespace

TEST(ScoreBatch, CountMismatchIsProtocolError) {
  ShortScorer s;
  const std::vector<Image> images(2, Image(1, 1, 1));
  try {
    score_batch(s, images, 0, 3);
    FAIL();
  } catch (const ScorerError& e) {
    EXPECT_EQ(e.kind(), ScorerError::Kind::Protocol);
    EXPECT_EQ(e.batch_index(), 3);
  }
  EXPECT_THROW(score_batch_all(s, images), ScorerError);  // no all-class support
}

TEST(ScoreBatch, BackendErrorGetsBatchIndex) {
  ThrowingScorer s;
  const std::vector<Image> images(1, Image(1, 1, 1));
  try {
    score_batch(s, images, 0, 12);
    FAIL();
  } catch (const ScorerError& e) {
    EXPECT_EQ(e.kind(), ScorerError::Kind::Transport);
    EXPECT_EQ(e.batch_index(), 12);
  }
}

TEST(ScoreKinds, Names) {
  EXPECT_EQ(parse_score_kind("logit"), ScoreKind::Logit);
  EXPECT_EQ(to_string(ScoreKind::Probability), "probability");
  EXPECT_THROW(parse_score_kind("softmax"), InvalidParam);
}

TEST(MakeScorer, ParsesSyntheticDescriptions) {
  ScorerContext ctx;
  ctx.rows = ctx.cols = 16;
  ctx.channels = 1;
  auto s = make_scorer("synthetic:constant:value=0.25", ctx);
  EXPECT_EQ(s->score(std::vector<Image>(1, Image(16, 16, 1)), 1)[0], 0.25);
  EXPECT_TRUE(std::holds_alternative<synthetic::WaveletLinear>(parse_synthetic_model("wavelet-linear:subband=h1", ctx)));
  const auto energy = std::get<synthetic::SubbandEnergy>(parse_synthetic_model("subband-energy:d1=2", ctx));
  EXPECT_EQ(energy.weights, (std::vector<double>{1, 0, 0, 0, 0, 0, 2}));
  EXPECT_THROW(parse_synthetic_model("wavelet-linear:subband=h9", ctx), InvalidParam);
  EXPECT_THROW(parse_synthetic_model("constant:bogus=1", ctx), InvalidParam);
  EXPECT_THROW(parse_synthetic_model("resnet", ctx), InvalidParam);
  EXPECT_THROW(make_scorer("ftp://x", ctx), InvalidParam);
  EXPECT_THROW(make_scorer("https://x", ctx), InvalidParam);
}

TEST(MakeScorer, WaveletLinearMassSitsOnRequestedSubband) {
  ScorerContext ctx;
  ctx.rows = ctx.cols = 16;
  ctx.channels = 2;
  const auto m = std::get<synthetic::WaveletLinear>(parse_synthetic_model("wavelet-linear:subband=v2", ctx));
  const auto region = subband_region(ctx.wavelet, 16, 16, {2, Orientation::Vertical});
  double inside = 0.0;
  double total = 0.0;
  for (const auto& p : m.weights.channels) {
    inside += p.block(region.row0, region.col0, region.rows(), region.cols()).sum();
    total += p.sum();
  }
  EXPECT_GT(total, 0.0);
  EXPECT_DOUBLE_EQ(inside, total);
}
