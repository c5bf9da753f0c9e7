#include <gtest/gtest.h>

#include <atomic>

#include "oracles.hpp"
#include "wcam/pipeline.hpp"

using namespace wcam;

namespace {

WcamConfig small_config(Eigen::Index g, int levels, Eigen::Index n, std::uint64_t seed = 1) {
  WcamConfig c;
  c.grid_size = g;
  c.n_design = n;
  c.sampler = {Sampler::SobolSequence, seed};
  c.wavelet = {WaveletFamily::Haar, levels};
  c.batch_size = 16;
  return c;
}

}  // namespace

TEST(Masks, RowMajorReshape) {
  Eigen::MatrixXd rows(1, 4);
  rows << 0.1, 0.2, 0.3, 0.4;
  const auto batch = design_to_masks(rows, 2);
  ASSERT_EQ(batch.size(), 1u);
  Grid expected(2, 2);
  expected << 0.1, 0.2, 0.3, 0.4;
  EXPECT_TRUE(batch.masks[0] == expected);
  EXPECT_EQ(batch.provenance[0], MaskSource::A);
  EXPECT_THROW(design_to_masks(rows, 3), ShapeError);
}

TEST(Masks, FlatIndex29IsRowOneColOne) {
  Eigen::MatrixXd rows = Eigen::MatrixXd::Zero(1, 784);
  rows(0, 29) = 1.0;
  const auto mask = design_to_masks(rows, 28).masks[0];
  EXPECT_EQ(mask(1, 1), 1.0);
  EXPECT_EQ(mask.sum(), 1.0);
}

TEST(Masks, FullRunOrderAndProvenance) {
  const auto design = draw_design({Sampler::SobolSequence, 4}, 3, 4);
  const auto batch = design_masks(design, 2);
  ASSERT_EQ(batch.size(), 3u * (4 + 2));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    EXPECT_TRUE(batch.masks[i] == reshape_to_grid(design_row(design, row), 2)) << i;
    const MaskSource expected = row < 3 ? MaskSource::A : row < 6 ? MaskSource::B : MaskSource::C;
    EXPECT_EQ(batch.provenance[i], expected);
    EXPECT_EQ(batch.k_index[i], row < 6 ? -1 : (row - 6) / 3);
  }
  // C^(k) row j: A row j with column k from B.
  const auto c = design_row(design, 6 + 2 * 3 + 1);
  for (Eigen::Index k = 0; k < 4; ++k) EXPECT_EQ(c(k), k == 2 ? design.B(1, k) : design.A(1, k));
  EXPECT_THROW(design_row(design, 18), IndexError);
}

TEST(ApplyMask, OnesAreIdentity) {
  const auto image = oracle::random_image(16, 16, 3, 2);
  const auto pyr = dwt_forward(image, {WaveletFamily::Daubechies4, 2});
  const auto out = perturbed_image(pyr, Grid::Ones(4, 4), false);
  EXPECT_LE(max_abs_difference(out, image), 1e-9);
}

TEST(ApplyMask, ZerosGiveZeroImage) {
  const auto pyr = dwt_forward(oracle::random_image(16, 16, 3, 2), {WaveletFamily::Haar, 2});
  const auto out = perturbed_image(pyr, Grid::Zero(4, 4), true);
  for (const auto& p : out.channels) EXPECT_EQ(p.cwiseAbs().maxCoeff(), 0.0);
}

TEST(ApplyMask, ZeroingDiagonalCellsMatchesManualZeroing) {
  const WaveletSpec spec{WaveletFamily::Haar, 1};
  const auto image = oracle::random_image(16, 16, 2, 3);
  const auto pyr = dwt_forward(image, spec);
  Grid mask = Grid::Ones(4, 4);
  mask.bottomRightCorner(2, 2).setZero();  // the d1 block at g=4, L=1

  WaveletPyramid manual = pyr;
  for (std::size_t c = 0; c < 2; ++c) manual.subband(c, {1, Orientation::Diagonal}).setZero();
  EXPECT_LE(max_abs_difference(perturbed_image(pyr, mask, false), dwt_inverse(manual)), 1e-12);
}

TEST(ApplyMask, ScalesBlocksAndChecksShape) {
  const WaveletSpec spec{WaveletFamily::Haar, 1};
  const auto pyr = dwt_forward(oracle::random_image(8, 8, 1, 4), spec);
  Grid mask = Grid::Ones(2, 2);
  mask(1, 0) = 0.25;
  const auto out = apply_mask(pyr, mask);
  EXPECT_TRUE(out.channels[0].bottomLeftCorner(4, 4) == 0.25 * pyr.channels[0].bottomLeftCorner(4, 4));
  EXPECT_TRUE(out.channels[0].topRows(4) == pyr.channels[0].topRows(4));
  EXPECT_THROW(apply_mask(pyr, Grid::Ones(3, 3)), ShapeError);
}

TEST(ApplyMask, CellsNeverStraddleSubbands) {
  for (const auto& [g, levels] : std::vector<std::pair<Eigen::Index, int>>{{4, 1}, {8, 3}, {28, 2}, {32, 4}}) {
    const WaveletSpec spec{WaveletFamily::Haar, levels};
    const Eigen::Index side = g * 4;
    const auto ids = subbands_coarse_to_fine(spec);
    const Eigen::Index f = side / g;
    for (Eigen::Index r = 0; r < g; ++r) {
      for (Eigen::Index c = 0; c < g; ++c) {
        int containing = 0;
        for (const auto id : ids) {
          const auto reg = subband_region(spec, side, side, id);
          if (r * f >= reg.row0 && (r + 1) * f <= reg.row1 && c * f >= reg.col0 && (c + 1) * f <= reg.col1)
            ++containing;
        }
        EXPECT_EQ(containing, 1) << "g=" << g << " cell " << r << "," << c;
      }
    }
  }
}

TEST(Config, Validation) {
  WcamConfig c;
  EXPECT_NO_THROW(validate_config(c, 224, 224));
  c.grid_size = 30;
  try {
    validate_config(c);
    FAIL();
  } catch (const InvalidParam& e) {
    EXPECT_STREQ(e.what(), "grid_size must be divisible by 2^levels");
  }
  c.grid_size = 28;
  EXPECT_THROW(validate_config(c, 220, 224), ShapeError);
  c.n_design = 1;
  EXPECT_THROW(validate_config(c), InvalidParam);
  EXPECT_EQ(WcamConfig{}.n_forwards(), 6288);
  EXPECT_EQ(parse_mask_mode("binary"), MaskMode::Binary);
  EXPECT_THROW(parse_mask_mode("soft"), InvalidParam);
}

TEST(Wcam, QuadrantMeanConcentratesOnItsApproximationCell) {
  // With Haar L=1 and aligned quadrants, the top-left quadrant mean depends
  // only on the approximation coefficients in the top-left of the
  // approximation block, which is mask cell (0, 0) at g = 4.
  const auto image = oracle::random_image(16, 16, 3, 9);
  auto config = small_config(4, 1, 512, 5);
  SyntheticScorer scorer(synthetic::PixelRegionMean{});
  const auto map = compute_wcam(image, 1, scorer, config);
  const double mass = map.total.sum();
  ASSERT_GT(mass, 0.0);
  EXPECT_GE(map.total(0, 0) / mass, 0.9);

  // Double-loop oracle on the induced function of the 16 mask variables.
  const auto pyr = dwt_forward(image, config.wavelet);
  const oracle::VectorFunction induced = [&](const Eigen::VectorXd& x) {
    return evaluate(scorer.model(), perturbed_image(pyr, reshape_to_grid(x, 4), true));
  };
  const double v = oracle::mc_variance(induced, 16, 20000, 1);
  EXPECT_NEAR(map.total(0, 0), oracle::double_loop_total(induced, 16, 0, 200, 100, v, 2), 0.05);
  EXPECT_NEAR(map.total(1, 1), oracle::double_loop_total(induced, 16, 5, 200, 100, v, 3), 0.05);
}

TEST(Wcam, ConstantScorerIsDegenerate) {
  SyntheticScorer scorer(synthetic::ConstantScore{0.5});
  const auto map = compute_wcam(oracle::random_image(8, 8, 1, 1), 1, scorer, small_config(4, 1, 8));
  EXPECT_TRUE(map.degenerate);
  EXPECT_EQ(map.total.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(map.first_order.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Wcam, ForwardCountIsExact) {
  std::atomic<long> calls{0};
  FunctionScorer scorer([&](const Image& im) { ++calls; return im[0].mean(); }, 7);
  const auto config = small_config(4, 2, 8);
  const auto map = compute_wcam(oracle::random_image(16, 16, 1, 1), 0, scorer, config);
  EXPECT_EQ(calls.load(), 8 * (16 + 2));
  EXPECT_EQ(map.n_forwards, 8 * (16 + 2));
  EXPECT_EQ(map.total.rows(), 4);
}

TEST(Wcam, DeterministicAcrossRunsAndThreadCounts) {
  const auto image = oracle::random_image(16, 16, 3, 4);
  SyntheticScorer scorer(synthetic::SubbandEnergy{{WaveletFamily::Haar, 2}, {1, 0.5, 0.5, 0.5, 2, 2, 2}});
  auto config = small_config(8, 2, 16, 11);
  config.threads = 1;
  const auto a = compute_wcam(image, 1, scorer, config);
  config.threads = 4;
  config.batch_size = 5;
  const auto b = compute_wcam(image, 1, scorer, config);
  EXPECT_TRUE(a.total == b.total);
  EXPECT_TRUE(a.first_order == b.first_order);
  config.sampler.seed = 12;
  EXPECT_FALSE(compute_wcam(image, 1, scorer, config).total == a.total);
}

TEST(Wcam, BinaryMasksOnlyKeepOrDrop) {
  std::vector<double> seen;
  const auto image = Image(8, 8, 1, 0.5);
  FunctionScorer scorer([&](const Image& im) {
    seen.push_back(im[0](0, 0));
    return im[0].sum();
  });
  auto config = small_config(2, 1, 4);
  config.mask_mode = MaskMode::Binary;
  config.clamp_output = false;
  compute_wcam(image, 0, scorer, config);
  // The constant image lives in the approximation block only (cell (0,0) at
  // g=2), so pixel values are either 0.5 (kept) or 0 (dropped).
  for (const double v : seen) EXPECT_TRUE(std::abs(v - 0.5) < 1e-12 || std::abs(v) < 1e-12) << v;
}

TEST(Wcam, ScorerErrorCarriesLowestBatch) {
  FunctionScorer serial(
      [calls = 0](const Image&) mutable -> double {
        if (++calls > 40) throw ScorerError(ScorerError::Kind::Transport, "gone");
        return 0.0;
      },
      16);
  try {
    compute_wcam(oracle::random_image(8, 8, 1, 1), 0, serial, small_config(4, 1, 8));
    FAIL();
  } catch (const ScorerError& e) {
    EXPECT_EQ(e.batch_index(), 2);  // images 32..47
  }

  FunctionScorer always([](const Image&) -> double { throw ScorerError(ScorerError::Kind::Protocol, "no"); }, 16,
                        true);
  auto config = small_config(4, 1, 8);
  config.threads = 4;
  try {
    compute_wcam(oracle::random_image(8, 8, 1, 1), 0, always, config);
    FAIL();
  } catch (const ScorerError& e) {
    EXPECT_EQ(e.batch_index(), 0);
  }
}

TEST(Wcam, NonFiniteScoreIsHardError) {
  FunctionScorer nan([](const Image&) { return std::nan(""); });
  EXPECT_THROW(compute_wcam(oracle::random_image(8, 8, 1, 1), 0, nan, small_config(4, 1, 4)), ScorerError);
}

TEST(Wcam, RejectsBadShapes) {
  SyntheticScorer scorer(synthetic::ConstantScore{});
  EXPECT_THROW(compute_wcam(oracle::random_image(10, 10, 1, 1), 0, scorer, small_config(4, 1, 4)), ShapeError);
}
