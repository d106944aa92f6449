#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <set>
#include <sstream>

#include "cseg/blobs.hpp"
#include "cseg/morphology.hpp"
#include "cseg/rng.hpp"
#include "oracles.hpp"

using namespace cseg;

namespace {

BinaryMask from_rows(const std::vector<std::vector<int>>& rows) {
  BinaryMask m(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()), 0);
  for (int i = 0; i < m.height(); ++i)
    for (int j = 0; j < m.width(); ++j) m(i, j) = static_cast<std::uint8_t>(rows[i][j]);
  return m;
}

BinaryMask complement(const BinaryMask& m) {
  BinaryMask out = m;
  for (auto& v : out.values()) v = v ? 0 : 1;
  return out;
}

int count_ones(const BinaryMask& m) {
  int n = 0;
  for (auto v : m.values()) n += v;
  return n;
}

// Random blotchy mask: union of a few rectangles and discs over noise, so
// large elements leave something behind.
BinaryMask blotchy_mask(std::mt19937_64& rng, int h, int w) {
  BinaryMask m = oracle::random_mask(rng, h, w, 0.15);
  const int shapes = uniform_int(rng, 1, 4);
  for (int s = 0; s < shapes; ++s) {
    const int ci = uniform_int(rng, 0, h - 1);
    const int cj = uniform_int(rng, 0, w - 1);
    const int ri = uniform_int(rng, 3, h / 2);
    const int rj = uniform_int(rng, 3, w / 2);
    const bool disc = uniform01(rng) < 0.5;
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) {
        const double di = static_cast<double>(i - ci) / ri;
        const double dj = static_cast<double>(j - cj) / rj;
        const bool in = disc ? di * di + dj * dj <= 1.0 : std::abs(di) <= 1.0 && std::abs(dj) <= 1.0;
        if (in) m(i, j) = 1;
      }
  }
  return m;
}

}  // namespace

TEST(Residual, Examples) {
  const BinaryMask full = from_rows({{1, 1, 0}});
  const BinaryMask seg = from_rows({{1, 0, 1}});
  EXPECT_EQ(residual(full, seg), from_rows({{0, 1, 0}}));
  EXPECT_EQ(count_ones(residual(full, full)), 0);
  const BinaryMask ones(4, 5, 1);
  const BinaryMask zeros(4, 5, 0);
  EXPECT_EQ(residual(ones, zeros), ones);
}

TEST(Residual, DimensionMismatch) {
  try {
    residual(BinaryMask(3, 3, 0), BinaryMask(3, 4, 0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::kDimension);
  }
}

TEST(StructuringElementShape, RectangleAndEllipse) {
  const auto rect = StructuringElement::rectangle(25, 7);
  EXPECT_EQ(rect.height(), 25);
  EXPECT_EQ(rect.width(), 7);
  EXPECT_EQ(rect.offsets().size(), 175u);
  EXPECT_EQ(rect.anchor_row(), 12);
  EXPECT_EQ(rect.anchor_col(), 3);

  const auto disc = StructuringElement::ellipse(45, 45);
  EXPECT_EQ(disc.anchor_row(), 22);
  int count = 0;
  for (int di = -22; di <= 22; ++di)
    for (int dj = -22; dj <= 22; ++dj)
      if (di * di + dj * dj <= 22 * 22) ++count;
  EXPECT_EQ(disc.offsets().size(), static_cast<std::size_t>(count));
  EXPECT_TRUE(disc.active(22, 22));
  EXPECT_TRUE(disc.active(0, 22));
  EXPECT_FALSE(disc.active(0, 0));
  EXPECT_TRUE(disc.active(1, 16));  // 21^2 + 6^2 = 477 <= 484
  EXPECT_FALSE(disc.active(1, 15));  // 21^2 + 7^2 = 490
}

TEST(Erode, RowWithNarrowKernel) {
  const BinaryMask row(1, 7, 1);
  const BinaryMask out = erode(row, StructuringElement::rectangle(1, 3));
  EXPECT_EQ(out, from_rows({{0, 1, 1, 1, 1, 1, 0}}));
}

TEST(Erode, ZerosStayZeros) {
  const BinaryMask z(10, 10, 0);
  EXPECT_EQ(erode(z, StructuringElement::rectangle(3, 3)), z);
  EXPECT_EQ(dilate(z, StructuringElement::ellipse(5, 5)), z);
}

TEST(Dilate, PointBecomesBlock) {
  BinaryMask m(5, 5, 0);
  m(2, 2) = 1;
  const BinaryMask out = dilate(m, StructuringElement::rectangle(3, 3));
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) EXPECT_EQ(out(i, j), (i >= 1 && i <= 3 && j >= 1 && j <= 3) ? 1 : 0);
}

TEST(Dilate, AsymmetricElementUsesReflection) {
  // offsets {0, +1}: dilation shifts right, erosion looks right
  const auto e = StructuringElement::from_mask(1, 3, {false, true, true});
  BinaryMask m(1, 5, 0);
  m(0, 2) = 1;
  EXPECT_EQ(dilate(m, e), from_rows({{0, 0, 1, 1, 0}}));
  EXPECT_EQ(erode(BinaryMask(1, 5, 1), e), from_rows({{1, 1, 1, 1, 0}}));
}

TEST(Morphology, MatchesNaiveWithPaperElements) {
  std::mt19937_64 rng(31);
  const auto rect = StructuringElement::rectangle(25, 7);
  const auto disc = StructuringElement::ellipse(45, 45);
  for (int trial = 0; trial < 100; ++trial) {
    const BinaryMask m = blotchy_mask(rng, 48, 40);
    ASSERT_EQ(erode(m, rect), oracle::naive_erode(m, rect.offsets()));
    ASSERT_EQ(dilate(m, rect), oracle::naive_dilate(m, rect.offsets()));
    ASSERT_EQ(erode(m, disc), oracle::naive_erode(m, disc.offsets()));
    ASSERT_EQ(dilate(m, disc), oracle::naive_dilate(m, disc.offsets()));
  }
}

TEST(Morphology, MatchesNaiveWithIrregularElements) {
  std::mt19937_64 rng(32);
  for (int trial = 0; trial < 50; ++trial) {
    const int h = uniform_int(rng, 1, 7);
    const int w = uniform_int(rng, 1, 7);
    std::vector<bool> active(static_cast<std::size_t>(h * w));
    for (std::size_t k = 0; k < active.size(); ++k) active[k] = uniform01(rng) < 0.5;
    active[static_cast<std::size_t>((h / 2) * w + w / 2)] = true;
    const auto e = StructuringElement::from_mask(h, w, active);
    const BinaryMask m = oracle::random_mask(rng, 20, 23, 0.6);
    ASSERT_EQ(erode(m, e), oracle::naive_erode(m, e.offsets()));
    ASSERT_EQ(dilate(m, e), oracle::naive_dilate(m, e.offsets()));
  }
}

TEST(Morphology, ErosionInsideMaskInsideDilation) {
  std::mt19937_64 rng(33);
  const auto e = StructuringElement::ellipse(7, 5);
  for (int trial = 0; trial < 20; ++trial) {
    const BinaryMask m = oracle::random_mask(rng, 24, 24, 0.5);
    const BinaryMask lo = erode(m, e);
    const BinaryMask hi = dilate(m, e);
    for (std::size_t s = 0; s < m.size(); ++s) {
      EXPECT_LE(lo[s], m[s]);
      EXPECT_LE(m[s], hi[s]);
    }
  }
}

TEST(Morphology, DualityAwayFromBorder) {
  std::mt19937_64 rng(34);
  const auto e = StructuringElement::from_mask(3, 5, {true, false, true, true, false,  //
                                                      false, true, true, false, true,  //
                                                      true, true, false, false, true});
  for (int trial = 0; trial < 20; ++trial) {
    const BinaryMask m = oracle::random_mask(rng, 30, 30, 0.5);
    const BinaryMask lhs = dilate(m, e);
    const BinaryMask rhs = complement(erode(complement(m), e.reflected()));
    for (int i = 5; i < 25; ++i)
      for (int j = 5; j < 25; ++j) EXPECT_EQ(lhs(i, j), rhs(i, j));
  }
}

TEST(Refine, ZerosAndThinStripe) {
  const BinaryMask z(64, 64, 0);
  EXPECT_EQ(refine_residual(z), z);
  BinaryMask stripe(64, 64, 0);
  for (int i = 0; i < 64; ++i) stripe(i, 30) = stripe(i, 31) = 1;
  EXPECT_EQ(count_ones(refine_residual(stripe)), 0);
}

TEST(Refine, BlockSurvivesAndGrows) {
  BinaryMask block(100, 100, 0);
  for (int i = 20; i < 80; ++i)
    for (int j = 40; j < 60; ++j) block(i, j) = 1;
  const BinaryMask out = refine_residual(block);
  const auto rect = StructuringElement::rectangle(25, 7);
  const auto disc = StructuringElement::ellipse(45, 45);
  const BinaryMask ref = oracle::naive_dilate(
      oracle::naive_erode(oracle::naive_erode(block, rect.offsets()), rect.offsets()), disc.offsets());
  EXPECT_EQ(out, ref);
  EXPECT_GT(count_ones(out), count_ones(block));
}

TEST(ConnectedComponents, Examples) {
  const BlobMap two = connected_components(from_rows({{1, 0, 1}, {1, 0, 1}}));
  EXPECT_EQ(two.max_id, 2);
  EXPECT_EQ(two.ids(0, 0), 1);
  EXPECT_EQ(two.ids(1, 2), 2);
  const BlobMap diag = connected_components(from_rows({{1, 0}, {0, 1}}));
  EXPECT_EQ(diag.max_id, 1);
  EXPECT_EQ(diag.ids(1, 1), 1);
  EXPECT_EQ(diag.ids(0, 1), 0);
}

TEST(ConnectedComponents, RowMajorFirstPixelOrder) {
  // the U shape's right arm is seen first on row 0 but joins later
  const BlobMap b = connected_components(from_rows({{1, 0, 0, 1, 0, 1},  //
                                                    {1, 0, 0, 1, 0, 0},  //
                                                    {1, 1, 1, 1, 0, 1}}));
  EXPECT_EQ(b.max_id, 3);
  EXPECT_EQ(b.ids(0, 0), 1);
  EXPECT_EQ(b.ids(0, 3), 1);
  EXPECT_EQ(b.ids(0, 5), 2);
  EXPECT_EQ(b.ids(2, 5), 3);
}

TEST(ConnectedComponents, MatchesFloodFillExactly) {
  std::mt19937_64 rng(35);
  for (int trial = 0; trial < 200; ++trial) {
    const double density = uniform(rng, 0.2, 0.7);
    const BinaryMask m = oracle::random_mask(rng, 32, 32, density);
    int count = 0;
    const Grid<int> ref = oracle::flood_fill_components(m, &count);
    const BlobMap got = connected_components(m);
    ASSERT_EQ(got.max_id, count);
    ASSERT_EQ(got.ids, ref);  // same ids, not just the same partition
  }
}

TEST(ConnectedComponents, PartitionProperties) {
  std::mt19937_64 rng(36);
  const BinaryMask m = oracle::random_mask(rng, 32, 32, 0.45);
  const BlobMap b = connected_components(m);
  for (int i = 0; i < 32; ++i)
    for (int j = 0; j < 32; ++j) {
      EXPECT_EQ(b.ids(i, j) == 0, m(i, j) == 0);
      for (int di = -1; di <= 1; ++di)
        for (int dj = -1; dj <= 1; ++dj) {
          if (!b.ids.contains(i + di, j + dj)) continue;
          const int a = b.ids(i, j);
          const int c = b.ids(i + di, j + dj);
          if (a != 0 && c != 0) EXPECT_EQ(a, c);
        }
    }
}

TEST(Synthesize, UnoccludedFace) {
  const BinaryMask face(6, 6, 1);
  const SynthesizedLabels out = synthesize_labels(face, connected_components(BinaryMask(6, 6, 0)));
  for (int v : out.labels.values()) EXPECT_EQ(v, kFace);
  EXPECT_EQ(out.blobs.blob_count(), 1);
}

TEST(Synthesize, OneOccluder) {
  BinaryMask face(8, 8, 0);
  for (int i = 1; i < 7; ++i)
    for (int j = 1; j < 7; ++j) face(i, j) = 1;
  BinaryMask occ(8, 8, 0);
  for (int i = 3; i < 5; ++i)
    for (int j = 3; j < 5; ++j) {
      occ(i, j) = 1;
      face(i, j) = 0;  // the teacher misses occluded pixels
    }
  const SynthesizedLabels out = synthesize_labels(face, connected_components(occ));
  std::set<int> labels(out.labels.values().begin(), out.labels.values().end());
  std::set<int> ids(out.blobs.ids.values().begin(), out.blobs.ids.values().end());
  EXPECT_EQ(labels, (std::set<int>{0, 1, 2}));
  EXPECT_EQ(ids, (std::set<int>{0, 1, 2}));
  EXPECT_EQ(out.blobs.blob_count(), 3);
}

TEST(Synthesize, CaseTableHoldsEverywhere) {
  std::mt19937_64 rng(37);
  for (int trial = 0; trial < 20; ++trial) {
    const BinaryMask face = oracle::random_mask(rng, 20, 20, 0.6);
    const BinaryMask occ = oracle::random_mask(rng, 20, 20, 0.2);
    const BlobMap comps = connected_components(occ);
    const SynthesizedLabels out = synthesize_labels(face, comps);
    for (std::size_t s = 0; s < face.size(); ++s) {
      const int c = out.blobs.ids[s];
      if (occ[s]) {
        EXPECT_EQ(c, 1 + comps.ids[s]);
      } else {
        EXPECT_EQ(c, face[s] ? 1 : 0);
      }
      EXPECT_EQ(out.labels[s], c == 0 ? kBackground : (c == 1 ? kFace : kOcclusion));
    }
  }
}

TEST(Synthesize, DimensionMismatch) {
  EXPECT_THROW(synthesize_labels(BinaryMask(4, 4, 1), connected_components(BinaryMask(4, 5, 0))), Error);
}

TEST(BlobsFromLabels, WithoutSplitting) {
  LabelMap y(4, 6, 0);
  y(1, 1) = 1;
  y(2, 4) = 2;
  y(0, 5) = 2;
  const BlobMap b = blobs_from_labels(y, false);
  EXPECT_EQ(b.blob_count(), 3);
  EXPECT_EQ(b.ids, y);
  EXPECT_EQ(blobs_from_labels(LabelMap(3, 3, 1), false).blob_count(), 1);
}

TEST(BlobsFromLabels, SplittingCountsComponents) {
  LabelMap y(5, 7, 1);
  y(0, 0) = 2;
  y(4, 6) = 2;
  const BlobMap b = blobs_from_labels(y, true);
  EXPECT_EQ(b.blob_count(), 3);
  EXPECT_EQ(b.ids(0, 0), 0);
  EXPECT_EQ(b.ids(0, 1), 1);
  EXPECT_EQ(b.ids(4, 6), 2);
  std::set<int> occ_ids;
  for (std::size_t s = 0; s < y.size(); ++s)
    if (y[s] == 2) occ_ids.insert(b.ids[s]);
  EXPECT_EQ(occ_ids.size(), 2u);
}

TEST(BlobsFromLabels, SplitMatchesFloodFill) {
  std::mt19937_64 rng(38);
  for (int trial = 0; trial < 30; ++trial) {
    LabelMap y(16, 16, 0);
    for (auto& v : y.values()) v = uniform_int(rng, 0, 2);
    const BlobMap b = blobs_from_labels(y, true);
    int expected = 0;
    for (int c = 0; c < 3; ++c) expected += oracle::flood_fill_region_count(y, c);
    EXPECT_EQ(b.blob_count(), expected);
    EXPECT_EQ(b.max_id, expected - 1);
    // each blob is single-class
    std::vector<int> cls(static_cast<std::size_t>(expected), -1);
    for (std::size_t s = 0; s < y.size(); ++s) {
      auto& c = cls[static_cast<std::size_t>(b.ids[s])];
      if (c < 0) c = y[s];
      EXPECT_EQ(c, y[s]);
    }
  }
}

TEST(CountComponents, PerClassSum) {
  LabelMap y(5, 5, 0);
  y(0, 0) = 1;
  y(4, 4) = 1;
  y(2, 2) = 2;
  const std::vector<int> fg{1, 2};
  EXPECT_EQ(count_class_components(y, fg), 3);
  const std::vector<int> bg{0};
  EXPECT_EQ(count_class_components(y, bg), 1);
}

TEST(Pgm, RoundTripAndThreshold) {
  Grid<int> g(3, 4, 0);
  g(0, 1) = 255;
  g(2, 3) = 2;
  g(1, 1) = 127;
  g(1, 2) = 128;
  std::stringstream buf;
  write_pgm(buf, g);
  EXPECT_EQ(buf.str().substr(0, 11), "P5\n4 3\n255\n");
  std::stringstream in(buf.str());
  EXPECT_EQ(read_pgm(in), g);

  const auto path = std::filesystem::temp_directory_path() / "cseg_pgm_test.pgm";
  save_pgm(path, g);
  const BinaryMask m = load_mask(path);
  EXPECT_EQ(m(0, 1), 1);
  EXPECT_EQ(m(1, 1), 0);
  EXPECT_EQ(m(1, 2), 1);
  EXPECT_EQ(m(2, 3), 0);
  std::filesystem::remove(path);
}

TEST(Pgm, HeaderWithComment) {
  std::stringstream in(std::string("P5\n# made by hand\n2 1\n255\n") + std::string("\x00\xff", 2));
  const Grid<int> g = read_pgm(in);
  EXPECT_EQ(g.width(), 2);
  EXPECT_EQ(g(0, 1), 255);
}

TEST(Pgm, BadInputs) {
  std::stringstream ascii("P2\n2 1\n255\n0 1\n");
  EXPECT_THROW(read_pgm(ascii), Error);
  std::stringstream truncated(std::string("P5\n4 4\n255\n\x00\x00", 13));
  try {
    read_pgm(truncated);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::kFormat);
  }
  Grid<int> big(1, 1, 300);
  std::stringstream out;
  EXPECT_THROW(write_pgm(out, big), Error);
}

TEST(BlobFiles, RoundTrip) {
  const auto dir = std::filesystem::temp_directory_path();
  LabelMap y(6, 5, 0);
  y(2, 2) = 2;
  y(3, 3) = 1;
  save_labels(dir / "cseg_labels_test.pgm", y);
  EXPECT_EQ(load_labels(dir / "cseg_labels_test.pgm"), y);
  const BlobMap b = blobs_from_labels(y, true);
  save_blobs(dir / "cseg_blobs_test.cseg", b);
  EXPECT_EQ(load_blobs(dir / "cseg_blobs_test.cseg"), b);
  std::filesystem::remove(dir / "cseg_labels_test.pgm");
  std::filesystem::remove(dir / "cseg_blobs_test.cseg");
}
