#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "oracles.hpp"
#include "rwnoise/neighborhood.hpp"

namespace rwnoise {
namespace {

NeighborhoodModel var_model(double floor = 0.0) {
  NeighborhoodModel m;
  m.kind = ModelKind::gaussian_var;
  m.variance_floor = floor;
  return m;
}

std::set<std::pair<int, int>> coords_of(const SampleSet& s) {
  std::set<std::pair<int, int>> out;
  for (const auto& p : s.coords) out.insert({p.x, p.y});
  return out;
}

TEST(CandidateWindows, InteriorPixelHasNine) {
  const auto set = candidate_windows(10, 10, {5, 5}, 1);
  ASSERT_EQ(set.candidates.size(), 9u);
  EXPECT_TRUE(std::is_sorted(set.candidates.begin(), set.candidates.end()));
  EXPECT_EQ(set.candidates.front(), (Pixel{3, 3}));
  EXPECT_EQ(set.candidates.back(), (Pixel{5, 5}));
}

TEST(CandidateWindows, CornerPixelHasOne) {
  EXPECT_EQ(candidate_windows(10, 10, {0, 0}, 1).candidates.size(), 1u);
  EXPECT_EQ(candidate_windows(10, 10, {9, 0}, 2).candidates.size(), 1u);
  EXPECT_EQ(candidate_windows(10, 10, {1, 5}, 1).candidates.size(), 6u);
}

TEST(CandidateWindows, WindowLargerThanImageIsRejected) {
  try {
    candidate_windows(4, 10, {1, 1}, 2);
    FAIL() << "expected an error";
  } catch (const PreconditionError& e) {
    EXPECT_NE(std::string(e.what()).find("smaller k"), std::string::npos);
  }
}

TEST(SelectWindow, ConstantImagePicksFirstOrigin) {
  const Image img(8, 8, 1, 5.0);
  EXPECT_EQ(select_window(img, {4, 4}, 1, var_model(1e-6)), (Pixel{2, 2}));
  NeighborhoodModel pois;
  pois.kind = ModelKind::poisson;
  EXPECT_EQ(select_window(img, {4, 4}, 1, pois), (Pixel{2, 2}));
}

TEST(SelectWindow, StepImageStaysInsideBrightRegion) {
  // Bright for x >= 5, with a little texture so variances are positive.
  Image img(10, 10);
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 10; ++x) img.at(x, y) = (x >= 5 ? 10.0 : 0.0) + 0.1 * ((x * 7 + y * 3) % 5);
  const Pixel p{5, 4};
  const Pixel origin = select_window(img, p, 1, var_model());
  EXPECT_GE(origin.x, 5);
  const auto set = window_samples(img, origin, 3, p);
  const double ll = window_log_likelihood(set, img.pixel(p.x, p.y), var_model());
  EXPECT_DOUBLE_EQ(ll, oracle::best_window_log_likelihood(img, p.x, p.y, 1, oracle::Likelihood::gaussian_var));
}

TEST(SelectWindow, AttainsExhaustiveMaximumOnNoise) {
  std::mt19937_64 rng(11);
  std::poisson_distribution<int> pois(6.0);
  Image img(12, 9);
  for (auto& v : img.storage()) v = pois(rng);
  NeighborhoodModel pm;
  pm.kind = ModelKind::poisson;
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      const auto set = select_neighborhood(img, {x, y}, 1, pm);
      EXPECT_DOUBLE_EQ(window_log_likelihood(set, img.pixel(x, y), pm),
                       oracle::best_window_log_likelihood(img, x, y, 1, oracle::Likelihood::poisson));
      EXPECT_EQ(set.size(), 9u);
      EXPECT_TRUE(std::find(set.coords.begin(), set.coords.end(), Pixel{x, y}) != set.coords.end());
    }
}

TEST(ResolveOverlap, DisjointSetsAreUnchanged) {
  Image img(10, 10);
  const auto a = window_samples(img, {0, 0}, 3, {2, 1});
  const auto b = window_samples(img, {3, 0}, 3, {3, 1});
  const auto r = resolve_overlap(a, b);
  EXPECT_EQ(r.x.coords, a.coords);
  EXPECT_EQ(r.y.coords, b.coords);
}

TEST(ResolveOverlap, SameWindowSplitsFourAndFour) {
  Image img(10, 10);
  const auto a = window_samples(img, {2, 2}, 3, {3, 3});
  const auto b = window_samples(img, {2, 2}, 3, {4, 3});
  const auto r = resolve_overlap(a, b);
  ASSERT_EQ(r.x.size(), 4u);
  ASSERT_EQ(r.y.size(), 4u);
  // Sorted keys d(p,A) - d(p,B):
  //   (2,3) -1, (3,3) -1, (2,2) -.82, (2,4) -.82, (3,2) -.41 | (3,4) -.41, (4,2) .82, (4,4) .82, (4,3) 1
  // A takes the first five, then drops (3,3): largest |key|, later in raster order than (2,3).
  const std::set<std::pair<int, int>> expect_a{{2, 2}, {2, 3}, {2, 4}, {3, 2}};
  const std::set<std::pair<int, int>> expect_b{{4, 2}, {4, 3}, {4, 4}, {3, 4}};
  EXPECT_EQ(coords_of(r.x), expect_a);
  EXPECT_EQ(coords_of(r.y), expect_b);
}

TEST(ResolveOverlap, PropertiesOnRandomAdjacentPairs) {
  std::mt19937_64 rng(23);
  Image img(9, 9);
  std::uniform_int_distribution<int> coord(0, 8), k_dist(1, 2), dir(0, 1);
  for (int trial = 0; trial < 300; ++trial) {
    const int k = k_dist(rng);
    const int side = 2 * k + 1;
    Pixel p{coord(rng), coord(rng)};
    Pixel q = dir(rng) ? Pixel{p.x + 1, p.y} : Pixel{p.x, p.y + 1};
    if (!img.contains(q)) continue;
    auto random_origin = [&](Pixel c) {
      const auto cands = candidate_windows(img.width(), img.height(), c, k).candidates;
      return cands[std::uniform_int_distribution<std::size_t>(0, cands.size() - 1)(rng)];
    };
    const auto a = window_samples(img, random_origin(p), side, p);
    const auto b = window_samples(img, random_origin(q), side, q);
    const auto r1 = resolve_overlap(a, b);
    const auto r2 = resolve_overlap(b, a);
    EXPECT_EQ(r1.x.size(), r1.y.size());
    const auto cx = coords_of(r1.x), cy = coords_of(r1.y);
    for (const auto& c : cx) EXPECT_EQ(cy.count(c), 0u);
    EXPECT_EQ(coords_of(r2.y), cx);
    EXPECT_EQ(coords_of(r2.x), cy);
    // Nothing is invented: each side keeps only its own window's pixels.
    const auto ca = coords_of(a), cb = coords_of(b);
    for (const auto& c : cx) EXPECT_EQ(ca.count(c), 1u);
    for (const auto& c : cy) EXPECT_EQ(cb.count(c), 1u);
  }
}

TEST(ResolveOverlap, NeedsCoordinates) {
  EXPECT_THROW(resolve_overlap(SampleSet::scalar({1, 2}), SampleSet::scalar({1, 2})), PreconditionError);
}

}  // namespace
}  // namespace rwnoise
