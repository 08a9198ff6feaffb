#include <cmath>
#include <stdexcept>

#include "cte/grid.hpp"
#include "cte/random.hpp"
#include "doctest.h"

using namespace cte;

namespace {

// independent direct evaluation of the bilinear formula, used as the oracle
double bilinear_direct(const DenseMap& m, double px, double py, int c) {
  double gx = px - 0.5;
  double gy = py - 0.5;
  gx = std::min(std::max(gx, 0.0), static_cast<double>(m.width - 1));
  gy = std::min(std::max(gy, 0.0), static_cast<double>(m.height - 1));
  const int x0 = static_cast<int>(gx);
  const int y0 = static_cast<int>(gy);
  const int x1 = x0 + 1 < m.width ? x0 + 1 : x0;
  const int y1 = y0 + 1 < m.height ? y0 + 1 : y0;
  const double ax = gx - x0;
  const double ay = gy - y0;
  return m.at(y0, x0, c) * (1 - ax) * (1 - ay) + m.at(y0, x1, c) * ax * (1 - ay) +
         m.at(y1, x0, c) * (1 - ax) * ay + m.at(y1, x1, c) * ax * ay;
}

DenseMap random_map(Rng& rng, int h, int w, int c, double lo = 0.0, double hi = 1.0) {
  DenseMap m(h, w, c);
  for (double& v : m.values) v = rng.uniform(lo, hi);
  return m;
}

}  // namespace

TEST_CASE("bilinear_sample midpoint of a 2x2 map") {
  DenseMap m(2, 2, 1);
  m.at(0, 0) = 0.0;
  m.at(0, 1) = 1.0;
  m.at(1, 0) = 2.0;
  m.at(1, 1) = 3.0;
  // (1.0, 1.0) is equidistant from all four cell centers
  CHECK(bilinear_sample(m, {1.0, 1.0})[0] == doctest::Approx(1.5).epsilon(1e-12));
}

TEST_CASE("bilinear_sample is exact at cell centers") {
  Rng rng(7);
  DenseMap m = random_map(rng, 4, 5, 2);
  for (int i = 0; i < m.height; ++i) {
    for (int j = 0; j < m.width; ++j) {
      const auto v = bilinear_sample(m, {j + 0.5, i + 0.5});
      CHECK(v[0] == doctest::Approx(m.at(i, j, 0)).epsilon(1e-14));
      CHECK(v[1] == doctest::Approx(m.at(i, j, 1)).epsilon(1e-14));
    }
  }
}

TEST_CASE("bilinear_sample matches the direct formula on random points") {
  Rng rng(11);
  DenseMap m = random_map(rng, 3, 3, 1);
  for (int n = 0; n < 100; ++n) {
    const double x = rng.uniform(0.5, 2.5);
    const double y = rng.uniform(0.5, 2.5);
    CHECK(bilinear_sample(m, {x, y})[0] == doctest::Approx(bilinear_direct(m, x, y, 0)).epsilon(1e-13));
  }
}

TEST_CASE("bilinear_sample clamps out-of-grid points to the border") {
  Rng rng(13);
  DenseMap m = random_map(rng, 3, 4, 1);
  CHECK(bilinear_sample(m, {-5.0, -9.0})[0] == doctest::Approx(m.at(0, 0)).epsilon(1e-14));
  CHECK(bilinear_sample(m, {100.0, 100.0})[0] == doctest::Approx(m.at(2, 3)).epsilon(1e-14));
}

TEST_CASE("bilinear_sample rejects empty maps and non-finite points") {
  DenseMap empty;
  CHECK_THROWS_AS(bilinear_sample(empty, {0.5, 0.5}), std::invalid_argument);
  DenseMap m(2, 2, 1);
  CHECK_THROWS_AS(bilinear_sample(m, {std::nan(""), 0.5}), std::invalid_argument);
}

TEST_CASE("bilinear_sample values are convex combinations along an axis") {
  Rng rng(17);
  DenseMap m = random_map(rng, 4, 4, 1);
  for (int n = 0; n < 50; ++n) {
    const double y = rng.uniform_int(0, 3) + 0.5;
    const double x = rng.uniform(0.5, 3.5);
    const int j0 = static_cast<int>(x - 0.5);
    const int j1 = std::min(j0 + 1, 3);
    const int row = static_cast<int>(y - 0.5);
    const double lo = std::min(m.at(row, j0), m.at(row, j1));
    const double hi = std::max(m.at(row, j0), m.at(row, j1));
    const double v = bilinear_sample(m, {x, y})[0];
    CHECK(v >= lo - 1e-12);
    CHECK(v <= hi + 1e-12);
  }
}

TEST_CASE("max_pool_3x3 spreads a single peak to its Chebyshev-1 neighborhood") {
  DenseMap m(5, 5, 1, 0.0);
  m.at(2, 2) = 1.0;
  const DenseMap pooled = max_pool_3x3(m);
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 5; ++j) {
      const bool near = std::abs(i - 2) <= 1 && std::abs(j - 2) <= 1;
      CHECK(pooled.at(i, j) == (near ? 1.0 : 0.0));
    }
  }
}

TEST_CASE("max_pool_3x3 keeps a constant map and rejects multi-channel input") {
  DenseMap m(3, 3, 1, 0.4);
  const DenseMap pooled = max_pool_3x3(m);
  for (double v : pooled.values) CHECK(v == 0.4);
  DenseMap two(3, 3, 2);
  CHECK_THROWS_AS(max_pool_3x3(two), std::invalid_argument);
}

TEST_CASE("max_pool_3x3 equals the brute-force neighborhood max") {
  Rng rng(23);
  DenseMap m = random_map(rng, 16, 16, 1);
  const DenseMap pooled = max_pool_3x3(m);
  for (int i = 0; i < 16; ++i) {
    for (int j = 0; j < 16; ++j) {
      double expect = -1.0;
      for (int di = -1; di <= 1; ++di) {
        for (int dj = -1; dj <= 1; ++dj) {
          const int r = i + di, c = j + dj;
          if (r < 0 || c < 0 || r >= 16 || c >= 16) continue;
          expect = std::max(expect, m.at(r, c));
        }
      }
      CHECK(pooled.at(i, j) == expect);
      CHECK(pooled.at(i, j) >= m.at(i, j));  // pooled dominates pointwise
    }
  }
}

TEST_CASE("softmax basics and stabilization") {
  const std::vector<double> sym = softmax(std::vector<double>{0.0, 0.0});
  CHECK(sym[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(sym[1] == doctest::Approx(0.5).epsilon(1e-12));

  const std::vector<double> big = softmax(std::vector<double>{1000.0, 0.0});
  CHECK(big[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(big[1] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(std::isfinite(big[0]));
}

TEST_CASE("softmax matches direct exp/sum evaluation") {
  Rng rng(29);
  Eigen::VectorXd v = rng.matrix(8, 1, -4.0, 4.0);
  const Eigen::VectorXd got = softmax(Eigen::VectorXd(v));
  double denom = 0.0;
  for (int i = 0; i < 8; ++i) denom += std::exp(v[i]);
  double sum = 0.0;
  for (int i = 0; i < 8; ++i) {
    CHECK(got[i] == doctest::Approx(std::exp(v[i]) / denom).epsilon(1e-12));
    CHECK(got[i] > 0.0);
    sum += got[i];
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("softmax is invariant to constant shifts") {
  Rng rng(31);
  for (int n = 0; n < 20; ++n) {
    Eigen::VectorXd v = rng.matrix(6, 1, -3.0, 3.0);
    Eigen::VectorXd shifted = v.array() + rng.uniform(-50.0, 50.0);
    const Eigen::VectorXd a = softmax(v);
    const Eigen::VectorXd b = softmax(shifted);
    CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("softmax rejects empty and non-finite input") {
  CHECK_THROWS_AS(softmax(std::vector<double>{}), std::invalid_argument);
  CHECK_THROWS_AS(softmax(std::vector<double>{1.0, std::nan("")}), std::invalid_argument);
}

TEST_CASE("upscale_bilinear keeps constants and rejects bad factors") {
  DenseMap m(3, 3, 1, 0.7);
  for (int factor : {2, 4, 8}) {
    const DenseMap up = upscale_bilinear(m, factor);
    CHECK(up.height == 3 * factor);
    CHECK(up.width == 3 * factor);
    for (double v : up.values) CHECK(v == doctest::Approx(0.7).epsilon(1e-14));
  }
  CHECK_THROWS_AS(upscale_bilinear(m, 3), std::invalid_argument);
  CHECK_THROWS_AS(upscale_bilinear(m, 0), std::invalid_argument);
}

TEST_CASE("upscale_bilinear x2 then sampling at original centers reproduces the input") {
  Rng rng(37);
  DenseMap m = random_map(rng, 2, 2, 1);
  const DenseMap up = upscale_bilinear(m, 2);
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      // input center (j+0.5) corresponds to output coordinate 2*j + 0.5
      const double v = bilinear_sample(up, {2.0 * j + 0.5, 2.0 * i + 0.5})[0];
      CHECK(v == doctest::Approx(m.at(i, j)).epsilon(1e-14));
    }
  }
}

TEST_CASE("upscale_bilinear of a ramp is monotone and matches direct interpolation") {
  DenseMap m(4, 4, 1);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) m.at(i, j) = i + j;
  }
  const DenseMap up = upscale_bilinear(m, 2);
  for (int i = 0; i < up.height; ++i) {
    for (int j = 0; j < up.width; ++j) {
      if (j > 0) CHECK(up.at(i, j) >= up.at(i, j - 1) - 1e-12);
      if (i > 0) CHECK(up.at(i, j) >= up.at(i - 1, j) - 1e-12);
      const double expect = bilinear_direct(m, j / 2.0 + 0.5, i / 2.0 + 0.5, 0);
      CHECK(up.at(i, j) == doctest::Approx(expect).epsilon(1e-13));
    }
  }
}

TEST_CASE("upscale_bilinear output stays within the input min/max") {
  Rng rng(41);
  DenseMap m = random_map(rng, 5, 3, 1, -2.0, 2.0);
  double lo = m.values[0], hi = m.values[0];
  for (double v : m.values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  for (double v : upscale_bilinear(m, 4).values) {
    CHECK(v >= lo - 1e-12);
    CHECK(v <= hi + 1e-12);
  }
}

TEST_CASE("ffn_forward identity and zero-weight layers") {
  Rng rng(43);
  const Eigen::VectorXd x = rng.matrix(5, 1, -1.0, 1.0);
  CHECK((ffn_forward(x, identity_ffn(5)) - x).cwiseAbs().maxCoeff() == 0.0);

  FfnWeights zero;
  Eigen::VectorXd b = rng.matrix(3, 1, -1.0, 1.0);
  zero.push_back({Eigen::MatrixXd::Zero(3, 5), b});
  CHECK((ffn_forward(x, zero) - b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("ffn_forward matches an independent two-layer evaluation") {
  Rng rng(47);
  FfnWeights layers;
  layers.push_back({rng.matrix(6, 4, -1.0, 1.0), rng.matrix(6, 1, -1.0, 1.0)});
  layers.push_back({rng.matrix(3, 6, -1.0, 1.0), rng.matrix(3, 1, -1.0, 1.0)});
  const Eigen::VectorXd x = rng.matrix(4, 1, -1.0, 1.0);

  Eigen::VectorXd hidden = layers[0].weight * x + layers[0].bias;
  for (int i = 0; i < hidden.size(); ++i) hidden[i] = std::max(hidden[i], 0.0);
  const Eigen::VectorXd expect = layers[1].weight * hidden + layers[1].bias;

  CHECK((ffn_forward(x, layers) - expect).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("ffn_forward rejects dimension mismatches") {
  FfnWeights layers;
  layers.push_back({Eigen::MatrixXd::Zero(3, 4), Eigen::VectorXd::Zero(3)});
  CHECK_THROWS_AS(ffn_forward(Eigen::VectorXd::Zero(5), layers), std::invalid_argument);
  CHECK_THROWS_AS(ffn_forward(Eigen::VectorXd::Zero(4), FfnWeights{}), std::invalid_argument);
}

TEST_CASE("GridGeometry validates divisibility by 32") {
  CHECK_THROWS_AS(GridGeometry(100, 64), std::invalid_argument);
  CHECK_THROWS_AS(GridGeometry(0, 32), std::invalid_argument);
  const GridGeometry g(192, 256);
  CHECK(g.output_height() == 48);
  CHECK(g.output_width() == 64);
}

TEST_CASE("make_pyramid produces the four expected scales") {
  const GridGeometry g(64, 128);
  const FeaturePyramid p = make_pyramid(g, 8);
  REQUIRE(p.levels.size() == 4);
  CHECK(p.levels[0].height == 2);   // 1/32
  CHECK(p.levels[0].width == 4);
  CHECK(p.levels[1].height == 4);   // 1/16
  CHECK(p.levels[2].height == 8);   // 1/8
  CHECK(p.levels[3].height == 16);  // 1/4
  CHECK(p.levels[3].width == 32);
  validate_pyramid(p, g);
}
