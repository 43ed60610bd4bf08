#include <catch2/catch_amalgamated.hpp>

#include "monet/speckle.hpp"
#include "oracles.hpp"

using namespace monet;

TEST_CASE("speckle has unit mean power") {
  // Var(N^2) = 1/L, so the 1e6-sample mean sits within 3 sigma of 1.
  for (int looks : {1, 2, 4}) {
    SpeckleField f = sample_speckle(1000, 1000, looks, 7);
    double m2 = 0.0;
    for (float v : f.values.pixels) m2 += static_cast<double>(v) * v;
    m2 /= static_cast<double>(f.values.size());
    const double sigma = std::sqrt(1.0 / looks / 1e6);
    CHECK(std::abs(m2 - 1.0) < 3.0 * sigma);
    if (looks == 1) {
      CHECK(m2 > 0.995);
      CHECK(m2 < 1.005);
    }
  }
}

TEST_CASE("single-look speckle follows the Rayleigh law") {
  SpeckleField f = sample_speckle(1000, 1000, 1, 7);
  const double d = ks_statistic(
      f.values.pixels, [](double n) { return n < 0 ? 0.0 : rayleigh_cdf(n); });
  CHECK(d < 0.002);
}

TEST_CASE("speckle sampling is deterministic and validated") {
  SpeckleField a = sample_speckle(64, 64, 1, 99);
  SpeckleField b = sample_speckle(64, 64, 1, 99);
  CHECK(a.values.pixels == b.values.pixels);
  for (float v : a.values.pixels) CHECK(v >= 0.0f);

  CHECK_THROWS_AS(sample_speckle(0, 4, 1, 0), ParamError);
  CHECK_THROWS_AS(sample_speckle(4, 4, 0, 0), ParamError);
}

TEST_CASE("simulate_pair basics") {
  Image<float> ones(64, 64, 1.0f);
  SimPair p = simulate_pair(ones, 1, 5);
  CHECK(p.noisy.pixels == p.speckle.values.pixels);

  Image<float> zeros(16, 16, 0.0f);
  SimPair z = simulate_pair(zeros, 1, 5);
  for (float v : z.noisy.pixels) CHECK(v == 0.0f);

  Image<float> bad(4, 4, -0.5f);
  CHECK_THROWS_AS(simulate_pair(bad, 1, 5), ParamError);
  Image<float> big(4, 4, 1.5f);
  CHECK_THROWS_AS(simulate_pair(big, 1, 5), ParamError);
}

TEST_CASE("simulate_pair preserves second moments") {
  Image<float> half(1000, 1000, 0.5f);
  SimPair p = simulate_pair(half, 1, 41);
  double m2 = 0.0;
  for (float v : p.noisy.pixels) m2 += static_cast<double>(v) * v;
  m2 /= static_cast<double>(p.noisy.size());
  CHECK_THAT(m2, Catch::Matchers::WithinAbs(0.25, 0.0025));
}

TEST_CASE("multiplicativity is exact in working precision") {
  Image<float> clean = oracle::rand_image<float>(64, 64, 0.0, 1.0, 3);
  SimPair p = simulate_pair(clean, 2, 77);
  for (std::size_t i = 0; i < p.noisy.size(); ++i)
    CHECK(p.noisy.pixels[i] ==
          p.clean.pixels[i] * p.speckle.values.pixels[i]);
}

TEST_CASE("synth_texture constant and ramp") {
  TextureParams tp;
  tp.level = 0.5;
  Image<float> c = synth_texture(TextureKind::kConstant, 8, 8, tp, 0);
  for (float v : c.pixels) CHECK(v == 0.5f);

  Image<float> r = synth_texture(TextureKind::kRamp, 16, 32, tp, 0);
  for (int i = 0; i < r.height; ++i)
    for (int j = 0; j + 1 < r.width; ++j) CHECK(r.at(i, j) < r.at(i, j + 1));
  CHECK(r.at(0, 0) == 0.0f);
  CHECK(r.at(0, 31) == 1.0f);
}

TEST_CASE("synth_texture checkerboard and gamma texture") {
  TextureParams tp;
  Image<float> cb = synth_texture(TextureKind::kCheckerboard, 32, 32, tp, 0);
  CHECK(cb.at(0, 0) == Catch::Approx(0.25));
  CHECK(cb.at(0, 8) == Catch::Approx(0.75));
  CHECK(cb.at(8, 8) == Catch::Approx(0.25));

  Image<float> g = synth_texture(TextureKind::kGammaTexture, 256, 256, tp, 9);
  double mean = 0.0;
  for (float v : g.pixels) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
    mean += v;
  }
  mean /= static_cast<double>(g.size());
  // analytic mean = shape * scale = 0.2; wrap-around blur preserves it
  CHECK_THAT(mean, Catch::Matchers::WithinAbs(0.2, 0.005));
}

TEST_CASE("point scatterers land within Poisson bounds") {
  TextureParams tp;
  tp.contrast = 5.0;
  tp.density = 1e-3;
  Image<float> img =
      synth_texture(TextureKind::kPointScatterers, 256, 256, tp, 13);
  long flagged = 0;
  for (float v : img.pixels)
    if (v > static_cast<float>(tp.background) + 1e-6f) ++flagged;
  const double expect = tp.density * 256.0 * 256.0;
  const double sigma = std::sqrt(expect);
  CHECK(flagged > expect - 4.0 * sigma);
  CHECK(flagged < expect + 4.0 * sigma);
  // scatterers sit at contrast x background
  for (float v : img.pixels)
    if (v > static_cast<float>(tp.background) + 1e-6f)
      CHECK(v == Catch::Approx(tp.background * tp.contrast));
}

TEST_CASE("scatterer placement is deterministic and separated") {
  auto a = point_scatterer_positions(128, 128, 5e-3, 3, 7);
  auto b = point_scatterer_positions(128, 128, 5e-3, 3, 7);
  CHECK(a == b);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      const int dr = std::abs(a[i].first - a[j].first);
      const int dc = std::abs(a[i].second - a[j].second);
      CHECK(std::max(dr, dc) > 3);
    }
}

TEST_CASE("texture kind parsing") {
  CHECK(parse_texture_kind("gamma-texture") == TextureKind::kGammaTexture);
  CHECK_THROWS_AS(parse_texture_kind("perlin"), ParamError);
}
