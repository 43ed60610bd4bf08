#include <catch2/catch_amalgamated.hpp>

#include "monet/stats.hpp"
#include "oracles.hpp"

using namespace monet;

TEST_CASE("sqrt_gamma_pdf point values") {
  CHECK(sqrt_gamma_pdf(0.0, 1.0) == 0.0);
  CHECK_THAT(sqrt_gamma_pdf(1.0, 1.0),
             Catch::Matchers::WithinAbs(2.0 / std::exp(1.0), 1e-12));
  CHECK_THROWS_AS(sqrt_gamma_pdf(-0.1, 1.0), ParamError);
  CHECK_THROWS_AS(sqrt_gamma_pdf(0.5, 0.5), ParamError);
}

TEST_CASE("sqrt_gamma_pdf integrates to one") {
  for (double looks : {1.0, 2.0, 4.0}) {
    const double total = oracle::adaptive_simpson(
        [looks](double n) { return sqrt_gamma_pdf(n, looks); }, 0.0, 12.0,
        1e-10);
    CHECK_THAT(total, Catch::Matchers::WithinAbs(1.0, 1e-6));
  }
}

TEST_CASE("single-look law equals the Rayleigh reference") {
  double worst = 0.0;
  for (int i = 0; i <= 10000; ++i) {
    const double n = 5.0 * i / 10000.0;
    worst = std::max(worst, std::abs(sqrt_gamma_pdf(n, 1.0) - rayleigh_pdf(n)));
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("rayleigh_cdf") {
  CHECK(rayleigh_cdf(0.0) == 0.0);
  CHECK_THAT(rayleigh_cdf(1.0),
             Catch::Matchers::WithinAbs(1.0 - std::exp(-1.0), 1e-12));
  CHECK(rayleigh_cdf(3.0) > 0.9998);
  for (int i = 0; i < 100; ++i)
    CHECK(rayleigh_cdf(0.05 * (i + 1)) >= rayleigh_cdf(0.05 * i));
  CHECK_THROWS_AS(rayleigh_cdf(-1.0), ParamError);
}

TEST_CASE("frery regimes are validated") {
  CHECK_THROWS_AS(FreryParams::ka(-1.0, 7.5, 1.0), ParamError);
  CHECK_THROWS_AS(FreryParams::ga0(0.5, 0.145, 1.0), ParamError);
  CHECK_THROWS_AS(FreryParams::ga0(-0.5, 0.0, 1.0), ParamError);
  const FreryParams ka = FreryParams::ka(2.0, 7.5, 1.0);
  CHECK_THROWS_AS(ga0_pdf(1.0, ka), ParamError);
}

TEST_CASE("ka_pdf density properties") {
  const FreryParams p = FreryParams::ka(2.0, 7.5, 1.0);
  CHECK(ka_pdf(0.0, p) == 0.0);
  for (double z : {0.1, 0.5, 1.0, 2.0}) CHECK(ka_pdf(z, p) >= 0.0);
  const double total = oracle::adaptive_simpson(
      [&](double z) { return ka_pdf(z, p); }, 0.0, 10.0, 1e-9);
  CHECK_THAT(total, Catch::Matchers::WithinAbs(1.0, 1e-5));
}

TEST_CASE("ga0_pdf density properties") {
  const FreryParams p = FreryParams::ga0(-0.5, 0.145, 1.0);
  CHECK(ga0_pdf(0.0, p) == 0.0);
  // heavy tail: quadrature far out plus the closed-form complement
  const double body = oracle::adaptive_simpson(
      [&](double z) { return ga0_pdf(z, p); }, 0.0, 200.0, 1e-9);
  CHECK_THAT(body, Catch::Matchers::WithinAbs(ga0_cdf(200.0, p), 1e-5));
  CHECK_THAT(body + (1.0 - ga0_cdf(200.0, p)),
             Catch::Matchers::WithinAbs(1.0, 1e-5));
  CHECK(ga0_cdf(40000.0, p) > 1.0 - 1e-4);
}

TEST_CASE("samplers are self-consistent with their densities") {
  const FreryParams ka = FreryParams::ka(2.0, 7.5, 1.0);
  const auto ka_samples = sample_ka(1000000, ka, 11);
  const NumericCdf ka_cdf([&](double z) { return ka_pdf(z, ka); }, 12.0);
  CHECK(ks_statistic(ka_samples, [&](double z) { return ka_cdf(z); }) < 0.003);

  const FreryParams g0 = FreryParams::ga0(-0.5, 0.145, 1.0);
  const auto g0_samples = sample_ga0(1000000, g0, 13);
  CHECK(ks_statistic(g0_samples, [&](double z) { return ga0_cdf(z, g0); }) <
        0.003);
}

TEST_CASE("samplers are deterministic") {
  const FreryParams ka = FreryParams::ka(2.0, 7.5, 1.0);
  CHECK(sample_ka(1000, ka, 21) == sample_ka(1000, ka, 21));
  const FreryParams g0 = FreryParams::ga0(-0.5, 0.145, 1.0);
  CHECK(sample_ga0(1000, g0, 21) == sample_ga0(1000, g0, 21));
}

TEST_CASE("histogram basics") {
  CHECK_THROWS_AS(histogram(std::vector<double>{}, uniform_edges(0, 1, 4)),
                  ParamError);
  CHECK_THROWS_AS(histogram(std::vector<double>{1.0},
                            std::vector<double>{0.0, 0.0, 1.0}),
                  ParamError);

  // all mass in the bin holding the samples
  Histogram h = histogram(std::vector<double>(100, 0.35), uniform_edges(0, 1, 10));
  CHECK_THAT(h.mass(3), Catch::Matchers::WithinAbs(1.0, 1e-12));

  // out-of-range samples clamp into the end bins
  Histogram c = histogram(std::vector<double>{-5.0, 9.0}, uniform_edges(0, 1, 2));
  CHECK_THAT(c.mass(0), Catch::Matchers::WithinAbs(0.5, 1e-12));
  CHECK_THAT(c.mass(1), Catch::Matchers::WithinAbs(0.5, 1e-12));
}

TEST_CASE("histogram of uniform samples is flat") {
  Rng rng(3);
  std::vector<double> s(100000);
  for (auto& v : s) v = rng.uniform();
  Histogram h = histogram(s, uniform_edges(0, 1, 10));
  for (std::size_t i = 0; i < h.bins(); ++i)
    CHECK_THAT(h.densities[i], Catch::Matchers::WithinAbs(1.0, 0.05));
}

TEST_CASE("histogram normalization is a probability density") {
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> s(200);
    for (auto& v : s) v = rng.uniform(-1.0, 3.0);
    Histogram h = histogram(s, uniform_edges(0.0, 2.0, 16));
    double total = 0.0;
    for (std::size_t i = 0; i < h.bins(); ++i) total += h.mass(i);
    CHECK_THAT(total, Catch::Matchers::WithinAbs(1.0, 1e-9));
  }
}

static Histogram masses_to_hist(std::vector<double> masses) {
  Histogram h;
  h.bin_edges = uniform_edges(0.0, static_cast<double>(masses.size()),
                              static_cast<int>(masses.size()));
  h.densities = std::move(masses);  // unit widths
  return h;
}

TEST_CASE("kl_divergence hand-computed case") {
  Histogram p = masses_to_hist({0.5, 0.5});
  Histogram q = masses_to_hist({0.25, 0.75});
  // 0.5*log2(2) + 0.5*log2(2/3)
  CHECK_THAT(kl_divergence(p, q),
             Catch::Matchers::WithinAbs(0.20751874963942190, 1e-12));
  CHECK(kl_divergence(p, p) == 0.0);
  CHECK(kl_divergence(q, p) != kl_divergence(p, q));

  Histogram other = masses_to_hist({0.5, 0.25, 0.25});
  CHECK_THROWS_AS(kl_divergence(p, other), ParamError);
}

TEST_CASE("kl_divergence is nonnegative on random pairs") {
  Rng rng(23);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> pm(8), qm(8);
    double ps = 0, qs = 0;
    for (int i = 0; i < 8; ++i) {
      pm[i] = rng.uniform(0.01, 1.0);
      qm[i] = rng.uniform(0.01, 1.0);
      ps += pm[i];
      qs += qm[i];
    }
    for (int i = 0; i < 8; ++i) {
      pm[i] /= ps;
      qm[i] /= qs;
    }
    CHECK(kl_divergence(masses_to_hist(pm), masses_to_hist(qm)) >= 0.0);
  }
}

TEST_CASE("ks_statistic") {
  CHECK_THROWS_AS(
      ks_statistic(std::vector<double>{}, [](double) { return 0.5; }),
      ParamError);

  // single sample at the median: sup gap is exactly 1/2
  CHECK_THAT(ks_statistic(std::vector<double>{0.8325546111576977},
                          [](double z) { return rayleigh_cdf(z); }),
             Catch::Matchers::WithinAbs(0.5, 1e-9));

  // degenerate mass at zero against a continuous law
  CHECK_THAT(ks_statistic(std::vector<double>(100, 0.0),
                          [](double z) { return rayleigh_cdf(z); }),
             Catch::Matchers::WithinAbs(1.0, 1e-12));

  // samples drawn from the reference law stay under the critical value
  Rng rng(31);
  std::vector<double> s(100000);
  for (auto& v : s) v = std::sqrt(-std::log(1.0 - rng.uniform()));
  const double d = ks_statistic(s, [](double z) { return rayleigh_cdf(z); });
  CHECK(d < 1.63 / std::sqrt(100000.0));
}

TEST_CASE("ks_statistic is invariant under increasing transforms") {
  Rng rng(37);
  std::vector<double> s(5000), cubed(5000);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = std::sqrt(-std::log(1.0 - rng.uniform()));
    cubed[i] = s[i] * s[i] * s[i];
  }
  const double d1 = ks_statistic(s, [](double z) { return rayleigh_cdf(z); });
  const double d2 = ks_statistic(
      cubed, [](double z) { return rayleigh_cdf(std::cbrt(z)); });
  CHECK_THAT(d1, Catch::Matchers::WithinAbs(d2, 1e-12));
}

TEST_CASE("kolmogorov critical value") {
  CHECK_THAT(kolmogorov_critical(0.01),
             Catch::Matchers::WithinAbs(1.628, 5e-4));
  CHECK_THROWS_AS(kolmogorov_critical(0.0), ParamError);
  CHECK_THROWS_AS(kolmogorov_critical(1.0), ParamError);
}

TEST_CASE("NumericCdf matches a closed form") {
  const NumericCdf cdf([](double z) { return rayleigh_pdf(z); }, 8.0);
  double worst = 0.0;
  for (int i = 0; i <= 1000; ++i) {
    const double z = 6.0 * i / 1000.0;
    worst = std::max(worst, std::abs(cdf(z) - rayleigh_cdf(z)));
  }
  CHECK(worst < 1e-6);
}
