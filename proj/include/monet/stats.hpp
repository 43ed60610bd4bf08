#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "monet/core.hpp"
#include "monet/random.hpp"

namespace monet {

// ---------------------------------------------------------------------------
// Speckle amplitude law and the Rayleigh reference
// ---------------------------------------------------------------------------

// Amplitude density of fully developed L-look speckle:
//   p(n) = 2 L^L / Gamma(L) * n^(2L-1) * exp(-L n^2)
// The square of a sample is Gamma(shape L, rate L), so E[n^2] = 1.
inline double sqrt_gamma_pdf(double n, double looks) {
  if (n < 0.0) throw ParamError("sqrt_gamma_pdf: n must be >= 0");
  if (looks < 1.0) throw ParamError("sqrt_gamma_pdf: looks must be >= 1");
  if (n == 0.0) return 0.0;
  const double log_p = std::log(2.0) + looks * std::log(looks) -
                       std::lgamma(looks) + (2.0 * looks - 1.0) * std::log(n) -
                       looks * n * n;
  return std::exp(log_p);
}

// Single-look reference: Rayleigh with sigma = 1/sqrt(2), i.e.
// F(n) = 1 - exp(-n^2). This is sqrt_gamma at L = 1.
struct RayleighRef {
  double sigma = 0.7071067811865476;  // 1/sqrt(2)
};

inline double rayleigh_pdf(double n) {
  if (n < 0.0) throw ParamError("rayleigh_pdf: n must be >= 0");
  return 2.0 * n * std::exp(-n * n);
}

inline double rayleigh_cdf(double n) {
  if (n < 0.0) throw ParamError("rayleigh_cdf: n must be >= 0");
  return -std::expm1(-n * n);
}

// ---------------------------------------------------------------------------
// Frery amplitude families (product model). K_A covers heterogeneous clutter,
// G_A0 extremely heterogeneous clutter. Amplitude = sqrt(texture * speckle
// intensity), speckle intensity ~ Gamma(L, L); texture is Gamma(alpha, rate
// lambda) for K_A and inverse-Gamma(-alpha, scale gamma) for G_A0.
// ---------------------------------------------------------------------------

struct FreryParams {
  double alpha = 0.0;
  double gamma = 0.0;
  double lambda = 0.0;
  double looks = 1.0;

  static FreryParams ka(double alpha, double lambda, double looks) {
    FreryParams p;
    p.alpha = alpha;
    p.lambda = lambda;
    p.looks = looks;
    p.require_ka();
    return p;
  }
  static FreryParams ga0(double alpha, double gamma, double looks) {
    FreryParams p;
    p.alpha = alpha;
    p.gamma = gamma;
    p.looks = looks;
    p.require_ga0();
    return p;
  }
  void require_ka() const {
    if (!(alpha > 0.0 && gamma == 0.0 && lambda > 0.0 && looks > 0.0))
      throw ParamError("FreryParams: K_A regime needs alpha>0, gamma=0, lambda>0");
  }
  void require_ga0() const {
    if (!(alpha < 0.0 && gamma > 0.0 && lambda == 0.0 && looks > 0.0))
      throw ParamError("FreryParams: G_A0 regime needs alpha<0, gamma>0, lambda=0");
  }
};

// K_A amplitude density:
//   f(z) = 4 lambda L z / (Gamma(alpha) Gamma(L))
//          * (lambda L z^2)^((alpha+L)/2 - 1) * K_{alpha-L}(2 z sqrt(lambda L))
inline double ka_pdf(double z, const FreryParams& p) {
  p.require_ka();
  if (z < 0.0) throw ParamError("ka_pdf: z must be >= 0");
  if (z == 0.0) return 0.0;
  const double ll = p.lambda * p.looks;
  const double order = std::abs(p.alpha - p.looks);  // K_nu = K_{-nu}
  const double bessel = std::cyl_bessel_k(order, 2.0 * z * std::sqrt(ll));
  if (bessel == 0.0) return 0.0;
  const double log_pref = std::log(4.0 * ll * z) - std::lgamma(p.alpha) -
                          std::lgamma(p.looks) +
                          ((p.alpha + p.looks) / 2.0 - 1.0) * std::log(ll * z * z);
  return std::exp(log_pref + std::log(bessel));
}

// G_A0 amplitude density:
//   f(z) = 2 L^L Gamma(L-alpha) / (gamma^alpha Gamma(L) Gamma(-alpha))
//          * z^(2L-1) / (gamma + L z^2)^(L-alpha)
inline double ga0_pdf(double z, const FreryParams& p) {
  p.require_ga0();
  if (z < 0.0) throw ParamError("ga0_pdf: z must be >= 0");
  if (z == 0.0) return 0.0;
  const double L = p.looks;
  const double log_p = std::log(2.0) + L * std::log(L) +
                       std::lgamma(L - p.alpha) - p.alpha * std::log(p.gamma) -
                       std::lgamma(L) - std::lgamma(-p.alpha) +
                       (2.0 * L - 1.0) * std::log(z) -
                       (L - p.alpha) * std::log(p.gamma + L * z * z);
  return std::exp(log_p);
}

// Closed form exists at L = 1: F(z) = 1 - (1 + z^2/gamma)^alpha.
inline double ga0_cdf(double z, const FreryParams& p) {
  p.require_ga0();
  if (z < 0.0) throw ParamError("ga0_cdf: z must be >= 0");
  if (p.looks != 1.0)
    throw ParamError("ga0_cdf: closed form implemented for L = 1 only");
  return 1.0 - std::pow(1.0 + z * z / p.gamma, p.alpha);
}

inline std::vector<double> sample_ka(std::size_t n, const FreryParams& p,
                                     std::uint64_t seed) {
  p.require_ka();
  Rng rng(seed);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double texture = rng.gamma(p.alpha) / p.lambda;
    const double intensity = rng.gamma(p.looks) / p.looks;
    out[i] = std::sqrt(texture * intensity);
  }
  return out;
}

inline std::vector<double> sample_ga0(std::size_t n, const FreryParams& p,
                                      std::uint64_t seed) {
  p.require_ga0();
  Rng rng(seed);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double texture = p.gamma / rng.gamma(-p.alpha);
    const double intensity = rng.gamma(p.looks) / p.looks;
    out[i] = std::sqrt(texture * intensity);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Histograms, Kullback-Leibler divergence, Kolmogorov-Smirnov statistic
// ---------------------------------------------------------------------------

struct Histogram {
  std::vector<double> bin_edges;  // length B+1, strictly increasing
  std::vector<double> densities;  // length B, sum(density * width) = 1

  std::size_t bins() const { return densities.size(); }
  double width(std::size_t i) const { return bin_edges[i + 1] - bin_edges[i]; }
  double mass(std::size_t i) const { return densities[i] * width(i); }

  void normalize() {
    double total = 0.0;
    for (std::size_t i = 0; i < bins(); ++i) total += mass(i);
    if (total <= 0.0) throw ParamError("Histogram::normalize: zero total mass");
    for (double& d : densities) d /= total;
  }
};

inline std::vector<double> uniform_edges(double lo, double hi, int bins) {
  if (bins < 1 || !(hi > lo)) throw ParamError("uniform_edges: bad range");
  std::vector<double> e(bins + 1);
  for (int i = 0; i <= bins; ++i)
    e[i] = lo + (hi - lo) * static_cast<double>(i) / bins;
  return e;
}

// Default binning for speckle ratio statistics: 256 bins on [0, 4], which
// covers all but ~1e-7 of the Rayleigh reference mass.
inline std::vector<double> default_speckle_edges() {
  return uniform_edges(0.0, 4.0, 256);
}

// Bins samples; values outside the edge range are clamped into the end bins.
template <typename T>
Histogram histogram(const std::vector<T>& samples,
                    std::vector<double> bin_edges) {
  if (samples.empty()) throw ParamError("histogram: no samples");
  if (bin_edges.size() < 2) throw ParamError("histogram: need >= 2 edges");
  for (std::size_t i = 0; i + 1 < bin_edges.size(); ++i)
    if (!(bin_edges[i] < bin_edges[i + 1]))
      throw ParamError("histogram: edges must be strictly increasing");

  Histogram h;
  h.bin_edges = std::move(bin_edges);
  h.densities.assign(h.bin_edges.size() - 1, 0.0);
  const std::size_t last = h.bins() - 1;
  for (const T& sv : samples) {
    const double s = static_cast<double>(sv);
    std::size_t b;
    if (s <= h.bin_edges.front())
      b = 0;
    else if (s >= h.bin_edges.back())
      b = last;
    else {
      b = static_cast<std::size_t>(
              std::upper_bound(h.bin_edges.begin(), h.bin_edges.end(), s) -
              h.bin_edges.begin()) -
          1;
    }
    h.densities[b] += 1.0;
  }
  for (std::size_t i = 0; i <= last; ++i) h.densities[i] /= h.width(i);
  h.normalize();
  return h;
}

// Base-2 KL divergence over bin probability masses. Q masses are floored at
// 1e-12 before the log; magnitudes below 1e-11 are treated as rounding noise
// and snapped to zero so identical inputs give exactly zero.
inline double kl_divergence(const Histogram& p, const Histogram& q) {
  if (p.bin_edges != q.bin_edges)
    throw ParamError("kl_divergence: histograms must share bin edges");
  constexpr double kFloor = 1e-12;
  double kl = 0.0;
  for (std::size_t i = 0; i < p.bins(); ++i) {
    const double pm = p.mass(i);
    if (pm <= 0.0) continue;
    const double qm = std::max(q.mass(i), kFloor);
    kl += pm * std::log2(pm / qm);
  }
  if (std::abs(kl) < 1e-11) kl = 0.0;
  return kl;
}

// Two-sided KS distance of a sample set against a theoretical CDF, evaluated
// at the sorted sample points (both one-sided gaps at every step).
template <typename T>
double ks_statistic(std::vector<T> samples,
                    const std::function<double(double)>& cdf) {
  if (samples.empty()) throw ParamError("ks_statistic: no samples");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(static_cast<double>(samples[i]));
    d = std::max(d, f - static_cast<double>(i) / n);
    d = std::max(d, static_cast<double>(i + 1) / n - f);
  }
  return d;
}

// Asymptotic Kolmogorov critical value: reject at level alpha when the KS
// statistic exceeds c(alpha)/sqrt(n), c(alpha) = sqrt(-ln(alpha/2)/2).
// c(0.01) = 1.6276.
inline double kolmogorov_critical(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw ParamError("kolmogorov_critical: alpha must be in (0,1)");
  return std::sqrt(-0.5 * std::log(alpha / 2.0));
}

// Tabulated CDF from a density, composite Simpson per cell. Used where no
// closed form is available (e.g. the K_A family).
class NumericCdf {
 public:
  NumericCdf(const std::function<double(double)>& pdf, double z_max,
             int cells = 16384)
      : z_max_(z_max), cum_(cells + 1, 0.0) {
    if (cells < 8 || !(z_max > 0.0)) throw ParamError("NumericCdf: bad grid");
    const double h = z_max / cells;
    double acc = 0.0;
    double f_lo = pdf(0.0);
    for (int i = 0; i < cells; ++i) {
      const double a = i * h;
      const double f_mid = pdf(a + 0.5 * h);
      const double f_hi = pdf(a + h);
      acc += h / 6.0 * (f_lo + 4.0 * f_mid + f_hi);
      cum_[i + 1] = acc;
      f_lo = f_hi;
    }
    total_ = acc;
    if (total_ <= 0.0) throw ParamError("NumericCdf: density integrates to 0");
  }

  // Unnormalized by design: if the density has mass beyond z_max the values
  // saturate below 1, which is the correct CDF behaviour for KS use.
  double operator()(double z) const {
    if (z <= 0.0) return 0.0;
    if (z >= z_max_) return std::min(total_, 1.0);
    const double pos = z / z_max_ * (cum_.size() - 1);
    const std::size_t i = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(i);
    return std::min(1.0, cum_[i] + frac * (cum_[i + 1] - cum_[i]));
  }

  double total_mass() const { return total_; }

 private:
  double z_max_;
  double total_ = 0.0;
  std::vector<double> cum_;
};

}  // namespace monet
