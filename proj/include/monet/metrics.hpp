#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "monet/core.hpp"
#include "monet/random.hpp"
#include "monet/stats.hpp"

namespace monet {

struct Rect {
  int row = 0, col = 0, height = 0, width = 0;
};

struct Roi {
  std::vector<Rect> rects;
};

inline void check_roi(const Roi& roi, const Image<float>& img) {
  for (const Rect& r : roi.rects) {
    if (r.row < 0 || r.col < 0 || r.height < 1 || r.width < 1 ||
        r.row + r.height > img.height || r.col + r.width > img.width)
      throw ParamError("roi rectangle out of image bounds");
  }
}

// ---------------------------------------------------------------------------
// Reference metrics
// ---------------------------------------------------------------------------

template <typename T>
double mse(const Image<T>& a, const Image<T>& b) {
  if (!a.same_shape(b)) throw ParamError("mse: shape mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double e = static_cast<double>(a.pixels[i]) -
                     static_cast<double>(b.pixels[i]);
    acc += e * e;
  }
  return acc / static_cast<double>(a.size());
}

// 10 log10( sum X^2 / sum (X - Xhat)^2 ), reference signal energy over error
// energy. A perfect estimate reports +infinity.
template <typename T>
double snr_db(const Image<T>& estimate, const Image<T>& reference) {
  if (!estimate.same_shape(reference)) throw ParamError("snr: shape mismatch");
  double sig = 0.0, err = 0.0;
  for (std::size_t i = 0; i < estimate.size(); ++i) {
    const double x = static_cast<double>(reference.pixels[i]);
    const double e = x - static_cast<double>(estimate.pixels[i]);
    sig += x * x;
    err += e * e;
  }
  if (err == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(sig / err);
}

namespace detail {

inline std::vector<double> gaussian_window(int taps, double sigma) {
  std::vector<double> w(taps);
  const double c = (taps - 1) / 2.0;
  double sum = 0.0;
  for (int i = 0; i < taps; ++i) {
    w[i] = std::exp(-0.5 * (i - c) * (i - c) / (sigma * sigma));
    sum += w[i];
  }
  for (double& v : w) v /= sum;
  return w;
}

// Separable filtering, valid region only.
inline Image<double> filter_valid(const Image<double>& img,
                                  const std::vector<double>& win) {
  const int t = static_cast<int>(win.size());
  const int oh = img.height - t + 1, ow = img.width - t + 1;
  Image<double> horiz(img.height, ow), out(oh, ow);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int k = 0; k < t; ++k) s += win[k] * img.at(y, x + k);
      horiz.at(y, x) = s;
    }
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int k = 0; k < t; ++k) s += win[k] * horiz.at(y + k, x);
      out.at(y, x) = s;
    }
  return out;
}

}  // namespace detail

// Mean local structural similarity, 11x11 Gaussian window sigma 1.5,
// K1 = 0.01, K2 = 0.03, dynamic range 1 (normalized amplitudes).
template <typename T>
double ssim(const Image<T>& a, const Image<T>& b) {
  if (!a.same_shape(b)) throw ParamError("ssim: shape mismatch");
  constexpr int kTaps = 11;
  if (a.height < kTaps || a.width < kTaps)
    throw ParamError("ssim: image smaller than the 11x11 window");
  constexpr double kC1 = 0.01 * 0.01;
  constexpr double kC2 = 0.03 * 0.03;
  const std::vector<double> win = detail::gaussian_window(kTaps, 1.5);

  Image<double> da(a.height, a.width), db(a.height, a.width);
  Image<double> daa(a.height, a.width), dbb(a.height, a.width),
      dab(a.height, a.width);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = static_cast<double>(a.pixels[i]);
    const double y = static_cast<double>(b.pixels[i]);
    da.pixels[i] = x;
    db.pixels[i] = y;
    daa.pixels[i] = x * x;
    dbb.pixels[i] = y * y;
    dab.pixels[i] = x * y;
  }
  const Image<double> mu_a = detail::filter_valid(da, win);
  const Image<double> mu_b = detail::filter_valid(db, win);
  const Image<double> m_aa = detail::filter_valid(daa, win);
  const Image<double> m_bb = detail::filter_valid(dbb, win);
  const Image<double> m_ab = detail::filter_valid(dab, win);

  double acc = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double ma = mu_a.pixels[i], mb = mu_b.pixels[i];
    const double va = m_aa.pixels[i] - ma * ma;
    const double vb = m_bb.pixels[i] - mb * mb;
    const double cov = m_ab.pixels[i] - ma * mb;
    acc += ((2.0 * ma * mb + kC1) * (2.0 * cov + kC2)) /
           ((ma * ma + mb * mb + kC1) * (va + vb + kC2));
  }
  return acc / static_cast<double>(mu_a.size());
}

// ---------------------------------------------------------------------------
// No-reference metrics
// ---------------------------------------------------------------------------

// Equivalent number of looks on intensity (amplitude squared):
// mean(I)^2 / var(I) over the region.
template <typename T>
double enl(const Image<T>& img, const Rect& roi) {
  if (roi.row < 0 || roi.col < 0 || roi.row + roi.height > img.height ||
      roi.col + roi.width > img.width)
    throw ParamError("enl: roi out of bounds");
  const std::int64_t n =
      static_cast<std::int64_t>(roi.height) * roi.width;
  if (n < 2) throw ParamError("enl: roi needs >= 2 pixels");
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < roi.height; ++i)
    for (int j = 0; j < roi.width; ++j) {
      const double a = static_cast<double>(img.at(roi.row + i, roi.col + j));
      const double inten = a * a;
      sum += inten;
      sum2 += inten * inten;
    }
  const double mean = sum / static_cast<double>(n);
  const double var = sum2 / static_cast<double>(n) - mean * mean;
  if (var <= 0.0) throw ParamError("enl: degenerate constant region");
  return mean * mean / var;
}

namespace detail {

template <typename T>
std::vector<int> quantize_levels(const Image<T>& img, int levels) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const T& p : img.pixels) {
    lo = std::min(lo, static_cast<double>(p));
    hi = std::max(hi, static_cast<double>(p));
  }
  std::vector<int> q(img.size(), 0);
  if (hi > lo) {
    const double scale = levels / (hi - lo);
    for (std::size_t i = 0; i < img.size(); ++i)
      q[i] = std::min(levels - 1,
                      static_cast<int>((static_cast<double>(img.pixels[i]) - lo) *
                                       scale));
  }
  return q;
}

inline double glcm_homogeneity_of_levels(const std::vector<int>& q, int h,
                                         int w, int levels, int dr, int dc) {
  std::vector<double> glcm(static_cast<std::size_t>(levels) * levels, 0.0);
  double total = 0.0;
  for (int i = 0; i < h; ++i) {
    const int i2 = i + dr;
    if (i2 < 0 || i2 >= h) continue;
    for (int j = 0; j < w; ++j) {
      const int j2 = j + dc;
      if (j2 < 0 || j2 >= w) continue;
      const int a = q[static_cast<std::size_t>(i) * w + j];
      const int b = q[static_cast<std::size_t>(i2) * w + j2];
      glcm[static_cast<std::size_t>(a) * levels + b] += 1.0;  // symmetric
      glcm[static_cast<std::size_t>(b) * levels + a] += 1.0;
      total += 2.0;
    }
  }
  if (total == 0.0) throw ParamError("glcm: no pixel pairs for the offset");
  double hom = 0.0;
  for (int a = 0; a < levels; ++a)
    for (int b = 0; b < levels; ++b) {
      const double p = glcm[static_cast<std::size_t>(a) * levels + b] / total;
      hom += p / (1.0 + (a - b) * (a - b));
    }
  return hom;
}

}  // namespace detail

// Haralick homogeneity of the symmetric co-occurrence matrix at the given
// offset. A constant image has a single level and homogeneity 1.
template <typename T>
double glcm_homogeneity(const Image<T>& img, int levels,
                        std::pair<int, int> offset = {0, 1}) {
  if (levels < 2) throw ParamError("glcm_homogeneity: levels must be >= 2");
  if (img.size() == 0) throw ParamError("glcm_homogeneity: empty image");
  const std::vector<int> q = detail::quantize_levels(img, levels);
  return detail::glcm_homogeneity_of_levels(q, img.height, img.width, levels,
                                            offset.first, offset.second);
}

// delta-h: relative distance between the homogeneity of the ratio image and
// the homogeneity of the same pixels randomly permuted (averaged over
// `permutations` seeded shuffles). 64 levels, offset (0,1).
template <typename T>
double delta_h(const Image<T>& ratio, int permutations = 8,
               std::uint64_t seed = 0) {
  if (permutations < 1) throw ParamError("delta_h: permutations must be >= 1");
  constexpr int kLevels = 64;
  std::vector<int> q = detail::quantize_levels(ratio, kLevels);
  const double h0 = detail::glcm_homogeneity_of_levels(
      q, ratio.height, ratio.width, kLevels, 0, 1);
  double hg = 0.0;
  for (int m = 0; m < permutations; ++m) {
    std::vector<int> perm = q;
    Rng rng(mix_seed(seed, 0x706572D5ULL + m));
    rng.shuffle(perm);
    hg += detail::glcm_homogeneity_of_levels(perm, ratio.height, ratio.width,
                                             kLevels, 0, 1);
  }
  hg /= permutations;
  return std::abs(h0 - hg) / h0;
}

// Residual ENL over n homogeneous patches:
// (1/n) sum |ENL_noisy(i) - ENL_ratio(i)| / ENL_noisy(i)
template <typename T>
double residual_enl(const Image<T>& noisy, const Image<T>& ratio,
                    const Roi& roi) {
  if (!noisy.same_shape(ratio)) throw ParamError("residual_enl: shape mismatch");
  if (roi.rects.empty()) throw ParamError("residual_enl: empty roi set");
  check_roi(roi, noisy);
  double acc = 0.0;
  for (const Rect& r : roi.rects) {
    const double e_noisy = enl(noisy, r);
    const double e_ratio = enl(ratio, r);
    acc += std::abs(e_noisy - e_ratio) / e_noisy;
  }
  return acc / static_cast<double>(roi.rects.size());
}

// (1/n) sum |1 - mean(ratio over patch i)|
template <typename T>
double r_mu(const Image<T>& ratio, const Roi& roi) {
  if (roi.rects.empty()) throw ParamError("r_mu: empty roi set");
  check_roi(roi, ratio);
  double acc = 0.0;
  for (const Rect& r : roi.rects) {
    double s = 0.0;
    for (int i = 0; i < r.height; ++i)
      for (int j = 0; j < r.width; ++j)
        s += static_cast<double>(ratio.at(r.row + i, r.col + j));
    acc += std::abs(1.0 - s / (static_cast<double>(r.height) * r.width));
  }
  return acc / static_cast<double>(roi.rects.size());
}

// Global mean of the ratio image. For an ideal single-look filter this tends
// to E[N] = sqrt(pi)/2 ~ 0.8862.
template <typename T>
double mu_ratio(const Image<T>& ratio) {
  if (ratio.size() == 0) throw ParamError("mu_ratio: empty image");
  double s = 0.0;
  for (const T& p : ratio.pixels) s += static_cast<double>(p);
  return s / static_cast<double>(ratio.size());
}

// Aggregate surrogate for the composite no-reference index. The combining
// formula of the index this stands in for is not public here, so the raw
// components are always reported alongside and the weights are configurable.
struct MIndexWeights {
  double w_delta_h = 50.0;
  double w_r_mu = 50.0;
  double w_r_enl = 0.5;
};

inline double m_index(double delta_h_value, double r_enl_value,
                      double r_mu_value, const MIndexWeights& w = {}) {
  return w.w_delta_h * delta_h_value + w.w_r_mu * r_mu_value +
         w.w_r_enl * r_enl_value;
}

// Base-2 KL divergence of the ratio-image histogram (256 bins on [0,4],
// clamped) against the per-bin-integrated Rayleigh reference.
template <typename T>
double dkl_ratio(const Image<T>& ratio) {
  if (ratio.size() == 0) throw ParamError("dkl_ratio: empty image");
  Histogram p = histogram(ratio.pixels, default_speckle_edges());
  Histogram q;
  q.bin_edges = default_speckle_edges();
  q.densities.resize(256);
  for (int i = 0; i < 256; ++i) {
    double mass = rayleigh_cdf(q.bin_edges[i + 1]) - rayleigh_cdf(q.bin_edges[i]);
    if (i == 255) mass += 1.0 - rayleigh_cdf(q.bin_edges[256]);
    q.densities[i] = mass / (q.bin_edges[i + 1] - q.bin_edges[i]);
  }
  return kl_divergence(p, q);
}

// Automatic homogeneous-region fallback: the n non-overlapping windows with
// the lowest intensity coefficient of variation.
template <typename T>
Roi auto_rois(const Image<T>& img, int count = 4, int window = 16) {
  if (count < 1 || window < 2) throw ParamError("auto_rois: bad parameters");
  if (img.height < window || img.width < window)
    throw ParamError("auto_rois: image smaller than the window");
  struct Scored {
    double cv;
    Rect rect;
  };
  std::vector<Scored> cand;
  for (int i = 0; i + window <= img.height; i += window)
    for (int j = 0; j + window <= img.width; j += window) {
      double s = 0.0, s2 = 0.0;
      for (int a = 0; a < window; ++a)
        for (int b = 0; b < window; ++b) {
          const double v = static_cast<double>(img.at(i + a, j + b));
          const double inten = v * v;
          s += inten;
          s2 += inten * inten;
        }
      const double n = static_cast<double>(window) * window;
      const double mean = s / n;
      if (mean <= 0.0) continue;
      const double var = std::max(0.0, s2 / n - mean * mean);
      cand.push_back({std::sqrt(var) / mean, Rect{i, j, window, window}});
    }
  if (cand.empty()) throw ParamError("auto_rois: no usable windows");
  std::stable_sort(cand.begin(), cand.end(),
                   [](const Scored& a, const Scored& b) { return a.cv < b.cv; });
  Roi roi;
  for (int i = 0; i < count && i < static_cast<int>(cand.size()); ++i)
    roi.rects.push_back(cand[i].rect);
  return roi;
}

// ---------------------------------------------------------------------------
// Combined report
// ---------------------------------------------------------------------------

struct MetricsReport {
  std::optional<double> ssim;
  std::optional<double> mse;
  std::optional<double> snr;
  double enl = 0.0;
  double delta_h = 0.0;
  double r_enl = 0.0;
  double r_mu = 0.0;
  double mu_ratio = 0.0;
  double m_index = 0.0;
  double d_kl = 0.0;

  static std::string csv_header() {
    return "ssim,mse,snr,enl,delta_h,r_enl,r_mu,mu_ratio,m_index,d_kl";
  }

  std::string csv_row() const {
    std::ostringstream os;
    auto opt = [&os](const std::optional<double>& v) {
      if (v) os << *v;
      os << ',';
    };
    os.precision(8);
    opt(ssim);
    opt(mse);
    opt(snr);
    os << enl << ',' << delta_h << ',' << r_enl << ',' << r_mu << ','
       << mu_ratio << ',' << m_index << ',' << d_kl;
    return os.str();
  }

  // Text table in the column order of the usual assessment tables.
  std::string pretty() const {
    std::ostringstream os;
    os.precision(5);
    os << "M-index   " << m_index << "\n"
       << "delta_h   " << delta_h << "\n"
       << "r_ENL     " << r_enl << "\n"
       << "mu_N      " << mu_ratio << "\n"
       << "D_KL      " << d_kl << "\n"
       << "ENL       " << enl << "\n";
    if (ssim) os << "SSIM      " << *ssim << "\n";
    if (snr) os << "SNR       " << *snr << "\n";
    if (mse) os << "MSE       " << *mse << "\n";
    return os.str();
  }
};

// Full evaluation of one filtered image. The reference is optional; when
// absent only the no-reference block is populated.
struct EvalOptions {
  int roi_count = 4;
  int roi_window = 16;
  int glcm_permutations = 8;
  std::uint64_t seed = 0;
  double eps_div = 1e-3;
  MIndexWeights m_weights;
};

inline MetricsReport evaluate(const Image<float>& noisy,
                              const Image<float>& filtered,
                              const Image<float>* reference = nullptr,
                              const Roi* user_roi = nullptr,
                              const EvalOptions& opt = {}) {
  if (!noisy.same_shape(filtered))
    throw ParamError("evaluate: noisy/filtered shape mismatch");
  Image<float> ratio(noisy.height, noisy.width);
  for (std::size_t i = 0; i < noisy.size(); ++i)
    ratio.pixels[i] = noisy.pixels[i] /
                      std::max(filtered.pixels[i],
                               static_cast<float>(opt.eps_div));
  MetricsReport rep;
  if (reference) {
    if (!reference->same_shape(filtered))
      throw ParamError("evaluate: reference shape mismatch");
    rep.ssim = ssim(filtered, *reference);
    rep.mse = mse(filtered, *reference);
    rep.snr = snr_db(filtered, *reference);
  }
  Roi roi = user_roi ? *user_roi
                     : auto_rois(noisy, opt.roi_count, opt.roi_window);
  check_roi(roi, noisy);
  double enl_acc = 0.0;
  for (const Rect& r : roi.rects) enl_acc += enl(filtered, r);
  rep.enl = enl_acc / static_cast<double>(roi.rects.size());
  rep.delta_h = delta_h(ratio, opt.glcm_permutations, opt.seed);
  rep.r_enl = residual_enl(noisy, ratio, roi);
  rep.r_mu = r_mu(ratio, roi);
  rep.mu_ratio = mu_ratio(ratio);
  rep.m_index = m_index(rep.delta_h, rep.r_enl, rep.r_mu, opt.m_weights);
  rep.d_kl = dkl_ratio(ratio);
  return rep;
}

}  // namespace monet
