#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "monet/core.hpp"
#include "monet/stats.hpp"

namespace monet {

struct DetectConfig {
  int edge_window = 7;          // odd
  double edge_threshold = 1.2;  // > 1; ratio-of-means response cutoff
  int ks_patch = 16;            // tile side for the patch-level KS test
  double ks_alpha = 0.01;       // significance of the KS branch
  enum class Combine { kAnd, kOr } combine = Combine::kAnd;
  int dilation = 1;             // Chebyshev radius applied to the edge map
  FreryParams eh_family = FreryParams::ga0(-0.5, 0.145, 1.0);
  FreryParams h_family = FreryParams::ka(2.0, 7.5, 1.0);
};

// ---------------------------------------------------------------------------
// Ratio edge detector: response = max over 4 orientations (vertical,
// horizontal and both diagonal splits of the window, center line excluded)
// of max(mu1/mu2, mu2/mu1). Scale invariant and >= 1 wherever defined.
// Pixels whose window leaves the image, or with a zero-mean half-window,
// carry the sentinel response -1 and are never flagged.
// ---------------------------------------------------------------------------

struct EdgeMap {
  Image<std::uint8_t> flags;
  Image<float> response;
};

template <typename T>
EdgeMap touzi_edge_map(const Image<T>& ratio, int window, double threshold) {
  if (window < 3 || window % 2 == 0)
    throw ParamError("touzi_edge_map: window must be odd and >= 3");
  if (!(threshold > 1.0))
    throw ParamError("touzi_edge_map: threshold must exceed 1");
  if (ratio.height < window || ratio.width < window)
    throw ParamError("touzi_edge_map: window does not fit the image");

  EdgeMap map;
  map.flags = Image<std::uint8_t>(ratio.height, ratio.width, 0);
  map.response = Image<float>(ratio.height, ratio.width, -1.0f);
  const int hw = window / 2;

#pragma omp parallel for schedule(static)
  for (int y = hw; y < ratio.height - hw; ++y) {
    for (int x = hw; x < ratio.width - hw; ++x) {
      double sum[4][2] = {};
      long cnt[4][2] = {};
      for (int dy = -hw; dy <= hw; ++dy) {
        const T* row = ratio.row(y + dy) + x;
        for (int dx = -hw; dx <= hw; ++dx) {
          const double v = static_cast<double>(row[dx]);
          if (dx != 0) {
            sum[0][dx > 0] += v;
            ++cnt[0][dx > 0];
          }
          if (dy != 0) {
            sum[1][dy > 0] += v;
            ++cnt[1][dy > 0];
          }
          if (dx != dy) {
            sum[2][dx > dy] += v;
            ++cnt[2][dx > dy];
          }
          if (dx != -dy) {
            sum[3][dx > -dy] += v;
            ++cnt[3][dx > -dy];
          }
        }
      }
      double response = 1.0;
      bool defined = true;
      for (int o = 0; o < 4 && defined; ++o) {
        const double m1 = sum[o][0] / static_cast<double>(cnt[o][0]);
        const double m2 = sum[o][1] / static_cast<double>(cnt[o][1]);
        if (m1 <= 0.0 || m2 <= 0.0) {
          defined = false;
          break;
        }
        response = std::max(response, std::max(m1 / m2, m2 / m1));
      }
      if (!defined) continue;  // sentinel stays -1
      map.response.at(y, x) = static_cast<float>(response);
      if (response > threshold) map.flags.at(y, x) = 1;
    }
  }
  return map;
}

// ---------------------------------------------------------------------------
// Patch-level KS test against the Rayleigh(1/sqrt(2)) reference. The image
// is tiled with stride = patch (border tiles may be smaller); a tile is
// rejected when its KS statistic exceeds c(alpha)/sqrt(n).
//
// A tile statistic cannot react to a single anomalous pixel (one sample
// moves the empirical CDF by only 1/n), so the map also carries per-pixel
// rejections of the one-sample KS test at the Sidak-corrected level
// 1 - (1-alpha)^(1/n): exactly the two-sided quantile test against the
// reference CDF, with familywise false-alarm rate alpha per tile. The
// patch-level booleans are untouched by this refinement.
// ---------------------------------------------------------------------------

struct KsPatchMap {
  int patch = 0;
  Image<std::uint8_t> rejected;    // tile grid
  Image<float> statistic;          // tile grid, KS distances
  Image<std::uint8_t> pixel_hits;  // full resolution, one-sample KS
};

template <typename T>
KsPatchMap ks_patch_map(const Image<T>& ratio, int patch, double alpha) {
  if (patch < 2) throw ParamError("ks_patch_map: patch must be >= 2");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw ParamError("ks_patch_map: alpha must be in (0,1)");
  if (patch > ratio.height || patch > ratio.width)
    throw ParamError("ks_patch_map: patch exceeds image dims");

  const int tiles_y = (ratio.height + patch - 1) / patch;
  const int tiles_x = (ratio.width + patch - 1) / patch;
  KsPatchMap map;
  map.patch = patch;
  map.rejected = Image<std::uint8_t>(tiles_y, tiles_x, 0);
  map.statistic = Image<float>(tiles_y, tiles_x, 0.0f);
  map.pixel_hits = Image<std::uint8_t>(ratio.height, ratio.width, 0);

  const double crit = kolmogorov_critical(alpha);
  const double n_tile = static_cast<double>(patch) * patch;
  const double alpha_px = 1.0 - std::pow(1.0 - alpha, 1.0 / n_tile);
  // two-sided per-pixel cutoffs: F(x) outside [alpha_px/2, 1 - alpha_px/2]
  const double lo_cut = std::sqrt(-std::log(1.0 - alpha_px / 2.0));
  const double hi_cut = std::sqrt(-std::log(alpha_px / 2.0));

#pragma omp parallel for collapse(2) schedule(static)
  for (int ty = 0; ty < tiles_y; ++ty) {
    for (int tx = 0; tx < tiles_x; ++tx) {
      const int y0 = ty * patch, x0 = tx * patch;
      const int y1 = std::min(ratio.height, y0 + patch);
      const int x1 = std::min(ratio.width, x0 + patch);
      std::vector<double> samples;
      samples.reserve(static_cast<std::size_t>(y1 - y0) * (x1 - x0));
      for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) {
          const double v = static_cast<double>(ratio.at(y, x));
          samples.push_back(v);
          if (v < lo_cut || v > hi_cut) map.pixel_hits.at(y, x) = 1;
        }
      const double d = ks_statistic(
          samples, [](double z) { return z < 0.0 ? 0.0 : rayleigh_cdf(z); });
      map.statistic.at(ty, tx) = static_cast<float>(d);
      if (d > crit / std::sqrt(static_cast<double>(samples.size())))
        map.rejected.at(ty, tx) = 1;
    }
  }
  return map;
}

// ---------------------------------------------------------------------------
// Mask combination
// ---------------------------------------------------------------------------

struct EHMask {
  Image<std::uint8_t> flags;
  Image<std::uint8_t> provenance;  // bit 0: edge_hit, bit 1: ks_hit
  static constexpr std::uint8_t kEdgeBit = 1;
  static constexpr std::uint8_t kKsBit = 2;
};

inline Image<std::uint8_t> dilate(const Image<std::uint8_t>& in, int radius) {
  if (radius <= 0) return in;
  Image<std::uint8_t> out(in.height, in.width, 0);
  for (int y = 0; y < in.height; ++y)
    for (int x = 0; x < in.width; ++x) {
      if (!in.at(y, x)) continue;
      const int y0 = std::max(0, y - radius), y1 = std::min(in.height - 1, y + radius);
      const int x0 = std::max(0, x - radius), x1 = std::min(in.width - 1, x + radius);
      for (int i = y0; i <= y1; ++i)
        for (int j = x0; j <= x1; ++j) out.at(i, j) = 1;
    }
  return out;
}

// Provenance bits feed the rule directly: edge_hit is the dilated edge map,
// ks_hit is the tile rejection upsampled to pixels OR the one-sample test.
inline EHMask combine_eh_mask(const EdgeMap& edges, const KsPatchMap& ks,
                              const DetectConfig& cfg) {
  const Image<std::uint8_t>& pixel_hits = ks.pixel_hits;
  if (!edges.flags.same_shape(pixel_hits))
    throw ParamError("combine_eh_mask: map geometry mismatch");
  const Image<std::uint8_t> edge_dil = dilate(edges.flags, cfg.dilation);
  EHMask mask;
  mask.flags = Image<std::uint8_t>(pixel_hits.height, pixel_hits.width, 0);
  mask.provenance = Image<std::uint8_t>(pixel_hits.height, pixel_hits.width, 0);
  for (int y = 0; y < pixel_hits.height; ++y) {
    const int ty = y / ks.patch;
    for (int x = 0; x < pixel_hits.width; ++x) {
      const int tx = x / ks.patch;
      const bool edge_hit = edge_dil.at(y, x) != 0;
      const bool ks_hit = ks.rejected.at(ty, tx) != 0 || pixel_hits.at(y, x) != 0;
      std::uint8_t prov = 0;
      if (edge_hit) prov |= EHMask::kEdgeBit;
      if (ks_hit) prov |= EHMask::kKsBit;
      mask.provenance.at(y, x) = prov;
      const bool flag = cfg.combine == DetectConfig::Combine::kAnd
                            ? (edge_hit && ks_hit)
                            : (edge_hit || ks_hit);
      mask.flags.at(y, x) = flag ? 1 : 0;
    }
  }
  return mask;
}

template <typename T>
EHMask detect_eh(const Image<T>& ratio, const DetectConfig& cfg = {}) {
  const EdgeMap edges = touzi_edge_map(ratio, cfg.edge_window, cfg.edge_threshold);
  const KsPatchMap ks = ks_patch_map(ratio, cfg.ks_patch, cfg.ks_alpha);
  return combine_eh_mask(edges, ks, cfg);
}

// ---------------------------------------------------------------------------
// Population validation: masked pixels against the extremely heterogeneous
// family, the remainder against the heterogeneous one.
// ---------------------------------------------------------------------------

struct PopulationCurve {
  std::vector<double> bin_center;
  std::vector<double> empirical;    // density, normalized over the range
  std::vector<double> theoretical;  // density of the designated family
};

struct FitReport {
  bool inconclusive = false;
  std::size_t eh_count = 0;
  std::size_t h_count = 0;
  double eh_ks_ga0 = 0.0;  // masked population vs G_A0
  double eh_ks_ka = 0.0;   // masked population vs K_A
  double h_ks_ga0 = 0.0;
  double h_ks_ka = 0.0;
  PopulationCurve eh_curve;
  PopulationCurve h_curve;
};

namespace detail {

inline PopulationCurve population_curve(
    const std::vector<double>& samples,
    const std::function<double(double)>& family_pdf, double range, int bins) {
  PopulationCurve c;
  Histogram h = histogram(samples, uniform_edges(0.0, range, bins));
  double theo_total = 0.0;
  std::vector<double> theo(bins);
  for (int i = 0; i < bins; ++i) {
    const double mid = 0.5 * (h.bin_edges[i] + h.bin_edges[i + 1]);
    theo[i] = family_pdf(mid);
    theo_total += theo[i] * h.width(i);
  }
  for (int i = 0; i < bins; ++i) {
    c.bin_center.push_back(0.5 * (h.bin_edges[i] + h.bin_edges[i + 1]));
    c.empirical.push_back(h.densities[i]);
    c.theoretical.push_back(theo_total > 0.0 ? theo[i] / theo_total : 0.0);
  }
  return c;
}

}  // namespace detail

inline FitReport validate_populations(const Image<float>& sar,
                                      const EHMask& mask,
                                      const DetectConfig& cfg = {}) {
  if (!sar.same_shape(mask.flags))
    throw ParamError("validate_populations: mask geometry mismatch");
  std::vector<double> eh, h;
  for (std::size_t i = 0; i < sar.size(); ++i) {
    (mask.flags.pixels[i] ? eh : h).push_back(
        static_cast<double>(sar.pixels[i]));
  }
  FitReport rep;
  rep.eh_count = eh.size();
  rep.h_count = h.size();
  if (eh.empty() || h.empty()) {
    rep.inconclusive = true;
    return rep;
  }
  double zmax = 0.0;
  for (double v : eh) zmax = std::max(zmax, v);
  for (double v : h) zmax = std::max(zmax, v);
  zmax = std::max(1.0, zmax * 1.05);

  const NumericCdf ka_cdf([&](double z) { return ka_pdf(z, cfg.h_family); },
                          zmax);
  auto ga0_cdf_fn = [&](double z) { return ga0_cdf(z, cfg.eh_family); };
  rep.eh_ks_ga0 = ks_statistic(eh, ga0_cdf_fn);
  rep.eh_ks_ka = ks_statistic(eh, [&](double z) { return ka_cdf(z); });
  rep.h_ks_ga0 = ks_statistic(h, ga0_cdf_fn);
  rep.h_ks_ka = ks_statistic(h, [&](double z) { return ka_cdf(z); });

  const int bins = 128;
  rep.eh_curve = detail::population_curve(
      eh, [&](double z) { return ga0_pdf(z, cfg.eh_family); }, zmax, bins);
  rep.h_curve = detail::population_curve(
      h, [&](double z) { return ka_pdf(z, cfg.h_family); }, zmax, bins);
  return rep;
}

}  // namespace monet
