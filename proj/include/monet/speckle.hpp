#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "monet/core.hpp"
#include "monet/random.hpp"
#include "monet/stats.hpp"

namespace monet {

// Fully developed amplitude speckle. values[i]^2 is Gamma(L, L) distributed,
// so the field has unit mean power for any number of looks.
struct SpeckleField {
  Image<float> values;
  int looks = 1;
};

inline SpeckleField sample_speckle(int height, int width, int looks,
                                   std::uint64_t seed) {
  if (height < 1 || width < 1)
    throw ParamError("sample_speckle: dimensions must be >= 1");
  if (looks < 1) throw ParamError("sample_speckle: looks must be >= 1");
  SpeckleField field;
  field.looks = looks;
  field.values = Image<float>(height, width);
  Rng rng(seed);
  const double shape = static_cast<double>(looks);
  for (float& v : field.values.pixels)
    v = static_cast<float>(std::sqrt(rng.gamma(shape) / shape));
  return field;
}

// Multiplicative acquisition model: noisy = clean * speckle, elementwise.
struct SimPair {
  Image<float> clean;
  Image<float> noisy;
  SpeckleField speckle;
  std::uint64_t seed = 0;
};

inline SimPair simulate_pair(const Image<float>& clean, int looks,
                             std::uint64_t seed) {
  for (float p : clean.pixels)
    if (p < 0.0f || p > 1.0f)
      throw ParamError("simulate_pair: clean pixels must lie in [0,1]");
  SimPair pair;
  pair.seed = seed;
  pair.clean = clean;
  pair.speckle = sample_speckle(clean.height, clean.width, looks, seed);
  pair.noisy = Image<float>(clean.height, clean.width);
  for (std::size_t i = 0; i < clean.size(); ++i)
    pair.noisy.pixels[i] = clean.pixels[i] * pair.speckle.values.pixels[i];
  return pair;
}

// ---------------------------------------------------------------------------
// Synthetic clean references. These stand in for an optical corpus so every
// test and the desk-scale pipeline run without external data.
// ---------------------------------------------------------------------------

enum class TextureKind {
  kConstant,
  kRamp,
  kCheckerboard,
  kGammaTexture,
  kPointScatterers,
};

inline TextureKind parse_texture_kind(const std::string& s) {
  if (s == "constant") return TextureKind::kConstant;
  if (s == "ramp") return TextureKind::kRamp;
  if (s == "checkerboard") return TextureKind::kCheckerboard;
  if (s == "gamma-texture") return TextureKind::kGammaTexture;
  if (s == "point-scatterers") return TextureKind::kPointScatterers;
  throw ParamError("unknown texture kind: " + s);
}

inline const char* texture_kind_name(TextureKind k) {
  switch (k) {
    case TextureKind::kConstant: return "constant";
    case TextureKind::kRamp: return "ramp";
    case TextureKind::kCheckerboard: return "checkerboard";
    case TextureKind::kGammaTexture: return "gamma-texture";
    case TextureKind::kPointScatterers: return "point-scatterers";
  }
  return "?";
}

struct TextureParams {
  double level = 0.5;        // constant
  double lo = 0.25;          // checkerboard dark value
  double hi = 0.75;          // checkerboard bright value
  int cell = 8;              // checkerboard cell size
  double shape = 4.0;        // gamma texture shape
  double scale = 0.05;       // gamma texture scale (mean = shape * scale)
  int blur_passes = 2;       // gamma texture smoothing passes
  double background = 0.15;  // point-scatterer background level
  double contrast = 5.0;     // scatterer amplitude / background
  double density = 1e-3;     // expected scatterers per pixel
  int min_separation = 3;    // Chebyshev exclusion radius between scatterers
};

// Deterministic scatterer placement shared by the texture generator and the
// detection tests: per-pixel Bernoulli(density) in row-major order, skipping
// candidates within min_separation of an accepted one.
inline std::vector<std::pair<int, int>> point_scatterer_positions(
    int height, int width, double density, int min_separation,
    std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0x70696e7473ULL));
  std::vector<std::pair<int, int>> pts;
  for (int i = 0; i < height; ++i) {
    for (int j = 0; j < width; ++j) {
      if (rng.uniform() >= density) continue;
      bool clear = true;
      for (auto it = pts.rbegin(); it != pts.rend(); ++it) {
        if (i - it->first > min_separation) break;
        if (std::abs(it->second - j) <= min_separation) {
          clear = false;
          break;
        }
      }
      if (clear) pts.emplace_back(i, j);
    }
  }
  return pts;
}

inline Image<float> synth_texture(TextureKind kind, int height, int width,
                                  const TextureParams& params,
                                  std::uint64_t seed) {
  if (height < 1 || width < 1)
    throw ParamError("synth_texture: dimensions must be >= 1");
  Image<float> img(height, width);
  switch (kind) {
    case TextureKind::kConstant: {
      for (float& p : img.pixels) p = static_cast<float>(params.level);
      break;
    }
    case TextureKind::kRamp: {
      // pixel(i,j) = j / (w-1), strictly increasing along each row
      for (int i = 0; i < height; ++i)
        for (int j = 0; j < width; ++j)
          img.at(i, j) =
              width > 1 ? static_cast<float>(j) / (width - 1) : 0.5f;
      break;
    }
    case TextureKind::kCheckerboard: {
      for (int i = 0; i < height; ++i)
        for (int j = 0; j < width; ++j)
          img.at(i, j) = (((i / params.cell) + (j / params.cell)) % 2 == 0)
                             ? static_cast<float>(params.lo)
                             : static_cast<float>(params.hi);
      break;
    }
    case TextureKind::kGammaTexture: {
      Rng rng(mix_seed(seed, 0x676d74ULL));
      for (float& p : img.pixels) {
        double v = rng.gamma(params.shape) * params.scale;
        p = static_cast<float>(std::min(v, 1.0));
      }
      // 3x3 wrap-around box blur; periodic boundary preserves the mean
      // exactly, which the recipe oracle relies on.
      for (int pass = 0; pass < params.blur_passes; ++pass) {
        Image<float> tmp(height, width);
        for (int i = 0; i < height; ++i) {
          const int im = (i + height - 1) % height, ip = (i + 1) % height;
          for (int j = 0; j < width; ++j) {
            const int jm = (j + width - 1) % width, jp = (j + 1) % width;
            double s = 0.0;
            for (int r : {im, i, ip})
              s += img.at(r, jm) + img.at(r, j) + img.at(r, jp);
            tmp.at(i, j) = static_cast<float>(s / 9.0);
          }
        }
        img = tmp;
      }
      break;
    }
    case TextureKind::kPointScatterers: {
      const float bg = static_cast<float>(params.background);
      const float amp = static_cast<float>(
          std::min(1.0, params.background * params.contrast));
      for (float& p : img.pixels) p = bg;
      for (auto [i, j] : point_scatterer_positions(
               height, width, params.density, params.min_separation, seed))
        img.at(i, j) = amp;
      break;
    }
  }
  return img;
}

}  // namespace monet
