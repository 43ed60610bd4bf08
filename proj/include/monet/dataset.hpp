#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "monet/core.hpp"
#include "monet/io.hpp"
#include "monet/random.hpp"
#include "monet/speckle.hpp"

namespace monet {

// Dataset recipe: a directory of grayscale images, or a synthetic-texture
// recipe that needs no external data.
struct DatasetSpec {
  std::string source = "synthetic";  // directory path or "synthetic"
  std::vector<TextureKind> recipe = {
      TextureKind::kGammaTexture, TextureKind::kRamp, TextureKind::kConstant,
      TextureKind::kCheckerboard};
  int synth_count = 32;   // synthetic source images
  int synth_size = 192;   // synthetic source image side
  TextureParams texture;
  int patch_size = 64;
  int stride = 64;        // defaults to non-overlapping tiling
  int looks = 1;
  double train_frac = 0.8;
  double val_frac = 0.2;
  std::uint64_t seed = 0;
};

struct PatchRecord {
  long id = 0;
  std::string split;  // "train" or "val"
  std::string source;
  int row = 0;
  int col = 0;
  std::uint64_t seed = 0;
};

struct Dataset {
  int patch_size = 0;
  std::vector<Image<float>> clean;
  std::vector<Image<float>> noisy;
  std::vector<PatchRecord> records;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> val_indices;
};

namespace detail {

inline std::vector<std::pair<std::string, Image<float>>> load_sources(
    const DatasetSpec& spec) {
  std::vector<std::pair<std::string, Image<float>>> sources;
  if (spec.source == "synthetic") {
    if (spec.recipe.empty())
      throw ParamError("build_dataset: empty synthetic recipe");
    for (int i = 0; i < spec.synth_count; ++i) {
      const TextureKind kind = spec.recipe[i % spec.recipe.size()];
      std::ostringstream name;
      name << "synthetic:" << texture_kind_name(kind) << ":" << i;
      sources.emplace_back(name.str(),
                           synth_texture(kind, spec.synth_size, spec.synth_size,
                                         spec.texture,
                                         mix_seed(spec.seed, 0x737263ULL + i)));
    }
    return sources;
  }
  namespace fs = std::filesystem;
  if (!fs::is_directory(spec.source))
    throw DataError("build_dataset: source is not a directory: " + spec.source);
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(spec.source)) {
    if (!entry.is_regular_file()) continue;
    const std::string p = entry.path().string();
    if (has_suffix(p, ".pgm") || has_suffix(p, ".ppm") ||
        has_suffix(p, ".png") || has_suffix(p, ".sarf"))
      files.push_back(p);
  }
  std::sort(files.begin(), files.end());  // deterministic order
  for (const std::string& p : files) {
    Image<float> img = read_image_any(p);  // DataError names the file
    for (float& v : img.pixels) v = std::clamp(v, 0.0f, 1.0f);
    sources.emplace_back(p, std::move(img));
  }
  if (sources.empty())
    throw DataError("build_dataset: no readable images in " + spec.source);
  return sources;
}

}  // namespace detail

// Deterministic patch dataset: (noisy, clean) pairs cut on a stride grid,
// per-patch speckle seeded from (master seed, patch index), disjoint
// train/val split by a seeded shuffle.
inline Dataset build_dataset(const DatasetSpec& spec) {
  if (spec.patch_size < 1 || spec.stride < 1)
    throw ParamError("build_dataset: patch size and stride must be >= 1");
  if (spec.looks < 1) throw ParamError("build_dataset: looks must be >= 1");
  if (std::abs(spec.train_frac + spec.val_frac - 1.0) > 1e-9)
    throw ParamError("build_dataset: split fractions must sum to 1");

  const auto sources = detail::load_sources(spec);
  for (const auto& [name, img] : sources)
    if (img.height < spec.patch_size || img.width < spec.patch_size)
      throw DataError("build_dataset: " + name + " smaller than patch size");

  Dataset ds;
  ds.patch_size = spec.patch_size;
  long id = 0;
  for (const auto& [name, img] : sources) {
    for (int r = 0; r + spec.patch_size <= img.height; r += spec.stride) {
      for (int c = 0; c + spec.patch_size <= img.width; c += spec.stride) {
        Image<float> clean(spec.patch_size, spec.patch_size);
        for (int i = 0; i < spec.patch_size; ++i)
          for (int j = 0; j < spec.patch_size; ++j)
            clean.at(i, j) = img.at(r + i, c + j);
        const std::uint64_t patch_seed =
            mix_seed(spec.seed, 0x70617463ULL + static_cast<std::uint64_t>(id));
        SimPair pair = simulate_pair(clean, spec.looks, patch_seed);
        PatchRecord rec;
        rec.id = id++;
        rec.source = name;
        rec.row = r;
        rec.col = c;
        rec.seed = patch_seed;
        ds.records.push_back(std::move(rec));
        ds.clean.push_back(std::move(pair.clean));
        ds.noisy.push_back(std::move(pair.noisy));
      }
    }
  }
  if (ds.records.empty())
    throw DataError("build_dataset: no patches could be extracted");

  std::vector<std::size_t> order(ds.records.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed(spec.seed, 0x73706c6974ULL));
  rng.shuffle(order);
  const std::size_t n_train = static_cast<std::size_t>(
      std::llround(spec.train_frac * static_cast<double>(order.size())));
  for (std::size_t i = 0; i < order.size(); ++i) {
    const bool is_train = i < n_train;
    ds.records[order[i]].split = is_train ? "train" : "val";
    (is_train ? ds.train_indices : ds.val_indices).push_back(order[i]);
  }
  std::sort(ds.train_indices.begin(), ds.train_indices.end());
  std::sort(ds.val_indices.begin(), ds.val_indices.end());
  return ds;
}

// ---------------------------------------------------------------------------
// On-disk layout: one manifest plus a pair of SARF rasters per patch.
// Manifest is text, one record per line: id split source row col seed.
// ---------------------------------------------------------------------------

inline std::string patch_file_name(long id, const char* kind) {
  std::ostringstream os;
  os << "patch_" << id << "_" << kind << ".sarf";
  return os.str();
}

inline void save_dataset(const Dataset& ds, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::ostringstream manifest;
  manifest << "# id split source row col seed\n";
  manifest << "patch_size " << ds.patch_size << "\n";
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    const PatchRecord& r = ds.records[i];
    manifest << r.id << " " << r.split << " " << r.source << " " << r.row
             << " " << r.col << " " << r.seed << "\n";
    write_sarf(ds.clean[i], dir + "/" + patch_file_name(r.id, "clean"));
    write_sarf(ds.noisy[i], dir + "/" + patch_file_name(r.id, "noisy"));
  }
  const std::string tmp = dir + "/manifest.txt.tmp";
  {
    std::ofstream f(tmp, std::ios::trunc);
    if (!f) throw DataError("save_dataset: cannot open " + tmp);
    f << manifest.str();
  }
  fs::rename(tmp, dir + "/manifest.txt");
}

inline Dataset load_dataset(const std::string& dir) {
  std::ifstream f(dir + "/manifest.txt");
  if (!f) throw DataError("load_dataset: missing manifest in " + dir);
  Dataset ds;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream is(line);
    std::string first;
    is >> first;
    if (first == "patch_size") {
      is >> ds.patch_size;
      continue;
    }
    PatchRecord r;
    r.id = std::stol(first);
    if (!(is >> r.split >> r.source >> r.row >> r.col >> r.seed))
      throw DataError("load_dataset: malformed manifest line: " + line);
    const std::size_t idx = ds.records.size();
    ds.clean.push_back(read_sarf(dir + "/" + patch_file_name(r.id, "clean")));
    ds.noisy.push_back(read_sarf(dir + "/" + patch_file_name(r.id, "noisy")));
    (r.split == "train" ? ds.train_indices : ds.val_indices).push_back(idx);
    ds.records.push_back(std::move(r));
  }
  if (ds.records.empty()) throw DataError("load_dataset: empty manifest in " + dir);
  if (ds.patch_size == 0) ds.patch_size = ds.clean[0].height;
  return ds;
}

}  // namespace monet
