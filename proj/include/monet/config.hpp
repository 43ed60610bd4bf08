#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "monet/dataset.hpp"
#include "monet/detect.hpp"
#include "monet/metrics.hpp"
#include "monet/trainer.hpp"

namespace monet {

// Flat `key = value` configuration with `#` comments. Every key has a
// documented default (the desk-scale preset); unknown keys are rejected.
struct RunConfig {
  std::uint64_t seed = 0;
  DatasetSpec dataset;
  TrainConfig train = TrainConfig::desk();
  DetectConfig detect;
  EvalOptions eval;
  std::size_t infer_max_pixels = std::size_t(1) << 20;

  RunConfig() {
    dataset.texture.contrast = 5.0;
    train.kl = KlLossConfig{};
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

struct KeyValue {
  std::map<std::string, std::string> entries;

  bool has(const std::string& key) const { return entries.count(key) != 0; }

  template <typename T>
  void get(const std::string& key, T& out) {
    auto it = entries.find(key);
    if (it == entries.end()) return;
    std::istringstream is(it->second);
    T value;
    if (!(is >> value))
      throw ParamError("config: bad value for " + key + ": " + it->second);
    out = value;
    consumed.push_back(key);
  }

  void get(const std::string& key, std::string& out) {
    auto it = entries.find(key);
    if (it == entries.end()) return;
    out = it->second;
    consumed.push_back(key);
  }

  void get(const std::string& key, bool& out) {
    auto it = entries.find(key);
    if (it == entries.end()) return;
    if (it->second == "true" || it->second == "1")
      out = true;
    else if (it->second == "false" || it->second == "0")
      out = false;
    else
      throw ParamError("config: bad boolean for " + key + ": " + it->second);
    consumed.push_back(key);
  }

  std::vector<std::string> consumed;
};

}  // namespace detail

inline RunConfig parse_config_text(const std::string& text) {
  detail::KeyValue kv;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParamError("config: line " + std::to_string(line_no) +
                       " is not `key = value`");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty()) throw ParamError("config: empty key on line " +
                                      std::to_string(line_no));
    if (!kv.entries.emplace(key, value).second)
      throw ParamError("config: duplicate key " + key);
  }

  RunConfig cfg;
  kv.get("seed", cfg.seed);

  kv.get("dataset.source", cfg.dataset.source);
  std::string recipe;
  kv.get("dataset.recipe", recipe);
  if (!recipe.empty()) {
    cfg.dataset.recipe.clear();
    std::istringstream rs(recipe);
    std::string kind;
    while (std::getline(rs, kind, ','))
      cfg.dataset.recipe.push_back(parse_texture_kind(detail::trim(kind)));
  }
  kv.get("dataset.synth_count", cfg.dataset.synth_count);
  kv.get("dataset.synth_size", cfg.dataset.synth_size);
  kv.get("dataset.patch", cfg.dataset.patch_size);
  kv.get("dataset.stride", cfg.dataset.stride);
  kv.get("dataset.looks", cfg.dataset.looks);
  kv.get("dataset.train_frac", cfg.dataset.train_frac);
  kv.get("dataset.val_frac", cfg.dataset.val_frac);
  kv.get("texture.level", cfg.dataset.texture.level);
  kv.get("texture.background", cfg.dataset.texture.background);
  kv.get("texture.contrast", cfg.dataset.texture.contrast);
  kv.get("texture.density", cfg.dataset.texture.density);

  kv.get("train.batch", cfg.train.batch_size);
  kv.get("train.epochs1", cfg.train.epochs_phase1);
  kv.get("train.epochs2", cfg.train.epochs_phase2);
  kv.get("train.lr1", cfg.train.lr_phase1);
  kv.get("train.lr2", cfg.train.lr_phase2);
  kv.get("train.beta1", cfg.train.beta1);
  kv.get("train.beta2", cfg.train.beta2);
  kv.get("train.width", cfg.train.width);
  kv.get("train.checkpoint_every", cfg.train.checkpoint_every);

  kv.get("loss.lambda_kl", cfg.train.weights.lambda_kl);
  kv.get("loss.lambda_grad", cfg.train.weights.lambda_grad);
  kv.get("loss.use_l2", cfg.train.weights.use_l2);
  kv.get("loss.use_kl", cfg.train.weights.use_kl);
  kv.get("loss.use_grad", cfg.train.weights.use_grad);
  kv.get("loss.eps_div", cfg.train.kl.eps_div);
  kv.get("loss.bins", cfg.train.kl.bins);
  kv.get("loss.range", cfg.train.kl.range);

  kv.get("detect.window", cfg.detect.edge_window);
  kv.get("detect.threshold", cfg.detect.edge_threshold);
  kv.get("detect.patch", cfg.detect.ks_patch);
  kv.get("detect.alpha", cfg.detect.ks_alpha);
  std::string combine;
  kv.get("detect.combine", combine);
  if (!combine.empty()) {
    if (combine == "and")
      cfg.detect.combine = DetectConfig::Combine::kAnd;
    else if (combine == "or")
      cfg.detect.combine = DetectConfig::Combine::kOr;
    else
      throw ParamError("config: detect.combine must be `and` or `or`");
  }
  kv.get("detect.dilation", cfg.detect.dilation);

  kv.get("eval.roi_count", cfg.eval.roi_count);
  kv.get("eval.roi_window", cfg.eval.roi_window);
  kv.get("eval.permutations", cfg.eval.glcm_permutations);
  kv.get("eval.eps_div", cfg.eval.eps_div);

  long long max_px = -1;
  kv.get("infer.max_pixels", max_px);
  if (max_px > 0) cfg.infer_max_pixels = static_cast<std::size_t>(max_px);

  for (const auto& [key, value] : kv.entries) {
    bool known = false;
    for (const std::string& c : kv.consumed)
      if (c == key) {
        known = true;
        break;
      }
    if (!known) throw ParamError("config: unknown key " + key);
  }
  cfg.eval.seed = cfg.seed;
  cfg.dataset.seed = cfg.seed;
  cfg.train.seed = cfg.seed;
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open config file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str());
}

}  // namespace monet
