#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "monet/core.hpp"

namespace monet {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double eps = 1e-8;
};

template <typename T>
struct AdamState {
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;
  std::int64_t step = 0;

  static AdamState for_blocks(const std::vector<std::span<T>>& blocks) {
    AdamState s;
    s.m.reserve(blocks.size());
    s.v.reserve(blocks.size());
    for (const auto& b : blocks) {
      s.m.emplace_back(b.size(), T(0));
      s.v.emplace_back(b.size(), T(0));
    }
    return s;
  }
};

// One Adam update with bias correction. Parameter and gradient blocks must
// be in the same fixed order the state was created with.
template <typename T>
void adam_step(std::vector<std::span<T>> params,
               std::vector<std::span<T>> grads, AdamState<T>& state,
               const AdamConfig& cfg) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw ParamError("adam_step: block count mismatch");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t blk = 0; blk < params.size(); ++blk) {
    auto p = params[blk];
    auto g = grads[blk];
    auto& m = state.m[blk];
    auto& v = state.v[blk];
    if (p.size() != g.size() || p.size() != m.size())
      throw ParamError("adam_step: block shape mismatch");
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = static_cast<double>(g[i]);
      const double mi = cfg.beta1 * static_cast<double>(m[i]) +
                        (1.0 - cfg.beta1) * gi;
      const double vi = cfg.beta2 * static_cast<double>(v[i]) +
                        (1.0 - cfg.beta2) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double m_hat = mi / bc1;
      const double v_hat = vi / bc2;
      p[i] = static_cast<T>(static_cast<double>(p[i]) -
                            cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps));
    }
  }
}

// Optimizer-state sidecar ("MONA"): step count plus the first and second
// moment payloads, f32 little endian, bit-exact round trip.
template <typename T>
void save_adam(const AdamState<T>& s, const std::string& path) {
  std::string out;
  out.append("MONA", 4);
  detail::put_u32(out, 1);
  detail::put_u64(out, static_cast<std::uint64_t>(s.step));
  detail::put_u32(out, static_cast<std::uint32_t>(s.m.size()));
  for (std::size_t b = 0; b < s.m.size(); ++b) {
    detail::put_u64(out, s.m[b].size());
    for (T x : s.m[b]) detail::put_f32(out, static_cast<float>(x));
    for (T x : s.v[b]) detail::put_f32(out, static_cast<float>(x));
  }
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("save_adam: cannot open " + tmp);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw DataError("save_adam: write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

template <typename T>
AdamState<T> load_adam(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("load_adam: cannot open " + path);
  std::string buf((std::istreambuf_iterator<char>(f)),
                  std::istreambuf_iterator<char>());
  const unsigned char* p = reinterpret_cast<const unsigned char*>(buf.data());
  const unsigned char* end = p + buf.size();
  auto need = [&](std::size_t n) {
    if (static_cast<std::size_t>(end - p) < n)
      throw DataError("load_adam: truncated file " + path);
  };
  need(20);
  if (std::memcmp(p, "MONA", 4) != 0)
    throw DataError("load_adam: bad magic in " + path);
  p += 4;
  if (detail::get_u32(p) != 1)
    throw DataError("load_adam: unsupported version in " + path);
  p += 4;
  AdamState<T> s;
  s.step = static_cast<std::int64_t>(detail::get_u64(p));
  p += 8;
  need(4);
  const std::uint32_t blocks = detail::get_u32(p);
  p += 4;
  for (std::uint32_t b = 0; b < blocks; ++b) {
    need(8);
    const std::uint64_t n = detail::get_u64(p);
    p += 8;
    need(n * 8);
    std::vector<T> m(n), v(n);
    for (std::uint64_t i = 0; i < n; ++i, p += 4)
      m[i] = static_cast<T>(detail::get_f32(p));
    for (std::uint64_t i = 0; i < n; ++i, p += 4)
      v[i] = static_cast<T>(detail::get_f32(p));
    s.m.push_back(std::move(m));
    s.v.push_back(std::move(v));
  }
  return s;
}

}  // namespace monet
