#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "monet/core.hpp"
#include "monet/nn.hpp"
#include "monet/random.hpp"

namespace monet {

// The despeckling network. Fixed topology:
//   layer 1:      conv(1 -> width) + ReLU
//   layers 2..16: conv(width -> width) + ReLU + BN, with an additive skip
//                 z_k += z_{k-3} exactly when (k-1) % 3 == 0
//   layer 17:     conv(width -> 1), linear
// Skips therefore sit at layers {4, 7, 10, 13, 16}.
template <typename T>
struct MonetModel {
  static constexpr int kDepth = 17;
  int width = 64;
  std::vector<ConvLayer<T>> conv;  // conv[k-1] is layer k
  std::vector<BatchNorm<T>> bn;    // bn[k-2] is layer k's normalization
  std::uint64_t version = 0;       // bumped on every parameter mutation

  static bool has_skip(int k) { return k > 1 && k < kDepth && (k - 1) % 3 == 0; }

  static std::vector<int> skip_layers() {
    std::vector<int> s;
    for (int k = 2; k < kDepth; ++k)
      if (has_skip(k)) s.push_back(k);
    return s;
  }

  static MonetModel create(int width, std::uint64_t seed) {
    if (width < 1) throw ParamError("MonetModel: width must be >= 1");
    MonetModel m;
    m.width = width;
    m.conv.reserve(kDepth);
    m.conv.emplace_back(width, 1);
    for (int k = 2; k < kDepth; ++k) {
      m.conv.emplace_back(width, width);
      m.bn.emplace_back(width);
    }
    m.conv.emplace_back(1, width);
    // Kaiming fan-in init for conv weights, zero bias, unit gain / zero
    // shift for BN.
    Rng rng(mix_seed(seed, 0x696e6974ULL));
    for (auto& layer : m.conv) {
      const double std_dev = std::sqrt(2.0 / (9.0 * layer.in_ch));
      for (T& w : layer.weights) w = static_cast<T>(rng.normal() * std_dev);
    }
    return m;
  }

  // Parameter blocks in a fixed order (conv weights, conv bias per layer,
  // then gain, shift per BN). The optimizer and gradients use the same order.
  std::vector<std::span<T>> param_blocks() {
    std::vector<std::span<T>> blocks;
    for (auto& layer : conv) {
      blocks.emplace_back(layer.weights);
      blocks.emplace_back(layer.bias);
    }
    for (auto& b : bn) {
      blocks.emplace_back(b.gain);
      blocks.emplace_back(b.shift);
    }
    return blocks;
  }
};

template <typename T>
std::size_t param_count(const MonetModel<T>& m) {
  std::size_t n = 0;
  for (const auto& layer : m.conv)
    n += layer.weights.size() + layer.bias.size();
  for (const auto& b : m.bn) n += b.gain.size() + b.shift.size();
  return n;
}

template <typename T>
struct MonetGrad {
  std::vector<ConvGrad<T>> conv;
  std::vector<BatchNormGrad<T>> bn;

  std::vector<std::span<T>> param_blocks() {
    std::vector<std::span<T>> blocks;
    for (auto& g : conv) {
      blocks.emplace_back(g.weights);
      blocks.emplace_back(g.bias);
    }
    for (auto& g : bn) {
      blocks.emplace_back(g.gain);
      blocks.emplace_back(g.shift);
    }
    return blocks;
  }
};

// Activations retained for the backward pass. z[k] is the output of layer k
// (z[0] the input); pre_bn[k-2] is the ReLU output fed to layer k's BN.
template <typename T>
struct ForwardCache {
  std::vector<Tensor4<T>> z;
  std::vector<Tensor4<T>> pre_bn;
  std::vector<BnCache<T>> bn_stats;
  Phase phase = Phase::kTrain;
  std::uint64_t model_version = 0;
  bool valid = false;
};

// Forward pass. Train phase uses batch statistics and updates the running
// ones (the single mutation of model state); infer phase is read-only.
template <typename T>
Tensor4<T> monet_forward(MonetModel<T>& model, const Tensor4<T>& input,
                         Phase phase, ForwardCache<T>* cache = nullptr) {
  if (input.channels != 1)
    throw ParamError("monet_forward: input must have exactly 1 channel");
  require_finite(input, "monet_forward input");
  const int depth = MonetModel<T>::kDepth;

  if (cache) {
    // Activations live in the cache; no intermediate copies.
    if (cache->z.size() != static_cast<std::size_t>(depth + 1))
      cache->z.resize(depth + 1);
    if (cache->pre_bn.size() != static_cast<std::size_t>(depth - 2))
      cache->pre_bn.resize(depth - 2);
    cache->bn_stats.assign(depth - 2, BnCache<T>());
    cache->phase = phase;
    cache->model_version = model.version;
    cache->valid = true;
    cache->z[0] = input;

    Tensor4<T> t;
    conv2d_forward(cache->z[0], model.conv[0], t);
    relu_forward(t, cache->z[1]);
    for (int k = 2; k < depth; ++k) {
      conv2d_forward(cache->z[k - 1], model.conv[k - 1], t);
      relu_forward(t, cache->pre_bn[k - 2]);
      batch_norm_forward(cache->pre_bn[k - 2], model.bn[k - 2], phase,
                         cache->z[k], &cache->bn_stats[k - 2],
                         phase == Phase::kTrain);
      if (MonetModel<T>::has_skip(k)) {
        const Tensor4<T>& src = cache->z[k - 3];
        Tensor4<T>& dst = cache->z[k];
        for (std::size_t i = 0; i < dst.size(); ++i)
          dst.data[i] += src.data[i];
      }
    }
    conv2d_forward(cache->z[depth - 1], model.conv[depth - 1],
                   cache->z[depth]);
    require_finite(cache->z[depth], "monet_forward output");
    return cache->z[depth];
  }

  // Without a cache only the live activation and the pending skip source are
  // retained, which bounds inference memory at ~5 activation tensors.
  Tensor4<T> cur, t, u, tap;
  conv2d_forward(input, model.conv[0], t);
  relu_forward(t, cur);
  tap = cur;  // layer 1 feeds the skip at layer 4
  for (int k = 2; k < depth; ++k) {
    conv2d_forward(cur, model.conv[k - 1], t);
    relu_forward(t, u);
    batch_norm_forward(u, model.bn[k - 2], phase, cur,
                       static_cast<BnCache<T>*>(nullptr),
                       phase == Phase::kTrain);
    if (MonetModel<T>::has_skip(k))
      for (std::size_t i = 0; i < cur.size(); ++i)
        cur.data[i] += tap.data[i];
    if (k + 3 <= depth - 1 && MonetModel<T>::has_skip(k + 3)) tap = cur;
  }
  conv2d_forward(cur, model.conv[depth - 1], t);
  require_finite(t, "monet_forward output");
  return t;
}

// Backward pass through the full recurrence. Skip connections accumulate
// gradient into both branches. Returns the gradient w.r.t. the input through
// *dinput when requested.
template <typename T>
MonetGrad<T> monet_backward(const MonetModel<T>& model,
                            const ForwardCache<T>& cache,
                            const Tensor4<T>& dout,
                            Tensor4<T>* dinput = nullptr) {
  const int depth = MonetModel<T>::kDepth;
  if (!cache.valid || cache.model_version != model.version)
    throw ParamError("monet_backward: stale forward cache");
  if (!dout.same_shape(cache.z[depth]))
    throw ParamError("monet_backward: upstream gradient shape mismatch");

  MonetGrad<T> grad;
  grad.conv.resize(depth);
  grad.bn.resize(depth - 2);

  std::vector<Tensor4<T>> dz(depth + 1);
  dz[depth] = dout;

  Tensor4<T> dt, du;
  // layer 17 (linear conv)
  conv2d_backward(cache.z[depth - 1], model.conv[depth - 1], dz[depth],
                  dt, grad.conv[depth - 1]);
  dz[depth - 1] = dt;

  for (int k = depth - 1; k >= 2; --k) {
    if (MonetModel<T>::has_skip(k)) {
      if (dz[k - 3].size() == 0)
        dz[k - 3] = Tensor4<T>(dz[k].batch, dz[k].channels, dz[k].height,
                               dz[k].width);
      for (std::size_t i = 0; i < dz[k].size(); ++i)
        dz[k - 3].data[i] += dz[k].data[i];
    }
    batch_norm_backward(cache.pre_bn[k - 2], model.bn[k - 2], cache.phase,
                        cache.bn_stats[k - 2], dz[k], du, grad.bn[k - 2]);
    relu_backward(cache.pre_bn[k - 2], du, dt);
    Tensor4<T> dprev;
    conv2d_backward(cache.z[k - 1], model.conv[k - 1], dt, dprev,
                    grad.conv[k - 1]);
    if (dz[k - 1].size() == 0)
      dz[k - 1] = std::move(dprev);
    else
      for (std::size_t i = 0; i < dprev.size(); ++i)
        dz[k - 1].data[i] += dprev.data[i];
    dz[k] = Tensor4<T>();  // release
  }

  // layer 1
  relu_backward(cache.z[1], dz[1], dt);
  Tensor4<T> din0;
  conv2d_backward(cache.z[0], model.conv[0], dt, din0, grad.conv[0]);
  if (dinput) *dinput = std::move(din0);
  return grad;
}

// ---------------------------------------------------------------------------
// MONW weight file: ASCII magic "MONW", version u32, entry count u32, then
// per entry a kind tag u8 (1 = conv, 2 = batch norm), u32 dims and a
// little-endian f32 payload. Round-trips are bit-exact for float models.
// ---------------------------------------------------------------------------

namespace monw {
constexpr std::uint32_t kVersion = 1;
constexpr std::uint8_t kTagConv = 1;
constexpr std::uint8_t kTagBatchNorm = 2;
}  // namespace monw

template <typename T>
void save_monw(const MonetModel<T>& m, const std::string& path) {
  std::string out;
  out.append("MONW", 4);
  detail::put_u32(out, monw::kVersion);
  const std::uint32_t entries =
      static_cast<std::uint32_t>(m.conv.size() + m.bn.size());
  detail::put_u32(out, entries);
  auto put_payload = [&out](const std::vector<T>& v) {
    for (T x : v) detail::put_f32(out, static_cast<float>(x));
  };
  // Interleaved in layer order: conv1, conv2, bn2, ..., conv16, bn16, conv17.
  for (int k = 1; k <= MonetModel<T>::kDepth; ++k) {
    const auto& layer = m.conv[k - 1];
    out.push_back(static_cast<char>(monw::kTagConv));
    detail::put_u32(out, static_cast<std::uint32_t>(layer.out_ch));
    detail::put_u32(out, static_cast<std::uint32_t>(layer.in_ch));
    detail::put_u32(out, 3);
    detail::put_u32(out, 3);
    put_payload(layer.weights);
    put_payload(layer.bias);
    if (k >= 2 && k <= MonetModel<T>::kDepth - 1) {
      const auto& b = m.bn[k - 2];
      out.push_back(static_cast<char>(monw::kTagBatchNorm));
      detail::put_u32(out, static_cast<std::uint32_t>(b.channels));
      put_payload(b.gain);
      put_payload(b.shift);
      put_payload(b.running_mean);
      put_payload(b.running_var);
    }
  }
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("save_monw: cannot open " + tmp);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw DataError("save_monw: write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

template <typename T>
MonetModel<T> load_monw(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("load_monw: cannot open " + path);
  std::string buf((std::istreambuf_iterator<char>(f)),
                  std::istreambuf_iterator<char>());
  const unsigned char* p = reinterpret_cast<const unsigned char*>(buf.data());
  const unsigned char* end = p + buf.size();
  auto need = [&](std::size_t n) {
    if (static_cast<std::size_t>(end - p) < n)
      throw DataError("load_monw: truncated file " + path);
  };
  need(12);
  if (std::memcmp(p, "MONW", 4) != 0)
    throw DataError("load_monw: bad magic in " + path);
  p += 4;
  const std::uint32_t version = detail::get_u32(p);
  p += 4;
  if (version != monw::kVersion)
    throw DataError("load_monw: unsupported version in " + path);
  const std::uint32_t entries = detail::get_u32(p);
  p += 4;

  MonetModel<T> m;
  m.conv.clear();
  m.bn.clear();
  auto read_payload = [&](std::vector<T>& v, std::size_t n) {
    need(n * 4);
    v.resize(n);
    for (std::size_t i = 0; i < n; ++i, p += 4)
      v[i] = static_cast<T>(detail::get_f32(p));
  };
  for (std::uint32_t e = 0; e < entries; ++e) {
    need(1);
    const std::uint8_t tag = *p++;
    if (tag == monw::kTagConv) {
      need(16);
      const int oc = static_cast<int>(detail::get_u32(p));
      const int ic = static_cast<int>(detail::get_u32(p + 4));
      const int kh = static_cast<int>(detail::get_u32(p + 8));
      const int kw = static_cast<int>(detail::get_u32(p + 12));
      p += 16;
      if (kh != 3 || kw != 3)
        throw DataError("load_monw: kernel must be 3x3 in " + path);
      ConvLayer<T> layer(oc, ic);
      read_payload(layer.weights, layer.weights.size());
      read_payload(layer.bias, layer.bias.size());
      m.conv.push_back(std::move(layer));
    } else if (tag == monw::kTagBatchNorm) {
      need(4);
      const int c = static_cast<int>(detail::get_u32(p));
      p += 4;
      BatchNorm<T> b(c);
      read_payload(b.gain, static_cast<std::size_t>(c));
      read_payload(b.shift, static_cast<std::size_t>(c));
      read_payload(b.running_mean, static_cast<std::size_t>(c));
      read_payload(b.running_var, static_cast<std::size_t>(c));
      m.bn.push_back(std::move(b));
    } else {
      throw DataError("load_monw: unknown entry tag in " + path);
    }
  }
  if (m.conv.size() != MonetModel<T>::kDepth ||
      m.bn.size() != MonetModel<T>::kDepth - 2)
    throw DataError("load_monw: unexpected layer structure in " + path);
  m.width = m.conv[0].out_ch;
  return m;
}

}  // namespace monet
