#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "monet/core.hpp"
#include "monet/random.hpp"

namespace monet {

enum class Phase { kTrain, kInfer };

// 3x3 convolution layer, weights laid out (out_ch, in_ch, 3, 3).
template <typename T>
struct ConvLayer {
  int out_ch = 0;
  int in_ch = 0;
  std::vector<T> weights;
  std::vector<T> bias;

  ConvLayer() = default;
  ConvLayer(int oc, int ic)
      : out_ch(oc),
        in_ch(ic),
        weights(static_cast<std::size_t>(oc) * ic * 9, T(0)),
        bias(oc, T(0)) {}

  T* kernel(int oc, int ic) {
    return weights.data() + (static_cast<std::size_t>(oc) * in_ch + ic) * 9;
  }
  const T* kernel(int oc, int ic) const {
    return weights.data() + (static_cast<std::size_t>(oc) * in_ch + ic) * 9;
  }
};

template <typename T>
struct ConvGrad {
  std::vector<T> weights;
  std::vector<T> bias;
};

// Per-channel batch normalization state.
template <typename T>
struct BatchNorm {
  int channels = 0;
  std::vector<T> gain;
  std::vector<T> shift;
  std::vector<T> running_mean;
  std::vector<T> running_var;
  T eps = static_cast<T>(1e-5);
  T momentum = static_cast<T>(0.9);

  BatchNorm() = default;
  explicit BatchNorm(int c)
      : channels(c),
        gain(c, T(1)),
        shift(c, T(0)),
        running_mean(c, T(0)),
        running_var(c, T(1)) {}
};

template <typename T>
struct BatchNormGrad {
  std::vector<T> gain;
  std::vector<T> shift;
};

// Batch statistics cached by the training-phase forward pass.
template <typename T>
struct BnCache {
  std::vector<T> mean;
  std::vector<T> inv_std;
};

// ---------------------------------------------------------------------------
// conv2d: same-size output via zero padding 1.
// All loops use a fixed ascending order per output element, so results are
// bit-identical regardless of thread count.
// ---------------------------------------------------------------------------

namespace detail {

// Adds the 3-tap stencil of one input row into an output row. Interior
// columns are a pure vertical SIMD pattern; the two border columns apply the
// zero padding explicitly.
template <typename T>
inline void conv_row_accumulate(T* __restrict__ out, const T* __restrict__ row,
                                int w, T k0, T k1, T k2) {
  if (w == 1) {
    out[0] += k1 * row[0];
    return;
  }
  out[0] += k1 * row[0] + k2 * row[1];
  for (int x = 1; x < w - 1; ++x)
    out[x] += k0 * row[x - 1] + k1 * row[x] + k2 * row[x + 1];
  out[w - 1] += k0 * row[w - 2] + k1 * row[w - 1];
}

// Fused 3-row variant: one pass over the output row applies the whole 3x3
// stencil. r0/r2 are null on the padded border rows.
template <typename T>
inline void conv_row_accumulate3(T* __restrict__ out, const T* __restrict__ r0,
                                 const T* __restrict__ r1,
                                 const T* __restrict__ r2, int w,
                                 const T* __restrict__ k) {
  if (r0 && r2) {
    if (w == 1) {
      out[0] += k[1] * r0[0] + k[4] * r1[0] + k[7] * r2[0];
      return;
    }
    out[0] += k[1] * r0[0] + k[2] * r0[1] + k[4] * r1[0] + k[5] * r1[1] +
              k[7] * r2[0] + k[8] * r2[1];
    for (int x = 1; x < w - 1; ++x)
      out[x] += k[0] * r0[x - 1] + k[1] * r0[x] + k[2] * r0[x + 1] +
                k[3] * r1[x - 1] + k[4] * r1[x] + k[5] * r1[x + 1] +
                k[6] * r2[x - 1] + k[7] * r2[x] + k[8] * r2[x + 1];
    out[w - 1] += k[0] * r0[w - 2] + k[1] * r0[w - 1] + k[3] * r1[w - 2] +
                  k[4] * r1[w - 1] + k[6] * r2[w - 2] + k[7] * r2[w - 1];
    return;
  }
  if (r0) conv_row_accumulate(out, r0, w, k[0], k[1], k[2]);
  conv_row_accumulate(out, r1, w, k[3], k[4], k[5]);
  if (r2) conv_row_accumulate(out, r2, w, k[6], k[7], k[8]);
}

// Weight-gradient contribution of one (upstream row, input row) pair for the
// three horizontal taps. Interior columns accumulate into kLanes independent
// partial sums per tap (a fixed blocking, so results do not depend on thread
// count); border columns and the tail go to `edge`. Without the lane split
// the reduction is one serial FMA chain and runs at latency, not throughput.
constexpr int kDwLanes = 16;

template <typename T>
inline void dw_row_accumulate(const T* __restrict__ g, const T* __restrict__ r,
                              int w, T* __restrict__ lanes /* 3 * kDwLanes */,
                              T* __restrict__ edge /* 3 */) {
  if (w == 1) {
    edge[1] += g[0] * r[0];
    return;
  }
  edge[1] += g[0] * r[0];
  edge[2] += g[0] * r[1];
  edge[0] += g[w - 1] * r[w - 2];
  edge[1] += g[w - 1] * r[w - 1];
  int x = 1;
  for (; x + kDwLanes <= w - 1; x += kDwLanes) {
    for (int l = 0; l < kDwLanes; ++l) {
      const T gl = g[x + l];
      lanes[l] += gl * r[x + l - 1];
      lanes[kDwLanes + l] += gl * r[x + l];
      lanes[2 * kDwLanes + l] += gl * r[x + l + 1];
    }
  }
  for (; x < w - 1; ++x) {
    const T gx = g[x];
    edge[0] += gx * r[x - 1];
    edge[1] += gx * r[x];
    edge[2] += gx * r[x + 1];
  }
}

template <typename T>
inline T reduce_lanes(const T* lanes, T edge) {
  T s = edge;
  for (int l = 0; l < kDwLanes; ++l) s += lanes[l];
  return s;
}

}  // namespace detail

template <typename T>
void conv2d_forward(const Tensor4<T>& in, const ConvLayer<T>& layer,
                    Tensor4<T>& out) {
  if (in.channels != layer.in_ch)
    throw ParamError("conv2d: input channel mismatch");
  if (!(out.batch == in.batch && out.channels == layer.out_ch &&
        out.height == in.height && out.width == in.width))
    out = Tensor4<T>(in.batch, layer.out_ch, in.height, in.width);
  const int h = in.height, w = in.width;

#pragma omp parallel for collapse(2) schedule(static)
  for (int b = 0; b < in.batch; ++b) {
    for (int oc = 0; oc < layer.out_ch; ++oc) {
      T* op = out.plane(b, oc);
      const T bias = layer.bias[oc];
      for (int i = 0; i < h * w; ++i) op[i] = bias;
      for (int ic = 0; ic < layer.in_ch; ++ic) {
        const T* ip = in.plane(b, ic);
        const T* k = layer.kernel(oc, ic);
        for (int y = 0; y < h; ++y)
          detail::conv_row_accumulate3(op + y * w,
                                       y > 0 ? ip + (y - 1) * w : nullptr,
                                       ip + y * w,
                                       y + 1 < h ? ip + (y + 1) * w : nullptr,
                                       w, k);
      }
    }
  }
}

// Backward pass: gradients w.r.t. input, weights and bias are all exact
// adjoints of the padded correlation above.
template <typename T>
void conv2d_backward(const Tensor4<T>& in, const ConvLayer<T>& layer,
                     const Tensor4<T>& dout, Tensor4<T>& din,
                     ConvGrad<T>& grad) {
  if (in.channels != layer.in_ch || dout.channels != layer.out_ch ||
      in.batch != dout.batch || in.height != dout.height ||
      in.width != dout.width)
    throw ParamError("conv2d_backward: shape mismatch");
  const int h = in.height, w = in.width;
  if (!din.same_shape(in)) din = Tensor4<T>(in.batch, in.channels, h, w);
  grad.weights.assign(layer.weights.size(), T(0));
  grad.bias.assign(layer.bias.size(), T(0));

  // Gradient w.r.t. the input: correlation of the upstream gradient with the
  // 180-degree rotated kernel, same padding.
#pragma omp parallel for collapse(2) schedule(static)
  for (int b = 0; b < in.batch; ++b) {
    for (int ic = 0; ic < layer.in_ch; ++ic) {
      T* dp = din.plane(b, ic);
      for (int i = 0; i < h * w; ++i) dp[i] = T(0);
      for (int oc = 0; oc < layer.out_ch; ++oc) {
        const T* gp = dout.plane(b, oc);
        const T* k = layer.kernel(oc, ic);
        const T kf[9] = {k[8], k[7], k[6], k[5], k[4], k[3], k[2], k[1], k[0]};
        for (int y = 0; y < h; ++y)
          detail::conv_row_accumulate3(dp + y * w,
                                       y > 0 ? gp + (y - 1) * w : nullptr,
                                       gp + y * w,
                                       y + 1 < h ? gp + (y + 1) * w : nullptr,
                                       w, kf);
      }
    }
  }

#pragma omp parallel for schedule(static)
  for (int oc = 0; oc < layer.out_ch; ++oc) {
    T bsum = T(0);
    for (int b = 0; b < in.batch; ++b) {
      const T* gp = dout.plane(b, oc);
      for (int i = 0; i < h * w; ++i) bsum += gp[i];
    }
    grad.bias[oc] = bsum;
    for (int ic = 0; ic < layer.in_ch; ++ic) {
      // lanes[ky][kx][lane] + edge[ky][kx] partial sums
      std::vector<T> lanes(9 * detail::kDwLanes, T(0));
      T edge[9] = {};
      for (int b = 0; b < in.batch; ++b) {
        const T* gp = dout.plane(b, oc);
        const T* ip = in.plane(b, ic);
        for (int y = 0; y < h; ++y) {
          const T* grow = gp + y * w;
          if (y > 0)
            detail::dw_row_accumulate(grow, ip + (y - 1) * w, w,
                                      lanes.data(), edge);
          detail::dw_row_accumulate(grow, ip + y * w, w,
                                    lanes.data() + 3 * detail::kDwLanes,
                                    edge + 3);
          if (y + 1 < h)
            detail::dw_row_accumulate(grow, ip + (y + 1) * w, w,
                                      lanes.data() + 6 * detail::kDwLanes,
                                      edge + 6);
        }
      }
      T* gw = grad.weights.data() +
              (static_cast<std::size_t>(oc) * layer.in_ch + ic) * 9;
      for (int t = 0; t < 9; ++t)
        gw[t] = detail::reduce_lanes(lanes.data() + t * detail::kDwLanes,
                                     edge[t]);
    }
  }
}

// ---------------------------------------------------------------------------
// ReLU
// ---------------------------------------------------------------------------

template <typename T>
void relu_forward(const Tensor4<T>& in, Tensor4<T>& out) {
  if (!out.same_shape(in))
    out = Tensor4<T>(in.batch, in.channels, in.height, in.width);
  const std::size_t n = in.size();
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i)
    out.data[i] = in.data[i] > T(0) ? in.data[i] : T(0);
}

// Subgradient 0 at the kink; the mask comes from the forward output.
template <typename T>
void relu_backward(const Tensor4<T>& out, const Tensor4<T>& dout,
                   Tensor4<T>& din) {
  if (!dout.same_shape(out)) throw ParamError("relu_backward: shape mismatch");
  if (!din.same_shape(out))
    din = Tensor4<T>(out.batch, out.channels, out.height, out.width);
  const std::size_t n = out.size();
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i)
    din.data[i] = out.data[i] > T(0) ? dout.data[i] : T(0);
}

// ---------------------------------------------------------------------------
// Batch normalization over (batch, height, width) per channel.
// ---------------------------------------------------------------------------

template <typename T>
void batch_norm_forward(const Tensor4<T>& in, BatchNorm<T>& bn, Phase phase,
                        Tensor4<T>& out, BnCache<T>* cache = nullptr,
                        bool update_running = true) {
  if (in.channels != bn.channels)
    throw ParamError("batch_norm: channel mismatch");
  const std::int64_t m =
      static_cast<std::int64_t>(in.batch) * in.height * in.width;
  if (phase == Phase::kTrain && m < 2)
    throw ParamError("batch_norm: train phase needs batch*H*W >= 2");
  if (!out.same_shape(in))
    out = Tensor4<T>(in.batch, in.channels, in.height, in.width);
  const int plane = in.height * in.width;

  if (phase == Phase::kInfer) {
#pragma omp parallel for schedule(static)
    for (int c = 0; c < bn.channels; ++c) {
      const T scale = bn.gain[c] / std::sqrt(bn.running_var[c] + bn.eps);
      const T off = bn.shift[c] - scale * bn.running_mean[c];
      for (int b = 0; b < in.batch; ++b) {
        const T* ip = in.plane(b, c);
        T* op = out.plane(b, c);
        for (int i = 0; i < plane; ++i) op[i] = scale * ip[i] + off;
      }
    }
    return;
  }

  if (cache) {
    cache->mean.assign(bn.channels, T(0));
    cache->inv_std.assign(bn.channels, T(0));
  }
#pragma omp parallel for schedule(static)
  for (int c = 0; c < bn.channels; ++c) {
    T sum = T(0);
    for (int b = 0; b < in.batch; ++b) {
      const T* ip = in.plane(b, c);
      for (int i = 0; i < plane; ++i) sum += ip[i];
    }
    const T mean = sum / static_cast<T>(m);
    T ssq = T(0);
    for (int b = 0; b < in.batch; ++b) {
      const T* ip = in.plane(b, c);
      for (int i = 0; i < plane; ++i) {
        const T d = ip[i] - mean;
        ssq += d * d;
      }
    }
    const T var = ssq / static_cast<T>(m);  // biased, matches normalization
    const T inv_std = T(1) / std::sqrt(var + bn.eps);
    const T scale = bn.gain[c] * inv_std;
    const T off = bn.shift[c] - scale * mean;
    for (int b = 0; b < in.batch; ++b) {
      const T* ip = in.plane(b, c);
      T* op = out.plane(b, c);
      for (int i = 0; i < plane; ++i) op[i] = scale * ip[i] + off;
    }
    if (cache) {
      cache->mean[c] = mean;
      cache->inv_std[c] = inv_std;
    }
    if (update_running) {
      bn.running_mean[c] = bn.momentum * bn.running_mean[c] +
                           (T(1) - bn.momentum) * mean;
      bn.running_var[c] =
          bn.momentum * bn.running_var[c] + (T(1) - bn.momentum) * var;
    }
  }
}

// Training-phase backward includes the dependence of the batch statistics on
// the input:
//   dx_i = gain * inv_std * (g_i - mean(g) - xhat_i * mean(g * xhat))
template <typename T>
void batch_norm_backward(const Tensor4<T>& in, const BatchNorm<T>& bn,
                         Phase phase, const BnCache<T>& cache,
                         const Tensor4<T>& dout, Tensor4<T>& din,
                         BatchNormGrad<T>& grad) {
  if (in.channels != bn.channels || !dout.same_shape(in))
    throw ParamError("batch_norm_backward: shape mismatch");
  if (!din.same_shape(in))
    din = Tensor4<T>(in.batch, in.channels, in.height, in.width);
  grad.gain.assign(bn.channels, T(0));
  grad.shift.assign(bn.channels, T(0));
  const std::int64_t m =
      static_cast<std::int64_t>(in.batch) * in.height * in.width;
  const int plane = in.height * in.width;

#pragma omp parallel for schedule(static)
  for (int c = 0; c < bn.channels; ++c) {
    const T mean = phase == Phase::kTrain ? cache.mean[c] : bn.running_mean[c];
    const T inv_std = phase == Phase::kTrain
                          ? cache.inv_std[c]
                          : T(1) / std::sqrt(bn.running_var[c] + bn.eps);
    T g_sum = T(0), gx_sum = T(0);
    for (int b = 0; b < in.batch; ++b) {
      const T* ip = in.plane(b, c);
      const T* gp = dout.plane(b, c);
      for (int i = 0; i < plane; ++i) {
        g_sum += gp[i];
        gx_sum += gp[i] * (ip[i] - mean) * inv_std;
      }
    }
    grad.shift[c] = g_sum;
    grad.gain[c] = gx_sum;
    if (phase == Phase::kInfer) {
      const T scale = bn.gain[c] * inv_std;
      for (int b = 0; b < in.batch; ++b) {
        const T* gp = dout.plane(b, c);
        T* dp = din.plane(b, c);
        for (int i = 0; i < plane; ++i) dp[i] = scale * gp[i];
      }
      continue;
    }
    const T g_mean = g_sum / static_cast<T>(m);
    const T gx_mean = gx_sum / static_cast<T>(m);
    const T scale = bn.gain[c] * inv_std;
    for (int b = 0; b < in.batch; ++b) {
      const T* ip = in.plane(b, c);
      const T* gp = dout.plane(b, c);
      T* dp = din.plane(b, c);
      for (int i = 0; i < plane; ++i) {
        const T xhat = (ip[i] - mean) * inv_std;
        dp[i] = scale * (gp[i] - g_mean - xhat * gx_mean);
      }
    }
  }
}

}  // namespace monet
