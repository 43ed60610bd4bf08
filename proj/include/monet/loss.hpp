#pragma once

#include <cmath>
#include <vector>

#include "monet/core.hpp"
#include "monet/stats.hpp"

namespace monet {

// Term weights and ablation toggles. A disabled term is skipped entirely, so
// it contributes exactly zero to both value and gradient.
struct LossWeights {
  double lambda_kl = 1e4;
  double lambda_grad = 1.0;
  bool use_l2 = true;
  bool use_kl = true;
  bool use_grad = true;

  static LossWeights variant_l2() { return {0.0, 0.0, true, false, false}; }
  static LossWeights variant_kl(double lkl = 1e4) {
    return {lkl, 0.0, true, true, false};
  }
  static LossWeights variant_grad(double lg = 1.0) {
    return {0.0, lg, true, false, true};
  }
};

struct LossBreakdown {
  double l2 = 0.0;
  double kl = 0.0;
  double grad = 0.0;
  double total = 0.0;
};

struct KlLossConfig {
  double eps_div = 1e-3;  // floor applied to the estimate before division
  int bins = 256;
  double range = 4.0;
  RayleighRef reference;
};

// Mean squared error over all elements; gradient 2(xhat - x)/count.
template <typename T>
double l2_loss(const Tensor4<T>& xhat, const Tensor4<T>& x,
               Tensor4<T>* dxhat = nullptr) {
  if (!xhat.same_shape(x)) throw ParamError("l2_loss: shape mismatch");
  const double inv_n = 1.0 / static_cast<double>(xhat.size());
  if (dxhat && !dxhat->same_shape(xhat))
    *dxhat = Tensor4<T>(xhat.batch, xhat.channels, xhat.height, xhat.width);
  double acc = 0.0;
  for (std::size_t i = 0; i < xhat.size(); ++i) {
    const double e = static_cast<double>(xhat.data[i]) -
                     static_cast<double>(x.data[i]);
    acc += e * e;
    if (dxhat) dxhat->data[i] = static_cast<T>(2.0 * e * inv_n);
  }
  return acc * inv_n;
}

// Squared difference of image gradients (forward differences, replicate
// boundary), averaged per pixel with both directions summed. Invariant to a
// constant offset between the two inputs.
template <typename T>
double grad_loss(const Tensor4<T>& xhat, const Tensor4<T>& x,
                 Tensor4<T>* dxhat = nullptr) {
  if (!xhat.same_shape(x)) throw ParamError("grad_loss: shape mismatch");
  const int h = xhat.height, w = xhat.width;
  const double inv_n = 1.0 / static_cast<double>(xhat.size());
  if (dxhat) {
    if (!dxhat->same_shape(xhat))
      *dxhat = Tensor4<T>(xhat.batch, xhat.channels, h, w);
    dxhat->fill(T(0));
  }
  double acc = 0.0;
  for (int b = 0; b < xhat.batch; ++b) {
    for (int c = 0; c < xhat.channels; ++c) {
      const T* a = xhat.plane(b, c);
      const T* r = x.plane(b, c);
      T* d = dxhat ? dxhat->plane(b, c) : nullptr;
      for (int y = 0; y < h; ++y) {
        for (int xx = 0; xx < w; ++xx) {
          const std::size_t idx = static_cast<std::size_t>(y) * w + xx;
          const double e = static_cast<double>(a[idx]) -
                           static_cast<double>(r[idx]);
          if (xx + 1 < w) {
            const double eh = (static_cast<double>(a[idx + 1]) -
                               static_cast<double>(r[idx + 1])) -
                              e;
            acc += eh * eh;
            if (d) {
              d[idx + 1] += static_cast<T>(2.0 * eh * inv_n);
              d[idx] -= static_cast<T>(2.0 * eh * inv_n);
            }
          }
          if (y + 1 < h) {
            const double ev = (static_cast<double>(a[idx + w]) -
                               static_cast<double>(r[idx + w])) -
                              e;
            acc += ev * ev;
            if (d) {
              d[idx + w] += static_cast<T>(2.0 * ev * inv_n);
              d[idx] -= static_cast<T>(2.0 * ev * inv_n);
            }
          }
        }
      }
    }
  }
  return acc * inv_n;
}

namespace detail {

// Reference bin masses for the Rayleigh law, with the tail beyond the range
// folded into the last bin (matching the sample clamping below).
inline std::vector<double> rayleigh_bin_masses(int bins, double range) {
  std::vector<double> q(bins);
  const double step = range / bins;
  for (int i = 0; i < bins; ++i)
    q[i] = rayleigh_cdf((i + 1) * step) - rayleigh_cdf(i * step);
  q[bins - 1] += 1.0 - rayleigh_cdf(range);
  return q;
}

}  // namespace detail

// Kullback-Leibler term between the distribution of the estimated noise
// Nhat = Y / max(Xhat, eps_div) and the Rayleigh reference, natural log.
//
// The histogram uses triangular (linear interpolation between neighbouring
// bin centers) weights so the term is differentiable in Xhat; all pixels of
// the batch are pooled into a single histogram. Samples outside the center
// lattice are clamped and carry zero gradient, as do pixels sitting on the
// division floor.
template <typename T>
double kl_loss(const Tensor4<T>& xhat, const Tensor4<T>& y,
               const KlLossConfig& cfg = {}, Tensor4<T>* dxhat = nullptr) {
  if (!xhat.same_shape(y)) throw ParamError("kl_loss: shape mismatch");
  double y_abs = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i)
    y_abs += std::abs(static_cast<double>(y.data[i]));
  if (y_abs == 0.0) throw ParamError("kl_loss: degenerate all-zero noisy input");

  const int bins = cfg.bins;
  const double step = cfg.range / bins;
  const double lo_center = 0.5 * step;
  const double hi_center = cfg.range - 0.5 * step;
  const std::size_t n = xhat.size();
  const double inv_n = 1.0 / static_cast<double>(n);

  // ratio samples and soft-binned masses
  std::vector<double> ratio(n);
  std::vector<double> p(bins, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double xv =
        std::max(static_cast<double>(xhat.data[i]), cfg.eps_div);
    double t = static_cast<double>(y.data[i]) / xv;
    t = std::min(std::max(t, lo_center), hi_center);
    ratio[i] = t;
    const double pos = (t - lo_center) / step;
    const std::size_t b0 = std::min(static_cast<std::size_t>(pos),
                                    static_cast<std::size_t>(bins - 2));
    const double frac = pos - static_cast<double>(b0);
    p[b0] += (1.0 - frac) * inv_n;
    p[b0 + 1] += frac * inv_n;
  }

  const std::vector<double> q = detail::rayleigh_bin_masses(bins, cfg.range);
  constexpr double kFloor = 1e-12;
  double value = 0.0;
  std::vector<double> dkl_dp(bins, 0.0);
  for (int b = 0; b < bins; ++b) {
    const double qb = std::max(q[b], kFloor);
    if (p[b] > 0.0) value += p[b] * std::log(p[b] / qb);
    // d/dp [p ln(p/q)] = ln(p/q) + 1, kept finite by flooring p in the log
    dkl_dp[b] = std::log(std::max(p[b], kFloor) / qb) + 1.0;
  }

  if (dxhat) {
    if (!dxhat->same_shape(xhat))
      *dxhat = Tensor4<T>(xhat.batch, xhat.channels, xhat.height, xhat.width);
    for (std::size_t i = 0; i < n; ++i) {
      const double xv = static_cast<double>(xhat.data[i]);
      const double t = ratio[i];
      double g = 0.0;
      if (xv > cfg.eps_div && t > lo_center && t < hi_center) {
        const double pos = (t - lo_center) / step;
        const std::size_t b0 = std::min(static_cast<std::size_t>(pos),
                                        static_cast<std::size_t>(bins - 2));
        // d value / d t through the two soft-bin weights
        const double dv_dt = (dkl_dp[b0 + 1] - dkl_dp[b0]) / step * inv_n;
        const double dt_dx = -static_cast<double>(y.data[i]) / (xv * xv);
        g = dv_dt * dt_dx;
      }
      dxhat->data[i] = static_cast<T>(g);
    }
  }
  return value;
}

// Weighted combination; disabled terms are never evaluated.
template <typename T>
LossBreakdown total_loss(const Tensor4<T>& xhat, const Tensor4<T>& x,
                         const Tensor4<T>& y, const LossWeights& weights,
                         const KlLossConfig& kl_cfg = {},
                         Tensor4<T>* dxhat = nullptr) {
  if (weights.lambda_kl < 0.0 || weights.lambda_grad < 0.0)
    throw ParamError("total_loss: weights must be nonnegative");
  LossBreakdown out;
  if (dxhat) {
    if (!dxhat->same_shape(xhat))
      *dxhat = Tensor4<T>(xhat.batch, xhat.channels, xhat.height, xhat.width);
    dxhat->fill(T(0));
  }
  Tensor4<T> term_grad;
  auto accumulate = [&](double weight) {
    if (!dxhat) return;
    for (std::size_t i = 0; i < dxhat->size(); ++i)
      dxhat->data[i] += static_cast<T>(weight) * term_grad.data[i];
  };
  if (weights.use_l2) {
    out.l2 = l2_loss(xhat, x, dxhat ? &term_grad : nullptr);
    accumulate(1.0);
  }
  if (weights.use_kl) {
    out.kl = kl_loss(xhat, y, kl_cfg, dxhat ? &term_grad : nullptr);
    accumulate(weights.lambda_kl);
  }
  if (weights.use_grad) {
    out.grad = grad_loss(xhat, x, dxhat ? &term_grad : nullptr);
    accumulate(weights.lambda_grad);
  }
  out.total = out.l2 + weights.lambda_kl * out.kl +
              weights.lambda_grad * out.grad;
  return out;
}

}  // namespace monet
