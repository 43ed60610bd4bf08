#pragma once

#include <algorithm>
#include <cstdint>

#include "monet/core.hpp"
#include "monet/model.hpp"

namespace monet {

template <typename T>
Tensor4<T> image_to_tensor(const Image<T>& img) {
  Tensor4<T> t(1, 1, img.height, img.width);
  t.data = img.pixels;
  return t;
}

template <typename T>
Image<T> tensor_to_image(const Tensor4<T>& t, int b = 0, int c = 0) {
  Image<T> img(t.height, t.width);
  const T* p = t.plane(b, c);
  std::copy(p, p + img.size(), img.pixels.begin());
  return img;
}

// Fully convolutional inference. Images within the pixel budget run whole;
// larger ones are tiled with a 16-px overlap and center cropping, so border
// effects stay confined to the overlap band.
template <typename T>
Image<T> infer_image(MonetModel<T>& model, const Image<T>& noisy,
                     std::size_t max_pixels = std::size_t(1) << 20) {
  constexpr int kOverlap = 16;
  const std::size_t px = noisy.size();
  if (px <= max_pixels) {
    Tensor4<T> in = image_to_tensor(noisy);
    Tensor4<T> out = monet_forward(model, in, Phase::kInfer);
    return tensor_to_image(out);
  }

  int tile = static_cast<int>(std::sqrt(static_cast<double>(max_pixels)));
  tile = std::max(tile - 2 * kOverlap, 32);
  Image<T> result(noisy.height, noisy.width);
  for (int y0 = 0; y0 < noisy.height; y0 += tile) {
    for (int x0 = 0; x0 < noisy.width; x0 += tile) {
      const int y1 = std::min(noisy.height, y0 + tile);
      const int x1 = std::min(noisy.width, x0 + tile);
      const int ey0 = std::max(0, y0 - kOverlap);
      const int ex0 = std::max(0, x0 - kOverlap);
      const int ey1 = std::min(noisy.height, y1 + kOverlap);
      const int ex1 = std::min(noisy.width, x1 + kOverlap);
      Tensor4<T> in(1, 1, ey1 - ey0, ex1 - ex0);
      for (int y = ey0; y < ey1; ++y)
        for (int x = ex0; x < ex1; ++x)
          in.at(0, 0, y - ey0, x - ex0) = noisy.at(y, x);
      Tensor4<T> out = monet_forward(model, in, Phase::kInfer);
      for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x)
          result.at(y, x) = out.at(0, 0, y - ey0, x - ex0);
    }
  }
  return result;
}

// Ratio image Nhat = Y / max(Xhat, eps_div); a perfect filter leaves a pure
// speckle realization here.
template <typename T>
Image<T> ratio_image(const Image<T>& noisy, const Image<T>& filtered,
                     double eps_div = 1e-3) {
  if (!noisy.same_shape(filtered)) throw ParamError("ratio_image: shape mismatch");
  Image<T> ratio(noisy.height, noisy.width);
  for (std::size_t i = 0; i < noisy.size(); ++i)
    ratio.pixels[i] =
        noisy.pixels[i] /
        std::max(filtered.pixels[i], static_cast<T>(eps_div));
  return ratio;
}

}  // namespace monet
