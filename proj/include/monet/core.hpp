#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

namespace monet {

// Error taxonomy, mapped to CLI exit codes: ParamError -> 1 (usage),
// DataError -> 2 (bad files / shapes on disk), NumericError -> 3.
class ParamError : public std::invalid_argument {
 public:
  explicit ParamError(const std::string& msg) : std::invalid_argument(msg) {}
};

class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// 2-D raster, row-major. Amplitude data is nonnegative by convention;
// constructors do not enforce it, validators at module entry points do.
template <typename T>
struct Image {
  int height = 0;
  int width = 0;
  std::vector<T> pixels;

  Image() = default;
  Image(int h, int w, T fill = T(0))
      : height(h), width(w), pixels(static_cast<std::size_t>(h) * w, fill) {
    if (h <= 0 || w <= 0) throw ParamError("Image: dimensions must be positive");
  }

  T& at(int i, int j) { return pixels[static_cast<std::size_t>(i) * width + j]; }
  const T& at(int i, int j) const {
    return pixels[static_cast<std::size_t>(i) * width + j];
  }
  T* row(int i) { return pixels.data() + static_cast<std::size_t>(i) * width; }
  const T* row(int i) const {
    return pixels.data() + static_cast<std::size_t>(i) * width;
  }
  std::size_t size() const { return pixels.size(); }
  template <typename U>
  bool same_shape(const Image<U>& o) const {
    return height == o.height && width == o.width;
  }
};

using AmplitudeImage = Image<float>;

// 4-D activation/gradient container, NCHW, contiguous.
template <typename T>
struct Tensor4 {
  int batch = 0;
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<T> data;

  Tensor4() = default;
  Tensor4(int n, int c, int h, int w, T fill = T(0))
      : batch(n),
        channels(c),
        height(h),
        width(w),
        data(static_cast<std::size_t>(n) * c * h * w, fill) {
    if (n <= 0 || c <= 0 || h <= 0 || w <= 0)
      throw ParamError("Tensor4: dimensions must be positive");
  }

  std::size_t size() const { return data.size(); }
  T* plane(int b, int c) {
    return data.data() +
           (static_cast<std::size_t>(b) * channels + c) * height * width;
  }
  const T* plane(int b, int c) const {
    return data.data() +
           (static_cast<std::size_t>(b) * channels + c) * height * width;
  }
  T& at(int b, int c, int y, int x) { return plane(b, c)[y * width + x]; }
  const T& at(int b, int c, int y, int x) const {
    return plane(b, c)[y * width + x];
  }
  bool same_shape(const Tensor4& o) const {
    return batch == o.batch && channels == o.channels && height == o.height &&
           width == o.width;
  }
  void fill(T v) { std::fill(data.begin(), data.end(), v); }
};

template <typename T>
bool all_finite(const std::vector<T>& v) {
  for (const T& x : v)
    if (!std::isfinite(static_cast<double>(x))) return false;
  return true;
}

template <typename T>
void require_finite(const Tensor4<T>& t, const char* what) {
  if (!all_finite(t.data))
    throw NumericError(std::string(what) + ": non-finite values");
}

namespace detail {

// Little-endian scalar IO used by the SARF/MONW/optimizer-state writers.
inline void put_u32(std::string& out, std::uint32_t v) {
  char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
               static_cast<char>((v >> 16) & 0xff),
               static_cast<char>((v >> 24) & 0xff)};
  out.append(b, 4);
}

inline void put_u64(std::string& out, std::uint64_t v) {
  put_u32(out, static_cast<std::uint32_t>(v & 0xffffffffu));
  put_u32(out, static_cast<std::uint32_t>(v >> 32));
}

inline void put_f32(std::string& out, float f) {
  std::uint32_t v;
  std::memcpy(&v, &f, 4);
  put_u32(out, v);
}

inline std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint64_t get_u64(const unsigned char* p) {
  return static_cast<std::uint64_t>(get_u32(p)) |
         (static_cast<std::uint64_t>(get_u32(p + 4)) << 32);
}

inline float get_f32(const unsigned char* p) {
  std::uint32_t v = get_u32(p);
  float f;
  std::memcpy(&f, &v, 4);
  return f;
}

}  // namespace detail

}  // namespace monet
