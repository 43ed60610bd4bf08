#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "monet/core.hpp"

#if defined(MONET_WITH_PNG)
#include <png.h>
#endif

namespace monet {

// ---------------------------------------------------------------------------
// SARF: raw-float raster. Magic "SARF", version u32, height u32, width u32,
// row-major little-endian f32 payload. Round trips are bit-exact.
// ---------------------------------------------------------------------------

namespace sarf {
constexpr std::uint32_t kVersion = 1;
}

inline void write_sarf(const Image<float>& img, const std::string& path) {
  std::string out;
  out.append("SARF", 4);
  detail::put_u32(out, sarf::kVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(img.height));
  detail::put_u32(out, static_cast<std::uint32_t>(img.width));
  for (float v : img.pixels) detail::put_f32(out, v);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("write_sarf: cannot open " + tmp);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw DataError("write_sarf: write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

inline Image<float> read_sarf(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("read_sarf: cannot open " + path);
  std::string buf((std::istreambuf_iterator<char>(f)),
                  std::istreambuf_iterator<char>());
  if (buf.size() < 16 || std::memcmp(buf.data(), "SARF", 4) != 0)
    throw DataError("read_sarf: bad magic in " + path);
  const unsigned char* p = reinterpret_cast<const unsigned char*>(buf.data()) + 4;
  if (detail::get_u32(p) != sarf::kVersion)
    throw DataError("read_sarf: unsupported version in " + path);
  const std::uint32_t h = detail::get_u32(p + 4);
  const std::uint32_t w = detail::get_u32(p + 8);
  if (h == 0 || w == 0 ||
      buf.size() != 16 + 4ull * h * w)
    throw DataError("read_sarf: payload size mismatch in " + path);
  Image<float> img(static_cast<int>(h), static_cast<int>(w));
  p += 12;
  for (std::size_t i = 0; i < img.size(); ++i, p += 4)
    img.pixels[i] = detail::get_f32(p);
  return img;
}

// ---------------------------------------------------------------------------
// Netpbm readers/writers. P5/P2 grayscale in, P6 color in (luma converted),
// P5 out for quicklooks, P4 out for bit masks.
// ---------------------------------------------------------------------------

namespace detail {

inline int pnm_next_int(std::istream& in, const std::string& path) {
  int c;
  for (;;) {
    c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
  int value;
  if (!(in >> value)) throw DataError("pnm: malformed header in " + path);
  return value;
}

}  // namespace detail

// Reads P2/P5 grayscale or P6 RGB (converted with luma weights
// 0.299/0.587/0.114); values normalized to [0,1].
inline Image<float> read_pnm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("read_pnm: cannot open " + path);
  char p, kind;
  f.get(p);
  f.get(kind);
  if (p != 'P' || (kind != '2' && kind != '5' && kind != '6'))
    throw DataError("read_pnm: unsupported format in " + path);
  const int w = detail::pnm_next_int(f, path);
  const int h = detail::pnm_next_int(f, path);
  const int maxval = detail::pnm_next_int(f, path);
  if (w < 1 || h < 1 || maxval < 1 || maxval > 65535)
    throw DataError("read_pnm: bad header in " + path);
  Image<float> img(h, w);
  const float scale = 1.0f / static_cast<float>(maxval);

  if (kind == '2') {
    for (std::size_t i = 0; i < img.size(); ++i) {
      int v;
      if (!(f >> v)) throw DataError("read_pnm: truncated data in " + path);
      img.pixels[i] = static_cast<float>(v) * scale;
    }
    return img;
  }

  f.get();  // single whitespace after maxval
  const int channels = kind == '6' ? 3 : 1;
  const int bytes_per = maxval > 255 ? 2 : 1;
  std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h * channels *
                                 bytes_per);
  f.read(reinterpret_cast<char*>(raw.data()),
         static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(f.gcount()) != raw.size())
    throw DataError("read_pnm: truncated data in " + path);
  auto sample = [&](std::size_t idx) {
    if (bytes_per == 1) return static_cast<float>(raw[idx]);
    return static_cast<float>((raw[2 * idx] << 8) | raw[2 * idx + 1]);  // big endian
  };
  for (std::size_t i = 0; i < img.size(); ++i) {
    if (channels == 1) {
      img.pixels[i] = sample(i) * scale;
    } else {
      const float r = sample(3 * i), g = sample(3 * i + 1), b = sample(3 * i + 2);
      img.pixels[i] = (0.299f * r + 0.587f * g + 0.114f * b) * scale;
    }
  }
  return img;
}

// 8-bit binary PGM from [0,1] data (clamped).
inline void write_pgm(const Image<float>& img, const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("write_pgm: cannot open " + path);
  f << "P5\n" << img.width << " " << img.height << "\n255\n";
  std::string bytes(img.size(), '\0');
  for (std::size_t i = 0; i < img.size(); ++i) {
    const float v = std::clamp(img.pixels[i], 0.0f, 1.0f);
    bytes[i] = static_cast<char>(static_cast<int>(v * 255.0f + 0.5f));
  }
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw DataError("write_pgm: write failed for " + path);
}

// 1-bit PBM (P4) mask export; nonzero pixels are set.
inline void write_pbm(const Image<std::uint8_t>& mask, const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("write_pbm: cannot open " + path);
  f << "P4\n" << mask.width << " " << mask.height << "\n";
  const int stride = (mask.width + 7) / 8;
  std::string bytes(static_cast<std::size_t>(stride) * mask.height, '\0');
  for (int y = 0; y < mask.height; ++y)
    for (int x = 0; x < mask.width; ++x)
      if (mask.at(y, x))
        bytes[static_cast<std::size_t>(y) * stride + x / 8] |=
            static_cast<char>(0x80 >> (x % 8));
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw DataError("write_pbm: write failed for " + path);
}

#if defined(MONET_WITH_PNG)
inline Image<float> read_png(const std::string& path) {
  FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) throw DataError("read_png: cannot open " + path);
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    if (png) png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw DataError("read_png: decode failure in " + path);
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  png_set_expand(png);
  png_set_strip_alpha(png);
  if (png_get_color_type(png, info) & PNG_COLOR_MASK_PALETTE)
    png_set_palette_to_rgb(png);
  png_read_update_info(png, info);
  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  const int channels = png_get_channels(png, info);
  const int depth = png_get_bit_depth(png, info);
  if ((channels != 1 && channels != 3) || (depth != 8 && depth != 16)) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw DataError("read_png: unsupported layout in " + path);
  }
  std::vector<unsigned char> rowbuf(static_cast<std::size_t>(w) * channels *
                                    (depth / 8));
  Image<float> img(h, w);
  const float scale = depth == 8 ? 1.0f / 255.0f : 1.0f / 65535.0f;
  for (int y = 0; y < h; ++y) {
    png_read_row(png, rowbuf.data(), nullptr);
    for (int x = 0; x < w; ++x) {
      auto sample = [&](int c) {
        const std::size_t idx = (static_cast<std::size_t>(x) * channels + c) *
                                (depth / 8);
        if (depth == 8) return static_cast<float>(rowbuf[idx]);
        return static_cast<float>((rowbuf[idx] << 8) | rowbuf[idx + 1]);
      };
      if (channels == 1)
        img.at(y, x) = sample(0) * scale;
      else
        img.at(y, x) = (0.299f * sample(0) + 0.587f * sample(1) +
                        0.114f * sample(2)) *
                       scale;
    }
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);
  return img;
}

inline void write_png_gray(const Image<float>& img, const std::string& path) {
  FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw DataError("write_png: cannot open " + path);
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    if (png) png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw DataError("write_png: encode failure for " + path);
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<unsigned char> row(img.width);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const float v = std::clamp(img.at(y, x), 0.0f, 1.0f);
      row[x] = static_cast<unsigned char>(v * 255.0f + 0.5f);
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}
#endif  // MONET_WITH_PNG

// ---------------------------------------------------------------------------
// Generic ingestion and display helpers
// ---------------------------------------------------------------------------

inline bool has_suffix(const std::string& s, const std::string& suf) {
  return s.size() >= suf.size() &&
         std::equal(suf.rbegin(), suf.rend(), s.rbegin(), [](char a, char b) {
           return std::tolower(a) == std::tolower(b);
         });
}

// Dispatches on content magic; accepts SARF, P2/P5/P6 and (when compiled in)
// PNG sources.
inline Image<float> read_image_any(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open input image " + path);
  char magic[4] = {};
  f.read(magic, 4);
  f.close();
  if (std::memcmp(magic, "SARF", 4) == 0) return read_sarf(path);
  if (magic[0] == 'P' &&
      (magic[1] == '2' || magic[1] == '5' || magic[1] == '6'))
    return read_pnm(path);
#if defined(MONET_WITH_PNG)
  const unsigned char png_sig[4] = {0x89, 'P', 'N', 'G'};
  if (std::memcmp(magic, png_sig, 4) == 0) return read_png(path);
#endif
  throw DataError("unrecognized image format: " + path);
}

// Display scaling for quicklooks: clip at the 99.5th amplitude percentile
// (the stored rasters stay unclipped).
inline Image<float> quicklook_scale(const Image<float>& img,
                                    double percentile = 99.5) {
  std::vector<float> v = img.pixels;
  const std::size_t k = std::min(
      v.size() - 1,
      static_cast<std::size_t>(percentile / 100.0 * static_cast<double>(v.size())));
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
  const float clip = std::max(v[k], 1e-12f);
  Image<float> out(img.height, img.width);
  for (std::size_t i = 0; i < img.size(); ++i)
    out.pixels[i] = std::min(img.pixels[i], clip) / clip;
  return out;
}

inline void write_quicklook(const Image<float>& img, const std::string& base) {
  const Image<float> scaled = quicklook_scale(img);
  write_pgm(scaled, base + ".pgm");
#if defined(MONET_WITH_PNG)
  write_png_gray(scaled, base + ".png");
#endif
}

}  // namespace monet
