#pragma once

// Pixel buffers, integral images, Sobel derivatives and netpbm I/O.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "visage/error.hpp"

namespace visage {

struct Rect {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  constexpr int right() const { return x + w; }
  constexpr int bottom() const { return y + h; }
  constexpr std::int64_t area() const { return std::int64_t(w) * h; }
  constexpr bool empty() const { return w <= 0 || h <= 0; }

  constexpr bool contains(int px, int py) const {
    return px >= x && px < right() && py >= y && py < bottom();
  }

  // True when this rect lies entirely inside a width x height canvas.
  constexpr bool inside(int width, int height) const {
    return x >= 0 && y >= 0 && w >= 0 && h >= 0 && right() <= width &&
           bottom() <= height;
  }

  constexpr Rect translated(int dx, int dy) const { return {x + dx, y + dy, w, h}; }

  friend constexpr bool operator==(const Rect&, const Rect&) = default;
};

inline double iou(const Rect& a, const Rect& b) {
  const int ix0 = std::max(a.x, b.x);
  const int iy0 = std::max(a.y, b.y);
  const int ix1 = std::min(a.right(), b.right());
  const int iy1 = std::min(a.bottom(), b.bottom());
  if (ix1 <= ix0 || iy1 <= iy0) return 0.0;
  const double inter = double(ix1 - ix0) * double(iy1 - iy0);
  const double uni = double(a.area()) + double(b.area()) - inter;
  return uni > 0 ? inter / uni : 0.0;
}

// 8-bit interleaved image, 1 (gray) or 3 (RGB) channels, row-major.
class Image {
 public:
  Image() = default;

  Image(int width, int height, int channels, std::uint8_t fill = 0)
      : width_(width), height_(height), channels_(channels) {
    if (width < 1 || height < 1)
      fail(ErrorKind::InvalidInput, "image dimensions must be >= 1");
    if (channels != 1 && channels != 3)
      fail(ErrorKind::InvalidInput, "image must have 1 or 3 channels");
    data_.assign(std::size_t(width) * height * channels, fill);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  bool empty() const { return data_.empty(); }
  Rect bounds() const { return {0, 0, width_, height_}; }

  std::uint8_t& at(int x, int y, int c = 0) {
    return data_[(std::size_t(y) * width_ + x) * channels_ + c];
  }
  std::uint8_t at(int x, int y, int c = 0) const {
    return data_[(std::size_t(y) * width_ + x) * channels_ + c];
  }

  std::vector<std::uint8_t>& data() { return data_; }
  const std::vector<std::uint8_t>& data() const { return data_; }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<std::uint8_t> data_;
};

// Single-channel plane of arbitrary numeric type (gradients, score maps).
template <typename T>
class Plane {
 public:
  Plane() = default;
  Plane(int width, int height, T fill = T{})
      : width_(width), height_(height), data_(std::size_t(width) * height, fill) {}

  int width() const { return width_; }
  int height() const { return height_; }

  T& at(int x, int y) { return data_[std::size_t(y) * width_ + x]; }
  const T& at(int x, int y) const { return data_[std::size_t(y) * width_ + x]; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

using GradientImage = Plane<std::int32_t>;

inline Image to_grayscale(const Image& img) {
  if (img.channels() != 3)
    fail(ErrorKind::InvalidInput, "to_grayscale expects a 3-channel image");
  Image out(img.width(), img.height(), 1);
  const auto& src = img.data();
  auto& dst = out.data();
  for (std::size_t i = 0, n = dst.size(); i < n; ++i) {
    const int r = src[3 * i], g = src[3 * i + 1], b = src[3 * i + 2];
    // Rec.601 weights in fixed point; +500 rounds half up.
    dst[i] = std::uint8_t((299 * r + 587 * g + 114 * b + 500) / 1000);
  }
  return out;
}

inline Image ensure_gray(const Image& img) {
  return img.channels() == 1 ? img : to_grayscale(img);
}

// Summed-area tables with a zero first row and column: entry (x, y) holds the
// sum of every source pixel with column < x and row < y. The squared table
// backs window variance normalization.
class IntegralImage {
 public:
  IntegralImage() = default;

  int width() const { return width_; }
  int height() const { return height_; }
  int stride() const { return width_ + 1; }

  std::int64_t at(int x, int y) const { return sum_[std::size_t(y) * stride() + x]; }
  std::int64_t sq_at(int x, int y) const { return sqsum_[std::size_t(y) * stride() + x]; }

  std::int64_t sum_unchecked(const Rect& r) const {
    return at(r.right(), r.bottom()) + at(r.x, r.y) - at(r.right(), r.y) -
           at(r.x, r.bottom());
  }
  std::int64_t sqsum_unchecked(const Rect& r) const {
    return sq_at(r.right(), r.bottom()) + sq_at(r.x, r.y) - sq_at(r.right(), r.y) -
           sq_at(r.x, r.bottom());
  }

  const std::vector<std::int64_t>& table() const { return sum_; }

  friend IntegralImage integral(const Image& img);

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::int64_t> sum_;
  std::vector<std::int64_t> sqsum_;
};

inline IntegralImage integral(const Image& img) {
  if (img.channels() != 1)
    fail(ErrorKind::InvalidInput, "integral expects a single-channel image");
  IntegralImage ii;
  ii.width_ = img.width();
  ii.height_ = img.height();
  const int stride = ii.width_ + 1;
  ii.sum_.assign(std::size_t(stride) * (ii.height_ + 1), 0);
  ii.sqsum_.assign(ii.sum_.size(), 0);
  for (int y = 0; y < ii.height_; ++y) {
    std::int64_t row = 0, sqrow = 0;
    for (int x = 0; x < ii.width_; ++x) {
      const std::int64_t v = img.at(x, y);
      row += v;
      sqrow += v * v;
      const std::size_t i = std::size_t(y + 1) * stride + x + 1;
      ii.sum_[i] = ii.sum_[i - stride] + row;
      ii.sqsum_[i] = ii.sqsum_[i - stride] + sqrow;
    }
  }
  return ii;
}

inline std::int64_t rect_sum(const IntegralImage& ii, const Rect& r) {
  if (!r.inside(ii.width(), ii.height()))
    fail(ErrorKind::Bounds, "rect_sum: rect outside integral image");
  return ii.sum_unchecked(r);
}

struct SobelParams {
  int xorder = 1;
  int yorder = 0;
  int aperture = 3;
};

// 3x3 Sobel derivative, applied as a correlation so that I(x, y) = x yields +8.
// Borders replicate the edge pixel.
inline GradientImage sobel(const Image& img, const SobelParams& p) {
  if (img.channels() != 1)
    fail(ErrorKind::InvalidInput, "sobel expects a single-channel image");
  if (p.aperture != 3) fail(ErrorKind::InvalidInput, "sobel aperture must be 3");
  if (p.xorder + p.yorder != 1 || p.xorder < 0 || p.yorder < 0)
    fail(ErrorKind::InvalidInput, "sobel needs exactly one first-order derivative");
  if (img.width() < p.aperture || img.height() < p.aperture)
    fail(ErrorKind::InvalidInput, "image smaller than the sobel kernel");

  const int w = img.width(), h = img.height();
  GradientImage out(w, h);
  auto px = [&](int x, int y) -> std::int32_t {
    return img.at(std::clamp(x, 0, w - 1), std::clamp(y, 0, h - 1));
  };
  const bool dx = p.xorder == 1;
  for (int y = 0; y < h; ++y) {
    const bool interior_y = y > 0 && y < h - 1;
    const std::uint8_t* up = &img.data()[std::size_t(y > 0 ? y - 1 : 0) * w];
    const std::uint8_t* mid = &img.data()[std::size_t(y) * w];
    const std::uint8_t* dn = &img.data()[std::size_t(y < h - 1 ? y + 1 : y) * w];
    for (int x = 0; x < w; ++x) {
      std::int32_t v;
      if (interior_y && x > 0 && x < w - 1) {
        if (dx) {
          v = (up[x + 1] - up[x - 1]) + 2 * (mid[x + 1] - mid[x - 1]) +
              (dn[x + 1] - dn[x - 1]);
        } else {
          v = (dn[x - 1] + 2 * dn[x] + dn[x + 1]) - (up[x - 1] + 2 * up[x] + up[x + 1]);
        }
      } else if (dx) {
        v = (px(x + 1, y - 1) - px(x - 1, y - 1)) + 2 * (px(x + 1, y) - px(x - 1, y)) +
            (px(x + 1, y + 1) - px(x - 1, y + 1));
      } else {
        v = (px(x - 1, y + 1) + 2 * px(x, y + 1) + px(x + 1, y + 1)) -
            (px(x - 1, y - 1) + 2 * px(x, y - 1) + px(x + 1, y - 1));
      }
      out.at(x, y) = v;
    }
  }
  return out;
}

inline Image crop(const Image& img, const Rect& r) {
  if (r.empty() || !r.inside(img.width(), img.height()))
    fail(ErrorKind::Bounds, "crop: rect outside image");
  Image out(r.w, r.h, img.channels());
  const int c = img.channels();
  for (int y = 0; y < r.h; ++y) {
    const auto* src = &img.data()[(std::size_t(r.y + y) * img.width() + r.x) * c];
    std::copy(src, src + std::size_t(r.w) * c, &out.data()[std::size_t(y) * r.w * c]);
  }
  return out;
}

// Bilinear resampling with pixel-centre alignment.
inline Image resize_bilinear(const Image& img, int width, int height) {
  Image out(width, height, img.channels());
  const double sx = double(img.width()) / width;
  const double sy = double(img.height()) / height;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, double(img.height() - 1));
    const int y0 = int(fy);
    const int y1 = std::min(y0 + 1, img.height() - 1);
    const double ty = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, double(img.width() - 1));
      const int x0 = int(fx);
      const int x1 = std::min(x0 + 1, img.width() - 1);
      const double tx = fx - x0;
      for (int c = 0; c < img.channels(); ++c) {
        const double top = img.at(x0, y0, c) * (1 - tx) + img.at(x1, y0, c) * tx;
        const double bot = img.at(x0, y1, c) * (1 - tx) + img.at(x1, y1, c) * tx;
        out.at(x, y, c) = std::uint8_t(std::lround(top * (1 - ty) + bot * ty));
      }
    }
  }
  return out;
}

// ---- netpbm (binary P5 / P6, maxval 255) ----

namespace detail {

inline void skip_pnm_space(std::istream& in) {
  for (;;) {
    const int c = in.peek();
    if (c == '#') {
      std::string ignored;
      std::getline(in, ignored);
    } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      in.get();
    } else {
      return;
    }
  }
}

inline int read_pnm_int(std::istream& in) {
  skip_pnm_space(in);
  int v = -1;
  if (!(in >> v)) fail(ErrorKind::Parse, "netpbm: malformed header");
  return v;
}

}  // namespace detail

inline Image read_pnm(std::istream& in) {
  char magic[2] = {0, 0};
  if (!in.read(magic, 2) || magic[0] != 'P' || (magic[1] != '5' && magic[1] != '6'))
    fail(ErrorKind::Parse, "netpbm: expected P5 or P6 magic");
  const int channels = magic[1] == '5' ? 1 : 3;
  const int w = detail::read_pnm_int(in);
  const int h = detail::read_pnm_int(in);
  const int maxval = detail::read_pnm_int(in);
  if (w < 1 || h < 1) fail(ErrorKind::Parse, "netpbm: bad dimensions");
  if (maxval != 255) fail(ErrorKind::Parse, "netpbm: only maxval 255 is supported");
  in.get();  // single whitespace byte before the raster
  Image img(w, h, channels);
  in.read(reinterpret_cast<char*>(img.data().data()), std::streamsize(img.data().size()));
  if (in.gcount() != std::streamsize(img.data().size()))
    fail(ErrorKind::Parse, "netpbm: truncated raster");
  return img;
}

inline Image decode_pnm(const std::string& bytes) {
  std::istringstream in(bytes, std::ios::binary);
  return read_pnm(in);
}

inline void write_pnm(std::ostream& out, const Image& img) {
  out << (img.channels() == 1 ? "P5" : "P6") << '\n'
      << img.width() << ' ' << img.height() << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.data().data()),
            std::streamsize(img.data().size()));
}

inline std::string encode_pnm(const Image& img) {
  std::ostringstream out(std::ios::binary);
  write_pnm(out, img);
  return out.str();
}

inline Image load_pnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open image file: " + path);
  try {
    return read_pnm(in);
  } catch (const Error& e) {
    fail(e.kind(), path + ": " + e.what());
  }
}

inline void save_pnm(const std::string& path, const Image& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write image file: " + path);
  write_pnm(out, img);
}

}  // namespace visage
