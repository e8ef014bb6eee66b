#pragma once

// Fixed hue-threshold skin detection used to confirm cascade detections.

#include <algorithm>
#include <cstdint>
#include <optional>

#include "visage/error.hpp"
#include "visage/image.hpp"

namespace visage {

struct SkinParams {
  // Hue band in degrees; hue_low > hue_high means the band wraps through 0.
  double hue_low = 340.0;
  double hue_high = 50.0;
  double sat_min = 0.15;
  double val_min = 0.15;
  double min_skin_fraction = 0.4;
};

struct Hsv {
  std::optional<double> hue;  // empty when achromatic (max == min)
  double saturation = 0;
  double value = 0;
};

inline Hsv rgb_to_hue(int r, int g, int b) {
  const int mx = std::max({r, g, b});
  const int mn = std::min({r, g, b});
  Hsv out;
  out.value = mx / 255.0;
  out.saturation = mx == 0 ? 0.0 : double(mx - mn) / mx;
  if (mx == mn) return out;
  const double d = mx - mn;
  double h;
  if (mx == r)
    h = 60.0 * ((g - b) / d);
  else if (mx == g)
    h = 60.0 * ((b - r) / d + 2.0);
  else
    h = 60.0 * ((r - g) / d + 4.0);
  if (h < 0) h += 360.0;
  out.hue = h;
  return out;
}

inline bool hue_in_band(double hue, const SkinParams& p) {
  if (p.hue_low <= p.hue_high) return hue >= p.hue_low && hue <= p.hue_high;
  return hue >= p.hue_low || hue <= p.hue_high;
}

inline bool is_skin(int r, int g, int b, const SkinParams& p) {
  const Hsv hsv = rgb_to_hue(r, g, b);
  return hsv.hue && hue_in_band(*hsv.hue, p) && hsv.saturation >= p.sat_min &&
         hsv.value >= p.val_min;
}

struct SkinResult {
  double fraction = 0;
  std::size_t skin_pixels = 0;
  Plane<std::uint8_t> mask;  // region-sized, 1 = skin
};

inline SkinResult skin_fraction(const Image& img, const Rect& region, const SkinParams& p) {
  if (img.channels() != 3) fail(ErrorKind::InvalidInput, "skin detection needs an RGB image");
  if (region.empty()) fail(ErrorKind::InvalidInput, "skin detection on an empty region");
  if (!region.inside(img.width(), img.height()))
    fail(ErrorKind::Bounds, "skin region outside image");
  SkinResult res;
  res.mask = Plane<std::uint8_t>(region.w, region.h, 0);
  for (int y = 0; y < region.h; ++y)
    for (int x = 0; x < region.w; ++x) {
      const int px = region.x + x, py = region.y + y;
      if (is_skin(img.at(px, py, 0), img.at(px, py, 1), img.at(px, py, 2), p)) {
        res.mask.at(x, y) = 1;
        ++res.skin_pixels;
      }
    }
  res.fraction = double(res.skin_pixels) / double(region.area());
  return res;
}

inline bool verify_face(const Image& img, const Rect& box, const SkinParams& p) {
  return skin_fraction(img, box, p).fraction >= p.min_skin_fraction;
}

}  // namespace visage
