#pragma once

// Block-matching landmark tracking, windowed median smoothing and
// displacement feature vectors.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <deque>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "visage/error.hpp"
#include "visage/image.hpp"
#include "visage/landmarks.hpp"

namespace visage {

inline constexpr int kFeatureDims = 2 * kLandmarkCount;

struct FlowParams {
  int half_w = 4;  // window half-width
  int half_h = 4;  // window half-height
  int radius = 6;  // per-axis search radius
  std::optional<std::uint64_t> max_error;  // tracked points above this become invalid

  void validate() const {
    if (half_w < 1 || half_h < 1) fail(ErrorKind::InvalidInput, "flow window half-size must be >= 1");
    if (radius < 0) fail(ErrorKind::InvalidInput, "flow search radius must be >= 0");
  }
};

struct Point {
  int x = 0;
  int y = 0;
  friend bool operator==(const Point&, const Point&) = default;
};

namespace detail {

inline bool window_inside(const Image& img, int cx, int cy, const FlowParams& p) {
  return cx - p.half_w >= 0 && cy - p.half_h >= 0 && cx + p.half_w < img.width() &&
         cy + p.half_h < img.height();
}

// Unchecked SSD between the window around (x, y) in a and around
// (x + dx, y + dy) in b.
inline std::uint64_t ssd_raw(const Image& a, const Image& b, int x, int y, int dx, int dy,
                             const FlowParams& p) {
  std::uint64_t eps = 0;
  for (int v = -p.half_h; v <= p.half_h; ++v) {
    const std::uint8_t* ra = &a.data()[std::size_t(y + v) * a.width() + x];
    const std::uint8_t* rb = &b.data()[std::size_t(y + v + dy) * b.width() + x + dx];
    for (int u = -p.half_w; u <= p.half_w; ++u) {
      const int d = int(ra[u]) - int(rb[u]);
      eps += std::uint64_t(d * d);
    }
  }
  return eps;
}

}  // namespace detail

inline std::uint64_t ssd(const Image& i1, const Image& i2, Point pt, Point delta,
                         const FlowParams& p) {
  if (i1.channels() != 1 || i2.channels() != 1)
    fail(ErrorKind::InvalidInput, "ssd expects gray images");
  if (!detail::window_inside(i1, pt.x, pt.y, p) ||
      !detail::window_inside(i2, pt.x + delta.x, pt.y + delta.y, p))
    fail(ErrorKind::Bounds, "ssd window outside image");
  return detail::ssd_raw(i1, i2, pt.x, pt.y, delta.x, delta.y, p);
}

struct TrackResult {
  bool valid = false;
  Point point;
  Point delta;
  std::uint64_t error = 0;
};

// Exhaustive search over [-R, R]^2 for the displacement with the smallest
// SSD. Displacements whose window leaves I2 are skipped. Ties go to the
// smallest |dx| + |dy|, then to row-major order (dy, then dx).
inline TrackResult track_point(const Image& i1, const Image& i2, Point pt, const FlowParams& p) {
  TrackResult best;
  if (!detail::window_inside(i1, pt.x, pt.y, p)) return best;
  int best_manhattan = std::numeric_limits<int>::max();
  for (int dy = -p.radius; dy <= p.radius; ++dy)
    for (int dx = -p.radius; dx <= p.radius; ++dx) {
      if (!detail::window_inside(i2, pt.x + dx, pt.y + dy, p)) continue;
      const std::uint64_t e = detail::ssd_raw(i1, i2, pt.x, pt.y, dx, dy, p);
      const int manhattan = std::abs(dx) + std::abs(dy);
      // Row-major iteration means an equal (error, manhattan) pair seen later
      // never replaces the earlier one.
      if (!best.valid || e < best.error || (e == best.error && manhattan < best_manhattan)) {
        best = {true, {pt.x + dx, pt.y + dy}, {dx, dy}, e};
        best_manhattan = manhattan;
      }
    }
  return best;
}

inline LandmarkSet track_set(const Image& i1, const Image& i2, const LandmarkSet& set,
                             const FlowParams& p) {
  if (i1.channels() != 1 || i2.channels() != 1)
    fail(ErrorKind::InvalidInput, "track_set expects gray images");
  LandmarkSet out = set;
  for (auto& l : out.points) {
    if (!l.valid) continue;
    const Point pt{int(std::lround(l.x)), int(std::lround(l.y))};
    const TrackResult r = track_point(i1, i2, pt, p);
    if (!r.valid || (p.max_error && r.error > *p.max_error)) {
      l.valid = false;
      continue;
    }
    l.x = r.point.x;
    l.y = r.point.y;
  }
  return out;
}

namespace detail {

inline double median_of(std::vector<double>& v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

}  // namespace detail

// Per landmark and coordinate, the median over the frames where the landmark
// is valid. A landmark stays valid when it is valid in at least half the
// frames.
inline LandmarkSet median_smooth(std::span<const LandmarkSet> history) {
  if (history.empty()) fail(ErrorKind::InvalidInput, "median_smooth needs at least one frame");
  LandmarkSet out = history.front();
  std::vector<double> xs, ys;
  for (int i = 0; i < kLandmarkCount; ++i) {
    xs.clear();
    ys.clear();
    for (const auto& s : history)
      if (s.points[i].valid) {
        xs.push_back(s.points[i].x);
        ys.push_back(s.points[i].y);
      }
    Landmark& l = out.points[i];
    l.valid = !xs.empty() && 2 * xs.size() >= history.size();
    if (!xs.empty()) {
      l.x = detail::median_of(xs);
      l.y = detail::median_of(ys);
    }
  }
  return out;
}

struct FeatureVector {
  std::array<double, kFeatureDims> values{};
  std::array<bool, kLandmarkCount> mask{};

  std::vector<double> as_vector() const { return {values.begin(), values.end()}; }
  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

// Displacement of every landmark from the reference, divided by `scale`
// (the reference inter-ocular distance, or 1 for raw pixels).
inline FeatureVector feature_vector(const LandmarkSet& current, const LandmarkSet& reference,
                                    double scale) {
  if (!(scale > 0)) fail(ErrorKind::InvalidInput, "normalization distance must be > 0");
  FeatureVector fv;
  for (int i = 0; i < kLandmarkCount; ++i) {
    const auto& c = current.points[i];
    const auto& r = reference.points[i];
    if (!c.valid || !r.valid) continue;
    fv.mask[i] = true;
    fv.values[2 * i] = (c.x - r.x) / scale;
    fv.values[2 * i + 1] = (c.y - r.y) / scale;
  }
  return fv;
}

// The last `capacity` landmark sets plus the reference captured at
// initialization.
class TrackHistory {
 public:
  explicit TrackHistory(std::size_t capacity = 10) : capacity_(capacity) {
    if (capacity == 0) fail(ErrorKind::InvalidInput, "smoothing window must be >= 1");
  }

  void set_reference(const LandmarkSet& ref, double interocular) {
    reference_ = ref;
    interocular_ = interocular;
    frames_.clear();
  }
  void clear_reference() {
    reference_.reset();
    frames_.clear();
  }

  bool initialized() const { return reference_.has_value(); }
  const LandmarkSet& reference() const { return *reference_; }
  double interocular() const { return interocular_; }

  void push(const LandmarkSet& s) {
    frames_.push_back(s);
    if (frames_.size() > capacity_) frames_.pop_front();
  }
  bool full() const { return frames_.size() == capacity_; }
  void clear_frames() { frames_.clear(); }
  std::size_t size() const { return frames_.size(); }
  std::size_t capacity() const { return capacity_; }

  LandmarkSet smoothed() const {
    const std::vector<LandmarkSet> v(frames_.begin(), frames_.end());
    return median_smooth(v);
  }

 private:
  std::size_t capacity_;
  std::deque<LandmarkSet> frames_;
  std::optional<LandmarkSet> reference_;
  double interocular_ = 1.0;
};

}  // namespace visage
