#pragma once

// Geometric face division, minimum-eigenvalue corner scores, Shi-Tomasi
// corner selection and the 21-point landmark set.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "visage/error.hpp"
#include "visage/image.hpp"

namespace visage {

inline constexpr int kLandmarkCount = 21;
inline constexpr int kRegionCount = 4;

enum class Region : int { LeftEye = 0, RightEye = 1, Nose = 2, Mouth = 3 };

inline const char* to_string(Region r) {
  switch (r) {
    case Region::LeftEye: return "left-eye";
    case Region::RightEye: return "right-eye";
    case Region::Nose: return "nose";
    case Region::Mouth: return "mouth";
  }
  return "?";
}

// Fractions of the face box: [x0, x1) x [y0, y1).
struct FracRect {
  double x0 = 0, y0 = 0, x1 = 1, y1 = 1;
};

struct FaceRegions {
  std::array<FracRect, kRegionCount> regions{{
      {0.12, 0.20, 0.48, 0.48},  // left eye
      {0.52, 0.20, 0.88, 0.48},  // right eye
      {0.30, 0.42, 0.70, 0.68},  // nose
      {0.22, 0.65, 0.78, 0.95},  // mouth
  }};

  FracRect& operator[](Region r) { return regions[int(r)]; }
  const FracRect& operator[](Region r) const { return regions[int(r)]; }
};

struct RegionRects {
  Rect face;
  std::array<Rect, kRegionCount> regions{};

  const Rect& operator[](Region r) const { return regions[int(r)]; }
};

inline RegionRects divide_face(const Rect& box, const FaceRegions& ratios) {
  if (box.empty()) fail(ErrorKind::InvalidInput, "divide_face on an empty box");
  RegionRects out;
  out.face = box;
  auto sx = [&](double f) { return std::clamp(int(std::lround(f * box.w)), 0, box.w); };
  auto sy = [&](double f) { return std::clamp(int(std::lround(f * box.h)), 0, box.h); };
  for (int i = 0; i < kRegionCount; ++i) {
    const FracRect& fr = ratios.regions[i];
    const int x0 = sx(fr.x0), x1 = std::max(x0, sx(fr.x1));
    const int y0 = sy(fr.y0), y1 = std::max(y0, sy(fr.y1));
    out.regions[i] = {box.x + x0, box.y + y0, x1 - x0, y1 - y0};
  }
  return out;
}

struct CornerParams {
  int block_size = 3;
  double quality_level = 0.01;
  double min_distance = 5.0;
  std::array<int, kRegionCount> quotas{5, 5, 3, 8};

  void validate() const {
    int sum = 0;
    for (int q : quotas) {
      if (q < 0) fail(ErrorKind::InvalidInput, "region quota must be >= 0");
      sum += q;
    }
    if (sum != kLandmarkCount) fail(ErrorKind::InvalidInput, "region quotas must sum to 21");
    if (!(quality_level > 0 && quality_level <= 1))
      fail(ErrorKind::InvalidInput, "quality_level must be in (0, 1]");
    if (min_distance < 0) fail(ErrorKind::InvalidInput, "min_distance must be >= 0");
    if (block_size < 1 || block_size % 2 == 0)
      fail(ErrorKind::InvalidInput, "block_size must be odd and >= 1");
  }
};

using ScoreMap = Plane<double>;

// Smaller eigenvalue of the gradient structure tensor summed over a
// block_size x block_size window (replicate borders). The tensor entries are
// exact integers, so the discriminant (a - c)^2 + 4b^2 is formed exactly.
inline ScoreMap min_eigen_map(const Image& img, int block_size = 3) {
  if (img.channels() != 1) fail(ErrorKind::InvalidInput, "min_eigen_map expects gray input");
  if (block_size < 1 || block_size % 2 == 0)
    fail(ErrorKind::InvalidInput, "block_size must be odd and >= 1");
  if (img.width() <= block_size || img.height() <= block_size || img.width() < 3 ||
      img.height() < 3)
    fail(ErrorKind::InvalidInput, "image too small for the corner block");

  const int w = img.width(), h = img.height();
  const GradientImage gx = sobel(img, {1, 0, 3});
  const GradientImage gy = sobel(img, {0, 1, 3});
  Plane<std::int64_t> xx(w, h), xy(w, h), yy(w, h);
  for (std::size_t i = 0; i < gx.data().size(); ++i) {
    const std::int64_t a = gx.data()[i], b = gy.data()[i];
    xx.data()[i] = a * a;
    xy.data()[i] = a * b;
    yy.data()[i] = b * b;
  }
  const int r = block_size / 2;
  ScoreMap out(w, h, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      std::int64_t a = 0, b = 0, c = 0;
      for (int dy = -r; dy <= r; ++dy) {
        const int yy_ = std::clamp(y + dy, 0, h - 1);
        for (int dx = -r; dx <= r; ++dx) {
          const int xx_ = std::clamp(x + dx, 0, w - 1);
          a += xx.at(xx_, yy_);
          b += xy.at(xx_, yy_);
          c += yy.at(xx_, yy_);
        }
      }
      const std::int64_t disc = (a - c) * (a - c) + 4 * b * b;
      const double lam = (double(a + c) - std::sqrt(double(disc))) / 2.0;
      out.at(x, y) = std::max(lam, 0.0);
    }
  return out;
}

struct Corner {
  int x = 0;
  int y = 0;
  double score = 0;
  friend bool operator==(const Corner&, const Corner&) = default;
};

namespace detail {

inline bool is_local_max(const ScoreMap& m, int x, int y) {
  const double v = m.at(x, y);
  for (int dy = -1; dy <= 1; ++dy)
    for (int dx = -1; dx <= 1; ++dx) {
      if (dx == 0 && dy == 0) continue;
      const int nx = x + dx, ny = y + dy;
      if (nx < 0 || ny < 0 || nx >= m.width() || ny >= m.height()) continue;
      if (m.at(nx, ny) > v) return false;
    }
  return true;
}

}  // namespace detail

// Candidates inside `region` surviving 3x3 non-maxima suppression and the
// quality threshold, sorted by descending score then row-major position.
inline std::vector<Corner> corner_candidates(const ScoreMap& m, const Rect& region,
                                             double quality_level) {
  if (!region.inside(m.width(), m.height()))
    fail(ErrorKind::Bounds, "corner region outside image");
  double max_score = 0;
  for (int y = region.y; y < region.bottom(); ++y)
    for (int x = region.x; x < region.right(); ++x) max_score = std::max(max_score, m.at(x, y));
  std::vector<Corner> out;
  if (max_score <= 0) return out;
  const double floor = quality_level * max_score;
  for (int y = region.y; y < region.bottom(); ++y)
    for (int x = region.x; x < region.right(); ++x) {
      const double v = m.at(x, y);
      if (v > 0 && v >= floor && detail::is_local_max(m, x, y)) out.push_back({x, y, v});
    }
  std::stable_sort(out.begin(), out.end(),
                   [](const Corner& a, const Corner& b) { return a.score > b.score; });
  return out;
}

// Greedy minimum-distance selection over sorted candidates. Points in `taken`
// block candidates too but are not part of the result. A grid with cells of
// min_distance keeps each check local.
inline std::vector<Corner> select_spaced(const std::vector<Corner>& candidates,
                                         double min_distance, std::size_t max_n,
                                         std::span<const Corner> taken = {}) {
  std::vector<Corner> out;
  if (max_n == 0) return out;
  const double md2 = min_distance * min_distance;
  const int cell = std::max(1, int(std::ceil(min_distance)));
  auto cell_of = [cell](const Corner& c) {
    return std::pair<int, int>{c.x / cell, c.y / cell};  // coordinates are >= 0
  };
  std::map<std::pair<int, int>, std::vector<Corner>> grid;
  for (const Corner& t : taken) grid[cell_of(t)].push_back(t);

  for (const Corner& c : candidates) {
    const auto [cx, cy] = cell_of(c);
    bool ok = true;
    for (int dy = -1; dy <= 1 && ok; ++dy)
      for (int dx = -1; dx <= 1 && ok; ++dx) {
        const auto it = grid.find({cx + dx, cy + dy});
        if (it == grid.end()) continue;
        for (const Corner& q : it->second) {
          const double ddx = q.x - c.x, ddy = q.y - c.y;
          if (ddx * ddx + ddy * ddy < md2) {
            ok = false;
            break;
          }
        }
      }
    if (!ok) continue;
    out.push_back(c);
    grid[{cx, cy}].push_back(c);
    if (out.size() >= max_n) break;
  }
  return out;
}

inline std::vector<Corner> good_features(const ScoreMap& m, const Rect& region,
                                         const CornerParams& p, std::size_t max_n,
                                         std::span<const Corner> taken = {}) {
  return select_spaced(corner_candidates(m, region, p.quality_level), p.min_distance, max_n,
                       taken);
}

inline std::vector<Corner> good_features(const Image& img, const Rect& region,
                                         const CornerParams& p, std::size_t max_n) {
  if (!region.inside(img.width(), img.height()))
    fail(ErrorKind::Bounds, "corner region outside image");
  return good_features(min_eigen_map(ensure_gray(img), p.block_size), region, p, max_n);
}

struct Landmark {
  double x = 0;
  double y = 0;
  Region region = Region::LeftEye;
  bool valid = false;
  friend bool operator==(const Landmark&, const Landmark&) = default;
};

struct LandmarkSet {
  std::array<Landmark, kLandmarkCount> points{};

  std::size_t valid_count() const {
    return std::size_t(std::count_if(points.begin(), points.end(),
                                     [](const Landmark& l) { return l.valid; }));
  }
  friend bool operator==(const LandmarkSet&, const LandmarkSet&) = default;
};

// Slot layout is fixed by the quotas: region 0's slots first, then region 1,
// and so on. Within a region, points are ordered left to right (then top to
// bottom) so a slot keeps the same spatial meaning across faces.
inline LandmarkSet select_21(const ScoreMap& m, const RegionRects& regions,
                             const CornerParams& p) {
  p.validate();
  LandmarkSet set;
  std::vector<Corner> taken;
  std::array<std::vector<Corner>, kRegionCount> picked;
  for (int r = 0; r < kRegionCount; ++r) {
    picked[r] = good_features(m, regions.regions[r], p, std::size_t(p.quotas[r]), taken);
    taken.insert(taken.end(), picked[r].begin(), picked[r].end());
  }
  std::size_t shortfall = 0;
  for (int r = 0; r < kRegionCount; ++r) shortfall += p.quotas[r] - picked[r].size();
  if (shortfall > 0) {
    auto extra = good_features(m, regions.face, p, shortfall, taken);
    std::size_t next = 0;
    for (int r = 0; r < kRegionCount && next < extra.size(); ++r)
      while (picked[r].size() < std::size_t(p.quotas[r]) && next < extra.size())
        picked[r].push_back(extra[next++]);
  }
  std::size_t slot = 0;
  for (int r = 0; r < kRegionCount; ++r) {
    auto& pts = picked[r];
    std::sort(pts.begin(), pts.end(), [](const Corner& a, const Corner& b) {
      return a.x != b.x ? a.x < b.x : a.y < b.y;
    });
    for (int q = 0; q < p.quotas[r]; ++q, ++slot) {
      Landmark& l = set.points[slot];
      l.region = Region(r);
      if (std::size_t(q) < pts.size()) {
        l.x = pts[q].x;
        l.y = pts[q].y;
        l.valid = true;
      }
    }
  }
  return set;
}

inline LandmarkSet select_21(const Image& img, const RegionRects& regions,
                             const CornerParams& p) {
  if (!regions.face.inside(img.width(), img.height()))
    fail(ErrorKind::Bounds, "face box outside image");
  return select_21(min_eigen_map(ensure_gray(img), p.block_size), regions, p);
}

// Distance between the centroids of the valid left-eye and right-eye points.
inline std::optional<double> interocular_distance(const LandmarkSet& set) {
  double sx[2] = {0, 0}, sy[2] = {0, 0};
  int n[2] = {0, 0};
  for (const auto& l : set.points) {
    if (!l.valid) continue;
    if (l.region == Region::LeftEye || l.region == Region::RightEye) {
      const int i = l.region == Region::LeftEye ? 0 : 1;
      sx[i] += l.x;
      sy[i] += l.y;
      ++n[i];
    }
  }
  if (n[0] == 0 || n[1] == 0) return std::nullopt;
  const double d = std::hypot(sx[0] / n[0] - sx[1] / n[1], sy[0] / n[0] - sy[1] / n[1]);
  if (!(d > 0)) return std::nullopt;
  return d;
}

// CSV lines: frame,point_index,region,x,y,valid
inline void write_landmark_csv(std::ostream& out, std::uint64_t frame, const LandmarkSet& set) {
  for (int i = 0; i < kLandmarkCount; ++i) {
    const auto& l = set.points[i];
    out << frame << ',' << i << ',' << to_string(l.region) << ',' << l.x << ',' << l.y << ','
        << (l.valid ? 1 : 0) << '\n';
  }
}

}  // namespace visage
