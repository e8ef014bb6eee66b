#pragma once

// Haar-like rectangle features, boosted stump classifiers, attentional
// cascades, multi-scale scanning and the frontal/profile interleave.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "visage/error.hpp"
#include "visage/image.hpp"
#include "visage/textio.hpp"

namespace visage {

enum class FeatureKind { TwoHorizontal, TwoVertical, ThreeHorizontal, ThreeVertical, Four };

inline const char* to_string(FeatureKind k) {
  switch (k) {
    case FeatureKind::TwoHorizontal: return "two-h";
    case FeatureKind::TwoVertical: return "two-v";
    case FeatureKind::ThreeHorizontal: return "three-h";
    case FeatureKind::ThreeVertical: return "three-v";
    case FeatureKind::Four: return "four";
  }
  return "?";
}

inline std::optional<FeatureKind> parse_feature_kind(std::string_view s) {
  for (auto k : {FeatureKind::TwoHorizontal, FeatureKind::TwoVertical,
                 FeatureKind::ThreeHorizontal, FeatureKind::ThreeVertical, FeatureKind::Four})
    if (s == to_string(k)) return k;
  return std::nullopt;
}

struct WeightedRect {
  Rect rect;
  double weight = 0;  // negative = white, positive = grey
  friend bool operator==(const WeightedRect&, const WeightedRect&) = default;
};

// Rects live in base-window coordinates.
struct RectFeature {
  FeatureKind kind = FeatureKind::TwoHorizontal;
  std::vector<WeightedRect> rects;
  friend bool operator==(const RectFeature&, const RectFeature&) = default;
};

// Builds a feature of the given kind from its top-left corner and the size of
// one unit cell. Weights are +-1 except the three-rect centre, which is +2 so
// that weighted areas cancel.
inline RectFeature make_feature(FeatureKind kind, int x, int y, int uw, int uh) {
  RectFeature f{kind, {}};
  switch (kind) {
    case FeatureKind::TwoHorizontal:
      f.rects = {{{x, y, uw, uh}, -1.0}, {{x + uw, y, uw, uh}, 1.0}};
      break;
    case FeatureKind::TwoVertical:
      f.rects = {{{x, y, uw, uh}, -1.0}, {{x, y + uh, uw, uh}, 1.0}};
      break;
    case FeatureKind::ThreeHorizontal:
      f.rects = {{{x, y, uw, uh}, -1.0},
                 {{x + uw, y, uw, uh}, 2.0},
                 {{x + 2 * uw, y, uw, uh}, -1.0}};
      break;
    case FeatureKind::ThreeVertical:
      f.rects = {{{x, y, uw, uh}, -1.0},
                 {{x, y + uh, uw, uh}, 2.0},
                 {{x, y + 2 * uh, uw, uh}, -1.0}};
      break;
    case FeatureKind::Four:
      f.rects = {{{x, y, uw, uh}, -1.0},
                 {{x + uw, y, uw, uh}, 1.0},
                 {{x, y + uh, uw, uh}, 1.0},
                 {{x + uw, y + uh, uw, uh}, -1.0}};
      break;
  }
  return f;
}

inline std::pair<int, int> unit_grid(FeatureKind k) {
  switch (k) {
    case FeatureKind::TwoHorizontal: return {2, 1};
    case FeatureKind::TwoVertical: return {1, 2};
    case FeatureKind::ThreeHorizontal: return {3, 1};
    case FeatureKind::ThreeVertical: return {1, 3};
    case FeatureKind::Four: return {2, 2};
  }
  return {1, 1};
}

// Exhaustive enumeration of all feature kinds on a `stride` grid (positions
// and unit sizes both multiples of stride). When the enumeration exceeds
// `cap`, an evenly spaced subset of exactly `cap` features is kept.
inline std::vector<RectFeature> make_feature_pool(int win_w, int win_h, int stride = 2,
                                                  std::size_t cap = 50000) {
  if (stride < 1) fail(ErrorKind::InvalidInput, "feature pool stride must be >= 1");
  std::vector<RectFeature> all;
  for (auto kind : {FeatureKind::TwoHorizontal, FeatureKind::TwoVertical,
                    FeatureKind::ThreeHorizontal, FeatureKind::ThreeVertical,
                    FeatureKind::Four}) {
    const auto [gx, gy] = unit_grid(kind);
    for (int uh = stride; uh * gy <= win_h; uh += stride)
      for (int uw = stride; uw * gx <= win_w; uw += stride)
        for (int y = 0; y + uh * gy <= win_h; y += stride)
          for (int x = 0; x + uw * gx <= win_w; x += stride)
            all.push_back(make_feature(kind, x, y, uw, uh));
  }
  if (cap == 0 || all.size() <= cap) return all;
  std::vector<RectFeature> kept;
  kept.reserve(cap);
  for (std::size_t i = 0; i < cap; ++i) kept.push_back(all[i * all.size() / cap]);
  return kept;
}

// A window placed in an image: top-left corner plus scale relative to the
// cascade's base window.
struct Window {
  int x = 0;
  int y = 0;
  double scale = 1.0;
};

inline int scaled_size(int base, double scale) { return int(std::lround(base * scale)); }

// Feature rects resolved to pixel offsets for one scale. Rect edges are
// rounded independently so adjacent rects stay adjacent; each weight is
// corrected by (ideal area / rounded area) so balanced features stay balanced.
struct ScaledFeature {
  std::array<Rect, 4> rects{};
  std::array<double, 4> weights{};
  int count = 0;

  double value(const IntegralImage& ii, int wx, int wy) const {
    double v = 0;
    for (int i = 0; i < count; ++i)
      v += weights[i] * double(ii.sum_unchecked(rects[i].translated(wx, wy)));
    return v;
  }
};

inline ScaledFeature scale_feature(const RectFeature& f, double scale) {
  if (f.rects.size() > 4) fail(ErrorKind::InvalidInput, "feature has more than 4 rects");
  ScaledFeature sf;
  sf.count = int(f.rects.size());
  for (int i = 0; i < sf.count; ++i) {
    const Rect& r = f.rects[i].rect;
    const int x0 = int(std::lround(r.x * scale));
    const int y0 = int(std::lround(r.y * scale));
    const int x1 = int(std::lround(r.right() * scale));
    const int y1 = int(std::lround(r.bottom() * scale));
    sf.rects[i] = {x0, y0, x1 - x0, y1 - y0};
    const double scaled_area = double(x1 - x0) * double(y1 - y0);
    if (scaled_area <= 0) fail(ErrorKind::Bounds, "feature rect vanishes at this scale");
    sf.weights[i] = f.rects[i].weight * (double(r.area()) * scale * scale) / scaled_area;
  }
  return sf;
}

// Divisor applied to raw feature values when variance normalization is on:
// window area times pixel standard deviation (floored at 1 so flat windows do
// not blow up).
inline double window_norm(const IntegralImage& ii, const Rect& win) {
  const double n = double(win.area());
  const double s = double(ii.sum_unchecked(win));
  const double sq = double(ii.sqsum_unchecked(win));
  const double var = sq / n - (s / n) * (s / n);
  return n * std::max(std::sqrt(std::max(var, 0.0)), 1.0);
}

struct WindowContext {
  Rect rect;          // pixel extent of the window
  double norm = 1.0;  // divisor for feature values
};

inline WindowContext make_context(const IntegralImage& ii, const Window& w, int base_w,
                                  int base_h, bool normalize) {
  WindowContext ctx;
  ctx.rect = {w.x, w.y, scaled_size(base_w, w.scale), scaled_size(base_h, w.scale)};
  if (!ctx.rect.inside(ii.width(), ii.height()))
    fail(ErrorKind::Bounds, "window outside image");
  ctx.norm = normalize ? window_norm(ii, ctx.rect) : 1.0;
  return ctx;
}

inline double eval_feature(const RectFeature& f, const IntegralImage& ii, const Window& w,
                           int base_w = 24, int base_h = 24, bool normalize = false) {
  const WindowContext ctx = make_context(ii, w, base_w, base_h, normalize);
  const ScaledFeature sf = scale_feature(f, w.scale);
  for (int i = 0; i < sf.count; ++i) {
    const Rect& r = sf.rects[i];
    if (r.x < 0 || r.y < 0 || r.right() > ctx.rect.w || r.bottom() > ctx.rect.h)
      fail(ErrorKind::Bounds, "feature overflows its window");
  }
  return sf.value(ii, w.x, w.y) / ctx.norm;
}

struct WeakClassifier {
  RectFeature feature;
  double threshold = 0;
  int polarity = 1;
  friend bool operator==(const WeakClassifier&, const WeakClassifier&) = default;
};

inline int eval_weak(const WeakClassifier& w, double f_value) {
  return w.polarity * f_value < w.polarity * w.threshold ? 1 : 0;
}

struct BoostedWeak {
  WeakClassifier weak;
  double alpha = 0;
  friend bool operator==(const BoostedWeak&, const BoostedWeak&) = default;
};

struct StrongClassifier {
  std::vector<BoostedWeak> weak;
  double threshold = 0;
  friend bool operator==(const StrongClassifier&, const StrongClassifier&) = default;
};

struct StrongResult {
  bool pass = false;
  double score = 0;
};

inline StrongResult eval_strong(const StrongClassifier& s, const IntegralImage& ii,
                                const Window& w, int base_w = 24, int base_h = 24,
                                bool normalize = false) {
  const WindowContext ctx = make_context(ii, w, base_w, base_h, normalize);
  double score = 0;
  for (const auto& bw : s.weak) {
    const double f = scale_feature(bw.weak.feature, w.scale).value(ii, w.x, w.y) / ctx.norm;
    if (eval_weak(bw.weak, f)) score += bw.alpha;
  }
  return {score >= s.threshold, score};
}

struct Cascade {
  int window_w = 24;
  int window_h = 24;
  std::string label = "frontal";
  std::vector<StrongClassifier> stages;
  friend bool operator==(const Cascade&, const Cascade&) = default;
};

struct CascadeResult {
  bool accepted = false;
  int rejected_at = -1;  // stage index of the rejecting stage, -1 when accepted
  int stages_evaluated = 0;
};

inline CascadeResult eval_cascade(const Cascade& c, const IntegralImage& ii, const Window& w,
                                  bool normalize = false) {
  CascadeResult r;
  for (std::size_t i = 0; i < c.stages.size(); ++i) {
    ++r.stages_evaluated;
    if (!eval_strong(c.stages[i], ii, w, c.window_w, c.window_h, normalize).pass) {
      r.rejected_at = int(i);
      return r;
    }
  }
  r.accepted = true;
  return r;
}

// ---------------------------------------------------------------------------
// Multi-scale scan

struct ScanParams {
  double scale_start = 1.0;
  double scale_factor = 1.25;
  double scale_max = 0;  // 0 = up to the image size
  int step = 1;          // at base scale; grows with the scale
  bool normalize = true;
  double merge_iou = 0.3;
  int min_neighbors = 2;
};

struct ScanLevel {
  double scale = 1;
  int win_w = 0;
  int win_h = 0;
  int step = 1;
};

inline std::vector<ScanLevel> scan_levels(int img_w, int img_h, int base_w, int base_h,
                                          const ScanParams& p) {
  if (!(p.scale_factor > 1.0)) fail(ErrorKind::InvalidInput, "scale factor must be > 1");
  if (p.step < 1) fail(ErrorKind::InvalidInput, "scan step must be >= 1");
  std::vector<ScanLevel> levels;
  for (double s = p.scale_start;; s *= p.scale_factor) {
    if (p.scale_max > 0 && s > p.scale_max) break;
    const int ww = scaled_size(base_w, s), wh = scaled_size(base_h, s);
    if (ww > img_w || wh > img_h) break;
    levels.push_back({s, ww, wh, std::max(1, int(std::lround(p.step * s)))});
  }
  return levels;
}

inline std::size_t count_scan_windows(int img_w, int img_h, int base_w, int base_h,
                                      const ScanParams& p) {
  std::size_t n = 0;
  for (const auto& l : scan_levels(img_w, img_h, base_w, base_h, p))
    n += std::size_t((img_w - l.win_w) / l.step + 1) * std::size_t((img_h - l.win_h) / l.step + 1);
  return n;
}

struct Detection {
  Rect box;
  int neighbors = 0;
};

namespace detail {

// A cascade resolved to one scale for the scan inner loop.
struct CompiledStage {
  std::vector<ScaledFeature> features;
  std::vector<double> thresholds;
  std::vector<int> polarities;
  std::vector<double> alphas;
  double threshold = 0;
};

inline std::vector<CompiledStage> compile(const Cascade& c, double scale) {
  std::vector<CompiledStage> out;
  out.reserve(c.stages.size());
  for (const auto& st : c.stages) {
    CompiledStage cs;
    cs.threshold = st.threshold;
    for (const auto& bw : st.weak) {
      cs.features.push_back(scale_feature(bw.weak.feature, scale));
      cs.thresholds.push_back(bw.weak.threshold);
      cs.polarities.push_back(bw.weak.polarity);
      cs.alphas.push_back(bw.alpha);
    }
    out.push_back(std::move(cs));
  }
  return out;
}

// Same arithmetic, in the same order, as eval_cascade.
inline bool run_compiled(const std::vector<CompiledStage>& stages, const IntegralImage& ii,
                         int x, int y, double norm) {
  for (const auto& st : stages) {
    double score = 0;
    for (std::size_t j = 0; j < st.features.size(); ++j) {
      const double f = st.features[j].value(ii, x, y) / norm;
      if (st.polarities[j] * f < st.polarities[j] * st.thresholds[j]) score += st.alphas[j];
    }
    if (!(score >= st.threshold)) return false;
  }
  return true;
}

}  // namespace detail

// Every accepted window in scan order: scale ascending, then rows, then columns.
inline std::vector<Rect> scan_raw(const Cascade& c, const IntegralImage& ii,
                                  const ScanParams& p) {
  std::vector<Rect> hits;
  for (const auto& lvl : scan_levels(ii.width(), ii.height(), c.window_w, c.window_h, p)) {
    const auto stages = detail::compile(c, lvl.scale);
    for (int y = 0; y + lvl.win_h <= ii.height(); y += lvl.step) {
      for (int x = 0; x + lvl.win_w <= ii.width(); x += lvl.step) {
        const Rect win{x, y, lvl.win_w, lvl.win_h};
        const double norm = p.normalize ? window_norm(ii, win) : 1.0;
        if (detail::run_compiled(stages, ii, x, y, norm)) hits.push_back(win);
      }
    }
  }
  return hits;
}

// Groups raw hits transitively by IoU >= merge_iou; groups with at least
// min_neighbors members are reported as their mean box, most-supported first.
inline std::vector<Detection> merge_detections(const std::vector<Rect>& raw,
                                               double merge_iou, int min_neighbors) {
  const std::size_t n = raw.size();
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<std::size_t(std::size_t)> find = [&](std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (iou(raw[i], raw[j]) >= merge_iou) {
        const auto a = find(i), b = find(j);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
      }

  struct Acc {
    double x = 0, y = 0, w = 0, h = 0;
    int n = 0;
  };
  std::vector<Acc> acc(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& a = acc[find(i)];
    a.x += raw[i].x;
    a.y += raw[i].y;
    a.w += raw[i].w;
    a.h += raw[i].h;
    ++a.n;
  }
  std::vector<Detection> out;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = acc[i];
    if (a.n == 0 || a.n < min_neighbors) continue;
    out.push_back({{int(std::lround(a.x / a.n)), int(std::lround(a.y / a.n)),
                    int(std::lround(a.w / a.n)), int(std::lround(a.h / a.n))},
                   a.n});
  }
  std::stable_sort(out.begin(), out.end(), [](const Detection& a, const Detection& b) {
    return a.neighbors > b.neighbors;
  });
  return out;
}

inline std::vector<Detection> detect_multiscale(const Cascade& c, const IntegralImage& ii,
                                                const ScanParams& p) {
  if (ii.width() < c.window_w || ii.height() < c.window_h) return {};
  return merge_detections(scan_raw(c, ii, p), p.merge_iou, p.min_neighbors);
}

inline std::vector<Detection> detect_multiscale(const Cascade& c, const Image& img,
                                                const ScanParams& p) {
  return detect_multiscale(c, integral(ensure_gray(img)), p);
}

// ---------------------------------------------------------------------------
// Frontal / profile interleave

enum class DetectionSource { None, Frontal, Profile, Tracked };

inline const char* to_string(DetectionSource s) {
  switch (s) {
    case DetectionSource::None: return "none";
    case DetectionSource::Frontal: return "frontal";
    case DetectionSource::Profile: return "profile";
    case DetectionSource::Tracked: return "tracked";
  }
  return "?";
}

struct InterleaveState {
  std::uint64_t frame = 0;
  std::optional<Rect> last_box;
  DetectionSource last_source = DetectionSource::None;
};

enum class OutcomeKind { Box, FallBackToTracking, Nothing };

struct DetectionOutcome {
  OutcomeKind kind = OutcomeKind::Nothing;
  Rect box;
  DetectionSource source = DetectionSource::None;
  int neighbors = 0;
};

inline DetectionSource scheduled_source(std::uint64_t frame) {
  return frame % 2 == 0 ? DetectionSource::Frontal : DetectionSource::Profile;
}

using BoxVerifier = std::function<bool(const Rect&)>;

// Runs the cascade scheduled for this frame; on a miss (no detection, or every
// detection rejected by `verify`) retries the other cascade on the same frame.
// A missing cascade counts as a miss.
inline DetectionOutcome interleaved_detect(InterleaveState& state, const Cascade* frontal,
                                           const Cascade* profile, const IntegralImage& ii,
                                           const ScanParams& scan, bool landmarks_initialized,
                                           const BoxVerifier& verify = {}) {
  const DetectionSource first = scheduled_source(state.frame);
  const DetectionSource second =
      first == DetectionSource::Frontal ? DetectionSource::Profile : DetectionSource::Frontal;
  ++state.frame;

  for (auto src : {first, second}) {
    const Cascade* c = src == DetectionSource::Frontal ? frontal : profile;
    if (c == nullptr) continue;
    for (const auto& d : detect_multiscale(*c, ii, scan)) {
      if (verify && !verify(d.box)) continue;
      state.last_box = d.box;
      state.last_source = src;
      return {OutcomeKind::Box, d.box, src, d.neighbors};
    }
  }
  if (landmarks_initialized) {
    state.last_source = DetectionSource::Tracked;
    return {OutcomeKind::FallBackToTracking, state.last_box.value_or(Rect{}),
            DetectionSource::Tracked, 0};
  }
  state.last_source = DetectionSource::None;
  return {};
}

// ---------------------------------------------------------------------------
// AdaBoost

struct TrainingSample {
  IntegralImage ii;  // integral of one base-window-sized patch
  int label = 0;     // 1 = target, 0 = background
};

inline TrainingSample make_sample(const Image& patch, int label) {
  return {integral(ensure_gray(patch)), label};
}

struct BoostRound {
  std::size_t feature_index = 0;
  double error = 0;       // weighted error of the chosen weak classifier
  double alpha = 0;
  double weight_sum = 0;  // sum of sample weights after renormalization
};

// Discrete AdaBoost over a fixed feature pool. Feature values for every
// (feature, sample) pair are computed once, and each feature's sample order is
// sorted once, so a round is a linear sweep per feature.
class BoostTrainer {
 public:
  BoostTrainer(std::span<const TrainingSample> samples, std::vector<RectFeature> pool,
               int base_w = 24, int base_h = 24, bool normalize = true)
      : pool_(std::move(pool)), base_w_(base_w), base_h_(base_h), normalize_(normalize) {
    if (pool_.empty()) fail(ErrorKind::InvalidInput, "empty feature pool");
    if (samples.empty()) fail(ErrorKind::InvalidInput, "no training samples");
    n_ = samples.size();
    labels_.resize(n_);
    std::size_t positives = 0;
    for (std::size_t i = 0; i < n_; ++i) {
      labels_[i] = samples[i].label == 1 ? 1 : 0;
      positives += labels_[i];
    }
    if (positives == 0 || positives == n_)
      fail(ErrorKind::DegenerateTraining, "training needs both target and background samples");

    values_.resize(pool_.size() * n_);
    order_.resize(pool_.size() * n_);
    const Window base_window{0, 0, 1.0};
    std::vector<double> norms(n_);
    for (std::size_t i = 0; i < n_; ++i)
      norms[i] = make_context(samples[i].ii, base_window, base_w, base_h, normalize).norm;
    for (std::size_t f = 0; f < pool_.size(); ++f) {
      const ScaledFeature sf = scale_feature(pool_[f], 1.0);
      double* vals = &values_[f * n_];
      for (std::size_t i = 0; i < n_; ++i) vals[i] = sf.value(samples[i].ii, 0, 0) / norms[i];
      std::uint32_t* ord = &order_[f * n_];
      std::iota(ord, ord + n_, 0u);
      std::stable_sort(ord, ord + n_, [vals](std::uint32_t a, std::uint32_t b) {
        return vals[a] < vals[b];
      });
    }

    // Class-balanced initial weights.
    weights_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i)
      weights_[i] = labels_[i] ? 0.5 / double(positives) : 0.5 / double(n_ - positives);
  }

  // Adds one weak classifier; throws DegenerateTraining if the best weighted
  // error is not below 0.5.
  BoostedWeak step() {
    double best_err = std::numeric_limits<double>::infinity();
    std::size_t best_f = 0;
    double best_theta = 0;
    int best_p = 1;

    double total_pos = 0, total_neg = 0;
    for (std::size_t i = 0; i < n_; ++i) (labels_[i] ? total_pos : total_neg) += weights_[i];

    for (std::size_t f = 0; f < pool_.size(); ++f) {
      const double* vals = &values_[f * n_];
      const std::uint32_t* ord = &order_[f * n_];
      // Split "below everything": h=1 for f<theta holds for no sample.
      double below_pos = 0, below_neg = 0;
      auto consider = [&](double theta) {
        const double err_plus = below_neg + (total_pos - below_pos);
        const double err_minus = below_pos + (total_neg - below_neg);
        if (err_plus < best_err) {
          best_err = err_plus, best_f = f, best_theta = theta, best_p = 1;
        }
        if (err_minus < best_err) {
          best_err = err_minus, best_f = f, best_theta = theta, best_p = -1;
        }
      };
      consider(vals[ord[0]] - 1.0);
      for (std::size_t k = 0; k < n_; ++k) {
        const std::uint32_t i = ord[k];
        (labels_[i] ? below_pos : below_neg) += weights_[i];
        if (k + 1 < n_) {
          const double a = vals[i], b = vals[ord[k + 1]];
          if (a < b) consider(a + (b - a) / 2);
        } else {
          consider(vals[i] + 1.0);
        }
      }
    }

    if (!(best_err < 0.5))
      fail(ErrorKind::DegenerateTraining,
           "no weak classifier beats chance (weighted error " + text::fmt(best_err) + ")");

    const double eps = std::clamp(best_err, 1e-12, 1.0);
    const double alpha = std::log((1.0 - eps) / eps);
    WeakClassifier weak{pool_[best_f], best_theta, best_p};

    const double* vals = &values_[best_f * n_];
    double sum = 0;
    for (std::size_t i = 0; i < n_; ++i) {
      if (eval_weak(weak, vals[i]) != labels_[i]) weights_[i] *= std::exp(alpha);
      sum += weights_[i];
    }
    double renorm = 0;
    for (auto& w : weights_) renorm += (w /= sum);

    rounds_.push_back({best_f, best_err, alpha, renorm});
    return {std::move(weak), alpha};
  }

  std::span<const double> weights() const { return weights_; }
  const std::vector<BoostRound>& rounds() const { return rounds_; }
  const std::vector<RectFeature>& pool() const { return pool_; }
  std::size_t sample_count() const { return n_; }

  // Precomputed value of pool feature f on sample i.
  double value(std::size_t f, std::size_t i) const { return values_[f * n_ + i]; }

 private:
  std::vector<RectFeature> pool_;
  int base_w_, base_h_;
  bool normalize_;
  std::size_t n_ = 0;
  std::vector<int> labels_;
  std::vector<double> values_;
  std::vector<std::uint32_t> order_;
  std::vector<double> weights_;
  std::vector<BoostRound> rounds_;
};

// T rounds of discrete AdaBoost; the strong threshold is half the total alpha.
inline StrongClassifier train_adaboost(std::span<const TrainingSample> samples,
                                       std::vector<RectFeature> pool, int rounds,
                                       int base_w = 24, int base_h = 24, bool normalize = true,
                                       std::vector<BoostRound>* history = nullptr) {
  if (rounds < 1) fail(ErrorKind::InvalidInput, "AdaBoost needs at least one round");
  BoostTrainer trainer(samples, std::move(pool), base_w, base_h, normalize);
  StrongClassifier s;
  double alpha_sum = 0;
  for (int t = 0; t < rounds; ++t) {
    s.weak.push_back(trainer.step());
    alpha_sum += s.weak.back().alpha;
  }
  s.threshold = alpha_sum / 2;
  if (history) *history = trainer.rounds();
  return s;
}

// ---------------------------------------------------------------------------
// Cascade training (desk scale)

struct CascadeTrainParams {
  int max_stages = 8;
  double min_detection = 0.99;       // per-stage hit rate on positives
  double max_false_positive = 0.5;   // per-stage false-positive rate
  int max_weak_per_stage = 40;
  double target_false_positive = 1e-4;
  std::size_t negatives_per_stage = 0;  // 0 = same count as positives
  std::size_t mining_attempts = 200000;
  int pool_stride = 2;
  std::size_t pool_cap = 50000;
  bool normalize = true;
  std::uint64_t seed = 1;
};

// Trains stages until the estimated false-positive rate reaches the target,
// the stage budget runs out, or no background window survives the cascade.
// Negatives for each stage are windows drawn at random positions and scales
// from `backgrounds` that the cascade built so far still accepts.
inline Cascade train_cascade(const std::vector<Image>& positives,
                             const std::vector<Image>& backgrounds,
                             const CascadeTrainParams& p, std::string label = "frontal",
                             int base_w = 24, int base_h = 24) {
  if (positives.empty()) fail(ErrorKind::DegenerateTraining, "no positive patches");
  if (backgrounds.empty()) fail(ErrorKind::DegenerateTraining, "no background images");

  Cascade cascade;
  cascade.window_w = base_w;
  cascade.window_h = base_h;
  cascade.label = std::move(label);

  std::vector<TrainingSample> pos;
  for (const auto& img : positives) {
    const Image g = ensure_gray(img);
    pos.push_back(make_sample(g.width() == base_w && g.height() == base_h
                                  ? g
                                  : resize_bilinear(g, base_w, base_h),
                              1));
  }
  std::vector<Image> bg_gray;
  std::vector<IntegralImage> bg;
  for (const auto& img : backgrounds) {
    bg_gray.push_back(ensure_gray(img));
    bg.push_back(integral(bg_gray.back()));
  }

  const auto pool = make_feature_pool(base_w, base_h, p.pool_stride, p.pool_cap);
  const std::size_t want_neg = p.negatives_per_stage ? p.negatives_per_stage : pos.size();
  std::mt19937_64 rng(p.seed);
  double overall_fp = 1.0;

  for (int stage = 0; stage < p.max_stages && overall_fp > p.target_false_positive; ++stage) {
    std::vector<TrainingSample> neg;
    std::size_t attempts = 0;
    while (neg.size() < want_neg && attempts < p.mining_attempts) {
      ++attempts;
      const auto& ii = bg[rng() % bg.size()];
      const int max_side = std::min(ii.width() * base_h / base_w, ii.height());
      if (max_side < base_h) continue;
      const int wh = base_h + int(rng() % std::uint64_t(max_side - base_h + 1));
      const double scale = double(wh) / base_h;
      const int ww = scaled_size(base_w, scale);
      if (ww > ii.width()) continue;
      const int x = int(rng() % std::uint64_t(ii.width() - ww + 1));
      const int y = int(rng() % std::uint64_t(ii.height() - scaled_size(base_h, scale) + 1));
      const Window w{x, y, scale};
      if (!eval_cascade(cascade, ii, w, p.normalize).accepted) continue;
      const Image patch = crop(bg_gray[&ii - bg.data()], {x, y, ww, scaled_size(base_h, scale)});
      neg.push_back(make_sample(
          patch.width() == base_w && patch.height() == base_h
              ? patch
              : resize_bilinear(patch, base_w, base_h),
          0));
    }
    if (neg.empty()) break;  // nothing left to reject

    std::vector<TrainingSample> all = pos;
    all.insert(all.end(), neg.begin(), neg.end());
    BoostTrainer trainer(all, pool, base_w, base_h, p.normalize);

    StrongClassifier sc;
    std::vector<double> pos_scores(pos.size(), 0.0), neg_scores(neg.size(), 0.0);
    double stage_fp = 1.0;
    for (int t = 0; t < p.max_weak_per_stage; ++t) {
      BoostedWeak bw;
      try {
        bw = trainer.step();
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::DegenerateTraining && !sc.weak.empty()) break;
        throw;
      }
      const std::size_t f = trainer.rounds().back().feature_index;
      for (std::size_t i = 0; i < pos.size(); ++i)
        if (eval_weak(bw.weak, trainer.value(f, i))) pos_scores[i] += bw.alpha;
      for (std::size_t i = 0; i < neg.size(); ++i)
        if (eval_weak(bw.weak, trainer.value(f, pos.size() + i))) neg_scores[i] += bw.alpha;
      sc.weak.push_back(std::move(bw));

      // Highest threshold that keeps min_detection of the positives.
      std::vector<double> sorted = pos_scores;
      std::sort(sorted.begin(), sorted.end(), std::greater<>());
      const auto keep = std::size_t(std::ceil(p.min_detection * double(sorted.size())));
      sc.threshold = sorted[std::clamp<std::size_t>(keep, 1, sorted.size()) - 1];
      const auto fp = std::count_if(neg_scores.begin(), neg_scores.end(),
                                    [&](double s) { return s >= sc.threshold; });
      stage_fp = double(fp) / double(neg.size());
      if (stage_fp <= p.max_false_positive) break;
    }
    cascade.stages.push_back(std::move(sc));
    // Zero misses on a finite sample is not a zero rate; mining decides when to stop.
    overall_fp *= std::max(stage_fp, 1.0 / double(neg.size() + 1));
  }
  return cascade;
}

// ---------------------------------------------------------------------------
// .cascade text format

inline void write_cascade(std::ostream& out, const Cascade& c) {
  out << "visage-cascade 1\n";
  out << "window " << c.window_w << ' ' << c.window_h << '\n';
  out << "label " << c.label << '\n';
  out << "stages " << c.stages.size() << '\n';
  for (const auto& st : c.stages) {
    out << "stage " << text::fmt(st.threshold) << ' ' << st.weak.size() << '\n';
    for (const auto& bw : st.weak) {
      const auto& f = bw.weak.feature;
      out << "weak " << to_string(f.kind) << ' ' << f.rects.size();
      for (const auto& wr : f.rects)
        out << ' ' << wr.rect.x << ' ' << wr.rect.y << ' ' << wr.rect.w << ' ' << wr.rect.h
            << ' ' << text::fmt(wr.weight);
      out << ' ' << text::fmt(bw.weak.threshold) << ' ' << bw.weak.polarity << ' '
          << text::fmt(bw.alpha) << '\n';
    }
  }
}

inline Cascade read_cascade(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  auto next = [&](std::string_view keyword, std::size_t min_fields) {
    while (std::getline(in, line)) {
      ++lineno;
      auto f = text::split_ws(line);
      if (f.empty() || f[0].starts_with('#')) continue;
      if (f[0] != keyword)
        throw ParseError(lineno, "expected '" + std::string(keyword) + "', got '" +
                                     std::string(f[0]) + "'");
      if (f.size() < min_fields) throw ParseError(lineno, "too few fields");
      return f;
    }
    throw ParseError(lineno + 1, "unexpected end of file, expected '" +
                                     std::string(keyword) + "'");
  };

  Cascade c;
  auto hdr = next("visage-cascade", 2);
  if (hdr[1] != "1") throw ParseError(lineno, "unsupported cascade version");
  auto win = next("window", 3);
  c.window_w = int(text::to_int(win[1], lineno));
  c.window_h = int(text::to_int(win[2], lineno));
  if (c.window_w < 1 || c.window_h < 1) throw ParseError(lineno, "bad window size");
  auto lab = next("label", 2);
  c.label = std::string(lab[1]);
  auto nst = next("stages", 2);
  const auto stage_count = text::to_int(nst[1], lineno);
  if (stage_count < 0) throw ParseError(lineno, "negative stage count");
  for (long long s = 0; s < stage_count; ++s) {
    auto st = next("stage", 3);
    StrongClassifier sc;
    sc.threshold = text::to_double(st[1], lineno);
    const auto nweak = text::to_int(st[2], lineno);
    if (nweak < 0) throw ParseError(lineno, "negative weak count");
    for (long long k = 0; k < nweak; ++k) {
      auto wk = next("weak", 3);
      BoostedWeak bw;
      auto kind = parse_feature_kind(wk[1]);
      if (!kind) throw ParseError(lineno, "unknown feature kind '" + std::string(wk[1]) + "'");
      bw.weak.feature.kind = *kind;
      const auto nrects = text::to_int(wk[2], lineno);
      if (nrects < 1 || nrects > 4) throw ParseError(lineno, "feature needs 1..4 rects");
      if (wk.size() != std::size_t(3 + 5 * nrects + 3))
        throw ParseError(lineno, "wrong field count for weak classifier");
      std::size_t i = 3;
      for (long long r = 0; r < nrects; ++r, i += 5) {
        WeightedRect wr;
        wr.rect = {int(text::to_int(wk[i], lineno)), int(text::to_int(wk[i + 1], lineno)),
                   int(text::to_int(wk[i + 2], lineno)), int(text::to_int(wk[i + 3], lineno))};
        wr.weight = text::to_double(wk[i + 4], lineno);
        if (!wr.rect.inside(c.window_w, c.window_h) || wr.rect.empty())
          throw ParseError(lineno, "feature rect outside the base window");
        bw.weak.feature.rects.push_back(wr);
      }
      bw.weak.threshold = text::to_double(wk[i], lineno);
      bw.weak.polarity = int(text::to_int(wk[i + 1], lineno));
      if (bw.weak.polarity != 1 && bw.weak.polarity != -1)
        throw ParseError(lineno, "polarity must be +1 or -1");
      bw.alpha = text::to_double(wk[i + 2], lineno);
      if (bw.alpha < 0) throw ParseError(lineno, "negative alpha");
      sc.weak.push_back(std::move(bw));
    }
    c.stages.push_back(std::move(sc));
  }
  return c;
}

inline void save_cascade(const std::string& path, const Cascade& c) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Io, "cannot write cascade file: " + path);
  write_cascade(out, c);
}

inline Cascade load_cascade(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open cascade file: " + path);
  return read_cascade(in);
}

}  // namespace visage
