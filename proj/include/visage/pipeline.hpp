#pragma once

// Per-frame orchestration (detect -> verify -> landmarks -> track -> smooth ->
// features -> classify), trainer/evaluator sessions, confusion reports,
// throughput benchmarking and sequence manifests.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "visage/cascade.hpp"
#include "visage/error.hpp"
#include "visage/flow.hpp"
#include "visage/image.hpp"
#include "visage/landmarks.hpp"
#include "visage/skin.hpp"
#include "visage/svm.hpp"
#include "visage/synthetic.hpp"
#include "visage/textio.hpp"

namespace visage {

struct SessionConfig {
  std::string frontal_cascade;
  std::string profile_cascade;
  ScanParams scan{.scale_start = 2.5, .scale_factor = 1.15};
  bool skin_enabled = true;
  SkinParams skin;
  FaceRegions regions;
  CornerParams corners;
  FlowParams flow;
  std::size_t smoothing_window = 10;
  bool normalize_features = true;  // divide displacements by inter-ocular distance
  std::vector<double> c_grid = svm::default_c_grid();
  std::vector<double> gamma_grid = svm::default_gamma_grid();
  int folds = 5;
  std::uint64_t cv_seed = 1;
  double svm_tolerance = 1e-3;
  std::vector<std::string> labels{kExpressionNames.begin(), kExpressionNames.end()};

  void validate() const {
    if (smoothing_window < 1) fail(ErrorKind::InvalidInput, "smoothing window must be >= 1");
    if (labels.empty()) fail(ErrorKind::InvalidInput, "label set is empty");
    corners.validate();
    flow.validate();
  }

  std::optional<int> label_id(std::string_view name) const {
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == name) return int(i);
    long long v = 0;
    auto [p, ec] = std::from_chars(name.data(), name.data() + name.size(), v);
    if (ec == std::errc{} && p == name.data() + name.size() && v >= 0 &&
        v < static_cast<long long>(labels.size()))
      return int(v);
    return std::nullopt;
  }
};

struct Detectors {
  std::optional<Cascade> frontal;
  std::optional<Cascade> profile;
};

inline Detectors load_detectors(const SessionConfig& cfg) {
  Detectors d;
  if (!cfg.frontal_cascade.empty()) d.frontal = load_cascade(cfg.frontal_cascade);
  if (!cfg.profile_cascade.empty()) d.profile = load_cascade(cfg.profile_cascade);
  return d;
}

struct StageTimings {
  std::int64_t detect_us = 0;
  std::int64_t skin_us = 0;
  std::int64_t landmarks_us = 0;
  std::int64_t track_us = 0;
  std::int64_t smooth_us = 0;
  std::int64_t classify_us = 0;
  std::int64_t total_us = 0;

  std::int64_t stage_sum() const {
    return detect_us + skin_us + landmarks_us + track_us + smooth_us + classify_us;
  }
};

struct FrameResult {
  std::uint64_t index = 0;
  std::optional<Rect> face;
  DetectionSource source = DetectionSource::None;
  std::optional<double> skin_fraction;  // empty when skin checks were skipped
  bool skin_skipped = false;             // gray input or skin checks disabled
  bool has_landmarks = false;
  LandmarkSet landmarks;
  std::optional<FeatureVector> features;  // set on the last frame of each window
  std::optional<int> predicted;
  std::vector<int> votes;
  StageTimings timings;
};

namespace detail {

class StageClock {
 public:
  StageClock() : start_(std::chrono::steady_clock::now()) {}
  std::int64_t elapsed_us() const {
    return std::chrono::duration_cast<std::chrono::microseconds>(
               std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace detail

// One stateful capture session. Frames must arrive in order; the first
// accepted detection initializes the 21 landmarks and captures the reference
// (neutral) pose. After that, landmarks are carried frame to frame by the
// block-matching tracker so every slot keeps its identity; detections keep
// updating the face box and source.
class Session {
 public:
  Session(SessionConfig cfg, Detectors detectors, std::optional<svm::Model> model = {})
      : cfg_(std::move(cfg)),
        detectors_(std::move(detectors)),
        model_(std::move(model)),
        history_(cfg_.smoothing_window) {
    cfg_.validate();
  }

  const SessionConfig& config() const { return cfg_; }
  bool initialized() const { return history_.initialized(); }
  const TrackHistory& history() const { return history_; }
  std::size_t reference_captures() const { return reference_captures_; }
  std::uint64_t frames_processed() const { return next_index_; }

  void set_model(std::optional<svm::Model> m) { model_ = std::move(m); }
  const std::optional<svm::Model>& model() const { return model_; }

  // The next accepted detection captures a fresh reference.
  void reset_reference() {
    history_.clear_reference();
    landmarks_.reset();
  }

  FrameResult process_frame(const Image& frame) {
    detail::StageClock total;
    if (frame_w_ == 0) {
      frame_w_ = frame.width();
      frame_h_ = frame.height();
    } else if (frame.width() != frame_w_ || frame.height() != frame_h_) {
      fail(ErrorKind::InvalidInput, "frame size " + std::to_string(frame.width()) + "x" +
                                        std::to_string(frame.height()) +
                                        " does not match session size " +
                                        std::to_string(frame_w_) + "x" + std::to_string(frame_h_));
    }

    FrameResult r;
    r.index = next_index_++;
    const bool color = frame.channels() == 3;
    r.skin_skipped = !color || !cfg_.skin_enabled;

    detail::StageClock detect_clock;
    Image gray = ensure_gray(frame);
    const IntegralImage ii = integral(gray);
    std::int64_t skin_us = 0;
    std::optional<double> last_fraction;
    BoxVerifier verify;
    if (!r.skin_skipped) {
      verify = [&](const Rect& box) {
        detail::StageClock c;
        const double f = skin_fraction(frame, box, cfg_.skin).fraction;
        skin_us += c.elapsed_us();
        last_fraction = f;
        return f >= cfg_.skin.min_skin_fraction;
      };
    }
    const DetectionOutcome outcome = interleaved_detect(
        interleave_, detectors_.frontal ? &*detectors_.frontal : nullptr,
        detectors_.profile ? &*detectors_.profile : nullptr, ii, cfg_.scan,
        landmarks_.has_value(), verify);
    r.timings.skin_us = skin_us;
    r.timings.detect_us = std::max<std::int64_t>(0, detect_clock.elapsed_us() - skin_us);
    r.skin_fraction = last_fraction;
    r.source = outcome.source;

    if (outcome.kind == OutcomeKind::Box) {
      r.face = outcome.box;
      if (!landmarks_) {
        detail::StageClock c;
        const RegionRects regions = divide_face(outcome.box, cfg_.regions);
        LandmarkSet set = select_21(gray, regions, cfg_.corners);
        const auto iod = interocular_distance(set);
        if (iod) {
          landmarks_ = set;
          history_.set_reference(set, cfg_.normalize_features ? *iod : 1.0);
          ++reference_captures_;
        }
        r.timings.landmarks_us = c.elapsed_us();
      } else {
        track(gray, r);
      }
    } else if (outcome.kind == OutcomeKind::FallBackToTracking) {
      r.face = interleave_.last_box;
      track(gray, r);
    }

    if (landmarks_) {
      r.has_landmarks = true;
      r.landmarks = *landmarks_;
      history_.push(*landmarks_);
      if (history_.full()) {
        detail::StageClock c;
        const LandmarkSet smoothed = history_.smoothed();
        r.features = feature_vector(smoothed, history_.reference(), history_.interocular());
        history_.clear_frames();
        r.timings.smooth_us = c.elapsed_us();
        if (model_) {
          detail::StageClock k;
          const auto pred = svm::predict(*model_, r.features->as_vector());
          r.predicted = pred.label;
          r.votes = pred.votes;
          r.timings.classify_us = k.elapsed_us();
        }
      }
    }
    prev_gray_ = std::move(gray);
    r.timings.total_us = total.elapsed_us();
    return r;
  }

 private:
  void track(const Image& gray, FrameResult& r) {
    if (!landmarks_ || !prev_gray_) return;
    detail::StageClock c;
    landmarks_ = track_set(*prev_gray_, gray, *landmarks_, cfg_.flow);
    r.timings.track_us = c.elapsed_us();
  }

  SessionConfig cfg_;
  Detectors detectors_;
  std::optional<svm::Model> model_;
  TrackHistory history_;
  InterleaveState interleave_;
  std::optional<LandmarkSet> landmarks_;
  std::optional<Image> prev_gray_;
  std::uint64_t next_index_ = 0;
  std::size_t reference_captures_ = 0;
  int frame_w_ = 0;
  int frame_h_ = 0;
};

// Desk-scale detectors trained on the synthetic face renderer. Settings are
// tuned so both cascades train in a few seconds.
struct SyntheticDetectorParams {
  std::uint64_t seed = 11;
  std::size_t positives = 400;
  std::size_t backgrounds = 300;
  bool profile = true;
  CascadeTrainParams train{.max_stages = 8, .negatives_per_stage = 600, .pool_stride = 3,
                           .pool_cap = 6000};
};

inline Detectors train_synthetic_detectors(const SyntheticDetectorParams& p = {}) {
  Detectors d;
  const auto fc = synthetic_cascade_corpus(p.seed, p.positives, p.backgrounds, false);
  d.frontal = train_cascade(fc.positives, fc.backgrounds, p.train, "frontal");
  if (p.profile) {
    const auto pc = synthetic_cascade_corpus(p.seed, p.positives, p.backgrounds, true);
    d.profile = train_cascade(pc.positives, pc.backgrounds, p.train, "profile");
  }
  return d;
}

// ---------------------------------------------------------------------------
// Labeled sequences and manifests

// Frames come either from memory or from a directory of frame_%06d.pgm|ppm.
struct LabeledSequence {
  int label = 0;
  std::string dir;
  std::vector<Image> frames;
};

// Sorted frame paths of a sequence directory. Numbering must run 0..n-1
// without gaps; a gap is reported by the name of the first missing file.
inline std::vector<std::string> list_frames(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) fail(ErrorKind::Io, "sequence directory not found: " + dir);
  std::map<std::size_t, std::string> found;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (name.size() != 16 || !name.starts_with("frame_")) continue;
    const std::string ext = name.substr(13);
    if (name[12] != '.' || (ext != "pgm" && ext != "ppm")) continue;
    std::size_t idx = 0;
    auto [p, ec] = std::from_chars(name.data() + 6, name.data() + 12, idx);
    if (ec != std::errc{} || p != name.data() + 12) continue;
    found[idx] = e.path().string();
  }
  if (found.empty()) fail(ErrorKind::Io, "no frame_%06d.pgm|ppm files in " + dir);
  std::vector<std::string> out;
  std::size_t expect = 0;
  for (const auto& [idx, path] : found) {
    if (idx != expect)
      fail(ErrorKind::Io, "missing frame file: " +
                              (fs::path(dir) / frame_file_name(expect, path.ends_with("ppm")))
                                  .string());
    out.push_back(path);
    ++expect;
  }
  return out;
}

template <typename Fn>
void for_each_frame(const LabeledSequence& seq, Fn&& fn) {
  if (!seq.frames.empty()) {
    for (const auto& f : seq.frames) fn(f);
    return;
  }
  for (const auto& path : list_frames(seq.dir)) fn(load_pnm(path));
}

// Manifest lines: "label<TAB>dir"; relative dirs resolve against the
// manifest's own directory. Blank lines and '#' comments are skipped.
inline std::vector<LabeledSequence> read_manifest(const std::string& path,
                                                  const SessionConfig& cfg) {
  namespace fs = std::filesystem;
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open manifest: " + path);
  const fs::path base = fs::path(path).parent_path();
  std::vector<LabeledSequence> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError(lineno, "expected label<TAB>dir");
    const auto id = cfg.label_id(line.substr(0, tab));
    if (!id) throw ParseError(lineno, "unknown label '" + line.substr(0, tab) + "'");
    fs::path dir = line.substr(tab + 1);
    if (dir.is_relative()) dir = base / dir;
    out.push_back({*id, dir.string(), {}});
  }
  return out;
}

inline std::vector<LabeledSequence> to_labeled(const std::vector<SyntheticSequence>& seqs) {
  std::vector<LabeledSequence> out;
  for (const auto& s : seqs) out.push_back({s.label, {}, s.frames});
  return out;
}

// Feature vectors of one sequence, one per complete smoothing window.
inline std::vector<FeatureVector> extract_features(const LabeledSequence& seq,
                                                   const SessionConfig& cfg,
                                                   const Detectors& detectors) {
  Session session(cfg, detectors);
  std::vector<FeatureVector> out;
  for_each_frame(seq, [&](const Image& f) {
    auto r = session.process_frame(f);
    if (r.features) out.push_back(*r.features);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Training

struct TrainReport {
  svm::Model model;
  svm::GridResult grid;
  std::vector<std::size_t> vectors_per_class;  // indexed by label id
  std::size_t sequences_without_vectors = 0;
  double training_accuracy = 0;
};

// `groups` names the sequence (or capture) each vector came from; folds keep
// a group together. Empty groups fall back to per-vector folds.
inline TrainReport train_from_samples(const std::vector<svm::Sample>& samples,
                                      const SessionConfig& cfg,
                                      const std::vector<int>& groups = {}) {
  if (samples.empty())
    fail(ErrorKind::EmptyTraining, "no feature vectors were extracted (no faces found)");
  std::vector<int> classes;
  for (const auto& s : samples) classes.push_back(s.label);
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  if (classes.size() < 2)
    fail(ErrorKind::EmptyTraining, "training needs at least two expression classes");

  TrainReport rep;
  rep.vectors_per_class.assign(cfg.labels.size(), 0);
  for (const auto& s : samples)
    if (s.label >= 0 && std::size_t(s.label) < rep.vectors_per_class.size())
      ++rep.vectors_per_class[std::size_t(s.label)];

  const svm::ScalingParams scaling = svm::scale_fit(samples);
  std::vector<svm::Sample> scaled;
  for (const auto& s : samples) scaled.push_back({svm::scale_apply(scaling, s.x), s.label});
  svm::SvmParams base;
  base.tolerance = cfg.svm_tolerance;
  std::size_t units = samples.size();
  std::vector<int> fold_groups = groups;
  if (!fold_groups.empty()) {
    std::vector<int> g = groups;
    std::sort(g.begin(), g.end());
    units = std::size_t(std::unique(g.begin(), g.end()) - g.begin());
    if (units < 2) {  // a single capture cannot be split; fold per vector
      fold_groups.clear();
      units = samples.size();
    }
  }
  const int folds = std::max(2, std::min<int>(cfg.folds, int(units)));
  rep.grid = svm::grid_search(scaled, cfg.c_grid, cfg.gamma_grid, folds, cfg.cv_seed, base,
                              fold_groups);
  svm::SvmParams best = base;
  best.C = rep.grid.C;
  best.gamma = rep.grid.gamma;
  rep.model = svm::train_multiclass(samples, best, scaling);
  std::size_t correct = 0;
  for (const auto& s : samples) correct += svm::predict(rep.model, s.x).label == s.label;
  rep.training_accuracy = double(correct) / double(samples.size());
  return rep;
}

inline std::vector<svm::Sample> collect_samples(const std::vector<LabeledSequence>& seqs,
                                                const SessionConfig& cfg,
                                                const Detectors& detectors,
                                                std::size_t* empty_sequences = nullptr,
                                                std::vector<int>* groups = nullptr) {
  std::vector<svm::Sample> samples;
  std::size_t empty = 0;
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    const auto fvs = extract_features(seqs[i], cfg, detectors);
    if (fvs.empty()) ++empty;
    for (const auto& fv : fvs) {
      samples.push_back({fv.as_vector(), seqs[i].label});
      if (groups) groups->push_back(int(i));
    }
  }
  if (empty_sequences) *empty_sequences = empty;
  return samples;
}

inline TrainReport train_session(const std::vector<LabeledSequence>& seqs,
                                 const SessionConfig& cfg, const Detectors& detectors) {
  cfg.validate();
  std::vector<int> classes;
  for (const auto& s : seqs) classes.push_back(s.label);
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  if (classes.size() < 2)
    fail(ErrorKind::EmptyTraining, "training needs sequences from at least two classes");
  std::size_t empty = 0;
  std::vector<int> groups;
  const auto samples = collect_samples(seqs, cfg, detectors, &empty, &groups);
  TrainReport rep = train_from_samples(samples, cfg, groups);
  rep.sequences_without_vectors = empty;
  return rep;
}

// ---------------------------------------------------------------------------
// Evaluation

// Rows are true classes, columns predicted classes.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t k = 4) : k_(k), counts_(k * k, 0) {}

  static ConfusionMatrix from_counts(const std::vector<std::vector<std::uint64_t>>& rows) {
    ConfusionMatrix m(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != rows.size())
        fail(ErrorKind::InvalidInput, "confusion matrix must be square");
      for (std::size_t j = 0; j < rows.size(); ++j) m.at(i, j) = rows[i][j];
    }
    return m;
  }

  std::size_t size() const { return k_; }
  std::uint64_t& at(std::size_t t, std::size_t p) { return counts_[t * k_ + p]; }
  std::uint64_t at(std::size_t t, std::size_t p) const { return counts_[t * k_ + p]; }
  void add(std::size_t t, std::size_t p) { ++at(t, p); }

  std::uint64_t row_sum(std::size_t t) const {
    std::uint64_t s = 0;
    for (std::size_t p = 0; p < k_; ++p) s += at(t, p);
    return s;
  }
  std::uint64_t trace() const {
    std::uint64_t s = 0;
    for (std::size_t i = 0; i < k_; ++i) s += at(i, i);
    return s;
  }
  std::uint64_t total() const {
    std::uint64_t s = 0;
    for (auto c : counts_) s += c;
    return s;
  }
  // Fractions in [0, 1]; empty when the denominator is zero.
  std::optional<double> class_rate(std::size_t t) const {
    const auto n = row_sum(t);
    if (n == 0) return std::nullopt;
    return double(at(t, t)) / double(n);
  }
  std::optional<double> overall() const {
    const auto n = total();
    if (n == 0) return std::nullopt;
    return double(trace()) / double(n);
  }

 private:
  std::size_t k_;
  std::vector<std::uint64_t> counts_;
};

inline std::string format_percent(std::optional<double> v, int decimals = 2) {
  if (!v) return "n/a";
  std::ostringstream s;
  s << std::fixed << std::setprecision(decimals) << *v * 100.0 << '%';
  return s.str();
}

// Aligned text table: one row per true class with its rate in the last
// column, then a Total line with the overall rate. Optional footnote lines
// follow the table.
inline std::string format_table(const ConfusionMatrix& m, const std::vector<std::string>& labels,
                                const std::vector<std::string>& footnotes = {}) {
  std::size_t w = 8;
  for (const auto& l : labels) w = std::max(w, l.size() + 2);
  std::ostringstream out;
  out << std::left << std::setw(int(w)) << "";
  for (std::size_t j = 0; j < m.size(); ++j) out << std::right << std::setw(int(w)) << labels[j];
  out << std::right << std::setw(10) << "Over all" << '\n';
  for (std::size_t i = 0; i < m.size(); ++i) {
    out << std::left << std::setw(int(w)) << labels[i];
    for (std::size_t j = 0; j < m.size(); ++j) out << std::right << std::setw(int(w)) << m.at(i, j);
    out << std::right << std::setw(10) << format_percent(m.class_rate(i)) << '\n';
  }
  out << std::left << std::setw(int(w * m.size())) << "" << std::right << std::setw(int(w))
      << "Total" << std::setw(10) << format_percent(m.overall()) << '\n';
  for (const auto& f : footnotes) out << "* " << f << '\n';
  return out.str();
}

// The published 4-class confusion counts, kept as a fixed check on the rate
// arithmetic. Its printed overall figure does not follow from the counts.
inline ConfusionMatrix reference_table() {
  return ConfusionMatrix::from_counts({{15, 3, 12, 0}, {5, 18, 5, 2}, {10, 5, 13, 2}, {0, 4, 0, 26}});
}
inline constexpr double kReferencePrintedOverall = 0.5991;

inline std::string reference_footnote(const ConfusionMatrix& m) {
  return "overall is trace/total = " + std::to_string(m.trace()) + "/" +
         std::to_string(m.total()) + " = " + format_percent(m.overall()) +
         "; the published table prints " + format_percent(kReferencePrintedOverall);
}

inline std::string reference_table_report(const std::vector<std::string>& labels) {
  const ConfusionMatrix m = reference_table();
  return format_table(m, labels, {reference_footnote(m)});
}

struct EvalReport {
  ConfusionMatrix sequences{4};      // one vote per sequence (window majority)
  ConfusionMatrix windows{4};        // one vote per smoothing window
  std::vector<std::size_t> unclassified;  // sequences with no window, per true class
  std::vector<std::string> labels;

  double sequence_accuracy() const {
    std::uint64_t n = sequences.total();
    for (auto u : unclassified) n += u;
    return n ? double(sequences.trace()) / double(n) : 0.0;
  }
};

// Window predictions vote for the sequence label; ties go to the lowest id.
inline std::optional<int> majority(const std::vector<int>& predictions, std::size_t k) {
  if (predictions.empty()) return std::nullopt;
  std::vector<int> votes(k, 0);
  for (int p : predictions) ++votes[std::size_t(p)];
  return int(std::max_element(votes.begin(), votes.end()) - votes.begin());
}

inline EvalReport evaluate_session(const svm::Model& model,
                                   const std::vector<LabeledSequence>& seqs,
                                   const SessionConfig& cfg, const Detectors& detectors) {
  if (seqs.empty()) fail(ErrorKind::InvalidInput, "no sequences to evaluate");
  const std::size_t k = cfg.labels.size();
  for (int l : model.labels)
    if (l < 0 || std::size_t(l) >= k)
      fail(ErrorKind::InvalidInput, "model class " + std::to_string(l) + " is not in the label set");
  EvalReport rep{ConfusionMatrix(k), ConfusionMatrix(k), std::vector<std::size_t>(k, 0),
                 cfg.labels};
  for (const auto& seq : seqs) {
    if (seq.label < 0 || std::size_t(seq.label) >= k)
      fail(ErrorKind::InvalidInput, "sequence label outside the label set");
    Session session(cfg, detectors, model);
    std::vector<int> preds;
    for_each_frame(seq, [&](const Image& f) {
      auto r = session.process_frame(f);
      if (r.predicted) preds.push_back(*r.predicted);
    });
    for (int p : preds) rep.windows.add(std::size_t(seq.label), std::size_t(p));
    if (auto m = majority(preds, k))
      rep.sequences.add(std::size_t(seq.label), std::size_t(*m));
    else
      ++rep.unclassified[std::size_t(seq.label)];
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Benchmark

struct StageStats {
  double median_ms = 0;
  double p95_ms = 0;
  double mean_ms = 0;
};

struct BenchmarkReport {
  std::size_t frames = 0;
  std::map<std::string, StageStats> stages;  // per stage plus "total"
  double ms_per_10_frames = 0;
  std::size_t accounting_violations = 0;  // frames where stage sum > total
  std::vector<StageTimings> per_frame;
};

namespace detail {

inline StageStats stats_of(std::vector<double> v) {
  StageStats s;
  if (v.empty()) return s;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  s.median_ms = n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2;
  s.p95_ms = v[std::min(n - 1, std::size_t(std::ceil(0.95 * double(n))) - 1)];
  double sum = 0;
  for (double x : v) sum += x;
  s.mean_ms = sum / double(n);
  return s;
}

}  // namespace detail

inline BenchmarkReport benchmark(const std::vector<LabeledSequence>& seqs,
                                 const SessionConfig& cfg, const Detectors& detectors,
                                 const std::optional<svm::Model>& model = {}) {
  if (seqs.empty()) fail(ErrorKind::InvalidInput, "benchmark needs at least one sequence");
  BenchmarkReport rep;
  for (const auto& seq : seqs) {
    Session session(cfg, detectors, model);
    for_each_frame(seq, [&](const Image& f) {
      rep.per_frame.push_back(session.process_frame(f).timings);
    });
  }
  rep.frames = rep.per_frame.size();
  std::map<std::string, std::vector<double>> series;
  for (const auto& t : rep.per_frame) {
    series["detect"].push_back(t.detect_us / 1000.0);
    series["skin"].push_back(t.skin_us / 1000.0);
    series["landmarks"].push_back(t.landmarks_us / 1000.0);
    series["track"].push_back(t.track_us / 1000.0);
    series["smooth"].push_back(t.smooth_us / 1000.0);
    series["classify"].push_back(t.classify_us / 1000.0);
    series["total"].push_back(t.total_us / 1000.0);
    if (t.stage_sum() > t.total_us) ++rep.accounting_violations;
  }
  for (auto& [name, v] : series) rep.stages[name] = detail::stats_of(v);
  rep.ms_per_10_frames = rep.stages["total"].mean_ms * 10.0;
  return rep;
}

// ---------------------------------------------------------------------------
// Config files: "key = value" lines, optional [section] headers that prefix
// the keys ("[flow]" then "radius = 6" sets flow.radius), '#' comments.

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : v) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

inline bool parse_bool(const std::string& v, std::size_t line) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw ParseError(line, "expected a boolean, got '" + v + "'");
}

inline std::string unquote(std::string v) {
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') return v.substr(1, v.size() - 2);
  return v;
}

}  // namespace detail

inline void apply_config_value(SessionConfig& c, const std::string& key, const std::string& raw,
                               std::size_t line = 0) {
  const std::string v = detail::unquote(raw);
  auto num = [&] { return text::to_double(v, line); };
  auto integer = [&] { return text::to_int(v, line); };
  auto list = [&] {
    std::vector<double> out;
    for (const auto& s : detail::split_list(v)) out.push_back(text::to_double(s, line));
    return out;
  };
  auto region = [&](Region r) {
    const auto l = list();
    if (l.size() != 4) throw ParseError(line, key + " needs x0,y0,x1,y1");
    c.regions[r] = {l[0], l[1], l[2], l[3]};
  };

  if (key == "frontal_cascade") c.frontal_cascade = v;
  else if (key == "profile_cascade") c.profile_cascade = v;
  else if (key == "smoothing_window") c.smoothing_window = std::size_t(integer());
  else if (key == "labels") c.labels = detail::split_list(v);
  else if (key == "features.normalize") c.normalize_features = detail::parse_bool(v, line);
  else if (key == "scan.scale_start") c.scan.scale_start = num();
  else if (key == "scan.scale_factor") c.scan.scale_factor = num();
  else if (key == "scan.scale_max") c.scan.scale_max = num();
  else if (key == "scan.step") c.scan.step = int(integer());
  else if (key == "scan.normalize") c.scan.normalize = detail::parse_bool(v, line);
  else if (key == "scan.merge_iou") c.scan.merge_iou = num();
  else if (key == "scan.min_neighbors") c.scan.min_neighbors = int(integer());
  else if (key == "skin.enabled") c.skin_enabled = detail::parse_bool(v, line);
  else if (key == "skin.hue_low") c.skin.hue_low = num();
  else if (key == "skin.hue_high") c.skin.hue_high = num();
  else if (key == "skin.sat_min") c.skin.sat_min = num();
  else if (key == "skin.val_min") c.skin.val_min = num();
  else if (key == "skin.min_skin_fraction") c.skin.min_skin_fraction = num();
  else if (key == "regions.left_eye") region(Region::LeftEye);
  else if (key == "regions.right_eye") region(Region::RightEye);
  else if (key == "regions.nose") region(Region::Nose);
  else if (key == "regions.mouth") region(Region::Mouth);
  else if (key == "corners.block_size") c.corners.block_size = int(integer());
  else if (key == "corners.quality_level") c.corners.quality_level = num();
  else if (key == "corners.min_distance") c.corners.min_distance = num();
  else if (key == "corners.quotas") {
    const auto l = list();
    if (l.size() != 4) throw ParseError(line, "corners.quotas needs 4 values");
    for (int i = 0; i < 4; ++i) c.corners.quotas[std::size_t(i)] = int(l[std::size_t(i)]);
  } else if (key == "flow.half_w") c.flow.half_w = int(integer());
  else if (key == "flow.half_h") c.flow.half_h = int(integer());
  else if (key == "flow.radius") c.flow.radius = int(integer());
  else if (key == "flow.max_error") {
    if (v.empty() || v == "none") c.flow.max_error.reset();
    else c.flow.max_error = std::uint64_t(integer());
  } else if (key == "svm.c_grid") c.c_grid = list();
  else if (key == "svm.gamma_grid") c.gamma_grid = list();
  else if (key == "svm.folds") c.folds = int(integer());
  else if (key == "svm.seed") c.cv_seed = std::uint64_t(integer());
  else if (key == "svm.tolerance") c.svm_tolerance = num();
  else throw ParseError(line, "unknown config key '" + key + "'");
}

inline SessionConfig parse_config(std::istream& in, SessionConfig base = {}) {
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    if (t.front() == '[') {
      if (t.back() != ']') throw ParseError(lineno, "unterminated section header");
      section = detail::trim(std::string_view(t).substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ParseError(lineno, "expected key = value");
    std::string key = detail::trim(std::string_view(t).substr(0, eq));
    if (!section.empty()) key = section + "." + key;
    apply_config_value(base, key, detail::trim(std::string_view(t).substr(eq + 1)), lineno);
  }
  base.validate();
  return base;
}

inline SessionConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open config file: " + path);
  try {
    return parse_config(in);
  } catch (const ParseError& e) {
    throw Error(ErrorKind::Parse, path + ": " + e.what());
  }
}

}  // namespace visage
