#pragma once

// Seeded generator of schematic face sequences with known ground truth:
// a skin-toned ellipse carrying brows, eyes, nostrils and a mouth on a tiled
// background, deformed per expression class over the sequence.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "visage/error.hpp"
#include "visage/image.hpp"

namespace visage {

enum class Expression : int { Neutral = 0, Smile = 1, Angry = 2, Excited = 3 };

inline constexpr std::array<const char*, 4> kExpressionNames{"Neutral", "Smile", "Angry",
                                                             "Excited"};

inline std::optional<int> parse_expression(std::string_view s) {
  for (std::size_t i = 0; i < kExpressionNames.size(); ++i)
    if (s == kExpressionNames[i]) return int(i);
  return std::nullopt;
}

// Per-frame deformation, in pixels.
struct Deformation {
  double mouth_spread = 0;  // each mouth corner moves outward
  double mouth_lift = 0;    // mouth corners rise
  double mouth_narrow = 0;  // each mouth corner moves inward
  double mouth_open = 0;    // lower lip moves down
  double brow_shift = 0;    // positive = down
};

struct SyntheticSpec {
  std::uint64_t seed = 7;
  int frames = 40;
  int width = 320;
  int height = 240;
  int sequences_per_class = 5;
  std::vector<int> classes{0, 1, 2, 3};
  double amplitude = 0.07;  // full deformation as a fraction of face size
  int ramp_frames = 10;     // frames to reach full deformation
  int noise = 3;            // uniform per-channel noise amplitude
  double face_min = 90;     // face box side range, pixels
  double face_max = 110;
  int margin = 16;          // minimum distance from face box to frame edge
  int occlude_from = -1;    // frames in [occlude_from, occlude_to) omit the face
  int occlude_to = -1;
};

// Fixed per-sequence appearance.
struct FaceGeometry {
  Rect box;                        // square face box
  std::array<int, 3> skin{210, 160, 130};
  std::array<double, 8> jitter{};  // per-feature offsets as a fraction of the side
  bool profile = false;
};

namespace synth {

inline std::uint64_t mix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline void fill_rect(Image& img, double x0, double y0, double x1, double y1,
                      std::array<int, 3> rgb) {
  const int ix0 = std::max(0, int(std::lround(x0))), iy0 = std::max(0, int(std::lround(y0)));
  const int ix1 = std::min(img.width(), int(std::lround(x1)));
  const int iy1 = std::min(img.height(), int(std::lround(y1)));
  for (int y = iy0; y < iy1; ++y)
    for (int x = ix0; x < ix1; ++x)
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = std::uint8_t(rgb[c]);
}

inline void fill_ellipse(Image& img, double cx, double cy, double a, double b,
                         std::array<int, 3> rgb) {
  const int y0 = std::max(0, int(cy - b) - 1), y1 = std::min(img.height(), int(cy + b) + 2);
  const int x0 = std::max(0, int(cx - a) - 1), x1 = std::min(img.width(), int(cx + a) + 2);
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) {
      const double u = (x + 0.5 - cx) / a, v = (y + 0.5 - cy) / b;
      if (u * u + v * v <= 1.0)
        for (int c = 0; c < 3; ++c) img.at(x, y, c) = std::uint8_t(rgb[c]);
    }
}

inline constexpr std::array<int, 3> kBrow{55, 38, 30};
inline constexpr std::array<int, 3> kEyeWhite{238, 238, 232};
inline constexpr std::array<int, 3> kPupil{25, 25, 30};
inline constexpr std::array<int, 3> kNostril{85, 45, 40};
inline constexpr std::array<int, 3> kLip{135, 35, 45};
inline constexpr std::array<int, 3> kTeeth{245, 245, 240};

}  // namespace synth

// Tiled, low-contrast blue-grey background.
inline Image render_background(int width, int height, std::uint64_t seed) {
  Image img(width, height, 3);
  std::mt19937_64 rng(seed);
  constexpr int tile = 16;
  for (int ty = 0; ty < height; ty += tile)
    for (int tx = 0; tx < width; tx += tile) {
      const int base = 85 + int(rng() % 30);
      synth::fill_rect(img, tx, ty, tx + tile, ty + tile, {base - 10, base, base + 30});
    }
  return img;
}

// Draws the face into `img` (RGB) at geometry g with deformation d.
inline void render_face(Image& img, const FaceGeometry& g, const Deformation& d) {
  const double L = g.box.w;
  const double bx = g.box.x, by = g.box.y;
  auto X = [&](double f) { return bx + f * L; };
  auto Y = [&](double f) { return by + f * L; };
  const auto& j = g.jitter;

  if (g.profile) {
    // Turned head: narrower ellipse, one visible eye, nose at the edge.
    synth::fill_ellipse(img, X(0.45), Y(0.5), 0.36 * L, 0.48 * L, g.skin);
    synth::fill_rect(img, X(0.22 + j[0]), Y(0.24) + d.brow_shift, X(0.46 + j[0]),
                     Y(0.28) + d.brow_shift, synth::kBrow);
    synth::fill_rect(img, X(0.25 + j[1]), Y(0.34), X(0.42 + j[1]), Y(0.41), synth::kEyeWhite);
    synth::fill_rect(img, X(0.27 + j[1]), Y(0.35), X(0.32 + j[1]), Y(0.40), synth::kPupil);
    synth::fill_rect(img, X(0.70), Y(0.45), X(0.80), Y(0.62), g.skin);
    synth::fill_rect(img, X(0.66), Y(0.58), X(0.71), Y(0.62), synth::kNostril);
    synth::fill_rect(img, X(0.48), Y(0.76), X(0.68), Y(0.82), synth::kLip);
    return;
  }

  synth::fill_ellipse(img, X(0.5), Y(0.5), 0.46 * L, 0.49 * L, g.skin);

  const double brow = d.brow_shift;
  // Brows: left and right, mirrored.
  synth::fill_rect(img, X(0.17 + j[0]), Y(0.24 + j[1]) + brow, X(0.41 + j[0]),
                   Y(0.28 + j[1]) + brow, synth::kBrow);
  synth::fill_rect(img, X(0.59 - j[0]), Y(0.24 + j[1]) + brow, X(0.83 - j[0]),
                   Y(0.28 + j[1]) + brow, synth::kBrow);
  // Eyes with pupils.
  for (int side = 0; side < 2; ++side) {
    const double x0 = side == 0 ? 0.20 + j[2] : 0.60 - j[2];
    synth::fill_rect(img, X(x0), Y(0.34 + j[3]), X(x0 + 0.20), Y(0.42 + j[3]), synth::kEyeWhite);
    synth::fill_rect(img, X(x0 + 0.07), Y(0.35 + j[3]), X(x0 + 0.13), Y(0.41 + j[3]),
                     synth::kPupil);
  }
  // Nostrils.
  synth::fill_rect(img, X(0.40 + j[4]), Y(0.57 + j[5]), X(0.46 + j[4]), Y(0.62 + j[5]),
                   synth::kNostril);
  synth::fill_rect(img, X(0.54 - j[4]), Y(0.57 + j[5]), X(0.60 - j[4]), Y(0.62 + j[5]),
                   synth::kNostril);
  // Mouth: lip block with a teeth strip; corners carry the expression.
  const double spread = d.mouth_spread - d.mouth_narrow;
  const double mx0 = X(0.32 + j[6]) - spread, mx1 = X(0.68 - j[6]) + spread;
  const double my0 = Y(0.75 + j[7]), my1 = Y(0.83 + j[7]) + d.mouth_open;
  synth::fill_rect(img, mx0, my0, mx1, my1, synth::kLip);
  synth::fill_rect(img, X(0.41 + j[6]), my0 + 0.02 * L, X(0.59 - j[6]),
                   my1 - 0.03 * L, synth::kTeeth);
  if (d.mouth_lift > 0) {
    // Upturned corners.
    const double cw = 0.05 * L;
    synth::fill_rect(img, mx0, my0 - d.mouth_lift, mx0 + cw, my0, synth::kLip);
    synth::fill_rect(img, mx1 - cw, my0 - d.mouth_lift, mx1, my0, synth::kLip);
  }
}

inline void add_noise(Image& img, int amplitude, std::uint64_t seed) {
  if (amplitude <= 0) return;
  std::mt19937_64 rng(seed);
  const auto span = std::uint64_t(2 * amplitude + 1);
  for (auto& v : img.data()) {
    const int n = int(rng() % span) - amplitude;
    v = std::uint8_t(std::clamp(int(v) + n, 0, 255));
  }
}

// Full-amplitude deformation of one class, for a face of side L.
inline Deformation expression_deformation(int cls, double amplitude, double L) {
  const double a = amplitude * L;
  Deformation d;
  switch (Expression(cls)) {
    case Expression::Neutral: break;
    case Expression::Smile:
      d.mouth_spread = a;
      d.mouth_lift = 0.8 * a;
      break;
    case Expression::Angry:
      d.brow_shift = 0.8 * a;
      d.mouth_narrow = 0.6 * a;
      break;
    case Expression::Excited:
      d.brow_shift = -0.8 * a;
      d.mouth_open = a;
      break;
  }
  return d;
}

inline Deformation scale_deformation(const Deformation& d, double t) {
  return {d.mouth_spread * t, d.mouth_lift * t, d.mouth_narrow * t, d.mouth_open * t,
          d.brow_shift * t};
}

struct SyntheticSequence {
  int label = 0;
  std::string name;
  FaceGeometry geometry;
  std::vector<Deformation> truth;  // per frame
  std::vector<Image> frames;
};

inline FaceGeometry random_geometry(std::mt19937_64& rng, const SyntheticSpec& spec,
                                    bool profile = false) {
  std::uniform_real_distribution<double> side(spec.face_min, spec.face_max);
  std::uniform_real_distribution<double> jit(-0.012, 0.012);
  FaceGeometry g;
  g.profile = profile;
  const int L = int(std::lround(side(rng)));
  const int free_x = spec.width - L - 2 * spec.margin;
  const int free_y = spec.height - L - 2 * spec.margin;
  if (free_x < 0 || free_y < 0)
    fail(ErrorKind::InvalidSpec, "face does not fit inside the frame with the margin");
  g.box = {spec.margin + int(rng() % std::uint64_t(free_x + 1)),
           spec.margin + int(rng() % std::uint64_t(free_y + 1)), L, L};
  g.skin = {195 + int(rng() % 31), 145 + int(rng() % 26), 110 + int(rng() % 31)};
  for (auto& v : g.jitter) v = jit(rng);
  return g;
}

inline void validate(const SyntheticSpec& spec) {
  if (spec.frames < 1 || spec.width < 32 || spec.height < 32 || spec.sequences_per_class < 0)
    fail(ErrorKind::InvalidSpec, "synthetic spec has invalid sizes");
  if (spec.face_min <= 0 || spec.face_max < spec.face_min)
    fail(ErrorKind::InvalidSpec, "invalid face size range");
  if (spec.amplitude < 0 || spec.amplitude > 0.12)
    fail(ErrorKind::InvalidSpec, "deformation amplitude would push features off the face");
  if (spec.face_max + 2 * spec.margin > std::min(spec.width, spec.height))
    fail(ErrorKind::InvalidSpec, "face does not fit inside the frame with the margin");
  for (int c : spec.classes)
    if (c < 0 || c >= int(kExpressionNames.size()))
      fail(ErrorKind::InvalidSpec, "unknown expression class " + std::to_string(c));
}

inline SyntheticSequence generate_sequence(const SyntheticSpec& spec, int cls, int index) {
  const std::uint64_t seq_seed = synth::mix(spec.seed ^ synth::mix(std::uint64_t(cls) * 1000 + std::uint64_t(index)));
  std::mt19937_64 rng(seq_seed);
  SyntheticSequence s;
  s.label = cls;
  s.name = std::string(kExpressionNames[std::size_t(cls)]) + "_" + std::to_string(index);
  s.geometry = random_geometry(rng, spec);
  const double strength = std::uniform_real_distribution<double>(0.85, 1.15)(rng);
  const Deformation full =
      expression_deformation(cls, spec.amplitude * strength, double(s.geometry.box.w));
  const Image bg = render_background(spec.width, spec.height, rng());
  for (int f = 0; f < spec.frames; ++f) {
    const double t = spec.ramp_frames > 0 ? std::min(1.0, double(f) / spec.ramp_frames) : 1.0;
    const Deformation d = scale_deformation(full, t);
    Image frame = bg;
    if (!(f >= spec.occlude_from && f < spec.occlude_to)) render_face(frame, s.geometry, d);
    add_noise(frame, spec.noise, synth::mix(seq_seed + std::uint64_t(f) + 1));
    s.truth.push_back(d);
    s.frames.push_back(std::move(frame));
  }
  return s;
}

// Sequences ordered class-major, in spec.classes order.
inline std::vector<SyntheticSequence> generate_synthetic(const SyntheticSpec& spec) {
  validate(spec);
  std::vector<SyntheticSequence> out;
  for (int cls : spec.classes)
    for (int i = 0; i < spec.sequences_per_class; ++i) out.push_back(generate_sequence(spec, cls, i));
  return out;
}

inline std::string frame_file_name(std::size_t index, bool color) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%06zu.%s", index, color ? "ppm" : "pgm");
  return buf;
}

// Writes each sequence to <dir>/<name>/frame_%06d.ppm with a truth.tsv
// (frame, box, deformation) beside it, and <dir>/manifest.tsv.
inline void write_synthetic(const std::string& dir, const std::vector<SyntheticSequence>& seqs) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::ofstream manifest(fs::path(dir) / "manifest.tsv");
  if (!manifest) fail(ErrorKind::Io, "cannot write manifest in " + dir);
  for (const auto& s : seqs) {
    const fs::path sub = fs::path(dir) / s.name;
    fs::create_directories(sub);
    for (std::size_t f = 0; f < s.frames.size(); ++f)
      save_pnm((sub / frame_file_name(f, s.frames[f].channels() == 3)).string(), s.frames[f]);
    std::ofstream truth(sub / "truth.tsv");
    truth << "frame\tbox_x\tbox_y\tbox_w\tbox_h\tmouth_spread\tmouth_lift\tmouth_narrow\t"
             "mouth_open\tbrow_shift\n";
    for (std::size_t f = 0; f < s.truth.size(); ++f) {
      const auto& d = s.truth[f];
      truth << f << '\t' << s.geometry.box.x << '\t' << s.geometry.box.y << '\t'
            << s.geometry.box.w << '\t' << s.geometry.box.h << '\t' << d.mouth_spread << '\t'
            << d.mouth_lift << '\t' << d.mouth_narrow << '\t' << d.mouth_open << '\t'
            << d.brow_shift << '\n';
    }
    manifest << kExpressionNames[std::size_t(s.label)] << '\t' << s.name << '\n';
  }
}

// ---- detector training corpora ----

struct CascadeCorpus {
  std::vector<Image> positives;    // gray patches, base-window sized
  std::vector<Image> backgrounds;  // gray images containing no centred face
};

// Positives: face-box crops (random expression, small box jitter) resized to
// the base window. Backgrounds: empty scenes plus half-face crops, which
// teach the cascade to reject off-centre windows.
inline CascadeCorpus synthetic_cascade_corpus(std::uint64_t seed, std::size_t n_positive,
                                              std::size_t n_background, bool profile,
                                              int base = 24, const SyntheticSpec& spec = {}) {
  std::mt19937_64 rng(synth::mix(seed ^ (profile ? 0xABCDull : 0x1234ull)));
  CascadeCorpus c;
  std::uniform_real_distribution<double> jitter(-0.04, 0.04);
  for (std::size_t i = 0; i < n_positive; ++i) {
    const FaceGeometry g = random_geometry(rng, spec, profile);
    const int cls = int(rng() % 4);
    const double t = std::uniform_real_distribution<double>(0, 1)(rng);
    Image frame = render_background(spec.width, spec.height, rng());
    render_face(frame, g,
                scale_deformation(expression_deformation(cls, spec.amplitude, g.box.w), t));
    add_noise(frame, spec.noise, rng());
    const double L = g.box.w;
    Rect r{int(std::lround(g.box.x + jitter(rng) * L)), int(std::lround(g.box.y + jitter(rng) * L)),
           int(std::lround(L * (1 + jitter(rng)))), 0};
    r.h = r.w;
    r.x = std::clamp(r.x, 0, spec.width - r.w);
    r.y = std::clamp(r.y, 0, spec.height - r.h);
    c.positives.push_back(resize_bilinear(to_grayscale(crop(frame, r)), base, base));
  }
  for (std::size_t i = 0; i < n_background; ++i) {
    Image frame = render_background(spec.width, spec.height, rng());
    if (i % 2 == 1) {
      const FaceGeometry g = random_geometry(rng, spec, profile);
      render_face(frame, g, {});
      add_noise(frame, spec.noise, rng());
      const Rect b = g.box;
      const int half = b.w / 2;
      // One of four half-face crops, chosen round-robin.
      Rect r;
      switch ((i / 2) % 4) {
        case 0: r = {0, 0, b.x + half, spec.height}; break;
        case 1: r = {b.x + half, 0, spec.width - b.x - half, spec.height}; break;
        case 2: r = {0, 0, spec.width, b.y + half}; break;
        default: r = {0, b.y + half, spec.width, spec.height - b.y - half}; break;
      }
      c.backgrounds.push_back(to_grayscale(crop(frame, r)));
    } else {
      add_noise(frame, spec.noise, rng());
      c.backgrounds.push_back(to_grayscale(frame));
    }
  }
  return c;
}

}  // namespace visage
