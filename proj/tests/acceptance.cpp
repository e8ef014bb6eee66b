// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "visage/pipeline.hpp"

using namespace visage;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

// Collects the first few mismatches of a criterion.
struct Check {
  bool ok = true;
  std::vector<std::string> notes;
  std::size_t count = 0;

  void expect(bool cond, const std::string& what) {
    ++count;
    if (cond) return;
    ok = false;
    if (notes.size() < 5) notes.push_back(what);
  }
};

struct Outcome {
  bool pass;
  std::string detail;
};

Outcome finish(const Check& c, const std::string& detail) {
  std::string d = detail;
  for (const auto& n : c.notes) d += "; " + n;
  return {c.ok, d};
}

template <typename T>
std::string str(const T& v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

Image random_gray(std::mt19937_64& rng, int w, int h) {
  Image img(w, h, 1);
  for (auto& v : img.data()) v = std::uint8_t(rng() & 0xFF);
  return img;
}

// ---- integral images ----

Outcome integral_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  Check c;
  for (int n = 0; n < 1000; ++n) {
    const int w = 1 + int(rng() % 64), h = 1 + int(rng() % 64);
    const Image img = random_gray(rng, w, h);
    const IntegralImage ii = integral(img);
    for (int k = 0; k < 200; ++k) {
      const int x0 = int(rng() % std::uint64_t(w + 1)), x1 = int(rng() % std::uint64_t(w + 1));
      const int y0 = int(rng() % std::uint64_t(h + 1)), y1 = int(rng() % std::uint64_t(h + 1));
      const Rect r{std::min(x0, x1), std::min(y0, y1), std::abs(x1 - x0), std::abs(y1 - y0)};
      std::int64_t naive = 0;
      for (int y = r.y; y < r.y + r.h; ++y)
        for (int x = r.x; x < r.x + r.w; ++x) naive += img.at(x, y);
      const std::int64_t got = rect_sum(ii, r);
      c.expect(got == naive, "image " + str(n) + " rect " + str(k) + ": " + str(got) + " != " + str(naive));
    }
  }
  const double secs = seconds_since(t0);
  c.expect(secs < 10.0, "runtime " + fixed(secs, 2) + " s");
  return finish(c, str(c.count - 1) + " rect sums exact, " + fixed(secs, 2) + " s (limit 10 s)");
}

// ---- cascade ----

Outcome cascade_equivalence() {
  std::mt19937_64 rng(102);
  const auto pool = make_feature_pool(24, 24, 1, 0);
  Check c;
  const Image img = random_gray(rng, 96, 96);
  const IntegralImage ii = integral(img);
  std::size_t accepted = 0;
  for (int t = 0; t < 1000; ++t) {
    StrongClassifier s;
    const int n = 1 + int(rng() % 5);
    const bool normalize = rng() & 1;
    for (int k = 0; k < n; ++k) {
      const double theta = normalize ? (double(rng() % 2001) - 1000.0) / 4000.0
                                     : double(rng() % 8001) - 4000.0;
      s.weak.push_back({{pool[rng() % pool.size()], theta, (rng() & 1) ? 1 : -1},
                        0.1 + double(rng() % 100) / 50.0});
    }
    double total = 0;
    for (const auto& w : s.weak) total += w.alpha;
    s.threshold = total * double(rng() % 101) / 100.0;
    Cascade cas;
    cas.stages.push_back(s);
    const double scale = 1.0 + double(rng() % 9) * 0.25;
    const int side = scaled_size(24, scale);
    const Window w{int(rng() % std::uint64_t(96 - side + 1)), int(rng() % std::uint64_t(96 - side + 1)), scale};
    const bool a = eval_cascade(cas, ii, w, normalize).accepted;
    const bool b = eval_strong(s, ii, w, 24, 24, normalize).pass;
    c.expect(a == b, "window " + str(t) + " cascade " + str(a) + " strong " + str(b));
    accepted += a;
  }
  // Empty cascade: every position of a 30x30 grid is accepted, by eval and by the scanner.
  const Cascade empty;
  const IntegralImage small = integral(random_gray(rng, 53, 53));
  std::size_t grid_ok = 0;
  for (int y = 0; y < 30; ++y)
    for (int x = 0; x < 30; ++x) grid_ok += eval_cascade(empty, small, {x, y, 1.0}).accepted;
  c.expect(grid_ok == 900, "empty cascade accepted " + str(grid_ok) + "/900");
  ScanParams sp;
  sp.scale_start = 1.0;
  sp.scale_factor = 100.0;  // one level
  const auto raw = scan_raw(empty, small, sp);
  c.expect(raw.size() == 900, "empty cascade scan returned " + str(raw.size()) + "/900");
  return finish(c, "1000/1000 windows agree (" + str(accepted) + " accepted), empty cascade accepts " +
                       str(grid_ok) + "/900 grid positions");
}

Outcome adaboost_sanity() {
  Check c;
  std::mt19937_64 rng(103);
  std::vector<TrainingSample> sep;
  for (int i = 0; i < 40; ++i) {
    Image img(24, 24, 1);
    const bool pos = i % 2 == 0;
    for (int y = 0; y < 24; ++y)
      for (int x = 0; x < 24; ++x) img.at(x, y) = std::uint8_t(((x < 12) == pos ? 180 : 40) + rng() % 20);
    sep.push_back(make_sample(img, pos ? 1 : 0));
  }
  std::vector<BoostRound> hist;
  const auto s = train_adaboost(sep, make_feature_pool(24, 24, 4, 0), 1, 24, 24, true, &hist);
  int wrong = 0;
  for (const auto& smp : sep) wrong += eval_strong(s, smp.ii, {0, 0, 1.0}, 24, 24, true).pass != (smp.label == 1);
  c.expect(wrong == 0, "separable set: " + str(wrong) + " training errors at T=1");
  c.expect(hist.size() == 1 && hist[0].error == 0.0, "separable set: weak error not 0");

  std::vector<TrainingSample> noisy;
  for (int i = 0; i < 80; ++i) noisy.push_back(make_sample(random_gray(rng, 24, 24), i % 3 == 0));
  BoostTrainer trainer(noisy, make_feature_pool(24, 24, 4, 3000), 24, 24, true);
  double worst_sum = 0, worst_err = 0;
  auto sum_dev = [&] {
    double sum = 0;
    for (double w : trainer.weights()) sum += w;
    return std::abs(sum - 1.0);
  };
  worst_sum = sum_dev();
  for (int t = 0; t < 20; ++t) {
    trainer.step();
    worst_sum = std::max(worst_sum, sum_dev());
    worst_err = std::max(worst_err, trainer.rounds().back().error);
  }
  c.expect(worst_sum <= 1e-12, "weight sum off by " + str(worst_sum));
  c.expect(worst_err < 0.5, "weak error reached " + str(worst_err));
  return finish(c, "separable set 0 errors at T=1; 20 rounds: max |sum w - 1| = " + str(worst_sum) +
                       ", max weak error " + fixed(worst_err, 4));
}

// ---- Shi-Tomasi ----

std::vector<Corner> features_oracle(const ScoreMap& m, const Rect& region, const CornerParams& p,
                                    std::size_t max_n) {
  double mx = 0;
  for (int y = region.y; y < region.bottom(); ++y)
    for (int x = region.x; x < region.right(); ++x) mx = std::max(mx, m.at(x, y));
  std::vector<Corner> cand;
  for (int y = region.y; y < region.bottom(); ++y)
    for (int x = region.x; x < region.right(); ++x) {
      const double v = m.at(x, y);
      if (!(v > 0) || v < p.quality_level * mx) continue;
      bool peak = true;
      for (int j = -1; j <= 1; ++j)
        for (int i = -1; i <= 1; ++i) {
          const int nx = x + i, ny = y + j;
          if ((i || j) && nx >= 0 && ny >= 0 && nx < m.width() && ny < m.height() && m.at(nx, ny) > v)
            peak = false;
        }
      if (peak) cand.push_back({x, y, v});
    }
  std::sort(cand.begin(), cand.end(), [](const Corner& a, const Corner& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.y != b.y ? a.y < b.y : a.x < b.x;
  });
  std::vector<Corner> out;
  for (const auto& cd : cand) {
    if (out.size() >= max_n) break;
    bool ok = true;
    for (const auto& o : out)
      if (double(o.x - cd.x) * (o.x - cd.x) + double(o.y - cd.y) * (o.y - cd.y) < p.min_distance * p.min_distance)
        ok = false;
    if (ok) out.push_back(cd);
  }
  return out;
}

Outcome shi_tomasi_oracle() {
  Check c;
  std::mt19937_64 rng(104);
  std::size_t points = 0;
  for (int t = 0; t < 50; ++t) {
    const Image img = random_gray(rng, 32, 32);
    CornerParams p;
    p.min_distance = double(rng() % 8);
    p.quality_level = 0.01 + double(rng() % 30) / 100.0;
    const Rect region{0, 0, 32, 32};
    const std::size_t max_n = 1 + rng() % 60;
    const auto m = min_eigen_map(img, p.block_size);
    const auto got = good_features(img, region, p, max_n);
    const auto want = features_oracle(m, region, p, max_n);
    c.expect(got == want, "image " + str(t) + ": " + str(got.size()) + " vs " + str(want.size()) + " points");
    points += want.size();
  }
  return finish(c, "50/50 images give identical point lists and order (" + str(points) + " points)");
}

// ---- flow ----

std::uint64_t ssd_oracle(const Image& a, const Image& b, int x, int y, int dx, int dy, int hw, int hh) {
  std::uint64_t s = 0;
  for (int v = -hh; v <= hh; ++v)
    for (int u = -hw; u <= hw; ++u) {
      const long long d = (long long)a.at(x + u, y + v) - b.at(x + dx + u, y + dy + v);
      s += std::uint64_t(d * d);
    }
  return s;
}

Outcome flow_recovery() {
  Check c;
  std::mt19937_64 rng(105);
  const Image a = random_gray(rng, 32, 32);
  FlowParams p;
  p.radius = 6;
  int recovered = 0;
  for (int dy = -3; dy <= 3; ++dy)
    for (int dx = -3; dx <= 3; ++dx) {
      Image b(32, 32, 1);
      for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
          const int sx = x - dx, sy = y - dy;
          b.at(x, y) = (sx >= 0 && sy >= 0 && sx < 32 && sy < 32) ? a.at(sx, sy) : std::uint8_t(rng() & 0xFF);
        }
      const auto r = track_point(a, b, {16, 16}, p);
      const bool ok = r.valid && r.delta == Point{dx, dy};
      c.expect(ok, "shift (" + str(dx) + "," + str(dy) + ") gave (" + str(r.delta.x) + "," + str(r.delta.y) + ")");
      recovered += ok;
    }
  int ssd_ok = 0;
  for (int t = 0; t < 1000; ++t) {
    FlowParams q;
    q.half_w = 1 + int(rng() % 5);
    q.half_h = 1 + int(rng() % 5);
    const Image i1 = random_gray(rng, 30, 26), i2 = random_gray(rng, 30, 26);
    const int x = q.half_w + int(rng() % std::uint64_t(30 - 2 * q.half_w));
    const int y = q.half_h + int(rng() % std::uint64_t(26 - 2 * q.half_h));
    const int dx = q.half_w + int(rng() % std::uint64_t(30 - 2 * q.half_w)) - x;
    const int dy = q.half_h + int(rng() % std::uint64_t(26 - 2 * q.half_h)) - y;
    const bool ok = ssd(i1, i2, {x, y}, {dx, dy}, q) == ssd_oracle(i1, i2, x, y, dx, dy, q.half_w, q.half_h);
    c.expect(ok, "ssd case " + str(t));
    ssd_ok += ok;
  }
  return finish(c, str(recovered) + "/49 shifts recovered exactly (R=6), " + str(ssd_ok) + "/1000 ssd cases exact");
}

// ---- Sobel ----

Outcome sobel_checks() {
  Check c;
  static const int kx[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
  auto direct = [](const Image& img, int x, int y, bool dx) {
    std::int32_t s = 0;
    for (int j = -1; j <= 1; ++j)
      for (int i = -1; i <= 1; ++i) {
        const int k = dx ? kx[j + 1][i + 1] : kx[i + 1][j + 1];
        s += k * img.at(std::clamp(x + i, 0, img.width() - 1), std::clamp(y + j, 0, img.height() - 1));
      }
    return s;
  };
  for (bool dx : {true, false}) {
    const auto g = sobel(Image(17, 13, 1, 77), {dx ? 1 : 0, dx ? 0 : 1, 3});
    for (int y = 1; y < 12; ++y)
      for (int x = 1; x < 16; ++x) c.expect(g.at(x, y) == 0, "constant image gradient nonzero");
  }
  Image ramp(40, 9, 1);
  for (int y = 0; y < 9; ++y)
    for (int x = 0; x < 40; ++x) ramp.at(x, y) = std::uint8_t(x);
  const auto gr = sobel(ramp, {1, 0, 3});
  for (int y = 1; y < 8; ++y)
    for (int x = 1; x < 39; ++x) c.expect(gr.at(x, y) == 8, "ramp gave " + str(gr.at(x, y)));
  std::mt19937_64 rng(106);
  std::size_t pixels = 0;
  for (int t = 0; t < 100; ++t) {
    const Image img = random_gray(rng, 3 + int(rng() % 30), 3 + int(rng() % 30));
    for (bool dx : {true, false}) {
      const auto g = sobel(img, {dx ? 1 : 0, dx ? 0 : 1, 3});
      for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) {
          c.expect(g.at(x, y) == direct(img, x, y, dx), "random image " + str(t) + " mismatch");
          ++pixels;
        }
    }
  }
  return finish(c, "constant -> 0, x-ramp -> 8 interior, " + str(pixels) + " random gradients match direct convolution");
}

// ---- shared end-to-end corpus ----

struct E2eRun {
  double accuracy = 0;
  double seconds = 0;
  TrainReport train;
  std::vector<svm::Sample> samples;
  EvalReport eval;
};

const Detectors& detectors() {
  static const Detectors d = train_synthetic_detectors();
  return d;
}

E2eRun run_e2e(std::uint64_t seed) {
  const auto t0 = Clock::now();
  SyntheticSpec spec;
  spec.seed = seed;
  spec.sequences_per_class = 12;
  spec.frames = 40;
  spec.width = 320;
  spec.height = 240;
  std::vector<LabeledSequence> train, test;
  for (const auto& s : generate_synthetic(spec)) {
    const int idx = std::stoi(s.name.substr(s.name.rfind('_') + 1));
    (idx < 8 ? train : test).push_back({s.label, {}, s.frames});
  }
  const SessionConfig cfg;
  E2eRun r;
  std::vector<int> groups;
  r.samples = collect_samples(train, cfg, detectors(), nullptr, &groups);
  r.train = train_from_samples(r.samples, cfg, groups);
  r.eval = evaluate_session(r.train.model, test, cfg, detectors());
  // Unclassified test sequences count as wrong.
  r.accuracy = double(r.eval.sequences.trace()) / double(test.size());
  r.seconds = seconds_since(t0);
  return r;
}

const E2eRun& seed7() {
  static const E2eRun r = [] {
    detectors();
    return run_e2e(7);
  }();
  return r;
}

// ---- SVM ----

double expansion(const svm::BinaryModel& m, const std::vector<double>& v) {
  double s = 0;
  for (std::size_t i = 0; i < m.x.size(); ++i) {
    double d2 = 0;
    for (std::size_t k = 0; k < v.size(); ++k) d2 += (m.x[i][k] - v[k]) * (m.x[i][k] - v[k]);
    s += m.alpha[i] * m.y[i] * std::exp(-m.gamma * d2);
  }
  return s - m.rho;
}

// Largest KKT violation of a trained binary machine.
double kkt_violation(const svm::BinaryModel& m) {
  double worst = 0, balance = 0;
  for (std::size_t i = 0; i < m.x.size(); ++i) {
    const double a = m.alpha[i];
    const double yf = m.y[i] * expansion(m, m.x[i]);
    balance += a * m.y[i];
    if (a < 0 || a > m.C) return INFINITY;
    if (a == 0)
      worst = std::max(worst, 1 - yf);
    else if (a < m.C)
      worst = std::max(worst, std::abs(yf - 1));
    else
      worst = std::max(worst, yf - 1);
  }
  return std::max(worst, std::abs(balance));
}

std::vector<svm::Sample> blobs(std::uint64_t seed, int per_class, int dims, double spread) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0, spread);
  std::vector<svm::Sample> out;
  for (int c = 0; c < 4; ++c)
    for (int i = 0; i < per_class; ++i) {
      svm::Sample s;
      s.label = c;
      for (int d = 0; d < dims; ++d) s.x.push_back((d == 0 ? 4.0 * (c % 2) : d == 1 ? 4.0 * (c / 2) : 0.0) + n(rng));
      out.push_back(s);
    }
  return out;
}

// Pairwise machines of a one-vs-one problem, as train_multiclass builds them.
std::vector<svm::BinaryModel> pairwise(const std::vector<svm::Sample>& data, const svm::SvmParams& p) {
  std::vector<int> labels;
  for (const auto& s : data) labels.push_back(s.label);
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  std::vector<svm::BinaryModel> out;
  for (std::size_t i = 0; i < labels.size(); ++i)
    for (std::size_t j = i + 1; j < labels.size(); ++j) {
      std::vector<std::vector<double>> x;
      std::vector<int> y;
      for (int side : {0, 1})
        for (const auto& s : data)
          if (s.label == labels[side ? j : i]) {
            x.push_back(s.x);
            y.push_back(side ? -1 : 1);
          }
      out.push_back(svm::solve_smo(x, y, p));
    }
  return out;
}

Outcome svm_checks() {
  Check c;
  double worst_kkt = 0;
  std::size_t machines = 0;
  auto kkt = [&](const svm::BinaryModel& m, const std::string& what) {
    const double v = kkt_violation(m);
    worst_kkt = std::max(worst_kkt, v);
    ++machines;
    c.expect(v <= 1e-3, "KKT violation " + str(v) + " on " + what);
  };

  // XOR
  const std::vector<svm::Sample> xr{{{0, 0}, 0}, {{1, 1}, 0}, {{0, 1}, 1}, {{1, 0}, 1}};
  const svm::SvmParams xp{.C = 10, .gamma = 1};
  kkt(svm::train_binary_smo(xr, xp), "XOR");
  const auto xm = svm::train_multiclass(xr, xp);
  int xor_ok = 0;
  for (const auto& s : xr) xor_ok += svm::predict(xm, s.x).label == s.label;
  c.expect(xor_ok == 4, "XOR training accuracy " + str(xor_ok) + "/4");

  // random binary problems across the C/gamma range
  std::mt19937_64 rng(107);
  std::normal_distribution<double> nd(0, 1);
  for (int t = 0; t < 20; ++t) {
    std::vector<std::vector<double>> x;
    std::vector<int> y;
    for (int i = 0; i < 40; ++i) {
      x.push_back({nd(rng), nd(rng), nd(rng)});
      y.push_back(x.back()[0] + 0.5 * nd(rng) > 0 ? 1 : -1);
    }
    if (std::count(y.begin(), y.end(), 1) == 0 || std::count(y.begin(), y.end(), -1) == 0) continue;
    kkt(svm::solve_smo(x, y, {.C = std::ldexp(1.0, t % 7 - 2), .gamma = std::ldexp(1.0, t % 5 - 3)}),
        "random problem " + str(t));
  }

  // decision values against the dual expansion
  const auto data = blobs(108, 15, 2, 0.8);
  std::vector<svm::Sample> two;
  for (const auto& s : data)
    if (s.label < 2) two.push_back(s);
  const auto bm = svm::train_binary_smo(two, {.C = 2, .gamma = 0.5});
  kkt(bm, "blob pair");
  double worst_dec = 0;
  std::uniform_real_distribution<double> u(-2, 6);
  for (int t = 0; t < 500; ++t) {
    const std::vector<double> v{u(rng), u(rng)};
    worst_dec = std::max(worst_dec, std::abs(bm.decision(v) - expansion(bm, v)));
  }
  c.expect(worst_dec <= 1e-9, "decision differs from expansion by " + str(worst_dec));

  // multiclass decision values equal the pairwise machines'
  const svm::SvmParams mp{.C = 4, .gamma = 0.25};
  const auto mc = svm::train_multiclass(data, mp);
  const auto pw = pairwise(data, mp);
  for (std::size_t i = 0; i < pw.size(); ++i) kkt(pw[i], "blob multiclass pair " + str(i));
  for (int t = 0; t < 200; ++t) {
    const std::vector<double> v{u(rng), u(rng)};
    const auto dv = svm::decision_values(mc, v);
    for (std::size_t i = 0; i < pw.size(); ++i)
      worst_dec = std::max(worst_dec, std::abs(dv[i] - expansion(pw[i], v)));
  }
  c.expect(worst_dec <= 1e-9, "multiclass decision differs from expansion by " + str(worst_dec));

  // grid search against enumeration
  const auto grid_data = blobs(109, 10, 2, 1.6);
  const std::vector<double> cs{0.1, 1, 10, 100}, gs{0.05, 0.5, 2};
  const auto g = svm::grid_search(grid_data, cs, gs, 5, 7);
  double best = -1, bc = 0, bg = 0;
  std::size_t cell = 0;
  bool cells_equal = g.cells.size() == cs.size() * gs.size();
  for (double C : cs)
    for (double gm : gs) {
      const double acc = svm::cross_validate(grid_data, {.C = C, .gamma = gm}, 5, 7);
      if (cells_equal) cells_equal = g.cells[cell].accuracy == acc;
      ++cell;
      if (acc > best) best = acc, bc = C, bg = gm;
    }
  c.expect(cells_equal && g.C == bc && g.gamma == bg && g.accuracy == best, "grid search differs from enumeration");

  // save/load
  const auto pdata = blobs(110, 15, 4, 0.6);
  const auto pm = svm::train_multiclass(pdata, {.C = 8, .gamma = 0.3}, svm::scale_fit(pdata));
  std::stringstream model_text, range_text;
  svm::write_model(model_text, pm);
  svm::write_range(range_text, pm.scaling);
  svm::Model back = svm::read_model(model_text);
  back.scaling = svm::read_range(range_text);
  int same = 0;
  std::uniform_real_distribution<double> u4(-1, 5);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> v(4);
    for (auto& x : v) x = u4(rng);
    same += svm::predict(pm, v).label == svm::predict(back, v).label;
  }
  c.expect(same == 100, "round trip preserved " + str(same) + "/100 predictions");

  // the end-to-end model's machines, rebuilt on its scaled training vectors
  const auto& e2e = seed7();
  std::vector<svm::Sample> scaled;
  for (const auto& s : e2e.samples) scaled.push_back({svm::scale_apply(e2e.train.model.scaling, s.x), s.label});
  svm::SvmParams ep;
  ep.C = e2e.train.grid.C;
  ep.gamma = e2e.train.grid.gamma;
  ep.tolerance = SessionConfig{}.svm_tolerance;
  const auto epw = pairwise(scaled, ep);
  for (std::size_t i = 0; i < epw.size(); ++i) kkt(epw[i], "end-to-end pair " + str(i));
  double e2e_dec = 0;
  for (std::size_t s = 0; s < scaled.size(); s += 3) {
    const auto dv = svm::decision_values(e2e.train.model, scaled[s].x);
    for (std::size_t i = 0; i < epw.size(); ++i) e2e_dec = std::max(e2e_dec, std::abs(dv[i] - expansion(epw[i], scaled[s].x)));
  }
  c.expect(e2e_dec <= 1e-9, "end-to-end decision differs from expansion by " + str(e2e_dec));

  return finish(c, "KKT max violation " + str(worst_kkt) + " over " + str(machines) + " machines (tol 1e-3); XOR " +
                       str(xor_ok) + "/4; dual expansion max diff " + str(std::max(worst_dec, e2e_dec)) +
                       "; grid == enumeration over " + str(cell) + " cells; save/load " + str(same) + "/100");
}

// ---- median smoothing ----

Outcome median_checks() {
  Check c;
  std::mt19937_64 rng(111);
  for (int t = 0; t < 500; ++t) {
    std::vector<LandmarkSet> h(10);
    for (auto& s : h)
      for (auto& l : s.points) l = {double(rng() % 200), double(rng() % 200), Region::Nose, rng() % 5 != 0};
    const auto m = median_smooth(h);
    for (int i = 0; i < kLandmarkCount; ++i) {
      std::vector<double> xs, ys;
      for (const auto& s : h)
        if (s.points[i].valid) {
          xs.push_back(s.points[i].x);
          ys.push_back(s.points[i].y);
        }
      c.expect(m.points[i].valid == (xs.size() >= 5), "history " + str(t) + " point " + str(i) + " validity");
      if (xs.empty()) continue;
      std::sort(xs.begin(), xs.end());
      std::sort(ys.begin(), ys.end());
      const std::size_t n = xs.size();
      const double mx = n % 2 ? xs[n / 2] : (xs[n / 2 - 1] + xs[n / 2]) / 2;
      const double my = n % 2 ? ys[n / 2] : (ys[n / 2 - 1] + ys[n / 2]) / 2;
      c.expect(m.points[i].x == mx && m.points[i].y == my, "history " + str(t) + " point " + str(i) + " median");
    }
  }
  std::vector<LandmarkSet> h(10);
  for (auto& s : h)
    for (int i = 0; i < kLandmarkCount; ++i) s.points[i] = {10.0 + i, 20.0 + i, Region::Mouth, true};
  h[6].points[3] = {250, -40, Region::Mouth, true};
  const auto m = median_smooth(h);
  c.expect(m.points[3].x == 13.0 && m.points[3].y == 23.0, "outlier leaked into the median");
  return finish(c, "500/500 histories match the sorting oracle; single outlier gives modal value (" +
                       fixed(m.points[3].x, 1) + ", " + fixed(m.points[3].y, 1) + ")");
}

// ---- confusion table ----

Outcome table_arithmetic() {
  Check c;
  const ConfusionMatrix m = reference_table();
  const double want[4] = {50.0, 60.0, 43.33, 86.67};
  std::string rates;
  for (std::size_t i = 0; i < 4; ++i) {
    const double got = *m.class_rate(i) * 100;
    c.expect(std::abs(got - want[i]) <= 0.05, "class " + str(i) + " rate " + fixed(got, 4));
    rates += (i ? " " : "") + fixed(got, 2);
  }
  c.expect(std::abs(*m.overall() * 100 - 60.0) <= 0.05, "overall " + fixed(*m.overall() * 100, 4));
  c.expect(m.trace() == 72 && m.total() == 120, "trace/total " + str(m.trace()) + "/" + str(m.total()));
  const std::string report = reference_table_report(SessionConfig{}.labels);
  c.expect(report.find("59.91%") != std::string::npos, "report lacks the printed 59.91% footnote");
  return finish(c, "rates " + rates + " %, overall " + str(m.trace()) + "/" + str(m.total()) + " = " +
                       fixed(*m.overall() * 100, 2) + " %, footnote cites 59.91%");
}

// ---- end to end ----

Outcome end_to_end() {
  Check c;
  const auto t0 = Clock::now();
  const auto& r7 = seed7();
  c.expect(r7.accuracy >= 0.90, "seed 7 held-out accuracy " + fixed(r7.accuracy * 100, 1) + " %");
  c.expect(r7.seconds < 300, "seed 7 run took " + fixed(r7.seconds, 1) + " s");
  std::string per_seed = fixed(r7.accuracy * 100, 1);
  int above = r7.accuracy > 0.25;
  for (std::uint64_t seed = 8; seed < 17; ++seed) {
    const auto r = run_e2e(seed);
    c.expect(r.accuracy > 0.25, "seed " + str(seed) + " accuracy " + fixed(r.accuracy * 100, 1) + " %");
    above += r.accuracy > 0.25;
    per_seed += " " + fixed(r.accuracy * 100, 1);
  }
  return finish(c, "seed 7 held-out accuracy " + fixed(r7.accuracy * 100, 1) + " % (>= 90), run " +
                       fixed(r7.seconds, 1) + " s (< 300); " + str(above) + "/10 seeds above 25% [" + per_seed +
                       "]; 10 seeds " + fixed(seconds_since(t0) + r7.seconds, 1) + " s");
}

// ---- throughput ----

Outcome throughput() {
  Check c;
  SyntheticSpec spec;
  spec.sequences_per_class = 1;
  spec.frames = 100;
  spec.classes = {1};
  const auto seqs = to_labeled(generate_synthetic(spec));
  const auto rep = benchmark(seqs, SessionConfig{}, detectors(), seed7().train.model);
  c.expect(rep.frames == 100, "benchmarked " + str(rep.frames) + " frames");
  c.expect(rep.ms_per_10_frames <= 150.0, fixed(rep.ms_per_10_frames, 2) + " ms per 10 frames");
  c.expect(rep.accounting_violations == 0, str(rep.accounting_violations) + " frames with stage sum > total");
  return finish(c, fixed(rep.ms_per_10_frames, 2) + " ms per 10 frames at 320x240 (limit 150), " +
                       str(rep.accounting_violations) + "/" + str(rep.frames) + " accounting violations");
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"integral-image oracle", integral_oracle},
      {"cascade equivalence", cascade_equivalence},
      {"adaboost sanity", adaboost_sanity},
      {"shi-tomasi oracle", shi_tomasi_oracle},
      {"flow recovery", flow_recovery},
      {"sobel", sobel_checks},
      {"svm", svm_checks},
      {"median smoothing", median_checks},
      {"table arithmetic", table_arithmetic},
      {"end-to-end synthetic", end_to_end},
      {"throughput", throughput},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  }
  std::cout << (failed ? "FAILED " + str(failed) + " of " : "all passed: ") << criteria.size() << " criteria\n";
  return failed ? 1 : 0;
}
