#pragma once

// C-SVC with an RBF kernel: min/max scaling, an SMO dual solver, one-vs-one
// multiclass voting, stratified cross-validation with grid search, and
// libSVM-compatible text persistence.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "visage/error.hpp"
#include "visage/textio.hpp"

namespace visage::svm {

struct Sample {
  std::vector<double> x;
  int label = 0;
};

// ---- scaling ----

struct ScalingParams {
  double lower = -1.0;
  double upper = 1.0;
  std::vector<double> min;
  std::vector<double> max;

  bool empty() const { return min.empty(); }
  std::size_t dims() const { return min.size(); }
};

inline ScalingParams scale_fit(std::span<const Sample> samples) {
  if (samples.empty()) fail(ErrorKind::InvalidInput, "scale_fit on an empty set");
  ScalingParams p;
  const std::size_t d = samples.front().x.size();
  p.min.assign(d, std::numeric_limits<double>::infinity());
  p.max.assign(d, -std::numeric_limits<double>::infinity());
  for (const auto& s : samples) {
    if (s.x.size() != d) fail(ErrorKind::InvalidInput, "samples have differing dimensions");
    for (std::size_t i = 0; i < d; ++i) {
      p.min[i] = std::min(p.min[i], s.x[i]);
      p.max[i] = std::max(p.max[i], s.x[i]);
    }
  }
  return p;
}

// Maps each dimension linearly from [min, max] onto [lower, upper]. Constant
// dimensions map to the centre of the target range (0 for [-1, 1]).
inline std::vector<double> scale_apply(const ScalingParams& p, std::span<const double> x) {
  if (p.empty()) return {x.begin(), x.end()};
  if (x.size() != p.dims()) fail(ErrorKind::InvalidInput, "scaling dimension mismatch");
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lo = p.min[i], hi = p.max[i];
    out[i] = hi > lo ? p.lower + (p.upper - p.lower) * (x[i] - lo) / (hi - lo)
                     : (p.lower + p.upper) / 2;
  }
  return out;
}

// ---- kernel ----

// exp(-gamma * |x - y|^2); shorter vectors are treated as zero-padded.
inline double rbf_padded(std::span<const double> x, std::span<const double> y, double gamma) {
  const std::size_t n = std::max(x.size(), y.size());
  double d2 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = (i < x.size() ? x[i] : 0.0) - (i < y.size() ? y[i] : 0.0);
    d2 += d * d;
  }
  return std::exp(-gamma * d2);
}

inline double rbf(std::span<const double> x, std::span<const double> y, double gamma) {
  if (x.size() != y.size()) fail(ErrorKind::InvalidInput, "rbf: vector length mismatch");
  return rbf_padded(x, y, gamma);
}

struct SvmParams {
  double C = 1.0;
  double gamma = 1.0;
  double tolerance = 1e-3;
  std::size_t max_iterations = 1000000;

  void validate() const {
    if (!(C > 0)) fail(ErrorKind::InvalidInput, "C must be > 0");
    if (!(gamma > 0)) fail(ErrorKind::InvalidInput, "gamma must be > 0");
    if (!(tolerance > 0)) fail(ErrorKind::InvalidInput, "tolerance must be > 0");
  }
};

// ---- binary SMO ----

// Dual solution for one two-class problem. Labels are +1 for `positive_class`
// and -1 for `negative_class`; alpha is indexed like the training input.
struct BinaryModel {
  int positive_class = 0;
  int negative_class = 1;
  double gamma = 1;
  double C = 1;
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  std::vector<double> alpha;
  double rho = 0;
  std::size_t iterations = 0;

  double decision(std::span<const double> v) const {
    double s = 0;
    for (std::size_t i = 0; i < x.size(); ++i)
      if (alpha[i] > 0) s += alpha[i] * y[i] * rbf_padded(x[i], v, gamma);
    return s - rho;
  }
};

// Solves min 1/2 a'Qa - e'a subject to y'a = 0, 0 <= a <= C by pairwise
// updates on the maximal violating pair, stopping when the violation gap is
// at most the tolerance.
inline BinaryModel solve_smo(std::vector<std::vector<double>> x, std::vector<int> y,
                             const SvmParams& p) {
  p.validate();
  const std::size_t n = x.size();
  if (n != y.size() || n == 0) fail(ErrorKind::InvalidInput, "smo: bad problem");
  bool has_pos = false, has_neg = false;
  for (int v : y) (v > 0 ? has_pos : has_neg) = true;
  if (!has_pos || !has_neg) fail(ErrorKind::InvalidInput, "binary SVM needs both classes");

  std::vector<double> K(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) K[i * n + j] = K[j * n + i] = rbf_padded(x[i], x[j], p.gamma);
  auto Q = [&](std::size_t i, std::size_t j) { return double(y[i] * y[j]) * K[i * n + j]; };

  const double C = p.C;
  std::vector<double> alpha(n, 0.0), G(n, -1.0);
  auto in_up = [&](std::size_t t) {
    return (y[t] > 0 && alpha[t] < C) || (y[t] < 0 && alpha[t] > 0);
  };
  auto in_low = [&](std::size_t t) {
    return (y[t] < 0 && alpha[t] < C) || (y[t] > 0 && alpha[t] > 0);
  };

  constexpr double kTau = 1e-12;
  std::size_t iter = 0;
  for (; iter < p.max_iterations; ++iter) {
    double gmax = -std::numeric_limits<double>::infinity();
    double gmin = std::numeric_limits<double>::infinity();
    std::size_t i = n, j = n;
    for (std::size_t t = 0; t < n; ++t) {
      const double v = -y[t] * G[t];
      if (in_up(t) && v > gmax) gmax = v, i = t;
      if (in_low(t) && v < gmin) gmin = v, j = t;
    }
    if (i == n || j == n || gmax - gmin <= p.tolerance) break;

    const double ai_old = alpha[i], aj_old = alpha[j];
    if (y[i] != y[j]) {
      double quad = Q(i, i) + Q(j, j) + 2 * Q(i, j);
      if (quad <= 0) quad = kTau;
      const double delta = (-G[i] - G[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0) {
        if (alpha[j] < 0) alpha[j] = 0, alpha[i] = diff;
      } else if (alpha[i] < 0) {
        alpha[i] = 0, alpha[j] = -diff;
      }
      if (diff > 0) {
        if (alpha[i] > C) alpha[i] = C, alpha[j] = C - diff;
      } else if (alpha[j] > C) {
        alpha[j] = C, alpha[i] = C + diff;
      }
    } else {
      double quad = Q(i, i) + Q(j, j) - 2 * Q(i, j);
      if (quad <= 0) quad = kTau;
      const double delta = (G[i] - G[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > C) {
        if (alpha[i] > C) alpha[i] = C, alpha[j] = sum - C;
      } else if (alpha[j] < 0) {
        alpha[j] = 0, alpha[i] = sum;
      }
      if (sum > C) {
        if (alpha[j] > C) alpha[j] = C, alpha[i] = sum - C;
      } else if (alpha[i] < 0) {
        alpha[i] = 0, alpha[j] = sum;
      }
    }
    const double di = alpha[i] - ai_old, dj = alpha[j] - aj_old;
    for (std::size_t t = 0; t < n; ++t) G[t] += Q(i, t) * di + Q(j, t) * dj;
  }

  // rho: mean of y*G over free variables, else the midpoint of the bounds.
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double sum_free = 0;
  std::size_t n_free = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * G[t];
    if (alpha[t] >= C) {
      if (y[t] < 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else if (alpha[t] <= 0) {
      if (y[t] > 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  BinaryModel m;
  m.gamma = p.gamma;
  m.C = C;
  m.rho = n_free > 0 ? sum_free / double(n_free) : (ub + lb) / 2;
  m.x = std::move(x);
  m.y = std::move(y);
  m.alpha = std::move(alpha);
  m.iterations = iter;
  return m;
}

// The lower class id becomes the +1 side.
inline BinaryModel train_binary_smo(std::span<const Sample> samples, const SvmParams& p) {
  std::vector<int> labels;
  for (const auto& s : samples) labels.push_back(s.label);
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  if (labels.size() != 2) fail(ErrorKind::InvalidInput, "binary SVM needs exactly two classes");
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  for (const auto& s : samples) {
    x.push_back(s.x);
    y.push_back(s.label == labels[0] ? 1 : -1);
  }
  BinaryModel m = solve_smo(std::move(x), std::move(y), p);
  m.positive_class = labels[0];
  m.negative_class = labels[1];
  return m;
}

// ---- multiclass model (libSVM layout) ----

struct Model {
  double gamma = 1;
  std::vector<int> labels;                    // ascending
  std::vector<int> nsv;                       // support vectors per class
  std::vector<std::vector<double>> sv;        // grouped by class, label order
  std::vector<std::vector<double>> sv_coef;   // (k - 1) rows x total_sv
  std::vector<double> rho;                    // one per class pair (i < j)
  ScalingParams scaling;

  std::size_t classes() const { return labels.size(); }
};

struct Prediction {
  int label = 0;
  std::vector<int> votes;  // aligned with Model::labels
  std::vector<double> decision_values;
};

// Pairwise decision values of an already-scaled vector, pairs ordered
// (0,1), (0,2), ..., (1,2), ...
inline std::vector<double> decision_values(const Model& m, std::span<const double> x) {
  const std::size_t k = m.classes();
  std::vector<double> kv(m.sv.size());
  for (std::size_t i = 0; i < m.sv.size(); ++i) kv[i] = rbf_padded(m.sv[i], x, m.gamma);
  std::vector<std::size_t> start(k, 0);
  for (std::size_t i = 1; i < k; ++i) start[i] = start[i - 1] + std::size_t(m.nsv[i - 1]);
  std::vector<double> dec;
  std::size_t p = 0;
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j, ++p) {
      double sum = 0;
      const auto& ci = m.sv_coef[j - 1];
      const auto& cj = m.sv_coef[i];
      for (int t = 0; t < m.nsv[i]; ++t) sum += ci[start[i] + t] * kv[start[i] + t];
      for (int t = 0; t < m.nsv[j]; ++t) sum += cj[start[j] + t] * kv[start[j] + t];
      dec.push_back(sum - m.rho[p]);
    }
  return dec;
}

inline Prediction predict_scaled(const Model& m, std::span<const double> x) {
  if (m.labels.empty()) fail(ErrorKind::InvalidInput, "model has no classes");
  Prediction out;
  out.votes.assign(m.classes(), 0);
  out.decision_values = decision_values(m, x);
  std::size_t p = 0;
  for (std::size_t i = 0; i < m.classes(); ++i)
    for (std::size_t j = i + 1; j < m.classes(); ++j, ++p)
      ++out.votes[out.decision_values[p] > 0 ? i : j];
  // max_element returns the first maximum, i.e. the lowest class id.
  out.label = m.labels[std::size_t(std::max_element(out.votes.begin(), out.votes.end()) -
                                   out.votes.begin())];
  return out;
}

inline Prediction predict(const Model& m, std::span<const double> x) {
  const auto scaled = scale_apply(m.scaling, x);
  return predict_scaled(m, scaled);
}

// Trains k(k-1)/2 binary machines and packs them into the shared libSVM
// layout. `scaling` is applied to every sample first and stored in the model.
inline Model train_multiclass(std::span<const Sample> samples, const SvmParams& p,
                              const ScalingParams& scaling = {}) {
  if (samples.empty()) fail(ErrorKind::InvalidInput, "empty training set");
  p.validate();
  Model m;
  m.gamma = p.gamma;
  m.scaling = scaling;
  for (const auto& s : samples) m.labels.push_back(s.label);
  std::sort(m.labels.begin(), m.labels.end());
  m.labels.erase(std::unique(m.labels.begin(), m.labels.end()), m.labels.end());
  const std::size_t k = m.labels.size();

  std::vector<std::vector<std::vector<double>>> by_class(k);
  for (const auto& s : samples) {
    const auto c = std::size_t(std::lower_bound(m.labels.begin(), m.labels.end(), s.label) -
                               m.labels.begin());
    by_class[c].push_back(scale_apply(scaling, s.x));
  }

  // alpha_of[i][j] holds class-i point alphas from pair (i, j), any order.
  std::vector<std::vector<std::vector<double>>> alpha_of(k, std::vector<std::vector<double>>(k));
  std::vector<std::vector<bool>> nonzero(k);
  for (std::size_t c = 0; c < k; ++c) nonzero[c].assign(by_class[c].size(), false);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j) {
      std::vector<std::vector<double>> x = by_class[i];
      x.insert(x.end(), by_class[j].begin(), by_class[j].end());
      std::vector<int> y(by_class[i].size(), 1);
      y.resize(x.size(), -1);
      BinaryModel b = solve_smo(std::move(x), std::move(y), p);
      m.rho.push_back(b.rho);
      const std::size_t ni = by_class[i].size();
      alpha_of[i][j].assign(b.alpha.begin(), b.alpha.begin() + std::ptrdiff_t(ni));
      alpha_of[j][i].assign(b.alpha.begin() + std::ptrdiff_t(ni), b.alpha.end());
      for (std::size_t t = 0; t < ni; ++t) if (b.alpha[t] > 0) nonzero[i][t] = true;
      for (std::size_t t = 0; t < by_class[j].size(); ++t)
        if (b.alpha[ni + t] > 0) nonzero[j][t] = true;
    }

  std::vector<std::vector<std::size_t>> sv_index(k);
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t t = 0; t < by_class[c].size(); ++t)
      if (nonzero[c][t]) {
        sv_index[c].push_back(t);
        m.sv.push_back(by_class[c][t]);
      }
    m.nsv.push_back(int(sv_index[c].size()));
  }
  const std::size_t total = m.sv.size();
  m.sv_coef.assign(k > 1 ? k - 1 : 0, std::vector<double>(total, 0.0));
  std::vector<std::size_t> start(k, 0);
  for (std::size_t c = 1; c < k; ++c) start[c] = start[c - 1] + sv_index[c - 1].size();
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j) {
      for (std::size_t t = 0; t < sv_index[i].size(); ++t)
        m.sv_coef[j - 1][start[i] + t] = alpha_of[i][j][sv_index[i][t]];
      for (std::size_t t = 0; t < sv_index[j].size(); ++t)
        m.sv_coef[i][start[j] + t] = -alpha_of[j][i][sv_index[j][t]];
    }
  return m;
}

// ---- cross-validation ----

// Fold index per sample. Without groups, each class's samples are shuffled
// (Fisher-Yates on mt19937_64) and dealt round-robin across folds, one class
// after another. With groups (e.g. the sequence each window came from), whole
// groups are shuffled and dealt instead, so correlated samples never straddle
// a train/test split. A group takes the label of its first sample.
inline std::vector<int> stratified_folds(std::span<const Sample> samples, int k,
                                         std::uint64_t seed, std::span<const int> groups = {}) {
  if (k < 2) fail(ErrorKind::InvalidInput, "cross-validation needs k >= 2");
  if (!groups.empty() && groups.size() != samples.size())
    fail(ErrorKind::InvalidInput, "one group id per sample required");
  std::vector<int> unit(samples.size());
  std::vector<int> unit_label;
  if (groups.empty()) {
    for (std::size_t i = 0; i < samples.size(); ++i) {
      unit[i] = int(i);
      unit_label.push_back(samples[i].label);
    }
  } else {
    std::map<int, int> index;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      auto [it, fresh] = index.emplace(groups[i], int(unit_label.size()));
      if (fresh) unit_label.push_back(samples[i].label);
      unit[i] = it->second;
    }
  }
  if (std::size_t(k) > unit_label.size())
    fail(ErrorKind::InvalidInput, groups.empty() ? "fewer samples than folds" : "fewer groups than folds");
  std::vector<int> labels = unit_label;
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  std::mt19937_64 rng(seed);
  std::vector<int> unit_fold(unit_label.size(), 0);
  std::size_t deal = 0;
  for (int label : labels) {
    std::vector<std::size_t> idx;
    for (std::size_t u = 0; u < unit_label.size(); ++u)
      if (unit_label[u] == label) idx.push_back(u);
    for (std::size_t i = idx.size(); i > 1; --i) {
      const std::size_t r = std::size_t(rng() % i);
      std::swap(idx[i - 1], idx[r]);
    }
    for (std::size_t u : idx) unit_fold[u] = int(deal++ % std::size_t(k));
  }
  std::vector<int> fold(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) fold[i] = unit_fold[std::size_t(unit[i])];
  return fold;
}

inline double cross_validate(std::span<const Sample> samples, const SvmParams& p, int k,
                             std::uint64_t seed, std::span<const int> groups = {}) {
  const auto fold = stratified_folds(samples, k, seed, groups);
  std::size_t correct = 0;
  for (int f = 0; f < k; ++f) {
    std::vector<Sample> train;
    for (std::size_t i = 0; i < samples.size(); ++i)
      if (fold[i] != f) train.push_back(samples[i]);
    const Model m = train_multiclass(train, p);
    for (std::size_t i = 0; i < samples.size(); ++i)
      if (fold[i] == f && predict(m, samples[i].x).label == samples[i].label) ++correct;
  }
  return double(correct) / double(samples.size());
}

struct GridCell {
  double C = 0;
  double gamma = 0;
  double accuracy = 0;
};

struct GridResult {
  double C = 0;
  double gamma = 0;
  double accuracy = 0;
  std::vector<GridCell> cells;  // C-major, both axes ascending
};

inline std::vector<double> default_c_grid() {
  std::vector<double> g;
  for (int e = -3; e <= 7; e += 2) g.push_back(std::ldexp(1.0, e));
  return g;
}

inline std::vector<double> default_gamma_grid() {
  std::vector<double> g;
  for (int e = -7; e <= 3; e += 2) g.push_back(std::ldexp(1.0, e));
  return g;
}

// Highest CV accuracy wins; ties go to the smaller C, then the smaller gamma.
inline GridResult grid_search(std::span<const Sample> samples, std::vector<double> c_grid,
                              std::vector<double> gamma_grid, int k, std::uint64_t seed,
                              const SvmParams& base = {}, std::span<const int> groups = {}) {
  if (c_grid.empty() || gamma_grid.empty()) fail(ErrorKind::InvalidInput, "empty search grid");
  std::sort(c_grid.begin(), c_grid.end());
  std::sort(gamma_grid.begin(), gamma_grid.end());
  GridResult best;
  best.accuracy = -1;
  for (double C : c_grid)
    for (double g : gamma_grid) {
      SvmParams p = base;
      p.C = C;
      p.gamma = g;
      const double acc = cross_validate(samples, p, k, seed, groups);
      best.cells.push_back({C, g, acc});
      if (acc > best.accuracy) best.C = C, best.gamma = g, best.accuracy = acc;
    }
  return best;
}

// ---- persistence ----

inline void write_model(std::ostream& out, const Model& m) {
  const std::size_t k = m.classes();
  out << "svm_type c_svc\n";
  out << "kernel_type rbf\n";
  out << "gamma " << text::fmt(m.gamma) << '\n';
  out << "nr_class " << k << '\n';
  out << "total_sv " << m.sv.size() << '\n';
  out << "rho";
  for (double r : m.rho) out << ' ' << text::fmt(r);
  out << '\n';
  out << "label";
  for (int l : m.labels) out << ' ' << l;
  out << '\n';
  out << "nr_sv";
  for (int n : m.nsv) out << ' ' << n;
  out << '\n';
  out << "SV\n";
  for (std::size_t i = 0; i < m.sv.size(); ++i) {
    bool first = true;
    for (const auto& row : m.sv_coef) {
      out << (first ? "" : " ") << text::fmt(row[i]);
      first = false;
    }
    for (std::size_t d = 0; d < m.sv[i].size(); ++d)
      if (m.sv[i][d] != 0.0) out << (first ? "" : " ") << d + 1 << ':' << text::fmt(m.sv[i][d]), first = false;
    out << " \n";
  }
}

inline Model read_model(std::istream& in) {
  Model m;
  std::string line;
  std::size_t lineno = 0;
  std::size_t total_sv = 0;
  bool have_type = false, have_kernel = false, have_gamma = false, have_nr = false,
       have_total = false, have_label = false, have_sv = false;
  std::size_t k = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto f = text::split_ws(line);
    if (f.empty()) throw ParseError(lineno, "empty line in model header");
    const auto key = f[0];
    if (key == "svm_type") {
      if (f.size() != 2 || f[1] != "c_svc") throw ParseError(lineno, "unsupported svm_type");
      have_type = true;
    } else if (key == "kernel_type") {
      if (f.size() != 2) throw ParseError(lineno, "malformed kernel_type");
      if (f[1] != "rbf")
        throw Error(ErrorKind::UnsupportedKernel,
                    "line " + std::to_string(lineno) + ": unsupported kernel_type '" +
                        std::string(f[1]) + "' (only rbf)");
      have_kernel = true;
    } else if (key == "gamma") {
      if (f.size() != 2) throw ParseError(lineno, "malformed gamma");
      m.gamma = text::to_double(f[1], lineno);
      have_gamma = true;
    } else if (key == "nr_class") {
      if (f.size() != 2) throw ParseError(lineno, "malformed nr_class");
      const auto v = text::to_int(f[1], lineno);
      if (v < 1) throw ParseError(lineno, "nr_class must be >= 1");
      k = std::size_t(v);
      have_nr = true;
    } else if (key == "total_sv") {
      if (f.size() != 2) throw ParseError(lineno, "malformed total_sv");
      const auto v = text::to_int(f[1], lineno);
      if (v < 0) throw ParseError(lineno, "negative total_sv");
      total_sv = std::size_t(v);
      have_total = true;
    } else if (key == "rho") {
      if (!have_nr) throw ParseError(lineno, "rho before nr_class");
      if (f.size() != 1 + k * (k - 1) / 2) throw ParseError(lineno, "wrong number of rho values");
      for (std::size_t i = 1; i < f.size(); ++i) m.rho.push_back(text::to_double(f[i], lineno));
    } else if (key == "label") {
      if (!have_nr || f.size() != 1 + k) throw ParseError(lineno, "wrong number of labels");
      for (std::size_t i = 1; i < f.size(); ++i) m.labels.push_back(int(text::to_int(f[i], lineno)));
      have_label = true;
    } else if (key == "nr_sv") {
      if (!have_nr || f.size() != 1 + k) throw ParseError(lineno, "wrong number of nr_sv values");
      for (std::size_t i = 1; i < f.size(); ++i) {
        const auto v = text::to_int(f[i], lineno);
        if (v < 0) throw ParseError(lineno, "negative nr_sv");
        m.nsv.push_back(int(v));
      }
    } else if (key == "SV") {
      have_sv = true;
      break;
    } else if (key == "probA" || key == "probB" || key == "nr_hyperplanes") {
      throw ParseError(lineno, "unsupported model feature '" + std::string(key) + "'");
    } else {
      throw ParseError(lineno, "unknown header field '" + std::string(key) + "'");
    }
  }
  if (lineno == 0) throw ParseError(1, "empty model file");
  if (!have_type || !have_kernel || !have_gamma || !have_nr || !have_total || !have_label ||
      !have_sv)
    throw ParseError(lineno + (have_sv ? 0 : 1), "incomplete model header");
  if (m.rho.size() != k * (k - 1) / 2) throw ParseError(lineno, "missing rho line");
  if (m.nsv.size() != k) throw ParseError(lineno, "missing nr_sv line");
  if (std::size_t(std::accumulate(m.nsv.begin(), m.nsv.end(), 0)) != total_sv)
    throw ParseError(lineno, "nr_sv does not sum to total_sv");
  if (!std::is_sorted(m.labels.begin(), m.labels.end()))
    throw ParseError(lineno, "labels must be ascending");

  m.sv_coef.assign(k - 1, std::vector<double>(total_sv, 0.0));
  std::size_t dims = 0;
  for (std::size_t i = 0; i < total_sv; ++i) {
    if (!std::getline(in, line)) throw ParseError(lineno + 1, "missing support vector line");
    ++lineno;
    auto f = text::split_ws(line);
    if (f.size() < k - 1) throw ParseError(lineno, "too few coefficients");
    for (std::size_t r = 0; r + 1 < k; ++r) m.sv_coef[r][i] = text::to_double(f[r], lineno);
    std::vector<double> v;
    long long last = 0;
    for (std::size_t t = k - 1; t < f.size(); ++t) {
      const auto colon = f[t].find(':');
      if (colon == std::string_view::npos) throw ParseError(lineno, "expected index:value");
      const auto idx = text::to_int(f[t].substr(0, colon), lineno);
      if (idx <= last) throw ParseError(lineno, "indices must be ascending and >= 1");
      last = idx;
      v.resize(std::size_t(idx), 0.0);
      v[std::size_t(idx) - 1] = text::to_double(f[t].substr(colon + 1), lineno);
    }
    dims = std::max(dims, v.size());
    m.sv.push_back(std::move(v));
  }
  for (auto& v : m.sv) v.resize(dims, 0.0);
  return m;
}

// Scaling ranges in svm-scale's save format: "x", "lower upper", then
// "index min max" per dimension.
inline void write_range(std::ostream& out, const ScalingParams& s) {
  out << "x\n" << text::fmt(s.lower) << ' ' << text::fmt(s.upper) << '\n';
  for (std::size_t i = 0; i < s.dims(); ++i)
    out << i + 1 << ' ' << text::fmt(s.min[i]) << ' ' << text::fmt(s.max[i]) << '\n';
}

inline ScalingParams read_range(std::istream& in) {
  ScalingParams s;
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line) || text::split_ws(line) != std::vector<std::string_view>{"x"})
    throw ParseError(1, "range file must start with 'x'");
  ++lineno;
  if (!std::getline(in, line)) throw ParseError(2, "missing bounds line");
  ++lineno;
  auto b = text::split_ws(line);
  if (b.size() != 2) throw ParseError(lineno, "expected 'lower upper'");
  s.lower = text::to_double(b[0], lineno);
  s.upper = text::to_double(b[1], lineno);
  while (std::getline(in, line)) {
    ++lineno;
    auto f = text::split_ws(line);
    if (f.empty()) continue;
    if (f.size() != 3) throw ParseError(lineno, "expected 'index min max'");
    const auto idx = text::to_int(f[0], lineno);
    if (idx != static_cast<long long>(s.min.size()) + 1)
      throw ParseError(lineno, "range indices must be consecutive from 1");
    s.min.push_back(text::to_double(f[1], lineno));
    s.max.push_back(text::to_double(f[2], lineno));
  }
  return s;
}

inline std::string range_path(const std::string& model_path) { return model_path + ".range"; }

inline std::string model_to_string(const Model& m) {
  std::ostringstream out;
  write_model(out, m);
  return out.str();
}

inline void save_model(const std::string& path, const Model& m) {
  {
    std::ofstream out(path);
    if (!out) fail(ErrorKind::Io, "cannot write model file: " + path);
    write_model(out, m);
  }
  if (!m.scaling.empty()) {
    std::ofstream out(range_path(path));
    if (!out) fail(ErrorKind::Io, "cannot write range file: " + range_path(path));
    write_range(out, m.scaling);
  } else {
    std::error_code ec;
    std::filesystem::remove(range_path(path), ec);
  }
}

inline Model load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open model file: " + path);
  Model m = read_model(in);
  if (std::ifstream rin(range_path(path)); rin) m.scaling = read_range(rin);
  return m;
}

// ---- libSVM problem files: "label idx:val ..." with 1-based indices ----

inline void write_problem(std::ostream& out, std::span<const Sample> samples) {
  for (const auto& s : samples) {
    out << s.label;
    for (std::size_t d = 0; d < s.x.size(); ++d)
      if (s.x[d] != 0.0) out << ' ' << d + 1 << ':' << text::fmt(s.x[d]);
    out << '\n';
  }
}

// `dims` pads every sample to a fixed width (0 = widest sample).
inline std::vector<Sample> read_problem(std::istream& in, std::size_t dims = 0) {
  std::vector<Sample> out;
  std::string line;
  std::size_t lineno = 0;
  std::size_t widest = dims;
  while (std::getline(in, line)) {
    ++lineno;
    auto f = text::split_ws(line);
    if (f.empty()) continue;
    Sample s;
    s.label = int(text::to_int(f[0], lineno));
    long long last = 0;
    for (std::size_t t = 1; t < f.size(); ++t) {
      const auto colon = f[t].find(':');
      if (colon == std::string_view::npos) throw ParseError(lineno, "expected index:value");
      const auto idx = text::to_int(f[t].substr(0, colon), lineno);
      if (idx <= last) throw ParseError(lineno, "indices must be ascending and >= 1");
      if (dims && std::size_t(idx) > dims) throw ParseError(lineno, "index exceeds dimension");
      last = idx;
      s.x.resize(std::size_t(idx), 0.0);
      s.x[std::size_t(idx) - 1] = text::to_double(f[t].substr(colon + 1), lineno);
    }
    widest = std::max(widest, s.x.size());
    out.push_back(std::move(s));
  }
  for (auto& s : out) s.x.resize(widest, 0.0);
  return out;
}

}  // namespace visage::svm
