#pragma once

// JSON views of pipeline results, shared by the CLI and the HTTP service.

#include <string>
#include <vector>

#include "json.hpp"
#include "visage/pipeline.hpp"

namespace visage {

using Json = nlohmann::ordered_json;

inline Json to_json(const Rect& r) { return {{"x", r.x}, {"y", r.y}, {"w", r.w}, {"h", r.h}}; }

inline Json to_json(const LandmarkSet& set) {
  Json a = Json::array();
  for (int i = 0; i < kLandmarkCount; ++i) {
    const auto& l = set.points[std::size_t(i)];
    a.push_back({{"index", i},
                 {"region", to_string(l.region)},
                 {"x", l.x},
                 {"y", l.y},
                 {"valid", l.valid}});
  }
  return a;
}

inline Json to_json(const StageTimings& t) {
  return {{"detect", t.detect_us},       {"skin", t.skin_us},   {"landmarks", t.landmarks_us},
          {"track", t.track_us},         {"smooth", t.smooth_us}, {"classify", t.classify_us},
          {"total", t.total_us}};
}

inline Json to_json(const FrameResult& r, const std::vector<std::string>& labels,
                    bool with_timings = true) {
  Json j;
  j["frame"] = r.index;
  j["face"] = r.face ? to_json(*r.face) : Json(nullptr);
  j["source"] = to_string(r.source);
  j["skin_fraction"] = r.skin_fraction ? Json(*r.skin_fraction) : Json(nullptr);
  j["skin_skipped"] = r.skin_skipped;
  j["landmarks"] = r.has_landmarks ? to_json(r.landmarks) : Json::array();
  j["window_complete"] = r.features.has_value();
  if (r.features) j["features"] = r.features->values;
  if (r.predicted) {
    j["predicted"] = {{"id", *r.predicted},
                      {"label", std::size_t(*r.predicted) < labels.size()
                                    ? labels[std::size_t(*r.predicted)]
                                    : std::to_string(*r.predicted)}};
    j["votes"] = r.votes;
  } else {
    j["predicted"] = nullptr;
  }
  if (with_timings) j["timings_us"] = to_json(r.timings);
  return j;
}

inline Json to_json(const ConfusionMatrix& m, const std::vector<std::string>& labels) {
  Json j;
  j["labels"] = labels;
  Json rows = Json::array();
  Json rates = Json::object();
  for (std::size_t i = 0; i < m.size(); ++i) {
    std::vector<std::uint64_t> row;
    for (std::size_t k = 0; k < m.size(); ++k) row.push_back(m.at(i, k));
    rows.push_back(row);
    const auto r = m.class_rate(i);
    rates[labels[i]] = r ? Json(*r) : Json(nullptr);
  }
  j["counts"] = rows;
  j["class_rates"] = rates;
  const auto o = m.overall();
  j["overall"] = o ? Json(*o) : Json(nullptr);
  j["total"] = m.total();
  return j;
}

inline Json to_json(const EvalReport& r) {
  Json j;
  j["sequence_accuracy"] = r.sequence_accuracy();
  j["sequences"] = to_json(r.sequences, r.labels);
  j["windows"] = to_json(r.windows, r.labels);
  Json u = Json::object();
  for (std::size_t i = 0; i < r.unclassified.size(); ++i) u[r.labels[i]] = r.unclassified[i];
  j["unclassified"] = u;
  return j;
}

inline Json to_json(const svm::GridResult& g) {
  Json cells = Json::array();
  for (const auto& c : g.cells) cells.push_back({{"C", c.C}, {"gamma", c.gamma}, {"accuracy", c.accuracy}});
  return {{"C", g.C}, {"gamma", g.gamma}, {"cv_accuracy", g.accuracy}, {"cells", cells}};
}

inline Json to_json(const TrainReport& r, const std::vector<std::string>& labels) {
  Json per = Json::object();
  for (std::size_t i = 0; i < r.vectors_per_class.size() && i < labels.size(); ++i)
    per[labels[i]] = r.vectors_per_class[i];
  return {{"grid", to_json(r.grid)},
          {"vectors_per_class", per},
          {"sequences_without_vectors", r.sequences_without_vectors},
          {"training_accuracy", r.training_accuracy},
          {"support_vectors", r.model.sv.size()}};
}

inline Json to_json(const BenchmarkReport& b) {
  Json stages = Json::object();
  for (const auto& [name, s] : b.stages)
    stages[name] = {{"median_ms", s.median_ms}, {"p95_ms", s.p95_ms}, {"mean_ms", s.mean_ms}};
  return {{"frames", b.frames},
          {"ms_per_10_frames", b.ms_per_10_frames},
          {"reference_ms_per_10_frames", {{"abstract", {100, 120}}, {"section4", {120, 150}}}},
          {"accounting_violations", b.accounting_violations},
          {"stages", stages}};
}

inline std::string format_benchmark(const BenchmarkReport& b) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(3);
  out << "frames: " << b.frames << '\n';
  out << std::left << std::setw(12) << "stage" << std::right << std::setw(12) << "median ms"
      << std::setw(12) << "p95 ms" << std::setw(12) << "mean ms" << '\n';
  for (const char* name : {"detect", "skin", "landmarks", "track", "smooth", "classify", "total"}) {
    const auto it = b.stages.find(name);
    if (it == b.stages.end()) continue;
    out << std::left << std::setw(12) << name << std::right << std::setw(12) << it->second.median_ms
        << std::setw(12) << it->second.p95_ms << std::setw(12) << it->second.mean_ms << '\n';
  }
  const double v = b.ms_per_10_frames;
  out << "ms per 10 frames: " << v << " (reference 100-120: " << (v <= 120 ? "within" : "above")
      << ", reference 120-150: " << (v <= 150 ? "within" : "above") << ")\n";
  out << "frames with stage sum > total: " << b.accounting_violations << '\n';
  return out.str();
}

}  // namespace visage
