// visage: command-line front end.
// Exit codes: 0 ok, 1 usage error, 2 data error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "visage/pipeline.hpp"
#include "visage/report.hpp"
#include "visage/service.hpp"

namespace fs = std::filesystem;
using namespace visage;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flags shared by every command that runs the per-frame pipeline.
struct PipelineFlags {
  std::string config;
  std::string frontal;
  std::string profile;
  bool no_skin = false;

  void add(CLI::App* app) {
    app->add_option("--config", config, "key = value session config file");
    app->add_option("--frontal", frontal, "frontal cascade file (overrides config)");
    app->add_option("--profile", profile, "profile cascade file (overrides config)");
    app->add_flag("--no-skin", no_skin, "skip skin verification");
  }

  SessionConfig session_config() const {
    SessionConfig cfg = config.empty() ? SessionConfig{} : load_config(config);
    if (!frontal.empty()) cfg.frontal_cascade = frontal;
    if (!profile.empty()) cfg.profile_cascade = profile;
    if (no_skin) cfg.skin_enabled = false;
    if (cfg.frontal_cascade.empty() && cfg.profile_cascade.empty())
      throw UsageError("no cascade given: pass --frontal/--profile or set them in --config");
    return cfg;
  }
};

std::vector<std::string> image_files(const std::string& dir) {
  if (!fs::is_directory(dir)) fail(ErrorKind::Io, "not a directory: " + dir);
  std::vector<std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto ext = e.path().extension().string();
    if (ext == ".pgm" || ext == ".ppm") out.push_back(e.path().string());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) fail(ErrorKind::Io, "no .pgm/.ppm files in " + dir);
  return out;
}

void emit(bool json, const Json& j, const std::string& text) {
  if (json)
    std::cout << j.dump(2) << '\n';
  else
    std::cout << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"visage: facial expression recognition trainer and evaluator"};
  app.require_subcommand(1);
  bool json = false;
  app.add_flag("--json", json, "machine-readable JSON on stdout");

  // train-cascade
  auto* tc = app.add_subcommand("train-cascade", "train a boosted cascade");
  std::string tc_pos, tc_bg, tc_out, tc_label = "frontal", tc_synth;
  std::size_t tc_npos = 400, tc_nbg = 300;
  std::uint64_t tc_synth_seed = 11;
  int tc_window = 24;
  CascadeTrainParams tcp{.max_stages = 8, .negatives_per_stage = 600, .pool_stride = 3,
                         .pool_cap = 6000};
  tc->add_option("--positives", tc_pos, "directory of positive patches (.pgm/.ppm)");
  tc->add_option("--backgrounds", tc_bg, "directory of face-free images");
  tc->add_option("--synthetic", tc_synth, "use the synthetic renderer: frontal or profile")
      ->check(CLI::IsMember({"frontal", "profile"}));
  tc->add_option("--synthetic-positives", tc_npos, "synthetic positive count");
  tc->add_option("--synthetic-backgrounds", tc_nbg, "synthetic background count");
  tc->add_option("--synthetic-seed", tc_synth_seed, "synthetic corpus seed");
  tc->add_option("--out", tc_out, "output cascade file")->required();
  tc->add_option("--label", tc_label, "cascade label (frontal or profile)");
  tc->add_option("--window", tc_window, "square base window size");
  tc->add_option("--stages", tcp.max_stages, "maximum stage count");
  tc->add_option("--min-detection", tcp.min_detection, "per-stage detection rate");
  tc->add_option("--max-false-positive", tcp.max_false_positive, "per-stage false-positive rate");
  tc->add_option("--max-weak", tcp.max_weak_per_stage, "weak classifiers per stage cap");
  tc->add_option("--target-false-positive", tcp.target_false_positive, "overall false-positive target");
  tc->add_option("--negatives", tcp.negatives_per_stage, "negatives per stage (0 = #positives)");
  tc->add_option("--pool-stride", tcp.pool_stride, "feature pool stride");
  tc->add_option("--pool-cap", tcp.pool_cap, "feature pool size cap");
  tc->add_option("--seed", tcp.seed, "negative mining seed");

  // detect
  auto* dt = app.add_subcommand("detect", "detect faces in one image");
  std::string dt_cascade, dt_image;
  ScanParams dsp{.scale_start = 2.5, .scale_factor = 1.15};
  dt->add_option("--cascade", dt_cascade, "cascade file")->required();
  dt->add_option("--image", dt_image, "PGM/PPM image")->required();
  dt->add_option("--scale-start", dsp.scale_start, "first window scale");
  dt->add_option("--scale-factor", dsp.scale_factor, "scale step factor");
  dt->add_option("--step", dsp.step, "base window step in pixels");
  dt->add_option("--min-neighbors", dsp.min_neighbors, "raw hits needed per detection");

  // track
  auto* tr = app.add_subcommand("track", "run detection and tracking over one sequence");
  PipelineFlags tr_flags;
  tr_flags.add(tr);
  std::string tr_dir;
  tr->add_option("--sequence", tr_dir, "directory of frame_%06d.pgm|ppm")->required();

  // gen-synth
  auto* gs = app.add_subcommand("gen-synth", "write synthetic labeled sequences");
  SyntheticSpec gsp;
  std::string gs_out;
  bool gs_cascades = false;
  gs->add_option("--out", gs_out, "output directory")->required();
  gs->add_option("--seed", gsp.seed, "generator seed");
  gs->add_option("--frames", gsp.frames, "frames per sequence");
  gs->add_option("--width", gsp.width, "frame width");
  gs->add_option("--height", gsp.height, "frame height");
  gs->add_option("--per-class", gsp.sequences_per_class, "sequences per class");
  gs->add_option("--amplitude", gsp.amplitude, "full deformation, fraction of face size");
  gs->add_option("--ramp", gsp.ramp_frames, "frames to full deformation");
  gs->add_option("--noise", gsp.noise, "per-channel noise amplitude");
  gs->add_flag("--with-cascades", gs_cascades, "also train frontal.cascade and profile.cascade");

  // train
  auto* tn = app.add_subcommand("train", "train an expression model from labeled sequences");
  PipelineFlags tn_flags;
  tn_flags.add(tn);
  std::string tn_manifest, tn_out;
  tn->add_option("--manifest", tn_manifest, "label<TAB>dir manifest")->required();
  tn->add_option("--out", tn_out, "output model file (scaling goes to <out>.range)")->required();

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "evaluate a model on labeled sequences");
  PipelineFlags ev_flags;
  ev_flags.add(ev);
  std::string ev_manifest, ev_model;
  bool ev_reference = false;
  ev->add_option("--manifest", ev_manifest, "label<TAB>dir manifest");
  ev->add_option("--model", ev_model, "model file");
  ev->add_flag("--reference-table", ev_reference,
               "report the rates of the published confusion counts instead");

  // benchmark
  auto* bm = app.add_subcommand("benchmark", "per-stage timing over sequences");
  PipelineFlags bm_flags;
  bm_flags.add(bm);
  std::string bm_manifest, bm_model;
  bm->add_option("--manifest", bm_manifest, "label<TAB>dir manifest")->required();
  bm->add_option("--model", bm_model, "optional model, to time classification too");

  // serve
  auto* sv = app.add_subcommand("serve", "run the HTTP service");
  PipelineFlags sv_flags;
  sv_flags.add(sv);
  std::string sv_host = "127.0.0.1";
  int sv_port = 8080;
  sv->add_option("--host", sv_host, "bind address");
  sv->add_option("--port", sv_port, "port");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*tc) {
      std::vector<Image> pos, bg;
      if (!tc_synth.empty()) {
        auto corpus = synthetic_cascade_corpus(tc_synth_seed, tc_npos, tc_nbg, tc_synth == "profile",
                                               tc_window);
        pos = std::move(corpus.positives);
        bg = std::move(corpus.backgrounds);
        if (tc_label == "frontal") tc_label = tc_synth;
      } else {
        if (tc_pos.empty() || tc_bg.empty())
          throw UsageError("train-cascade needs --positives and --backgrounds, or --synthetic");
        for (const auto& f : image_files(tc_pos)) pos.push_back(load_pnm(f));
        for (const auto& f : image_files(tc_bg)) bg.push_back(load_pnm(f));
      }
      const Cascade c = train_cascade(pos, bg, tcp, tc_label, tc_window, tc_window);
      save_cascade(tc_out, c);
      Json stages = Json::array();
      for (const auto& s : c.stages) stages.push_back(s.weak.size());
      emit(json, {{"out", tc_out}, {"stages", c.stages.size()}, {"weak_per_stage", stages}},
           "wrote " + tc_out + " (" + std::to_string(c.stages.size()) + " stages)\n");
    } else if (*dt) {
      const Cascade c = load_cascade(dt_cascade);
      const auto dets = detect_multiscale(c, load_pnm(dt_image), dsp);
      Json a = Json::array();
      std::ostringstream text;
      for (const auto& d : dets) {
        Json j = to_json(d.box);
        j["neighbors"] = d.neighbors;
        a.push_back(j);
        text << d.box.x << ' ' << d.box.y << ' ' << d.box.w << ' ' << d.box.h << ' ' << d.neighbors
             << '\n';
      }
      emit(json, {{"detections", a}}, text.str());
    } else if (*tr) {
      const SessionConfig cfg = tr_flags.session_config();
      Session session(cfg, load_detectors(cfg));
      Json frames = Json::array();
      if (!json) std::cout << "frame,point_index,region,x,y,valid\n";
      for_each_frame(LabeledSequence{0, tr_dir, {}}, [&](const Image& f) {
        const FrameResult r = session.process_frame(f);
        if (json)
          frames.push_back(to_json(r, cfg.labels, false));
        else if (r.has_landmarks)
          write_landmark_csv(std::cout, r.index, r.landmarks);
      });
      if (json) std::cout << Json{{"frames", frames}}.dump(2) << '\n';
    } else if (*gs) {
      const auto seqs = generate_synthetic(gsp);
      write_synthetic(gs_out, seqs);
      Json j{{"out", gs_out}, {"sequences", seqs.size()}, {"manifest", (fs::path(gs_out) / "manifest.tsv").string()}};
      if (gs_cascades) {
        const Detectors d = train_synthetic_detectors();
        save_cascade((fs::path(gs_out) / "frontal.cascade").string(), *d.frontal);
        save_cascade((fs::path(gs_out) / "profile.cascade").string(), *d.profile);
        j["cascades"] = {"frontal.cascade", "profile.cascade"};
      }
      emit(json, j, "wrote " + std::to_string(seqs.size()) + " sequences to " + gs_out + "\n");
    } else if (*tn) {
      const SessionConfig cfg = tn_flags.session_config();
      const auto seqs = read_manifest(tn_manifest, cfg);
      const TrainReport rep = train_session(seqs, cfg, load_detectors(cfg));
      svm::save_model(tn_out, rep.model);
      std::ostringstream text;
      text << "C=" << rep.grid.C << " gamma=" << rep.grid.gamma << " cv=" << rep.grid.accuracy
           << " training accuracy=" << rep.training_accuracy << "\nwrote " << tn_out << '\n';
      emit(json, to_json(rep, cfg.labels), text.str());
    } else if (*ev && ev_reference) {
      const SessionConfig cfg;
      const ConfusionMatrix m = reference_table();
      Json j = to_json(m, cfg.labels);
      j["footnote"] = reference_footnote(m);
      j["printed_overall"] = kReferencePrintedOverall;
      emit(json, j, reference_table_report(cfg.labels));
    } else if (*ev) {
      if (ev_manifest.empty() || ev_model.empty())
        throw UsageError("evaluate needs --manifest and --model (or --reference-table)");
      const SessionConfig cfg = ev_flags.session_config();
      const auto seqs = read_manifest(ev_manifest, cfg);
      const svm::Model model = svm::load_model(ev_model);
      const EvalReport rep = evaluate_session(model, seqs, cfg, load_detectors(cfg));
      emit(json, to_json(rep),
           "Sequences (majority vote over 10-frame windows)\n" +
               format_table(rep.sequences, cfg.labels) + "\nWindows\n" +
               format_table(rep.windows, cfg.labels));
    } else if (*bm) {
      const SessionConfig cfg = bm_flags.session_config();
      const auto seqs = read_manifest(bm_manifest, cfg);
      std::optional<svm::Model> model;
      if (!bm_model.empty()) model = svm::load_model(bm_model);
      const BenchmarkReport rep = benchmark(seqs, cfg, load_detectors(cfg), model);
      emit(json, to_json(rep), format_benchmark(rep));
    } else if (*sv) {
      const SessionConfig cfg = sv_flags.session_config();
      Service service(cfg, load_detectors(cfg));
      if (!service.listen(sv_host, sv_port)) {
        std::cerr << "error: cannot listen on " << sv_host << ':' << sv_port << '\n';
        return 2;
      }
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
