#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "visage/pipeline.hpp"
#include "visage/report.hpp"

using namespace visage;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

const fs::path& work() {
  static const fs::path p = [] {
    auto d = fs::temp_directory_path() / "visage_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return p;
}

Outcome run(const std::string& args) {
  const auto out = work() / "stdout.txt", err = work() / "stderr.txt";
  const std::string cmd = std::string("\"") + VISAGE_CLI_PATH + "\" " + args + " >\"" + out.string() +
                          "\" 2>\"" + err.string() + "\"";
  const int status = std::system(cmd.c_str());
  Outcome r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

class Cli : public ::testing::Test {
 protected:
  // One synthetic corpus with cascades and a trained model, shared by every test.
  static void SetUpTestSuite() {
    data_ = work() / "data";
    const Outcome g = run("gen-synth --out " + q(data_) + " --per-class 2 --frames 20 --with-cascades");
    ASSERT_EQ(g.code, 0) << g.err;
    const Outcome t = run("train --manifest " + q(data_ / "manifest.tsv") + " --frontal " +
                      q(data_ / "frontal.cascade") + " --profile " + q(data_ / "profile.cascade") +
                      " --out " + q(work() / "model.txt"));
    ASSERT_EQ(t.code, 0) << t.err;
  }
  static void TearDownTestSuite() { fs::remove_all(work()); }

  static std::string cascades() {
    return " --frontal " + q(data_ / "frontal.cascade") + " --profile " + q(data_ / "profile.cascade");
  }

  static fs::path data_;
};

fs::path Cli::data_;

}  // namespace

TEST_F(Cli, UnknownFlagIsUsageError) {
  const Outcome r = run("evaluate --bogus");
  EXPECT_EQ(r.code, 1);
  EXPECT_FALSE(r.err.empty());
  EXPECT_EQ(run("").code, 1);
  EXPECT_EQ(run("evaluate").code, 1);
}

TEST_F(Cli, TrainWroteModelAndRange) {
  EXPECT_TRUE(fs::exists(work() / "model.txt"));
  EXPECT_TRUE(fs::exists(work() / "model.txt.range"));
  EXPECT_NO_THROW(svm::load_model((work() / "model.txt").string()));
}

TEST_F(Cli, EvaluateJsonMatchesLibrary) {
  const Outcome r = run("--json evaluate --manifest " + q(data_ / "manifest.tsv") + " --model " +
                    q(work() / "model.txt") + cascades());
  ASSERT_EQ(r.code, 0) << r.err;
  SessionConfig cfg;
  cfg.frontal_cascade = (data_ / "frontal.cascade").string();
  cfg.profile_cascade = (data_ / "profile.cascade").string();
  const auto rep = evaluate_session(svm::load_model((work() / "model.txt").string()),
                                    read_manifest((data_ / "manifest.tsv").string(), cfg), cfg,
                                    load_detectors(cfg));
  EXPECT_EQ(r.out, to_json(rep).dump(2) + "\n");
  EXPECT_EQ(Json::parse(r.out)["sequences"]["total"], 8);
}

TEST_F(Cli, EvaluateTextTable) {
  const Outcome r = run("evaluate --manifest " + q(data_ / "manifest.tsv") + " --model " +
                    q(work() / "model.txt") + cascades());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("Total"), std::string::npos);
  EXPECT_NE(r.out.find("Excited"), std::string::npos);
}

TEST_F(Cli, ReferenceTable) {
  Outcome r = run("evaluate --reference-table");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("43.33%"), std::string::npos);
  EXPECT_NE(r.out.find("72/120 = 60.00%"), std::string::npos);
  EXPECT_NE(r.out.find("59.91%"), std::string::npos);
  r = run("--json evaluate --reference-table");
  ASSERT_EQ(r.code, 0);
  const Json j = Json::parse(r.out);
  EXPECT_EQ(j["total"], 120);
  EXPECT_DOUBLE_EQ(j["overall"].get<double>(), 0.6);
  EXPECT_DOUBLE_EQ(j["printed_overall"].get<double>(), 0.5991);
}

TEST_F(Cli, MissingFrameNamesTheFile) {
  const auto broken = work() / "broken";
  fs::remove_all(broken);
  fs::create_directories(broken);
  fs::copy(data_ / "Smile_0", broken / "Smile_0");
  fs::remove(broken / "Smile_0" / "frame_000005.ppm");
  std::ofstream(broken / "manifest.tsv") << "Smile\tSmile_0\n";
  const Outcome r = run("evaluate --manifest " + q(broken / "manifest.tsv") + " --model " +
                    q(work() / "model.txt") + cascades());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("frame_000005.ppm"), std::string::npos) << r.err;
}

TEST_F(Cli, MissingModelIsDataError) {
  const Outcome r = run("evaluate --manifest " + q(data_ / "manifest.tsv") + " --model " +
                    q(work() / "nope.txt") + cascades());
  EXPECT_EQ(r.code, 2);
}

TEST_F(Cli, NoCascadeIsUsageError) {
  const Outcome r = run("track --sequence " + q(data_ / "Smile_0"));
  EXPECT_EQ(r.code, 1);
}

TEST_F(Cli, TrackEmitsLandmarkCsv) {
  const Outcome r = run("track --sequence " + q(data_ / "Smile_0") + cascades());
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream in(r.out);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "frame,point_index,region,x,y,valid");
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 20u * 21u);
}

TEST_F(Cli, DetectFindsTheFace) {
  const Outcome r = run("--json detect --cascade " + q(data_ / "frontal.cascade") + " --image " +
                    q(data_ / "Neutral_0" / "frame_000000.ppm"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_GE(Json::parse(r.out)["detections"].size(), 1u);
}

TEST_F(Cli, BenchmarkJson) {
  const Outcome r = run("--json benchmark --manifest " + q(data_ / "manifest.tsv") + cascades());
  ASSERT_EQ(r.code, 0) << r.err;
  const Json j = Json::parse(r.out);
  EXPECT_EQ(j["frames"], 160);
  EXPECT_EQ(j["accounting_violations"], 0);
}
