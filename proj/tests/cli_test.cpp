#include <gtest/gtest.h>

#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "dalm/dalm.hpp"
#include "testutil.hpp"

namespace fs = std::filesystem;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string out;
};

std::string dalm_bin() {
  const char* bin = std::getenv("DALM_BIN");
  EXPECT_NE(bin, nullptr) << "DALM_BIN must point at the dalm binary";
  return bin ? bin : "";
}

RunResult run(const std::string& args) {
  const std::string cmd = dalm_bin() + " " + args + " 2>/dev/null";
  RunResult result;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) return result;
  char buffer[4096];
  std::size_t n = 0;
  while ((n = fread(buffer, 1, sizeof(buffer), pipe)) > 0) {
    result.out.append(buffer, n);
  }
  const int status = pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("dalm_cli_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter_++));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  void write(const std::string& name, const std::string& content) const {
    std::ofstream out(path(name), std::ios::binary);
    out << content;
  }

  std::string read(const std::string& name) const {
    std::ifstream in(path(name), std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  }

  fs::path dir_;
  static int counter_;
};

int CliTest::counter_ = 0;

const char* kConsistent =
    R"({"s":"Apple","r":"is_a","d":"@Biology","o":"Fruit"}
{"s":"Apple","r":"is_a","d":"@Business","o":"Company"}
{"s":"Atom","r":"is_a","d":"@Physics","o":"Particle"}
{"s":"Atom","r":"is_a","d":"@Physics@Quantum","o":"Field_Excitation"}
{"s":"Atom","r":"is_a","d":"@Chemistry@Dalton","o":"Indivisible_Particle"}
)";

}  // namespace

TEST_F(CliTest, IngestThenValidateCleanLibrary) {
  write("in.jsonl", kConsistent);
  auto r = run("--library " + path("lib.jsonl") + " ingest --input " +
               path("in.jsonl"));
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_NE(r.out.find("accepted: 5, rejected: 0"), std::string::npos);

  r = run("--library " + path("lib.jsonl") + " validate");
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_NE(r.out.find("accepted: 5, rejected: 0"), std::string::npos);
}

TEST_F(CliTest, IngestCycleSignalsExitCodeOne) {
  write("in.jsonl",
        R"({"s":"A","r":"is_a","d":"@X","o":"B"}
{"s":"B","r":"is_a","d":"@X","o":"A"}
)");
  const auto r = run("--library " + path("lib.jsonl") + " ingest --input " +
                     path("in.jsonl"));
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_NE(r.out.find("cycle"), std::string::npos);
}

TEST_F(CliTest, GenerateJsonMatchesLibraryApiOracle) {
  write("lib.jsonl", kConsistent);
  const auto r = run("--library " + path("lib.jsonl") +
                     " --format json --seed 7 generate --query Atom --mode multi");
  EXPECT_EQ(r.exit_code, 0);
  const auto doc = nlohmann::json::parse(r.out);

  // Library-API oracle for the same invocation.
  const dalm::CrystalLibrary lib =
      dalm::load_library(kConsistent, dalm::default_meta_fiber());
  dalm::GenerationConfig config;
  config.seed = 7;
  config.output_mode = dalm::OutputMode::multi_perspective;
  const auto expected =
      dalm::output_to_json(dalm::generate({"Atom"}, lib, nullptr, config));
  EXPECT_EQ(doc.dump(), expected.dump());
  EXPECT_EQ(doc["entries"].size(),
            dalm::activate_domains({"Atom"}, lib, nullptr, config).size());
}

TEST_F(CliTest, SameSeedGivesByteIdenticalOutput) {
  write("lib.jsonl", kConsistent);
  const std::string cmd = "--library " + path("lib.jsonl") +
                          " --format json --seed 11 generate --query Atom "
                          "--vocab open --theta-novel 0.9";
  const auto a = run(cmd);
  const auto b = run(cmd);
  EXPECT_EQ(a.exit_code, 0);
  EXPECT_EQ(a.out, b.out);
}

TEST_F(CliTest, ExportRoundTripIsByteIdentical) {
  write("in.jsonl", kConsistent);
  ASSERT_EQ(run("--library " + path("lib.jsonl") + " ingest --input " +
                path("in.jsonl"))
                .exit_code,
            0);
  const auto once = run("--library " + path("lib.jsonl") + " export");
  ASSERT_EQ(once.exit_code, 0);
  write("copy.jsonl", once.out);
  const auto twice = run("--library " + path("copy.jsonl") + " export");
  EXPECT_EQ(twice.exit_code, 0);
  EXPECT_EQ(once.out, twice.out);

  const auto meta = run("export --what meta");
  ASSERT_EQ(meta.exit_code, 0);
  EXPECT_EQ(dalm::load_meta_fiber(meta.out), dalm::default_meta_fiber());
}

TEST_F(CliTest, StatsReportsCounts) {
  write("lib.jsonl", kConsistent);
  const auto r = run("--library " + path("lib.jsonl") + " --format json stats");
  EXPECT_EQ(r.exit_code, 0);
  const auto doc = nlohmann::json::parse(r.out);
  EXPECT_EQ(doc["crystals"].get<int>(), 5);
  EXPECT_EQ(doc["fibers"].get<int>(), 5);
  EXPECT_EQ(doc["domains"].get<int>(), 7);  // 6 paths plus the top element
}

TEST_F(CliTest, TrainEmbeddingsWritesLoadableSnapshot) {
  write("lib.jsonl", kConsistent);
  const auto r = run("--library " + path("lib.jsonl") +
                     " --seed 3 train-embeddings --out " + path("emb.json") +
                     " --dim 8 --epochs 40 --completion-epochs 20");
  EXPECT_EQ(r.exit_code, 0);
  const auto space = dalm::load_space(read("emb.json"));
  EXPECT_EQ(space.dim, 8u);
  EXPECT_FALSE(space.domains.empty());

  const auto routed = run("--library " + path("lib.jsonl") + " --embeddings " +
                          path("emb.json") + " --format json route --concepts Atom --k 2");
  EXPECT_EQ(routed.exit_code, 0);
  const auto doc = nlohmann::json::parse(routed.out);
  EXPECT_EQ(doc["top"].size(), 2u);

  const auto exported =
      run("--embeddings " + path("emb.json") + " export --what embeddings");
  EXPECT_EQ(exported.exit_code, 0);
  EXPECT_EQ(exported.out, read("emb.json"));
}

TEST_F(CliTest, QuerySubcommandScopedAndMulti) {
  write("lib.jsonl", kConsistent);
  auto r = run("--library " + path("lib.jsonl") +
               " --format json query --domain @Biology --subject Apple");
  EXPECT_EQ(r.exit_code, 0);
  auto doc = nlohmann::json::parse(r.out);
  ASSERT_EQ(doc.size(), 1u);
  EXPECT_EQ(doc[0]["o"], "Fruit");

  r = run("--library " + path("lib.jsonl") +
          " --format json query --multi --concepts Atom --subject Atom "
          "--epsilon 0.05");
  EXPECT_EQ(r.exit_code, 0);
  doc = nlohmann::json::parse(r.out);
  EXPECT_GE(doc["perspectives"].size(), 2u);
}

TEST_F(CliTest, SimulateDenoiseEmitsCsv) {
  const auto r = run("--seed 5 simulate-denoise --depth 1 --branching 3 "
                     "--concepts-per-fiber 6 --crystals-per-fiber 10 "
                     "--grid 0,1 --trials 40 --fields domain,subject,object");
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_EQ(r.out.rfind("schedule,eps_noise,", 0), 0u);
  // 2 schedules × 2 grid points + header.
  std::size_t lines = 0;
  for (char c : r.out) lines += c == '\n';
  EXPECT_EQ(lines, 5u);
}

TEST_F(CliTest, UsageErrorsExitTwo) {
  EXPECT_EQ(run("generate --query Atom --definitely-not-a-flag 1").exit_code, 2);
  EXPECT_EQ(run("no_such_subcommand").exit_code, 2);
  EXPECT_EQ(run("--library /nonexistent/lib.jsonl stats").exit_code, 2);
  write("bad.jsonl", "{\"s\":\"a\",\"r\":\"is_a\",\"d\":\"@X\"}\n");
  EXPECT_EQ(run("--library " + path("bad.jsonl") + " stats").exit_code, 2);
}

TEST_F(CliTest, CustomMetaConfigIsHonored) {
  write("meta.json",
        R"({"relations": {"treats": {"tau": "monotone", "acyclic": true}},
            "lambda_tau": 1.0, "threshold": 0.5})");
  write("in.jsonl", R"({"s":"aspirin","r":"treats","d":"@Med","o":"pain"})");
  auto r = run("--library " + path("lib.jsonl") + " --meta " + path("meta.json") +
               " ingest --input " + path("in.jsonl"));
  EXPECT_EQ(r.exit_code, 0);
  // The default table does not declare "treats": schema rejection, exit 1.
  r = run("--library " + path("lib2.jsonl") + " ingest --input " + path("in.jsonl"));
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_NE(r.out.find("schema"), std::string::npos);
}

TEST_F(CliTest, ValidateFlagsHandForgedInconsistency) {
  // load() trusts validated records; validate re-runs the gate and must
  // catch a cycle smuggled into a hand-written file.
  write("forged.jsonl",
        R"({"s":"A","r":"is_a","d":"@X","o":"B"}
{"s":"B","r":"is_a","d":"@X","o":"A"}
)");
  const auto r = run("--library " + path("forged.jsonl") + " validate");
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_NE(r.out.find("rejected: 2"), std::string::npos);
}

TEST_F(CliTest, EnvironmentVariableFallbackForLibrary) {
  write("lib.jsonl", kConsistent);
  const std::string cmd = "DALM_LIBRARY=" + path("lib.jsonl") + " " +
                          dalm_bin() + " --format json stats 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  ASSERT_NE(pipe, nullptr);
  std::string out;
  char buffer[4096];
  std::size_t n = 0;
  while ((n = fread(buffer, 1, sizeof(buffer), pipe)) > 0) out.append(buffer, n);
  const int status = pclose(pipe);
  EXPECT_EQ(WEXITSTATUS(status), 0);
  EXPECT_EQ(nlohmann::json::parse(out)["crystals"].get<int>(), 5);
}
