#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "fixtures.hpp"
#include "tsnescope/io/json.hpp"
#include "tsnescope/io/session_store.hpp"

namespace fs = std::filesystem;
using tsnescope::io::json;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("tsnescope-cli-" + tsnescope::io::random_id());
    fs::create_directories(dir_);
    write("small.csv", small_csv());
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  void write(const std::string& name, const std::string& text) const { std::ofstream(path(name)) << text; }

  Outcome cli(const std::string& args) const {
    const std::string err = path("stderr.txt");
    const std::string cmd = std::string(TSNESCOPE_CLI) + " " + args + " 2>" + err;
    Outcome o;
    FILE* pipe = popen(cmd.c_str(), "r");
    char buf[4096];
    while (std::size_t got = std::fread(buf, 1, sizeof buf, pipe)) o.out.append(buf, got);
    const int status = pclose(pipe);
    o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    o.err = fixtures::read_file(err);
    return o;
  }

  static std::string small_csv() {
    fixtures::Rng rng(9);
    std::string csv = "a,b,c,label\n";
    for (int i = 0; i < 24; ++i) {
      const double off = i < 12 ? 0.0 : 4.0;
      csv += std::to_string(off + rng.normal() * 0.5) + "," + std::to_string(rng.normal()) + "," +
             std::to_string(off + rng.normal()) + "," + (i < 12 ? "p" : "q") + "\n";
    }
    return csv;
  }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(cli("").code, 2);
  EXPECT_EQ(cli("frobnicate").code, 2);
  EXPECT_EQ(cli("run --perplexity abc").code, 2);
  EXPECT_EQ(cli("--help").code, 0);
}

TEST_F(CliTest, IngestAndInputErrors) {
  const auto ok = cli("ingest --csv " + fixtures::data_path("iris.csv") + " --label-column species");
  ASSERT_EQ(ok.code, 0) << ok.err;
  const auto j = json::parse(ok.out);
  EXPECT_EQ(j["n"], 150);
  EXPECT_EQ(j["labels"][0], "setosa");

  const auto missing = cli("ingest --csv " + fixtures::data_path("breast_cancer_wisconsin_raw.csv") +
                           " --label-column class");
  EXPECT_EQ(missing.code, 4);
  EXPECT_NE(missing.err.find("missing value at row"), std::string::npos) << missing.err;
  EXPECT_EQ(cli("ingest --csv /nonexistent.csv").code, 3);
  EXPECT_EQ(cli("ingest").code, 4);
}

TEST_F(CliTest, RunThenQueryProjection) {
  const auto r = cli("run --csv " + path("small.csv") + " --perplexity 5 --max-iterations 200 --seed 2 --out " +
                     path("proj.json"));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto proj = json::parse(fixtures::read_file(path("proj.json")));
  EXPECT_EQ(proj["record"]["embedding"]["shape"], (json{24, 2}));
  const auto again = cli("run --csv " + path("small.csv") + " --perplexity 5 --max-iterations 200 --seed 2");
  EXPECT_EQ(json::parse(again.out), proj);  // deterministic

  const std::string src = "--csv " + path("small.csv") + " --projection " + path("proj.json");
  write("sel.json", R"({"selection": [0, 1, 2, 3]})");
  const auto q = cli("quality " + src + " --selection " + path("sel.json") + " --metric T");
  ASSERT_EQ(q.code, 0) << q.err;
  const auto qj = json::parse(q.out);
  EXPECT_TRUE(qj["scores"]["NH"].is_number());
  EXPECT_EQ(qj["selection_score"]["metric"], "T");
  std::uint64_t total = 0;
  for (const auto& row : qj["shepard"]["counts"])
    for (const auto& c : row) total += c.get<std::uint64_t>();
  EXPECT_EQ(total, 24u * 23u / 2u);

  const auto np = cli("np " + src + " --selection " + path("sel.json") + " --variant diff-line --k-max 5");
  ASSERT_EQ(np.code, 0) << np.err;
  EXPECT_EQ(json::parse(np.out)["difference"].size(), 5u);

  write("line.json", R"({"polyline": [[-100, 0], [100, 0]], "rho": 1000})");
  const auto dc = cli("dimcorr " + src + " --polyline " + path("line.json"));
  ASSERT_EQ(dc.code, 0) << dc.err;
  EXPECT_EQ(json::parse(dc.out)["correlations"].size(), 3u);

  write("bad_line.json", R"({"polyline": [[0, 0]]})");
  EXPECT_EQ(cli("dimcorr " + src + " --polyline " + path("bad_line.json")).code, 4);
  write("far_line.json", R"({"polyline": [[1e6, 0], [1e6, 1]], "rho": 0.5})");
  EXPECT_EQ(cli("dimcorr " + src + " --polyline " + path("far_line.json")).code, 5);

  const auto ax = cli("axes --csv " + path("small.csv") + " --selection " + path("sel.json"));
  ASSERT_EQ(ax.code, 0) << ax.err;
  EXPECT_EQ(json::parse(ax.out)["axes"].size(), 3u);
}

TEST_F(CliTest, GridSearch) {
  const auto g = cli("grid --csv " + path("small.csv") +
                     " --perplexities 3,5 --learning-rates 50,200 --iterations 60 --representatives 3 --top 2");
  ASSERT_EQ(g.code, 0) << g.err;
  const auto j = json::parse(g.out);
  EXPECT_EQ(j["pool_size"], 4);
  EXPECT_EQ(j["representative_set"]["medoid_ids"].size(), 3u);
  EXPECT_EQ(j["representatives"].size(), 3u);
  EXPECT_EQ(j["ranking"]["ids"].size(), 2u);
  const auto par = cli("grid --csv " + path("small.csv") +
                       " --perplexities 3,5 --learning-rates 50,200 --iterations 60 --representatives 3 --top 2 "
                       "--parallelism 4");
  EXPECT_EQ(par.out, g.out);
  EXPECT_EQ(cli("grid --csv " + path("small.csv") + " --perplexities x").code, 4);
}
