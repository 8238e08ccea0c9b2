#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "csc/harness/cli.hpp"
#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "csc_cli");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = csc::harness::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

// Scratch directory removed when the test case ends.
class Scratch {
 public:
  explicit Scratch(const std::string& tag)
      : dir_(fs::temp_directory_path() / ("csc_cli_test_" + tag)) {
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  ~Scratch() { fs::remove_all(dir_); }
  Scratch(const Scratch&) = delete;
  Scratch& operator=(const Scratch&) = delete;

  std::string write(const std::string& name, const std::string& text) const {
    const fs::path p = dir_ / name;
    std::ofstream(p) << text;
    return p.string();
  }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

 private:
  fs::path dir_;
};

std::string read(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int count_lines(const std::string& s) {
  int n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

const char* kTinyExperiment = R"({
  "dataset": {"n_classes": 5, "dim": 20, "train_per_class": 6, "test_total": 20, "seed": 2},
  "arch": {"width": 3, "kernel_size": 3, "seed": 4},
  "learn": {"outer_iterations": 3, "batch_size": 8, "probe_size": 6, "pursuit": {"iterations": 30}}
})";

}  // namespace

TEST_CASE("cli coherence on the dilated 2x2 example") {
  const Run r = run({"coherence", "--kernel-size", "2x2", "--dilation", "2", "--input-shape", "4x4"});
  CHECK(r.code == 0);
  CHECK(r.out == "mu,lemma1_threshold\n0,inf\n");

  const Run dense = run({"coherence", "--kernel-size", "2x2", "--dilation", "1", "--input-shape", "4x4"});
  CHECK(dense.code == 0);
  CHECK(dense.out.rfind("mu,lemma1_threshold\n0.", 0) == 0);
}

TEST_CASE("cli coherence errors exit with 2") {
  CHECK(run({"coherence", "--kernel-size", "5x5", "--input-shape", "4x4"}).code == 2);
  CHECK(run({"coherence", "--kernel-size", "2", "--input-shape", "4xq"}).code == 2);
  const Run r = run({"coherence", "--kernel-size", "2", "--input-shape", "8", "--bogus"});
  CHECK(r.code == 2);
  CHECK_FALSE(r.err.empty());
}

TEST_CASE("cli rejects unknown subcommands and flags") {
  CHECK(run({}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({"verify", "--nope"}).code == 2);
  CHECK(run({"--help"}).code == 0);
}

TEST_CASE("cli verify reports every check as JSON") {
  const Run r = run({"verify"});
  const auto j = nlohmann::json::parse(r.out);
  REQUIRE(j["checks"].is_array());
  bool all = true;
  for (const auto& c : j["checks"]) {
    CHECK(c.contains("name"));
    CHECK(c.contains("instances"));
    CHECK(c.contains("max_deviation"));
    all = all && c["pass"].get<bool>();
    if (c["name"] == "lemma3_literal") CHECK_FALSE(c["pass"].get<bool>());
  }
  CHECK(j["all_pass"] == all);
  CHECK(r.code == (all ? 0 : 1));
  CHECK(run({"verify"}).out == r.out);
}

TEST_CASE("cli pursue writes the trace CSV") {
  Scratch s("pursue");
  const std::string cfg = s.write("p.json", R"({
    "dictionary": {"input_shape": [6, 1], "kernel_size": 2, "padding": "same", "kernels": [[1, 0.5], [0, 1]]},
    "signal": [1, -2, 0.5, 3, 0, 1], "beta": 0.1, "iterations": 50, "solver": "fista"})");
  const Run r = run({"pursue", "--config", cfg});
  CHECK(r.code == 0);
  CHECK(r.out.rfind("iter,objective,delta_inf\n0,", 0) == 0);
  CHECK(count_lines(r.out) >= 2);

  const Run f = run({"pursue", "--config", cfg, "--out", s.path("trace.csv")});
  CHECK(f.code == 0);
  CHECK(read(s.path("trace.csv")) == r.out);

  const std::string msd = s.write("m.json", R"({
    "dictionary": {"input_shape": [6, 1], "kernel_size": 2, "padding": "same", "kernels": [[1, 0.5]]},
    "signal": [1, -2, 0.5, 3, 0, 1], "msd": true, "nonneg": true})");
  CHECK(run({"pursue", "--config", msd}).code == 0);
}

TEST_CASE("cli pursue config errors exit with 2") {
  Scratch s("pursue_bad");
  CHECK(run({"pursue"}).code == 2);
  CHECK(run({"pursue", "--config", s.path("missing.json")}).code == 2);
  const Run bad = run({"pursue", "--config", s.write("bad.json", "{not json")});
  CHECK(bad.code == 2);
  CHECK(bad.err.find("malformed") != std::string::npos);
  CHECK(run({"pursue", "--config", s.write("nosig.json",
                                          R"({"dictionary": {"input_shape": [4, 1], "kernel_size": 2, "kernels": [[1, 0]]}})")})
            .code == 2);
}

TEST_CASE("cli fig4 writes one row per outer iteration") {
  Scratch s("fig4");
  const std::string cfg = s.write("f.json", kTinyExperiment);
  const Run r = run({"fig4", "--config", cfg, "--out", s.path("out")});
  CHECK(r.code == 0);
  const std::string csv = read(s.path("out/fig4.csv"));
  CHECK(csv.rfind("iteration,unsuccess_ml,unsuccess_msd,objective_ml,objective_msd,beta\n", 0) == 0);
  CHECK(count_lines(csv) == 4);

  CHECK(run({"fig4", "--config", cfg, "--out", s.path("again")}).code == 0);
  CHECK(read(s.path("again/fig4.csv")) == csv);
  CHECK(run({"fig4", "--config", cfg, "--out", s.path("seeded"), "--seed", "7"}).code == 0);
  CHECK(read(s.path("seeded/fig4.csv")) != csv);

  CHECK(run({"fig4", "--config", s.write("x.json", R"({"learn": {"dict_step": -1}})"), "--out",
             s.path("x")})
            .code == 2);
}

TEST_CASE("cli unfold-sweep emits one row per unfolding value") {
  Scratch s("unfold");
  const std::string cfg = s.write("u.json", kTinyExperiment);
  const Run r = run({"unfold-sweep", "--config", cfg, "--unfolding", "0,1,2", "--solver", "ista"});
  CHECK(r.code == 0);
  std::istringstream lines(r.out);
  std::string line;
  std::getline(lines, line);
  CHECK(line == "unfolding,solver,mean_objective,accuracy");
  std::vector<std::string> rows;
  while (std::getline(lines, line)) rows.push_back(line);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].rfind("0,ista,", 0) == 0);
  CHECK(rows[2].rfind("2,ista,", 0) == 0);

  CHECK(run({"unfold-sweep", "--config", cfg, "--unfolding", "0,1,2", "--solver", "ista"}).out == r.out);
  CHECK(run({"unfold-sweep", "--config", cfg, "--solver", "lista"}).code == 2);
  CHECK(run({"unfold-sweep", "--config", cfg, "--unfolding", "0,-1"}).code == 2);
}
