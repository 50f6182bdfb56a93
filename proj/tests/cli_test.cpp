#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

const std::string kData = RAREKG_TEST_DATA;
const std::string kScratch = RAREKG_SCRATCH;

struct Run {
  int code = -1;
  std::string output;
};

// Runs the CLI with stderr folded into the captured output.
Run cli(const std::string& args) {
  std::string cmd = std::string("\"") + RAREKG_CLI + "\" " + args + " 2>&1";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.output.append(buf, n);
  int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string read(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<json> lines(const std::string& text) {
  std::vector<json> out;
  std::istringstream in(text);
  std::string l;
  while (std::getline(in, l))
    if (!l.empty()) out.push_back(json::parse(l));
  return out;
}

fs::path fresh(const std::string& name) {
  fs::path d = fs::path(kScratch) / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string config(const std::string& name = "config.json") { return "--config \"" + kData + "/" + name + "\""; }

std::string data(const std::string& name) { return "\"" + kData + "/" + name + "\""; }

} // namespace

TEST_CASE("build is reproducible") {
  auto a = fresh("build_a");
  auto b = fresh("build_b");
  auto r1 = cli(config() + " --out " + a.string() + " build");
  REQUIRE(r1.code == 0);
  REQUIRE(cli(config() + " --out " + b.string() + " build").code == 0);
  CHECK(read(a / "snapshot.jsonl") == read(b / "snapshot.jsonl"));
  CHECK(read(a / "build_stats.json") == read(b / "build_stats.json"));
  auto ca = json::parse(read(a / "run_config.json"));
  auto cb = json::parse(read(b / "run_config.json"));
  CHECK(ca["config_hash"] == cb["config_hash"]);
  ca.erase("output_dir");
  cb.erase("output_dir");
  CHECK(ca == cb);
  CHECK(json::parse(read(a / "validation.json"))["clean"] == true);
}

TEST_CASE("dangling annotation fails validation") {
  auto d = fresh("dangling");
  auto doc = json::parse(read(kData + "/config.json"));
  for (auto& [k, v] : doc["inputs"].items()) v = kData + "/" + v.get<std::string>();
  doc["inputs"]["hpoa"] = kData + "/annotations_dangling.hpoa";
  std::ofstream(d / "config.json") << doc.dump(2);
  auto r = cli("--config " + (d / "config.json").string() + " --out " + (d / "out").string() + " build");
  CHECK(r.code == 2);
  CHECK(r.output.find("VALIDATION_NOT_CLEAN") != std::string::npos);
  auto report = json::parse(read(d / "out" / "validation.json"));
  CHECK(report["error_count"] == 1);
  CHECK(report["findings"][0]["kind"] == "dangling_phenotype");
  CHECK(report["findings"][0]["detail"].get<std::string>().find("HP:9999999") != std::string::npos);
  CHECK_FALSE(fs::exists(d / "out" / "snapshot.jsonl"));
}

TEST_CASE("simulate is seed-deterministic") {
  auto a = fresh("sim_a");
  auto b = fresh("sim_b");
  auto c = fresh("sim_c");
  REQUIRE(cli(config() + " --seed 42 --out " + a.string() + " simulate").code == 0);
  REQUIRE(cli(config() + " --seed 42 --out " + b.string() + " simulate").code == 0);
  REQUIRE(cli(config() + " --seed 43 --out " + c.string() + " simulate").code == 0);
  auto text = read(a / "cases.jsonl");
  CHECK(text == read(b / "cases.jsonl"));
  CHECK(text != read(c / "cases.jsonl"));
  auto cases = lines(text);
  CHECK(cases.size() >= 10);
  for (const auto& k : cases) CHECK(k["meta"]["seed"].is_number());

  auto one = fresh("sim_one");
  REQUIRE(cli(config() + " --out " + one.string() + " simulate --disease ORPHA:905 --n-signal 2 --n-distractors 0")
              .code == 0);
  auto only = lines(read(one / "cases.jsonl"));
  REQUIRE(only.size() == 1);
  CHECK(only[0]["phenotypes"].size() == 2);
  CHECK(only[0]["truth"] == "ORPHA:905");
  auto too_many = cli(config() + " --out " + one.string() + " simulate --disease ORPHA:905 --n-signal 40");
  CHECK(too_many.code != 0);
  CHECK(too_many.output.find("INSUFFICIENT_ANNOTATIONS") != std::string::npos);
}

TEST_CASE("rank, retrieve and difficulty run from a snapshot") {
  auto d = fresh("rank");
  REQUIRE(cli(config() + " --out " + d.string() + " build").code == 0);
  REQUIRE(cli(config() + " --out " + d.string() + " simulate").code == 0);
  auto cases = (d / "cases.jsonl").string();
  REQUIRE(cli(config() + " --out " + d.string() + " rank --cases " + cases + " --k 50").code == 0);
  auto ranks = lines(read(d / "rankings.jsonl"));
  CHECK(ranks.size() == lines(read(d / "cases.jsonl")).size());
  for (const auto& r : ranks) CHECK(r["rankings"].size() <= 20);

  REQUIRE(cli(config() + " --out " + d.string() + " retrieve --phenotypes HP:0200032,HP:0001394,HP:0001250 --k 5")
              .code == 0);
  auto ctx = read(d / "context.txt");
  auto golden = read(fs::path(kData).parent_path() / "golden" / "context_kf_cirrhosis_seizure.txt");
  CHECK(ctx.substr(ctx.find('\n') + 1) == golden);
  CHECK(cli(config() + " --out " + d.string() + " retrieve --gene NOPE1").code == 5);

  REQUIRE(cli(config() + " --out " + d.string() + " difficulty --cases " + cases).code == 0);
  CHECK(json::parse(read(d / "difficulty.json"))["cases"].size() > 0);
}

TEST_CASE("slice step 6 keeps content") {
  auto d = fresh("slice");
  REQUIRE(cli(config() + " --out " + d.string() + " slice --cases " + data("slice_cases.jsonl") +
              " --mode incremental --step 6")
              .code == 0);
  auto in = lines(read(kData + "/slice_cases.jsonl"));
  auto out = lines(read(d / "cases_step6.jsonl"));
  REQUIRE(in.size() == out.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    auto a = in[i], b = out[i];
    a.erase("meta");
    b.erase("meta");
    CHECK(a == b);
    CHECK(out[i]["meta"]["config_hash"].get<std::string>().size() == 64);
  }
  REQUIRE(cli(config() + " --out " + d.string() + " slice --cases " + data("slice_cases.jsonl") +
              " --mode ablation --field FAMILY_HISTORY")
              .code == 0);
  for (const auto& c : lines(read(d / "cases_ablate_FAMILY_HISTORY.jsonl")))
    CHECK(c["sections"]["FAMILY_HISTORY"] == "");
  CHECK(cli(config() + " --out " + d.string() + " slice --cases " + data("slice_cases.jsonl") +
            " --mode incremental --step 7")
            .code == 4);
  CHECK(cli(config() + " --out " + d.string() + " slice --mode sideways").code == 4);
}

TEST_CASE("eval reports and the unevaluable gate") {
  auto d = fresh("eval");
  auto args = " eval --cases " + data("eval_cases.jsonl") + " --predictions " + data("eval_predictions.jsonl");
  auto gated = cli(config() + " --out " + d.string() + args);
  CHECK(gated.code == 7);
  CHECK(gated.output.find("UNEVALUABLE") != std::string::npos);
  auto r = cli(config() + " --allow-unevaluable --out " + d.string() + args);
  REQUIRE(r.code == 0);
  auto csv = read(d / "eval_report.csv");
  auto hash = json::parse(read(d / "run_config.json"))["config_hash"].get<std::string>();
  CHECK(csv.rfind("# config_hash=" + hash + " seed=42\n", 0) == 0);
  auto report = json::parse(read(d / "eval_report.json"));
  CHECK(report["n_evaluated"] == 8);
  std::vector<int> hits;
  for (const auto& row : report["overall"]) hits.push_back(row["hits"]);
  CHECK(hits == std::vector<int>{3, 5, 5, 6, 7});

  auto replay = fresh("eval_replay");
  auto rr = cli(config("config_replay.json") + " --allow-unevaluable --out " + replay.string() + args);
  REQUIRE(rr.code == 0);
  auto replayed = json::parse(read(replay / "eval_report.json"));
  CHECK(replayed["overall"] == report["overall"]);
}

TEST_CASE("finder, surrogate and evidence") {
  auto d = fresh("analysis");
  REQUIRE(cli(config() + " --out " + d.string() + " finder --scorecards " + data("finder_scorecards.csv")).code == 0);
  auto finder = json::parse(read(d / "finder_report.json"));
  CHECK(finder["config_hash"].get<std::string>().size() == 64);

  REQUIRE(cli(config() + " --out " + d.string() + " surrogate --target ORPHA:905 --cases " + data("eval_cases.jsonl") +
              " --predictions " + data("eval_predictions.jsonl"))
              .code == 0);
  auto sur = json::parse(read(d / "surrogate.json"));
  CHECK(sur.contains("coefficients"));

  REQUIRE(cli(config() + " --out " + d.string() + " evidence --features " + data("evidence_features.jsonl")).code ==
          0);
  auto ev = read(d / "evidence.json");
  CHECK(ev.find("0.2307") != std::string::npos);
}

TEST_CASE("usage errors") {
  CHECK(cli("").code == 4);
  CHECK(cli(config() + " frobnicate").code == 4);
  CHECK(cli("--config /nonexistent.json build").code == 4);
}
