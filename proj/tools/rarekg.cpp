// rarekg command-line entry point. Links only the C API.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rarekg/rarekg.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Failure {
  rarekg_status status;
  std::string code;
  std::string message;
};

// Owns a string returned by the library.
class Owned {
public:
  Owned() = default;
  Owned(const Owned&) = delete;
  Owned& operator=(const Owned&) = delete;
  ~Owned() { rarekg_string_free(p_); }
  char** slot() { return &p_; }
  std::string str() const { return p_ ? std::string(p_) : std::string(); }
  bool empty() const { return !p_; }

private:
  char* p_ = nullptr;
};

void check(rarekg_status s) {
  if (s != RAREKG_OK) throw Failure{s, rarekg_last_error_code(), rarekg_last_error_message()};
}

[[noreturn]] void usage_error(const std::string& msg) {
  throw Failure{RAREKG_ERR_INVALID_ARGUMENT, "INVALID_ARGUMENT", "INVALID_ARGUMENT: " + msg};
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Failure{RAREKG_ERR_IO, "IO", "IO: cannot read " + path};
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spill(const fs::path& path, const std::string& content) {
  std::error_code ec;
  fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !out.write(content.data(), static_cast<std::streamsize>(content.size())))
    throw Failure{RAREKG_ERR_IO, "IO", "IO: cannot write " + path.string()};
}

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool allow_unevaluable = false;
  std::string replay;
};

class Session {
public:
  explicit Session(const Globals& g) {
    if (g.config_path.empty()) check(rarekg_config_parse("{}", ".", &cfg_));
    else check(rarekg_config_load(g.config_path.c_str(), &cfg_));
    if (g.seed) check(rarekg_config_set_seed(cfg_, *g.seed));
    if (!g.out.empty()) check(rarekg_config_set_output_dir(cfg_, g.out.c_str()));
    if (!g.replay.empty()) check(rarekg_config_set_replay(cfg_, g.replay.c_str()));
    check(rarekg_config_apply_environment(cfg_));
    Owned h;
    check(rarekg_config_hash(cfg_, h.slot()));
    hash_ = h.str();
    out_dir_ = path("output_dir");
  }
  ~Session() {
    rarekg_engine_free(engine_);
    rarekg_config_free(cfg_);
  }
  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  rarekg_config* cfg() { return cfg_; }
  const std::string& hash() const { return hash_; }

  std::string path(const char* name) const {
    Owned p;
    check(rarekg_config_path(cfg_, name, p.slot()));
    return p.str();
  }

  // Flag value, else the configured input, else an error naming both.
  std::string input(const std::string& flag_value, const char* config_name, const char* flag) const {
    if (!flag_value.empty()) return flag_value;
    auto p = path(config_name);
    if (p.empty()) usage_error(std::string(flag) + " not given and inputs." + config_name + " not configured");
    return p;
  }

  // Snapshot from the flag, the config, or the output directory; otherwise
  // a fresh build from the configured sources.
  rarekg_engine* engine(const std::string& snapshot_flag) {
    if (engine_) return engine_;
    std::string snap = snapshot_flag.empty() ? path("snapshot") : snapshot_flag;
    if (snap.empty() && fs::exists(out_dir_ / "snapshot.jsonl")) snap = (out_dir_ / "snapshot.jsonl").string();
    if (!snap.empty()) {
      check(rarekg_engine_load_snapshot(cfg_, snap.c_str(), &engine_));
    } else {
      Owned validation;
      check(rarekg_engine_build(cfg_, &engine_, validation.slot()));
    }
    return engine_;
  }

  void write(const std::string& name, const std::string& content) const { spill(out_dir_ / name, content); }

  void write_config() const {
    Owned j;
    check(rarekg_config_to_json(cfg_, j.slot()));
    auto doc = json::parse(j.str());
    doc["config_hash"] = hash();
    write("run_config.json", doc.dump(2) + "\n");
  }

  const fs::path& out_dir() const { return out_dir_; }

private:
  rarekg_config* cfg_ = nullptr;
  rarekg_engine* engine_ = nullptr;
  std::string hash_;
  fs::path out_dir_;
};

void print_error(const std::string& command, const Failure& f) {
  json j{{"error", {{"command", command}, {"code", f.code}, {"status", static_cast<int>(f.status)}, {"message", f.message}}}};
  std::cerr << j.dump() << std::endl;
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, ','))
    if (!cur.empty()) out.push_back(cur);
  return out;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rare-disease knowledge graph toolkit"};
  app.require_subcommand(1);
  Globals g;
  std::uint64_t seed_value = 0;
  app.add_option("--config", g.config_path, "Run configuration file")->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", seed_value, "Global RNG seed (overrides the config)");
  app.add_option("--out", g.out, "Output directory (overrides the config)");
  app.add_flag("--allow-unevaluable", g.allow_unevaluable, "Exit 0 from eval even when cases are unevaluable");
  app.add_option("--replay", g.replay, "Replay file for LLM completions; disables live network calls");
  app.set_version_flag("--version", rarekg_version());

  std::string snapshot;
  auto add_snapshot = [&](CLI::App* sc) { sc->add_option("--snapshot", snapshot, "Knowledge-graph snapshot to load"); };

  app.add_subcommand("build", "Parse, validate and snapshot the sources");

  std::string cases, method, predictions;
  int k = 0;
  auto* rank = app.add_subcommand("rank", "Rank diseases for each case");
  rank->add_option("--cases", cases, "Case file (line-delimited)");
  rank->add_option("--method", method, "BASE_IC or BIDIRECTIONAL");
  rank->add_option("--k", k, "Candidates per case (at most 20)");
  add_snapshot(rank);

  std::string phenotypes, disease, gene, variant, include, format = "text";
  auto* retrieve = app.add_subcommand("retrieve", "Serialize a knowledge context for a query");
  retrieve->add_option("--phenotypes", phenotypes, "Comma-separated HPO ids");
  retrieve->add_option("--disease", disease, "Disease id");
  retrieve->add_option("--gene", gene, "Gene symbol");
  retrieve->add_option("--variant", variant, "Variant key chrom:pos:ref:alt");
  retrieve->add_option("--include", include, "Comma-separated edge kinds for typed queries");
  retrieve->add_option("--k", k, "Maximum candidates for phenotype queries");
  retrieve->add_option("--format", format, "text or json")->check(CLI::IsMember({"text", "json"}));
  add_snapshot(retrieve);

  std::vector<std::string> sim_diseases;
  std::optional<std::size_t> n_signal, n_distractors, per_disease;
  auto* simulate = app.add_subcommand("simulate", "Generate synthetic cases");
  simulate->add_option("--disease", sim_diseases, "Disease id (repeatable); default every annotated disease");
  simulate->add_option("--n-signal", n_signal, "Signal terms per case");
  simulate->add_option("--n-distractors", n_distractors, "Distractor terms per case");
  simulate->add_option("--cases-per-disease", per_disease, "Cases per disease");
  add_snapshot(simulate);

  std::string slice_mode, field;
  int step = 0;
  auto* slice = app.add_subcommand("slice", "Incremental or ablation slices of a case file");
  slice->add_option("--cases", cases, "Case file (line-delimited)");
  slice->add_option("--mode", slice_mode, "incremental or ablation")
      ->required()
      ->check(CLI::IsMember({"incremental", "ablation"}));
  slice->add_option("--step", step, "Incremental step 1..6");
  slice->add_option("--field", field, "Section removed in ablation mode");

  auto* eval = app.add_subcommand("eval", "Top-K accuracy with bootstrap intervals");
  eval->add_option("--cases", cases, "Case file with truth diagnoses");
  eval->add_option("--predictions", predictions, "Model outputs (line-delimited)");
  add_snapshot(eval);

  auto* difficulty = app.add_subcommand("difficulty", "Composite difficulty and top-m selection");
  difficulty->add_option("--cases", cases, "Case file (line-delimited)");
  add_snapshot(difficulty);

  std::string scorecards;
  auto* finder = app.add_subcommand("finder", "Aggregate rater scorecards");
  finder->add_option("--scorecards", scorecards, "Scorecard CSV")->required();

  std::string target;
  auto* surrogate = app.add_subcommand("surrogate", "Linear surrogate over phenotype indicators");
  surrogate->add_option("--cases", cases, "Case file");
  surrogate->add_option("--predictions", predictions, "Model outputs (line-delimited)");
  surrogate->add_option("--target", target, "Disease whose top prediction is explained")->required();
  add_snapshot(surrogate);

  std::string features;
  auto* evidence = app.add_subcommand("evidence", "Profile HPO and non-HPO evidence per case");
  evidence->add_option("--features", features, "Line-delimited {case_id, features}")->required();
  add_snapshot(evidence);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("", Failure{RAREKG_ERR_INVALID_ARGUMENT, "INVALID_ARGUMENT", std::string("INVALID_ARGUMENT: ") + e.what()});
    return RAREKG_ERR_INVALID_ARGUMENT;
  }
  if (*seed_opt) g.seed = seed_value;

  std::string command = app.get_subcommands().front()->get_name();
  try {
    Session s(g);

    if (command == "build") {
      rarekg_engine* engine = nullptr;
      Owned validation;
      rarekg_status st = rarekg_engine_build(s.cfg(), &engine, validation.slot());
      if (!validation.empty()) s.write("validation.json", validation.str());
      check(st);
      Owned snap, stats;
      rarekg_status st2 = rarekg_engine_snapshot(engine, snap.slot());
      if (st2 == RAREKG_OK) st2 = rarekg_engine_stats(engine, stats.slot());
      rarekg_engine_free(engine);
      check(st2);
      s.write("snapshot.jsonl", snap.str());
      s.write("build_stats.json", stats.str());
      s.write_config();
      std::cout << stats.str();
    } else if (command == "rank") {
      auto* e = s.engine(snapshot);
      auto text = slurp(s.input(cases, "cases", "--cases"));
      Owned out;
      check(rarekg_engine_rank(e, text.c_str(), method.empty() ? nullptr : method.c_str(), k, out.slot()));
      s.write("rankings.jsonl", out.str());
      s.write_config();
    } else if (command == "retrieve") {
      json q;
      int typed = !disease.empty() + !gene.empty() + !variant.empty();
      if (typed + !phenotypes.empty() != 1) usage_error("give exactly one of --phenotypes, --disease, --gene, --variant");
      if (!phenotypes.empty()) {
        q = {{"type", "phenotypes"}, {"phenotypes", split_csv(phenotypes)}};
        if (k > 0) q["k"] = k;
      } else {
        q = {{"type", !disease.empty() ? "disease" : !gene.empty() ? "gene" : "variant"},
             {"key", !disease.empty() ? disease : !gene.empty() ? gene : variant}};
        if (!include.empty()) q["include"] = split_csv(include);
      }
      auto* e = s.engine(snapshot);
      bool structured = format == "json";
      Owned out;
      check(rarekg_engine_retrieve(e, q.dump().c_str(), structured ? 1 : 0, out.slot()));
      if (structured) {
        auto doc = json::parse(out.str());
        doc["config_hash"] = s.hash();
        s.write("context.json", doc.dump(2) + "\n");
      } else {
        s.write("context.txt", "# config_hash=" + s.hash() + "\n" + out.str());
      }
      s.write_config();
      std::cout << out.str();
    } else if (command == "simulate") {
      json spec = json::object();
      if (!sim_diseases.empty()) spec["diseases"] = sim_diseases;
      if (n_signal) spec["n_signal"] = *n_signal;
      if (n_distractors) spec["n_distractors"] = *n_distractors;
      if (per_disease) spec["cases_per_disease"] = *per_disease;
      auto* e = s.engine(snapshot);
      Owned out;
      check(rarekg_engine_simulate(e, spec.dump().c_str(), out.slot()));
      s.write("cases.jsonl", out.str());
      s.write_config();
    } else if (command == "slice") {
      auto text = slurp(s.input(cases, "cases", "--cases"));
      std::string arg, name;
      if (slice_mode == "incremental") {
        if (step == 0) usage_error("--step is required in incremental mode");
        arg = std::to_string(step);
        name = "cases_step" + arg + ".jsonl";
      } else {
        if (field.empty()) usage_error("--field is required in ablation mode");
        arg = field;
        name = "cases_ablate_" + field + ".jsonl";
      }
      Owned out;
      check(rarekg_slice(text.c_str(), slice_mode.c_str(), arg.c_str(), s.hash().c_str(), out.slot()));
      s.write(name, out.str());
    } else if (command == "eval") {
      auto* e = s.engine(snapshot);
      auto ctext = slurp(s.input(cases, "cases", "--cases"));
      auto ptext = slurp(s.input(predictions, "predictions", "--predictions"));
      Owned j, c;
      std::size_t n_unevaluable = 0;
      check(rarekg_engine_evaluate(e, ctext.c_str(), ptext.c_str(), j.slot(), c.slot(), &n_unevaluable));
      s.write("eval_report.json", j.str());
      s.write("eval_report.csv", c.str());
      s.write_config();
      std::cout << c.str();
      if (n_unevaluable > 0 && !g.allow_unevaluable)
        throw Failure{RAREKG_ERR_UNEVALUABLE, "UNEVALUABLE",
                      "UNEVALUABLE: " + std::to_string(n_unevaluable) +
                          " case(s) could not be evaluated; pass --allow-unevaluable to accept"};
    } else if (command == "difficulty") {
      auto* e = s.engine(snapshot);
      auto text = slurp(s.input(cases, "cases", "--cases"));
      Owned out;
      check(rarekg_engine_difficulty(e, text.c_str(), out.slot()));
      s.write("difficulty.json", out.str());
      s.write_config();
    } else if (command == "finder") {
      auto text = slurp(scorecards);
      Owned out;
      check(rarekg_finder(text.c_str(), s.hash().c_str(), out.slot()));
      s.write("finder_report.json", out.str());
    } else if (command == "surrogate") {
      auto* e = s.engine(snapshot);
      auto ctext = slurp(s.input(cases, "cases", "--cases"));
      auto ptext = slurp(s.input(predictions, "predictions", "--predictions"));
      Owned out;
      check(rarekg_engine_surrogate(e, ctext.c_str(), ptext.c_str(), target.c_str(), out.slot()));
      s.write("surrogate.json", out.str());
      s.write_config();
    } else if (command == "evidence") {
      auto* e = s.engine(snapshot);
      auto text = slurp(features);
      Owned out;
      check(rarekg_engine_evidence(e, text.c_str(), out.slot()));
      s.write("evidence.json", out.str());
      s.write_config();
    }
  } catch (const Failure& f) {
    print_error(command, f);
    return static_cast<int>(f.status);
  }
  return 0;
}
