#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "rarekg/clients.hpp"
#include "rarekg/eval.hpp"
#include "rarekg/ranking.hpp"

namespace rarekg {

// A path as written in the config file and its resolution against the
// config file's directory.
struct ConfigPath {
  std::string written;
  std::string resolved;

  bool empty() const noexcept { return written.empty(); }
};

struct InputPaths {
  ConfigPath ontology;
  std::string ontology_format = "obo";  // obo | json
  ConfigPath disease_ontology;
  std::string disease_ontology_format = "obo";
  ConfigPath hpoa;
  ConfigPath genes;
  ConfigPath variants;
  std::string variants_format = "vcf";  // vcf | tsv
  ConfigPath normalization;
  ConfigPath xrefs;
  ConfigPath cases;
  ConfigPath predictions;
  ConfigPath snapshot;
};

struct SyntheticDefaults {
  std::size_t n_signal = 3;
  std::optional<std::size_t> n_distractors;
  std::size_t distractor_min = 1;
  std::size_t distractor_max = 5;
  std::size_t cases_per_disease = 1;
  std::vector<std::string> diseases;  // empty: every annotated disease
};

struct RetrievalDefaults {
  std::size_t max_candidates = 20;
  bool propagate = true;
  bool frequency_weighting = false;
};

struct DifficultyDefaults {
  ExtremaSource extrema = ExtremaSource::Cases;
  std::size_t top_m = 300;
  SelectionMode selection = SelectionMode::HighestComposite;
};

struct RunConfig {
  std::string base_dir;
  InputPaths inputs;
  std::optional<std::set<std::string>> ic_provenances;
  double max_reject_rate = 0.01;
  EvalConfig eval;
  SyntheticDefaults synthetic;
  RetrievalDefaults retrieval;
  RankOptions ranking;
  DifficultyDefaults difficulty;
  ResolverConfig resolver;
  ConfigPath resolver_cache;
  LlmEndpointConfig llm;
  ConfigPath llm_replay;
  ConfigPath output_dir;
  std::uint64_t seed = 0;

  // Canonical document: defaults filled in, paths as written, no secrets.
  std::string to_json() const;
  // SHA-256 of the canonical document without output_dir.
  std::string hash() const;

  void set_seed(std::uint64_t s);
  void set_output_dir(const std::string& dir);
  // Replays recorded completions only; the resolver is confined to its cache.
  void set_replay(const std::string& path);
};

// Parses a config document, resolving relative paths against base_dir.
// Every referenced input path must exist. Throws MALFORMED_LINE (bad
// document), INVALID_ARGUMENT (bad values), IO (missing path).
RunConfig parse_run_config(std::string_view json_text, const std::string& base_dir);
// Throws IO when the file cannot be read.
RunConfig load_run_config(const std::string& path);

// Applies RAREKG_RESOLVER_URL, RAREKG_LLM_URL and RAREKG_LLM_KEY. These never
// enter the config hash.
void apply_environment(RunConfig& cfg);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

} // namespace rarekg
