#include "rarekg/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "hash.hpp"
#include "rarekg/error.hpp"

namespace rarekg {

namespace fs = std::filesystem;
using nlohmann::json;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view content) {
  auto parent = fs::path(path).parent_path();
  std::error_code ec;
  if (!parent.empty()) fs::create_directories(parent, ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path);
}

namespace {

ConfigPath resolve(const std::string& written, const std::string& base_dir) {
  if (written.empty()) return {};
  fs::path p(written);
  if (p.is_relative()) p = fs::path(base_dir) / p;
  return {written, p.lexically_normal().string()};
}

[[noreturn]] void bad(const std::string& msg) { throw Error(ErrorCode::InvalidArgument, "config: " + msg); }

void check_keys(const json& j, const char* section, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) bad(std::string(section) + " must be an object");
  for (const auto& [k, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    if (!ok) bad("unknown key '" + k + "' in " + section);
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end() && !it->is_null()) {
    try {
      out = it->get<T>();
    } catch (const json::exception&) {
      bad(std::string("bad value for '") + key + "'");
    }
  }
}

json path_json(const ConfigPath& p) { return p.empty() ? json(nullptr) : json(p.written); }

std::string extrema_name(ExtremaSource s) { return s == ExtremaSource::Cases ? "cases" : "diseases"; }
std::string selection_name(SelectionMode m) {
  return m == SelectionMode::HighestComposite ? "highest_composite" : "lowest_mean_ic";
}

json canonical(const RunConfig& c, bool with_output) {
  const auto& in = c.inputs;
  json doc;
  doc["inputs"] = {{"ontology", path_json(in.ontology)},
                   {"ontology_format", in.ontology_format},
                   {"disease_ontology", path_json(in.disease_ontology)},
                   {"disease_ontology_format", in.disease_ontology_format},
                   {"hpoa", path_json(in.hpoa)},
                   {"genes", path_json(in.genes)},
                   {"variants", path_json(in.variants)},
                   {"variants_format", in.variants_format},
                   {"normalization", path_json(in.normalization)},
                   {"xrefs", path_json(in.xrefs)},
                   {"cases", path_json(in.cases)},
                   {"predictions", path_json(in.predictions)},
                   {"snapshot", path_json(in.snapshot)}};
  doc["ic"] = {{"provenances", c.ic_provenances ? json(*c.ic_provenances) : json(nullptr)}};
  doc["ingest"] = {{"max_reject_rate", c.max_reject_rate}};
  const auto& e = c.eval;
  doc["eval"] = {{"k_cutoffs", e.k_cutoffs},
                 {"hierarchical", e.hierarchical},
                 {"max_ancestor_depth", e.max_ancestor_depth ? json(*e.max_ancestor_depth) : json("unlimited")},
                 {"bootstrap_resamples", e.bootstrap_resamples},
                 {"ci_level", e.ci_level}};
  const auto& s = c.synthetic;
  doc["synthetic"] = {{"n_signal", s.n_signal},
                      {"n_distractors", s.n_distractors ? json(*s.n_distractors) : json(nullptr)},
                      {"distractor_min", s.distractor_min},
                      {"distractor_max", s.distractor_max},
                      {"cases_per_disease", s.cases_per_disease},
                      {"diseases", s.diseases}};
  doc["retrieval"] = {{"max_candidates", c.retrieval.max_candidates},
                      {"propagate", c.retrieval.propagate},
                      {"frequency_weighting", c.retrieval.frequency_weighting}};
  doc["ranking"] = {{"method", to_string(c.ranking.method)}, {"k", c.ranking.k}, {"propagate", c.ranking.propagate}};
  doc["difficulty"] = {{"extrema", extrema_name(c.difficulty.extrema)},
                       {"top_m", c.difficulty.top_m},
                       {"selection", selection_name(c.difficulty.selection)}};
  doc["resolver"] = {{"enabled", c.resolver.enabled},
                     {"base_url", c.resolver.base_url},
                     {"timeout_ms", c.resolver.timeout.count()},
                     {"cache", path_json(c.resolver_cache)},
                     {"requests_per_second", c.resolver.requests_per_second}};
  doc["llm"] = {{"base_url", c.llm.base_url},
                {"model", c.llm.model},
                {"max_tokens", c.llm.max_tokens},
                {"temperature", c.llm.temperature},
                {"timeout_ms", c.llm.timeout.count()},
                {"replay", path_json(c.llm_replay)},
                {"replay_only", c.llm.replay_only},
                {"requests_per_second", c.llm.requests_per_second}};
  if (with_output) doc["output_dir"] = path_json(c.output_dir);
  doc["seed"] = c.seed;
  return doc;
}

} // namespace

std::string RunConfig::to_json() const { return canonical(*this, true).dump(2) + "\n"; }

std::string RunConfig::hash() const { return detail::sha256_hex(canonical(*this, false).dump()); }

void RunConfig::set_seed(std::uint64_t s) {
  seed = s;
  eval.rng_seed = s;
}

void RunConfig::set_output_dir(const std::string& dir) {
  output_dir = {dir, fs::absolute(dir).lexically_normal().string()};
}

void RunConfig::set_replay(const std::string& path) {
  llm_replay = {path, fs::absolute(path).lexically_normal().string()};
  llm.replay_path = llm_replay.resolved;
  llm.replay_only = true;
  resolver.enabled = false;
}

RunConfig parse_run_config(std::string_view json_text, const std::string& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedLine, std::string("config: ") + e.what());
  }
  check_keys(doc, "config",
             {"inputs", "ic", "ingest", "eval", "synthetic", "retrieval", "ranking", "difficulty", "resolver", "llm",
              "output_dir", "seed"});

  RunConfig c;
  c.base_dir = base_dir;
  auto path = [&](const json& j, const char* key, ConfigPath& out) {
    std::string w;
    read(j, key, w);
    out = resolve(w, base_dir);
  };

  if (auto it = doc.find("inputs"); it != doc.end()) {
    const auto& j = *it;
    check_keys(j, "inputs",
               {"ontology", "ontology_format", "disease_ontology", "disease_ontology_format", "hpoa", "genes",
                "variants", "variants_format", "normalization", "xrefs", "cases", "predictions", "snapshot"});
    auto& in = c.inputs;
    path(j, "ontology", in.ontology);
    read(j, "ontology_format", in.ontology_format);
    path(j, "disease_ontology", in.disease_ontology);
    read(j, "disease_ontology_format", in.disease_ontology_format);
    path(j, "hpoa", in.hpoa);
    path(j, "genes", in.genes);
    path(j, "variants", in.variants);
    read(j, "variants_format", in.variants_format);
    path(j, "normalization", in.normalization);
    path(j, "xrefs", in.xrefs);
    path(j, "cases", in.cases);
    path(j, "predictions", in.predictions);
    path(j, "snapshot", in.snapshot);
    for (const auto* fmt : {&in.ontology_format, &in.disease_ontology_format})
      if (*fmt != "obo" && *fmt != "json") bad("ontology formats are obo or json");
    if (in.variants_format != "vcf" && in.variants_format != "tsv") bad("variants_format is vcf or tsv");
    for (const auto* p : {&in.ontology, &in.disease_ontology, &in.hpoa, &in.genes, &in.variants, &in.normalization,
                          &in.xrefs, &in.cases, &in.predictions, &in.snapshot})
      if (!p->empty() && !fs::exists(p->resolved))
        throw Error(ErrorCode::Io, "config: input path does not exist: " + p->written);
  }
  if (auto it = doc.find("ic"); it != doc.end()) {
    check_keys(*it, "ic", {"provenances"});
    if (auto p = it->find("provenances"); p != it->end() && !p->is_null()) {
      std::set<std::string> s;
      read(*it, "provenances", s);
      c.ic_provenances = s;
    }
  }
  if (auto it = doc.find("ingest"); it != doc.end()) {
    check_keys(*it, "ingest", {"max_reject_rate"});
    read(*it, "max_reject_rate", c.max_reject_rate);
    if (c.max_reject_rate < 0.0 || c.max_reject_rate > 1.0) bad("max_reject_rate must lie in [0,1]");
  }
  if (auto it = doc.find("eval"); it != doc.end()) {
    const auto& j = *it;
    check_keys(j, "eval", {"k_cutoffs", "hierarchical", "max_ancestor_depth", "bootstrap_resamples", "ci_level"});
    read(j, "k_cutoffs", c.eval.k_cutoffs);
    read(j, "hierarchical", c.eval.hierarchical);
    if (auto d = j.find("max_ancestor_depth"); d != j.end()) {
      if (d->is_string() && d->get<std::string>() == "unlimited") c.eval.max_ancestor_depth.reset();
      else if (d->is_number_unsigned()) c.eval.max_ancestor_depth = d->get<std::size_t>();
      else bad("max_ancestor_depth is a positive integer or \"unlimited\"");
    }
    read(j, "bootstrap_resamples", c.eval.bootstrap_resamples);
    read(j, "ci_level", c.eval.ci_level);
    c.eval.validate();
  }
  if (auto it = doc.find("synthetic"); it != doc.end()) {
    const auto& j = *it;
    check_keys(j, "synthetic",
               {"n_signal", "n_distractors", "distractor_min", "distractor_max", "cases_per_disease", "diseases"});
    auto& s = c.synthetic;
    read(j, "n_signal", s.n_signal);
    if (auto d = j.find("n_distractors"); d != j.end() && !d->is_null()) {
      std::size_t n = 0;
      read(j, "n_distractors", n);
      s.n_distractors = n;
    }
    read(j, "distractor_min", s.distractor_min);
    read(j, "distractor_max", s.distractor_max);
    read(j, "cases_per_disease", s.cases_per_disease);
    read(j, "diseases", s.diseases);
    if (s.n_signal < 1) bad("n_signal must be positive");
    if (s.distractor_min > s.distractor_max) bad("distractor_min exceeds distractor_max");
    if (s.cases_per_disease < 1) bad("cases_per_disease must be positive");
  }
  if (auto it = doc.find("retrieval"); it != doc.end()) {
    check_keys(*it, "retrieval", {"max_candidates", "propagate", "frequency_weighting"});
    read(*it, "max_candidates", c.retrieval.max_candidates);
    read(*it, "propagate", c.retrieval.propagate);
    read(*it, "frequency_weighting", c.retrieval.frequency_weighting);
    if (c.retrieval.max_candidates < 1) bad("max_candidates must be positive");
  }
  if (auto it = doc.find("ranking"); it != doc.end()) {
    check_keys(*it, "ranking", {"method", "k", "propagate"});
    std::string m = std::string(to_string(c.ranking.method));
    read(*it, "method", m);
    auto method = rank_method_from_name(m);
    if (!method) bad("ranking method is BASE_IC or BIDIRECTIONAL");
    c.ranking.method = *method;
    read(*it, "k", c.ranking.k);
    read(*it, "propagate", c.ranking.propagate);
    if (c.ranking.k < 1) bad("ranking k must be positive");
  }
  if (auto it = doc.find("difficulty"); it != doc.end()) {
    check_keys(*it, "difficulty", {"extrema", "top_m", "selection"});
    std::string ex = extrema_name(c.difficulty.extrema), sel = selection_name(c.difficulty.selection);
    read(*it, "extrema", ex);
    read(*it, "top_m", c.difficulty.top_m);
    read(*it, "selection", sel);
    if (ex == "cases") c.difficulty.extrema = ExtremaSource::Cases;
    else if (ex == "diseases") c.difficulty.extrema = ExtremaSource::Diseases;
    else bad("difficulty extrema is cases or diseases");
    if (sel == "highest_composite") c.difficulty.selection = SelectionMode::HighestComposite;
    else if (sel == "lowest_mean_ic") c.difficulty.selection = SelectionMode::LowestMeanIc;
    else bad("difficulty selection is highest_composite or lowest_mean_ic");
    if (c.difficulty.top_m < 1) bad("top_m must be positive");
  }
  if (auto it = doc.find("resolver"); it != doc.end()) {
    check_keys(*it, "resolver", {"enabled", "base_url", "timeout_ms", "cache", "requests_per_second"});
    read(*it, "enabled", c.resolver.enabled);
    read(*it, "base_url", c.resolver.base_url);
    std::int64_t ms = c.resolver.timeout.count();
    read(*it, "timeout_ms", ms);
    c.resolver.timeout = std::chrono::milliseconds(ms);
    path(*it, "cache", c.resolver_cache);
    c.resolver.cache_path = c.resolver_cache.resolved;
    read(*it, "requests_per_second", c.resolver.requests_per_second);
  }
  if (auto it = doc.find("llm"); it != doc.end()) {
    check_keys(*it, "llm",
               {"base_url", "model", "max_tokens", "temperature", "timeout_ms", "replay", "replay_only",
                "requests_per_second"});
    read(*it, "base_url", c.llm.base_url);
    read(*it, "model", c.llm.model);
    read(*it, "max_tokens", c.llm.max_tokens);
    read(*it, "temperature", c.llm.temperature);
    std::int64_t ms = c.llm.timeout.count();
    read(*it, "timeout_ms", ms);
    c.llm.timeout = std::chrono::milliseconds(ms);
    path(*it, "replay", c.llm_replay);
    c.llm.replay_path = c.llm_replay.resolved;
    read(*it, "replay_only", c.llm.replay_only);
    read(*it, "requests_per_second", c.llm.requests_per_second);
  }
  std::string out_dir;
  read(doc, "output_dir", out_dir);
  c.output_dir = resolve(out_dir.empty() ? "out" : out_dir, base_dir);
  std::uint64_t seed = 0;
  read(doc, "seed", seed);
  c.set_seed(seed);
  return c;
}

RunConfig load_run_config(const std::string& path) {
  auto text = read_file(path);
  auto dir = fs::absolute(path).parent_path().string();
  return parse_run_config(text, dir);
}

void apply_environment(RunConfig& cfg) {
  if (const char* v = std::getenv("RAREKG_RESOLVER_URL"); v && *v) cfg.resolver.base_url = v;
  if (const char* v = std::getenv("RAREKG_LLM_URL"); v && *v) cfg.llm.base_url = v;
  if (const char* v = std::getenv("RAREKG_LLM_KEY"); v && *v) cfg.llm.api_key = v;
}

} // namespace rarekg
