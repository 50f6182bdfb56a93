#include "rarekg/rarekg.h"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <map>
#include <memory>
#include <new>
#include <set>
#include <string>

#include <json.hpp>

#include "rarekg/cases.hpp"
#include "rarekg/clients.hpp"
#include "rarekg/config.hpp"
#include "rarekg/error.hpp"
#include "rarekg/eval.hpp"
#include "rarekg/kg.hpp"
#include "rarekg/ranking.hpp"
#include "rarekg/snapshot.hpp"
#include "text.hpp"

using nlohmann::json;
using namespace rarekg;

struct rarekg_config {
  RunConfig cfg;
};

struct rarekg_engine {
  RunConfig cfg;
  std::string hash;
  KnowledgeBase kb;
  std::unique_ptr<NormalizationTable> norm;
};

namespace {

thread_local std::string t_code;
thread_local std::string t_message;

rarekg_status status_of(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::Parse: return RAREKG_ERR_PARSE;
    case ErrorCategory::Validation: return RAREKG_ERR_VALIDATION;
    case ErrorCategory::Io: return RAREKG_ERR_IO;
    case ErrorCategory::InvalidArgument: return RAREKG_ERR_INVALID_ARGUMENT;
    case ErrorCategory::NotFound: return RAREKG_ERR_NOT_FOUND;
    case ErrorCategory::Degenerate: return RAREKG_ERR_DEGENERATE;
    case ErrorCategory::Unevaluable: return RAREKG_ERR_UNEVALUABLE;
    case ErrorCategory::Remote: return RAREKG_ERR_REMOTE;
    case ErrorCategory::Internal: return RAREKG_ERR_INTERNAL;
  }
  return RAREKG_ERR_INTERNAL;
}

rarekg_status fail(std::string code, std::string message, rarekg_status s) {
  t_code = std::move(code);
  t_message = std::move(message);
  return s;
}

template <typename F>
rarekg_status guard(F&& f) {
  try {
    f();
    t_code.clear();
    t_message.clear();
    return RAREKG_OK;
  } catch (const Error& e) {
    return fail(std::string(to_string(e.code())), e.what(), status_of(category(e.code())));
  } catch (const json::exception& e) {
    return fail("MALFORMED_LINE", std::string("MALFORMED_LINE: ") + e.what(), RAREKG_ERR_PARSE);
  } catch (const std::bad_alloc&) {
    return fail("INTERNAL", "INTERNAL: out of memory", RAREKG_ERR_INTERNAL);
  } catch (const std::exception& e) {
    return fail("INTERNAL", std::string("INTERNAL: ") + e.what(), RAREKG_ERR_INTERNAL);
  } catch (...) {
    return fail("INTERNAL", "INTERNAL: unknown exception", RAREKG_ERR_INTERNAL);
  }
}

char* dup(std::string_view s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.data(), s.size());
  p[s.size()] = '\0';
  return p;
}

void need(const void* p, const char* name) {
  if (!p) throw Error(ErrorCode::InvalidArgument, std::string(name) + " is null");
}

TermId term_arg(const std::string& text) {
  auto t = TermId::parse_lenient(text);
  if (!t) throw Error(ErrorCode::InvalidArgument, "not a term id: " + text);
  return *t;
}

std::string read_input(const ConfigPath& p, const char* name) {
  if (p.empty()) throw Error(ErrorCode::InvalidArgument, std::string("config: inputs.") + name + " is required");
  return read_file(p.resolved);
}

OntologyFormat ontology_format(const std::string& s) {
  return s == "json" ? OntologyFormat::JsonSubset : OntologyFormat::OboSubset;
}

json row_errors(const std::vector<RowError>& rows) {
  json arr = json::array();
  for (const auto& r : rows) arr.push_back({{"line", r.line}, {"reason", r.reason}});
  return arr;
}

PatientProfile profile_of(const CaseRecord& c) { return {c.case_id, c.phenotypes, c.truth}; }

json stats_json(const KnowledgeBase& kb, const std::string& hash) {
  const auto& st = kb.kg.stats();
  json nodes = json::object(), edges = json::object();
  for (const auto& [k, n] : st.nodes) nodes[std::string(to_string(k))] = n;
  for (const auto& [k, n] : st.edges) edges[std::string(to_string(k))] = n;
  return {{"schema", "rarekg.build_stats/1"},
          {"config_hash", hash},
          {"nodes", nodes},
          {"edges", edges},
          {"omim_diseases", st.omim_diseases},
          {"orpha_diseases", st.orpha_diseases},
          {"phenotype_terms", kb.phenotypes.size()},
          {"annotations", kb.annotations.size()},
          {"ic_corpus_size", kb.ic.corpus_size()}};
}

NormalizationTable& normalization(rarekg_engine& e) {
  if (!e.norm) {
    e.norm = std::make_unique<NormalizationTable>();
    if (!e.cfg.inputs.normalization.empty())
      *e.norm = parse_normalization_table(read_file(e.cfg.inputs.normalization.resolved));
  }
  return *e.norm;
}

bool llm_configured(const RunConfig& cfg) { return !cfg.llm.base_url.empty() || !cfg.llm.replay_path.empty(); }

std::shared_ptr<HttpTransport> live_transport(std::chrono::milliseconds timeout) {
  return std::make_shared<HttplibTransport>(timeout);
}

// Normalized prediction sets keyed by case id, in prediction-file order.
struct ScoredPredictions {
  std::vector<std::string> order;
  std::map<std::string, PredictionSet> sets;
  std::map<std::string, bool> unparseable;
};

ScoredPredictions normalize_records(rarekg_engine& e, std::string_view predictions_jsonl) {
  auto records = read_prediction_records(predictions_jsonl);
  std::set<std::string> tags;
  for (const auto& r : records) tags.insert(r.model_tag);
  if (tags.size() > 1)
    throw Error(ErrorCode::InvalidArgument, "predictions hold " + std::to_string(tags.size()) +
                                                " model tags; evaluate one model per run");

  auto& table = normalization(e);
  std::unique_ptr<ResolverClient> resolver;
  if (e.cfg.resolver.enabled || !e.cfg.resolver.cache_path.empty())
    resolver = std::make_unique<ResolverClient>(e.cfg.resolver, e.cfg.resolver.enabled
                                                                    ? live_transport(e.cfg.resolver.timeout)
                                                                    : nullptr);
  std::unique_ptr<LlmClient> llm;

  ScoredPredictions out;
  for (const auto& r : records) {
    if (out.sets.count(r.case_id))
      throw Error(ErrorCode::InvalidArgument, "duplicate predictions for case " + r.case_id);
    std::vector<ListEntry> entries;
    bool unparseable = false;
    if (r.labels) {
      for (std::size_t i = 0; i < r.labels->size() && i < kMaxPredictions; ++i)
        entries.push_back({static_cast<int>(i + 1), (*r.labels)[i]});
    } else {
      try {
        entries = parse_prediction_list(r.raw_output_text.value_or(""));
      } catch (const Error& err) {
        if (err.code() != ErrorCode::NoListFound) throw;
        if (llm_configured(e.cfg)) {
          if (!llm)
            llm = std::make_unique<LlmClient>(e.cfg.llm,
                                              e.cfg.llm.replay_only ? nullptr : live_transport(e.cfg.llm.timeout));
          try {
            entries = extract_list_via_llm(*llm, r.raw_output_text.value_or(""));
          } catch (const Error& x) {
            if (x.code() != ErrorCode::StillUnparseable) throw;
          }
        }
      }
    }
    PredictionSet ps;
    if (entries.empty()) {
      unparseable = true;
    } else {
      ps = normalize_predictions(entries, table, resolver.get());
    }
    ps.case_id = r.case_id;
    ps.model_tag = r.model_tag;
    out.order.push_back(r.case_id);
    out.unparseable[r.case_id] = unparseable;
    out.sets.emplace(r.case_id, std::move(ps));
  }
  return out;
}

std::map<std::string, CaseRecord> cases_by_id(std::string_view cases_jsonl) {
  std::map<std::string, CaseRecord> out;
  for (auto& c : read_cases_jsonl(cases_jsonl)) {
    auto id = c.case_id;
    out.emplace(id, std::move(c));
  }
  return out;
}

const CaseRecord& case_for(const std::map<std::string, CaseRecord>& cases, const std::string& id) {
  auto it = cases.find(id);
  if (it == cases.end()) throw Error(ErrorCode::EntityNotFound, "predictions reference unknown case " + id);
  return it->second;
}

} // namespace

extern "C" {

const char* rarekg_version(void) { return RAREKG_VERSION; }
const char* rarekg_last_error_code(void) { return t_code.c_str(); }
const char* rarekg_last_error_message(void) { return t_message.c_str(); }
void rarekg_string_free(char* s) { std::free(s); }

// ---------------------------------------------------------------------------
// Configuration

rarekg_status rarekg_config_load(const char* path, rarekg_config** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    *out = new rarekg_config{load_run_config(path)};
  });
}

rarekg_status rarekg_config_parse(const char* json_text, const char* base_dir, rarekg_config** out) {
  return guard([&] {
    need(json_text, "json_text");
    need(out, "out");
    *out = new rarekg_config{parse_run_config(json_text, base_dir ? base_dir : ".")};
  });
}

void rarekg_config_free(rarekg_config* cfg) { delete cfg; }

rarekg_status rarekg_config_set_seed(rarekg_config* cfg, uint64_t seed) {
  return guard([&] {
    need(cfg, "cfg");
    cfg->cfg.set_seed(seed);
  });
}

rarekg_status rarekg_config_set_output_dir(rarekg_config* cfg, const char* dir) {
  return guard([&] {
    need(cfg, "cfg");
    need(dir, "dir");
    cfg->cfg.set_output_dir(dir);
  });
}

rarekg_status rarekg_config_set_replay(rarekg_config* cfg, const char* path) {
  return guard([&] {
    need(cfg, "cfg");
    need(path, "path");
    cfg->cfg.set_replay(path);
  });
}

rarekg_status rarekg_config_apply_environment(rarekg_config* cfg) {
  return guard([&] {
    need(cfg, "cfg");
    apply_environment(cfg->cfg);
  });
}

rarekg_status rarekg_config_hash(const rarekg_config* cfg, char** out) {
  return guard([&] {
    need(cfg, "cfg");
    need(out, "out");
    *out = dup(cfg->cfg.hash());
  });
}

rarekg_status rarekg_config_to_json(const rarekg_config* cfg, char** out) {
  return guard([&] {
    need(cfg, "cfg");
    need(out, "out");
    *out = dup(cfg->cfg.to_json());
  });
}

rarekg_status rarekg_config_path(const rarekg_config* cfg, const char* name, char** out) {
  return guard([&] {
    need(cfg, "cfg");
    need(name, "name");
    need(out, "out");
    const auto& in = cfg->cfg.inputs;
    const std::map<std::string, const ConfigPath*> paths = {
        {"ontology", &in.ontology},   {"disease_ontology", &in.disease_ontology},
        {"hpoa", &in.hpoa},           {"genes", &in.genes},
        {"variants", &in.variants},   {"normalization", &in.normalization},
        {"xrefs", &in.xrefs},         {"cases", &in.cases},
        {"predictions", &in.predictions}, {"snapshot", &in.snapshot},
        {"output_dir", &cfg->cfg.output_dir}};
    auto it = paths.find(name);
    if (it == paths.end()) throw Error(ErrorCode::InvalidArgument, std::string("unknown config path ") + name);
    *out = dup(it->second->resolved);
  });
}

// ---------------------------------------------------------------------------
// Engine

rarekg_status rarekg_engine_build(const rarekg_config* cfg, rarekg_engine** out, char** validation_json) {
  if (out) *out = nullptr;
  if (validation_json) *validation_json = nullptr;
  return guard([&] {
    need(cfg, "cfg");
    need(out, "out");
    const auto& c = cfg->cfg;
    const auto& in = c.inputs;
    ParseOptions popts;
    popts.max_reject_rate = c.max_reject_rate;

    BuildInputs bi;
    bi.phenotypes = parse_ontology(read_input(in.ontology, "ontology"), ontology_format(in.ontology_format));
    if (!in.disease_ontology.empty())
      bi.diseases = parse_ontology(read_file(in.disease_ontology.resolved), ontology_format(in.disease_ontology_format));
    popts.provenance = "HPOA";
    auto hpoa = parse_hpoa(read_input(in.hpoa, "hpoa"), popts);
    bi.annotations = std::move(hpoa.annotations);
    GeneParseResult genes;
    if (!in.genes.empty()) {
      popts.provenance = "genes";
      genes = parse_genes(read_file(in.genes.resolved), popts);
      bi.genes = genes.genes;
    }
    if (!in.variants.empty())
      bi.variants = parse_variants(read_file(in.variants.resolved),
                                   in.variants_format == "tsv" ? VariantFormat::Tsv : VariantFormat::VcfSlim)
                        .records;
    if (!in.xrefs.empty()) bi.xrefs = parse_xrefs(read_file(in.xrefs.resolved));
    bi.ic_options.provenances = c.ic_provenances;

    auto report = validate_sources(bi.phenotypes, bi.annotations, bi.genes, bi.variants,
                                   bi.diseases ? &*bi.diseases : nullptr, &bi.xrefs);
    json findings = json::array();
    for (const auto& f : report.findings)
      findings.push_back({{"kind", to_string(f.kind)},
                          {"severity", is_error(f.kind) ? "error" : "warning"},
                          {"detail", f.detail}});
    json vdoc{{"schema", "rarekg.validation/1"},
              {"config_hash", c.hash()},
              {"seed", c.seed},
              {"clean", report.clean()},
              {"error_count", report.error_count()},
              {"warning_count", report.findings.size() - report.error_count()},
              {"findings", findings},
              {"rejected_rows", {{"hpoa", row_errors(hpoa.rejected)}, {"genes", row_errors(genes.rejected)}}},
              {"skipped",
               {{"negated", hpoa.skipped_negated},
                {"non_phenotype_aspect", hpoa.skipped_non_phenotype_aspect},
                {"excluded_frequency", hpoa.skipped_excluded_frequency}}},
              {"duplicate_annotations_dropped", bi.annotations.duplicates_dropped()}};
    if (validation_json) *validation_json = dup(vdoc.dump(2) + "\n");
    if (!report.clean())
      throw Error(ErrorCode::ValidationNotClean, std::to_string(report.error_count()) + " validation error(s)");

    auto engine = std::make_unique<rarekg_engine>();
    engine->cfg = c;
    engine->hash = c.hash();
    engine->kb = build_knowledge_base(std::move(bi));
    *out = engine.release();
  });
}

rarekg_status rarekg_engine_load_snapshot(const rarekg_config* cfg, const char* path, rarekg_engine** out) {
  if (out) *out = nullptr;
  return guard([&] {
    need(cfg, "cfg");
    need(out, "out");
    std::string p = path ? std::string(path) : cfg->cfg.inputs.snapshot.resolved;
    if (p.empty()) throw Error(ErrorCode::InvalidArgument, "no snapshot path given or configured");
    auto snap = read_snapshot(read_file(p));
    auto engine = std::make_unique<rarekg_engine>();
    engine->cfg = cfg->cfg;
    engine->hash = cfg->cfg.hash();
    engine->kb = std::move(snap.kb);
    *out = engine.release();
  });
}

void rarekg_engine_free(rarekg_engine* engine) { delete engine; }

rarekg_status rarekg_engine_snapshot(const rarekg_engine* engine, char** out) {
  return guard([&] {
    need(engine, "engine");
    need(out, "out");
    *out = dup(write_snapshot(engine->kb, engine->hash));
  });
}

rarekg_status rarekg_engine_stats(const rarekg_engine* engine, char** out_json) {
  return guard([&] {
    need(engine, "engine");
    need(out_json, "out_json");
    *out_json = dup(stats_json(engine->kb, engine->hash).dump(2) + "\n");
  });
}

rarekg_status rarekg_engine_retrieve(const rarekg_engine* engine, const char* query_json, int structured, char** out) {
  return guard([&] {
    need(engine, "engine");
    need(query_json, "query_json");
    need(out, "out");
    const auto& kb = engine->kb;
    const auto& rcfg = engine->cfg.retrieval;
    auto q = json::parse(query_json);
    std::string type = q.value("type", "phenotypes");
    Retriever retriever(kb.kg, kb.phenotypes, kb.ic);
    ContextBlock block;
    if (type == "phenotypes") {
      std::set<TermId> terms;
      for (const auto& v : q.at("phenotypes")) terms.insert(term_arg(v.get<std::string>()));
      std::size_t k = q.value("k", rcfg.max_candidates);
      block = retriever.retrieve_by_phenotypes(terms, k, q.value("propagate", rcfg.propagate),
                                               q.value("frequency_weighting", rcfg.frequency_weighting));
    } else {
      RetrievalQuery rq;
      if (type == "disease") rq.type = EntityType::Disease;
      else if (type == "gene") rq.type = EntityType::Gene;
      else if (type == "variant") rq.type = EntityType::Variant;
      else throw Error(ErrorCode::InvalidArgument, "query type is phenotypes, disease, gene or variant");
      rq.key = q.at("key").get<std::string>();
      if (auto inc = q.find("include"); inc != q.end()) {
        for (const auto& v : *inc) {
          auto k = edge_kind_from_name(v.get<std::string>());
          if (!k) throw Error(ErrorCode::InvalidArgument, "unknown edge kind " + v.get<std::string>());
          rq.include_kinds.insert(*k);
        }
      }
      block = retriever.query_typed(rq);
    }
    *out = dup(serialize_context(block, structured ? ContextForm::Structured : ContextForm::Text));
  });
}

rarekg_status rarekg_engine_rank(const rarekg_engine* engine, const char* cases_jsonl, const char* method, int k,
                                 char** out_jsonl) {
  return guard([&] {
    need(engine, "engine");
    need(cases_jsonl, "cases_jsonl");
    need(out_jsonl, "out_jsonl");
    const auto& kb = engine->kb;
    RankOptions opts = engine->cfg.ranking;
    if (method) {
      auto m = rank_method_from_name(method);
      if (!m) throw Error(ErrorCode::InvalidArgument, std::string("unknown ranking method ") + method);
      opts.method = *m;
    }
    if (k > 0) opts.k = k;
    opts.k = std::min<int>(opts.k, static_cast<int>(kMaxPredictions));
    std::string out;
    for (const auto& c : read_cases_jsonl(cases_jsonl)) {
      auto ranked = rank_diseases(kb.ic, kb.phenotypes, kb.annotations, profile_of(c), opts);
      json rows = json::array();
      json truth_rank = nullptr;
      for (const auto& r : ranked) {
        json breakdown = json::object();
        for (const auto& [t, v] : r.breakdown) breakdown[t.str()] = v;
        rows.push_back({{"rank", r.rank},
                        {"disease", r.disease.str()},
                        {"label", kb.annotations.disease_name(r.disease)},
                        {"score", r.score},
                        {"breakdown", breakdown}});
        if (c.truth && r.disease == *c.truth) truth_rank = r.rank;
      }
      json line{{"case_id", c.case_id},
                {"method", to_string(opts.method)},
                {"k", opts.k},
                {"config_hash", engine->hash},
                {"seed", engine->cfg.seed},
                {"truth", c.truth ? json(c.truth->str()) : json(nullptr)},
                {"truth_rank", truth_rank},
                {"rankings", rows}};
      out += line.dump() + "\n";
    }
    *out_jsonl = dup(out);
  });
}

rarekg_status rarekg_engine_simulate(const rarekg_engine* engine, const char* spec_json, char** out_jsonl) {
  return guard([&] {
    need(engine, "engine");
    need(out_jsonl, "out_jsonl");
    const auto& kb = engine->kb;
    SyntheticDefaults d = engine->cfg.synthetic;
    std::uint64_t seed = engine->cfg.seed;
    json s = spec_json && *spec_json ? json::parse(spec_json) : json::object();
    for (const auto& [key, _] : s.items())
      if (key != "n_signal" && key != "n_distractors" && key != "distractor_min" && key != "distractor_max" &&
          key != "cases_per_disease" && key != "diseases" && key != "seed")
        throw Error(ErrorCode::InvalidArgument, "unknown simulation key " + key);
    d.n_signal = s.value("n_signal", d.n_signal);
    if (s.contains("n_distractors"))
      d.n_distractors = s["n_distractors"].is_null() ? std::nullopt
                                                     : std::optional<std::size_t>(s["n_distractors"].get<std::size_t>());
    d.distractor_min = s.value("distractor_min", d.distractor_min);
    d.distractor_max = s.value("distractor_max", d.distractor_max);
    d.cases_per_disease = s.value("cases_per_disease", d.cases_per_disease);
    if (s.contains("diseases")) d.diseases = s["diseases"].get<std::vector<std::string>>();
    seed = s.value("seed", seed);

    bool explicit_list = !d.diseases.empty();
    std::vector<TermId> diseases;
    if (explicit_list) {
      for (const auto& id : d.diseases) diseases.push_back(term_arg(id));
    } else {
      auto all = kb.annotations.diseases();
      diseases.assign(all.begin(), all.end());
    }
    std::vector<CaseRecord> cases;
    std::uint64_t index = 0;
    for (const auto& disease : diseases) {
      for (std::size_t j = 0; j < d.cases_per_disease; ++j, ++index) {
        SyntheticCaseSpec spec;
        spec.disease = disease;
        spec.n_signal = d.n_signal;
        spec.n_distractors = d.n_distractors;
        spec.distractor_min = d.distractor_min;
        spec.distractor_max = d.distractor_max;
        spec.rng_seed = seed ^ index;
        try {
          auto c = generate_synthetic_case(kb.phenotypes, kb.annotations, kb.ic, spec);
          c.meta.config_hash = engine->hash;
          cases.push_back(std::move(c));
        } catch (const Error& e) {
          bool skippable = e.code() == ErrorCode::InsufficientAnnotations ||
                           e.code() == ErrorCode::InsufficientDistractorPool;
          if (explicit_list || !skippable) throw;
        }
      }
    }
    if (cases.empty()) throw Error(ErrorCode::InsufficientAnnotations, "no disease supports the requested case shape");
    *out_jsonl = dup(write_cases_jsonl(cases));
  });
}

rarekg_status rarekg_engine_difficulty(const rarekg_engine* engine, const char* cases_jsonl, char** out_json) {
  return guard([&] {
    need(engine, "engine");
    need(cases_jsonl, "cases_jsonl");
    need(out_json, "out_json");
    const auto& kb = engine->kb;
    const auto& dc = engine->cfg.difficulty;
    std::vector<PatientProfile> cohort;
    for (const auto& c : read_cases_jsonl(cases_jsonl)) cohort.push_back(profile_of(c));
    DifficultyOptions opts{dc.extrema, &kb.annotations};
    auto scores = composite_difficulty(kb.ic, cohort, opts);
    auto selected = select_top_difficult(scores, dc.top_m, dc.selection);
    json rows = json::array();
    for (const auto& s : scores)
      rows.push_back({{"case_id", s.case_id},
                      {"mean_ic", s.mean_ic},
                      {"norm_mean_ic", s.norm_mean_ic},
                      {"phen_count", s.phen_count},
                      {"norm_cnt", s.norm_cnt},
                      {"composite", s.composite}});
    const auto& ex = scores.front().extrema;
    json doc{{"schema", "rarekg.difficulty/1"},
             {"config_hash", engine->hash},
             {"seed", engine->cfg.seed},
             {"extrema_source", dc.extrema == ExtremaSource::Cases ? "cases" : "diseases"},
             {"extrema",
              {{"mean_ic_min", ex.mean_ic_min},
               {"mean_ic_max", ex.mean_ic_max},
               {"n_min", ex.n_min},
               {"n_max", ex.n_max}}},
             {"selection", dc.selection == SelectionMode::HighestComposite ? "highest_composite" : "lowest_mean_ic"},
             {"top_m", dc.top_m},
             {"cases", rows},
             {"selected", selected}};
    *out_json = dup(doc.dump(2) + "\n");
  });
}

rarekg_status rarekg_engine_map_feature(const rarekg_engine* engine, const char* text, char** out_id) {
  return guard([&] {
    need(engine, "engine");
    need(text, "text");
    need(out_id, "out_id");
    auto id = map_feature_to_hpo(engine->kb.phenotypes, text);
    *out_id = dup(id ? id->str() : "");
  });
}

rarekg_status rarekg_engine_evidence(const rarekg_engine* engine, const char* features_jsonl, char** out_json) {
  return guard([&] {
    need(engine, "engine");
    need(features_jsonl, "features_jsonl");
    need(out_json, "out_json");
    json cases = json::array();
    std::vector<double> fractions;
    std::size_t line_no = 0;
    for (const auto& line : detail::split_lines(features_jsonl)) {
      ++line_no;
      if (detail::trim(line).empty()) continue;
      json j;
      try {
        j = json::parse(line);
      } catch (const json::exception& e) {
        throw Error(ErrorCode::MalformedLine, "features line " + std::to_string(line_no) + ": " + e.what());
      }
      std::vector<FeatureInput> features;
      for (const auto& f : j.at("features")) {
        if (f.is_string()) {
          features.push_back({f.get<std::string>(), std::nullopt});
        } else {
          FeatureInput fi{f.at("text").get<std::string>(), std::nullopt};
          if (auto c = f.find("category"); c != f.end() && c->is_string()) fi.category = c->get<std::string>();
          features.push_back(std::move(fi));
        }
      }
      auto p = profile_evidence(engine->kb.phenotypes, features, j.value("case_id", ""));
      json hpo = json::array(), other = json::array();
      for (const auto& [text, id] : p.hpo_features) hpo.push_back({{"text", text}, {"id", id.str()}});
      for (const auto& [text, cat] : p.non_hpo_features)
        other.push_back({{"text", text}, {"category", cat ? json(*cat) : json(nullptr)}});
      cases.push_back({{"case_id", p.case_id},
                       {"hpo_features", hpo},
                       {"non_hpo_features", other},
                       {"non_hpo_fraction", p.non_hpo_fraction}});
      fractions.push_back(p.non_hpo_fraction);
    }
    auto s = summarize_fractions(fractions);
    json doc{{"schema", "rarekg.evidence/1"},
             {"config_hash", engine->hash},
             {"seed", engine->cfg.seed},
             {"cases", cases},
             {"cohort",
              {{"n", s.n},
               {"median", s.median},
               {"q1", s.q1},
               {"q3", s.q3},
               {"iqr", s.iqr},
               {"min", s.min},
               {"max", s.max}}}};
    *out_json = dup(doc.dump(2) + "\n");
  });
}

rarekg_status rarekg_engine_evaluate(rarekg_engine* engine, const char* cases_jsonl, const char* predictions_jsonl,
                                     char** out_json, char** out_csv, size_t* n_unevaluable) {
  return guard([&] {
    need(engine, "engine");
    need(cases_jsonl, "cases_jsonl");
    need(predictions_jsonl, "predictions_jsonl");
    auto& kb = engine->kb;
    auto cases = cases_by_id(cases_jsonl);
    auto preds = normalize_records(*engine, predictions_jsonl);
    std::vector<EvalCase> eval_cases;
    for (const auto& id : preds.order) {
      const auto& c = case_for(cases, id);
      EvalCase ec;
      ec.predictions = preds.sets.at(id);
      ec.truth = c.truth;
      ec.categories = c.categories;
      ec.unparseable = preds.unparseable.at(id);
      if (c.truth && !kb.annotations.phenotypes_of(*c.truth).empty())
        ec.stratum = std::string(to_string(stratify_case(kb.annotations, profile_of(c)).tier));
      eval_cases.push_back(std::move(ec));
    }
    auto report = topk_accuracy(eval_cases, kb.diseases ? &*kb.diseases : nullptr, &kb.xrefs, engine->cfg.eval);
    if (n_unevaluable) *n_unevaluable = report.n_unevaluable;
    if (out_json) *out_json = dup(eval_report_json(report, engine->hash));
    if (out_csv) *out_csv = dup(eval_report_csv(report, engine->hash));
  });
}

rarekg_status rarekg_engine_surrogate(rarekg_engine* engine, const char* cases_jsonl, const char* predictions_jsonl,
                                      const char* target, char** out_json) {
  return guard([&] {
    need(engine, "engine");
    need(cases_jsonl, "cases_jsonl");
    need(predictions_jsonl, "predictions_jsonl");
    need(target, "target");
    need(out_json, "out_json");
    auto cases = cases_by_id(cases_jsonl);
    auto preds = normalize_records(*engine, predictions_jsonl);
    std::vector<SurrogateCase> rows;
    for (const auto& id : preds.order) {
      SurrogateCase sc;
      sc.phenotypes = case_for(cases, id).phenotypes;
      const auto& ps = preds.sets.at(id);
      if (!ps.predictions.empty()) sc.predicted = ps.predictions.front().normalized;
      rows.push_back(std::move(sc));
    }
    auto fit = fit_global_surrogate(rows, term_arg(target));
    *out_json = dup(surrogate_json(fit, engine->hash));
  });
}

rarekg_status rarekg_engine_diagnose(rarekg_engine* engine, const char* case_json, char** out_text) {
  return guard([&] {
    need(engine, "engine");
    need(case_json, "case_json");
    need(out_text, "out_text");
    const auto& kb = engine->kb;
    auto c = case_from_json(case_json);
    Retriever retriever(kb.kg, kb.phenotypes, kb.ic);
    const auto& rc = engine->cfg.retrieval;
    auto block = retriever.retrieve_by_phenotypes(c.phenotypes, rc.max_candidates, rc.propagate, rc.frequency_weighting);
    const auto& lc = engine->cfg.llm;
    LlmClient client(lc, lc.replay_only ? nullptr : live_transport(lc.timeout));
    *out_text = dup(augmented_diagnose(client, c, block, &kb.phenotypes));
  });
}

// ---------------------------------------------------------------------------
// Stateless

rarekg_status rarekg_slice(const char* cases_jsonl, const char* mode, const char* arg, const char* config_hash,
                           char** out_jsonl) {
  return guard([&] {
    need(cases_jsonl, "cases_jsonl");
    need(mode, "mode");
    need(arg, "arg");
    need(out_jsonl, "out_jsonl");
    std::string m = mode;
    std::vector<CaseRecord> out;
    for (const auto& c : read_cases_jsonl(cases_jsonl)) {
      CaseRecord s;
      if (m == "incremental") {
        char* end = nullptr;
        long step = std::strtol(arg, &end, 10);
        if (end == arg || *end != '\0') throw Error(ErrorCode::InvalidArgument, std::string("bad step ") + arg);
        s = slice_incremental(c, static_cast<int>(step));
      } else if (m == "ablation") {
        s = slice_ablation(c, std::string_view(arg));
      } else {
        throw Error(ErrorCode::InvalidArgument, "slice mode is incremental or ablation");
      }
      if (config_hash) s.meta.config_hash = config_hash;
      out.push_back(std::move(s));
    }
    *out_jsonl = dup(write_cases_jsonl(out));
  });
}

rarekg_status rarekg_finder(const char* scorecards_csv, const char* config_hash, char** out_json) {
  return guard([&] {
    need(scorecards_csv, "scorecards_csv");
    need(out_json, "out_json");
    auto report = aggregate_finder(parse_finder_csv(scorecards_csv));
    *out_json = dup(finder_report_json(report, config_hash ? config_hash : ""));
  });
}

rarekg_status rarekg_bootstrap(const double* values, size_t n, size_t resamples, double level, uint64_t seed,
                               rarekg_bootstrap_result* out) {
  return guard([&] {
    need(out, "out");
    if (n > 0) need(values, "values");
    auto r = bootstrap_ci(std::vector<double>(values, values + n), resamples, level, seed);
    *out = {r.mean, r.lower, r.upper, r.std_error, r.half_width};
  });
}

rarekg_status rarekg_compare_groups(const double* a, size_t na, const double* b, size_t nb, double* t, double* p) {
  return guard([&] {
    if (na > 0) need(a, "a");
    if (nb > 0) need(b, "b");
    auto r = compare_groups(std::vector<double>(a, a + na), std::vector<double>(b, b + nb));
    if (t) *t = r.t;
    if (p) *p = r.p;
  });
}

rarekg_status rarekg_surrogate_fit(const double* x, size_t rows, size_t cols, const double* y, double ridge_lambda,
                                   double* coefficients, double* intercept) {
  return guard([&] {
    need(x, "x");
    need(y, "y");
    need(coefficients, "coefficients");
    std::vector<std::vector<double>> m(rows, std::vector<double>(cols));
    for (size_t i = 0; i < rows; ++i)
      for (size_t j = 0; j < cols; ++j) m[i][j] = x[i * cols + j];
    std::vector<std::string> names(cols);
    for (size_t j = 0; j < cols; ++j) names[j] = std::to_string(j);
    auto fit = fit_linear_surrogate(m, std::vector<double>(y, y + rows), names, ridge_lambda);
    for (size_t j = 0; j < cols; ++j) coefficients[j] = 0.0;
    for (const auto& [name, v] : fit.coefficients) coefficients[std::stoul(name)] = v;
    if (intercept) *intercept = fit.intercept;
  });
}

rarekg_status rarekg_quantile(const double* values, size_t n, double p, double* out) {
  return guard([&] {
    need(out, "out");
    if (n == 0) throw Error(ErrorCode::EmptyInput, "no values");
    need(values, "values");
    if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::InvalidArgument, "p must lie in [0,1]");
    std::vector<double> v(values, values + n);
    std::sort(v.begin(), v.end());
    *out = quantile_sorted(v, p);
  });
}

} // extern "C"
