#include "rarekg/snapshot.hpp"

#include <json.hpp>

#include "rarekg/error.hpp"
#include "text.hpp"

namespace rarekg {

using nlohmann::json;

KnowledgeBase build_knowledge_base(BuildInputs in) {
  KnowledgeBase kb;
  KgSources src{in.phenotypes, in.annotations, in.genes, in.variants, in.diseases ? &*in.diseases : nullptr, &in.xrefs};
  kb.kg = build_kg(src);
  kb.ic = compute_ic(in.phenotypes, in.annotations, in.ic_options);
  kb.phenotypes = std::move(in.phenotypes);
  kb.diseases = std::move(in.diseases);
  kb.annotations = std::move(in.annotations);
  kb.genes = std::move(in.genes);
  kb.variants = dedupe_variants(std::move(in.variants));
  kb.xrefs = std::move(in.xrefs);
  return kb;
}

namespace {

constexpr const char* kFormat = "rarekg.snapshot";
constexpr int kVersion = 1;

std::vector<std::string> ids(const std::set<TermId>& s) {
  std::vector<std::string> out;
  for (const auto& t : s) out.push_back(t.str());
  return out;
}

std::set<TermId> ids_from(const json& j) {
  std::set<TermId> out;
  for (const auto& v : j) out.insert(TermId::from(v.get<std::string>()));
  return out;
}

json term_record(const OntologyTerm& t, const char* ontology) {
  json j{{"rec", "term"}, {"ontology", ontology}, {"id", t.id.str()}, {"label", t.label}, {"synonyms", t.synonyms},
         {"parents", ids(t.parents)}, {"obsolete", t.obsolete}};
  if (t.replaced_by) j["replaced_by"] = t.replaced_by->str();
  return j;
}

json stats_json(const BuildStats& s) {
  json nodes = json::object();
  for (const auto& [k, n] : s.nodes) nodes[std::string(to_string(k))] = n;
  json edges = json::object();
  for (const auto& [k, n] : s.edges) edges[std::string(to_string(k))] = n;
  return {{"nodes", nodes}, {"edges", edges}, {"omim_diseases", s.omim_diseases}, {"orpha_diseases", s.orpha_diseases}};
}

template <typename T>
std::optional<T> opt(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<T>();
}

} // namespace

std::string write_snapshot(const KnowledgeBase& kb, std::string_view config_hash) {
  std::string out;
  auto emit = [&](const json& j) {
    out += j.dump();
    out += '\n';
  };
  std::size_t disease_terms = kb.diseases ? kb.diseases->size() : 0;
  emit({{"format", kFormat},
        {"version", kVersion},
        {"config_hash", std::string(config_hash)},
        {"build_stats", stats_json(kb.kg.stats())},
        {"counts",
         {{"phenotype_terms", kb.phenotypes.size()},
          {"disease_terms", disease_terms},
          {"has_disease_ontology", kb.diseases.has_value()},
          {"annotations", kb.annotations.size()},
          {"genes", kb.genes.size()},
          {"variants", kb.variants.size()},
          {"xrefs", kb.xrefs.size()},
          {"ic", kb.ic.values().size()},
          {"nodes", kb.kg.nodes().size()},
          {"edges", kb.kg.edges().size()}}},
        {"ic_corpus_size", kb.ic.corpus_size()},
        {"ignored_tags", kb.phenotypes.ignored_tag_count()}});

  for (const auto& t : kb.phenotypes.terms()) emit(term_record(t, "phenotype"));
  if (kb.diseases)
    for (const auto& t : kb.diseases->terms()) emit(term_record(t, "disease"));
  for (const auto& a : kb.annotations.annotations())
    emit({{"rec", "annotation"}, {"disease", a.disease.str()}, {"phenotype", a.phenotype.str()},
          {"frequency", to_string(a.frequency)}, {"provenance", a.provenance}, {"disease_name", a.disease_name}});
  for (const auto& g : kb.genes)
    emit({{"rec", "gene"}, {"symbol", g.symbol}, {"diseases", ids(g.diseases)}, {"phenotypes", ids(g.phenotypes)}});
  for (const auto& v : kb.variants) {
    json j{{"rec", "variant"}, {"key", v.key.str()}, {"gene", v.gene}, {"significance", to_string(v.significance)},
           {"provenance", v.provenance}};
    if (v.transcript) j["transcript"] = *v.transcript;
    if (v.hgvs_c) j["hgvs_c"] = *v.hgvs_c;
    if (v.hgvs_p) j["hgvs_p"] = *v.hgvs_p;
    emit(j);
  }
  for (const auto& [omim, orphas] : kb.xrefs.entries())
    for (const auto& o : orphas) emit({{"rec", "xref"}, {"omim", omim.str()}, {"orpha", o.str()}});
  for (const auto& [t, v] : kb.ic.values()) emit({{"rec", "ic"}, {"id", t.str()}, {"ic", v}});
  for (const auto& n : kb.kg.nodes())
    emit({{"rec", "node"}, {"kind", to_string(n.kind)}, {"key", n.key}, {"label", n.label}});
  for (const auto& e : kb.kg.edges()) {
    json j{{"rec", "edge"}, {"kind", to_string(e.kind)}, {"from", e.from}, {"to", e.to}, {"provenance", e.provenance}};
    if (e.frequency) j["frequency"] = to_string(*e.frequency);
    emit(j);
  }
  return out;
}

Snapshot read_snapshot(std::string_view text) {
  auto lines = detail::split_lines(text);
  while (!lines.empty() && detail::trim(lines.back()).empty()) lines.pop_back();
  if (lines.empty()) throw Error(ErrorCode::MalformedSnapshot, "empty snapshot");

  Snapshot snap;
  json header;
  try {
    header = json::parse(lines[0]);
    if (header.at("format").get<std::string>() != kFormat) throw Error(ErrorCode::MalformedSnapshot, "not a rarekg snapshot");
    if (header.at("version").get<int>() != kVersion) throw Error(ErrorCode::MalformedSnapshot, "unsupported snapshot version");
    snap.config_hash = header.at("config_hash").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedSnapshot, std::string("header: ") + e.what());
  }

  std::vector<OntologyTerm> pterms, dterms;
  std::vector<DiseaseAnnotation> rows;
  std::vector<GeneRecord> genes;
  std::vector<VariantRecord> variants;
  XrefTable xrefs;
  std::map<TermId, double> ic;
  std::vector<KGNode> nodes;
  std::vector<KGEdge> edges;

  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (detail::trim(lines[i]).empty()) continue;
    try {
      json j = json::parse(lines[i]);
      const auto rec = j.at("rec").get<std::string>();
      if (rec == "term") {
        OntologyTerm t;
        t.id = TermId::from(j.at("id").get<std::string>());
        t.label = j.at("label").get<std::string>();
        t.synonyms = j.at("synonyms").get<std::vector<std::string>>();
        t.parents = ids_from(j.at("parents"));
        t.obsolete = j.at("obsolete").get<bool>();
        if (auto r = opt<std::string>(j, "replaced_by")) t.replaced_by = TermId::from(*r);
        (j.at("ontology").get<std::string>() == "disease" ? dterms : pterms).push_back(std::move(t));
      } else if (rec == "annotation") {
        auto f = frequency_from_name(j.at("frequency").get<std::string>());
        if (!f) throw Error(ErrorCode::MalformedSnapshot, "bad frequency");
        rows.push_back({TermId::from(j.at("disease").get<std::string>()), TermId::from(j.at("phenotype").get<std::string>()),
                        *f, j.at("provenance").get<std::string>(), j.at("disease_name").get<std::string>()});
      } else if (rec == "gene") {
        genes.push_back({j.at("symbol").get<std::string>(), ids_from(j.at("diseases")), ids_from(j.at("phenotypes"))});
      } else if (rec == "variant") {
        VariantRecord v;
        auto key = VariantKey::parse(j.at("key").get<std::string>());
        auto sig = significance_from_name(j.at("significance").get<std::string>());
        if (!key || !sig) throw Error(ErrorCode::MalformedSnapshot, "bad variant record");
        v.key = *key;
        v.significance = *sig;
        v.gene = j.at("gene").get<std::string>();
        v.transcript = opt<std::string>(j, "transcript");
        v.hgvs_c = opt<std::string>(j, "hgvs_c");
        v.hgvs_p = opt<std::string>(j, "hgvs_p");
        v.provenance = j.at("provenance").get<std::set<std::string>>();
        variants.push_back(std::move(v));
      } else if (rec == "xref") {
        xrefs.add(TermId::from(j.at("omim").get<std::string>()), TermId::from(j.at("orpha").get<std::string>()));
      } else if (rec == "ic") {
        ic.emplace(TermId::from(j.at("id").get<std::string>()), j.at("ic").get<double>());
      } else if (rec == "node") {
        auto k = node_kind_from_name(j.at("kind").get<std::string>());
        if (!k) throw Error(ErrorCode::MalformedSnapshot, "bad node kind");
        nodes.push_back({*k, j.at("key").get<std::string>(), j.at("label").get<std::string>()});
      } else if (rec == "edge") {
        auto k = edge_kind_from_name(j.at("kind").get<std::string>());
        if (!k) throw Error(ErrorCode::MalformedSnapshot, "bad edge kind");
        KGEdge e{*k, j.at("from").get<std::string>(), j.at("to").get<std::string>(), std::nullopt,
                 j.at("provenance").get<std::set<std::string>>()};
        if (auto f = opt<std::string>(j, "frequency")) {
          e.frequency = frequency_from_name(*f);
          if (!e.frequency) throw Error(ErrorCode::MalformedSnapshot, "bad edge frequency");
        }
        edges.push_back(std::move(e));
      } else {
        throw Error(ErrorCode::MalformedSnapshot, "unknown record type '" + rec + "'");
      }
    } catch (const std::exception& e) {
      throw Error(ErrorCode::MalformedSnapshot, "line " + std::to_string(i + 1) + ": " + e.what());
    }
  }

  try {
    const auto& counts = header.at("counts");
    auto check = [&](const char* key, std::size_t got) {
      if (counts.at(key).get<std::size_t>() != got)
        throw Error(ErrorCode::MalformedSnapshot, std::string("count mismatch for ") + key);
    };
    check("phenotype_terms", pterms.size());
    check("disease_terms", dterms.size());
    check("genes", genes.size());
    check("variants", variants.size());
    check("ic", ic.size());
    check("nodes", nodes.size());
    check("edges", edges.size());

    auto& kb = snap.kb;
    kb.phenotypes = OntologyGraph::from_terms(std::move(pterms));
    kb.phenotypes.set_ignored_tag_count(header.value("ignored_tags", std::size_t{0}));
    if (counts.at("has_disease_ontology").get<bool>()) kb.diseases = OntologyGraph::from_terms(std::move(dterms));
    kb.annotations = DiseaseAnnotationSet(std::move(rows));
    check("annotations", kb.annotations.size());
    kb.genes = std::move(genes);
    kb.variants = std::move(variants);
    kb.xrefs = std::move(xrefs);
    check("xrefs", kb.xrefs.size());
    kb.ic = TermIC(std::move(ic), header.at("ic_corpus_size").get<std::size_t>());
    kb.kg = KnowledgeGraph::from_parts(std::move(nodes), std::move(edges));
    if (stats_json(kb.kg.stats()) != header.at("build_stats"))
      throw Error(ErrorCode::MalformedSnapshot, "build stats do not match the stored graph");
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedSnapshot, std::string("header: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::MalformedSnapshot) throw;
    throw Error(ErrorCode::MalformedSnapshot, e.what());
  }
  return snap;
}

} // namespace rarekg
