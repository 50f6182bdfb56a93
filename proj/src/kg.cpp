#include "rarekg/kg.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "rarekg/error.hpp"

namespace rarekg {

std::string_view to_string(NodeKind k) {
  switch (k) {
    case NodeKind::Disease: return "DISEASE";
    case NodeKind::Phenotype: return "PHENOTYPE";
    case NodeKind::Gene: return "GENE";
    case NodeKind::Variant: return "VARIANT";
  }
  return "?";
}

std::string_view to_string(EdgeKind k) {
  switch (k) {
    case EdgeKind::DiseasePhenotype: return "DISEASE_PHENOTYPE";
    case EdgeKind::DiseaseGene: return "DISEASE_GENE";
    case EdgeKind::GeneVariant: return "GENE_VARIANT";
    case EdgeKind::PhenotypeGene: return "PHENOTYPE_GENE";
    case EdgeKind::DiseaseParent: return "DISEASE_PARENT";
    case EdgeKind::DiseaseXref: return "DISEASE_XREF";
  }
  return "?";
}

std::optional<NodeKind> node_kind_from_name(std::string_view name) {
  for (auto k : {NodeKind::Disease, NodeKind::Phenotype, NodeKind::Gene, NodeKind::Variant})
    if (to_string(k) == name) return k;
  return std::nullopt;
}

std::optional<EdgeKind> edge_kind_from_name(std::string_view name) {
  for (auto k : {EdgeKind::DiseasePhenotype, EdgeKind::DiseaseGene, EdgeKind::GeneVariant, EdgeKind::PhenotypeGene,
                 EdgeKind::DiseaseParent, EdgeKind::DiseaseXref})
    if (to_string(k) == name) return k;
  return std::nullopt;
}

std::pair<NodeKind, NodeKind> signature(EdgeKind k) {
  switch (k) {
    case EdgeKind::DiseasePhenotype: return {NodeKind::Disease, NodeKind::Phenotype};
    case EdgeKind::DiseaseGene: return {NodeKind::Disease, NodeKind::Gene};
    case EdgeKind::GeneVariant: return {NodeKind::Gene, NodeKind::Variant};
    case EdgeKind::PhenotypeGene: return {NodeKind::Phenotype, NodeKind::Gene};
    case EdgeKind::DiseaseParent: return {NodeKind::Disease, NodeKind::Disease};
    case EdgeKind::DiseaseXref: return {NodeKind::Disease, NodeKind::Disease};
  }
  return {NodeKind::Disease, NodeKind::Disease};
}

bool canonical_less(const KGEdge& a, const KGEdge& b) {
  if (a.kind != b.kind) return a.kind < b.kind;
  if (a.from != b.from) return a.from < b.from;
  return a.to < b.to;
}

std::string render_stats(const BuildStats& stats) {
  auto node_count = [&](NodeKind k) {
    auto it = stats.nodes.find(k);
    return it == stats.nodes.end() ? std::size_t{0} : it->second;
  };
  auto edge_count = [&](EdgeKind k) {
    auto it = stats.edges.find(k);
    return it == stats.edges.end() ? std::size_t{0} : it->second;
  };
  std::ostringstream out;
  out << "unique variant sites: " << node_count(NodeKind::Variant) << "\n";
  out << "OMIM-coded diseases: " << stats.omim_diseases << "\n";
  out << "Orphanet-coded diseases: " << stats.orpha_diseases << "\n";
  out << "unique phenotypes: " << node_count(NodeKind::Phenotype) << "\n";
  out << "genes: " << node_count(NodeKind::Gene) << "\n";
  out << "disease-phenotype relationships: " << edge_count(EdgeKind::DiseasePhenotype) << "\n";
  out << "disease-gene relationships: " << edge_count(EdgeKind::DiseaseGene) << "\n";
  out << "gene-variant relationships: " << edge_count(EdgeKind::GeneVariant) << "\n";
  out << "phenotype-gene relationships: " << edge_count(EdgeKind::PhenotypeGene) << "\n";
  out << "disease hierarchy relationships: " << edge_count(EdgeKind::DiseaseParent) << "\n";
  out << "disease cross-references: " << edge_count(EdgeKind::DiseaseXref) << "\n";
  return out.str();
}

// ---------------------------------------------------------------------------

KnowledgeGraph KnowledgeGraph::from_parts(std::vector<KGNode> nodes, std::vector<KGEdge> edges) {
  KnowledgeGraph g;
  std::sort(nodes.begin(), nodes.end(), [](const KGNode& a, const KGNode& b) { return a.key < b.key; });
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (!g.node_index_.emplace(nodes[i].key, i).second)
      throw Error(ErrorCode::Internal, "duplicate node key " + nodes[i].key);
    ++g.stats_.nodes[nodes[i].kind];
    if (nodes[i].kind == NodeKind::Disease) {
      auto id = TermId::parse(nodes[i].key);
      if (!id || !id->is_disease()) throw Error(ErrorCode::Internal, "disease node with non-disease key " + nodes[i].key);
      if (id->ns() == Namespace::OMIM) ++g.stats_.omim_diseases;
      else ++g.stats_.orpha_diseases;
    } else if (nodes[i].kind == NodeKind::Phenotype) {
      auto id = TermId::parse(nodes[i].key);
      if (!id || id->ns() != Namespace::HP) throw Error(ErrorCode::Internal, "phenotype node with non-HP key " + nodes[i].key);
    }
  }
  g.nodes_ = std::move(nodes);

  std::sort(edges.begin(), edges.end(), canonical_less);
  for (std::size_t i = 1; i < edges.size(); ++i)
    if (!canonical_less(edges[i - 1], edges[i]))
      throw Error(ErrorCode::DuplicateEdge, std::string(to_string(edges[i].kind)) + " " + edges[i].from + " -> " + edges[i].to);

  g.out_.assign(g.nodes_.size(), {});
  g.in_.assign(g.nodes_.size(), {});
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto& edge = edges[e];
    auto fi = g.node_index_.find(edge.from);
    auto ti = g.node_index_.find(edge.to);
    if (fi == g.node_index_.end() || ti == g.node_index_.end())
      throw Error(ErrorCode::Internal, "edge endpoint does not resolve: " + edge.from + " -> " + edge.to);
    auto [fk, tk] = signature(edge.kind);
    if (g.nodes_[fi->second].kind != fk || g.nodes_[ti->second].kind != tk)
      throw Error(ErrorCode::Internal, "edge endpoints violate " + std::string(to_string(edge.kind)) + " signature");
    if ((edge.kind == EdgeKind::DiseasePhenotype) != edge.frequency.has_value())
      throw Error(ErrorCode::Internal, "frequency is carried by DISEASE_PHENOTYPE edges only");
    g.out_[fi->second].push_back(e);
    g.in_[ti->second].push_back(e);
    ++g.stats_.edges[edge.kind];
  }
  g.edges_ = std::move(edges);
  return g;
}

const KGNode* KnowledgeGraph::node(std::string_view key) const {
  auto it = node_index_.find(std::string(key));
  return it == node_index_.end() ? nullptr : &nodes_[it->second];
}

const std::vector<std::size_t>& KnowledgeGraph::out_edges(std::string_view key) const {
  static const std::vector<std::size_t> none;
  auto it = node_index_.find(std::string(key));
  return it == node_index_.end() ? none : out_[it->second];
}

const std::vector<std::size_t>& KnowledgeGraph::in_edges(std::string_view key) const {
  static const std::vector<std::size_t> none;
  auto it = node_index_.find(std::string(key));
  return it == node_index_.end() ? none : in_[it->second];
}

namespace {

std::string variant_label(const VariantRecord& v) {
  std::string label = v.gene;
  if (v.transcript && v.hgvs_c) label += " " + *v.transcript + ":" + *v.hgvs_c;
  else if (v.hgvs_c) label += " " + *v.hgvs_c;
  if (v.hgvs_p) label += " (" + *v.hgvs_p + ")";
  if (label == v.gene) label += " " + v.key.str();
  return label;
}

} // namespace

KnowledgeGraph build_kg(const KgSources& src) {
  auto report = validate_sources(src.phenotypes, src.annotations, src.genes, src.variants, src.disease_ontology, src.xrefs);
  if (!report.clean()) {
    std::string msg = std::to_string(report.error_count()) + " validation error(s)";
    for (const auto& f : report.findings)
      if (is_error(f.kind)) {
        msg += "; first: " + f.detail;
        break;
      }
    throw Error(ErrorCode::ValidationNotClean, msg);
  }

  std::map<std::string, KGNode> nodes;
  auto add_node = [&](NodeKind kind, const std::string& key, const std::string& label) {
    auto [it, inserted] = nodes.emplace(key, KGNode{kind, key, label});
    if (!inserted && it->second.label.empty()) it->second.label = label;
  };

  auto disease_label = [&](const TermId& d) {
    if (src.disease_ontology)
      if (const auto* t = src.disease_ontology->find(d)) return t->label;
    return src.annotations.disease_name(d);
  };
  auto phenotype_label = [&](const TermId& p) {
    const auto* t = src.phenotypes.find(p);
    return t ? t->label : std::string{};
  };

  for (const auto& d : src.annotations.diseases()) add_node(NodeKind::Disease, d.str(), disease_label(d));
  for (const auto& p : src.annotations.phenotypes()) add_node(NodeKind::Phenotype, p.str(), phenotype_label(p));
  if (src.disease_ontology)
    for (const auto& t : src.disease_ontology->terms())
      if (!t.obsolete && t.id.is_disease()) add_node(NodeKind::Disease, t.id.str(), t.label);
  for (const auto& g : src.genes) {
    add_node(NodeKind::Gene, g.symbol, g.symbol);
    for (const auto& d : g.diseases) add_node(NodeKind::Disease, d.str(), disease_label(d));
    for (const auto& p : g.phenotypes) add_node(NodeKind::Phenotype, p.str(), phenotype_label(p));
  }
  const auto variants = dedupe_variants(src.variants);
  for (const auto& v : variants) add_node(NodeKind::Variant, v.key.str(), variant_label(v));

  // Edges are accumulated by (kind, from, to) so repeated evidence merges
  // provenance rather than duplicating the edge.
  std::map<std::tuple<EdgeKind, std::string, std::string>, KGEdge> edges;
  auto add_edge = [&](EdgeKind kind, const std::string& from, const std::string& to, std::optional<Frequency> freq,
                      const std::set<std::string>& prov) {
    auto key = std::make_tuple(kind, from, to);
    auto it = edges.find(key);
    if (it == edges.end()) {
      edges.emplace(key, KGEdge{kind, from, to, freq, prov});
      return;
    }
    it->second.provenance.insert(prov.begin(), prov.end());
    if (freq && it->second.frequency == Frequency::Unknown) it->second.frequency = freq;
  };

  for (const auto& a : src.annotations.annotations())
    add_edge(EdgeKind::DiseasePhenotype, a.disease.str(), a.phenotype.str(), a.frequency, {a.provenance});
  for (const auto& g : src.genes) {
    for (const auto& d : g.diseases) add_edge(EdgeKind::DiseaseGene, d.str(), g.symbol, std::nullopt, {src.gene_provenance});
    for (const auto& p : g.phenotypes)
      add_edge(EdgeKind::PhenotypeGene, p.str(), g.symbol, std::nullopt, {src.gene_provenance});
  }
  for (const auto& v : variants) add_edge(EdgeKind::GeneVariant, v.gene, v.key.str(), std::nullopt, v.provenance);
  if (src.disease_ontology) {
    for (const auto& t : src.disease_ontology->terms())
      for (const auto& p : t.parents)
        if (t.id.is_disease() && p.is_disease())
          add_edge(EdgeKind::DiseaseParent, t.id.str(), p.str(), std::nullopt, {"disease_ontology"});
  }
  if (src.xrefs) {
    for (const auto& [omim, orphas] : src.xrefs->entries())
      for (const auto& o : orphas)
        if (nodes.count(omim.str()) && nodes.count(o.str()))
          add_edge(EdgeKind::DiseaseXref, omim.str(), o.str(), std::nullopt, {"xref"});
  }

  std::vector<KGNode> node_list;
  node_list.reserve(nodes.size());
  for (auto& [_, n] : nodes) node_list.push_back(std::move(n));
  std::vector<KGEdge> edge_list;
  edge_list.reserve(edges.size());
  for (auto& [_, e] : edges) edge_list.push_back(std::move(e));
  return KnowledgeGraph::from_parts(std::move(node_list), std::move(edge_list));
}

// ---------------------------------------------------------------------------
// Retrieval

std::string_view to_string(EntityType t) {
  switch (t) {
    case EntityType::Disease: return "disease";
    case EntityType::Phenotypes: return "phenotypes";
    case EntityType::Gene: return "gene";
    case EntityType::Variant: return "variant";
  }
  return "?";
}

double frequency_weight(Frequency f) {
  switch (f) {
    case Frequency::AlwaysPresent: return 1.0;
    case Frequency::VeryFrequent: return 0.895;
    case Frequency::Frequent: return 0.545;
    case Frequency::Occasional: return 0.17;
    case Frequency::Rare: return 0.025;
    case Frequency::Unknown: return 1.0;
  }
  return 1.0;
}

ContextBlock Retriever::retrieve_by_phenotypes(const std::set<TermId>& phenotypes, std::size_t k, bool propagate,
                                               bool frequency_weighting) const {
  if (k == 0) throw Error(ErrorCode::InvalidArgument, "k must be at least 1");
  if (phenotypes.empty()) throw Error(ErrorCode::NoResolvablePhenotype, "empty phenotype query");

  ContextBlock block;
  std::string q;
  for (const auto& p : phenotypes) q += (q.empty() ? "" : ",") + p.str();
  block.query = "phenotypes:" + q;

  // For each resolvable query term, the KG phenotype nodes it covers.
  std::map<TermId, std::set<std::string>> covered;
  for (const auto& p : phenotypes) {
    if (!phenotypes_.contains(p) || phenotypes_.term(p).obsolete) {
      block.unresolved.push_back(p.str());
      continue;
    }
    block.focus.push_back(p.str());
    auto& cov = covered[p];
    if (propagate) {
      for (const auto& d : phenotypes_.descendants(p, true))
        if (kg_.node(d.str())) cov.insert(d.str());
    } else if (kg_.node(p.str())) {
      cov.insert(p.str());
    }
  }
  if (covered.empty()) throw Error(ErrorCode::NoResolvablePhenotype, "no query phenotype is in the ontology");

  struct Acc {
    std::map<TermId, double> contributions;
    std::vector<std::size_t> edges;
  };
  std::map<TermId, Acc> cands;
  for (const auto& [q_term, nodes] : covered) {
    std::map<TermId, double> best_weight;
    std::map<TermId, std::vector<std::size_t>> support;
    for (const auto& pkey : nodes) {
      for (auto e : kg_.in_edges(pkey)) {
        const auto& edge = kg_.edges()[e];
        if (edge.kind != EdgeKind::DiseasePhenotype) continue;
        auto d = TermId::from(edge.from);
        double w = frequency_weighting ? frequency_weight(edge.frequency.value_or(Frequency::Unknown)) : 1.0;
        auto [it, inserted] = best_weight.emplace(d, w);
        if (!inserted) it->second = std::max(it->second, w);
        support[d].push_back(e);
      }
    }
    const double ic = ic_.at(q_term);
    for (const auto& [d, w] : best_weight) {
      auto& acc = cands[d];
      acc.contributions.emplace(q_term, frequency_weighting ? ic * w : ic);
      auto& s = support[d];
      acc.edges.insert(acc.edges.end(), s.begin(), s.end());
    }
  }

  std::vector<std::pair<ContextCandidate, std::vector<std::size_t>>> ranked;
  for (auto& [d, acc] : cands) {
    ContextCandidate c;
    c.disease = d;
    if (const auto* n = kg_.node(d.str())) c.label = n->label;
    for (const auto& [t, v] : acc.contributions) {
      c.score += v;
      c.matched_terms.push_back({t, v});
    }
    ranked.emplace_back(std::move(c), std::move(acc.edges));
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.first.score != b.first.score) return a.first.score > b.first.score;
    return a.first.disease < b.first.disease;
  });
  if (ranked.size() > k) ranked.resize(k);

  std::vector<std::size_t> edge_ids;
  for (auto& [c, e] : ranked) {
    edge_ids.insert(edge_ids.end(), e.begin(), e.end());
    block.candidates.push_back(std::move(c));
  }
  std::sort(edge_ids.begin(), edge_ids.end());
  edge_ids.erase(std::unique(edge_ids.begin(), edge_ids.end()), edge_ids.end());
  for (auto e : edge_ids) block.evidence_edges.push_back(kg_.edges()[e]);
  return block;
}

ContextBlock Retriever::query_typed(const RetrievalQuery& q) const {
  if (q.max_candidates == 0) throw Error(ErrorCode::InvalidArgument, "max_candidates must be at least 1");
  if (q.type == EntityType::Phenotypes)
    return retrieve_by_phenotypes(q.phenotypes, q.max_candidates, q.propagate, q.frequency_weighting);

  NodeKind want = q.type == EntityType::Disease ? NodeKind::Disease
                  : q.type == EntityType::Gene  ? NodeKind::Gene
                                                : NodeKind::Variant;
  const KGNode* focus = kg_.node(q.key);
  if (!focus || focus->kind != want)
    throw Error(ErrorCode::EntityNotFound, std::string(to_string(q.type)) + " '" + q.key + "' is not in the graph");

  auto allowed = [&](EdgeKind k) { return q.include_kinds.empty() || q.include_kinds.count(k) != 0; };
  ContextBlock block;
  block.query = std::string(to_string(q.type)) + ":" + q.key;
  block.focus.push_back(q.key);

  std::vector<std::size_t> ids;
  auto take_incident = [&](const std::string& key, std::optional<EdgeKind> only) {
    for (const auto* list : {&kg_.out_edges(key), &kg_.in_edges(key)})
      for (auto e : *list) {
        auto kind = kg_.edges()[e].kind;
        if (only && kind != *only) continue;
        if (allowed(kind)) ids.push_back(e);
      }
  };

  if (q.type == EntityType::Variant) {
    // variant <- gene <- diseases
    for (auto e : kg_.in_edges(q.key)) {
      const auto& edge = kg_.edges()[e];
      if (edge.kind != EdgeKind::GeneVariant) continue;
      if (allowed(edge.kind)) ids.push_back(e);
      take_incident(edge.from, EdgeKind::DiseaseGene);
    }
  } else {
    take_incident(q.key, std::nullopt);
  }

  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  for (auto e : ids) block.evidence_edges.push_back(kg_.edges()[e]);
  return block;
}

ContextBlock query_typed(const KnowledgeGraph& kg, const OntologyGraph& phenotypes, const TermIC& ic,
                         const RetrievalQuery& q) {
  return Retriever(kg, phenotypes, ic).query_typed(q);
}

ContextBlock retrieve_by_phenotypes(const KnowledgeGraph& kg, const OntologyGraph& phenotypes, const TermIC& ic,
                                    const std::set<TermId>& terms, std::size_t k) {
  return Retriever(kg, phenotypes, ic).retrieve_by_phenotypes(terms, k);
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string join_set(const std::set<std::string>& s) {
  std::string out;
  for (const auto& x : s) out += (out.empty() ? "" : "|") + x;
  return out;
}

} // namespace

std::string serialize_context(const ContextBlock& block, ContextForm form) {
  if (form == ContextForm::Text) {
    std::ostringstream out;
    out << "# rarekg context v1\n";
    if (!block.query.empty()) out << "query\t" << block.query << "\n";
    for (const auto& f : block.focus) out << "focus\t" << f << "\n";
    for (const auto& u : block.unresolved) out << "unresolved\t" << u << "\n";
    for (std::size_t i = 0; i < block.candidates.size(); ++i) {
      const auto& c = block.candidates[i];
      out << "candidate\t" << (i + 1) << "\t" << c.disease.str() << "\t" << fixed6(c.score) << "\t" << c.label << "\t";
      for (std::size_t j = 0; j < c.matched_terms.size(); ++j)
        out << (j ? "," : "") << c.matched_terms[j].hpo.str() << "=" << fixed6(c.matched_terms[j].ic);
      out << "\n";
    }
    for (const auto& e : block.evidence_edges) {
      out << "edge\t" << to_string(e.kind) << "\t" << e.from << "\t" << e.to << "\t"
          << (e.frequency ? to_string(*e.frequency) : std::string_view("-")) << "\t" << join_set(e.provenance) << "\n";
    }
    return out.str();
  }

  nlohmann::json doc;
  doc["schema"] = "rarekg.context/1";
  doc["query"] = block.query;
  doc["focus"] = block.focus;
  doc["unresolved"] = block.unresolved;
  doc["candidates"] = nlohmann::json::array();
  for (const auto& c : block.candidates) {
    nlohmann::json jc;
    jc["disease"] = c.disease.str();
    jc["label"] = c.label;
    jc["score"] = c.score;
    jc["matched_terms"] = nlohmann::json::array();
    for (const auto& m : c.matched_terms) jc["matched_terms"].push_back({{"hpo", m.hpo.str()}, {"ic", m.ic}});
    doc["candidates"].push_back(std::move(jc));
  }
  doc["evidence_edges"] = nlohmann::json::array();
  for (const auto& e : block.evidence_edges) {
    nlohmann::json je{{"kind", to_string(e.kind)}, {"from", e.from}, {"to", e.to}, {"provenance", e.provenance}};
    if (e.frequency) je["frequency"] = to_string(*e.frequency);
    doc["evidence_edges"].push_back(std::move(je));
  }
  return doc.dump(2) + "\n";
}

} // namespace rarekg
