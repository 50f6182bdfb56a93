#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "rarekg/ic.hpp"
#include "rarekg/ingest.hpp"
#include "rarekg/ontology.hpp"

namespace rarekg {

enum class NodeKind { Disease, Phenotype, Gene, Variant };
// Declaration order is the canonical edge order.
enum class EdgeKind { DiseasePhenotype, DiseaseGene, GeneVariant, PhenotypeGene, DiseaseParent, DiseaseXref };

std::string_view to_string(NodeKind k);
std::string_view to_string(EdgeKind k);
std::optional<NodeKind> node_kind_from_name(std::string_view name);
std::optional<EdgeKind> edge_kind_from_name(std::string_view name);
// (from kind, to kind) an edge kind connects.
std::pair<NodeKind, NodeKind> signature(EdgeKind k);

struct KGNode {
  NodeKind kind = NodeKind::Disease;
  std::string key;
  std::string label;

  friend bool operator==(const KGNode&, const KGNode&) = default;
};

struct KGEdge {
  EdgeKind kind = EdgeKind::DiseasePhenotype;
  std::string from;
  std::string to;
  std::optional<Frequency> frequency;  // DiseasePhenotype only
  std::set<std::string> provenance;

  friend bool operator==(const KGEdge&, const KGEdge&) = default;
};

bool canonical_less(const KGEdge& a, const KGEdge& b);

struct BuildStats {
  std::map<NodeKind, std::size_t> nodes;
  std::map<EdgeKind, std::size_t> edges;
  std::size_t omim_diseases = 0;
  std::size_t orpha_diseases = 0;

  friend bool operator==(const BuildStats&, const BuildStats&) = default;
};

// Renders the stats as "category: count" lines.
std::string render_stats(const BuildStats& stats);

// Immutable typed graph with per-node adjacency indexes.
class KnowledgeGraph {
public:
  KnowledgeGraph() = default;

  // Checks key uniqueness, endpoint resolution, edge signatures and
  // duplicate (kind, from, to) triples (DUPLICATE_EDGE).
  static KnowledgeGraph from_parts(std::vector<KGNode> nodes, std::vector<KGEdge> edges);

  const std::vector<KGNode>& nodes() const noexcept { return nodes_; }
  const std::vector<KGEdge>& edges() const noexcept { return edges_; }
  const KGNode* node(std::string_view key) const;
  const std::vector<std::size_t>& out_edges(std::string_view key) const;
  const std::vector<std::size_t>& in_edges(std::string_view key) const;
  const BuildStats& stats() const noexcept { return stats_; }

private:
  std::vector<KGNode> nodes_;  // sorted by key
  std::vector<KGEdge> edges_;  // canonical order
  std::unordered_map<std::string, std::size_t> node_index_;
  std::vector<std::vector<std::size_t>> out_;
  std::vector<std::vector<std::size_t>> in_;
  BuildStats stats_;
};

struct KgSources {
  const OntologyGraph& phenotypes;
  const DiseaseAnnotationSet& annotations;
  const std::vector<GeneRecord>& genes;
  const std::vector<VariantRecord>& variants;
  const OntologyGraph* disease_ontology = nullptr;
  const XrefTable* xrefs = nullptr;
  std::string gene_provenance = "genes";
};

// Runs validate_sources first; throws VALIDATION_NOT_CLEAN on any error finding.
KnowledgeGraph build_kg(const KgSources& sources);

// ---------------------------------------------------------------------------
// Retrieval

enum class EntityType { Disease, Phenotypes, Gene, Variant };

std::string_view to_string(EntityType t);

struct RetrievalQuery {
  EntityType type = EntityType::Phenotypes;
  std::string key;                // disease id, gene symbol or variant key
  std::set<TermId> phenotypes;    // phenotype-set queries
  std::size_t max_candidates = 20;
  std::set<EdgeKind> include_kinds;  // empty = all kinds
  bool propagate = true;
  bool frequency_weighting = false;
};

struct MatchedTerm {
  TermId hpo;
  double ic = 0.0;
};

struct ContextCandidate {
  TermId disease;
  std::string label;
  double score = 0.0;
  std::vector<MatchedTerm> matched_terms;
};

struct ContextBlock {
  std::string query;
  std::vector<std::string> focus;
  std::vector<std::string> unresolved;
  std::vector<ContextCandidate> candidates;
  std::vector<KGEdge> evidence_edges;
};

// Pure retrieval over an immutable graph; safe to share across threads.
class Retriever {
public:
  Retriever(const KnowledgeGraph& kg, const OntologyGraph& phenotypes, const TermIC& ic)
      : kg_(kg), phenotypes_(phenotypes), ic_(ic) {}

  // Throws ENTITY_NOT_FOUND for unknown disease/gene/variant keys.
  ContextBlock query_typed(const RetrievalQuery& q) const;
  // Throws NO_RESOLVABLE_PHENOTYPE, INVALID_ARGUMENT when k == 0.
  ContextBlock retrieve_by_phenotypes(const std::set<TermId>& phenotypes, std::size_t k, bool propagate = true,
                                      bool frequency_weighting = false) const;

private:
  const KnowledgeGraph& kg_;
  const OntologyGraph& phenotypes_;
  const TermIC& ic_;
};

ContextBlock query_typed(const KnowledgeGraph& kg, const OntologyGraph& phenotypes, const TermIC& ic,
                         const RetrievalQuery& q);
ContextBlock retrieve_by_phenotypes(const KnowledgeGraph& kg, const OntologyGraph& phenotypes, const TermIC& ic,
                                    const std::set<TermId>& terms, std::size_t k);

enum class ContextForm { Text, Structured };

std::string serialize_context(const ContextBlock& block, ContextForm form);

// Weight applied per annotation frequency when frequency weighting is on.
double frequency_weight(Frequency f);

} // namespace rarekg
