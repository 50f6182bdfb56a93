#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rarekg/ic.hpp"
#include "rarekg/ingest.hpp"
#include "rarekg/kg.hpp"
#include "rarekg/ontology.hpp"

namespace rarekg {

// Everything a built graph needs to answer queries without the raw sources.
struct KnowledgeBase {
  OntologyGraph phenotypes;
  std::optional<OntologyGraph> diseases;
  DiseaseAnnotationSet annotations;
  std::vector<GeneRecord> genes;
  std::vector<VariantRecord> variants;
  XrefTable xrefs;
  TermIC ic;
  KnowledgeGraph kg;
};

struct BuildInputs {
  OntologyGraph phenotypes;
  std::optional<OntologyGraph> diseases;
  DiseaseAnnotationSet annotations;
  std::vector<GeneRecord> genes;
  std::vector<VariantRecord> variants;
  XrefTable xrefs;
  IcOptions ic_options;
};

// Validates, builds the graph and computes IC. Throws VALIDATION_NOT_CLEAN.
KnowledgeBase build_knowledge_base(BuildInputs inputs);

struct Snapshot {
  std::string config_hash;
  KnowledgeBase kb;
};

// Line-delimited records; first line is the header. Output is a pure
// function of the knowledge base and hash.
std::string write_snapshot(const KnowledgeBase& kb, std::string_view config_hash);
// Throws MALFORMED_SNAPSHOT on bad records or count mismatches.
Snapshot read_snapshot(std::string_view text);

} // namespace rarekg
