#pragma once

#include <cstdint>
#include <cstdio>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "rarekg/config.hpp"
#include "rarekg/error.hpp"
#include "rarekg/ingest.hpp"
#include "rarekg/ontology.hpp"
#include "rarekg/snapshot.hpp"

namespace rarekg::testing {

inline std::string data_path(const std::string& name) { return std::string(RAREKG_TEST_DATA) + "/" + name; }

inline std::string slurp(const std::string& name) { return read_file(data_path(name)); }

inline std::string fixed_id(char const* prefix, std::size_t n, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s:%0*zu", prefix, width, n);
  return buf;
}

inline TermId hp(std::size_t n) { return TermId::from(fixed_id("HP", n, 7)); }
inline TermId orpha(std::size_t n) { return TermId::from("ORPHA:" + std::to_string(n)); }

// Code of the rarekg::Error thrown by f, if any.
template <class F>
std::optional<ErrorCode> error_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

// The checked-in fixture sources, parsed and built the same way the CLI does.
struct Fixture {
  OntologyGraph hp;
  OntologyGraph orpha;
  HpoaParseResult hpoa;
  std::vector<GeneRecord> genes;
  std::vector<VariantRecord> variants;
  XrefTable xrefs;
  NormalizationTable norm;
  KnowledgeBase kb;
};

inline Fixture load_fixture() {
  Fixture f;
  f.hp = parse_ontology(slurp("hp_fixture.obo"), OntologyFormat::OboSubset);
  f.orpha = parse_ontology(slurp("orpha_fixture.obo"), OntologyFormat::OboSubset);
  f.hpoa = parse_hpoa(slurp("annotations.hpoa"));
  ParseOptions gene_opts;
  gene_opts.provenance = "genes";
  f.genes = parse_genes(slurp("genes.tsv"), gene_opts).genes;
  f.variants = dedupe_variants(parse_variants(slurp("variants.vcf"), VariantFormat::VcfSlim).records);
  f.xrefs = parse_xrefs(slurp("xrefs.tsv"));
  f.norm = parse_normalization_table(slurp("normalization.tsv"));
  BuildInputs in{f.hp, f.orpha, f.hpoa.annotations, f.genes, f.variants, f.xrefs, {}};
  f.kb = build_knowledge_base(std::move(in));
  return f;
}

struct ToyCorpus {
  OntologyGraph graph;
  DiseaseAnnotationSet annotations;
};

// Random single-rooted DAG; each non-root term draws one to three parents
// among earlier terms. Diseases get 1..max_annotations non-root terms.
inline ToyCorpus make_toy_corpus(std::uint64_t seed, std::size_t n_terms, std::size_t n_diseases,
                                 std::size_t max_annotations) {
  std::mt19937_64 rng(seed);
  auto draw = [&rng](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };

  std::vector<OntologyTerm> terms;
  for (std::size_t i = 0; i < n_terms; ++i) {
    OntologyTerm t;
    t.id = hp(i + 1);
    t.label = "Toy term " + std::to_string(i + 1);
    if (i > 0) {
      std::size_t k = 1 + draw(3);
      for (std::size_t j = 0; j < k; ++j) t.parents.insert(hp(draw(i) + 1));
    }
    terms.push_back(std::move(t));
  }

  std::vector<DiseaseAnnotation> rows;
  for (std::size_t d = 0; d < n_diseases; ++d) {
    std::size_t k = 1 + draw(max_annotations);
    std::set<std::size_t> picked;
    while (picked.size() < k) picked.insert(2 + draw(n_terms - 1));
    for (auto p : picked) rows.push_back({orpha(1000 + d), hp(p), Frequency::Unknown, "HPOA", "Toy disease"});
  }
  return {OntologyGraph::from_terms(std::move(terms)), DiseaseAnnotationSet(std::move(rows))};
}

} // namespace rarekg::testing
