#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "rarekg/term_id.hpp"

namespace rarekg {

class OntologyGraph;

// ---------------------------------------------------------------------------
// Disease-phenotype annotations

enum class Frequency { AlwaysPresent, VeryFrequent, Frequent, Occasional, Rare, Unknown };

std::string_view to_string(Frequency f);
std::optional<Frequency> frequency_from_name(std::string_view name);

// Result of interpreting one HPOA frequency cell.
struct FrequencyToken {
  enum class Kind { Value, Excluded, Invalid };
  Kind kind = Kind::Invalid;
  Frequency value = Frequency::Unknown;
};

// Accepts HP frequency codes (HP:0040280..HP:0040285), "n/m" fractions,
// percentages, and the Orphanet bucket phrases. An empty cell is Unknown.
FrequencyToken map_frequency_token(std::string_view token);

struct DiseaseAnnotation {
  TermId disease;
  TermId phenotype;
  Frequency frequency = Frequency::Unknown;
  std::string provenance;
  std::string disease_name;

  friend bool operator==(const DiseaseAnnotation&, const DiseaseAnnotation&) = default;
};

class DiseaseAnnotationSet {
public:
  DiseaseAnnotationSet() = default;
  // Rows repeating a (disease, phenotype, provenance) triple are collapsed
  // onto the first occurrence; the count is kept in duplicates_dropped().
  explicit DiseaseAnnotationSet(std::vector<DiseaseAnnotation> rows);

  const std::vector<DiseaseAnnotation>& annotations() const noexcept { return rows_; }
  std::size_t size() const noexcept { return rows_.size(); }
  bool empty() const noexcept { return rows_.empty(); }
  std::size_t duplicates_dropped() const noexcept { return duplicates_dropped_; }

  std::set<TermId> diseases() const;
  std::set<TermId> phenotypes() const;
  // Direct (unpropagated) annotations of a disease; empty for unknown ids.
  const std::set<TermId>& phenotypes_of(const TermId& disease) const;
  const std::set<TermId>& diseases_with(const TermId& phenotype) const;
  const std::vector<std::size_t>& rows_for_disease(const TermId& disease) const;
  std::string disease_name(const TermId& disease) const;
  std::set<std::string> provenances() const;

  // Keeps only rows whose provenance is listed.
  DiseaseAnnotationSet filtered(const std::set<std::string>& provenances) const;
  static DiseaseAnnotationSet merge(const DiseaseAnnotationSet& a, const DiseaseAnnotationSet& b);

private:
  std::vector<DiseaseAnnotation> rows_;
  std::map<TermId, std::set<TermId>> by_disease_;
  std::map<TermId, std::set<TermId>> by_phenotype_;
  std::map<TermId, std::vector<std::size_t>> rows_by_disease_;
  std::size_t duplicates_dropped_ = 0;
};

struct RowError {
  std::size_t line = 0;
  std::string reason;
};

struct ParseOptions {
  std::string provenance = "HPOA";
  // Fraction of data rows that may be rejected before the whole parse fails.
  double max_reject_rate = 0.01;
};

struct HpoaParseResult {
  DiseaseAnnotationSet annotations;
  std::vector<RowError> rejected;
  std::size_t data_rows = 0;
  std::size_t skipped_negated = 0;
  std::size_t skipped_non_phenotype_aspect = 0;
  std::size_t skipped_excluded_frequency = 0;
};

// Throws HEADER_MISMATCH, or MALFORMED_ROW when rejects exceed the threshold.
HpoaParseResult parse_hpoa(std::string_view source, const ParseOptions& options = {});
std::string write_hpoa(const DiseaseAnnotationSet& set);

// ---------------------------------------------------------------------------
// Genes

struct GeneRecord {
  std::string symbol;
  std::set<TermId> diseases;
  std::set<TermId> phenotypes;

  friend bool operator==(const GeneRecord&, const GeneRecord&) = default;
};

bool is_valid_gene_symbol(std::string_view symbol);

struct GeneParseResult {
  std::vector<GeneRecord> genes;
  std::vector<RowError> rejected;
};

GeneParseResult parse_genes(std::string_view source, const ParseOptions& options = {});
std::string write_genes(const std::vector<GeneRecord>& genes);

// ---------------------------------------------------------------------------
// Variants

enum class Significance { Pathogenic, LikelyPathogenic, Vus, Other };

std::string_view to_string(Significance s);
std::optional<Significance> significance_from_name(std::string_view name);
// Higher is more severe.
int severity(Significance s);

struct VariantKey {
  std::string chrom;
  std::uint64_t pos = 0;
  std::string ref;
  std::string alt;

  std::string str() const;  // chrom:pos:ref:alt
  static std::optional<VariantKey> parse(std::string_view text);

  friend bool operator==(const VariantKey&, const VariantKey&) = default;
  friend std::strong_ordering operator<=>(const VariantKey&, const VariantKey&) = default;
};

struct VariantRecord {
  VariantKey key;
  std::string gene;
  std::optional<std::string> transcript;
  std::optional<std::string> hgvs_c;
  std::optional<std::string> hgvs_p;
  Significance significance = Significance::Other;
  std::set<std::string> provenance;

  friend bool operator==(const VariantRecord&, const VariantRecord&) = default;
};

enum class VariantFormat { VcfSlim, Tsv };

struct VariantParseResult {
  std::vector<VariantRecord> records;
  std::size_t unknown_significance = 0;
  std::size_t skipped_no_alt = 0;
  std::size_t skipped_no_gene = 0;
};

// Throws MALFORMED_LINE on the first line that cannot be read.
VariantParseResult parse_variants(std::string_view source, VariantFormat format, std::string_view provenance = "ClinVar");
std::string write_variants_tsv(const std::vector<VariantRecord>& records);

// Unique by key, most severe significance wins, provenance merged, sorted by key.
std::vector<VariantRecord> dedupe_variants(std::vector<VariantRecord> records);

// ---------------------------------------------------------------------------
// Entity normalization

class NormalizationTable {
public:
  struct Entry {
    TermId id;
    std::string provenance;
    std::string label;  // label as first seen
  };
  struct Conflict {
    std::string key;
    TermId kept;
    TermId rejected;
  };

  // Keys are lowercased with whitespace collapsed. An existing key is never
  // overwritten; a differing id is recorded as a conflict.
  bool insert(std::string_view label, const TermId& id, std::string_view provenance);
  std::optional<TermId> lookup(std::string_view label) const;
  bool contains_id(const TermId& id) const;
  // Label for an id, preferring the lexicographically smallest key.
  std::optional<std::string> label_of(const TermId& id) const;

  const std::map<std::string, Entry>& entries() const noexcept { return entries_; }
  const std::vector<Conflict>& conflicts() const noexcept { return conflicts_; }
  std::size_t size() const noexcept { return entries_.size(); }

private:
  std::map<std::string, Entry> entries_;
  std::map<TermId, std::string> first_key_by_id_;
  std::vector<Conflict> conflicts_;
};

NormalizationTable parse_normalization_table(std::string_view source);
std::string write_normalization_table(const NormalizationTable& table);

std::optional<TermId> normalize_entity(const NormalizationTable& table, std::string_view label);

// OMIM -> ORPHA cross references.
class XrefTable {
public:
  void add(const TermId& omim, const TermId& orpha);
  // Lowest ORPHA id mapped from the OMIM id, if any.
  std::optional<TermId> to_orpha(const TermId& omim) const;
  const std::map<TermId, std::set<TermId>>& entries() const noexcept { return map_; }
  std::size_t size() const;

private:
  std::map<TermId, std::set<TermId>> map_;
};

XrefTable parse_xrefs(std::string_view source);

// ---------------------------------------------------------------------------
// Source validation

enum class FindingKind { DanglingPhenotype, DanglingDisease, DuplicateEdge, UnknownGene, ObsoletePhenotype, DuplicateAnnotation };

std::string_view to_string(FindingKind k);
bool is_error(FindingKind k);

struct Finding {
  FindingKind kind;
  std::string detail;
};

struct ValidationReport {
  std::vector<Finding> findings;

  std::size_t count(FindingKind k) const;
  std::size_t error_count() const;
  bool clean() const { return error_count() == 0; }
};

ValidationReport validate_sources(const OntologyGraph& ontology, const DiseaseAnnotationSet& annotations,
                                  const std::vector<GeneRecord>& genes, const std::vector<VariantRecord>& variants,
                                  const OntologyGraph* disease_ontology = nullptr, const XrefTable* xrefs = nullptr);

} // namespace rarekg
