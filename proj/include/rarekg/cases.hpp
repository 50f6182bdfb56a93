#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "rarekg/ic.hpp"
#include "rarekg/ingest.hpp"
#include "rarekg/ontology.hpp"

namespace rarekg {

enum class Section { ChiefComplaint, PresentIllness, FamilyHistory, PhysicalExam, SpecialtyAssessment, AncillaryTests };

// Order in which clinical information is acquired.
inline constexpr std::array<Section, 6> kSectionOrder = {Section::ChiefComplaint,      Section::PresentIllness,
                                                         Section::FamilyHistory,       Section::PhysicalExam,
                                                         Section::SpecialtyAssessment, Section::AncillaryTests};

std::string_view to_string(Section s);
std::optional<Section> section_from_name(std::string_view name);

struct CaseMeta {
  std::string config_hash;
  std::optional<std::uint64_t> seed;

  friend bool operator==(const CaseMeta&, const CaseMeta&) = default;
};

struct CaseRecord {
  std::string case_id;
  std::map<Section, std::string> sections;  // always holds all six keys
  std::set<TermId> phenotypes;
  std::vector<VariantRecord> variants;
  std::optional<TermId> truth;
  std::set<std::string> categories;
  CaseMeta meta;

  // A case with the six sections present and empty.
  static CaseRecord empty(std::string case_id);

  friend bool operator==(const CaseRecord&, const CaseRecord&) = default;
};

// Case documents. Variants are stored by key only.
std::string case_to_json(const CaseRecord& c, bool pretty = false);
// Throws MALFORMED_LINE on schema violations.
CaseRecord case_from_json(std::string_view text);
// One compact case document per line.
std::string write_cases_jsonl(const std::vector<CaseRecord>& cases);
std::vector<CaseRecord> read_cases_jsonl(std::string_view text);

// GA4GH-style phenopacket: phenotypicFeatures, interpretations (vcfRecord)
// and diseases[0].term.id.
CaseRecord import_phenopacket(std::string_view json_text);

// ---------------------------------------------------------------------------
// Synthetic generation

// Unbiased draw in [0, n) by rejection, identical across standard libraries.
std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t n);

struct SyntheticCaseSpec {
  TermId disease;
  std::size_t n_signal = 1;
  std::optional<std::size_t> n_distractors;  // drawn from the range when absent
  std::size_t distractor_min = 1;
  std::size_t distractor_max = 5;
  std::uint64_t rng_seed = 0;
  std::string case_id;  // defaults to SYN-<disease>-<seed>
};

// Terms eligible as distractors for a disease: non-obsolete HP terms outside
// the reflexive ancestor/descendant closure of its annotations. When the
// ontology holds the phenotypic abnormality root (HP:0000118), only its
// descendants are eligible.
std::vector<TermId> distractor_pool(const OntologyGraph& ontology, const std::set<TermId>& annotations);

// Throws INSUFFICIENT_ANNOTATIONS, INSUFFICIENT_DISTRACTOR_POOL.
CaseRecord generate_synthetic_case(const OntologyGraph& ontology, const DiseaseAnnotationSet& annotations,
                                   const TermIC& ic, const SyntheticCaseSpec& spec);

// ---------------------------------------------------------------------------
// Slicing

// Keeps sections 1..step in acquisition order. Throws STEP_OUT_OF_RANGE.
CaseRecord slice_incremental(const CaseRecord& c, int step);
CaseRecord slice_ablation(const CaseRecord& c, Section field);
// Throws UNKNOWN_FIELD for names outside the six section keys.
CaseRecord slice_ablation(const CaseRecord& c, std::string_view field);

// Non-empty sections rendered as "Heading: text" lines, followed by the
// phenotype list when present.
std::string render_case_text(const CaseRecord& c, const OntologyGraph* ontology = nullptr);

// ---------------------------------------------------------------------------
// Reasoning-chain training pairs

// Placeholders: {{case}}, {{guideline}}, {{reasoning}}, {{diagnosis_label}},
// {{diagnosis_id}}. The prompt uses case and guideline only; the completion
// uses reasoning and diagnosis only.
struct PromptTemplate {
  std::string prompt;
  std::string completion;

  static PromptTemplate standard();
};

inline constexpr std::string_view kNoGuidelineMarker = "(no guideline provided)";

struct CoTExample {
  std::string x;
  TermId y;
  std::string y_label;
  std::string r;
  std::string g;
  std::string p;
  std::string c;
};

// Throws EMPTY_CASE, UNRESOLVABLE_DIAGNOSIS, INVALID_ARGUMENT when a field
// collides with the template text so that extraction would be ambiguous.
CoTExample build_cot_pair(std::string_view x, const TermId& y, std::string_view y_label, std::string_view r,
                          std::string_view g, const NormalizationTable& table,
                          const PromptTemplate& tmpl = PromptTemplate::standard());

struct PromptFields {
  std::string x;
  std::string g;
};
struct CompletionFields {
  std::string r;
  std::string y_label;
  std::optional<TermId> y;
};

// Inverse of the template application. Throws MALFORMED_LINE on mismatch.
PromptFields parse_cot_prompt(std::string_view p, const PromptTemplate& tmpl = PromptTemplate::standard());
CompletionFields parse_cot_completion(std::string_view c, const PromptTemplate& tmpl = PromptTemplate::standard());

} // namespace rarekg
