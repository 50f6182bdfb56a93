#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "rarekg/ic.hpp"

namespace rarekg {

struct PatientProfile {
  std::string case_id;
  std::set<TermId> phenotypes;
  std::optional<TermId> truth;
};

struct ScoreBreakdown {
  double score = 0.0;
  // Matched patient term -> IC contribution. Contributions sum to score.
  std::map<TermId, double> contributions;
};

struct RankedDiagnosis {
  int rank = 0;
  TermId disease;
  double score = 0.0;
  std::map<TermId, double> breakdown;
};

enum class RankMethod { BaseIc, Bidirectional };

std::string_view to_string(RankMethod m);
std::optional<RankMethod> rank_method_from_name(std::string_view name);

// Reusable scoring state over one (ontology, IC) pair: IC by term index and a
// memo of pairwise Resnik similarities. Not thread-safe; use one per thread.
class PhenotypeScorer {
public:
  PhenotypeScorer(const OntologyGraph& graph, const TermIC& ic);

  // Sum of IC over patient terms that are ancestors-or-self of some disease
  // term (propagate) or members of the disease set (exact).
  ScoreBreakdown base_ic(const std::set<TermId>& patient, const std::set<TermId>& disease_terms, bool propagate) const;
  // Mean of best-match Resnik similarities, averaged over both directions.
  // Throws EMPTY_SET.
  double bidirectional(const std::set<TermId>& a, const std::set<TermId>& b) const;
  // IC of the most informative common ancestor; 0 when none is shared.
  double resnik(const TermId& a, const TermId& b) const;

  const OntologyGraph& graph() const noexcept { return graph_; }
  const TermIC& ic() const noexcept { return ic_; }
  double ic_of(OntologyGraph::Index i) const { return ic_by_index_[i]; }

private:
  double resnik_index(OntologyGraph::Index a, OntologyGraph::Index b) const;
  std::vector<OntologyGraph::Index> indices(const std::set<TermId>& terms) const;
  double directed(const std::vector<OntologyGraph::Index>& from, const std::vector<OntologyGraph::Index>& to) const;

  const OntologyGraph& graph_;
  const TermIC& ic_;
  std::vector<double> ic_by_index_;
  mutable std::map<std::pair<OntologyGraph::Index, OntologyGraph::Index>, double> memo_;
};

ScoreBreakdown score_base_ic(const TermIC& ic, const OntologyGraph& graph, const PatientProfile& patient,
                             const std::set<TermId>& disease_terms, bool propagate = true);

double score_bidirectional(const TermIC& ic, const OntologyGraph& graph, const std::set<TermId>& patient_terms,
                           const std::set<TermId>& disease_terms);

struct RankOptions {
  RankMethod method = RankMethod::BaseIc;
  int k = 20;
  bool propagate = true;
};

// Scores every annotated disease and returns the top k ordered by
// (score desc, disease id asc). Throws EMPTY_CORPUS, INVALID_ARGUMENT (k < 1).
std::vector<RankedDiagnosis> rank_diseases(const TermIC& ic, const OntologyGraph& graph,
                                           const DiseaseAnnotationSet& annotations, const PatientProfile& patient,
                                           const RankOptions& options = {});

// ---------------------------------------------------------------------------
// Key-phenotype strata

enum class Tier { Few, Moderate, Rich };

std::string_view to_string(Tier t);
Tier tier_for(std::size_t key_count);

struct CaseStratum {
  Tier tier = Tier::Few;
  std::size_t key_count = 0;
  std::set<TermId> key_terms;
};

// Key terms are patient phenotypes equal to a direct annotation of the truth
// disease. With a graph and propagate=true, a patient term also counts when it
// is an ancestor of a direct annotation. Throws MISSING_TRUTH.
CaseStratum stratify_case(const DiseaseAnnotationSet& annotations, const PatientProfile& patient,
                          const OntologyGraph* graph = nullptr, bool propagate = false);

// ---------------------------------------------------------------------------
// Difficulty

struct DifficultyExtrema {
  double mean_ic_min = 0.0;
  double mean_ic_max = 0.0;
  std::size_t n_min = 0;
  std::size_t n_max = 0;
};

struct DifficultyScore {
  std::string case_id;
  double mean_ic = 0.0;
  double norm_mean_ic = 0.0;
  std::size_t phen_count = 0;
  double norm_cnt = 0.0;
  double composite = 0.0;
  DifficultyExtrema extrema;
};

enum class ExtremaSource { Cases, Diseases };

struct DifficultyOptions {
  ExtremaSource extrema = ExtremaSource::Cases;
  // Required for ExtremaSource::Diseases.
  const DiseaseAnnotationSet* annotations = nullptr;
};

// Throws DEGENERATE_COHORT when either range collapses, INVALID_ARGUMENT when
// the cohort has fewer than two cases or a case has no phenotypes.
std::vector<DifficultyScore> composite_difficulty(const TermIC& ic, const std::vector<PatientProfile>& cohort,
                                                  const DifficultyOptions& options = {});

enum class SelectionMode { HighestComposite, LowestMeanIc };

// Case ids ordered by the selection key, ties by case id ascending.
std::vector<std::string> select_top_difficult(const std::vector<DifficultyScore>& scores, std::size_t m,
                                              SelectionMode mode = SelectionMode::HighestComposite);

} // namespace rarekg
