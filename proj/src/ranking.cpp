#include "rarekg/ranking.hpp"

#include <algorithm>

#include "rarekg/error.hpp"

namespace rarekg {

std::string_view to_string(RankMethod m) {
  return m == RankMethod::BaseIc ? "BASE_IC" : "BIDIRECTIONAL";
}

std::optional<RankMethod> rank_method_from_name(std::string_view name) {
  if (name == "BASE_IC" || name == "base_ic") return RankMethod::BaseIc;
  if (name == "BIDIRECTIONAL" || name == "bidirectional") return RankMethod::Bidirectional;
  return std::nullopt;
}

PhenotypeScorer::PhenotypeScorer(const OntologyGraph& graph, const TermIC& ic) : graph_(graph), ic_(ic) {
  ic_by_index_.resize(graph.size(), 0.0);
  for (OntologyGraph::Index i = 0; i < graph.size(); ++i) ic_by_index_[i] = ic.at(graph.at(i).id);
}

std::vector<OntologyGraph::Index> PhenotypeScorer::indices(const std::set<TermId>& terms) const {
  std::vector<OntologyGraph::Index> out;
  out.reserve(terms.size());
  for (const auto& t : terms) out.push_back(graph_.require_index(t));
  return out;
}

ScoreBreakdown PhenotypeScorer::base_ic(const std::set<TermId>& patient, const std::set<TermId>& disease_terms,
                                        bool propagate) const {
  ScoreBreakdown out;
  if (patient.empty() || disease_terms.empty()) return out;

  std::vector<OntologyGraph::Index> closure;
  if (propagate) {
    for (auto i : indices(disease_terms)) {
      const auto& cl = graph_.closure(i);
      closure.insert(closure.end(), cl.begin(), cl.end());
    }
    std::sort(closure.begin(), closure.end());
    closure.erase(std::unique(closure.begin(), closure.end()), closure.end());
  }

  for (const auto& t : patient) {
    bool matched = false;
    if (propagate) {
      auto i = graph_.require_index(t);
      matched = std::binary_search(closure.begin(), closure.end(), i);
    } else {
      matched = disease_terms.count(t) != 0;
    }
    if (!matched) continue;
    double v = ic_.at(t);
    out.contributions.emplace(t, v);
    out.score += v;
  }
  return out;
}

double PhenotypeScorer::resnik_index(OntologyGraph::Index a, OntologyGraph::Index b) const {
  if (a > b) std::swap(a, b);
  auto key = std::make_pair(a, b);
  if (auto it = memo_.find(key); it != memo_.end()) return it->second;
  const auto& ca = graph_.closure(a);
  const auto& cb = graph_.closure(b);
  double best = 0.0;
  auto ia = ca.begin();
  auto ib = cb.begin();
  while (ia != ca.end() && ib != cb.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      best = std::max(best, ic_by_index_[*ia]);
      ++ia;
      ++ib;
    }
  }
  memo_.emplace(key, best);
  return best;
}

double PhenotypeScorer::resnik(const TermId& a, const TermId& b) const {
  return resnik_index(graph_.require_index(a), graph_.require_index(b));
}

double PhenotypeScorer::directed(const std::vector<OntologyGraph::Index>& from,
                                 const std::vector<OntologyGraph::Index>& to) const {
  double sum = 0.0;
  for (auto a : from) {
    double best = 0.0;
    for (auto b : to) best = std::max(best, resnik_index(a, b));
    sum += best;
  }
  return sum / static_cast<double>(from.size());
}

double PhenotypeScorer::bidirectional(const std::set<TermId>& a, const std::set<TermId>& b) const {
  if (a.empty() || b.empty()) throw Error(ErrorCode::EmptySet, "bidirectional similarity needs two nonempty sets");
  auto ia = indices(a);
  auto ib = indices(b);
  return (directed(ia, ib) + directed(ib, ia)) / 2.0;
}

ScoreBreakdown score_base_ic(const TermIC& ic, const OntologyGraph& graph, const PatientProfile& patient,
                             const std::set<TermId>& disease_terms, bool propagate) {
  return PhenotypeScorer(graph, ic).base_ic(patient.phenotypes, disease_terms, propagate);
}

double score_bidirectional(const TermIC& ic, const OntologyGraph& graph, const std::set<TermId>& patient_terms,
                           const std::set<TermId>& disease_terms) {
  return PhenotypeScorer(graph, ic).bidirectional(patient_terms, disease_terms);
}

std::vector<RankedDiagnosis> rank_diseases(const TermIC& ic, const OntologyGraph& graph,
                                           const DiseaseAnnotationSet& annotations, const PatientProfile& patient,
                                           const RankOptions& options) {
  if (options.k < 1) throw Error(ErrorCode::InvalidArgument, "k must be at least 1");
  const auto diseases = annotations.diseases();
  if (diseases.empty()) throw Error(ErrorCode::EmptyCorpus, "no annotated diseases to rank");
  if (options.method == RankMethod::Bidirectional && patient.phenotypes.empty())
    throw Error(ErrorCode::EmptySet, "bidirectional ranking needs at least one patient phenotype");

  PhenotypeScorer scorer(graph, ic);
  std::vector<RankedDiagnosis> all;
  all.reserve(diseases.size());
  for (const auto& d : diseases) {
    RankedDiagnosis r;
    r.disease = d;
    const auto& terms = annotations.phenotypes_of(d);
    if (options.method == RankMethod::BaseIc) {
      auto s = scorer.base_ic(patient.phenotypes, terms, options.propagate);
      r.score = s.score;
      r.breakdown = std::move(s.contributions);
    } else {
      r.score = scorer.bidirectional(patient.phenotypes, terms);
    }
    all.push_back(std::move(r));
  }
  std::stable_sort(all.begin(), all.end(), [](const RankedDiagnosis& a, const RankedDiagnosis& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.disease < b.disease;
  });
  if (all.size() > static_cast<std::size_t>(options.k)) all.resize(static_cast<std::size_t>(options.k));
  for (std::size_t i = 0; i < all.size(); ++i) all[i].rank = static_cast<int>(i + 1);
  return all;
}

// ---------------------------------------------------------------------------

std::string_view to_string(Tier t) {
  switch (t) {
    case Tier::Few: return "FEW";
    case Tier::Moderate: return "MODERATE";
    case Tier::Rich: return "RICH";
  }
  return "?";
}

Tier tier_for(std::size_t key_count) {
  if (key_count <= 1) return Tier::Few;
  if (key_count <= 4) return Tier::Moderate;
  return Tier::Rich;
}

CaseStratum stratify_case(const DiseaseAnnotationSet& annotations, const PatientProfile& patient,
                          const OntologyGraph* graph, bool propagate) {
  if (!patient.truth) throw Error(ErrorCode::MissingTruth, "case " + patient.case_id + " has no truth diagnosis");
  const auto& direct = annotations.phenotypes_of(*patient.truth);
  CaseStratum s;
  if (propagate && graph) {
    std::set<TermId> closure;
    for (const auto& t : direct) {
      auto a = graph->ancestors(t, true);
      closure.insert(a.begin(), a.end());
    }
    for (const auto& p : patient.phenotypes)
      if (closure.count(p)) s.key_terms.insert(p);
  } else {
    for (const auto& p : patient.phenotypes)
      if (direct.count(p)) s.key_terms.insert(p);
  }
  s.key_count = s.key_terms.size();
  s.tier = tier_for(s.key_count);
  return s;
}

// ---------------------------------------------------------------------------

std::vector<DifficultyScore> composite_difficulty(const TermIC& ic, const std::vector<PatientProfile>& cohort,
                                                  const DifficultyOptions& options) {
  if (cohort.size() < 2) throw Error(ErrorCode::InvalidArgument, "difficulty needs a cohort of at least two cases");

  std::vector<DifficultyScore> out;
  out.reserve(cohort.size());
  for (const auto& c : cohort) {
    if (c.phenotypes.empty()) throw Error(ErrorCode::InvalidArgument, "case " + c.case_id + " has no phenotypes");
    DifficultyScore s;
    s.case_id = c.case_id;
    s.mean_ic = mean_ic(ic, c.phenotypes);
    s.phen_count = c.phenotypes.size();
    out.push_back(std::move(s));
  }

  DifficultyExtrema ex;
  bool first = true;
  auto observe = [&](double m, std::size_t n) {
    if (first) {
      ex = {m, m, n, n};
      first = false;
      return;
    }
    ex.mean_ic_min = std::min(ex.mean_ic_min, m);
    ex.mean_ic_max = std::max(ex.mean_ic_max, m);
    ex.n_min = std::min(ex.n_min, n);
    ex.n_max = std::max(ex.n_max, n);
  };
  if (options.extrema == ExtremaSource::Cases) {
    for (const auto& s : out) observe(s.mean_ic, s.phen_count);
  } else {
    if (!options.annotations) throw Error(ErrorCode::InvalidArgument, "disease extrema need an annotation set");
    for (const auto& d : options.annotations->diseases()) {
      const auto& terms = options.annotations->phenotypes_of(d);
      observe(mean_ic(ic, terms), terms.size());
    }
  }
  if (ex.mean_ic_max == ex.mean_ic_min) throw Error(ErrorCode::DegenerateCohort, "Mean_IC range is zero");
  if (ex.n_max == ex.n_min) throw Error(ErrorCode::DegenerateCohort, "phenotype count range is zero");

  const bool clamp = options.extrema == ExtremaSource::Diseases;
  auto unit = [clamp](double v) { return clamp ? std::clamp(v, 0.0, 1.0) : v; };
  for (auto& s : out) {
    s.extrema = ex;
    s.norm_mean_ic = unit((s.mean_ic - ex.mean_ic_min) / (ex.mean_ic_max - ex.mean_ic_min));
    s.norm_cnt = unit((static_cast<double>(s.phen_count) - static_cast<double>(ex.n_min)) /
                      (static_cast<double>(ex.n_max) - static_cast<double>(ex.n_min)));
    s.composite = (1.0 - s.norm_mean_ic) * s.norm_cnt;
  }
  return out;
}

std::vector<std::string> select_top_difficult(const std::vector<DifficultyScore>& scores, std::size_t m,
                                              SelectionMode mode) {
  if (m < 1) throw Error(ErrorCode::InvalidArgument, "m must be at least 1");
  std::vector<const DifficultyScore*> order;
  order.reserve(scores.size());
  for (const auto& s : scores) order.push_back(&s);
  std::sort(order.begin(), order.end(), [mode](const DifficultyScore* a, const DifficultyScore* b) {
    if (mode == SelectionMode::HighestComposite) {
      if (a->composite != b->composite) return a->composite > b->composite;
    } else {
      if (a->mean_ic != b->mean_ic) return a->mean_ic < b->mean_ic;
    }
    return a->case_id < b->case_id;
  });
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < order.size() && i < m; ++i) ids.push_back(order[i]->case_id);
  return ids;
}

} // namespace rarekg
