#include "rarekg/ic.hpp"

#include <algorithm>
#include <cmath>

#include "rarekg/error.hpp"

namespace rarekg {

TermIC::TermIC(std::map<TermId, double> values, std::size_t corpus_size)
    : values_(std::move(values)), corpus_size_(corpus_size) {
  for (const auto& [_, v] : values_) max_observed_ = std::max(max_observed_, v);
}

double TermIC::at(const TermId& t) const {
  auto it = values_.find(t);
  if (it == values_.end()) throw Error(ErrorCode::UnknownTerm, "no information content for " + t.str());
  return it->second;
}

std::optional<double> TermIC::find(const TermId& t) const {
  auto it = values_.find(t);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

TermIC compute_ic(const OntologyGraph& graph, const DiseaseAnnotationSet& annotations, const IcOptions& options) {
  const DiseaseAnnotationSet corpus = options.provenances ? annotations.filtered(*options.provenances) : annotations;
  const auto diseases = corpus.diseases();
  if (diseases.empty()) throw Error(ErrorCode::EmptyCorpus, "no annotated diseases in the IC corpus");

  std::vector<std::size_t> counts(graph.size(), 0);
  std::vector<OntologyGraph::Index> reached;
  for (const auto& d : diseases) {
    reached.clear();
    for (const auto& p : corpus.phenotypes_of(d)) {
      auto i = graph.require_index(p);
      const auto& cl = graph.closure(i);
      reached.insert(reached.end(), cl.begin(), cl.end());
    }
    std::sort(reached.begin(), reached.end());
    reached.erase(std::unique(reached.begin(), reached.end()), reached.end());
    for (auto i : reached) ++counts[i];
  }

  const double total = static_cast<double>(diseases.size());
  double max_ic = 0.0;
  std::map<TermId, double> values;
  for (OntologyGraph::Index i = 0; i < graph.size(); ++i) {
    if (counts[i] == 0) continue;
    double v = std::log(total / static_cast<double>(counts[i]));
    max_ic = std::max(max_ic, v);
    values.emplace(graph.at(i).id, v);
  }
  for (OntologyGraph::Index i = 0; i < graph.size(); ++i)
    if (counts[i] == 0) values.emplace(graph.at(i).id, max_ic);
  return TermIC(std::move(values), diseases.size());
}

double mean_ic(const TermIC& ic, const std::set<TermId>& terms) {
  if (terms.empty()) throw Error(ErrorCode::EmptyTermSet, "mean IC of an empty term set");
  double sum = 0.0;
  for (const auto& t : terms) sum += ic.at(t);
  return sum / static_cast<double>(terms.size());
}

} // namespace rarekg
