#pragma once

// Brute-force reference computations. They only read declared parents and raw
// annotation rows, never the library's closures, indexes or scorers.

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <vector>

#include "rarekg/ingest.hpp"
#include "rarekg/ontology.hpp"

namespace rarekg::oracle {

using TermSet = std::set<TermId>;

inline TermSet ancestors(const OntologyGraph& g, const TermId& t) {
  TermSet seen;
  std::vector<TermId> stack{t};
  while (!stack.empty()) {
    TermId x = stack.back();
    stack.pop_back();
    if (!seen.insert(x).second) continue;
    for (const auto& p : g.term(x).parents) stack.push_back(p);
  }
  return seen;
}

inline TermSet descendants(const OntologyGraph& g, const TermId& t) {
  TermSet out;
  for (const auto& term : g.terms())
    if (ancestors(g, term.id).count(t)) out.insert(term.id);
  return out;
}

inline TermSet ancestor_union(const OntologyGraph& g, const TermSet& terms) {
  TermSet out;
  for (const auto& t : terms) {
    auto a = ancestors(g, t);
    out.insert(a.begin(), a.end());
  }
  return out;
}

inline std::map<TermId, TermSet> by_disease(const DiseaseAnnotationSet& set) {
  std::map<TermId, TermSet> out;
  for (const auto& row : set.annotations()) out[row.disease].insert(row.phenotype);
  return out;
}

inline std::map<TermId, double> information_content(const OntologyGraph& g, const DiseaseAnnotationSet& set) {
  auto corpus = by_disease(set);
  std::map<TermId, TermSet> reach;
  for (const auto& [d, terms] : corpus) reach[d] = ancestor_union(g, terms);

  std::map<TermId, double> ic;
  double max_seen = 0.0;
  TermSet unseen;
  for (const auto& term : g.terms()) {
    std::size_t hits = 0;
    for (const auto& [d, r] : reach) hits += r.count(term.id);
    if (hits == 0) {
      unseen.insert(term.id);
      continue;
    }
    double v = std::log(static_cast<double>(corpus.size()) / static_cast<double>(hits));
    ic[term.id] = v;
    max_seen = std::max(max_seen, v);
  }
  for (const auto& t : unseen) ic[t] = max_seen;
  return ic;
}

inline double base_ic(const std::map<TermId, double>& ic, const OntologyGraph& g, const TermSet& patient,
                      const TermSet& disease) {
  TermSet reach = ancestor_union(g, disease);
  double sum = 0.0;
  for (const auto& p : patient)
    if (reach.count(p)) sum += ic.at(p);
  return sum;
}

inline double resnik(const std::map<TermId, double>& ic, const OntologyGraph& g, const TermId& a, const TermId& b) {
  TermSet aa = ancestors(g, a);
  TermSet bb = ancestors(g, b);
  double best = 0.0;
  for (const auto& t : aa)
    if (bb.count(t)) best = std::max(best, ic.at(t));
  return best;
}

inline double directed(const std::map<TermId, double>& ic, const OntologyGraph& g, const TermSet& from,
                       const TermSet& to) {
  double sum = 0.0;
  for (const auto& a : from) {
    double best = 0.0;
    for (const auto& b : to) best = std::max(best, resnik(ic, g, a, b));
    sum += best;
  }
  return sum / static_cast<double>(from.size());
}

inline double bidirectional(const std::map<TermId, double>& ic, const OntologyGraph& g, const TermSet& a,
                            const TermSet& b) {
  return (directed(ic, g, a, b) + directed(ic, g, b, a)) / 2.0;
}

struct Scored {
  TermId disease;
  double score;
};

// Every annotated disease, ordered by score descending then id ascending.
inline std::vector<Scored> rank(const std::map<TermId, double>& ic, const OntologyGraph& g,
                                const DiseaseAnnotationSet& set, const TermSet& patient, bool bidirectional_method) {
  std::vector<Scored> out;
  for (const auto& [d, terms] : by_disease(set))
    out.push_back({d, bidirectional_method ? bidirectional(ic, g, patient, terms) : base_ic(ic, g, patient, terms)});
  std::sort(out.begin(), out.end(), [](const Scored& x, const Scored& y) {
    if (x.score != y.score) return x.score > y.score;
    return x.disease < y.disease;
  });
  return out;
}

struct Composite {
  double norm_mean_ic;
  double norm_cnt;
  double composite;
};

// (mean IC, phenotype count) per case; extrema over the same cohort.
inline std::vector<Composite> composite(const std::vector<std::pair<double, double>>& cohort) {
  double lo = cohort[0].first, hi = cohort[0].first, nlo = cohort[0].second, nhi = cohort[0].second;
  for (const auto& [m, n] : cohort) {
    lo = std::min(lo, m);
    hi = std::max(hi, m);
    nlo = std::min(nlo, n);
    nhi = std::max(nhi, n);
  }
  std::vector<Composite> out;
  for (const auto& [m, n] : cohort) {
    double a = (m - lo) / (hi - lo);
    double b = (n - nlo) / (nhi - nlo);
    out.push_back({a, b, (1.0 - a) * b});
  }
  return out;
}

// Linear interpolation between order statistics at h = (n - 1) p.
inline double quantile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  double h = (static_cast<double>(v.size()) - 1.0) * p;
  auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= v.size()) return v.back();
  return v[lo] + (h - static_cast<double>(lo)) * (v[lo + 1] - v[lo]);
}

} // namespace rarekg::oracle
