#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "rarekg/ingest.hpp"
#include "rarekg/ontology.hpp"

namespace rarekg {

// Per-term information content in nats, over a propagated disease-annotation
// corpus. Every term of the ontology has a finite value.
class TermIC {
public:
  TermIC() = default;
  TermIC(std::map<TermId, double> values, std::size_t corpus_size);

  // Throws UNKNOWN_TERM.
  double at(const TermId& t) const;
  std::optional<double> find(const TermId& t) const;
  bool contains(const TermId& t) const { return values_.count(t) != 0; }
  const std::map<TermId, double>& values() const noexcept { return values_; }
  std::size_t corpus_size() const noexcept { return corpus_size_; }
  double max_observed() const noexcept { return max_observed_; }

private:
  std::map<TermId, double> values_;
  std::size_t corpus_size_ = 0;
  double max_observed_ = 0.0;
};

struct IcOptions {
  // When set, only annotation rows from these provenances count toward the
  // corpus. Unset means every row in the set.
  std::optional<std::set<std::string>> provenances;
};

// IC(t) = ln(|D| / |D_t|) where D_t is the set of diseases annotated with t
// or a descendant of t. Terms no disease reaches get the largest observed IC.
// Throws EMPTY_CORPUS or UNKNOWN_TERM.
TermIC compute_ic(const OntologyGraph& graph, const DiseaseAnnotationSet& annotations, const IcOptions& options = {});

// Throws EMPTY_TERM_SET, or UNKNOWN_TERM for a term without an IC value.
double mean_ic(const TermIC& ic, const std::set<TermId>& terms);

} // namespace rarekg
