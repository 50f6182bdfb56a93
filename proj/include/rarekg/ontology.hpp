#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "rarekg/term_id.hpp"

namespace rarekg {

struct OntologyTerm {
  TermId id;
  std::string label;
  std::vector<std::string> synonyms;
  std::set<TermId> parents;
  bool obsolete = false;
  std::optional<TermId> replaced_by;

  friend bool operator==(const OntologyTerm&, const OntologyTerm&) = default;
};

enum class OntologyFormat { OboSubset, JsonSubset };

// An immutable is_a DAG. Construction verifies that every parent reference
// resolves and that the parent relation is acyclic, and precomputes the
// reflexive ancestor closure of every term.
class OntologyGraph {
public:
  using Index = std::uint32_t;

  OntologyGraph() = default;

  // Throws DANGLING_PARENT or CYCLE_DETECTED. Parents of obsolete terms are
  // dropped. Duplicate ids are rejected as MALFORMED_STANZA.
  static OntologyGraph from_terms(std::vector<OntologyTerm> terms);

  std::size_t size() const noexcept { return terms_.size(); }
  std::size_t edge_count() const noexcept { return edge_count_; }
  const std::vector<OntologyTerm>& terms() const noexcept { return terms_; }
  const std::set<TermId>& roots() const noexcept { return roots_; }
  std::size_t ignored_tag_count() const noexcept { return ignored_tags_; }

  bool contains(const TermId& id) const { return index_.count(id) != 0; }
  const OntologyTerm* find(const TermId& id) const;
  // Throws UNKNOWN_TERM.
  const OntologyTerm& term(const TermId& id) const;
  std::optional<Index> index_of(const TermId& id) const;
  Index require_index(const TermId& id) const;
  const OntologyTerm& at(Index i) const { return terms_[i]; }

  const std::vector<Index>& parent_indices(Index i) const { return parents_[i]; }
  const std::vector<Index>& child_indices(Index i) const { return children_[i]; }
  // Reflexive ancestor closure, sorted ascending by index (= canonical id order).
  const std::vector<Index>& closure(Index i) const { return closure_[i]; }

  std::set<TermId> ancestors(const TermId& id, bool reflexive) const;
  std::set<TermId> descendants(const TermId& id, bool reflexive) const;
  // Ancestors reachable in at most max_depth parent hops (non-reflexive).
  std::set<TermId> ancestors_within(const TermId& id, std::size_t max_depth) const;

  // Case-insensitive, whitespace-normalized exact lookup against labels, then
  // synonyms. Obsolete terms never match. Ties resolve to the lowest id.
  std::optional<TermId> lookup_label(std::string_view text) const;

  void set_ignored_tag_count(std::size_t n) { ignored_tags_ = n; }

private:
  std::vector<OntologyTerm> terms_;
  std::unordered_map<TermId, Index> index_;
  std::vector<std::vector<Index>> parents_;
  std::vector<std::vector<Index>> children_;
  std::vector<std::vector<Index>> closure_;
  std::unordered_map<std::string, Index> by_label_;
  std::unordered_map<std::string, Index> by_synonym_;
  std::set<TermId> roots_;
  std::size_t edge_count_ = 0;
  std::size_t ignored_tags_ = 0;
};

// Grammars for both formats are documented in docs/formats.md.
OntologyGraph parse_ontology(std::string_view source, OntologyFormat format);

std::set<TermId> ancestors(const OntologyGraph& graph, const TermId& t, bool reflexive);

// Returns nullopt for features that do not map; callers record those as
// non-HPO evidence. Throws INVALID_ARGUMENT for blank input.
std::optional<TermId> map_feature_to_hpo(const OntologyGraph& graph, std::string_view feature);

// Writes the graph back out in the OBO subset (canonical term order).
std::string write_obo(const OntologyGraph& graph);

} // namespace rarekg
