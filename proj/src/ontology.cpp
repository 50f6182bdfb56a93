#include "rarekg/ontology.hpp"

#include <algorithm>
#include <deque>
#include <sstream>

#include <json.hpp>

#include "rarekg/error.hpp"
#include "text.hpp"

namespace rarekg {

const OntologyTerm* OntologyGraph::find(const TermId& id) const {
  auto it = index_.find(id);
  return it == index_.end() ? nullptr : &terms_[it->second];
}

const OntologyTerm& OntologyGraph::term(const TermId& id) const {
  return terms_[require_index(id)];
}

std::optional<OntologyGraph::Index> OntologyGraph::index_of(const TermId& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

OntologyGraph::Index OntologyGraph::require_index(const TermId& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw Error(ErrorCode::UnknownTerm, id.str());
  return it->second;
}

OntologyGraph OntologyGraph::from_terms(std::vector<OntologyTerm> terms) {
  std::sort(terms.begin(), terms.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < terms.size(); ++i)
    if (terms[i].id == terms[i - 1].id)
      throw Error(ErrorCode::MalformedStanza, "duplicate term id " + terms[i].id.str());

  OntologyGraph g;
  g.terms_ = std::move(terms);
  const auto n = g.terms_.size();
  g.index_.reserve(n);
  for (Index i = 0; i < n; ++i) {
    auto& t = g.terms_[i];
    if (t.obsolete) t.parents.clear();
    g.index_.emplace(t.id, i);
  }

  g.parents_.assign(n, {});
  g.children_.assign(n, {});
  for (Index i = 0; i < n; ++i) {
    for (const auto& p : g.terms_[i].parents) {
      auto it = g.index_.find(p);
      if (it == g.index_.end())
        throw Error(ErrorCode::DanglingParent, g.terms_[i].id.str() + " is_a unknown term " + p.str());
      if (g.terms_[it->second].obsolete)
        throw Error(ErrorCode::DanglingParent, g.terms_[i].id.str() + " is_a obsolete term " + p.str());
      g.parents_[i].push_back(it->second);
      g.children_[it->second].push_back(i);
      ++g.edge_count_;
    }
    if (g.parents_[i].empty() && !g.terms_[i].obsolete) g.roots_.insert(g.terms_[i].id);
  }

  // Kahn's algorithm, parents before children.
  std::vector<std::size_t> pending(n);
  std::deque<Index> ready;
  for (Index i = 0; i < n; ++i) {
    pending[i] = g.parents_[i].size();
    if (pending[i] == 0) ready.push_back(i);
  }
  std::vector<Index> order;
  order.reserve(n);
  while (!ready.empty()) {
    Index i = ready.front();
    ready.pop_front();
    order.push_back(i);
    for (Index c : g.children_[i])
      if (--pending[c] == 0) ready.push_back(c);
  }
  if (order.size() != n) {
    // Walk parent links among the unresolved terms until one repeats; that
    // term lies on a cycle.
    Index cur = 0;
    while (pending[cur] == 0) ++cur;
    std::vector<bool> seen(n, false);
    while (!seen[cur]) {
      seen[cur] = true;
      for (Index p : g.parents_[cur]) {
        if (pending[p] != 0) {
          cur = p;
          break;
        }
      }
    }
    throw Error(ErrorCode::CycleDetected, "is_a cycle through " + g.terms_[cur].id.str());
  }

  g.closure_.assign(n, {});
  for (Index i : order) {
    auto& cl = g.closure_[i];
    cl.push_back(i);
    for (Index p : g.parents_[i]) cl.insert(cl.end(), g.closure_[p].begin(), g.closure_[p].end());
    std::sort(cl.begin(), cl.end());
    cl.erase(std::unique(cl.begin(), cl.end()), cl.end());
  }

  for (Index i = 0; i < n; ++i) {
    const auto& t = g.terms_[i];
    if (t.obsolete) continue;
    g.by_label_.emplace(detail::normalize_key(t.label), i);
    for (const auto& s : t.synonyms) g.by_synonym_.emplace(detail::normalize_key(s), i);
  }
  return g;
}

std::set<TermId> OntologyGraph::ancestors(const TermId& id, bool reflexive) const {
  Index i = require_index(id);
  std::set<TermId> out;
  for (Index a : closure_[i])
    if (reflexive || a != i) out.insert(terms_[a].id);
  return out;
}

std::set<TermId> OntologyGraph::descendants(const TermId& id, bool reflexive) const {
  Index start = require_index(id);
  std::vector<bool> seen(terms_.size(), false);
  std::vector<Index> stack{start};
  seen[start] = true;
  std::set<TermId> out;
  if (reflexive) out.insert(id);
  while (!stack.empty()) {
    Index i = stack.back();
    stack.pop_back();
    for (Index c : children_[i]) {
      if (seen[c]) continue;
      seen[c] = true;
      out.insert(terms_[c].id);
      stack.push_back(c);
    }
  }
  return out;
}

std::set<TermId> OntologyGraph::ancestors_within(const TermId& id, std::size_t max_depth) const {
  Index start = require_index(id);
  std::set<TermId> out;
  std::vector<bool> seen(terms_.size(), false);
  seen[start] = true;
  std::vector<Index> frontier{start};
  for (std::size_t depth = 0; depth < max_depth && !frontier.empty(); ++depth) {
    std::vector<Index> next;
    for (Index i : frontier)
      for (Index p : parents_[i]) {
        if (seen[p]) continue;
        seen[p] = true;
        out.insert(terms_[p].id);
        next.push_back(p);
      }
    frontier = std::move(next);
  }
  return out;
}

std::optional<TermId> OntologyGraph::lookup_label(std::string_view text) const {
  auto key = detail::normalize_key(text);
  if (auto it = by_label_.find(key); it != by_label_.end()) return terms_[it->second].id;
  if (auto it = by_synonym_.find(key); it != by_synonym_.end()) return terms_[it->second].id;
  return std::nullopt;
}

std::set<TermId> ancestors(const OntologyGraph& graph, const TermId& t, bool reflexive) {
  return graph.ancestors(t, reflexive);
}

std::optional<TermId> map_feature_to_hpo(const OntologyGraph& graph, std::string_view feature) {
  if (detail::trim(feature).empty()) throw Error(ErrorCode::InvalidArgument, "feature text is empty");
  return graph.lookup_label(feature);
}

namespace {

[[noreturn]] void malformed(std::size_t line, const std::string& what) {
  throw Error(ErrorCode::MalformedStanza, "line " + std::to_string(line) + ": " + what);
}

TermId parse_id_or_throw(std::string_view value, std::size_t line) {
  auto id = TermId::parse(detail::trim(value));
  if (!id) malformed(line, "unparseable term id '" + std::string(value) + "'");
  return *id;
}

std::string parse_quoted(std::string_view value, std::size_t line) {
  value = detail::trim(value);
  if (value.empty() || value.front() != '"') malformed(line, "synonym must start with a quoted string");
  std::string out;
  for (std::size_t i = 1; i < value.size(); ++i) {
    char c = value[i];
    if (c == '\\' && i + 1 < value.size()) {
      out.push_back(value[++i]);
    } else if (c == '"') {
      return out;
    } else {
      out.push_back(c);
    }
  }
  malformed(line, "unterminated synonym string");
}

struct StanzaBuilder {
  std::size_t start_line = 0;
  std::optional<TermId> id;
  OntologyTerm term;
};

OntologyGraph parse_obo(std::string_view source) {
  std::vector<OntologyTerm> terms;
  std::size_t ignored = 0;
  std::optional<StanzaBuilder> cur;
  bool in_other = false;

  auto flush = [&]() {
    if (!cur) return;
    if (!cur->id) malformed(cur->start_line, "[Term] stanza without id");
    if (detail::trim(cur->term.label).empty()) malformed(cur->start_line, "term " + cur->id->str() + " has no name");
    cur->term.id = *cur->id;
    terms.push_back(std::move(cur->term));
    cur.reset();
  };

  auto lines = detail::split_lines(source);
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    const std::size_t line_no = ln + 1;
    auto line = detail::trim(lines[ln]);
    if (line.empty() || line.front() == '!') continue;
    if (line.front() == '[') {
      flush();
      if (line == "[Term]") {
        cur.emplace();
        cur->start_line = line_no;
        in_other = false;
      } else {
        in_other = true;
      }
      continue;
    }
    if (!cur || in_other) continue;  // header or non-Term stanza

    auto colon = line.find(':');
    if (colon == std::string_view::npos) malformed(line_no, "expected 'key: value'");
    auto key = detail::trim(line.substr(0, colon));
    auto value = detail::trim(line.substr(colon + 1));

    if (key == "id") {
      if (cur->id) malformed(line_no, "duplicate id tag");
      cur->id = parse_id_or_throw(value, line_no);
    } else if (key == "name") {
      cur->term.label = std::string(value);
    } else if (key == "synonym") {
      cur->term.synonyms.push_back(parse_quoted(value, line_no));
    } else if (key == "is_a") {
      auto bang = value.find('!');
      if (bang != std::string_view::npos) value = value.substr(0, bang);
      auto brace = value.find('{');
      if (brace != std::string_view::npos) value = value.substr(0, brace);
      cur->term.parents.insert(parse_id_or_throw(value, line_no));
    } else if (key == "is_obsolete") {
      cur->term.obsolete = (value == "true");
    } else if (key == "replaced_by") {
      cur->term.replaced_by = parse_id_or_throw(value, line_no);
    } else {
      ++ignored;
    }
  }
  flush();

  auto g = OntologyGraph::from_terms(std::move(terms));
  g.set_ignored_tag_count(ignored);
  return g;
}

OntologyGraph parse_json(std::string_view source) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(source);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::MalformedStanza, std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_array()) throw Error(ErrorCode::MalformedStanza, "ontology JSON must be an array of terms");

  std::vector<OntologyTerm> terms;
  std::size_t ignored = 0;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& obj = doc[i];
    const std::size_t entry = i + 1;
    if (!obj.is_object()) malformed(entry, "term entry is not an object");
    try {
      OntologyTerm t;
      t.id = parse_id_or_throw(obj.at("id").get<std::string>(), entry);
      t.label = obj.value("lbl", std::string{});
      if (detail::trim(t.label).empty()) malformed(entry, "term " + t.id.str() + " has no lbl");
      for (const auto& s : obj.value("synonyms", nlohmann::json::array())) t.synonyms.push_back(s.get<std::string>());
      for (const auto& p : obj.value("parents", nlohmann::json::array()))
        t.parents.insert(parse_id_or_throw(p.get<std::string>(), entry));
      t.obsolete = obj.value("obsolete", false);
      if (obj.contains("replaced_by") && !obj["replaced_by"].is_null())
        t.replaced_by = parse_id_or_throw(obj["replaced_by"].get<std::string>(), entry);
      for (const auto& [k, _] : obj.items())
        if (k != "id" && k != "lbl" && k != "synonyms" && k != "parents" && k != "obsolete" && k != "replaced_by")
          ++ignored;
      terms.push_back(std::move(t));
    } catch (const nlohmann::json::exception& e) {
      malformed(entry, e.what());
    }
  }
  auto g = OntologyGraph::from_terms(std::move(terms));
  g.set_ignored_tag_count(ignored);
  return g;
}

} // namespace

OntologyGraph parse_ontology(std::string_view source, OntologyFormat format) {
  return format == OntologyFormat::OboSubset ? parse_obo(source) : parse_json(source);
}

std::string write_obo(const OntologyGraph& graph) {
  std::ostringstream out;
  out << "format-version: 1.2\n";
  for (const auto& t : graph.terms()) {
    out << "\n[Term]\nid: " << t.id.str() << "\nname: " << t.label << "\n";
    for (const auto& s : t.synonyms) {
      out << "synonym: \"";
      for (char c : s) {
        if (c == '"' || c == '\\') out << '\\';
        out << c;
      }
      out << "\" EXACT []\n";
    }
    for (const auto& p : t.parents) {
      const auto* pt = graph.find(p);
      out << "is_a: " << p.str();
      if (pt) out << " ! " << pt->label;
      out << "\n";
    }
    if (t.obsolete) out << "is_obsolete: true\n";
    if (t.replaced_by) out << "replaced_by: " << t.replaced_by->str() << "\n";
  }
  return out.str();
}

} // namespace rarekg
