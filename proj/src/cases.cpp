#include "rarekg/cases.hpp"

#include <algorithm>
#include <sstream>

#include <json.hpp>

#include "rarekg/error.hpp"
#include "text.hpp"

namespace rarekg {

using nlohmann::json;

std::string_view to_string(Section s) {
  switch (s) {
    case Section::ChiefComplaint: return "CHIEF_COMPLAINT";
    case Section::PresentIllness: return "PRESENT_ILLNESS";
    case Section::FamilyHistory: return "FAMILY_HISTORY";
    case Section::PhysicalExam: return "PHYSICAL_EXAM";
    case Section::SpecialtyAssessment: return "SPECIALTY_ASSESSMENT";
    case Section::AncillaryTests: return "ANCILLARY_TESTS";
  }
  return "?";
}

std::optional<Section> section_from_name(std::string_view name) {
  const auto upper = detail::to_upper(detail::trim(name));
  for (auto s : kSectionOrder)
    if (to_string(s) == upper) return s;
  return std::nullopt;
}

CaseRecord CaseRecord::empty(std::string case_id) {
  CaseRecord c;
  c.case_id = std::move(case_id);
  for (auto s : kSectionOrder) c.sections[s] = "";
  return c;
}

// ---------------------------------------------------------------------------
// Documents

namespace {

json case_json(const CaseRecord& c) {
  json sections = json::object();
  for (auto s : kSectionOrder) {
    auto it = c.sections.find(s);
    sections[std::string(to_string(s))] = it == c.sections.end() ? std::string{} : it->second;
  }
  json phen = json::array();
  for (const auto& p : c.phenotypes) phen.push_back(p.str());
  json vars = json::array();
  for (const auto& v : c.variants) vars.push_back(v.key.str());
  json meta{{"config_hash", c.meta.config_hash}};
  if (c.meta.seed) meta["seed"] = *c.meta.seed;
  return {{"case_id", c.case_id},
          {"sections", sections},
          {"phenotypes", phen},
          {"variants", vars},
          {"truth", c.truth ? json(c.truth->str()) : json(nullptr)},
          {"categories", c.categories},
          {"meta", meta}};
}

[[noreturn]] void bad_case(const std::string& msg) { throw Error(ErrorCode::MalformedLine, "case document: " + msg); }

TermId term_field(const std::string& text, bool disease) {
  auto id = TermId::parse(text);
  if (!id) bad_case("invalid term id '" + text + "'");
  if (disease != id->is_disease()) bad_case(std::string(disease ? "expected a disease id, got " : "expected an HP id, got ") + text);
  return *id;
}

CaseRecord case_from(const json& j) {
  if (!j.is_object()) bad_case("not an object");
  CaseRecord c = CaseRecord::empty(j.at("case_id").get<std::string>());
  if (c.case_id.empty()) bad_case("empty case_id");
  if (auto it = j.find("sections"); it != j.end()) {
    for (const auto& [k, v] : it->items()) {
      auto s = section_from_name(k);
      if (!s) bad_case("unknown section '" + k + "'");
      c.sections[*s] = v.get<std::string>();
    }
  }
  if (auto it = j.find("phenotypes"); it != j.end())
    for (const auto& p : *it) c.phenotypes.insert(term_field(p.get<std::string>(), false));
  if (auto it = j.find("variants"); it != j.end()) {
    for (const auto& v : *it) {
      VariantRecord r;
      std::string key = v.is_string() ? v.get<std::string>() : v.at("key").get<std::string>();
      auto parsed = VariantKey::parse(key);
      if (!parsed) bad_case("invalid variant key '" + key + "'");
      r.key = *parsed;
      if (v.is_object()) r.gene = v.value("gene", std::string{});
      c.variants.push_back(std::move(r));
    }
  }
  if (auto it = j.find("truth"); it != j.end() && !it->is_null()) c.truth = term_field(it->get<std::string>(), true);
  if (auto it = j.find("categories"); it != j.end()) c.categories = it->get<std::set<std::string>>();
  if (auto it = j.find("meta"); it != j.end()) {
    c.meta.config_hash = it->value("config_hash", std::string{});
    if (auto s = it->find("seed"); s != it->end() && !s->is_null()) c.meta.seed = s->get<std::uint64_t>();
  }
  return c;
}

} // namespace

std::string case_to_json(const CaseRecord& c, bool pretty) {
  return pretty ? case_json(c).dump(2) + "\n" : case_json(c).dump();
}

CaseRecord case_from_json(std::string_view text) {
  try {
    return case_from(json::parse(text));
  } catch (const json::exception& e) {
    bad_case(e.what());
  }
}

std::string write_cases_jsonl(const std::vector<CaseRecord>& cases) {
  std::string out;
  for (const auto& c : cases) out += case_to_json(c) + "\n";
  return out;
}

std::vector<CaseRecord> read_cases_jsonl(std::string_view text) {
  std::vector<CaseRecord> out;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  for (const auto& line : detail::split_lines(text)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    try {
      out.push_back(case_from_json(line));
    } catch (const Error& e) {
      throw Error(ErrorCode::MalformedLine, "line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!seen.insert(out.back().case_id).second)
      throw Error(ErrorCode::MalformedLine, "line " + std::to_string(line_no) + ": duplicate case_id " + out.back().case_id);
  }
  return out;
}

CaseRecord import_phenopacket(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedLine, std::string("phenopacket: ") + e.what());
  }
  try {
    CaseRecord c = CaseRecord::empty(j.value("id", std::string{}));
    if (c.case_id.empty()) c.case_id = j.at("subject").at("id").get<std::string>();
    for (const auto& f : j.value("phenotypicFeatures", json::array())) {
      if (f.value("excluded", false)) continue;
      const auto id = f.at("type").at("id").get<std::string>();
      auto t = TermId::parse_lenient(id);
      if (!t || t->ns() != Namespace::HP) throw Error(ErrorCode::MalformedLine, "phenopacket: bad phenotype id " + id);
      c.phenotypes.insert(*t);
    }
    for (const auto& interp : j.value("interpretations", json::array())) {
      const auto& diag = interp.value("diagnosis", json::object());
      for (const auto& gi : diag.value("genomicInterpretations", json::array())) {
        const auto& vd = gi.value("variantInterpretation", json::object()).value("variationDescriptor", json::object());
        auto vcf = vd.find("vcfRecord");
        if (vcf == vd.end()) continue;
        VariantRecord r;
        r.key.chrom = vcf->at("chrom").get<std::string>();
        const auto& pos = vcf->at("pos");
        r.key.pos = pos.is_string() ? std::stoull(pos.get<std::string>()) : pos.get<std::uint64_t>();
        r.key.ref = vcf->at("ref").get<std::string>();
        r.key.alt = vcf->at("alt").get<std::string>();
        if (auto gc = vd.find("geneContext"); gc != vd.end()) r.gene = gc->value("symbol", std::string{});
        c.variants.push_back(std::move(r));
      }
    }
    std::optional<std::string> truth;
    if (auto d = j.find("diseases"); d != j.end() && d->is_array() && !d->empty())
      truth = d->at(0).at("term").at("id").get<std::string>();
    if (truth) {
      auto t = TermId::parse_lenient(*truth);
      if (!t || !t->is_disease()) throw Error(ErrorCode::MalformedLine, "phenopacket: bad disease id " + *truth);
      c.truth = *t;
    }
    return c;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedLine, std::string("phenopacket: ") + e.what());
  } catch (const std::invalid_argument&) {
    throw Error(ErrorCode::MalformedLine, "phenopacket: bad vcf position");
  }
}

// ---------------------------------------------------------------------------
// Synthetic generation

std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t n) {
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "uniform_index over an empty range");
  // Rejects the 2^64 mod n lowest outputs so every residue is equally likely.
  const std::uint64_t threshold = (std::uint64_t{0} - n) % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x < threshold);
  return x % n;
}

namespace {

template <typename T>
std::vector<T> sample_without_replacement(std::vector<T> pool, std::size_t k, std::mt19937_64& rng) {
  for (std::size_t i = 0; i < k; ++i) {
    auto j = i + static_cast<std::size_t>(uniform_index(rng, pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

} // namespace

std::vector<TermId> distractor_pool(const OntologyGraph& ontology, const std::set<TermId>& annotations) {
  std::vector<char> blocked(ontology.size(), 0);
  for (const auto& t : annotations) {
    auto i = ontology.index_of(t);
    if (!i) continue;
    for (auto a : ontology.closure(*i)) blocked[a] = 1;
    std::vector<OntologyGraph::Index> stack{*i};
    while (!stack.empty()) {
      auto n = stack.back();
      stack.pop_back();
      if (blocked[n] == 2) continue;
      blocked[n] = 2;
      for (auto ch : ontology.child_indices(n)) stack.push_back(ch);
    }
  }

  static const TermId kAbnormality = TermId::from("HP:0000118");
  auto root = ontology.index_of(kAbnormality);
  std::vector<TermId> pool;
  for (OntologyGraph::Index i = 0; i < ontology.size(); ++i) {
    const auto& t = ontology.at(i);
    if (blocked[i] || t.obsolete || t.id.ns() != Namespace::HP) continue;
    if (root) {
      const auto& cl = ontology.closure(i);
      if (i == *root || !std::binary_search(cl.begin(), cl.end(), *root)) continue;
    }
    pool.push_back(t.id);
  }
  return pool;
}

CaseRecord generate_synthetic_case(const OntologyGraph& ontology, const DiseaseAnnotationSet& annotations,
                                   const TermIC& ic, const SyntheticCaseSpec& spec) {
  if (spec.n_signal < 1) throw Error(ErrorCode::InvalidArgument, "n_signal must be positive");
  if (!spec.disease.is_disease()) throw Error(ErrorCode::InvalidArgument, spec.disease.str() + " is not a disease id");
  if (spec.distractor_min > spec.distractor_max)
    throw Error(ErrorCode::InvalidArgument, "distractor range is empty");

  const auto& direct = annotations.phenotypes_of(spec.disease);
  std::vector<TermId> signal_pool;
  for (const auto& t : direct)
    if (ontology.contains(t) && ic.contains(t)) signal_pool.push_back(t);
  if (signal_pool.size() < spec.n_signal)
    throw Error(ErrorCode::InsufficientAnnotations, spec.disease.str() + " has " + std::to_string(signal_pool.size()) +
                                                        " usable annotations, " + std::to_string(spec.n_signal) +
                                                        " requested");

  std::mt19937_64 rng(spec.rng_seed);
  std::size_t n_noise = spec.n_distractors
                            ? *spec.n_distractors
                            : spec.distractor_min + static_cast<std::size_t>(uniform_index(
                                                        rng, spec.distractor_max - spec.distractor_min + 1));

  auto pool = n_noise > 0 ? distractor_pool(ontology, direct) : std::vector<TermId>{};
  if (pool.size() < n_noise)
    throw Error(ErrorCode::InsufficientDistractorPool, std::to_string(pool.size()) + " eligible distractor terms, " +
                                                           std::to_string(n_noise) + " requested");

  auto signal = sample_without_replacement(std::move(signal_pool), spec.n_signal, rng);
  auto noise = sample_without_replacement(std::move(pool), n_noise, rng);

  CaseRecord c = CaseRecord::empty(spec.case_id.empty()
                                       ? "SYN-" + spec.disease.str() + "-" + std::to_string(spec.rng_seed)
                                       : spec.case_id);
  c.phenotypes.insert(signal.begin(), signal.end());
  c.phenotypes.insert(noise.begin(), noise.end());
  c.truth = spec.disease;
  c.meta.seed = spec.rng_seed;
  return c;
}

// ---------------------------------------------------------------------------
// Slicing

CaseRecord slice_incremental(const CaseRecord& c, int step) {
  if (step < 1 || step > static_cast<int>(kSectionOrder.size()))
    throw Error(ErrorCode::StepOutOfRange, "step " + std::to_string(step) + " is outside 1..6");
  CaseRecord out = c;
  for (std::size_t i = static_cast<std::size_t>(step); i < kSectionOrder.size(); ++i) out.sections[kSectionOrder[i]] = "";
  for (auto s : kSectionOrder) out.sections.try_emplace(s, "");
  return out;
}

CaseRecord slice_ablation(const CaseRecord& c, Section field) {
  CaseRecord out = c;
  for (auto s : kSectionOrder) out.sections.try_emplace(s, "");
  out.sections[field] = "";
  return out;
}

CaseRecord slice_ablation(const CaseRecord& c, std::string_view field) {
  auto s = section_from_name(field);
  if (!s) throw Error(ErrorCode::UnknownField, "'" + std::string(field) + "' is not a case section");
  return slice_ablation(c, *s);
}

std::string render_case_text(const CaseRecord& c, const OntologyGraph* ontology) {
  static const std::map<Section, const char*> headings = {
      {Section::ChiefComplaint, "Chief complaint"},   {Section::PresentIllness, "Present illness"},
      {Section::FamilyHistory, "Family history"},     {Section::PhysicalExam, "Physical examination"},
      {Section::SpecialtyAssessment, "Specialty assessment"}, {Section::AncillaryTests, "Ancillary tests"}};
  std::ostringstream out;
  for (auto s : kSectionOrder) {
    auto it = c.sections.find(s);
    if (it == c.sections.end() || detail::trim(it->second).empty()) continue;
    out << headings.at(s) << ": " << it->second << "\n";
  }
  if (!c.phenotypes.empty()) {
    out << "Phenotypes:";
    for (const auto& p : c.phenotypes) {
      const OntologyTerm* t = ontology ? ontology->find(p) : nullptr;
      out << "\n- " << (t && !t->label.empty() ? t->label + " (" + p.str() + ")" : p.str());
    }
    out << "\n";
  }
  if (!c.variants.empty()) {
    out << "Variants:";
    for (const auto& v : c.variants) out << "\n- " << (v.gene.empty() ? "" : v.gene + " ") << v.key.str();
    out << "\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Reasoning-chain pairs

PromptTemplate PromptTemplate::standard() {
  return {
      "You are assisting with the diagnosis of a patient who may have a rare disease.\n"
      "\n<<<CASE\n{{case}}\nCASE>>>\n"
      "\n<<<GUIDELINE\n{{guideline}}\nGUIDELINE>>>\n"
      "\nReason step by step over the findings, then state the single most likely diagnosis.\n",
      "<<<REASONING\n{{reasoning}}\nREASONING>>>\n"
      "Final diagnosis: {{diagnosis_id}} | {{diagnosis_label}}\n",
  };
}

namespace {

struct Piece {
  bool placeholder;
  std::string text;
};

std::vector<Piece> tokenize(std::string_view tmpl) {
  std::vector<Piece> out;
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    auto open = tmpl.find("{{", pos);
    if (open == std::string_view::npos) {
      out.push_back({false, std::string(tmpl.substr(pos))});
      break;
    }
    auto close = tmpl.find("}}", open);
    if (close == std::string_view::npos) throw Error(ErrorCode::InvalidArgument, "unterminated template placeholder");
    if (open > pos) out.push_back({false, std::string(tmpl.substr(pos, open - pos))});
    out.push_back({true, std::string(tmpl.substr(open + 2, close - open - 2))});
    pos = close + 2;
  }
  for (std::size_t i = 1; i < out.size(); ++i)
    if (out[i].placeholder && out[i - 1].placeholder)
      throw Error(ErrorCode::InvalidArgument, "template placeholders must be separated by literal text");
  return out;
}

std::string fill(std::string_view tmpl, const std::map<std::string, std::string>& values) {
  std::string out;
  for (const auto& p : tokenize(tmpl)) {
    if (!p.placeholder) {
      out += p.text;
      continue;
    }
    auto it = values.find(p.text);
    if (it == values.end()) throw Error(ErrorCode::InvalidArgument, "template uses unknown placeholder {{" + p.text + "}}");
    out += it->second;
  }
  return out;
}

std::map<std::string, std::string> unfill(std::string_view tmpl, std::string_view text) {
  auto pieces = tokenize(tmpl);
  std::map<std::string, std::string> out;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    const auto& p = pieces[i];
    if (!p.placeholder) {
      if (text.substr(pos, p.text.size()) != p.text) throw Error(ErrorCode::MalformedLine, "text does not match template");
      pos += p.text.size();
      continue;
    }
    std::size_t end;
    if (i + 1 == pieces.size()) {
      end = text.size();
    } else if (i + 2 == pieces.size()) {
      const auto& tail = pieces[i + 1].text;
      if (text.size() < pos + tail.size() || text.substr(text.size() - tail.size()) != tail)
        throw Error(ErrorCode::MalformedLine, "text does not match template");
      end = text.size() - tail.size();
    } else {
      end = text.find(pieces[i + 1].text, pos);
      if (end == std::string_view::npos) throw Error(ErrorCode::MalformedLine, "text does not match template");
    }
    out[p.text] = std::string(text.substr(pos, end - pos));
    pos = end;
  }
  if (pos != text.size()) throw Error(ErrorCode::MalformedLine, "trailing text after template");
  return out;
}

} // namespace

PromptFields parse_cot_prompt(std::string_view p, const PromptTemplate& tmpl) {
  auto v = unfill(tmpl.prompt, p);
  PromptFields f{v["case"], v["guideline"]};
  if (f.g == kNoGuidelineMarker) f.g.clear();
  return f;
}

CompletionFields parse_cot_completion(std::string_view c, const PromptTemplate& tmpl) {
  auto v = unfill(tmpl.completion, c);
  CompletionFields f{v["reasoning"], v["diagnosis_label"], TermId::parse(v["diagnosis_id"])};
  return f;
}

CoTExample build_cot_pair(std::string_view x, const TermId& y, std::string_view y_label, std::string_view r,
                          std::string_view g, const NormalizationTable& table, const PromptTemplate& tmpl) {
  if (detail::trim(x).empty()) throw Error(ErrorCode::EmptyCase, "case text is empty");
  if (!table.contains_id(y)) throw Error(ErrorCode::UnresolvableDiagnosis, y.str() + " is not in the normalization table");

  CoTExample ex;
  ex.x = std::string(x);
  ex.y = y;
  ex.y_label = y_label.empty() ? table.label_of(y).value_or(y.str()) : std::string(y_label);
  ex.r = std::string(r);
  ex.g = g == kNoGuidelineMarker ? std::string{} : std::string(g);
  ex.p = fill(tmpl.prompt, {{"case", ex.x}, {"guideline", ex.g.empty() ? std::string(kNoGuidelineMarker) : ex.g}});
  ex.c = fill(tmpl.completion, {{"reasoning", ex.r}, {"diagnosis_label", ex.y_label}, {"diagnosis_id", y.str()}});

  auto pf = parse_cot_prompt(ex.p, tmpl);
  auto cf = parse_cot_completion(ex.c, tmpl);
  if (pf.x != ex.x || pf.g != ex.g || cf.r != ex.r || cf.y_label != ex.y_label || cf.y != y)
    throw Error(ErrorCode::InvalidArgument, "a field contains template delimiter text; extraction would be ambiguous");
  return ex;
}

} // namespace rarekg
