#include "rarekg/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <regex>
#include <sstream>

#include <json.hpp>

#include "rarekg/cases.hpp"
#include "rarekg/error.hpp"
#include "text.hpp"

namespace rarekg {

using nlohmann::json;

// ---------------------------------------------------------------------------
// List parsing

namespace {

// Returns the text after a "12." / "12)" marker, or nullopt.
std::optional<std::string_view> numbered_item(std::string_view line) {
  std::size_t i = 0;
  if (line.substr(0, 2) == "**") i = 2;
  std::size_t digits = 0;
  while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i])) && digits < 4) {
    ++i;
    ++digits;
  }
  if (digits == 0 || digits > 3 || i >= line.size()) return std::nullopt;
  if (line[i] != '.' && line[i] != ')') return std::nullopt;
  ++i;
  if (line.substr(i, 2) == "**") i += 2;
  if (i >= line.size() || !std::isspace(static_cast<unsigned char>(line[i]))) return std::nullopt;
  return detail::trim(line.substr(i));
}

std::optional<std::string_view> bullet_item(std::string_view line) {
  for (std::string_view marker : {"- ", "* ", "+ ", "\xE2\x80\xA2 "}) {
    if (line.substr(0, marker.size()) == marker) return detail::trim(line.substr(marker.size()));
  }
  return std::nullopt;
}

std::size_t word_count(std::string_view s) {
  std::size_t n = 0;
  bool in_word = false;
  for (char c : s) {
    bool ws = std::isspace(static_cast<unsigned char>(c));
    if (!ws && !in_word) ++n;
    in_word = !ws;
  }
  return n;
}

std::string clean_label(std::string_view raw) {
  static const std::regex trailing_group(R"(\s*[\(\[][^\(\)\[\]]*[\)\]]\s*$)");
  static const std::regex trailing_code(R"((?:\s*(?:-|–|—|,|:|;)\s*|\s+)(?:ORPHA|Orphanet|OMIM|MIM)\s*[:_#]?\s*\d+\s*$)",
                                        std::regex::icase);
  static const std::regex trailing_percent(
      R"((?:\s*(?:-|–|—|,|:|;)\s*|\s+)(?:(?:confidence|probability|likelihood|certainty)\s*[:=]?\s*)?\d{1,3}(?:\.\d+)?\s*%\s*$)",
      std::regex::icase);
  static const std::regex trailing_level(
      R"((?:\s*(?:-|–|—|,|:|;)\s*(?:(?:confidence|probability|likelihood|certainty)\s*[:=]?\s*)?|\s+(?:confidence|probability|likelihood|certainty)\s*[:=]?\s*)(?:high|moderate|medium|low|0?\.\d+|1\.0)\s*$)",
      std::regex::icase);

  static const std::regex trailing_level_words(
      R"((?:\s*(?:-|–|—|,|:|;)\s*|\s+)(?:high|moderate|medium|low)\s+(?:confidence|probability|likelihood|certainty)\s*$)",
      std::regex::icase);

  std::string s(detail::trim(raw));
  // Markdown emphasis never belongs to a disease name.
  s.erase(std::remove(s.begin(), s.end(), '*'), s.end());
  s = std::string(detail::trim(s));
  // Leftmost separator first.
  std::vector<std::pair<std::size_t, std::string_view>> seps;
  for (std::string_view sep : {": ", " - ", " \xE2\x80\x93 ", " \xE2\x80\x94 "})
    if (auto pos = s.find(sep); pos != std::string::npos && pos > 0) seps.emplace_back(pos, sep);
  std::sort(seps.begin(), seps.end());
  for (const auto& [pos, sep] : seps) {
    if (pos < s.size()) {
      auto tail = std::string_view(s).substr(pos + sep.size());
      // Keep short qualifiers such as "Cryoglobulinemia - type II".
      if (word_count(tail) > 3 || std::regex_search(std::string(sep) + std::string(tail), trailing_percent) ||
          std::regex_search(std::string(sep) + std::string(tail), trailing_level) ||
          std::regex_search(std::string(sep) + std::string(tail), trailing_level_words) ||
          std::regex_search(std::string(sep) + std::string(tail), trailing_code))
        s.erase(pos);
    }
  }
  std::string prev;
  while (prev != s) {
    prev = s;
    s = std::regex_replace(s, trailing_group, "");
    s = std::regex_replace(s, trailing_code, "");
    s = std::regex_replace(s, trailing_percent, "");
    s = std::regex_replace(s, trailing_level, "");
    s = std::regex_replace(s, trailing_level_words, "");
    while (!s.empty() && std::string_view(".,;:").find(s.back()) != std::string_view::npos) s.pop_back();
    s = std::string(detail::trim(s));
  }
  return s;
}

} // namespace

std::vector<ListEntry> parse_prediction_list(std::string_view text) {
  std::vector<std::string> lines;
  for (auto& l : detail::split_lines(text)) {
    auto t = detail::trim(l);
    if (!t.empty()) lines.emplace_back(t);
  }

  std::vector<std::string> items;
  for (const auto& l : lines)
    if (auto item = numbered_item(l)) items.emplace_back(*item);
  if (items.empty())
    for (const auto& l : lines)
      if (auto item = bullet_item(l)) items.emplace_back(*item);
  if (items.empty()) {
    std::vector<std::string> body = lines;
    while (!body.empty() && body.front().back() == ':') body.erase(body.begin());
    bool short_lines = body.size() >= 2 && std::all_of(body.begin(), body.end(), [](const std::string& l) {
                         char last = l.back();
                         return l.size() <= 100 && word_count(l) <= 10 && last != '.' && last != '!' && last != '?';
                       });
    if (short_lines) items = body;
  }

  std::vector<ListEntry> out;
  for (const auto& item : items) {
    auto label = clean_label(item);
    if (label.empty()) continue;
    out.push_back({static_cast<int>(out.size() + 1), std::move(label)});
    if (out.size() == kMaxPredictions) break;
  }
  if (out.empty()) throw Error(ErrorCode::NoListFound, "no diagnosis list in model output");
  return out;
}

// ---------------------------------------------------------------------------
// Normalization

std::string_view to_string(ExclusionReason r) { return r == ExclusionReason::Unmapped ? "UNMAPPED" : "DUPLICATE"; }

PredictionSet normalize_predictions(const std::vector<ListEntry>& labels, NormalizationTable& table,
                                    LabelResolver* remote) {
  if (labels.empty()) throw Error(ErrorCode::EmptyInput, "no labels to normalize");
  std::vector<ListEntry> ordered = labels;
  std::stable_sort(ordered.begin(), ordered.end(), [](const ListEntry& a, const ListEntry& b) { return a.rank < b.rank; });
  if (ordered.size() > kMaxPredictions) ordered.resize(kMaxPredictions);

  PredictionSet out;
  out.raw_count = ordered.size();
  std::set<TermId> seen;
  for (const auto& e : ordered) {
    Prediction p;
    p.rank = e.rank;
    p.raw_label = e.label;
    if (!detail::trim(e.label).empty()) {
      if (auto id = table.lookup(e.label)) {
        p.normalized = id;
        p.source = "local";
      } else if (remote && !out.remote_unavailable) {
        try {
          if (auto rid = remote->resolve(e.label)) {
            table.insert(e.label, *rid, "remote");
            p.normalized = rid;
            p.source = "remote";
          }
        } catch (const Error& err) {
          if (err.code() == ErrorCode::RemoteUnavailable) {
            out.remote_unavailable = true;
            out.remote_error = err.what();
          } else if (err.code() != ErrorCode::MalformedResponse) {
            throw;
          }
        }
      }
    }
    if (!p.normalized) {
      p.excluded = ExclusionReason::Unmapped;
      out.excluded.push_back(std::move(p));
    } else if (!seen.insert(*p.normalized).second) {
      p.excluded = ExclusionReason::Duplicate;
      out.duplicates.push_back(std::move(p));
    } else {
      out.predictions.push_back(std::move(p));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Matching

void EvalConfig::validate() const {
  if (k_cutoffs.empty()) throw Error(ErrorCode::InvalidArgument, "no k cutoffs");
  for (std::size_t i = 0; i < k_cutoffs.size(); ++i) {
    if (k_cutoffs[i] < 1 || k_cutoffs[i] > static_cast<int>(kMaxPredictions))
      throw Error(ErrorCode::InvalidArgument, "k cutoffs must lie in 1..20");
    if (i > 0 && k_cutoffs[i] <= k_cutoffs[i - 1])
      throw Error(ErrorCode::InvalidArgument, "k cutoffs must be strictly ascending");
  }
  if (max_ancestor_depth && *max_ancestor_depth < 1)
    throw Error(ErrorCode::InvalidArgument, "max_ancestor_depth must be positive");
  if (bootstrap_resamples < 1) throw Error(ErrorCode::InvalidArgument, "bootstrap_resamples must be at least 1");
  if (!(ci_level > 0.0 && ci_level < 1.0)) throw Error(ErrorCode::InvalidArgument, "ci_level must lie in (0,1)");
}

bool match_diagnosis(const TermId& pred, const TermId& truth, const OntologyGraph& disease_ontology,
                     const EvalConfig& cfg) {
  if (!pred.is_disease() || !truth.is_disease())
    throw Error(ErrorCode::InvalidArgument, "matching needs disease ids");
  if (pred == truth) return true;
  if (!cfg.hierarchical) return false;
  if (!disease_ontology.contains(truth)) throw Error(ErrorCode::UnknownDisease, truth.str() + " is not in the disease hierarchy");
  auto ancestors = cfg.max_ancestor_depth ? disease_ontology.ancestors_within(truth, *cfg.max_ancestor_depth)
                                          : disease_ontology.ancestors(truth, false);
  return ancestors.count(pred) != 0;
}

// ---------------------------------------------------------------------------
// Bootstrap

double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw Error(ErrorCode::EmptyInput, "quantile of an empty sample");
  if (p <= 0.0) return sorted.front();
  if (p >= 1.0) return sorted.back();
  const double h = static_cast<double>(sorted.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

std::vector<BootstrapResult> bootstrap_ci_shared(const std::vector<std::vector<double>>& columns,
                                                 std::size_t resamples, double level, std::uint64_t seed) {
  if (columns.empty() || columns.front().empty()) throw Error(ErrorCode::EmptyInput, "bootstrap of an empty sample");
  if (resamples < 1) throw Error(ErrorCode::InvalidArgument, "resamples must be at least 1");
  if (!(level > 0.0 && level < 1.0)) throw Error(ErrorCode::InvalidArgument, "level must lie in (0,1)");
  const std::size_t n = columns.front().size();
  for (const auto& c : columns)
    if (c.size() != n) throw Error(ErrorCode::InvalidArgument, "bootstrap columns differ in length");

  std::vector<std::vector<double>> means(columns.size(), std::vector<double>(resamples));
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> idx(n);
  for (std::size_t r = 0; r < resamples; ++r) {
    for (auto& i : idx) i = static_cast<std::size_t>(uniform_index(rng, n));
    for (std::size_t c = 0; c < columns.size(); ++c) {
      double s = 0.0;
      for (auto i : idx) s += columns[c][i];
      means[c][r] = s / static_cast<double>(n);
    }
  }

  std::vector<BootstrapResult> out;
  const double alpha = 1.0 - level;
  for (std::size_t c = 0; c < columns.size(); ++c) {
    const auto& v = columns[c];
    BootstrapResult b;
    b.resamples = resamples;
    if (std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); })) {
      b.mean = b.lower = b.upper = v.front();
      out.push_back(b);
      continue;
    }
    b.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(n);
    auto& m = means[c];
    if (resamples > 1) {
      double mm = std::accumulate(m.begin(), m.end(), 0.0) / static_cast<double>(resamples);
      double ss = 0.0;
      for (double x : m) ss += (x - mm) * (x - mm);
      b.std_error = std::sqrt(ss / static_cast<double>(resamples - 1));
    }
    std::sort(m.begin(), m.end());
    b.lower = quantile_sorted(m, alpha / 2.0);
    b.upper = quantile_sorted(m, 1.0 - alpha / 2.0);
    b.half_width = (b.upper - b.lower) / 2.0;
    out.push_back(b);
  }
  return out;
}

BootstrapResult bootstrap_ci(const std::vector<double>& values, std::size_t resamples, double level,
                             std::uint64_t seed) {
  return bootstrap_ci_shared({values}, resamples, level, seed).front();
}

// ---------------------------------------------------------------------------
// Top-K accuracy

namespace {

std::optional<TermId> to_orpha(const TermId& id, const XrefTable* xrefs) {
  if (id.ns() == Namespace::ORPHA) return id;
  if (id.ns() == Namespace::OMIM && xrefs) return xrefs->to_orpha(id);
  return std::nullopt;
}

std::vector<CutoffResult> tally(const std::vector<const CaseOutcome*>& cases, const EvalConfig& cfg) {
  std::vector<std::vector<double>> cols(cfg.k_cutoffs.size(), std::vector<double>(cases.size(), 0.0));
  std::vector<CutoffResult> out(cfg.k_cutoffs.size());
  for (std::size_t j = 0; j < cfg.k_cutoffs.size(); ++j) {
    out[j].k = cfg.k_cutoffs[j];
    for (std::size_t i = 0; i < cases.size(); ++i) {
      const auto& r = cases[i]->first_hit_rank;
      if (r && *r <= cfg.k_cutoffs[j]) {
        cols[j][i] = 1.0;
        ++out[j].hits;
      }
    }
    out[j].accuracy = static_cast<double>(out[j].hits) / static_cast<double>(cases.size());
  }
  auto cis = bootstrap_ci_shared(cols, cfg.bootstrap_resamples, cfg.ci_level, cfg.rng_seed);
  for (std::size_t j = 0; j < out.size(); ++j) out[j].ci = cis[j];
  return out;
}

} // namespace

EvalReport topk_accuracy(const std::vector<EvalCase>& cases, const OntologyGraph* disease_ontology,
                         const XrefTable* xrefs, const EvalConfig& cfg) {
  cfg.validate();
  if (cases.empty()) throw Error(ErrorCode::EmptyCaseSet, "no cases to evaluate");

  EvalReport rep;
  rep.config = cfg;
  rep.n_cases = cases.size();
  std::vector<const CaseOutcome*> evaluated;
  std::map<std::string, std::vector<const CaseOutcome*>> by_stratum, by_category;
  rep.outcomes.reserve(cases.size());

  for (const auto& c : cases) {
    const auto& ps = c.predictions;
    if (!c.truth) throw Error(ErrorCode::MissingTruth, "case " + ps.case_id + " has no truth diagnosis");
    rep.excluded_predictions += ps.excluded.size();
    rep.duplicate_predictions += ps.duplicates.size();
    if (ps.remote_unavailable) ++rep.remote_unavailable_cases;

    CaseOutcome o;
    o.case_id = ps.case_id;
    if (c.unparseable) {
      o.unevaluable = "UNPARSEABLE_OUTPUT";
    } else if (auto t = to_orpha(*c.truth, xrefs)) {
      o.truth = t;
    } else {
      o.unevaluable = "NO_ORPHA_XREF";
    }
    if (o.unevaluable) {
      ++rep.n_unevaluable;
      rep.outcomes.push_back(std::move(o));
      continue;
    }

    EvalConfig local = cfg;
    if (!disease_ontology || !disease_ontology->contains(*o.truth)) {
      o.exact_only = true;
      local.hierarchical = false;
    }
    static const OntologyGraph kEmpty;
    const OntologyGraph& dag = disease_ontology ? *disease_ontology : kEmpty;
    for (const auto& p : ps.predictions) {
      auto id = p.normalized ? to_orpha(*p.normalized, xrefs) : std::nullopt;
      if (!id) continue;
      if (match_diagnosis(*id, *o.truth, dag, local)) {
        o.first_hit_rank = p.rank;
        break;
      }
    }
    rep.outcomes.push_back(std::move(o));
  }

  for (std::size_t i = 0; i < cases.size(); ++i) {
    const auto& o = rep.outcomes[i];
    if (o.unevaluable) continue;
    evaluated.push_back(&o);
    if (cases[i].stratum) by_stratum[*cases[i].stratum].push_back(&o);
    for (const auto& cat : cases[i].categories) by_category[cat].push_back(&o);
  }
  rep.n_evaluated = evaluated.size();
  if (evaluated.empty()) throw Error(ErrorCode::EmptyCaseSet, "every case is unevaluable");

  rep.overall = tally(evaluated, cfg);
  for (const auto& [name, list] : by_stratum) rep.strata[name] = {list.size(), tally(list, cfg)};
  for (const auto& [name, list] : by_category) rep.categories[name] = {list.size(), tally(list, cfg)};
  return rep;
}

// ---------------------------------------------------------------------------
// Reports

namespace {

json cutoffs_json(const std::vector<CutoffResult>& rows) {
  json arr = json::array();
  for (const auto& r : rows)
    arr.push_back({{"k", r.k},
                   {"hits", r.hits},
                   {"accuracy", r.accuracy},
                   {"ci", {{"mean", r.ci.mean}, {"lower", r.ci.lower}, {"upper", r.ci.upper}}},
                   {"std_error", r.ci.std_error},
                   {"ci_half_width", r.ci.half_width}});
  return arr;
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

void csv_rows(std::ostringstream& out, const std::string& scope, const std::string& name, std::size_t n,
              const std::vector<CutoffResult>& rows) {
  for (const auto& r : rows)
    out << scope << "," << name << "," << r.k << "," << n << "," << r.hits << "," << num(r.accuracy) << ","
        << num(r.ci.lower) << "," << num(r.ci.upper) << "," << num(r.ci.std_error) << "," << num(r.ci.half_width)
        << "\n";
}

} // namespace

std::string eval_report_json(const EvalReport& rep, std::string_view config_hash) {
  const auto& c = rep.config;
  json doc;
  doc["schema"] = "rarekg.eval/1";
  doc["config_hash"] = std::string(config_hash);
  doc["config"] = {{"k_cutoffs", c.k_cutoffs},
                   {"hierarchical", c.hierarchical},
                   {"max_ancestor_depth", c.max_ancestor_depth ? json(*c.max_ancestor_depth) : json("unlimited")},
                   {"bootstrap_resamples", c.bootstrap_resamples},
                   {"ci_level", c.ci_level},
                   {"seed", c.rng_seed}};
  doc["n_cases"] = rep.n_cases;
  doc["n_evaluated"] = rep.n_evaluated;
  doc["n_unevaluable"] = rep.n_unevaluable;
  doc["excluded_predictions"] = rep.excluded_predictions;
  doc["duplicate_predictions"] = rep.duplicate_predictions;
  doc["remote_unavailable_cases"] = rep.remote_unavailable_cases;
  doc["overall"] = cutoffs_json(rep.overall);
  doc["strata"] = json::object();
  for (const auto& [k, v] : rep.strata) doc["strata"][k] = {{"n", v.n}, {"cutoffs", cutoffs_json(v.cutoffs)}};
  doc["categories"] = json::object();
  for (const auto& [k, v] : rep.categories) doc["categories"][k] = {{"n", v.n}, {"cutoffs", cutoffs_json(v.cutoffs)}};
  doc["cases"] = json::array();
  for (const auto& o : rep.outcomes) {
    json j{{"case_id", o.case_id}};
    j["truth"] = o.truth ? json(o.truth->str()) : json(nullptr);
    j["first_hit_rank"] = o.first_hit_rank ? json(*o.first_hit_rank) : json(nullptr);
    if (o.exact_only) j["exact_only"] = true;
    if (o.unevaluable) j["unevaluable"] = *o.unevaluable;
    doc["cases"].push_back(std::move(j));
  }
  return doc.dump(2) + "\n";
}

std::string eval_report_csv(const EvalReport& rep, std::string_view config_hash) {
  std::ostringstream out;
  out << "# config_hash=" << config_hash << " seed=" << rep.config.rng_seed << "\n";
  out << "scope,name,k,n,hits,accuracy,ci_lower,ci_upper,std_error,half_width\n";
  csv_rows(out, "overall", "all", rep.n_evaluated, rep.overall);
  for (const auto& [k, v] : rep.strata) csv_rows(out, "stratum", k, v.n, v.cutoffs);
  for (const auto& [k, v] : rep.categories) csv_rows(out, "category", k, v.n, v.cutoffs);
  return out.str();
}

std::vector<PredictionRecord> read_prediction_records(std::string_view jsonl) {
  std::vector<PredictionRecord> out;
  std::size_t line_no = 0;
  for (const auto& line : detail::split_lines(jsonl)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    try {
      auto j = json::parse(line);
      PredictionRecord r;
      r.case_id = j.at("case_id").get<std::string>();
      r.model_tag = j.value("model_tag", std::string{});
      if (auto it = j.find("raw_output_text"); it != j.end()) r.raw_output_text = it->get<std::string>();
      if (auto it = j.find("predictions"); it != j.end()) r.labels = it->get<std::vector<std::string>>();
      if (!r.raw_output_text && !r.labels) throw Error(ErrorCode::MalformedLine, "needs raw_output_text or predictions");
      out.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::MalformedLine, "line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(ErrorCode::MalformedLine, "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

} // namespace rarekg
