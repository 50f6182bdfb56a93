#include "rarekg/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <sstream>

#include "rarekg/error.hpp"
#include "rarekg/ontology.hpp"
#include "text.hpp"

namespace rarekg {

// ---------------------------------------------------------------------------
// Frequency

std::string_view to_string(Frequency f) {
  switch (f) {
    case Frequency::AlwaysPresent: return "ALWAYS_PRESENT";
    case Frequency::VeryFrequent: return "VERY_FREQUENT";
    case Frequency::Frequent: return "FREQUENT";
    case Frequency::Occasional: return "OCCASIONAL";
    case Frequency::Rare: return "RARE";
    case Frequency::Unknown: return "UNKNOWN";
  }
  return "UNKNOWN";
}

std::optional<Frequency> frequency_from_name(std::string_view name) {
  for (auto f : {Frequency::AlwaysPresent, Frequency::VeryFrequent, Frequency::Frequent, Frequency::Occasional,
                 Frequency::Rare, Frequency::Unknown})
    if (to_string(f) == name) return f;
  return std::nullopt;
}

namespace {

// HPO frequency subontology bins, by percentage.
FrequencyToken from_percent(double pct) {
  if (pct < 0.0 || pct > 100.0) return {};
  if (pct == 0.0) return {FrequencyToken::Kind::Excluded, Frequency::Unknown};
  Frequency f = pct >= 100.0  ? Frequency::AlwaysPresent
                : pct >= 80.0 ? Frequency::VeryFrequent
                : pct >= 30.0 ? Frequency::Frequent
                : pct >= 5.0  ? Frequency::Occasional
                              : Frequency::Rare;
  return {FrequencyToken::Kind::Value, f};
}

std::optional<double> parse_number(std::string_view s) {
  s = detail::trim(s);
  if (s.empty()) return std::nullopt;
  try {
    std::size_t used = 0;
    double v = std::stod(std::string(s), &used);
    if (used != s.size()) return std::nullopt;
    return v;
  } catch (...) {
    return std::nullopt;
  }
}

} // namespace

FrequencyToken map_frequency_token(std::string_view token) {
  using K = FrequencyToken::Kind;
  token = detail::trim(token);
  if (token.empty()) return {K::Value, Frequency::Unknown};

  if (auto id = TermId::parse(token)) {
    if (id->str() == "HP:0040280") return {K::Value, Frequency::AlwaysPresent};
    if (id->str() == "HP:0040281") return {K::Value, Frequency::VeryFrequent};
    if (id->str() == "HP:0040282") return {K::Value, Frequency::Frequent};
    if (id->str() == "HP:0040283") return {K::Value, Frequency::Occasional};
    if (id->str() == "HP:0040284") return {K::Value, Frequency::Rare};
    if (id->str() == "HP:0040285") return {K::Excluded, Frequency::Unknown};
    return {};
  }
  if (token.back() == '%') {
    auto v = parse_number(token.substr(0, token.size() - 1));
    return v ? from_percent(*v) : FrequencyToken{};
  }
  if (auto slash = token.find('/'); slash != std::string_view::npos) {
    auto num = parse_number(token.substr(0, slash));
    auto den = parse_number(token.substr(slash + 1));
    if (!num || !den || *den <= 0.0 || *num > *den) return {};
    return from_percent(100.0 * *num / *den);
  }

  // Phrases, optionally followed by a "(99-80%)" style range.
  std::string phrase = detail::normalize_key(token.substr(0, token.find('(')));
  if (phrase == "obligate" || phrase == "always present") return {K::Value, Frequency::AlwaysPresent};
  if (phrase == "very frequent") return {K::Value, Frequency::VeryFrequent};
  if (phrase == "frequent") return {K::Value, Frequency::Frequent};
  if (phrase == "occasional") return {K::Value, Frequency::Occasional};
  if (phrase == "rare" || phrase == "very rare") return {K::Value, Frequency::Rare};
  if (phrase == "excluded") return {K::Excluded, Frequency::Unknown};
  if (phrase == "unknown") return {K::Value, Frequency::Unknown};
  return {};
}

namespace {

std::string_view frequency_code(Frequency f) {
  switch (f) {
    case Frequency::AlwaysPresent: return "HP:0040280";
    case Frequency::VeryFrequent: return "HP:0040281";
    case Frequency::Frequent: return "HP:0040282";
    case Frequency::Occasional: return "HP:0040283";
    case Frequency::Rare: return "HP:0040284";
    case Frequency::Unknown: return "";
  }
  return "";
}

const std::set<TermId>& empty_set() {
  static const std::set<TermId> e;
  return e;
}

void enforce_reject_rate(const std::vector<RowError>& rejected, std::size_t rows, double max_rate,
                         std::string_view what) {
  if (rejected.empty() || rows == 0) return;
  double rate = static_cast<double>(rejected.size()) / static_cast<double>(rows);
  if (rate <= max_rate) return;
  std::ostringstream msg;
  msg << what << ": " << rejected.size() << " of " << rows << " rows rejected (limit " << max_rate * 100.0 << "%)";
  for (std::size_t i = 0; i < rejected.size() && i < 5; ++i)
    msg << "; line " << rejected[i].line << ": " << rejected[i].reason;
  throw Error(ErrorCode::MalformedRow, msg.str());
}

} // namespace

// ---------------------------------------------------------------------------
// DiseaseAnnotationSet

DiseaseAnnotationSet::DiseaseAnnotationSet(std::vector<DiseaseAnnotation> rows) {
  std::set<std::tuple<TermId, TermId, std::string>> seen;
  rows_.reserve(rows.size());
  for (auto& r : rows) {
    if (!seen.emplace(r.disease, r.phenotype, r.provenance).second) {
      ++duplicates_dropped_;
      continue;
    }
    by_disease_[r.disease].insert(r.phenotype);
    by_phenotype_[r.phenotype].insert(r.disease);
    rows_by_disease_[r.disease].push_back(rows_.size());
    rows_.push_back(std::move(r));
  }
}

std::set<TermId> DiseaseAnnotationSet::diseases() const {
  std::set<TermId> out;
  for (const auto& [d, _] : by_disease_) out.insert(d);
  return out;
}

std::set<TermId> DiseaseAnnotationSet::phenotypes() const {
  std::set<TermId> out;
  for (const auto& [p, _] : by_phenotype_) out.insert(p);
  return out;
}

const std::set<TermId>& DiseaseAnnotationSet::phenotypes_of(const TermId& disease) const {
  auto it = by_disease_.find(disease);
  return it == by_disease_.end() ? empty_set() : it->second;
}

const std::set<TermId>& DiseaseAnnotationSet::diseases_with(const TermId& phenotype) const {
  auto it = by_phenotype_.find(phenotype);
  return it == by_phenotype_.end() ? empty_set() : it->second;
}

const std::vector<std::size_t>& DiseaseAnnotationSet::rows_for_disease(const TermId& disease) const {
  static const std::vector<std::size_t> none;
  auto it = rows_by_disease_.find(disease);
  return it == rows_by_disease_.end() ? none : it->second;
}

std::string DiseaseAnnotationSet::disease_name(const TermId& disease) const {
  for (auto i : rows_for_disease(disease))
    if (!rows_[i].disease_name.empty()) return rows_[i].disease_name;
  return {};
}

std::set<std::string> DiseaseAnnotationSet::provenances() const {
  std::set<std::string> out;
  for (const auto& r : rows_) out.insert(r.provenance);
  return out;
}

DiseaseAnnotationSet DiseaseAnnotationSet::filtered(const std::set<std::string>& provenances) const {
  std::vector<DiseaseAnnotation> keep;
  for (const auto& r : rows_)
    if (provenances.count(r.provenance)) keep.push_back(r);
  return DiseaseAnnotationSet(std::move(keep));
}

DiseaseAnnotationSet DiseaseAnnotationSet::merge(const DiseaseAnnotationSet& a, const DiseaseAnnotationSet& b) {
  std::vector<DiseaseAnnotation> rows = a.rows_;
  rows.insert(rows.end(), b.rows_.begin(), b.rows_.end());
  return DiseaseAnnotationSet(std::move(rows));
}

// ---------------------------------------------------------------------------
// HPOA

namespace {

constexpr std::string_view kHpoaColumns[] = {"database_id", "disease_name", "qualifier", "hpo_id",
                                             "reference",   "evidence",     "onset",     "frequency",
                                             "sex",         "modifier",     "aspect",    "biocuration"};
constexpr std::size_t kHpoaColumnCount = std::size(kHpoaColumns);

} // namespace

HpoaParseResult parse_hpoa(std::string_view source, const ParseOptions& options) {
  HpoaParseResult result;
  std::vector<DiseaseAnnotation> rows;
  bool header_seen = false;

  auto lines = detail::split_lines(source);
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    const std::size_t line_no = ln + 1;
    const auto& line = lines[ln];
    if (line.empty()) continue;
    if (!header_seen) {
      if (line.front() == '#') continue;
      auto cols = detail::split(line, '\t');
      bool ok = cols.size() == kHpoaColumnCount;
      for (std::size_t i = 0; ok && i < kHpoaColumnCount; ++i) ok = detail::trim(cols[i]) == kHpoaColumns[i];
      if (!ok) throw Error(ErrorCode::HeaderMismatch, "line " + std::to_string(line_no) + ": unexpected HPOA header");
      header_seen = true;
      continue;
    }

    ++result.data_rows;
    auto cols = detail::split(line, '\t');
    if (cols.size() != kHpoaColumnCount) {
      result.rejected.push_back({line_no, "expected 12 columns, got " + std::to_string(cols.size())});
      continue;
    }
    if (detail::trim(cols[2]) == "NOT") {
      ++result.skipped_negated;
      continue;
    }
    auto aspect = detail::trim(cols[10]);
    if (!aspect.empty() && aspect != "P") {
      ++result.skipped_non_phenotype_aspect;
      continue;
    }
    auto disease = TermId::parse(detail::trim(cols[0]));
    if (!disease || !disease->is_disease()) {
      result.rejected.push_back({line_no, "unsupported disease id '" + std::string(cols[0]) + "'"});
      continue;
    }
    auto phenotype = TermId::parse(detail::trim(cols[3]));
    if (!phenotype || phenotype->ns() != Namespace::HP) {
      result.rejected.push_back({line_no, "unsupported phenotype id '" + std::string(cols[3]) + "'"});
      continue;
    }
    auto freq = map_frequency_token(cols[7]);
    if (freq.kind == FrequencyToken::Kind::Invalid) {
      result.rejected.push_back({line_no, "unrecognized frequency '" + std::string(cols[7]) + "'"});
      continue;
    }
    if (freq.kind == FrequencyToken::Kind::Excluded) {
      ++result.skipped_excluded_frequency;
      continue;
    }
    rows.push_back({*disease, *phenotype, freq.value, options.provenance, std::string(detail::trim(cols[1]))});
  }
  if (!header_seen) throw Error(ErrorCode::HeaderMismatch, "no HPOA header row found");

  enforce_reject_rate(result.rejected, result.data_rows, options.max_reject_rate, "HPOA");
  result.annotations = DiseaseAnnotationSet(std::move(rows));
  return result;
}

std::string write_hpoa(const DiseaseAnnotationSet& set) {
  std::ostringstream out;
  for (std::size_t i = 0; i < kHpoaColumnCount; ++i) out << (i ? "\t" : "") << kHpoaColumns[i];
  out << "\n";
  for (const auto& a : set.annotations()) {
    out << a.disease.str() << '\t' << a.disease_name << "\t\t" << a.phenotype.str() << "\t\t\t\t"
        << frequency_code(a.frequency) << "\t\t\tP\t\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Genes

bool is_valid_gene_symbol(std::string_view symbol) {
  if (symbol.empty()) return false;
  return std::all_of(symbol.begin(), symbol.end(), [](unsigned char c) {
    return std::isdigit(c) || std::isupper(c) || c == '-';
  });
}

namespace {

std::optional<std::set<TermId>> parse_id_list(std::string_view cell, bool want_disease) {
  std::set<TermId> out;
  cell = detail::trim(cell);
  if (cell.empty()) return out;
  for (auto part : detail::split(cell, '|')) {
    auto id = TermId::parse(detail::trim(part));
    if (!id) return std::nullopt;
    if (want_disease != id->is_disease()) return std::nullopt;
    out.insert(*id);
  }
  return out;
}

std::string join_ids(const std::set<TermId>& ids) {
  std::string out;
  for (const auto& id : ids) {
    if (!out.empty()) out += '|';
    out += id.str();
  }
  return out;
}

} // namespace

GeneParseResult parse_genes(std::string_view source, const ParseOptions& options) {
  GeneParseResult result;
  bool header_seen = false;
  std::size_t rows = 0;
  auto lines = detail::split_lines(source);
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    const std::size_t line_no = ln + 1;
    const auto& line = lines[ln];
    if (line.empty() || line.front() == '#') continue;
    auto cols = detail::split(line, '\t');
    if (!header_seen) {
      if (cols.size() != 3 || detail::trim(cols[0]) != "symbol" || detail::trim(cols[1]) != "disease_ids" ||
          detail::trim(cols[2]) != "phenotype_ids")
        throw Error(ErrorCode::HeaderMismatch, "line " + std::to_string(line_no) + ": unexpected gene table header");
      header_seen = true;
      continue;
    }
    ++rows;
    if (cols.size() != 3) {
      result.rejected.push_back({line_no, "expected 3 columns"});
      continue;
    }
    GeneRecord g;
    g.symbol = std::string(detail::trim(cols[0]));
    if (!is_valid_gene_symbol(g.symbol)) {
      result.rejected.push_back({line_no, "invalid gene symbol '" + g.symbol + "'"});
      continue;
    }
    auto diseases = parse_id_list(cols[1], true);
    auto phenotypes = parse_id_list(cols[2], false);
    if (!diseases || !phenotypes) {
      result.rejected.push_back({line_no, "unparseable id list"});
      continue;
    }
    g.diseases = std::move(*diseases);
    g.phenotypes = std::move(*phenotypes);
    result.genes.push_back(std::move(g));
  }
  if (!header_seen) throw Error(ErrorCode::HeaderMismatch, "no gene table header row found");
  enforce_reject_rate(result.rejected, rows, options.max_reject_rate, "gene table");
  return result;
}

std::string write_genes(const std::vector<GeneRecord>& genes) {
  std::ostringstream out;
  out << "symbol\tdisease_ids\tphenotype_ids\n";
  for (const auto& g : genes) out << g.symbol << '\t' << join_ids(g.diseases) << '\t' << join_ids(g.phenotypes) << '\n';
  return out.str();
}

// ---------------------------------------------------------------------------
// Variants

std::string_view to_string(Significance s) {
  switch (s) {
    case Significance::Pathogenic: return "PATHOGENIC";
    case Significance::LikelyPathogenic: return "LIKELY_PATHOGENIC";
    case Significance::Vus: return "VUS";
    case Significance::Other: return "OTHER";
  }
  return "OTHER";
}

std::optional<Significance> significance_from_name(std::string_view name) {
  for (auto s : {Significance::Pathogenic, Significance::LikelyPathogenic, Significance::Vus, Significance::Other})
    if (to_string(s) == name) return s;
  return std::nullopt;
}

int severity(Significance s) {
  switch (s) {
    case Significance::Pathogenic: return 3;
    case Significance::LikelyPathogenic: return 2;
    case Significance::Vus: return 1;
    case Significance::Other: return 0;
  }
  return 0;
}

std::string VariantKey::str() const {
  return chrom + ":" + std::to_string(pos) + ":" + ref + ":" + alt;
}

namespace {

std::optional<std::uint64_t> parse_pos(std::string_view s) {
  s = detail::trim(s);
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || v == 0) return std::nullopt;
  return v;
}

bool valid_allele(std::string_view a) {
  return !a.empty() && std::all_of(a.begin(), a.end(), [](unsigned char c) {
    return c == 'A' || c == 'C' || c == 'G' || c == 'T' || c == 'N' || c == 'a' || c == 'c' || c == 'g' ||
           c == 't' || c == 'n';
  });
}

[[noreturn]] void bad_line(std::size_t line, const std::string& why) {
  throw Error(ErrorCode::MalformedLine, "line " + std::to_string(line) + ": " + why);
}

// ClinVar CLNSIG vocabulary. Returns nullopt for unrecognized tokens.
std::optional<Significance> map_clnsig(std::string_view raw) {
  std::string v = detail::to_lower(detail::trim(raw));
  // ClinVar may list several values separated by '|' or ','; the most severe wins.
  std::optional<Significance> best;
  bool any_known = false;
  std::string token;
  auto consume = [&](const std::string& t) {
    std::optional<Significance> s;
    if (t == "pathogenic" || t == "pathogenic/likely_pathogenic") s = Significance::Pathogenic;
    else if (t == "likely_pathogenic") s = Significance::LikelyPathogenic;
    else if (t == "uncertain_significance") s = Significance::Vus;
    else if (t == "benign" || t == "likely_benign" || t == "benign/likely_benign") s = Significance::Other;
    if (!s) return;
    any_known = true;
    if (!best || severity(*s) > severity(*best)) best = s;
  };
  for (char c : v) {
    if (c == '|' || c == ',') {
      consume(token);
      token.clear();
    } else {
      token.push_back(c);
    }
  }
  consume(token);
  if (!any_known) return std::nullopt;
  return best;
}

std::map<std::string, std::string> parse_info(std::string_view info) {
  std::map<std::string, std::string> out;
  if (info == ".") return out;
  for (auto kv : detail::split(info, ';')) {
    auto eq = kv.find('=');
    if (eq == std::string_view::npos) out.emplace(std::string(kv), "");
    else out.emplace(std::string(kv.substr(0, eq)), std::string(kv.substr(eq + 1)));
  }
  return out;
}

std::optional<std::string> opt_cell(std::string_view s) {
  s = detail::trim(s);
  if (s.empty() || s == ".") return std::nullopt;
  return std::string(s);
}

VariantParseResult parse_vcf(std::string_view source, std::string_view provenance) {
  VariantParseResult result;
  auto lines = detail::split_lines(source);
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    const std::size_t line_no = ln + 1;
    const auto& line = lines[ln];
    if (line.empty() || line.front() == '#') continue;
    auto cols = detail::split(line, '\t');
    if (cols.size() < 8) bad_line(line_no, "VCF body line needs at least 8 columns");
    VariantKey base;
    base.chrom = std::string(detail::trim(cols[0]));
    if (base.chrom.empty()) bad_line(line_no, "empty CHROM");
    auto pos = parse_pos(cols[1]);
    if (!pos) bad_line(line_no, "POS must be a positive integer");
    base.pos = *pos;
    base.ref = std::string(detail::trim(cols[3]));
    if (!valid_allele(base.ref)) bad_line(line_no, "invalid REF allele");
    auto alts = detail::trim(cols[4]);
    if (alts == "." || alts.empty()) {
      ++result.skipped_no_alt;
      continue;
    }
    auto info = parse_info(detail::trim(cols[7]));
    std::string gene;
    if (auto it = info.find("GENE"); it != info.end()) {
      gene = it->second;
    } else if (auto gi = info.find("GENEINFO"); gi != info.end()) {
      // SYMBOL:ID|SYMBOL2:ID2
      auto first = detail::split(gi->second, '|').front();
      gene = std::string(first.substr(0, first.find(':')));
    }
    if (gene.empty()) {
      ++result.skipped_no_gene;
      continue;
    }
    if (!is_valid_gene_symbol(gene)) bad_line(line_no, "invalid gene symbol '" + gene + "'");

    Significance sig = Significance::Other;
    if (auto it = info.find("CLNSIG"); it != info.end()) {
      if (auto s = map_clnsig(it->second)) sig = *s;
      else ++result.unknown_significance;
    } else {
      ++result.unknown_significance;
    }

    for (auto alt : detail::split(alts, ',')) {
      VariantRecord rec;
      rec.key = base;
      rec.key.alt = std::string(detail::trim(alt));
      if (!valid_allele(rec.key.alt)) bad_line(line_no, "invalid ALT allele '" + rec.key.alt + "'");
      if (rec.key.alt == rec.key.ref) bad_line(line_no, "ALT equals REF");
      rec.gene = gene;
      if (auto it = info.find("TRANSCRIPT"); it != info.end()) rec.transcript = opt_cell(it->second);
      if (auto it = info.find("HGVSC"); it != info.end()) rec.hgvs_c = opt_cell(it->second);
      if (auto it = info.find("HGVSP"); it != info.end()) rec.hgvs_p = opt_cell(it->second);
      rec.significance = sig;
      rec.provenance.insert(std::string(provenance));
      result.records.push_back(std::move(rec));
    }
  }
  return result;
}

constexpr std::string_view kVariantTsvHeader =
    "chrom\tpos\tref\talt\tgene\ttranscript\thgvs_c\thgvs_p\tsignificance\tprovenance";

VariantParseResult parse_variant_tsv(std::string_view source, std::string_view provenance) {
  VariantParseResult result;
  bool header_seen = false;
  auto lines = detail::split_lines(source);
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    const std::size_t line_no = ln + 1;
    const auto& line = lines[ln];
    if (line.empty() || line.front() == '#') continue;
    if (!header_seen) {
      if (line != kVariantTsvHeader) bad_line(line_no, "unexpected variant TSV header");
      header_seen = true;
      continue;
    }
    auto cols = detail::split(line, '\t');
    if (cols.size() != 10) bad_line(line_no, "expected 10 columns");
    VariantRecord rec;
    rec.key.chrom = std::string(detail::trim(cols[0]));
    auto pos = parse_pos(cols[1]);
    if (rec.key.chrom.empty() || !pos) bad_line(line_no, "invalid chrom/pos");
    rec.key.pos = *pos;
    rec.key.ref = std::string(detail::trim(cols[2]));
    rec.key.alt = std::string(detail::trim(cols[3]));
    if (!valid_allele(rec.key.ref) || !valid_allele(rec.key.alt)) bad_line(line_no, "invalid allele");
    if (rec.key.ref == rec.key.alt) bad_line(line_no, "ALT equals REF");
    rec.gene = std::string(detail::trim(cols[4]));
    if (!is_valid_gene_symbol(rec.gene)) bad_line(line_no, "invalid gene symbol '" + rec.gene + "'");
    rec.transcript = opt_cell(cols[5]);
    rec.hgvs_c = opt_cell(cols[6]);
    rec.hgvs_p = opt_cell(cols[7]);
    auto sig_cell = detail::trim(cols[8]);
    if (auto s = significance_from_name(sig_cell)) {
      rec.significance = *s;
    } else if (auto s2 = map_clnsig(sig_cell)) {
      rec.significance = *s2;
    } else {
      rec.significance = Significance::Other;
      ++result.unknown_significance;
    }
    auto prov = detail::trim(cols[9]);
    if (prov.empty()) {
      rec.provenance.insert(std::string(provenance));
    } else {
      for (auto p : detail::split(prov, '|'))
        if (!detail::trim(p).empty()) rec.provenance.insert(std::string(detail::trim(p)));
    }
    result.records.push_back(std::move(rec));
  }
  if (!header_seen && !result.records.empty()) bad_line(1, "missing variant TSV header");
  return result;
}

} // namespace

std::optional<VariantKey> VariantKey::parse(std::string_view text) {
  auto parts = detail::split(detail::trim(text), ':');
  if (parts.size() != 4) return std::nullopt;
  auto pos = parse_pos(parts[1]);
  if (parts[0].empty() || !pos || !valid_allele(parts[2]) || !valid_allele(parts[3]) || parts[2] == parts[3])
    return std::nullopt;
  return VariantKey{std::string(parts[0]), *pos, std::string(parts[2]), std::string(parts[3])};
}

VariantParseResult parse_variants(std::string_view source, VariantFormat format, std::string_view provenance) {
  return format == VariantFormat::VcfSlim ? parse_vcf(source, provenance) : parse_variant_tsv(source, provenance);
}

std::string write_variants_tsv(const std::vector<VariantRecord>& records) {
  std::ostringstream out;
  out << kVariantTsvHeader << '\n';
  for (const auto& r : records) {
    std::string prov;
    for (const auto& p : r.provenance) {
      if (!prov.empty()) prov += '|';
      prov += p;
    }
    out << r.key.chrom << '\t' << r.key.pos << '\t' << r.key.ref << '\t' << r.key.alt << '\t' << r.gene << '\t'
        << r.transcript.value_or("") << '\t' << r.hgvs_c.value_or("") << '\t' << r.hgvs_p.value_or("") << '\t'
        << to_string(r.significance) << '\t' << prov << '\n';
  }
  return out.str();
}

std::vector<VariantRecord> dedupe_variants(std::vector<VariantRecord> records) {
  std::stable_sort(records.begin(), records.end(), [](const auto& a, const auto& b) { return a.key < b.key; });
  std::vector<VariantRecord> out;
  for (auto& r : records) {
    if (!out.empty() && out.back().key == r.key) {
      auto& kept = out.back();
      kept.provenance.insert(r.provenance.begin(), r.provenance.end());
      if (severity(r.significance) > severity(kept.significance)) kept.significance = r.significance;
      if (!kept.transcript) kept.transcript = r.transcript;
      if (!kept.hgvs_c) kept.hgvs_c = r.hgvs_c;
      if (!kept.hgvs_p) kept.hgvs_p = r.hgvs_p;
      continue;
    }
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Normalization

bool NormalizationTable::insert(std::string_view label, const TermId& id, std::string_view provenance) {
  auto key = detail::normalize_key(label);
  if (key.empty()) throw Error(ErrorCode::InvalidArgument, "normalization label is empty");
  if (!id.is_disease()) throw Error(ErrorCode::InvalidArgument, "normalization target must be ORPHA/OMIM: " + id.str());
  auto [it, inserted] = entries_.emplace(key, Entry{id, std::string(provenance), std::string(detail::trim(label))});
  if (!inserted) {
    if (it->second.id != id) conflicts_.push_back({key, it->second.id, id});
    return false;
  }
  auto [kit, first] = first_key_by_id_.emplace(id, key);
  if (!first && key < kit->second) kit->second = key;
  return true;
}

std::optional<TermId> NormalizationTable::lookup(std::string_view label) const {
  auto it = entries_.find(detail::normalize_key(label));
  if (it == entries_.end()) return std::nullopt;
  return it->second.id;
}

bool NormalizationTable::contains_id(const TermId& id) const { return first_key_by_id_.count(id) != 0; }

std::optional<std::string> NormalizationTable::label_of(const TermId& id) const {
  auto it = first_key_by_id_.find(id);
  if (it == first_key_by_id_.end()) return std::nullopt;
  return entries_.at(it->second).label;
}

NormalizationTable parse_normalization_table(std::string_view source) {
  NormalizationTable table;
  bool header_seen = false;
  auto lines = detail::split_lines(source);
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    const std::size_t line_no = ln + 1;
    const auto& line = lines[ln];
    if (line.empty() || line.front() == '#') continue;
    auto cols = detail::split(line, '\t');
    if (!header_seen) {
      if (cols.size() != 3 || cols[0] != "label" || cols[1] != "term_id" || cols[2] != "provenance")
        throw Error(ErrorCode::HeaderMismatch, "line " + std::to_string(line_no) + ": unexpected normalization header");
      header_seen = true;
      continue;
    }
    if (cols.size() != 3) throw Error(ErrorCode::MalformedRow, "line " + std::to_string(line_no) + ": expected 3 columns");
    auto id = TermId::parse(detail::trim(cols[1]));
    if (!id || !id->is_disease() || detail::trim(cols[0]).empty())
      throw Error(ErrorCode::MalformedRow, "line " + std::to_string(line_no) + ": invalid normalization entry");
    table.insert(cols[0], *id, detail::trim(cols[2]));
  }
  return table;
}

std::string write_normalization_table(const NormalizationTable& table) {
  std::ostringstream out;
  out << "label\tterm_id\tprovenance\n";
  for (const auto& [key, e] : table.entries()) out << e.label << '\t' << e.id.str() << '\t' << e.provenance << '\n';
  return out.str();
}

std::optional<TermId> normalize_entity(const NormalizationTable& table, std::string_view label) {
  if (detail::trim(label).empty()) throw Error(ErrorCode::InvalidArgument, "label is empty");
  return table.lookup(label);
}

void XrefTable::add(const TermId& omim, const TermId& orpha) {
  if (omim.ns() != Namespace::OMIM || orpha.ns() != Namespace::ORPHA)
    throw Error(ErrorCode::InvalidArgument, "xref must map OMIM to ORPHA");
  map_[omim].insert(orpha);
}

std::optional<TermId> XrefTable::to_orpha(const TermId& omim) const {
  auto it = map_.find(omim);
  if (it == map_.end() || it->second.empty()) return std::nullopt;
  return *it->second.begin();
}

std::size_t XrefTable::size() const {
  std::size_t n = 0;
  for (const auto& [_, v] : map_) n += v.size();
  return n;
}

XrefTable parse_xrefs(std::string_view source) {
  XrefTable table;
  bool header_seen = false;
  auto lines = detail::split_lines(source);
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    const std::size_t line_no = ln + 1;
    const auto& line = lines[ln];
    if (line.empty() || line.front() == '#') continue;
    auto cols = detail::split(line, '\t');
    if (!header_seen) {
      if (cols.size() != 2 || cols[0] != "omim_id" || cols[1] != "orpha_id")
        throw Error(ErrorCode::HeaderMismatch, "line " + std::to_string(line_no) + ": unexpected xref header");
      header_seen = true;
      continue;
    }
    auto omim = cols.size() == 2 ? TermId::parse(detail::trim(cols[0])) : std::nullopt;
    auto orpha = cols.size() == 2 ? TermId::parse(detail::trim(cols[1])) : std::nullopt;
    if (!omim || !orpha || omim->ns() != Namespace::OMIM || orpha->ns() != Namespace::ORPHA)
      throw Error(ErrorCode::MalformedRow, "line " + std::to_string(line_no) + ": invalid xref row");
    table.add(*omim, *orpha);
  }
  return table;
}

// ---------------------------------------------------------------------------
// Validation

std::string_view to_string(FindingKind k) {
  switch (k) {
    case FindingKind::DanglingPhenotype: return "dangling_phenotype";
    case FindingKind::DanglingDisease: return "dangling_disease";
    case FindingKind::DuplicateEdge: return "duplicate_edge";
    case FindingKind::UnknownGene: return "unknown_gene";
    case FindingKind::ObsoletePhenotype: return "obsolete_phenotype";
    case FindingKind::DuplicateAnnotation: return "duplicate_annotation";
  }
  return "?";
}

bool is_error(FindingKind k) {
  return k != FindingKind::ObsoletePhenotype && k != FindingKind::DuplicateAnnotation;
}

std::size_t ValidationReport::count(FindingKind k) const {
  return static_cast<std::size_t>(
      std::count_if(findings.begin(), findings.end(), [k](const Finding& f) { return f.kind == k; }));
}

std::size_t ValidationReport::error_count() const {
  return static_cast<std::size_t>(
      std::count_if(findings.begin(), findings.end(), [](const Finding& f) { return is_error(f.kind); }));
}

ValidationReport validate_sources(const OntologyGraph& ontology, const DiseaseAnnotationSet& annotations,
                                  const std::vector<GeneRecord>& genes, const std::vector<VariantRecord>& variants,
                                  const OntologyGraph* disease_ontology, const XrefTable* xrefs) {
  ValidationReport report;
  auto add = [&](FindingKind k, std::string detail) { report.findings.push_back({k, std::move(detail)}); };

  auto check_phenotype = [&](const TermId& p, const std::string& where) {
    const auto* t = ontology.find(p);
    if (!t) add(FindingKind::DanglingPhenotype, where + " references " + p.str() + " which is not in the ontology");
    else if (t->obsolete) add(FindingKind::ObsoletePhenotype, where + " references obsolete " + p.str());
  };

  for (const auto& p : annotations.phenotypes()) check_phenotype(p, "annotation");
  if (annotations.duplicates_dropped() > 0)
    add(FindingKind::DuplicateAnnotation,
        std::to_string(annotations.duplicates_dropped()) + " repeated (disease, phenotype, provenance) rows collapsed");

  auto known_disease = [&](const TermId& d) {
    if (!annotations.phenotypes_of(d).empty()) return true;
    return disease_ontology && disease_ontology->contains(d);
  };

  std::set<std::string> symbols;
  std::set<std::pair<std::string, TermId>> gene_disease_pairs;
  for (const auto& g : genes) {
    if (!symbols.insert(g.symbol).second) add(FindingKind::DuplicateEdge, "gene " + g.symbol + " listed more than once");
    for (const auto& d : g.diseases)
      if (!known_disease(d)) add(FindingKind::DanglingDisease, "gene " + g.symbol + " references unknown disease " + d.str());
    for (const auto& p : g.phenotypes) check_phenotype(p, "gene " + g.symbol);
  }

  for (const auto& v : variants)
    if (!symbols.count(v.gene)) add(FindingKind::UnknownGene, "variant " + v.key.str() + " references unknown gene " + v.gene);

  std::set<VariantKey> seen_keys;
  for (const auto& v : variants)
    if (!seen_keys.insert(v.key).second) add(FindingKind::DuplicateEdge, "variant " + v.key.str() + " not deduplicated");

  if (xrefs) {
    for (const auto& [omim, orphas] : xrefs->entries())
      for (const auto& o : orphas)
        if (disease_ontology && !disease_ontology->contains(o))
          add(FindingKind::DanglingDisease, "xref " + omim.str() + " -> " + o.str() + " targets an unknown disease");
  }
  return report;
}

} // namespace rarekg
