#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "rarekg/ingest.hpp"
#include "rarekg/ontology.hpp"

namespace rarekg {

inline constexpr std::size_t kMaxPredictions = 20;

// ---------------------------------------------------------------------------
// Prediction lists

struct ListEntry {
  int rank = 0;
  std::string label;

  friend bool operator==(const ListEntry&, const ListEntry&) = default;
};

// Numbered lines ("1." / "1)"), bullets ("-", "*", "•") or a bare
// one-per-line list of short lines. Trailing parentheticals, code suffixes
// and confidence annotations are stripped. At most 20 entries.
// Throws NO_LIST_FOUND.
std::vector<ListEntry> parse_prediction_list(std::string_view text);

// Maps a label to a disease id. Implementations may throw REMOTE_UNAVAILABLE
// or MALFORMED_RESPONSE.
class LabelResolver {
public:
  virtual ~LabelResolver() = default;
  virtual std::optional<TermId> resolve(std::string_view label) = 0;
};

enum class ExclusionReason { Unmapped, Duplicate };
std::string_view to_string(ExclusionReason r);

struct Prediction {
  int rank = 0;  // position in the raw list
  std::string raw_label;
  std::optional<TermId> normalized;
  std::optional<ExclusionReason> excluded;
  std::string source;  // "local", "remote" or empty
};

struct PredictionSet {
  std::string case_id;
  std::string model_tag;
  std::vector<Prediction> predictions;  // kept: normalized, unique codes, rank order
  std::vector<Prediction> excluded;     // UNMAPPED
  std::vector<Prediction> duplicates;   // same code as a better-ranked entry
  std::size_t raw_count = 0;
  bool remote_unavailable = false;
  std::string remote_error;
};

// Only the 20 best-ranked labels are considered. Local table first, then the
// remote resolver (hits are cached into the table). A remote failure disables
// the resolver for the remaining labels and is recorded, never thrown. Throws EMPTY_INPUT.
PredictionSet normalize_predictions(const std::vector<ListEntry>& labels, NormalizationTable& table,
                                    LabelResolver* remote = nullptr);

// ---------------------------------------------------------------------------
// Matching and accuracy

struct EvalConfig {
  std::vector<int> k_cutoffs = {1, 3, 5, 10, 20};
  bool hierarchical = true;
  std::optional<std::size_t> max_ancestor_depth = 1;  // nullopt: any ancestor
  std::size_t bootstrap_resamples = 1000;
  double ci_level = 0.95;
  std::uint64_t rng_seed = 0;

  // Throws INVALID_ARGUMENT on violated invariants.
  void validate() const;
};

// True when pred == truth, or hierarchical mode is on and pred is an ancestor
// of truth within max_ancestor_depth. Throws UNKNOWN_DISEASE when hierarchical
// credit is needed and truth is not in the disease ontology.
bool match_diagnosis(const TermId& pred, const TermId& truth, const OntologyGraph& disease_ontology,
                     const EvalConfig& cfg);

struct BootstrapResult {
  double mean = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double std_error = 0.0;   // sd of resample means
  double half_width = 0.0;  // (upper - lower) / 2
  std::size_t resamples = 0;
};

// Percentile bootstrap of the mean. Throws EMPTY_INPUT, INVALID_ARGUMENT.
BootstrapResult bootstrap_ci(const std::vector<double>& values, std::size_t resamples, double level,
                             std::uint64_t seed);
// Several statistics over the same observations share one set of resample
// indices.
std::vector<BootstrapResult> bootstrap_ci_shared(const std::vector<std::vector<double>>& columns,
                                                 std::size_t resamples, double level, std::uint64_t seed);

// Linear-interpolation sample quantile (x[h] with h = (n-1)p) of sorted data.
double quantile_sorted(const std::vector<double>& sorted, double p);

struct EvalCase {
  PredictionSet predictions;
  std::optional<TermId> truth;
  std::optional<std::string> stratum;
  std::set<std::string> categories;
  bool unparseable = false;
};

struct CutoffResult {
  int k = 0;
  std::size_t hits = 0;
  double accuracy = 0.0;
  BootstrapResult ci;
};

struct SubReport {
  std::size_t n = 0;
  std::vector<CutoffResult> cutoffs;
};

struct CaseOutcome {
  std::string case_id;
  std::optional<TermId> truth;  // after cross-reference translation
  std::optional<int> first_hit_rank;
  bool exact_only = false;  // truth outside the disease hierarchy
  std::optional<std::string> unevaluable;
};

struct EvalReport {
  EvalConfig config;
  std::size_t n_cases = 0;
  std::size_t n_evaluated = 0;
  std::size_t n_unevaluable = 0;
  std::vector<CutoffResult> overall;
  std::map<std::string, SubReport> strata;
  std::map<std::string, SubReport> categories;
  std::size_t excluded_predictions = 0;
  std::size_t duplicate_predictions = 0;
  std::size_t remote_unavailable_cases = 0;
  std::vector<CaseOutcome> outcomes;
};

// OMIM truths (and predictions) are translated to ORPHA through xrefs first.
// Untranslatable truths and unparseable outputs are UNEVALUABLE: counted and
// excluded from every denominator. Throws EMPTY_CASE_SET, MISSING_TRUTH.
EvalReport topk_accuracy(const std::vector<EvalCase>& cases, const OntologyGraph* disease_ontology,
                         const XrefTable* xrefs, const EvalConfig& cfg);

std::string eval_report_json(const EvalReport& report, std::string_view config_hash);
// scope,name,k,n,hits,accuracy,ci_lower,ci_upper,std_error,half_width rows
// after a "# config_hash=<hash> seed=<seed>" line.
std::string eval_report_csv(const EvalReport& report, std::string_view config_hash);

// Line-delimited model outputs: {case_id, model_tag, raw_output_text} or
// {case_id, model_tag, predictions:[labels]}.
struct PredictionRecord {
  std::string case_id;
  std::string model_tag;
  std::optional<std::string> raw_output_text;
  std::optional<std::vector<std::string>> labels;
};
std::vector<PredictionRecord> read_prediction_records(std::string_view jsonl);

// ---------------------------------------------------------------------------
// Group statistics

struct TTestResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;
};

// Welch two-sample t-test, two-sided. Throws INVALID_ARGUMENT (n < 2),
// DEGENERATE_VARIANCE (both variances zero).
TTestResult compare_groups(const std::vector<double>& a, const std::vector<double>& b);

enum class FinderDimension {
  CaseComprehension,
  GuidelineCompliance,
  KeyFeatureSensitivity,
  ReasoningConsistency,
  DifferentialRelevance,
  DiagnosticAcceptability,
  BiasFairness,
  HarmPotential,
};
inline constexpr std::size_t kFinderDimensions = 8;
std::string_view to_string(FinderDimension d);
std::optional<FinderDimension> finder_dimension_from_name(std::string_view name);
const std::vector<FinderDimension>& all_finder_dimensions();

struct FinderScorecard {
  std::string case_id;
  std::string model_tag;
  std::string rater_id;
  std::map<FinderDimension, int> scores;
};

// CSV with header case_id,model_tag,rater_id followed by the eight dimension
// names in any order. Throws HEADER_MISMATCH, MALFORMED_ROW.
std::vector<FinderScorecard> parse_finder_csv(std::string_view text);

struct DimensionSummary {
  std::size_t n = 0;
  double mean = 0.0;
  double sd = 0.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  double half_width = 0.0;
  bool degenerate = false;  // n == 1: zero-width interval
};

struct PairwiseComparison {
  std::string model_a;
  std::string model_b;
  FinderDimension dimension;
  TTestResult test;
  // "welch"; "constant" when both groups have zero variance (p is 0 if the
  // means differ, 1 otherwise); "insufficient" when a group has n < 2.
  std::string method;
};

struct FinderReport {
  std::map<std::string, std::map<FinderDimension, DimensionSummary>> summaries;
  std::vector<PairwiseComparison> comparisons;
};

// Throws INCOMPLETE_SCORECARD for missing dimensions or scores outside 1..5.
FinderReport aggregate_finder(const std::vector<FinderScorecard>& cards);
std::string finder_report_json(const FinderReport& report, std::string_view config_hash);

// ---------------------------------------------------------------------------
// Surrogate interpretability

struct SurrogateFit {
  double intercept = 0.0;
  std::vector<std::pair<std::string, double>> coefficients;  // by |coefficient| desc, then name
  std::vector<std::string> dropped;                          // zero-variance columns
  bool ridge = false;
  double ridge_lambda = 0.0;
  std::size_t rank = 0;
  double r_squared = 0.0;
};

inline constexpr double kDefaultRidgeLambda = 1e-6;

// Least squares on mean-centered columns; ridge fallback on rank deficiency.
// Throws INVALID_ARGUMENT (< 2 rows or ragged input), EMPTY_FEATURES (no
// column with variance).
SurrogateFit fit_linear_surrogate(const std::vector<std::vector<double>>& x, const std::vector<double>& y,
                                  const std::vector<std::string>& names, double ridge_lambda = kDefaultRidgeLambda);

struct SurrogateCase {
  std::set<TermId> phenotypes;
  std::optional<TermId> predicted;  // top-ranked normalized prediction
};

// Response is 1 when the case's prediction equals target_disease; one
// indicator column per phenotype observed in the cohort.
SurrogateFit fit_global_surrogate(const std::vector<SurrogateCase>& cases, const TermId& target_disease,
                                  double ridge_lambda = kDefaultRidgeLambda);
std::string surrogate_json(const SurrogateFit& fit, std::string_view config_hash);

// ---------------------------------------------------------------------------
// Evidence profiles

struct FeatureInput {
  std::string text;
  std::optional<std::string> category;
};

struct EvidenceProfile {
  std::string case_id;
  std::vector<std::pair<std::string, TermId>> hpo_features;
  std::vector<std::pair<std::string, std::optional<std::string>>> non_hpo_features;
  double non_hpo_fraction = 0.0;
};

// Throws EMPTY_FEATURES.
EvidenceProfile profile_evidence(const OntologyGraph& graph, const std::vector<FeatureInput>& features,
                                 std::string case_id = {});

struct CohortSummary {
  std::size_t n = 0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double iqr = 0.0;
  double min = 0.0;
  double max = 0.0;
};

// Throws EMPTY_INPUT.
CohortSummary summarize_fractions(std::vector<double> fractions);

} // namespace rarekg
