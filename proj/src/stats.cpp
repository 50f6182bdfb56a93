#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Dense>
#include <boost/math/distributions/students_t.hpp>
#include <json.hpp>

#include "rarekg/error.hpp"
#include "rarekg/eval.hpp"
#include "text.hpp"

namespace rarekg {

using nlohmann::json;

namespace {

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

double var_of(const std::vector<double>& v, double m) {
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return ss / static_cast<double>(v.size() - 1);
}

} // namespace

TTestResult compare_groups(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() < 2 || b.size() < 2) throw Error(ErrorCode::InvalidArgument, "each group needs at least two values");
  const double ma = mean_of(a), mb = mean_of(b);
  const double va = var_of(a, ma), vb = var_of(b, mb);
  if (va == 0.0 && vb == 0.0) throw Error(ErrorCode::DegenerateVariance, "both groups have zero variance");
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double sa = va / na, sb = vb / nb;
  TTestResult r;
  r.t = (ma - mb) / std::sqrt(sa + sb);
  r.df = (sa + sb) * (sa + sb) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
  boost::math::students_t dist(r.df);
  r.p = std::min(1.0, 2.0 * boost::math::cdf(dist, -std::fabs(r.t)));
  return r;
}

// ---------------------------------------------------------------------------
// FINDER

std::string_view to_string(FinderDimension d) {
  switch (d) {
    case FinderDimension::CaseComprehension: return "CASE_COMPREHENSION";
    case FinderDimension::GuidelineCompliance: return "GUIDELINE_COMPLIANCE";
    case FinderDimension::KeyFeatureSensitivity: return "KEY_FEATURE_SENSITIVITY";
    case FinderDimension::ReasoningConsistency: return "REASONING_CONSISTENCY";
    case FinderDimension::DifferentialRelevance: return "DIFFERENTIAL_RELEVANCE";
    case FinderDimension::DiagnosticAcceptability: return "DIAGNOSTIC_ACCEPTABILITY";
    case FinderDimension::BiasFairness: return "BIAS_FAIRNESS";
    case FinderDimension::HarmPotential: return "HARM_POTENTIAL";
  }
  return "?";
}

const std::vector<FinderDimension>& all_finder_dimensions() {
  static const std::vector<FinderDimension> dims = {
      FinderDimension::CaseComprehension,     FinderDimension::GuidelineCompliance,
      FinderDimension::KeyFeatureSensitivity, FinderDimension::ReasoningConsistency,
      FinderDimension::DifferentialRelevance, FinderDimension::DiagnosticAcceptability,
      FinderDimension::BiasFairness,          FinderDimension::HarmPotential};
  return dims;
}

std::optional<FinderDimension> finder_dimension_from_name(std::string_view name) {
  const auto upper = detail::to_upper(detail::trim(name));
  for (auto d : all_finder_dimensions())
    if (to_string(d) == upper) return d;
  return std::nullopt;
}

std::vector<FinderScorecard> parse_finder_csv(std::string_view text) {
  auto lines = detail::split_lines(text);
  std::size_t i = 0;
  while (i < lines.size() && (detail::trim(lines[i]).empty() || lines[i].front() == '#')) ++i;
  if (i == lines.size()) throw Error(ErrorCode::HeaderMismatch, "scorecard file has no header");
  auto header = detail::split(lines[i], ',');
  if (header.size() != 3 + kFinderDimensions || detail::trim(header[0]) != "case_id" ||
      detail::trim(header[1]) != "model_tag" || detail::trim(header[2]) != "rater_id")
    throw Error(ErrorCode::HeaderMismatch, "expected case_id,model_tag,rater_id and the eight dimensions");
  std::vector<FinderDimension> cols;
  for (std::size_t c = 3; c < header.size(); ++c) {
    auto d = finder_dimension_from_name(header[c]);
    if (!d || std::find(cols.begin(), cols.end(), *d) != cols.end())
      throw Error(ErrorCode::HeaderMismatch, "bad dimension column '" + std::string(header[c]) + "'");
    cols.push_back(*d);
  }

  std::vector<FinderScorecard> out;
  for (++i; i < lines.size(); ++i) {
    if (detail::trim(lines[i]).empty()) continue;
    auto f = detail::split(lines[i], ',');
    if (f.size() != header.size())
      throw Error(ErrorCode::MalformedRow, "line " + std::to_string(i + 1) + ": expected " +
                                               std::to_string(header.size()) + " fields");
    FinderScorecard card{std::string(detail::trim(f[0])), std::string(detail::trim(f[1])),
                         std::string(detail::trim(f[2])), {}};
    for (std::size_t c = 0; c < cols.size(); ++c) {
      auto v = detail::trim(f[c + 3]);
      if (v.empty()) continue;  // reported as incomplete by aggregate_finder
      try {
        std::size_t used = 0;
        int score = std::stoi(std::string(v), &used);
        if (used != v.size()) throw std::invalid_argument("trailing");
        card.scores[cols[c]] = score;
      } catch (const std::exception&) {
        throw Error(ErrorCode::MalformedRow, "line " + std::to_string(i + 1) + ": score '" + std::string(v) + "'");
      }
    }
    out.push_back(std::move(card));
  }
  return out;
}

FinderReport aggregate_finder(const std::vector<FinderScorecard>& cards) {
  if (cards.empty()) throw Error(ErrorCode::EmptyInput, "no scorecards");
  std::map<std::string, std::map<FinderDimension, std::vector<double>>> groups;
  for (const auto& c : cards) {
    for (auto d : all_finder_dimensions()) {
      auto it = c.scores.find(d);
      if (it == c.scores.end())
        throw Error(ErrorCode::IncompleteScorecard, "case " + c.case_id + " (" + c.model_tag + ") lacks " +
                                                        std::string(to_string(d)));
      if (it->second < 1 || it->second > 5)
        throw Error(ErrorCode::IncompleteScorecard, "case " + c.case_id + " (" + c.model_tag + ") scores " +
                                                        std::string(to_string(d)) + " outside 1..5");
      groups[c.model_tag][d].push_back(static_cast<double>(it->second));
    }
  }

  FinderReport rep;
  for (const auto& [model, dims] : groups) {
    for (const auto& [d, v] : dims) {
      DimensionSummary s;
      s.n = v.size();
      s.mean = mean_of(v);
      if (s.n < 2) {
        s.degenerate = true;
        s.ci_lower = s.ci_upper = s.mean;
      } else {
        s.sd = std::sqrt(var_of(v, s.mean));
        boost::math::students_t dist(static_cast<double>(s.n - 1));
        double tq = boost::math::quantile(dist, 0.975);
        s.half_width = tq * s.sd / std::sqrt(static_cast<double>(s.n));
        s.ci_lower = s.mean - s.half_width;
        s.ci_upper = s.mean + s.half_width;
      }
      rep.summaries[model][d] = s;
    }
  }

  for (auto a = groups.begin(); a != groups.end(); ++a) {
    for (auto b = std::next(a); b != groups.end(); ++b) {
      for (auto d : all_finder_dimensions()) {
        const auto& va = a->second.at(d);
        const auto& vb = b->second.at(d);
        PairwiseComparison cmp{a->first, b->first, d, {}, "welch"};
        if (va.size() < 2 || vb.size() < 2) {
          cmp.method = "insufficient";
          cmp.test.p = std::numeric_limits<double>::quiet_NaN();
          cmp.test.t = std::numeric_limits<double>::quiet_NaN();
        } else {
          try {
            cmp.test = compare_groups(va, vb);
          } catch (const Error& e) {
            if (e.code() != ErrorCode::DegenerateVariance) throw;
            cmp.method = "constant";
            double diff = mean_of(va) - mean_of(vb);
            cmp.test.df = static_cast<double>(va.size() + vb.size() - 2);
            if (diff == 0.0) {
              cmp.test.t = 0.0;
              cmp.test.p = 1.0;
            } else {
              cmp.test.t = diff > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
              cmp.test.p = 0.0;
            }
          }
        }
        rep.comparisons.push_back(std::move(cmp));
      }
    }
  }
  return rep;
}

namespace {

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json t_json(double t) {
  if (std::isnan(t)) return nullptr;
  if (std::isinf(t)) return t > 0 ? "inf" : "-inf";
  return t;
}

} // namespace

std::string finder_report_json(const FinderReport& rep, std::string_view config_hash) {
  json doc;
  doc["schema"] = "rarekg.finder/1";
  doc["config_hash"] = std::string(config_hash);
  doc["models"] = json::object();
  for (const auto& [model, dims] : rep.summaries) {
    json jm = json::object();
    for (const auto& [d, s] : dims)
      jm[std::string(to_string(d))] = {{"n", s.n},           {"mean", s.mean},           {"sd", s.sd},
                                       {"ci_lower", s.ci_lower}, {"ci_upper", s.ci_upper}, {"half_width", s.half_width},
                                       {"degenerate", s.degenerate}};
    doc["models"][model] = jm;
  }
  doc["comparisons"] = json::array();
  for (const auto& c : rep.comparisons)
    doc["comparisons"].push_back({{"model_a", c.model_a},
                                  {"model_b", c.model_b},
                                  {"dimension", to_string(c.dimension)},
                                  {"t", t_json(c.test.t)},
                                  {"df", finite_or_null(c.test.df)},
                                  {"p", finite_or_null(c.test.p)},
                                  {"method", c.method}});
  return doc.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Surrogate

SurrogateFit fit_linear_surrogate(const std::vector<std::vector<double>>& x, const std::vector<double>& y,
                                  const std::vector<std::string>& names, double ridge_lambda) {
  const std::size_t n = y.size();
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "surrogate needs at least two cases");
  if (x.size() != n) throw Error(ErrorCode::InvalidArgument, "feature rows and responses differ in count");
  const std::size_t p = names.size();
  for (const auto& row : x)
    if (row.size() != p) throw Error(ErrorCode::InvalidArgument, "ragged feature matrix");
  if (!(ridge_lambda > 0.0)) throw Error(ErrorCode::InvalidArgument, "ridge penalty must be positive");

  SurrogateFit fit;
  std::vector<std::size_t> keep;
  for (std::size_t j = 0; j < p; ++j) {
    bool varies = false;
    for (std::size_t i = 1; i < n && !varies; ++i) varies = x[i][j] != x[0][j];
    if (varies) keep.push_back(j);
    else fit.dropped.push_back(names[j]);
  }
  if (keep.empty()) throw Error(ErrorCode::EmptyFeatures, "no feature column varies across cases");

  Eigen::MatrixXd X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(keep.size()));
  Eigen::VectorXd Y(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    Y(static_cast<Eigen::Index>(i)) = y[i];
    for (std::size_t c = 0; c < keep.size(); ++c)
      X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = x[i][keep[c]];
  }
  const bool constant_y = std::all_of(y.begin(), y.end(), [&](double v) { return v == y.front(); });
  const Eigen::RowVectorXd xbar = X.colwise().mean();
  const double ybar = constant_y ? y.front() : Y.mean();
  const Eigen::MatrixXd Xc = X.rowwise() - xbar;
  const Eigen::VectorXd Yc = (Y.array() - ybar).matrix();

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xc);
  fit.rank = static_cast<std::size_t>(qr.rank());
  Eigen::VectorXd beta;
  if (fit.rank == keep.size()) {
    beta = qr.solve(Yc);
  } else {
    fit.ridge = true;
    fit.ridge_lambda = ridge_lambda;
    Eigen::MatrixXd A = Xc.transpose() * Xc;
    A.diagonal().array() += ridge_lambda;
    beta = A.ldlt().solve(Xc.transpose() * Yc);
  }
  if (constant_y) beta.setZero();
  fit.intercept = ybar - xbar.dot(beta);

  const double ss_tot = Yc.squaredNorm();
  const double ss_res = (Yc - Xc * beta).squaredNorm();
  fit.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;

  for (std::size_t c = 0; c < keep.size(); ++c) fit.coefficients.emplace_back(names[keep[c]], beta(static_cast<Eigen::Index>(c)));
  std::sort(fit.coefficients.begin(), fit.coefficients.end(), [](const auto& a, const auto& b) {
    if (std::fabs(a.second) != std::fabs(b.second)) return std::fabs(a.second) > std::fabs(b.second);
    return a.first < b.first;
  });
  return fit;
}

SurrogateFit fit_global_surrogate(const std::vector<SurrogateCase>& cases, const TermId& target_disease,
                                  double ridge_lambda) {
  std::set<TermId> vocab;
  for (const auto& c : cases) vocab.insert(c.phenotypes.begin(), c.phenotypes.end());
  std::vector<std::string> names;
  for (const auto& t : vocab) names.push_back(t.str());
  std::vector<std::vector<double>> x;
  std::vector<double> y;
  for (const auto& c : cases) {
    std::vector<double> row;
    row.reserve(vocab.size());
    for (const auto& t : vocab) row.push_back(c.phenotypes.count(t) ? 1.0 : 0.0);
    x.push_back(std::move(row));
    y.push_back(c.predicted && *c.predicted == target_disease ? 1.0 : 0.0);
  }
  if (names.empty()) throw Error(ErrorCode::EmptyFeatures, "cases carry no phenotypes");
  return fit_linear_surrogate(x, y, names, ridge_lambda);
}

std::string surrogate_json(const SurrogateFit& fit, std::string_view config_hash) {
  json coefs = json::array();
  for (const auto& [name, v] : fit.coefficients) coefs.push_back({{"feature", name}, {"coefficient", v}});
  json doc{{"schema", "rarekg.surrogate/1"},
           {"config_hash", std::string(config_hash)},
           {"intercept", fit.intercept},
           {"coefficients", coefs},
           {"dropped_zero_variance", fit.dropped},
           {"rank", fit.rank},
           {"ridge", fit.ridge},
           {"ridge_lambda", fit.ridge_lambda},
           {"r_squared", fit.r_squared}};
  return doc.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Evidence

EvidenceProfile profile_evidence(const OntologyGraph& graph, const std::vector<FeatureInput>& features,
                                 std::string case_id) {
  EvidenceProfile prof;
  prof.case_id = std::move(case_id);
  for (const auto& f : features) {
    if (detail::trim(f.text).empty()) continue;
    std::optional<TermId> id;
    if (auto direct = TermId::parse(detail::trim(f.text)); direct && direct->ns() == Namespace::HP) {
      const auto* t = graph.find(*direct);
      if (t && !t->obsolete) id = direct;
    } else {
      id = map_feature_to_hpo(graph, f.text);
    }
    if (id) prof.hpo_features.emplace_back(f.text, *id);
    else prof.non_hpo_features.emplace_back(f.text, f.category);
  }
  const std::size_t total = prof.hpo_features.size() + prof.non_hpo_features.size();
  if (total == 0) throw Error(ErrorCode::EmptyFeatures, "no features to profile");
  prof.non_hpo_fraction = static_cast<double>(prof.non_hpo_features.size()) / static_cast<double>(total);
  return prof;
}

CohortSummary summarize_fractions(std::vector<double> fractions) {
  if (fractions.empty()) throw Error(ErrorCode::EmptyInput, "no fractions to summarize");
  std::sort(fractions.begin(), fractions.end());
  CohortSummary s;
  s.n = fractions.size();
  s.min = fractions.front();
  s.max = fractions.back();
  s.median = quantile_sorted(fractions, 0.5);
  s.q1 = quantile_sorted(fractions, 0.25);
  s.q3 = quantile_sorted(fractions, 0.75);
  s.iqr = s.q3 - s.q1;
  return s;
}

} // namespace rarekg
