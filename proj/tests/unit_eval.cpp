#include <cmath>
#include <random>

#include <json.hpp>

#include "doctest.h"
#include "oracles.hpp"
#include "rarekg/eval.hpp"
#include "support.hpp"

using namespace rarekg;
using testing::error_of;
using testing::hp;
using testing::orpha;

namespace {

const testing::Fixture& fx() {
  static const testing::Fixture f = testing::load_fixture();
  return f;
}

std::vector<std::string> labels_of(const std::vector<ListEntry>& v) {
  std::vector<std::string> out;
  for (const auto& e : v) out.push_back(e.label);
  return out;
}

PredictionSet predicted(std::string id, std::vector<std::optional<TermId>> ids) {
  PredictionSet ps;
  ps.case_id = std::move(id);
  ps.model_tag = "m";
  int rank = 0;
  for (auto& t : ids) {
    ++rank;
    Prediction p;
    p.rank = rank;
    p.raw_label = t ? t->str() : "?";
    p.normalized = t;
    if (t) ps.predictions.push_back(p);
    else ps.excluded.push_back(p);
  }
  ps.raw_count = ids.size();
  return ps;
}

struct CountingResolver : LabelResolver {
  std::map<std::string, TermId> answers;
  bool fail = false;
  int calls = 0;
  std::optional<TermId> resolve(std::string_view label) override {
    ++calls;
    if (fail) throw Error(ErrorCode::RemoteUnavailable, "down");
    auto it = answers.find(std::string(label));
    if (it == answers.end()) return std::nullopt;
    return it->second;
  }
};

} // namespace

TEST_SUITE("prediction lists") {
  TEST_CASE("numbered lines win over prose") {
    auto v = parse_prediction_list(
        "Based on the findings, the differential is:\n"
        "1. Wilson disease (ORPHA:905)\n"
        "2) Prader-Willi syndrome - 40%\n"
        "3. Marfan syndrome, high confidence\n"
        "Further testing is advised.");
    CHECK(labels_of(v) == std::vector<std::string>{"Wilson disease", "Prader-Willi syndrome", "Marfan syndrome"});
    CHECK(v[2].rank == 3);
  }

  TEST_CASE("bullets and bare lines") {
    CHECK(labels_of(parse_prediction_list("- Turner syndrome\n* Marfan syndrome - confidence: 0.3\n")) ==
          std::vector<std::string>{"Turner syndrome", "Marfan syndrome"});
    CHECK(labels_of(parse_prediction_list("Candidates:\nTurner syndrome\nMarfan syndrome OMIM:154700")) ==
          std::vector<std::string>{"Turner syndrome", "Marfan syndrome"});
    CHECK(labels_of(parse_prediction_list("1. Wilson disease - high confidence")) ==
          std::vector<std::string>{"Wilson disease"});
  }

  TEST_CASE("cap and failures") {
    std::string text;
    for (int i = 1; i <= 30; ++i) text += std::to_string(i) + ". Disease " + std::to_string(i) + "\n";
    auto v = parse_prediction_list(text);
    CHECK(v.size() == kMaxPredictions);
    CHECK(v.back().label == "Disease 20");
    CHECK(error_of([] { parse_prediction_list("I cannot determine a diagnosis from this description."); }) ==
          ErrorCode::NoListFound);
    CHECK(error_of([] { parse_prediction_list(""); }) == ErrorCode::NoListFound);
  }
}

TEST_SUITE("normalization") {
  TEST_CASE("local hits, duplicates and unmapped labels") {
    auto table = fx().norm;
    auto ps = normalize_predictions(
        {{1, "Wilson disease"}, {2, "Hepatolenticular degeneration"}, {3, "Xyzzy syndrome"}, {4, "Prader-Willi syndrome"}},
        table);
    REQUIRE(ps.predictions.size() == 2);
    CHECK(ps.predictions[0].normalized == orpha(905));
    CHECK(ps.predictions[0].source == "local");
    CHECK(ps.predictions[1].rank == 4);
    REQUIRE(ps.duplicates.size() == 1);
    CHECK(ps.duplicates[0].excluded == ExclusionReason::Duplicate);
    REQUIRE(ps.excluded.size() == 1);
    CHECK(ps.excluded[0].raw_label == "Xyzzy syndrome");
    CHECK(ps.raw_count == 4);
    CHECK(error_of([&] { normalize_predictions({}, table); }) == ErrorCode::EmptyInput);
  }

  TEST_CASE("remote hits are cached and failures fall back") {
    auto table = fx().norm;
    CountingResolver remote;
    remote.answers["Mixed cryoglobulinemia, type 2"] = orpha(93554);
    auto ps = normalize_predictions({{1, "Mixed cryoglobulinemia, type 2"}, {2, "Wilson disease"}}, table, &remote);
    CHECK(ps.predictions[0].source == "remote");
    CHECK(table.lookup("mixed cryoglobulinemia,  type 2") == orpha(93554));
    CHECK(remote.calls == 1);

    CountingResolver down;
    down.fail = true;
    auto fallback = normalize_predictions({{1, "Unknown A"}, {2, "Unknown B"}, {3, "Wilson disease"}}, table, &down);
    CHECK(fallback.remote_unavailable);
    CHECK(down.calls == 1);
    CHECK(fallback.predictions.size() == 1);
    CHECK(fallback.excluded.size() == 2);
  }

  TEST_CASE("every label lands in exactly one bucket") {
    auto base = fx().norm;
    std::vector<std::string> pool = {"Wilson disease", "Wilson's disease", "Prader-Willi syndrome", "Marfan syndrome",
                                     "Nothing known", "Turner syndrome", "Also unknown"};
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 200; ++trial) {
      auto table = base;
      std::vector<ListEntry> in;
      std::size_t n = 1 + rng() % 30;
      for (std::size_t i = 0; i < n; ++i) in.push_back({static_cast<int>(i + 1), pool[rng() % pool.size()]});
      auto ps = normalize_predictions(in, table);
      CHECK(ps.predictions.size() + ps.excluded.size() + ps.duplicates.size() == std::min(n, kMaxPredictions));
      std::set<TermId> ids;
      for (const auto& p : ps.predictions) ids.insert(*p.normalized);
      CHECK(ids.size() == ps.predictions.size());
    }
  }
}

TEST_SUITE("matching") {
  TEST_CASE("exact and hierarchical credit") {
    const auto& dag = fx().orpha;
    EvalConfig exact;
    exact.hierarchical = false;
    EvalConfig depth1;
    EvalConfig any;
    any.max_ancestor_depth.reset();
    CHECK(match_diagnosis(orpha(905), orpha(905), dag, exact));
    CHECK_FALSE(match_diagnosis(orpha(91138), orpha(93554), dag, exact));
    CHECK(match_diagnosis(orpha(91138), orpha(93554), dag, depth1));
    CHECK_FALSE(match_diagnosis(orpha(93554), orpha(91138), dag, depth1));
    CHECK_FALSE(match_diagnosis(orpha(68367), orpha(93554), dag, depth1));
    CHECK(match_diagnosis(orpha(68367), orpha(93554), dag, any));
    CHECK(error_of([&] { match_diagnosis(orpha(1), orpha(424242), dag, depth1); }) == ErrorCode::UnknownDisease);
  }

  TEST_CASE("config validation") {
    EvalConfig c;
    c.k_cutoffs = {3, 1};
    CHECK(error_of([&] { c.validate(); }) == ErrorCode::InvalidArgument);
    c = {};
    c.ci_level = 1.0;
    CHECK(error_of([&] { c.validate(); }) == ErrorCode::InvalidArgument);
    c = {};
    c.bootstrap_resamples = 0;
    CHECK(error_of([&] { c.validate(); }) == ErrorCode::InvalidArgument);
    CHECK(error_of([] { EvalConfig{}.validate(); }) == std::nullopt);
  }
}

TEST_SUITE("top-k accuracy") {
  TEST_CASE("hand tally") {
    const auto& f = fx();
    std::vector<EvalCase> cases(6);
    cases[0] = {predicted("a", {orpha(905)}), orpha(905), std::string("RICH"), {"hepatic"}, false};
    cases[1] = {predicted("b", {orpha(739), orpha(91138)}), orpha(93554), std::string("FEW"), {}, false};
    cases[2] = {predicted("c", {std::nullopt, orpha(805), TermId::from("OMIM:277900")}), TermId::from("OMIM:277900"),
                std::nullopt, {"hepatic"}, false};
    cases[3] = {predicted("d", {orpha(739)}), orpha(805), std::string("FEW"), {}, false};
    cases[4] = {predicted("e", {}), orpha(805), std::nullopt, {}, true};
    cases[5] = {predicted("f", {orpha(805)}), TermId::from("OMIM:999999"), std::nullopt, {}, false};
    EvalConfig cfg;
    cfg.k_cutoffs = {1, 3};
    cfg.bootstrap_resamples = 200;
    auto rep = topk_accuracy(cases, &f.orpha, &f.xrefs, cfg);
    CHECK(rep.n_cases == 6);
    CHECK(rep.n_evaluated == 4);
    CHECK(rep.n_unevaluable == 2);
    CHECK(rep.outcomes[4].unevaluable == "UNPARSEABLE_OUTPUT");
    CHECK(rep.outcomes[5].unevaluable == "NO_ORPHA_XREF");
    CHECK(rep.outcomes[2].first_hit_rank == 3);
    CHECK(rep.overall[0].hits == 1);
    CHECK(rep.overall[1].hits == 3);
    CHECK(rep.overall[1].accuracy == 0.75);
    CHECK(rep.excluded_predictions == 1);
    CHECK(rep.strata.at("FEW").n == 2);
    CHECK(rep.strata.at("FEW").cutoffs[1].hits == 1);
    CHECK(rep.categories.at("hepatic").cutoffs[1].hits == 2);

    cfg.hierarchical = false;
    CHECK(topk_accuracy(cases, &f.orpha, &f.xrefs, cfg).overall[1].hits == 2);
  }

  TEST_CASE("accuracy is monotone in k") {
    const auto& f = fx();
    std::vector<TermId> ids;
    for (const auto& t : f.orpha.terms()) ids.push_back(t.id);
    std::mt19937_64 rng(6);
    std::vector<EvalCase> cases;
    for (int i = 0; i < 60; ++i) {
      std::vector<std::optional<TermId>> preds;
      for (int j = 0; j < 6; ++j) preds.push_back(ids[rng() % ids.size()]);
      cases.push_back({predicted("c" + std::to_string(i), preds), ids[rng() % ids.size()], std::nullopt, {}, false});
    }
    EvalConfig cfg;
    cfg.bootstrap_resamples = 100;
    auto rep = topk_accuracy(cases, &f.orpha, nullptr, cfg);
    for (std::size_t i = 1; i < rep.overall.size(); ++i) CHECK(rep.overall[i].hits >= rep.overall[i - 1].hits);
  }

  TEST_CASE("errors and reports") {
    const auto& f = fx();
    EvalConfig cfg;
    CHECK(error_of([&] { topk_accuracy({}, &f.orpha, nullptr, cfg); }) == ErrorCode::EmptyCaseSet);
    std::vector<EvalCase> no_truth = {{predicted("x", {orpha(905)}), std::nullopt, std::nullopt, {}, false}};
    CHECK(error_of([&] { topk_accuracy(no_truth, &f.orpha, nullptr, cfg); }) == ErrorCode::MissingTruth);
    std::vector<EvalCase> all_bad = {{predicted("x", {}), orpha(905), std::nullopt, {}, true}};
    CHECK(error_of([&] { topk_accuracy(all_bad, &f.orpha, nullptr, cfg); }) == ErrorCode::EmptyCaseSet);

    std::vector<EvalCase> one = {{predicted("x", {orpha(905)}), orpha(905), std::nullopt, {}, false},
                                 {predicted("y", {orpha(739)}), orpha(905), std::nullopt, {}, false}};
    auto rep = topk_accuracy(one, &f.orpha, nullptr, cfg);
    auto csv = eval_report_csv(rep, "hh");
    CHECK(csv.rfind("# config_hash=hh seed=0\n", 0) == 0);
    auto json = nlohmann::json::parse(eval_report_json(rep, "hh"));
    CHECK(json["config_hash"] == "hh");
  }
}

TEST_SUITE("bootstrap") {
  TEST_CASE("constant input has a zero-width interval") {
    auto r = bootstrap_ci({0.7, 0.7, 0.7, 0.7}, 500, 0.95, 1);
    CHECK(r.mean == 0.7);
    CHECK(r.lower == 0.7);
    CHECK(r.upper == 0.7);
    CHECK(r.std_error == 0.0);
  }

  TEST_CASE("deterministic per seed and brackets the mean") {
    std::vector<double> v;
    std::mt19937_64 rng(4);
    for (int i = 0; i < 80; ++i) v.push_back(rng() % 2 ? 1.0 : 0.0);
    auto a = bootstrap_ci(v, 1000, 0.95, 11);
    auto b = bootstrap_ci(v, 1000, 0.95, 11);
    CHECK(a.lower == b.lower);
    CHECK(a.upper == b.upper);
    CHECK(a.std_error == b.std_error);
    CHECK(a.lower <= a.mean);
    CHECK(a.mean <= a.upper);
    CHECK(a.half_width == doctest::Approx((a.upper - a.lower) / 2));
    CHECK(a.resamples == 1000);
    auto narrow = bootstrap_ci(v, 1000, 0.5, 11);
    CHECK(narrow.upper - narrow.lower <= a.upper - a.lower);
  }

  TEST_CASE("shared resamples keep nested columns ordered") {
    std::vector<double> k1, k5;
    std::mt19937_64 rng(9);
    for (int i = 0; i < 50; ++i) {
      double hit5 = rng() % 3 ? 1.0 : 0.0;
      k5.push_back(hit5);
      k1.push_back(hit5 > 0 && rng() % 2 ? 1.0 : 0.0);
    }
    auto r = bootstrap_ci_shared({k1, k5}, 300, 0.95, 5);
    CHECK(r[0].lower <= r[1].lower);
    CHECK(r[0].upper <= r[1].upper);
  }

  TEST_CASE("errors") {
    CHECK(error_of([] { bootstrap_ci({}, 10, 0.95, 0); }) == ErrorCode::EmptyInput);
    CHECK(error_of([] { bootstrap_ci({1.0}, 0, 0.95, 0); }) == ErrorCode::InvalidArgument);
    CHECK(error_of([] { bootstrap_ci({1.0}, 10, 1.5, 0); }) == ErrorCode::InvalidArgument);
  }

  TEST_CASE("quantile examples") {
    CHECK(quantile_sorted({1, 2, 3, 4}, 0.5) == 2.5);
    CHECK(quantile_sorted({1, 2, 3, 4}, 0.0) == 1.0);
    CHECK(quantile_sorted({1, 2, 3, 4}, 1.0) == 4.0);
    CHECK(quantile_sorted({5}, 0.3) == 5.0);
    CHECK(quantile_sorted({0, 10}, 0.25) == 2.5);
  }
}

TEST_SUITE("group comparison") {
  TEST_CASE("welch examples") {
    auto r = compare_groups({1, 2, 3, 4, 5}, {1.5, 2.5, 2.0});
    CHECK(r.t == doctest::Approx(1.3093073414159542).epsilon(1e-9));
    CHECK(r.p == doctest::Approx(0.24572103030770182).epsilon(1e-6));
    auto same = compare_groups({1, 2, 3}, {3, 2, 1});
    CHECK(same.t == 0.0);
    CHECK(same.p == doctest::Approx(1.0));
    CHECK(error_of([] { compare_groups({1}, {1, 2}); }) == ErrorCode::InvalidArgument);
    CHECK(error_of([] { compare_groups({2, 2}, {3, 3}); }) == ErrorCode::DegenerateVariance);
  }
}

TEST_SUITE("finder") {
  std::string header() {
    std::string h = "case_id,model_tag,rater_id";
    for (auto d : all_finder_dimensions()) h += "," + std::string(to_string(d));
    return h + "\n";
  }

  TEST_CASE("single scorecard") {
    auto cards = parse_finder_csv(header() + "c1,m,r1,5,4,3,2,1,5,4,3\n");
    REQUIRE(cards.size() == 1);
    auto rep = aggregate_finder(cards);
    const auto& s = rep.summaries.at("m").at(FinderDimension::CaseComprehension);
    CHECK(s.n == 1);
    CHECK(s.mean == 5.0);
    CHECK(s.degenerate);
    CHECK(s.ci_lower == 5.0);
    CHECK(s.ci_upper == 5.0);
    CHECK(rep.comparisons.empty());
  }

  TEST_CASE("fixture separates the two models") {
    auto rep = aggregate_finder(parse_finder_csv(testing::slurp("finder_scorecards.csv")));
    CHECK(rep.summaries.size() == 2);
    CHECK(rep.comparisons.size() == kFinderDimensions);
    for (const auto& c : rep.comparisons) {
      CHECK(c.model_a == "model-a");
      CHECK(c.model_b == "model-b");
      if (c.method == "welch") CHECK(c.test.p < 0.001);
      CHECK(c.test.t > 0.0);
    }
    auto json = nlohmann::json::parse(finder_report_json(rep, "h"));
    CHECK(json["config_hash"] == "h");
  }

  TEST_CASE("constant groups") {
    std::string csv = header();
    for (int i = 0; i < 3; ++i) {
      csv += "c" + std::to_string(i) + ",a,r,4,4,4,4,4,4,4,4\n";
      csv += "c" + std::to_string(i) + ",b,r,3,3,3,3,3,3,3,3\n";
    }
    auto rep = aggregate_finder(parse_finder_csv(csv));
    for (const auto& c : rep.comparisons) {
      CHECK(c.method == "constant");
      CHECK(c.test.p == 0.0);
    }
  }

  TEST_CASE("malformed scorecards") {
    CHECK(error_of([] { parse_finder_csv("case_id,model_tag\nx,y\n"); }) == ErrorCode::HeaderMismatch);
    CHECK(error_of([&] { aggregate_finder(parse_finder_csv(header() + "c1,m,r1,5,4,3,2,1,5,4,9\n")); }) ==
          ErrorCode::IncompleteScorecard);
    CHECK(error_of([&] { aggregate_finder(parse_finder_csv(header() + "c1,m,r1,5,4,3,2,1,5,4,\n")); }) ==
          ErrorCode::IncompleteScorecard);
    CHECK(finder_dimension_from_name(to_string(FinderDimension::HarmPotential)) == FinderDimension::HarmPotential);
  }
}

TEST_SUITE("surrogate") {
  TEST_CASE("perfect single predictor") {
    std::vector<std::vector<double>> x = {{0, 1}, {1, 0}, {1, 1}, {0, 0}, {1, 0}, {0, 1}};
    std::vector<double> y;
    for (const auto& r : x) y.push_back(r[0]);
    auto fit = fit_linear_surrogate(x, y, {"a", "b"});
    CHECK_FALSE(fit.ridge);
    CHECK(fit.coefficients[0].first == "a");
    CHECK(fit.coefficients[0].second == doctest::Approx(1.0));
    CHECK(std::abs(fit.coefficients[1].second) < 1e-9);
    CHECK(fit.r_squared == doctest::Approx(1.0));
  }

  TEST_CASE("constant columns are dropped; duplicate columns trigger ridge") {
    std::vector<std::vector<double>> x = {{1, 0, 0}, {1, 1, 1}, {1, 0, 0}, {1, 1, 1}};
    std::vector<double> y = {0, 1, 0, 1};
    auto fit = fit_linear_surrogate(x, y, {"const", "p", "q"});
    CHECK(fit.dropped == std::vector<std::string>{"const"});
    CHECK(fit.ridge);
    CHECK(fit.rank == 1);
    CHECK(fit.coefficients.size() == 2);
  }

  TEST_CASE("constant response gives zero coefficients") {
    auto fit = fit_linear_surrogate({{0, 1}, {1, 0}, {1, 1}}, {0.5, 0.5, 0.5}, {"a", "b"});
    CHECK(fit.intercept == doctest::Approx(0.5));
    for (const auto& [name, c] : fit.coefficients) CHECK(std::abs(c) < 1e-9);
  }

  TEST_CASE("errors") {
    CHECK(error_of([] { fit_linear_surrogate({{1}}, {1}, {"a"}); }) == ErrorCode::InvalidArgument);
    CHECK(error_of([] { fit_linear_surrogate({{1, 2}, {1}}, {1, 0}, {"a", "b"}); }) == ErrorCode::InvalidArgument);
    CHECK(error_of([] { fit_linear_surrogate({{1}, {1}}, {1, 0}, {"a"}); }) == ErrorCode::EmptyFeatures);
  }

  TEST_CASE("global surrogate over phenotype indicators") {
    std::vector<SurrogateCase> cases;
    for (int i = 0; i < 12; ++i) {
      SurrogateCase c;
      if (i % 2) c.phenotypes.insert(hp(200032));
      if (i % 3 == 0) c.phenotypes.insert(hp(1250));
      c.predicted = i % 2 ? orpha(905) : orpha(805);
      cases.push_back(c);
    }
    auto fit = fit_global_surrogate(cases, orpha(905));
    CHECK(fit.coefficients[0].first == "HP:0200032");
    CHECK(fit.coefficients[0].second == doctest::Approx(1.0));
  }
}

TEST_SUITE("evidence") {
  TEST_CASE("feature split") {
    const auto& g = fx().hp;
    auto p = profile_evidence(g,
                              {{"Seizure", std::nullopt},
                               {"Sildenafil therapy", std::string("treatment")},
                               {"Cirrhosis", std::nullopt},
                               {"Lives near a factory", std::nullopt}},
                              "E");
    CHECK(p.hpo_features.size() == 2);
    CHECK(p.non_hpo_features.size() == 2);
    CHECK(p.non_hpo_features[0].second == "treatment");
    CHECK(p.non_hpo_fraction == 0.5);
    CHECK(error_of([&] { profile_evidence(g, {}); }) == ErrorCode::EmptyFeatures);
  }

  TEST_CASE("cohort summary") {
    auto s = summarize_fractions({0.4, 0.0, 3.0 / 13.0});
    CHECK(s.n == 3);
    CHECK(s.median == doctest::Approx(0.230769).epsilon(1e-5));
    CHECK(s.q1 == doctest::Approx(0.115385).epsilon(1e-5));
    CHECK(s.q3 == doctest::Approx(0.315385).epsilon(1e-5));
    CHECK(s.iqr == doctest::Approx(s.q3 - s.q1));
    CHECK(s.min == 0.0);
    CHECK(s.max == 0.4);
    CHECK(error_of([] { summarize_fractions({}); }) == ErrorCode::EmptyInput);
  }
}
