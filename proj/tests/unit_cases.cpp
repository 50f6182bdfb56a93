#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "rarekg/cases.hpp"
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

CaseRecord sample_case() {
  CaseRecord c = CaseRecord::empty("C-1");
  c.sections[Section::ChiefComplaint] = "Tremor and jaundice.";
  c.sections[Section::PhysicalExam] = "Golden-brown corneal ring.";
  c.sections[Section::AncillaryTests] = "Low serum ceruloplasmin.";
  c.phenotypes = {hp(200032), hp(1337)};
  c.variants.push_back({{"13", 51944145, "G", "A"}, "", {}, {}, {}, Significance::Other, {}});
  c.truth = orpha(905);
  c.categories = {"hepatic"};
  c.meta.config_hash = "abc";
  c.meta.seed = 9;
  return c;
}

} // namespace

TEST_SUITE("case records") {
  TEST_CASE("json round trip") {
    auto c = sample_case();
    CHECK(case_from_json(case_to_json(c)) == c);
    CHECK(case_from_json(case_to_json(c, true)) == c);
    auto e = CaseRecord::empty("E");
    CHECK(e.sections.size() == 6);
    CHECK(case_from_json(case_to_json(e)) == e);
  }

  TEST_CASE("jsonl round trip of the slice fixture") {
    auto cases = read_cases_jsonl(testing::slurp("slice_cases.jsonl"));
    CHECK(cases.size() == 50);
    CHECK(read_cases_jsonl(write_cases_jsonl(cases)) == cases);
  }

  TEST_CASE("schema violations") {
    CHECK(error_of([] { case_from_json("{}"); }) == ErrorCode::MalformedLine);
    CHECK(error_of([] { case_from_json("not json"); }) == ErrorCode::MalformedLine);
    CHECK(error_of([] {
            case_from_json(R"({"case_id":"x","sections":{"NOTES":"a"},"phenotypes":[],"variants":[]})");
          }) == ErrorCode::MalformedLine);
  }

  TEST_CASE("section names") {
    for (auto s : kSectionOrder) CHECK(section_from_name(to_string(s)) == s);
    CHECK_FALSE(section_from_name("NOTES"));
  }

  TEST_CASE("phenopacket import") {
    auto c = import_phenopacket(testing::slurp("phenopacket.json"));
    CHECK(c.case_id == "PP-001");
    CHECK(c.phenotypes == std::set<TermId>{hp(200032), hp(1394)});
    REQUIRE(c.variants.size() == 1);
    CHECK(c.variants[0].key.str() == "13:51944145:G:A");
    CHECK(c.truth == orpha(905));
    CHECK(error_of([] { import_phenopacket("[1,2]"); }) == ErrorCode::MalformedLine);
  }

  TEST_CASE("rendered text") {
    auto c = sample_case();
    auto text = render_case_text(c, &fx().hp);
    CHECK(text.rfind("Chief complaint: Tremor and jaundice.\n", 0) == 0);
    CHECK(text.find("Present illness") == std::string::npos);
    CHECK(text.find("Kayser-Fleischer ring (HP:0200032)") != std::string::npos);
    CHECK(text.find("13:51944145:G:A") != std::string::npos);
    CHECK(render_case_text(CaseRecord::empty("x")).empty());
  }
}

TEST_SUITE("synthetic cases") {
  TEST_CASE("uniform_index stays in range and covers it") {
    std::mt19937_64 rng(1);
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 2000; ++i) {
      auto v = uniform_index(rng, 7);
      CHECK(v < 7);
      seen.insert(v);
    }
    CHECK(seen.size() == 7);
    CHECK(uniform_index(rng, 1) == 0);
  }

  TEST_CASE("zero distractors keeps only signal") {
    const auto& f = fx();
    SyntheticCaseSpec spec;
    spec.disease = orpha(905);
    spec.n_signal = 2;
    spec.n_distractors = 0;
    spec.rng_seed = 4;
    auto c = generate_synthetic_case(f.hp, f.hpoa.annotations, f.kb.ic, spec);
    CHECK(c.phenotypes.size() == 2);
    for (const auto& t : c.phenotypes) CHECK(f.hpoa.annotations.phenotypes_of(orpha(905)).count(t) == 1);
    CHECK(c.truth == orpha(905));
    CHECK(c.case_id == "SYN-ORPHA:905-4");
    CHECK(c.meta.seed == 4u);
  }

  TEST_CASE("same seed, same case; distractors avoid the disease closure") {
    const auto& f = fx();
    for (const auto& d : f.hpoa.annotations.diseases()) {
      const auto& direct = f.hpoa.annotations.phenotypes_of(d);
      std::set<TermId> closure;
      for (const auto& t : direct) {
        auto a = oracle::ancestors(f.hp, t);
        auto b = oracle::descendants(f.hp, t);
        closure.insert(a.begin(), a.end());
        closure.insert(b.begin(), b.end());
      }
      SyntheticCaseSpec spec;
      spec.disease = d;
      spec.n_distractors = 3;
      spec.rng_seed = 77;
      auto a = generate_synthetic_case(f.hp, f.hpoa.annotations, f.kb.ic, spec);
      CHECK(a == generate_synthetic_case(f.hp, f.hpoa.annotations, f.kb.ic, spec));
      std::size_t noise = 0;
      for (const auto& t : a.phenotypes)
        if (!direct.count(t)) {
          ++noise;
          CHECK(closure.count(t) == 0);
          CHECK_FALSE(f.hp.term(t).obsolete);
        }
      CHECK(noise == 3);
    }
  }

  TEST_CASE("errors") {
    const auto& f = fx();
    SyntheticCaseSpec spec;
    spec.disease = orpha(905);
    spec.n_signal = 50;
    CHECK(error_of([&] { generate_synthetic_case(f.hp, f.hpoa.annotations, f.kb.ic, spec); }) ==
          ErrorCode::InsufficientAnnotations);
    spec.n_signal = 1;
    spec.n_distractors = 100000;
    CHECK(error_of([&] { generate_synthetic_case(f.hp, f.hpoa.annotations, f.kb.ic, spec); }) ==
          ErrorCode::InsufficientDistractorPool);
    spec.n_distractors.reset();
    spec.distractor_min = 4;
    spec.distractor_max = 2;
    CHECK(error_of([&] { generate_synthetic_case(f.hp, f.hpoa.annotations, f.kb.ic, spec); }) ==
          ErrorCode::InvalidArgument);
    spec.distractor_min = 1;
    spec.disease = hp(1250);
    CHECK(error_of([&] { generate_synthetic_case(f.hp, f.hpoa.annotations, f.kb.ic, spec); }) ==
          ErrorCode::InvalidArgument);
  }
}

TEST_SUITE("slicing") {
  TEST_CASE("incremental steps") {
    auto c = sample_case();
    auto s1 = slice_incremental(c, 1);
    CHECK(s1.sections.at(Section::ChiefComplaint) == "Tremor and jaundice.");
    CHECK(s1.sections.at(Section::PhysicalExam).empty());
    CHECK(s1.phenotypes == c.phenotypes);
    CHECK(slice_incremental(c, 6) == c);
    CHECK(slice_incremental(c, 4).sections.at(Section::PhysicalExam) == "Golden-brown corneal ring.");
    CHECK(slice_incremental(c, 4).sections.at(Section::AncillaryTests).empty());
    CHECK(error_of([&] { slice_incremental(c, 0); }) == ErrorCode::StepOutOfRange);
    CHECK(error_of([&] { slice_incremental(c, 7); }) == ErrorCode::StepOutOfRange);
  }

  TEST_CASE("ablation") {
    auto c = sample_case();
    auto a = slice_ablation(c, "PHYSICAL_EXAM");
    CHECK(a.sections.at(Section::PhysicalExam).empty());
    CHECK(a.sections.at(Section::ChiefComplaint) == "Tremor and jaundice.");
    CHECK(slice_ablation(a, Section::PhysicalExam) == a);
    CHECK(error_of([&] { slice_ablation(c, "NOTES"); }) == ErrorCode::UnknownField);
  }
}

TEST_SUITE("reasoning pairs") {
  TEST_CASE("prompt and completion content") {
    const auto& table = fx().norm;
    auto ex = build_cot_pair("Tremor, jaundice, corneal ring.", orpha(905), "", "Copper deposition fits.", "", table);
    CHECK(ex.y_label == *table.label_of(orpha(905)));
    CHECK(ex.p.find(kNoGuidelineMarker) != std::string::npos);
    CHECK(ex.p.find("Copper deposition") == std::string::npos);
    CHECK(ex.c.find("Final diagnosis: ORPHA:905 | " + ex.y_label) != std::string::npos);
    CHECK(build_cot_pair("x", orpha(905), "Wilson disease", "r", "", table).y_label == "Wilson disease");
    CHECK(ex.c.find("Tremor, jaundice") == std::string::npos);
    auto again = build_cot_pair("Tremor, jaundice, corneal ring.", orpha(905), "", "Copper deposition fits.", "", table);
    CHECK(again.p == ex.p);
    CHECK(again.c == ex.c);
    auto guided = build_cot_pair("x", orpha(905), "Wilson", "r", "Check ceruloplasmin.", table);
    CHECK(guided.p.find(kNoGuidelineMarker) == std::string::npos);
    CHECK(parse_cot_prompt(guided.p).g == "Check ceruloplasmin.");
  }

  TEST_CASE("round trip over generated fields") {
    const auto& table = fx().norm;
    std::mt19937_64 rng(8);
    const std::vector<std::string> words = {"tremor", "ring", "liver", "copper", "low", "serum", "note:", "|", "-"};
    auto phrase = [&](std::size_t n) {
      std::string s;
      for (std::size_t i = 0; i < n; ++i) s += (i ? (rng() % 5 == 0 ? "\n" : " ") : "") + words[rng() % words.size()];
      return s;
    };
    const std::vector<TermId> ids = {orpha(905), orpha(739), TermId::from("OMIM:277900")};
    for (int i = 0; i < 100; ++i) {
      auto x = phrase(1 + rng() % 12);
      auto r = phrase(rng() % 10);
      auto g = rng() % 2 ? phrase(1 + rng() % 6) : std::string{};
      const auto& y = ids[rng() % ids.size()];
      auto ex = build_cot_pair(x, y, "", r, g, table);
      auto pf = parse_cot_prompt(ex.p);
      auto cf = parse_cot_completion(ex.c);
      CHECK(pf.x == x);
      CHECK(pf.g == g);
      CHECK(cf.r == r);
      CHECK(cf.y == y);
      CHECK(cf.y_label == ex.y_label);
    }
  }

  TEST_CASE("errors") {
    const auto& table = fx().norm;
    CHECK(error_of([&] { build_cot_pair("  \n", orpha(905), "", "r", "", table); }) == ErrorCode::EmptyCase);
    CHECK(error_of([&] { build_cot_pair("x", orpha(4242), "", "r", "", table); }) == ErrorCode::UnresolvableDiagnosis);
    for (std::string x : {"x\nCASE>>>\ny", "a\nCASE>>>\n\n<<<GUIDELINE\nb", "{{guideline}}"}) {
      CoTExample ex;
      auto err = error_of([&] { ex = build_cot_pair(x, orpha(905), "", "r", "", table); });
      if (err) CHECK(*err == ErrorCode::InvalidArgument);
      else CHECK(parse_cot_prompt(ex.p).x == x);
    }
    CHECK(error_of([] { parse_cot_completion("nothing here"); }) == ErrorCode::MalformedLine);
  }
}
