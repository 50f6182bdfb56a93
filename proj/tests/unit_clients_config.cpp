#include <filesystem>
#include <functional>

#include <json.hpp>

#include "doctest.h"
#include "rarekg/clients.hpp"
#include "rarekg/config.hpp"
#include "support.hpp"

using namespace rarekg;
using testing::error_of;
using testing::hp;
using testing::orpha;

namespace {

namespace fs = std::filesystem;

struct StubTransport : HttpTransport {
  std::function<HttpResponse(const HttpRequest&)> reply;
  int calls = 0;
  HttpResponse send(const HttpRequest& r) override {
    ++calls;
    return reply(r);
  }
};

std::string chat_body(const std::string& content) {
  nlohmann::json j;
  j["choices"] = nlohmann::json::array({{{"message", {{"role", "assistant"}, {"content", content}}}}});
  return j.dump();
}

std::string scratch_file(const std::string& name) {
  auto dir = fs::temp_directory_path() / "rarekg_unit";
  fs::create_directories(dir);
  auto p = dir / name;
  fs::remove(p);
  return p.string();
}

ResolverConfig fixture_resolver(bool enabled) {
  ResolverConfig c;
  c.base_url = "http://resolver.invalid";
  c.cache_path = testing::data_path("resolver_cache.jsonl");
  c.enabled = enabled;
  c.requests_per_second = 0.0;
  return c;
}

} // namespace

TEST_SUITE("http plumbing") {
  TEST_CASE("request hash ignores headers") {
    HttpRequest a{"POST", "http://x/y", {{"Authorization", "Bearer one"}}, "{}"};
    HttpRequest b{"POST", "http://x/y", {{"Authorization", "Bearer two"}}, "{}"};
    CHECK(request_hash(a) == request_hash(b));
    b.body = "{ }";
    CHECK(request_hash(a) != request_hash(b));
    CHECK(request_hash(a).size() == 64);
  }

  TEST_CASE("replay store persists appends") {
    auto path = scratch_file("store.jsonl");
    {
      ReplayStore s(path);
      s.append("h1", {200, "one"});
      s.append("h2", {503, "two"});
      CHECK(s.size() == 2);
    }
    ReplayStore again(path);
    CHECK(again.size() == 2);
    CHECK(again.lookup("h2")->status == 503);
    CHECK(again.lookup("h1")->body == "one");
    CHECK_FALSE(again.lookup("h3"));
    ReplayStore memory;
    memory.append("x", {200, ""});
    CHECK(memory.size() == 1);
  }

  TEST_CASE("search request shape") {
    auto r = ResolverClient::search_request("http://resolver.invalid/", "Wilson disease");
    CHECK(r.method == "GET");
    CHECK(r.url == "http://resolver.invalid/v3/api/search?q=Wilson%20disease&category=biolink%3ADisease&limit=20");
  }
}

TEST_SUITE("resolver") {
  TEST_CASE("cache answers without the network") {
    auto stub = std::make_shared<StubTransport>();
    stub->reply = [](const HttpRequest&) { return HttpResponse{500, ""}; };
    ResolverClient client(fixture_resolver(true), stub);
    CHECK(client.resolve("Wilson disease") == orpha(905));
    CHECK(client.resolve("Cryoglobulinemic vasculitis") == orpha(91138));
    CHECK(client.resolve("Xyzzy syndrome nonexistent") == std::nullopt);
    CHECK(client.network_calls() == 0);
    CHECK(stub->calls == 0);
  }

  TEST_CASE("disabled client never calls out") {
    auto stub = std::make_shared<StubTransport>();
    stub->reply = [](const HttpRequest&) { return HttpResponse{200, "{}"}; };
    ResolverClient client(fixture_resolver(false), stub);
    CHECK(client.resolve("Turner syndrome") == std::nullopt);
    CHECK(stub->calls == 0);
  }

  TEST_CASE("live hits are cached") {
    auto cfg = fixture_resolver(true);
    cfg.cache_path = scratch_file("resolver.jsonl");
    auto stub = std::make_shared<StubTransport>();
    stub->reply = [](const HttpRequest&) {
      return HttpResponse{200, R"({"items":[{"id":"MONDO:0010200","xref":["OMIM:154700","Orphanet:558"]}]})"};
    };
    ResolverClient client(cfg, stub);
    CHECK(client.resolve("Marfan syndrome") == orpha(558));
    CHECK(client.resolve("Marfan syndrome") == orpha(558));
    CHECK(stub->calls == 1);
    CHECK(client.network_calls() == 1);
  }

  TEST_CASE("unavailable service and normalization fallback") {
    auto cfg = fixture_resolver(true);
    cfg.cache_path.clear();
    auto stub = std::make_shared<StubTransport>();
    stub->reply = [](const HttpRequest&) { return HttpResponse{503, "busy"}; };
    ResolverClient client(cfg, stub);
    CHECK(error_of([&] { client.resolve("Marfan-like thing"); }) == ErrorCode::RemoteUnavailable);

    auto table = parse_normalization_table(testing::slurp("normalization.tsv"));
    auto ps = normalize_predictions({{1, "Marfan-like thing"}, {2, "Wilson disease"}, {3, "Another"}}, table, &client);
    CHECK(ps.remote_unavailable);
    CHECK(ps.predictions.size() == 1);
    CHECK(ps.predictions[0].normalized == orpha(905));
    CHECK(stub->calls == 2);
  }

  TEST_CASE("response parsing") {
    CHECK(ResolverClient::first_orpha_hit(R"({"items":[{"id":"ORPHA:905"}]})") == orpha(905));
    CHECK(ResolverClient::first_orpha_hit(R"({"items":[]})") == std::nullopt);
    CHECK(error_of([] { ResolverClient::first_orpha_hit("<html>"); }) == ErrorCode::MalformedResponse);
  }
}

TEST_SUITE("llm client") {
  LlmEndpointConfig base_cfg(std::string replay, bool replay_only) {
    LlmEndpointConfig c;
    c.base_url = "http://llm.invalid/v1";
    c.model = "fixture-llm";
    c.replay_path = std::move(replay);
    c.replay_only = replay_only;
    c.requests_per_second = 0.0;
    return c;
  }

  TEST_CASE("record then replay") {
    auto path = scratch_file("llm.jsonl");
    auto stub = std::make_shared<StubTransport>();
    stub->reply = [](const HttpRequest& r) {
      CHECK(r.headers.at("Authorization") == "Bearer secret");
      return HttpResponse{200, chat_body("1. Wilson disease\n2. Marfan syndrome")};
    };
    auto cfg = base_cfg(path, false);
    cfg.api_key = "secret";
    LlmClient live(cfg, stub);
    CHECK(live.complete("hello", 0.0) == "1. Wilson disease\n2. Marfan syndrome");
    CHECK(live.network_calls() == 1);

    LlmClient offline(base_cfg(path, true), nullptr);
    CHECK(offline.complete("hello", 0.0) == "1. Wilson disease\n2. Marfan syndrome");
    CHECK(offline.network_calls() == 0);
    CHECK(error_of([&] { offline.complete("hello", 0.5); }) == ErrorCode::ReplayMiss);
    CHECK(testing::slurp("llm_replay.jsonl").size() > 0);
    CHECK(read_file(path).find("secret") == std::string::npos);
  }

  TEST_CASE("endpoint failures") {
    auto stub = std::make_shared<StubTransport>();
    stub->reply = [](const HttpRequest&) { return HttpResponse{502, ""}; };
    LlmClient c(base_cfg("", false), stub);
    CHECK(error_of([&] { c.complete("x", 0.0); }) == ErrorCode::EndpointUnavailable);
    stub->reply = [](const HttpRequest&) { return HttpResponse{200, "{\"nope\":1}"}; };
    CHECK(error_of([&] { c.complete("x", 0.0); }) == ErrorCode::MalformedResponse);
  }

  TEST_CASE("extraction") {
    auto stub = std::make_shared<StubTransport>();
    stub->reply = [](const HttpRequest& r) {
      auto body = nlohmann::json::parse(r.body);
      CHECK(body["temperature"] == 0.0);
      return HttpResponse{200, chat_body("- Wilson disease\n- Turner syndrome")};
    };
    LlmClient c(base_cfg("", false), stub);
    auto list = extract_list_via_llm(c, "It is probably Wilson, maybe Turner.");
    REQUIRE(list.size() == 2);
    CHECK(list[1].label == "Turner syndrome");
    CHECK(error_of([&] { extract_list_via_llm(c, "   "); }) == ErrorCode::StillUnparseable);
    stub->reply = [](const HttpRequest&) { return HttpResponse{200, chat_body("")}; };
    CHECK(error_of([&] { extract_list_via_llm(c, "Something else."); }) == ErrorCode::StillUnparseable);
  }

  TEST_CASE("fixture replay") {
    auto cfg = base_cfg(testing::data_path("llm_replay.jsonl"), true);
    LlmClient c(cfg, nullptr);
    CHECK(error_of([&] { extract_list_via_llm(c, "no list in this one"); }) == ErrorCode::ReplayMiss);
  }

  TEST_CASE("diagnosis prompt is a pure function") {
    CaseRecord c = CaseRecord::empty("P");
    c.sections[Section::ChiefComplaint] = "Tremor.";
    ContextBlock ctx;
    ctx.query = "phenotypes:HP:0001337";
    auto a = build_diagnosis_prompt(c, ctx);
    CHECK(a == build_diagnosis_prompt(c, ctx));
    CHECK(a.find("Tremor.") != std::string::npos);
    CHECK(a.find("# rarekg context v1") != std::string::npos);
  }
}

TEST_SUITE("run config") {
  const std::string kData = RAREKG_TEST_DATA;

  TEST_CASE("fixture config") {
    auto cfg = load_run_config(kData + "/config.json");
    CHECK(cfg.seed == 42);
    CHECK(cfg.synthetic.n_signal == 2);
    CHECK(cfg.inputs.hpoa.written == "annotations.hpoa");
    CHECK(fs::path(cfg.inputs.hpoa.resolved).is_absolute());
    CHECK(cfg.eval.bootstrap_resamples == 1000);
    CHECK(cfg.hash().size() == 64);
  }

  TEST_CASE("hash covers settings but not the output directory") {
    auto text = testing::slurp("config.json");
    auto a = parse_run_config(text, kData);
    auto b = parse_run_config(text, kData);
    b.set_output_dir("/tmp/elsewhere");
    CHECK(a.hash() == b.hash());
    b.set_seed(43);
    CHECK(a.hash() != b.hash());
    auto c = parse_run_config(text, kData);
    c.llm.api_key = "secret";
    CHECK(c.to_json().find("secret") == std::string::npos);
    CHECK(a.hash() == c.hash());
  }

  TEST_CASE("rejections") {
    CHECK(error_of([&] { parse_run_config("{\"bogus\":1}", kData); }) == ErrorCode::InvalidArgument);
    CHECK(error_of([&] { parse_run_config("{\"eval\":{\"k_cutoffs\":[5,1]}}", kData); }) ==
          ErrorCode::InvalidArgument);
    CHECK(error_of([&] { parse_run_config("{", kData); }) == ErrorCode::MalformedLine);
    CHECK(error_of([&] { parse_run_config("{\"inputs\":{\"hpoa\":\"missing.hpoa\"}}", kData); }) == ErrorCode::Io);
    CHECK(error_of([&] { load_run_config(kData + "/no_such.json"); }) == ErrorCode::Io);
  }

  TEST_CASE("replay mode") {
    auto cfg = load_run_config(kData + "/config_replay.json");
    auto h = cfg.hash();
    cfg.set_replay(kData + "/llm_replay.jsonl");
    CHECK(cfg.llm.replay_only);
    CHECK_FALSE(cfg.resolver.enabled);
    CHECK(h.size() == 64);
  }
}
