#include "rarekg/clients.hpp"

#include <fstream>
#include <thread>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <json.hpp>

#include "hash.hpp"
#include "prompts_generated.hpp"
#include "rarekg/error.hpp"
#include "text.hpp"

namespace rarekg {

using nlohmann::json;

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // path and query, starting with '/'
};

SplitUrl split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error(ErrorCode::InvalidArgument, "URL lacks a scheme: " + url);
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

std::string url_encode(std::string_view s) {
  static const char* hex = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : s) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
      out.push_back(static_cast<char>(c));
    } else {
      out.push_back('%');
      out.push_back(hex[c >> 4]);
      out.push_back(hex[c & 0xf]);
    }
  }
  return out;
}

std::string trim_slash(std::string s) {
  while (!s.empty() && s.back() == '/') s.pop_back();
  return s;
}

} // namespace

HttpResponse HttplibTransport::send(const HttpRequest& request) {
  auto parts = split_url(request.url);
  httplib::Client cli(parts.origin);
  auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout_);
  auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout_ - secs);
  cli.set_connection_timeout(secs.count(), usecs.count());
  cli.set_read_timeout(secs.count(), usecs.count());
  cli.set_write_timeout(secs.count(), usecs.count());
  httplib::Headers headers(request.headers.begin(), request.headers.end());

  httplib::Result res = request.method == "POST"
                            ? cli.Post(parts.path, headers, request.body, "application/json")
                            : cli.Get(parts.path, headers);
  if (!res) throw Error(ErrorCode::RemoteUnavailable, request.url + ": " + httplib::to_string(res.error()));
  return {res->status, res->body};
}

std::string request_hash(const HttpRequest& request) {
  return detail::sha256_hex(request.method + "\n" + request.url + "\n" + request.body);
}

// ---------------------------------------------------------------------------

ReplayStore::ReplayStore(std::string path) : path_(std::move(path)) {
  if (path_.empty()) return;
  std::ifstream in(path_);
  if (!in) return;  // created on first append
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    try {
      auto j = json::parse(line);
      const auto& r = j.at("response");
      records_[j.at("request_hash").get<std::string>()] = {r.at("status").get<int>(), r.at("body").get<std::string>()};
    } catch (const json::exception& e) {
      throw Error(ErrorCode::MalformedLine, path_ + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

std::optional<HttpResponse> ReplayStore::lookup(const std::string& hash) const {
  std::lock_guard lock(mu_);
  auto it = records_.find(hash);
  if (it == records_.end()) return std::nullopt;
  return it->second;
}

void ReplayStore::append(const std::string& hash, const HttpResponse& response) {
  std::lock_guard lock(mu_);
  if (!records_.emplace(hash, response).second) return;
  if (path_.empty()) return;
  std::ofstream out(path_, std::ios::app);
  if (!out) throw Error(ErrorCode::Io, "cannot append to " + path_);
  json j{{"request_hash", hash}, {"response", {{"status", response.status}, {"body", response.body}}}};
  out << j.dump() << "\n";
}

std::size_t ReplayStore::size() const {
  std::lock_guard lock(mu_);
  return records_.size();
}

RateLimiter::RateLimiter(double requests_per_second) {
  if (requests_per_second > 0.0)
    interval_ = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
        std::chrono::duration<double>(1.0 / requests_per_second));
}

void RateLimiter::acquire() {
  std::chrono::steady_clock::time_point slot;
  {
    std::lock_guard lock(mu_);
    auto now = std::chrono::steady_clock::now();
    slot = std::max(now, next_);
    next_ = slot + interval_;
  }
  std::this_thread::sleep_until(slot);
}

RateLimiter& limiter_for(const std::string& base_url, double requests_per_second) {
  static std::mutex mu;
  static std::map<std::string, std::unique_ptr<RateLimiter>> limiters;
  std::lock_guard lock(mu);
  auto& slot = limiters[base_url];
  if (!slot) slot = std::make_unique<RateLimiter>(requests_per_second);
  return *slot;
}

// ---------------------------------------------------------------------------
// Resolver

ResolverClient::ResolverClient(ResolverConfig cfg, std::shared_ptr<HttpTransport> transport)
    : cfg_(std::move(cfg)), transport_(std::move(transport)), cache_(cfg_.cache_path) {}

HttpRequest ResolverClient::search_request(const std::string& base_url, std::string_view label) {
  HttpRequest r;
  r.method = "GET";
  r.url = trim_slash(base_url) + "/v3/api/search?q=" + url_encode(detail::trim(label)) +
          "&category=biolink%3ADisease&limit=20";
  r.headers["Accept"] = "application/json";
  return r;
}

std::optional<TermId> ResolverClient::first_orpha_hit(std::string_view body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedResponse, std::string("resolver: ") + e.what());
  }
  auto items = j.find("items");
  if (!j.is_object() || items == j.end() || !items->is_array())
    throw Error(ErrorCode::MalformedResponse, "resolver: response has no items array");
  for (const auto& item : *items) {
    if (!item.is_object()) continue;
    std::vector<std::string> candidates;
    if (auto id = item.find("id"); id != item.end() && id->is_string()) candidates.push_back(id->get<std::string>());
    if (auto xr = item.find("xref"); xr != item.end() && xr->is_array())
      for (const auto& x : *xr)
        if (x.is_string()) candidates.push_back(x.get<std::string>());
    for (const auto& c : candidates) {
      auto t = TermId::parse_lenient(c);
      if (t && t->ns() == Namespace::ORPHA) return t;
    }
  }
  return std::nullopt;
}

std::optional<TermId> ResolverClient::resolve(std::string_view label) {
  if (detail::trim(label).empty()) return std::nullopt;
  auto req = search_request(cfg_.base_url, label);
  auto hash = request_hash(req);
  if (auto hit = cache_.lookup(hash)) return first_orpha_hit(hit->body);
  if (!cfg_.enabled || !transport_) return std::nullopt;

  limiter_for(cfg_.base_url, cfg_.requests_per_second).acquire();
  ++network_calls_;
  auto resp = transport_->send(req);
  if (resp.status < 200 || resp.status >= 300)
    throw Error(ErrorCode::RemoteUnavailable, "resolver returned HTTP " + std::to_string(resp.status));
  auto id = first_orpha_hit(resp.body);
  cache_.append(hash, resp);
  return id;
}

std::optional<TermId> resolve_remote(ResolverClient& client, std::string_view label) { return client.resolve(label); }

// ---------------------------------------------------------------------------
// LLM

LlmClient::LlmClient(LlmEndpointConfig cfg, std::shared_ptr<HttpTransport> transport)
    : cfg_(std::move(cfg)), transport_(std::move(transport)), replay_(cfg_.replay_path) {}

HttpRequest LlmClient::chat_request(const LlmEndpointConfig& cfg, std::string_view prompt, double temperature) {
  HttpRequest r;
  r.method = "POST";
  r.url = trim_slash(cfg.base_url) + "/chat/completions";
  r.headers["Content-Type"] = "application/json";
  if (!cfg.api_key.empty()) r.headers["Authorization"] = "Bearer " + cfg.api_key;
  json body{{"model", cfg.model},
            {"messages", json::array({{{"role", "user"}, {"content", std::string(prompt)}}})},
            {"temperature", temperature},
            {"max_tokens", cfg.max_tokens}};
  r.body = body.dump();
  return r;
}

std::string LlmClient::complete(std::string_view prompt, double temperature) {
  auto req = chat_request(cfg_, prompt, temperature);
  auto hash = request_hash(req);
  std::optional<HttpResponse> resp = replay_.lookup(hash);
  if (!resp) {
    if (cfg_.replay_only || !transport_)
      throw Error(ErrorCode::ReplayMiss, "no recorded completion for request " + hash.substr(0, 16));
    limiter_for(cfg_.base_url, cfg_.requests_per_second).acquire();
    ++network_calls_;
    try {
      resp = transport_->send(req);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::RemoteUnavailable) throw Error(ErrorCode::EndpointUnavailable, e.what());
      throw;
    }
    if (resp->status < 200 || resp->status >= 300)
      throw Error(ErrorCode::EndpointUnavailable, "LLM endpoint returned HTTP " + std::to_string(resp->status));
    replay_.append(hash, *resp);
  }
  try {
    auto j = json::parse(resp->body);
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedResponse, std::string("LLM response: ") + e.what());
  }
}

namespace {

// Single pass, so substituted text is never rescanned for placeholders.
std::string substitute(std::string_view tmpl, const std::map<std::string, std::string>& values) {
  std::string out;
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    auto open = tmpl.find("{{", pos);
    auto close = open == std::string_view::npos ? open : tmpl.find("}}", open);
    if (close == std::string_view::npos) {
      out.append(tmpl.substr(pos));
      break;
    }
    out.append(tmpl.substr(pos, open - pos));
    auto it = values.find(std::string(tmpl.substr(open + 2, close - open - 2)));
    if (it == values.end()) throw Error(ErrorCode::Internal, "prompt template has an unknown placeholder");
    out += it->second;
    pos = close + 2;
  }
  return out;
}

} // namespace

std::string build_diagnosis_prompt(const CaseRecord& c, const ContextBlock& context, const OntologyGraph* ontology) {
  return substitute(detail::kDiagnosePromptV1, {{"case", render_case_text(c, ontology)},
                                                {"context", serialize_context(context, ContextForm::Text)}});
}

std::string build_extraction_prompt(std::string_view raw_output) {
  return substitute(detail::kExtractPromptV1, {{"answer", std::string(raw_output)}});
}

std::string augmented_diagnose(LlmClient& client, const CaseRecord& c, const ContextBlock& context,
                               const OntologyGraph* ontology) {
  return client.complete(build_diagnosis_prompt(c, context, ontology), client.config().temperature);
}

std::vector<ListEntry> extract_list_via_llm(LlmClient& client, std::string_view raw_output) {
  if (detail::trim(raw_output).empty()) throw Error(ErrorCode::StillUnparseable, "model output is empty");
  auto text = client.complete(build_extraction_prompt(raw_output), 0.0);
  try {
    return parse_prediction_list(text);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::NoListFound) throw Error(ErrorCode::StillUnparseable, "extraction returned no list");
    throw;
  }
}

} // namespace rarekg
