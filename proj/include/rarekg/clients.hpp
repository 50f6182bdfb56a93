#pragma once

#include <atomic>
#include <chrono>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rarekg/cases.hpp"
#include "rarekg/eval.hpp"
#include "rarekg/kg.hpp"

namespace rarekg {

struct HttpRequest {
  std::string method = "GET";
  std::string url;
  std::map<std::string, std::string> headers;
  std::string body;
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

// Network seam. Implementations throw REMOTE_UNAVAILABLE when no response
// could be obtained (timeout, refused connection).
class HttpTransport {
public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse send(const HttpRequest& request) = 0;
};

// Live transport over cpp-httplib (http and https).
class HttplibTransport : public HttpTransport {
public:
  explicit HttplibTransport(std::chrono::milliseconds timeout = std::chrono::seconds(30)) : timeout_(timeout) {}
  HttpResponse send(const HttpRequest& request) override;

private:
  std::chrono::milliseconds timeout_;
};

// Hash of method, url and body; headers (credentials) are not part of it.
std::string request_hash(const HttpRequest& request);

// Append-only line-delimited {request_hash, response} store. An empty path
// keeps records in memory only. Internally synchronized.
class ReplayStore {
public:
  ReplayStore() = default;
  explicit ReplayStore(std::string path);

  std::optional<HttpResponse> lookup(const std::string& hash) const;
  void append(const std::string& hash, const HttpResponse& response);
  std::size_t size() const;
  const std::string& path() const noexcept { return path_; }

private:
  std::string path_;
  mutable std::mutex mu_;
  std::map<std::string, HttpResponse> records_;
};

// Minimum spacing between requests to one endpoint.
class RateLimiter {
public:
  explicit RateLimiter(double requests_per_second = 0.0);
  void acquire();

private:
  std::mutex mu_;
  std::chrono::steady_clock::duration interval_{};
  std::chrono::steady_clock::time_point next_{};
};

// Shared limiter per endpoint base URL.
RateLimiter& limiter_for(const std::string& base_url, double requests_per_second);

// ---------------------------------------------------------------------------
// Entity resolver

struct ResolverConfig {
  std::string base_url = "https://api-v3.monarchinitiative.org";
  std::chrono::milliseconds timeout = std::chrono::seconds(10);
  std::string cache_path;
  bool enabled = false;
  double requests_per_second = 5.0;
};

// Searches the resolver for a disease label and keeps the first hit that is,
// or cross-references, an ORPHA code. The cache is consulted first; when the
// client is disabled a cache miss yields no result and no network call.
class ResolverClient : public LabelResolver {
public:
  ResolverClient(ResolverConfig cfg, std::shared_ptr<HttpTransport> transport);

  // Throws REMOTE_UNAVAILABLE, MALFORMED_RESPONSE.
  std::optional<TermId> resolve(std::string_view label) override;

  std::size_t network_calls() const noexcept { return network_calls_; }
  const ResolverConfig& config() const noexcept { return cfg_; }

  static HttpRequest search_request(const std::string& base_url, std::string_view label);
  // Throws MALFORMED_RESPONSE.
  static std::optional<TermId> first_orpha_hit(std::string_view body);

private:
  ResolverConfig cfg_;
  std::shared_ptr<HttpTransport> transport_;
  ReplayStore cache_;
  std::atomic<std::size_t> network_calls_{0};
};

std::optional<TermId> resolve_remote(ResolverClient& client, std::string_view label);

// ---------------------------------------------------------------------------
// LLM endpoint

struct LlmEndpointConfig {
  std::string base_url;  // OpenAI-compatible root, e.g. http://host/v1
  std::string model;
  int max_tokens = 2048;
  double temperature = 0.0;
  std::string api_key;
  std::chrono::milliseconds timeout = std::chrono::seconds(120);
  std::string replay_path;
  bool replay_only = false;  // never touch the network
  double requests_per_second = 1.0;
};

class LlmClient {
public:
  LlmClient(LlmEndpointConfig cfg, std::shared_ptr<HttpTransport> transport);

  // Chat completion for a single user message. Live responses are appended to
  // the replay file. Throws ENDPOINT_UNAVAILABLE, REPLAY_MISS,
  // MALFORMED_RESPONSE.
  std::string complete(std::string_view prompt, double temperature);

  std::size_t network_calls() const noexcept { return network_calls_; }
  const LlmEndpointConfig& config() const noexcept { return cfg_; }

  static HttpRequest chat_request(const LlmEndpointConfig& cfg, std::string_view prompt, double temperature);

private:
  LlmEndpointConfig cfg_;
  std::shared_ptr<HttpTransport> transport_;
  ReplayStore replay_;
  std::atomic<std::size_t> network_calls_{0};
};

inline constexpr std::string_view kDiagnoseTemplateVersion = "diagnose/v1";
inline constexpr std::string_view kExtractTemplateVersion = "extract/v1";

// Case sections and the serialized context substituted into the diagnosis
// template. Pure function of its inputs.
std::string build_diagnosis_prompt(const CaseRecord& c, const ContextBlock& context,
                                   const OntologyGraph* ontology = nullptr);
std::string build_extraction_prompt(std::string_view raw_output);

std::string augmented_diagnose(LlmClient& client, const CaseRecord& c, const ContextBlock& context,
                               const OntologyGraph* ontology = nullptr);

// Always temperature 0. Throws STILL_UNPARSEABLE, ENDPOINT_UNAVAILABLE,
// REPLAY_MISS.
std::vector<ListEntry> extract_list_via_llm(LlmClient& client, std::string_view raw_output);

} // namespace rarekg
