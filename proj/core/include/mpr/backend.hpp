#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mpr/serialize.hpp"

namespace mpr {

struct ChatRequest {
  std::optional<std::string> system;
  std::string user;
  double temperature = 0.0;
  int max_tokens = 256;
  std::string backend_id;
  // Which template produced `user`, its version digest, and the values that
  // were substituted into it. HTTP backends ignore these; the mock dispatches
  // on them and the cache folds them into the key.
  std::string template_id;
  std::string template_version;
  std::map<std::string, std::string> variables;

  bool operator==(const ChatRequest&) const = default;
};

// Throws Error(kEmptyInput) for an empty user message, kInvalidConfig for bad sampling parameters.
void validate(const ChatRequest& req);

// Stable serialization: keys sorted, optional system omitted when absent.
Json canonical_json(const ChatRequest& req);

struct TokenScore {
  std::string token;
  double logprob = 0.0;

  bool operator==(const TokenScore&) const = default;
};

enum class BackendKind : std::uint8_t { kHttp, kMock, kRuleStage1 };

std::string_view to_string(BackendKind kind);
BackendKind parse_backend_kind(std::string_view text);

struct BackendSpec {
  std::string id;
  BackendKind kind = BackendKind::kMock;
  std::optional<std::string> base_url;
  std::optional<std::string> model_name;
  // Name of the environment variable holding the API key. The key itself is
  // never stored, logged or serialized.
  std::optional<std::string> api_key_env;
  int timeout_ms = 30000;
  int max_retries = 2;
  int backoff_ms = 250;
  int max_in_flight = 4;
  // mock: replacement table (JSON). rule_stage1: proper-noun list (one per line).
  std::optional<std::string> data_path;

  bool operator==(const BackendSpec&) const = default;
};

// http requires base_url and model_name; counts must be sane.
void validate(const BackendSpec& spec);

void to_json(Json& j, const BackendSpec& spec);
void from_json(const Json& j, BackendSpec& spec);

// A language-model capability provider. Implementations must be callable from
// several threads at once.
class Backend {
 public:
  explicit Backend(BackendSpec spec) : spec_(std::move(spec)) {}
  virtual ~Backend() = default;

  Backend(const Backend&) = delete;
  Backend& operator=(const Backend&) = delete;

  const BackendSpec& spec() const noexcept { return spec_; }

  std::string complete(const ChatRequest& req);

  // Per-token log probabilities of `text` under the backend's scoring model.
  std::vector<TokenScore> score_tokens(std::string_view text);

  // Number of complete/score_tokens invocations that reached this object.
  std::uint64_t call_count() const noexcept { return calls_.load(std::memory_order_relaxed); }

 protected:
  virtual std::string do_complete(const ChatRequest& req) = 0;
  virtual std::vector<TokenScore> do_score_tokens(std::string_view text) = 0;

 private:
  BackendSpec spec_;
  std::atomic<std::uint64_t> calls_{0};
};

std::unique_ptr<Backend> make_backend(const BackendSpec& spec);

// One-shot helpers that build a backend for the call.
std::string complete(const BackendSpec& spec, const ChatRequest& req);
std::vector<TokenScore> score_tokens(const BackendSpec& spec, std::string_view text);

}  // namespace mpr
