#include "mpr/backend.hpp"

#include <cmath>

#include "mpr/error.hpp"
#include "mpr/http_backend.hpp"
#include "mpr/mock_backend.hpp"
#include "mpr/rule_stage1.hpp"
#include "mpr/text.hpp"

namespace mpr {

void validate(const ChatRequest& req) {
  if (req.user.empty()) throw Error(ErrorCode::kEmptyInput, "chat request has an empty user message");
  if (!(req.temperature >= 0.0)) throw Error(ErrorCode::kInvalidConfig, "temperature must be >= 0");
  if (req.max_tokens <= 0) throw Error(ErrorCode::kInvalidConfig, "max_tokens must be positive");
}

Json canonical_json(const ChatRequest& req) {
  Json j;
  if (req.system) j["system"] = *req.system;
  j["user"] = req.user;
  j["temperature"] = req.temperature;
  j["max_tokens"] = req.max_tokens;
  j["backend_id"] = req.backend_id;
  j["template_id"] = req.template_id;
  j["template_version"] = req.template_version;
  j["variables"] = req.variables;
  return j;
}

std::string_view to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::kHttp: return "http";
    case BackendKind::kMock: return "mock";
    case BackendKind::kRuleStage1: return "rule_stage1";
  }
  return "mock";
}

BackendKind parse_backend_kind(std::string_view raw) {
  const std::string s = text::to_lower(raw);
  if (s == "http") return BackendKind::kHttp;
  if (s == "mock") return BackendKind::kMock;
  if (s == "rule_stage1") return BackendKind::kRuleStage1;
  throw Error(ErrorCode::kInvalidConfig, "unknown backend kind '" + std::string(raw) + "'");
}

void validate(const BackendSpec& spec) {
  if (spec.id.empty()) throw Error(ErrorCode::kInvalidConfig, "backend id is empty");
  if (spec.kind == BackendKind::kHttp && (!spec.base_url || spec.base_url->empty() || !spec.model_name)) {
    throw Error(ErrorCode::kInvalidConfig, "http backend '" + spec.id + "' needs base_url and model_name");
  }
  if (spec.timeout_ms <= 0) throw Error(ErrorCode::kInvalidConfig, "backend '" + spec.id + "': timeout_ms must be > 0");
  if (spec.max_retries < 0) throw Error(ErrorCode::kInvalidConfig, "backend '" + spec.id + "': max_retries must be >= 0");
  if (spec.backoff_ms < 0) throw Error(ErrorCode::kInvalidConfig, "backend '" + spec.id + "': backoff_ms must be >= 0");
  if (spec.max_in_flight < 1) {
    throw Error(ErrorCode::kInvalidConfig, "backend '" + spec.id + "': max_in_flight must be >= 1");
  }
}

void to_json(Json& j, const BackendSpec& spec) {
  j = Json{{"id", spec.id},
           {"kind", std::string(to_string(spec.kind))},
           {"timeout_ms", spec.timeout_ms},
           {"max_retries", spec.max_retries},
           {"backoff_ms", spec.backoff_ms},
           {"max_in_flight", spec.max_in_flight}};
  if (spec.base_url) j["base_url"] = *spec.base_url;
  if (spec.model_name) j["model_name"] = *spec.model_name;
  if (spec.api_key_env) j["api_key_env"] = *spec.api_key_env;
  if (spec.data_path) j["data_path"] = *spec.data_path;
}

void from_json(const Json& j, BackendSpec& spec) {
  spec = BackendSpec{};
  spec.id = j.at("id").get<std::string>();
  spec.kind = parse_backend_kind(j.value("kind", std::string{"mock"}));
  if (auto it = j.find("base_url"); it != j.end() && !it->is_null()) spec.base_url = it->get<std::string>();
  if (auto it = j.find("model_name"); it != j.end() && !it->is_null()) spec.model_name = it->get<std::string>();
  if (auto it = j.find("api_key_env"); it != j.end() && !it->is_null()) spec.api_key_env = it->get<std::string>();
  if (auto it = j.find("data_path"); it != j.end() && !it->is_null()) spec.data_path = it->get<std::string>();
  spec.timeout_ms = j.value("timeout_ms", spec.timeout_ms);
  spec.max_retries = j.value("max_retries", spec.max_retries);
  spec.backoff_ms = j.value("backoff_ms", spec.backoff_ms);
  spec.max_in_flight = j.value("max_in_flight", spec.max_in_flight);
}

std::string Backend::complete(const ChatRequest& req) {
  validate(req);
  calls_.fetch_add(1, std::memory_order_relaxed);
  return do_complete(req);
}

std::vector<TokenScore> Backend::score_tokens(std::string_view text) {
  if (text::trim(text).empty()) throw Error(ErrorCode::kEmptyInput, "score_tokens needs non-empty text");
  calls_.fetch_add(1, std::memory_order_relaxed);
  auto scores = do_score_tokens(text);
  for (auto& s : scores) {
    if (!std::isfinite(s.logprob)) {
      throw Error(ErrorCode::kMalformedResponse, "backend '" + spec_.id + "' returned a non-finite logprob");
    }
    s.logprob = std::min(s.logprob, 0.0);
  }
  return scores;
}

std::unique_ptr<Backend> make_backend(const BackendSpec& spec) {
  validate(spec);
  switch (spec.kind) {
    case BackendKind::kHttp: return std::make_unique<HttpBackend>(spec);
    case BackendKind::kMock: return std::make_unique<MockBackend>(spec);
    case BackendKind::kRuleStage1: return std::make_unique<RuleStage1Backend>(spec);
  }
  throw Error(ErrorCode::kInvalidConfig, "unknown backend kind");
}

std::string complete(const BackendSpec& spec, const ChatRequest& req) { return make_backend(spec)->complete(req); }

std::vector<TokenScore> score_tokens(const BackendSpec& spec, std::string_view text) {
  return make_backend(spec)->score_tokens(text);
}

}  // namespace mpr
