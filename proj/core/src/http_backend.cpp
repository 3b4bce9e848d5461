#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "mpr/http_backend.hpp"

#include <spdlog/spdlog.h>

#include <chrono>
#include <cstdlib>
#include <thread>

#include "mpr/error.hpp"

namespace mpr {
namespace {

// Splits "http://host:port/prefix" into origin and path prefix.
std::pair<std::string, std::string> split_base_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  const auto host_begin = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  const auto path_begin = url.find('/', host_begin);
  if (path_begin == std::string::npos) return {url, ""};
  std::string prefix = url.substr(path_begin);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {url.substr(0, path_begin), prefix};
}

bool is_retryable(httplib::Error e) {
  switch (e) {
    case httplib::Error::Connection:
    case httplib::Error::ConnectionTimeout:
    case httplib::Error::Read:
    case httplib::Error::Write:
      return true;
    default:
      return false;
  }
}

class SemaphoreGuard {
 public:
  explicit SemaphoreGuard(std::counting_semaphore<>& s) : s_(s) { s_.acquire(); }
  ~SemaphoreGuard() { s_.release(); }
  SemaphoreGuard(const SemaphoreGuard&) = delete;
  SemaphoreGuard& operator=(const SemaphoreGuard&) = delete;

 private:
  std::counting_semaphore<>& s_;
};

}  // namespace

HttpBackend::HttpBackend(BackendSpec spec)
    : Backend(std::move(spec)),
      in_flight_(std::make_unique<std::counting_semaphore<>>(this->spec().max_in_flight)) {
  validate(this->spec());
  std::tie(origin_, path_prefix_) = split_base_url(*this->spec().base_url);
}

HttpBackend::~HttpBackend() = default;

std::string HttpBackend::post(const std::string& path, const std::string& body) {
  SemaphoreGuard guard(*in_flight_);
  const auto& s = spec();

  httplib::Headers headers;
  if (s.api_key_env) {
    if (const char* key = std::getenv(s.api_key_env->c_str()); key != nullptr && *key != '\0') {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }
  }

  const auto timeout = std::chrono::milliseconds(s.timeout_ms);
  std::string last_failure;
  int last_status = 0;
  for (int attempt = 0; attempt <= s.max_retries; ++attempt) {
    if (attempt > 0) {
      const auto delay = std::chrono::milliseconds(static_cast<long long>(s.backoff_ms) << (attempt - 1));
      spdlog::warn("backend '{}': retry {}/{} after {} ({} ms backoff)", s.id, attempt, s.max_retries, last_failure,
                   delay.count());
      std::this_thread::sleep_for(delay);
    }

    httplib::Client client(origin_);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    auto res = client.Post(path_prefix_ + path, headers, body, "application/json");
    if (!res) {
      const auto err = res.error();
      last_failure = httplib::to_string(err);
      last_status = 0;
      if (!is_retryable(err)) throw Error(ErrorCode::kMalformedResponse, "backend '" + s.id + "': " + last_failure);
      continue;
    }
    if (res->status >= 500) {
      last_failure = "HTTP " + std::to_string(res->status);
      last_status = res->status;
      continue;
    }
    if (res->status >= 400) throw HttpStatusError(res->status, "backend '" + s.id + "'");
    return res->body;
  }
  if (s.max_retries == 0) {
    if (last_status != 0) throw HttpStatusError(last_status, "backend '" + s.id + "'");
    throw Error(ErrorCode::kTimeout, "backend '" + s.id + "': " + last_failure);
  }
  throw Error(ErrorCode::kRetriesExhausted,
              "backend '" + s.id + "' failed after " + std::to_string(s.max_retries + 1) + " attempts: " + last_failure);
}

std::string HttpBackend::do_complete(const ChatRequest& req) {
  Json messages = Json::array();
  if (req.system) messages.push_back({{"role", "system"}, {"content", *req.system}});
  messages.push_back({{"role", "user"}, {"content", req.user}});
  const Json body{{"model", *spec().model_name},
                  {"messages", std::move(messages)},
                  {"temperature", req.temperature},
                  {"max_tokens", req.max_tokens}};
  return parse_chat_response(post("/v1/chat/completions", body.dump()));
}

std::vector<TokenScore> HttpBackend::do_score_tokens(std::string_view text) {
  const Json body{{"model", *spec().model_name}, {"prompt", std::string(text)}, {"max_tokens", 0},
                  {"echo", true},                {"logprobs", 0},               {"temperature", 0.0}};
  try {
    return parse_logprob_response(post("/v1/completions", body.dump()));
  } catch (const HttpStatusError& e) {
    if (e.status() == 400 || e.status() == 404 || e.status() == 501) {
      throw Error(ErrorCode::kUnsupportedByBackend, "backend '" + spec().id + "' has no prompt-logprob endpoint");
    }
    throw;
  }
}

std::string HttpBackend::parse_chat_response(std::string_view body) {
  try {
    const Json j = Json::parse(body);
    const auto& content = j.at("choices").at(0).at("message").at("content");
    if (!content.is_string()) throw Error(ErrorCode::kMalformedResponse, "message content is not a string");
    return content.get<std::string>();
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kMalformedResponse, std::string("chat response: ") + e.what());
  }
}

std::vector<TokenScore> HttpBackend::parse_logprob_response(std::string_view body) {
  Json j;
  try {
    j = Json::parse(body);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kMalformedResponse, std::string("completions response: ") + e.what());
  }
  const Json* logprobs = nullptr;
  if (j.contains("choices") && j["choices"].is_array() && !j["choices"].empty()) {
    const auto& choice = j["choices"][0];
    if (choice.contains("logprobs") && choice["logprobs"].is_object()) logprobs = &choice["logprobs"];
  }
  if (logprobs == nullptr || !logprobs->contains("tokens") || !logprobs->contains("token_logprobs")) {
    throw Error(ErrorCode::kUnsupportedByBackend, "endpoint did not echo prompt logprobs");
  }
  const auto& tokens = (*logprobs)["tokens"];
  const auto& values = (*logprobs)["token_logprobs"];
  if (!tokens.is_array() || !values.is_array() || tokens.size() != values.size()) {
    throw Error(ErrorCode::kMalformedResponse, "tokens and token_logprobs differ in length");
  }
  std::vector<TokenScore> out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (values[i].is_null()) continue;
    if (!values[i].is_number() || !tokens[i].is_string()) {
      throw Error(ErrorCode::kMalformedResponse, "bad logprob entry at index " + std::to_string(i));
    }
    out.push_back({tokens[i].get<std::string>(), values[i].get<double>()});
  }
  if (out.empty()) throw Error(ErrorCode::kMalformedResponse, "no scored tokens in response");
  return out;
}

}  // namespace mpr
