#pragma once

#include <memory>
#include <semaphore>
#include <string>

#include "mpr/backend.hpp"

namespace mpr {

// OpenAI-compatible client.
//
//   complete      POST {base_url}/v1/chat/completions  {model, messages, temperature, max_tokens}
//   score_tokens  POST {base_url}/v1/completions       {model, prompt, max_tokens: 0, echo: true, logprobs: 0}
//
// 5xx responses, timeouts and connection failures are retried up to
// max_retries times with exponential backoff (backoff_ms * 2^attempt). At most
// max_in_flight requests run concurrently per backend instance.
class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(BackendSpec spec);
  ~HttpBackend() override;

  // Parses choices[0].message.content; throws kMalformedResponse.
  static std::string parse_chat_response(std::string_view body);
  // Parses choices[0].logprobs.{tokens, token_logprobs}; the leading null
  // logprob is skipped. Throws kUnsupportedByBackend when logprobs are absent.
  static std::vector<TokenScore> parse_logprob_response(std::string_view body);

 protected:
  std::string do_complete(const ChatRequest& req) override;
  std::vector<TokenScore> do_score_tokens(std::string_view text) override;

 private:
  std::string post(const std::string& path, const std::string& body);

  std::string origin_;
  std::string path_prefix_;
  std::unique_ptr<std::counting_semaphore<>> in_flight_;
};

}  // namespace mpr
