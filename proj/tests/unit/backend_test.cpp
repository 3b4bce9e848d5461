#include <gtest/gtest.h>
#include <httplib.h>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <random>
#include <sstream>
#include <thread>

#include "mpr/cache.hpp"
#include "mpr/error.hpp"
#include "mpr/http_backend.hpp"
#include "mpr/mock_backend.hpp"
#include "mpr/rule_stage1.hpp"
#include "test_support.hpp"

namespace mpr {
namespace {

using testing::mock_spec;
using testing::request_for;

TEST(Mock, Stage1PaperExample) {
  MockBackend mock(mock_spec());
  EXPECT_EQ(mock.complete(request_for("stage1", {{"prompt", "what is the caPital of fRAnce?"}})),
            "What is the capital of France?");
}

TEST(Mock, IdenticalRequestsGiveIdenticalResponses) {
  MockBackend a(mock_spec());
  MockBackend b(mock_spec());
  for (const char* id : {"classify", "stage1", "stage2", "stage3", "answer"}) {
    const auto req = request_for(id, {{"prompt", "what is a GAM model"}});
    const auto first = a.complete(req);
    EXPECT_EQ(first, a.complete(req)) << id;
    EXPECT_EQ(first, b.complete(req)) << id;
  }
}

TEST(Mock, ClassifierFollowsAnomalies) {
  MockBackend mock(mock_spec());
  const auto classify = [&](const char* p) { return mock.complete(request_for("classify", {{"prompt", p}})); };
  EXPECT_EQ(classify("What is the capital of France?"), "0");
  EXPECT_EQ(classify("what is the caPital of fRAnce?"), "1");
}

TEST(Mock, EmptyUserMessageIsRejected) {
  MockBackend mock(mock_spec());
  ChatRequest req;
  req.backend_id = "mock";
  EXPECT_THROW(mock.complete(req), Error);
}

TEST(Surrogate, HelloThereExactValues) {
  // Both words have five letters and no noisy characters: -(1 + 0) - 0.05 * 0.
  const auto scores = surrogate_token_scores("hello there");
  ASSERT_EQ(scores.size(), 2u);
  EXPECT_EQ(scores[0].token, "hello");
  EXPECT_DOUBLE_EQ(scores[0].logprob, -1.0);
  EXPECT_EQ(scores[1].token, "there");
  EXPECT_DOUBLE_EQ(scores[1].logprob, -1.0);
}

TEST(Surrogate, FormulaByHand) {
  // "hi!!": 2 noisy, length 4 -> -(1 + 0.2) - 0.05 * 1 = -1.25
  // "transformers": 0 noisy, length 12 -> -1 - 0.35 = -1.35
  // "café": length 4 code points, 'é' is noisy -> -(1.1) - 0.05 = -1.15
  const auto scores = surrogate_token_scores("hi!!   transformers\tcafé");
  ASSERT_EQ(scores.size(), 3u);
  EXPECT_NEAR(scores[0].logprob, -1.25, 1e-12);
  EXPECT_NEAR(scores[1].logprob, -1.35, 1e-12);
  EXPECT_NEAR(scores[2].logprob, -1.15, 1e-12);
}

TEST(Surrogate, NoisyVariantScoresLower) {
  MockBackend mock(mock_spec());
  const auto total = [&](std::string_view s) {
    double t = 0;
    for (const auto& ts : mock.score_tokens(s)) t += ts.logprob;
    return t;
  };
  for (std::string word : {"model", "a", "transformers", "GAN"}) {
    std::string noisy = word;
    noisy.insert(noisy.size() / 2, "@@");
    EXPECT_LT(total(noisy), total(word)) << word;
  }
}

TEST(Surrogate, LogprobsAreNonPositive) {
  std::mt19937_64 gen(5);
  MockBackend mock(mock_spec());
  for (int i = 0; i < 200; ++i) {
    for (const auto& s : mock.score_tokens(testing::random_text(gen))) {
      EXPECT_TRUE(std::isfinite(s.logprob));
      EXPECT_LE(s.logprob, 0.0);
    }
  }
  EXPECT_THROW(mock.score_tokens(""), Error);
}

TEST(RuleStage1, Examples) {
  const auto& nouns = ProperNouns::builtin();
  EXPECT_EQ(rule_stage1_refine("what is the caPital of fRAnce?", nouns), "What is the capital of France?");
  EXPECT_EQ(rule_stage1_refine("What is the capital of France?", nouns), "What is the capital of France?");
  EXPECT_EQ(rule_stage1_refine("how are you", nouns), "How are you?");
  EXPECT_EQ(rule_stage1_refine("the sky is blue", nouns), "The sky is blue.");
  EXPECT_EQ(rule_stage1_refine("hello ,world  .", nouns), "Hello, world.");
  EXPECT_EQ(rule_stage1_refine("is it ?yes  it is", nouns), "Is it? Yes it is.");
  // No space is inserted after '.', so abbreviations and decimals survive.
  EXPECT_EQ(rule_stage1_refine("why is 3.5 e.g bigger", nouns), "Why is 3.5 e.g bigger?");
  EXPECT_THROW(rule_stage1_refine(" \t", nouns), Error);
}

TEST(RuleStage1, ProperNounsRestoreCanonicalSpelling) {
  const ProperNouns nouns = ProperNouns::parse("# ml\nViT\nQLoRA\n\nFrance\n");
  EXPECT_EQ(nouns.size(), 3u);
  EXPECT_EQ(rule_stage1_refine("what is a vIT", nouns), "What is a ViT?");
  EXPECT_EQ(*nouns.lookup("qlora"), "QLoRA");
  EXPECT_FALSE(nouns.lookup("paris"));
}

std::string letters_and_digits_lower(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (text::is_alnum(c) || static_cast<unsigned char>(c) >= 0x80) out.push_back(text::to_lower(c));
  }
  return out;
}

TEST(RuleStage1, IdempotentAndLetterPreservingOnRandomText) {
  std::mt19937_64 gen(77);
  const auto& nouns = ProperNouns::builtin();
  for (int i = 0; i < 2000; ++i) {
    const std::string in = testing::random_text(gen);
    const std::string once = rule_stage1_refine(in, nouns);
    ASSERT_EQ(rule_stage1_refine(once, nouns), once) << in;
    ASSERT_EQ(letters_and_digits_lower(once), letters_and_digits_lower(in)) << in;
  }
}

TEST(RuleStage1, BackendUsesPromptVariable) {
  BackendSpec spec;
  spec.id = "rules";
  spec.kind = BackendKind::kRuleStage1;
  auto backend = make_backend(spec);
  EXPECT_EQ(backend->complete(request_for("stage1", {{"prompt", "how are you"}}, "rules")), "How are you?");
  try {
    backend->score_tokens("anything");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnsupportedByBackend);
  }
}

TEST(Spec, ValidationAndJson) {
  BackendSpec http;
  http.id = "remote";
  http.kind = BackendKind::kHttp;
  EXPECT_THROW(validate(http), Error);
  http.base_url = "http://127.0.0.1:1";
  http.model_name = "m";
  http.api_key_env = "SOME_KEY_VAR";
  EXPECT_NO_THROW(validate(http));
  const Json j = http;
  EXPECT_EQ(j.get<BackendSpec>(), http);
  EXPECT_EQ(j.at("api_key_env"), "SOME_KEY_VAR");
  EXPECT_THROW(parse_backend_kind("grpc"), Error);
}

// Local OpenAI-compatible stub. Behaviour is keyed on the request path and a
// per-test script of status codes.
class StubServer {
 public:
  StubServer() {
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubServer() {
    server_.stop();
    thread_.join();
  }
  httplib::Server& server() { return server_; }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

BackendSpec http_spec(const std::string& url) {
  BackendSpec spec;
  spec.id = "stub";
  spec.kind = BackendKind::kHttp;
  spec.base_url = url;
  spec.model_name = "stub-model";
  spec.timeout_ms = 2000;
  spec.max_retries = 2;
  spec.backoff_ms = 1;
  return spec;
}

const char* kChatBody = R"({"id":"x","choices":[{"index":0,"message":{"role":"assistant","content":"What is the capital of France?"}}]})";

TEST(Http, ChatCompletionAgainstStub) {
  StubServer stub;
  Json seen;
  stub.server().Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    seen = Json::parse(req.body);
    res.set_content(kChatBody, "application/json");
  });
  HttpBackend backend(http_spec(stub.url()));
  auto req = request_for("stage1", {{"prompt", "what is the caPital of fRAnce?"}}, "stub");
  EXPECT_EQ(backend.complete(req), "What is the capital of France?");
  EXPECT_EQ(seen.at("model"), "stub-model");
  EXPECT_EQ(seen.at("temperature"), 0.0);
  EXPECT_EQ(seen.at("max_tokens"), req.max_tokens);
  ASSERT_EQ(seen.at("messages").size(), 2u);
  EXPECT_EQ(seen.at("messages")[0].at("role"), "system");
  EXPECT_EQ(seen.at("messages")[1].at("content"), req.user);
}

TEST(Http, BaseUrlPathPrefixIsKept) {
  StubServer stub;
  stub.server().Post("/proxy/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    res.set_content(kChatBody, "application/json");
  });
  HttpBackend backend(http_spec(stub.url() + "/proxy/"));
  EXPECT_EQ(backend.complete(request_for("stage1", {{"prompt", "x"}}, "stub")), "What is the capital of France?");
}

TEST(Http, RetriesServerErrorsThenSucceeds) {
  StubServer stub;
  std::atomic<int> hits{0};
  stub.server().Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    if (hits++ < 2) {
      res.status = 503;
      return;
    }
    res.set_content(kChatBody, "application/json");
  });
  HttpBackend backend(http_spec(stub.url()));
  EXPECT_EQ(backend.complete(request_for("stage1", {{"prompt", "x"}}, "stub")), "What is the capital of France?");
  EXPECT_EQ(hits.load(), 3);
}

TEST(Http, RetriesExhausted) {
  StubServer stub;
  std::atomic<int> hits{0};
  stub.server().Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = 500;
  });
  HttpBackend backend(http_spec(stub.url()));
  try {
    backend.complete(request_for("stage1", {{"prompt", "x"}}, "stub"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kRetriesExhausted);
  }
  EXPECT_EQ(hits.load(), 3);
}

TEST(Http, ClientErrorsAreNotRetried) {
  StubServer stub;
  std::atomic<int> hits{0};
  stub.server().Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = 401;
  });
  HttpBackend backend(http_spec(stub.url()));
  try {
    backend.complete(request_for("stage1", {{"prompt", "x"}}, "stub"));
    FAIL();
  } catch (const HttpStatusError& e) {
    EXPECT_EQ(e.status(), 401);
  }
  EXPECT_EQ(hits.load(), 1);
}

TEST(Http, TimeoutWithoutRetries) {
  StubServer stub;
  stub.server().Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    std::this_thread::sleep_for(std::chrono::milliseconds(400));
    res.set_content(kChatBody, "application/json");
  });
  auto spec = http_spec(stub.url());
  spec.timeout_ms = 50;
  spec.max_retries = 0;
  HttpBackend backend(spec);
  try {
    backend.complete(request_for("stage1", {{"prompt", "x"}}, "stub"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTimeout);
  }
}

TEST(Http, MalformedBody) {
  StubServer stub;
  stub.server().Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"choices":[]})", "application/json");
  });
  HttpBackend backend(http_spec(stub.url()));
  try {
    backend.complete(request_for("stage1", {{"prompt", "x"}}, "stub"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMalformedResponse);
  }
}

TEST(Http, ScoreTokensParsesEchoedLogprobs) {
  StubServer stub;
  stub.server().Post("/v1/completions", [&](const httplib::Request& req, httplib::Response& res) {
    const Json body = Json::parse(req.body);
    EXPECT_EQ(body.at("echo"), true);
    EXPECT_EQ(body.at("max_tokens"), 0);
    res.set_content(
        R"({"choices":[{"text":"hello there","logprobs":{"tokens":["hello"," there"],"token_logprobs":[null,-2.5]}}]})",
        "application/json");
  });
  HttpBackend backend(http_spec(stub.url()));
  const auto scores = backend.score_tokens("hello there");
  ASSERT_EQ(scores.size(), 1u);
  EXPECT_EQ(scores[0].token, " there");
  EXPECT_DOUBLE_EQ(scores[0].logprob, -2.5);
}

TEST(Http, MissingLogprobEndpointIsUnsupported) {
  StubServer stub;  // no /v1/completions route: 404
  HttpBackend backend(http_spec(stub.url()));
  try {
    backend.score_tokens("hello");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnsupportedByBackend);
  }
  EXPECT_THROW(HttpBackend::parse_logprob_response(R"({"choices":[{"text":"x"}]})"), Error);
}

TEST(Http, InFlightCapIsRespected) {
  StubServer stub;
  std::atomic<int> current{0};
  std::atomic<int> peak{0};
  stub.server().new_task_queue = [] { return new httplib::ThreadPool(8); };
  stub.server().Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    const int now = ++current;
    int p = peak.load();
    while (now > p && !peak.compare_exchange_weak(p, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(30));
    --current;
    res.set_content(kChatBody, "application/json");
  });
  auto spec = http_spec(stub.url());
  spec.max_in_flight = 2;
  HttpBackend backend(spec);
  std::vector<std::thread> threads;
  for (int i = 0; i < 6; ++i) {
    threads.emplace_back([&] { backend.complete(request_for("stage1", {{"prompt", "x"}}, "stub")); });
  }
  for (auto& t : threads) t.join();
  EXPECT_LE(peak.load(), 2);
  EXPECT_GE(peak.load(), 1);
}

TEST(Http, ApiKeyNeverLeaks) {
  const std::string secret = "sk-test-DO-NOT-LEAK-7f3a9c";
  ::setenv("MPR_TEST_API_KEY", secret.c_str(), 1);

  std::ostringstream log_stream;
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(log_stream);
  auto logger = std::make_shared<spdlog::logger>("audit", sink);
  logger->set_level(spdlog::level::trace);
  auto previous = spdlog::default_logger();
  spdlog::set_default_logger(logger);

  StubServer stub;
  std::string auth_seen;
  std::atomic<int> hits{0};
  stub.server().Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    auth_seen = req.get_header_value("Authorization");
    if (hits++ == 0) {
      res.status = 502;
      return;
    }
    res.set_content(kChatBody, "application/json");
  });
  auto spec = http_spec(stub.url());
  spec.api_key_env = "MPR_TEST_API_KEY";
  const auto dir = testing::temp_dir("key_audit");
  {
    auto cache = std::make_shared<const ResponseCache>(dir);
    CachingBackend backend(std::make_shared<HttpBackend>(spec), cache);
    backend.complete(request_for("stage1", {{"prompt", "x"}}, "stub"));
    backend.complete(request_for("stage1", {{"prompt", "x"}}, "stub"));
  }
  spdlog::set_default_logger(previous);
  ::unsetenv("MPR_TEST_API_KEY");

  EXPECT_EQ(auth_seen, "Bearer " + secret);
  EXPECT_EQ(hits.load(), 2);
  EXPECT_NE(log_stream.str().find("retry"), std::string::npos);
  EXPECT_EQ(log_stream.str().find(secret), std::string::npos);
  EXPECT_EQ(Json(spec).dump().find(secret), std::string::npos);
  std::size_t files = 0;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    ++files;
    EXPECT_EQ(testing::slurp(entry.path()).find(secret), std::string::npos) << entry.path();
  }
  EXPECT_EQ(files, 1u);
}

}  // namespace
}  // namespace mpr
