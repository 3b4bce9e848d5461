#include <gtest/gtest.h>

#include <deque>
#include <mutex>

#include "mpr/error.hpp"
#include "mpr/judge.hpp"
#include "mpr/metrics.hpp"
#include "mpr/mock_backend.hpp"
#include "test_support.hpp"

namespace mpr::judge {
namespace {

using O = ComparisonOutcome;

constexpr std::string_view kQuestion = "What is the capital of France?";
constexpr std::string_view kGood = "Paris is the capital of France.";
constexpr std::string_view kFabricated = "The capital of France is Atlantis, founded on the Moon in 1802.";
constexpr std::string_view kGibberish = "blorp fizz wug qqq";

// Replies from a fixed script and keeps every request.
class ScriptedBackend final : public Backend {
 public:
  explicit ScriptedBackend(std::deque<std::string> replies)
      : Backend(testing::mock_spec("scripted")), replies_(std::move(replies)) {}
  std::vector<ChatRequest> requests;

 protected:
  std::string do_complete(const ChatRequest& req) override {
    std::lock_guard lock(mutex_);
    requests.push_back(req);
    if (replies_.empty()) return "";
    auto r = replies_.front();
    replies_.pop_front();
    return r;
  }
  std::vector<TokenScore> do_score_tokens(std::string_view) override { return {}; }

 private:
  std::mutex mutex_;
  std::deque<std::string> replies_;
};

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kInvalidConfig;
}

TEST(ParseUnitScore, Forms) {
  EXPECT_DOUBLE_EQ(parse_unit_score("0.85"), 0.85);
  EXPECT_DOUBLE_EQ(parse_unit_score("Score: 0.7 because the answer is mostly correct"), 0.7);
  EXPECT_DOUBLE_EQ(parse_unit_score("Quality: 72/100"), 0.72);
  EXPECT_DOUBLE_EQ(parse_unit_score("85 / 100"), 0.85);
  EXPECT_DOUBLE_EQ(parse_unit_score("about 40%"), 0.4);
  EXPECT_DOUBLE_EQ(parse_unit_score(".5"), 0.5);
  EXPECT_DOUBLE_EQ(parse_unit_score("1"), 1.0);
  EXPECT_DOUBLE_EQ(parse_unit_score("0"), 0.0);
  EXPECT_EQ(code_of([] { parse_unit_score("excellent answer"); }), ErrorCode::kUnparseable);
  EXPECT_EQ(code_of([] { parse_unit_score(""); }), ErrorCode::kUnparseable);
  EXPECT_EQ(code_of([] { parse_unit_score("Score: 1.7"); }), ErrorCode::kOutOfRange);
  EXPECT_EQ(code_of([] { parse_unit_score("-0.2"); }), ErrorCode::kOutOfRange);
  EXPECT_EQ(code_of([] { parse_unit_score("85"); }), ErrorCode::kOutOfRange);
}

TEST(ParsePairVerdict, Forms) {
  EXPECT_EQ(parse_pair_verdict("Verdict: A"), PairVerdict::kA);
  EXPECT_EQ(parse_pair_verdict("verdict: b"), PairVerdict::kB);
  EXPECT_EQ(parse_pair_verdict("Verdict: TIE"), PairVerdict::kTie);
  EXPECT_EQ(parse_pair_verdict("I think B is better."), PairVerdict::kB);
  EXPECT_EQ(parse_pair_verdict("It's a tie"), PairVerdict::kTie);
  EXPECT_FALSE(parse_pair_verdict("neither answer works"));
  EXPECT_FALSE(parse_pair_verdict(""));
}

TEST(Facets, RoundTrip) {
  for (auto f : {Facet::kRelevance, Facet::kCoherence}) EXPECT_EQ(parse_facet(to_string(f)), f);
  EXPECT_THROW(parse_facet("fluency"), Error);
}

TEST(MockJudge, PointwiseFixtures) {
  MockBackend mock(testing::mock_spec());
  Judge judge(mock);
  EXPECT_DOUBLE_EQ(judge.hallucination(kQuestion, kGood), 0.0);
  EXPECT_DOUBLE_EQ(judge.hallucination(kQuestion, kFabricated), 1.0);
  EXPECT_DOUBLE_EQ(judge.quality(kQuestion, kGood), 0.9);
  EXPECT_DOUBLE_EQ(judge.quality(kQuestion, kGibberish), 0.1);
  const auto raw = judge.quality_raw(kQuestion, kGibberish);
  EXPECT_EQ(raw.raw_text, "Quality: 10/100");
  EXPECT_EQ(raw.attempts, 1);
}

TEST(MockJudge, SpecOneShotHelpers) {
  const auto spec = testing::mock_spec();
  EXPECT_DOUBLE_EQ(score_hallucination(kQuestion, kGood, spec), 0.0);
  EXPECT_DOUBLE_EQ(score_quality(kQuestion, kGood, spec), 0.9);
  EXPECT_EQ(compare_pair(kQuestion, kGood, kFabricated, spec), O::kWin);
}

TEST(MockJudge, DescriptionFacets) {
  MockBackend mock(testing::mock_spec());
  Judge judge(mock);
  const std::string prompt = "What is a ViT?";
  const std::string vit = "ViT, or Vision Transformer, is a deep learning model used for image recognition tasks.";
  EXPECT_DOUBLE_EQ(judge.description(prompt, vit, Facet::kRelevance), 0.9);
  EXPECT_DOUBLE_EQ(judge.description(prompt, vit, Facet::kRelevance), judge.description(prompt, vit, Facet::kRelevance));
  const double coherence = judge.description(prompt, vit, Facet::kCoherence);
  EXPECT_GE(coherence, 0.0);
  EXPECT_LE(coherence, 1.0);
  EXPECT_EQ(code_of([&] { judge.description(prompt, "", Facet::kRelevance); }), ErrorCode::kEmptyInput);
  EXPECT_EQ(code_of([&] { judge.hallucination("", kGood); }), ErrorCode::kEmptyInput);
}

TEST(Compare, AgreementAndDisagreement) {
  MockBackend mock(testing::mock_spec());
  Judge judge(mock);
  EXPECT_EQ(judge.compare(kQuestion, kGood, kFabricated), O::kWin);
  EXPECT_EQ(judge.compare(kQuestion, kFabricated, kGood), O::kLoss);
  // The fixture always answers "A", so the swapped call disagrees.
  EXPECT_EQ(judge.compare("[position-biased] capital?", kGood, kFabricated), O::kTie);
  EXPECT_EQ(judge.compare("[contrarian] capital?", kGood, kFabricated), O::kTie);
  EXPECT_EQ(judge.compare(kQuestion, kGood, kGood), O::kTie);
}

TEST(Compare, TwentyPairCompositionWithWinRate) {
  MockBackend mock(testing::mock_spec());
  Judge judge(mock);
  std::vector<O> outcomes;
  for (int i = 0; i < 17; ++i) outcomes.push_back(judge.compare(kQuestion, kGood, kFabricated));
  for (int i = 0; i < 2; ++i) outcomes.push_back(judge.compare(kQuestion, kGibberish, kGood));
  outcomes.push_back(judge.compare("[position-biased] capital?", kGood, kFabricated));
  EXPECT_EQ(std::count(outcomes.begin(), outcomes.end(), O::kWin), 17);
  EXPECT_EQ(std::count(outcomes.begin(), outcomes.end(), O::kLoss), 2);
  EXPECT_EQ(std::count(outcomes.begin(), outcomes.end(), O::kTie), 1);
  EXPECT_DOUBLE_EQ(metrics::win_rate(outcomes), (17 + 0.5) / 20);
  EXPECT_DOUBLE_EQ(metrics::win_rate(outcomes), 0.875);
}

TEST(Compare, PositionBiasSymmetryIsExhaustive) {
  MockBackend mock(testing::mock_spec());
  Judge judge(mock);
  const std::vector<std::string> answers{
      std::string(kGood), std::string(kFabricated), std::string(kGibberish),
      "This answer addresses: What is the capital of France?", "paris", "France has a capital.",
      "The capital of France is Paris", "A GAN is a kind of relational database engine."};
  const std::vector<std::string> questions{std::string(kQuestion), "[position-biased] q", "[contrarian] q"};
  for (const auto& q : questions) {
    for (const auto& a : answers) {
      for (const auto& b : answers) {
        ASSERT_EQ(judge.compare(q, a, b), flip(judge.compare(q, b, a))) << q << " | " << a << " | " << b;
      }
    }
  }
}

TEST(Reask, RecoversAfterUnparseableReplies) {
  ScriptedBackend backend({"I would rather not say.", "hmm", "Score: 0.4"});
  Judge judge(backend);
  const auto raw = judge.hallucination_raw(kQuestion, kGood);
  EXPECT_EQ(raw.attempts, 3);
  ASSERT_TRUE(raw.score);
  EXPECT_DOUBLE_EQ(*raw.score, 0.4);
  ASSERT_EQ(backend.requests.size(), 3u);
  EXPECT_EQ(backend.requests[0].variables.count("reask"), 0u);
  EXPECT_EQ(backend.requests[2].variables.at("reask"), "2");
  EXPECT_GT(backend.requests[1].user.size(), backend.requests[0].user.size());
}

TEST(Reask, GivesUpAfterTwoReasks) {
  ScriptedBackend backend({"no", "no", "no", "0.5"});
  Judge judge(backend);
  EXPECT_EQ(code_of([&] { judge.quality(kQuestion, kGood); }), ErrorCode::kUnparseable);
  EXPECT_EQ(backend.requests.size(), 3u);
}

TEST(Reask, OutOfRangeIsNotReasked) {
  ScriptedBackend backend({"Score: 7", "0.5"});
  Judge judge(backend);
  EXPECT_EQ(code_of([&] { judge.quality(kQuestion, kGood); }), ErrorCode::kOutOfRange);
  EXPECT_EQ(backend.requests.size(), 1u);
}

TEST(Reask, PairwiseVerdicts) {
  ScriptedBackend backend({"either", "Verdict: A", "Verdict: B"});
  Judge judge(backend);
  EXPECT_EQ(judge.compare(kQuestion, "x", "y"), O::kWin);
  EXPECT_EQ(backend.requests.size(), 3u);
  // Second call shows the answers in swapped order.
  EXPECT_EQ(backend.requests[2].variables.at("answer_a"), "y");

  ScriptedBackend never({"?", "?", "?"});
  Judge stubborn(never);
  EXPECT_EQ(code_of([&] { stubborn.compare(kQuestion, "x", "y"); }), ErrorCode::kUnparseable);
}

}  // namespace
}  // namespace mpr::judge
