#include <gtest/gtest.h>

#include <algorithm>

#include "mpr/error.hpp"
#include "mpr/mock_backend.hpp"
#include "mpr/pipeline.hpp"
#include "mpr/pool.hpp"
#include "test_support.hpp"

namespace mpr {
namespace {

constexpr std::string_view kVitDescription =
    "ViT, or Vision Transformer, is a deep learning model used for image recognition tasks.";

PromptRecord record(std::string id, std::string text) {
  PromptRecord r;
  r.id = std::move(id);
  r.text = std::move(text);
  return r;
}

// Pool whose "mock" backend uses the built-in table plus extra fixtures.
void add_mock_with_fixtures(BackendPool& pool, std::vector<MockFixture> extra) {
  auto table = std::make_shared<MockTable>(*MockTable::builtin());
  table->fixtures.insert(table->fixtures.begin(), extra.begin(), extra.end());
  pool.add(std::make_shared<MockBackend>(testing::mock_spec(), table));
}

MockFixture fixture(std::string template_id, std::string field, std::string value, std::string response) {
  MockFixture f;
  f.template_id = std::move(template_id);
  f.field = std::move(field);
  f.value = std::move(value);
  f.response = std::move(response);
  return f;
}

class PipelineTest : public ::testing::Test {
 protected:
  BackendPool pool;
  Refiner refiner{mock_pipeline_config(), pool};
};

TEST_F(PipelineTest, ClassifyStage) {
  EXPECT_EQ(refiner.classify_stage("what is the caPital of fRAnce?"), SabotageStage::kStage1);
  EXPECT_EQ(refiner.classify_stage("What is the capital of France?"), SabotageStage::kClean);
  EXPECT_EQ(refiner.classify_stage("what is a GAM model"), SabotageStage::kStage3);
  try {
    refiner.classify_stage("[unparseable]");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnparseableClassification);
  }
}

TEST(Parsing, StageAndYesNoReplies) {
  EXPECT_EQ(parse_stage_reply("The error stage is 2."), SabotageStage::kStage2);
  EXPECT_EQ(parse_stage_reply("0"), SabotageStage::kClean);
  EXPECT_EQ(parse_stage_reply("stage 3, maybe 1"), SabotageStage::kStage3);
  EXPECT_FALSE(parse_stage_reply("stage five"));
  EXPECT_FALSE(parse_stage_reply("9"));
  EXPECT_EQ(parse_yes_no("no, a definition is needed"), false);
  EXPECT_EQ(parse_yes_no("YES."), true);
  EXPECT_EQ(parse_yes_no("Yes but no"), true);
  EXPECT_FALSE(parse_yes_no("nobody knows"));
}

TEST(Parsing, ClassifierReplyThroughBackend) {
  BackendPool pool;
  add_mock_with_fixtures(pool, {fixture("classify", "prompt", "odd prompt", "The error stage is 2.")});
  Refiner refiner(mock_pipeline_config(), pool);
  EXPECT_EQ(refiner.classify_stage("odd prompt"), SabotageStage::kStage2);
}

TEST_F(PipelineTest, CumulativeCorrections) {
  const auto out = refiner.run_corrections("what is a GAM model", SabotageStage::kStage2);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0], (StageOutput{SabotageStage::kStage1, "What is a GAM model?"}));
  EXPECT_EQ(out[1], (StageOutput{SabotageStage::kStage2, "What is a GAN model?"}));
  EXPECT_TRUE(refiner.run_corrections("What is the capital of France?", SabotageStage::kClean).empty());
}

TEST_F(PipelineTest, Stage3Paraphrase) {
  const auto prompt = "Tell me about transformers";
  const auto stage = refiner.classify_stage(prompt);
  EXPECT_EQ(stage, SabotageStage::kStage3);
  const auto out = refiner.run_corrections(prompt, stage);
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out.back().text, "Can you explain how Transformer-based neural networks work?");
}

TEST_F(PipelineTest, Sufficiency) {
  EXPECT_TRUE(refiner.check_sufficiency("What is the capital of France?"));
  EXPECT_FALSE(refiner.check_sufficiency("What is a ViT?"));
  EXPECT_TRUE(refiner.check_sufficiency("What is a ViT?", kVitDescription));
}

TEST(Sufficiency, ParsesNegativeReply) {
  BackendPool pool;
  add_mock_with_fixtures(pool, {fixture("reflect", "prompt", "Explain it.", "no, a definition is needed")});
  Refiner refiner(mock_pipeline_config(), pool);
  EXPECT_FALSE(refiner.check_sufficiency("Explain it."));
}

TEST_F(PipelineTest, DescriptionsForViT) {
  const auto cands = refiner.generate_descriptions("What is a ViT?");
  ASSERT_EQ(cands.size(), 1u);
  EXPECT_EQ(cands[0].text, kVitDescription);
  EXPECT_EQ(cands[0].iteration, 0);
  EXPECT_GT(cands[0].perplexity, 1.0);
}

TEST_F(PipelineTest, DescriptionsStopAtFirstSufficientCandidate) {
  // The first QLoRA description is judged insufficient, the second is not.
  RefinementTrace trace;
  const auto cands = refiner.generate_descriptions("How does QLoRA work?", &trace);
  ASSERT_EQ(cands.size(), 2u);
  EXPECT_EQ(cands[1].iteration, 1);
  EXPECT_EQ(trace.sufficiency_verdicts, (std::vector<bool>{false, true}));
}

TEST(Descriptions, IterationBound) {
  BackendPool pool;
  auto cfg = mock_pipeline_config();
  cfg.max_description_iters = 1;
  Refiner refiner(cfg, pool);
  EXPECT_EQ(refiner.generate_descriptions("How does QLoRA work?").size(), 1u);
  cfg.max_description_iters = 3;
  Refiner wide(cfg, pool);
  // Every VAE description but the last is insufficient.
  EXPECT_EQ(wide.generate_descriptions("What is a VAE?").size(), 3u);
}

TEST(Descriptions, PartialListAfterLaterFailure) {
  BackendPool pool;
  MockFixture boom;
  boom.template_id = "describe";
  boom.field = "iteration";
  boom.value = "1";
  boom.error = "http_500";
  add_mock_with_fixtures(pool, {boom});
  Refiner refiner(mock_pipeline_config(), pool);
  RefinementTrace trace;
  const auto cands = refiner.generate_descriptions("What is a VAE?", &trace);
  EXPECT_EQ(cands.size(), 1u);
  EXPECT_EQ(trace.warnings.size(), 1u);

  const auto full = refiner.refine(record("v", "What is a VAE?"));
  EXPECT_EQ(full.status, TraceStatus::kOk);
  EXPECT_EQ(full.candidates.size(), 1u);
  EXPECT_FALSE(full.warnings.empty());
}

TEST(Selection, ArgminAndAblation) {
  const std::vector<Description> c{{"a", 8.1, 0}, {"b", 5.2, 1}, {"c", 9.0, 2}};
  EXPECT_EQ(select_description(c, true)->iteration, 1);
  EXPECT_EQ(select_description(c, false)->iteration, 0);
  EXPECT_FALSE(select_description({}, true));
  const std::vector<Description> tie{{"a", 3.0, 0}, {"b", 3.0, 1}};
  EXPECT_EQ(select_description(tie, true)->iteration, 0);
}

TEST(Assemble, Format) {
  EXPECT_EQ(assemble_prompt("Q?", std::nullopt), "Q?");
  EXPECT_EQ(assemble_prompt("Q?", Description{"D.", 2.0, 0}), "Q?\n\nContext: D.");
}

TEST_F(PipelineTest, RefineFranceSkipsDescriptions) {
  const auto t = refiner.refine(record("q", "what is the caPital of fRAnce?"));
  EXPECT_EQ(t.status, TraceStatus::kOk);
  EXPECT_EQ(t.classified_stage, SabotageStage::kStage1);
  EXPECT_EQ(t.final_prompt, "What is the capital of France?");
  EXPECT_TRUE(t.candidates.empty());
  EXPECT_FALSE(t.selected);
  ASSERT_FALSE(t.sufficiency_verdicts.empty());
  EXPECT_TRUE(t.sufficiency_verdicts[0]);
}

TEST_F(PipelineTest, RefineViTAppendsContext) {
  const auto t = refiner.refine(record("v", "What is a ViT"));
  EXPECT_EQ(t.status, TraceStatus::kOk);
  EXPECT_NE(t.final_prompt.find(kVitDescription), std::string::npos);
  EXPECT_EQ(t.final_prompt, t.stage_outputs.back().text + std::string(kContextSeparator) + std::string(kVitDescription));
}

TEST(Ablations, TraceShapes) {
  BackendPool pool;
  auto cfg = mock_pipeline_config();
  cfg.enable_descriptions = false;
  const auto no_desc = Refiner(cfg, pool).refine(record("v", "What is a ViT"));
  EXPECT_TRUE(no_desc.candidates.empty());
  EXPECT_EQ(no_desc.final_prompt.find("Context:"), std::string::npos);

  cfg = mock_pipeline_config();
  cfg.enable_multistage = false;
  const auto single = Refiner(cfg, pool).refine(record("g", "what is a GAM model"));
  ASSERT_EQ(single.stage_outputs.size(), 1u);
  EXPECT_EQ(single.stage_outputs[0].stage, SabotageStage::kStage3);
  EXPECT_EQ(single.stage_outputs[0].text, "What is a GAN model?");
  EXPECT_EQ(std::count_if(single.calls.begin(), single.calls.end(),
                          [](const BackendCall& c) { return c.phase == "corrections"; }),
            1);

  cfg = mock_pipeline_config();
  cfg.enable_ranking = false;
  const auto unranked = Refiner(cfg, pool).refine(record("l", "How does QLoRA work?"));
  ASSERT_TRUE(unranked.selected);
  EXPECT_EQ(unranked.selected->iteration, 0);
}

TEST(Refine, FailuresAreCapturedWithPhase) {
  BackendPool pool;
  Refiner refiner(mock_pipeline_config(), pool);
  const auto t = refiner.refine(record("bad", "[unparseable]"));
  EXPECT_EQ(t.status, TraceStatus::kFailed);
  EXPECT_EQ(t.error_phase, "classify");
  ASSERT_TRUE(t.error_message);
  EXPECT_NE(t.error_message->find("UnparseableClassification"), std::string::npos);
  EXPECT_TRUE(t.elapsed_ms.count("total"));

  const auto empty = refiner.refine(record("e", "   "));
  EXPECT_EQ(empty.status, TraceStatus::kFailed);
  EXPECT_EQ(empty.error_phase, "input");
}

TEST(Refine, InvariantsOnCorpus) {
  BackendPool pool;
  Refiner refiner(mock_pipeline_config(), pool);
  for (const auto& r : testing::sabotaged_corpus()) {
    const std::uint64_t before = pool.upstream_calls();
    const auto t = refiner.refine(r);
    ASSERT_EQ(t.status, TraceStatus::kOk) << r.id << ": " << t.error_message.value_or("");
    // Every backend call shows up in the trace.
    EXPECT_EQ(pool.upstream_calls() - before, t.calls.size()) << r.id;
    // Skip path.
    if (t.sufficiency_verdicts.at(0)) {
      EXPECT_TRUE(t.candidates.empty()) << r.id;
      EXPECT_FALSE(t.selected) << r.id;
    }
    // Selection.
    if (!t.candidates.empty()) {
      ASSERT_TRUE(t.selected);
      double lowest = t.candidates[0].perplexity;
      for (const auto& c : t.candidates) lowest = std::min(lowest, c.perplexity);
      EXPECT_EQ(t.selected->perplexity, lowest);
    }
    // Phase times sum to the total.
    std::int64_t sum = 0;
    for (const auto& [phase, ms] : t.elapsed_ms) {
      if (phase != "total") sum += ms;
    }
    EXPECT_EQ(sum, t.elapsed_ms.at("total"));
  }
}

TEST(Refine, BatchIsDeterministicAcrossParallelism) {
  const auto records = testing::sabotaged_corpus();
  std::string reference;
  for (int parallelism : {1, 4, 16}) {
    BackendPool pool;
    Refiner refiner(mock_pipeline_config(), pool);
    std::string dump;
    for (const auto& t : refiner.refine_batch(records, parallelism)) dump += trace_to_json(t, false).dump() + "\n";
    if (reference.empty()) {
      reference = dump;
    } else {
      EXPECT_EQ(dump, reference) << "parallelism " << parallelism;
    }
  }
}

TEST(PostHook, AppliedToAnswers) {
  register_post_hook("test_upper", [](const PostHookContext& ctx) {
    std::string out = ctx.answer;
    for (auto& c : out) c = text::to_upper(c);
    return out;
  });
  BackendPool pool;
  auto cfg = mock_pipeline_config();
  cfg.post_hook = "test_upper";
  Refiner refiner(cfg, pool);
  auto& answerer = pool.get(testing::mock_spec());
  const auto shouted = refiner.answer("What is the capital of France?", answerer);
  EXPECT_EQ(shouted, "THIS ANSWER ADDRESSES: WHAT IS THE CAPITAL OF FRANCE?");
  EXPECT_TRUE(has_post_hook("identity"));

  cfg.post_hook = "missing_hook";
  EXPECT_THROW(validate(cfg), Error);
}

TEST(Config, JsonRoundTripAndValidation) {
  auto cfg = mock_pipeline_config();
  cfg.enable_ranking = false;
  cfg.max_description_iters = 5;
  cfg.post_hook = "identity";
  EXPECT_EQ(pipeline_config_from_json(Json(cfg)), cfg);
  EXPECT_EQ(pipeline_config_from_json(Json::object()), mock_pipeline_config());

  cfg.max_description_iters = 0;
  EXPECT_THROW(validate(cfg), Error);
  cfg = mock_pipeline_config();
  cfg.backends.erase("reflector");
  EXPECT_THROW(validate(cfg), Error);
  cfg = mock_pipeline_config();
  cfg.backends.erase("combined");
  EXPECT_EQ(backend_for(cfg, roles::kCombined).id, backend_for(cfg, roles::kStage3).id);
}

TEST(Config, TemplateOverrideChangesRequests) {
  const auto dir = testing::temp_dir("tmpl");
  datasets::write_file(dir / "classify.txt", "Return 2 for: {prompt}");
  auto cfg = mock_pipeline_config();
  cfg.prompt_templates["classify"] = (dir / "classify.txt").string();
  const auto set = templates_for(cfg);
  EXPECT_EQ(set.get("classify").user, "Return 2 for: {prompt}");
  EXPECT_NE(set.get("classify").version, TemplateSet::builtin().get("classify").version);
}

TEST(ParallelFor, CoversEveryIndexOnce) {
  std::vector<std::atomic<int>> hits(257);
  parallel_for(hits.size(), 8, [&](std::size_t i) { ++hits[i]; });
  for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
}

}  // namespace
}  // namespace mpr
