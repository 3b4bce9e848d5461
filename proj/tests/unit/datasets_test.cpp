#include <gtest/gtest.h>

#include "mpr/datasets.hpp"
#include "mpr/error.hpp"
#include "test_support.hpp"

namespace mpr::datasets {
namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kInvalidConfig;
}

PromptRecord scored(std::string id, double w) {
  PromptRecord r;
  r.id = std::move(id);
  r.text = "text " + r.id;
  r.wellformedness = w;
  return r;
}

sabotage::SabotageConfig seed42() {
  sabotage::SabotageConfig cfg;
  cfg.seed = 42;
  cfg.term_lexicon = sabotage::default_lexicon();
  return cfg;
}

TEST(LoadCorpus, Jsonl) {
  const auto recs = parse_corpus_jsonl(
      R"({"id":"a","text":"What is BERT?","gold":"What is BERT?","wellformedness":0.9}
{"id":"b","text":"what is a GAM","dataset":"mqr"}

{"id":"c","text":"Café crème?","stage_label":1})",
      "fallback");
  ASSERT_EQ(recs.size(), 3u);
  EXPECT_EQ(recs[0].dataset, "fallback");
  EXPECT_EQ(recs[1].dataset, "mqr");
  EXPECT_EQ(recs[0].wellformedness, 0.9);
  EXPECT_EQ(recs[2].stage_label, SabotageStage::kStage1);
  EXPECT_EQ(recs[2].text, "Café crème?");
}

TEST(LoadCorpus, Errors) {
  EXPECT_EQ(code_of([] { parse_corpus_jsonl("{\"id\":\"a\",\"text\":\"\"}"); }), ErrorCode::kMalformedLine);
  EXPECT_EQ(code_of([] { parse_corpus_jsonl("{\"id\":\"a\",\"text\":\"x\"}\nnot json"); }), ErrorCode::kMalformedLine);
  try {
    parse_corpus_jsonl("{\"id\":\"a\",\"text\":\"x\"}\n{\"id\":\"b\"}");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMalformedLine);
    EXPECT_NE(std::string(e.what()).find('2'), std::string::npos);
  }
  EXPECT_EQ(code_of([] { parse_corpus_jsonl("{\"id\":\"a\",\"text\":\"x\"}\n{\"id\":\"a\",\"text\":\"y\"}"); }),
            ErrorCode::kDuplicateId);
  EXPECT_EQ(code_of([] { load_corpus("/nonexistent/corpus.jsonl"); }), ErrorCode::kIoError);
}

TEST(LoadCorpus, Csv) {
  const auto recs = parse_corpus_csv("question\nWhat is BERT?\n\"Is it, really?\"\n", "csvset");
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[0].id, "1");
  EXPECT_EQ(recs[1].id, "2");
  EXPECT_EQ(recs[1].text, "Is it, really?");
  EXPECT_EQ(recs[1].dataset, "csvset");
}

TEST(LoadCorpus, FileRoundTripAndStemDefault) {
  const auto dir = testing::temp_dir("corpus");
  auto recs = load_corpus(testing::fixture("corpus_50.jsonl"));
  ASSERT_EQ(recs.size(), 50u);
  recs[0].wellformedness = 0.25;
  recs[1].stage_label = SabotageStage::kStage3;
  recs[2].text = "naïve über café?";
  EXPECT_EQ(write_corpus_jsonl(recs, dir / "out.jsonl"), 50u);
  EXPECT_EQ(load_corpus(dir / "out.jsonl"), recs);

  write_file(dir / "plain.jsonl", "{\"id\":\"x\",\"text\":\"hi\"}\n");
  EXPECT_EQ(load_corpus(dir / "plain.jsonl")[0].dataset, "plain");
}

TEST(Filter, StrictStableAndUnscored) {
  const std::vector<PromptRecord> recs{scored("a", 0.2), scored("b", 0.5), scored("c", 0.7), scored("d", 0.1)};
  auto kept = filter_illformed(recs);
  ASSERT_EQ(kept.size(), 2u);
  EXPECT_EQ(kept[0].id, "a");
  EXPECT_EQ(kept[1].id, "d");
  EXPECT_EQ(filter_illformed(recs, 1.0).size(), 4u);
  EXPECT_TRUE(filter_illformed({}).empty());

  PromptRecord unscored;
  unscored.id = "u";
  unscored.text = "t";
  EXPECT_TRUE(filter_illformed({unscored}).empty());
  EXPECT_EQ(filter_illformed({unscored}, 0.5, true).size(), 1u);
  EXPECT_THROW(filter_illformed(recs, 1.5), Error);
}

TEST(BuildPairs, CardinalityAndTasks) {
  auto recs = load_corpus(testing::fixture("corpus_50.jsonl"));
  recs.resize(10);
  const auto pairs = build_pairs(recs, SabotageStage::kStage1, seed42());
  ASSERT_EQ(pairs.size(), 20u);
  EXPECT_EQ(std::count_if(pairs.begin(), pairs.end(), [](auto& e) { return e.task == Task::kFixPunctuation; }), 10);
  EXPECT_EQ(std::count_if(pairs.begin(), pairs.end(), [](auto& e) { return e.task == Task::kClassifyStage; }), 10);
  for (const auto& e : pairs) {
    EXPECT_FALSE(e.instruction.empty());
    EXPECT_FALSE(e.input.empty());
    EXPECT_FALSE(e.output.empty());
    EXPECT_EQ(e.instruction, instruction_for(e.task));
    if (e.task == Task::kClassifyStage) EXPECT_EQ(e.output, "1");
  }
  EXPECT_EQ(task_for_stage(SabotageStage::kStage2), Task::kFixTypos);
  EXPECT_EQ(task_for_stage(SabotageStage::kStage3), Task::kParaphrase);
  EXPECT_EQ(code_of([&] { build_pairs(recs, SabotageStage::kClean, seed42()); }), ErrorCode::kCleanStageRequested);
}

TEST(BuildPairs, InversePairPropertyOnFixture) {
  const auto recs = load_corpus(testing::fixture("corpus_50.jsonl"));
  const auto cfg = seed42();
  for (auto stage : {SabotageStage::kStage1, SabotageStage::kStage2, SabotageStage::kStage3}) {
    for (const auto& e : build_pairs(recs, stage, cfg)) {
      if (e.task == Task::kClassifyStage) continue;
      ASSERT_FALSE(e.source_id.empty());
      EXPECT_EQ(sabotage::sabotage(e.output, stage, sabotage::for_record(cfg, e.source_id)).corrupted, e.input)
          << e.source_id;
    }
  }
}

TEST(BuildPairs, Seed42Golden) {
  auto recs = load_corpus(testing::fixture("corpus_50.jsonl"));
  recs.resize(3);
  std::string out;
  for (auto stage : {SabotageStage::kStage1, SabotageStage::kStage2, SabotageStage::kStage3}) {
    out += to_jsonl(build_pairs(recs, stage, seed42()));
  }
  EXPECT_EQ(out, testing::golden("pairs_3records_seed42.jsonl", out));
  // Same input, same bytes.
  std::string again;
  for (auto stage : {SabotageStage::kStage1, SabotageStage::kStage2, SabotageStage::kStage3}) {
    again += to_jsonl(build_pairs(recs, stage, seed42()));
  }
  EXPECT_EQ(again, out);
}

TEST(DescribePairs, Basics) {
  const std::string vit = "ViT is a neural network architecture used for image classification.";
  const auto one = build_describe_pairs({{"ViT", vit}});
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].task, Task::kDescribeTerm);
  EXPECT_EQ(one[0].input, "ViT");
  EXPECT_EQ(one[0].output, vit);
  EXPECT_TRUE(build_describe_pairs({}).empty());
  EXPECT_EQ(build_describe_pairs({{"ViT", vit}, {"ViT", vit}, {"", "x"}, {"GAN", ""}}).size(), 2u);

  const auto rows = parse_term_descriptions_tsv("# terms\nViT\t" + vit + "\n\nGAN\tGenerative adversarial network.\r\n");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[1].second, "Generative adversarial network.");
}

TEST(Emit, RoundTripWithUnicode) {
  const auto dir = testing::temp_dir("emit");
  std::vector<InstructionExample> ex;
  for (int i = 0; i < 5; ++i) {
    ex.push_back({std::string(instruction_for(Task::kFixTypos)), "naïve cafe " + std::to_string(i),
                  "naïve café — " + std::to_string(i) + " 日本", Task::kFixTypos, "id" + std::to_string(i)});
  }
  ex.push_back(build_describe_pairs({{"ViT", "Vision Transformer."}})[0]);
  EXPECT_EQ(emit_jsonl(ex, dir / "ex.jsonl"), 6u);
  const auto text = read_file(dir / "ex.jsonl");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 6);
  EXPECT_NE(text.find("naïve café — 0 日本"), std::string::npos);
  EXPECT_EQ(load_examples(dir / "ex.jsonl"), ex);
  const Json j = ex.back();
  EXPECT_FALSE(j.contains("id"));
  EXPECT_EQ(j.at("task"), "describe_term");
  // A regular file cannot act as a directory.
  EXPECT_EQ(code_of([&] { emit_jsonl(ex, dir / "ex.jsonl" / "x.jsonl"); }), ErrorCode::kIoError);
}

TEST(Tasks, RoundTrip) {
  for (auto t : {Task::kFixPunctuation, Task::kFixTypos, Task::kParaphrase, Task::kDescribeTerm, Task::kClassifyStage}) {
    EXPECT_EQ(parse_task(to_string(t)), t);
  }
  EXPECT_THROW(parse_task("summarize"), Error);
}

}  // namespace
}  // namespace mpr::datasets
