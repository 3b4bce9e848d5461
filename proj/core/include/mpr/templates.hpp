#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace mpr {

// A chat prompt template. The source text holds an optional system part and a
// user part separated by a line consisting of "---"; `{name}` placeholders are
// filled at render time.
struct PromptTemplate {
  std::string id;
  std::string system;
  std::string user;
  // First 16 hex digits of the source text digest. Part of every cache key.
  std::string version;
};

PromptTemplate parse_template(std::string id, std::string_view source);

// Template ids used by the pipeline, the answerer and the judge.
namespace template_ids {
inline constexpr std::string_view kClassify = "classify";
inline constexpr std::string_view kStage1 = "stage1";
inline constexpr std::string_view kStage2 = "stage2";
inline constexpr std::string_view kStage3 = "stage3";
inline constexpr std::string_view kCombined = "combined";
inline constexpr std::string_view kReflect = "reflect";
inline constexpr std::string_view kDescribe = "describe";
inline constexpr std::string_view kAnswer = "answer";
inline constexpr std::string_view kJudgeHallucination = "judge_hallucination";
inline constexpr std::string_view kJudgeQuality = "judge_quality";
inline constexpr std::string_view kJudgeRelevance = "judge_relevance";
inline constexpr std::string_view kJudgeCoherence = "judge_coherence";
inline constexpr std::string_view kJudgePairwise = "judge_pairwise";
}  // namespace template_ids

// Templates by id. Starts from the built-in set; individual ids can be
// replaced from files or inline text.
class TemplateSet {
 public:
  static TemplateSet builtin();

  const PromptTemplate& get(std::string_view id) const;
  bool contains(std::string_view id) const;

  void set(std::string id, std::string_view source);
  void load_file(std::string id, const std::filesystem::path& path);

  const std::map<std::string, PromptTemplate, std::less<>>& all() const { return templates_; }

 private:
  std::map<std::string, PromptTemplate, std::less<>> templates_;
};

}  // namespace mpr
