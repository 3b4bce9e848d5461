#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "mpr/backend.hpp"
#include "mpr/rule_stage1.hpp"

namespace mpr {

// Canned response for requests whose variable `field` matches `value`.
struct MockFixture {
  enum class Match : std::uint8_t { kExact, kContains, kPrefix, kRegex };

  std::string template_id;
  std::string field = "prompt";
  Match match = Match::kExact;
  std::string value;
  // Additional variables that must equal the given values.
  std::map<std::string, std::string> where;
  std::optional<std::string> response;
  // Simulated failure instead of a response: "timeout", "http_500", "malformed".
  std::optional<std::string> error;
};

struct MockDescription {
  std::string text;
  bool sufficient = true;
};

// Data that drives the mock backend: the fixture table plus the knowledge its
// rule-based behaviour draws on (vocabulary, term corrections, paraphrases,
// descriptions).
struct MockTable {
  std::string version;
  ProperNouns proper_nouns;
  std::set<std::string, std::less<>> vocabulary;
  // corrupted -> canonical, e.g. GAM -> GAN.
  std::map<std::string, std::string, std::less<>> term_corrections;
  // normalized prompt -> paraphrase.
  std::map<std::string, std::string, std::less<>> paraphrases;
  // term -> descriptions in generation order.
  std::map<std::string, std::vector<MockDescription>, std::less<>> descriptions;
  // Sentence the mock answerer emits for a term it has no context for.
  std::string fabrication;
  std::vector<MockFixture> fixtures;

  static MockTable from_json(const Json& j);
  static MockTable load(const std::filesystem::path& path);
  static std::shared_ptr<const MockTable> builtin();
};

// Fully deterministic backend. A request is answered by the first matching
// fixture, otherwise by the rule set registered for its template id:
//
//   classify       digit 0-3 from the anomalies present in `prompt`
//   stage1         rule_stage1_refine
//   stage2         term corrections plus edit-distance-1 spelling repair
//   stage3         paraphrase table, "tell me about X" rewrite, term corrections
//   combined       stage1 -> stage2 -> stage3 in one call
//   reflect        YES unless `prompt` holds a described term not yet covered by `candidate`
//   describe       the `iteration`-th description of the first described term
//   answer         echo of the prompt, plus context or a fabricated sentence per term
//   judge_*        scores derived from out-of-vocabulary words and fabrications
//
// score_tokens uses a surrogate: per whitespace token,
//   logprob = -(1 + 0.1 * noisy) - 0.05 * |length - 5|
// where noisy counts characters outside [A-Za-z0-9 ] and length is in code points.
class MockBackend final : public Backend {
 public:
  explicit MockBackend(BackendSpec spec);
  MockBackend(BackendSpec spec, std::shared_ptr<const MockTable> table);

  const MockTable& table() const noexcept { return *table_; }

 protected:
  std::string do_complete(const ChatRequest& req) override;
  std::vector<TokenScore> do_score_tokens(std::string_view text) override;

 private:
  std::shared_ptr<const MockTable> table_;
};

// The surrogate scorer on its own.
std::vector<TokenScore> surrogate_token_scores(std::string_view text);

}  // namespace mpr
