#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "mpr/backend.hpp"
#include "mpr/templates.hpp"
#include "mpr/types.hpp"

namespace mpr::judge {

// First decimal literal in the text, in [0, 1]. "85/100" and "85%" are
// normalized. Throws kUnparseable when there is no literal and kOutOfRange
// when the value lies outside [0, 1].
double parse_unit_score(std::string_view text);

enum class PairVerdict : std::uint8_t { kA, kB, kTie };

// "Verdict: A" style answers first, otherwise the first standalone A, B or TIE.
std::optional<PairVerdict> parse_pair_verdict(std::string_view text);

enum class Facet : std::uint8_t { kRelevance, kCoherence };
std::string_view to_string(Facet f);
Facet parse_facet(std::string_view text);

struct JudgeVerdictRaw {
  std::string raw_text;
  std::optional<double> score;
  std::optional<ComparisonOutcome> outcome;
  int attempts = 0;
};

// Scores answers through a judge backend. Parse failures are re-asked up to
// max_reasks times with a format reminder appended.
class Judge {
 public:
  Judge(Backend& backend, TemplateSet templates = TemplateSet::builtin(), int max_reasks = 2);

  JudgeVerdictRaw hallucination_raw(std::string_view question, std::string_view answer);
  JudgeVerdictRaw quality_raw(std::string_view question, std::string_view answer);

  double hallucination(std::string_view question, std::string_view answer);
  double quality(std::string_view question, std::string_view answer);
  // Throws kEmptyInput for an empty description.
  double description(std::string_view prompt, std::string_view description, Facet facet);

  // Two calls with the answers in both orders. Agreement gives that outcome,
  // disagreement a tie. The result is from answer_a's point of view.
  ComparisonOutcome compare(std::string_view question, std::string_view answer_a, std::string_view answer_b);

 private:
  JudgeVerdictRaw score(std::string_view template_id, std::map<std::string, std::string> vars);
  PairVerdict verdict(std::map<std::string, std::string> vars, int& attempts);
  std::string ask(std::string_view template_id, const std::map<std::string, std::string>& vars, int attempt);

  Backend& backend_;
  TemplateSet templates_;
  int max_reasks_;
};

// One-shot helpers that build a backend from the spec.
double score_hallucination(std::string_view question, std::string_view answer, const BackendSpec& judge);
double score_quality(std::string_view question, std::string_view answer, const BackendSpec& judge);
double score_description(std::string_view prompt, std::string_view description, const BackendSpec& judge,
                         Facet facet);
ComparisonOutcome compare_pair(std::string_view question, std::string_view answer_a, std::string_view answer_b,
                               const BackendSpec& judge);

}  // namespace mpr::judge
