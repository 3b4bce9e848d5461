#include "mpr/judge.hpp"

#include <regex>

#include "mpr/error.hpp"
#include "mpr/text.hpp"

namespace mpr::judge {
namespace {

constexpr std::string_view kScoreReminder =
    "\n\nReply with a single number between 0 and 1, for example \"Score: 0.5\".";
constexpr std::string_view kVerdictReminder = "\n\nReply with exactly one of: Verdict: A, Verdict: B, Verdict: TIE.";

void require_text(std::string_view s, std::string_view what) {
  if (text::trim(s).empty()) throw Error(ErrorCode::kEmptyInput, std::string(what) + " is empty");
}

}  // namespace

double parse_unit_score(std::string_view text) {
  static const std::regex kLiteral(R"((-?)(\d+(?:\.\d+)?|\.\d+)(\s*/\s*(\d+(?:\.\d+)?)|\s*%)?)");
  const std::string s(text);
  std::smatch m;
  if (!std::regex_search(s, m, kLiteral)) {
    throw Error(ErrorCode::kUnparseable, "no numeric literal in judge response");
  }
  // A minus sign glued to a word ("top-3") is a hyphen, not a sign.
  const auto pos = static_cast<std::size_t>(m.position(0));
  const bool negative = m[1].length() > 0 && (pos == 0 || !text::is_alnum(s[pos - 1]));
  double value = std::stod(m[2].str());
  if (negative) value = -value;
  if (m[4].matched) {
    const double denom = std::stod(m[4].str());
    if (denom <= 0) throw Error(ErrorCode::kOutOfRange, "zero denominator in '" + m.str(0) + "'");
    value /= denom;
  } else if (m[3].matched) {
    value /= 100.0;
  }
  if (!(value >= 0.0 && value <= 1.0)) {
    throw Error(ErrorCode::kOutOfRange, "judge score " + m.str(0) + " outside [0, 1]");
  }
  return value;
}

std::optional<PairVerdict> parse_pair_verdict(std::string_view text) {
  static const std::regex kLabelled(R"(verdict\s*[:=]?\s*\**\s*(tie|a|b)\b)", std::regex::icase);
  static const std::regex kBare(R"(\b(TIE|Tie|tie|A|B)\b)");
  const std::string s(text);
  std::smatch m;
  if (!std::regex_search(s, m, kLabelled) && !std::regex_search(s, m, kBare)) return std::nullopt;
  const std::string v = text::to_lower(m[1].str());
  if (v == "a") return PairVerdict::kA;
  if (v == "b") return PairVerdict::kB;
  return PairVerdict::kTie;
}

std::string_view to_string(Facet f) { return f == Facet::kRelevance ? "relevance" : "coherence"; }

Facet parse_facet(std::string_view text) {
  const std::string t = text::to_lower(text);
  if (t == "relevance") return Facet::kRelevance;
  if (t == "coherence") return Facet::kCoherence;
  throw Error(ErrorCode::kInvalidConfig, "unknown facet '" + std::string(text) + "'");
}

Judge::Judge(Backend& backend, TemplateSet templates, int max_reasks)
    : backend_(backend), templates_(std::move(templates)), max_reasks_(max_reasks) {}

std::string Judge::ask(std::string_view template_id, const std::map<std::string, std::string>& vars, int attempt) {
  const auto& tmpl = templates_.get(template_id);
  ChatRequest req;
  if (!tmpl.system.empty()) req.system = tmpl.system;
  req.user = text::render(tmpl.user, vars);
  req.backend_id = backend_.spec().id;
  req.template_id = tmpl.id;
  req.template_version = tmpl.version;
  req.variables = vars;
  if (attempt > 0) {
    const bool pairwise = template_id == template_ids::kJudgePairwise;
    req.user += pairwise ? kVerdictReminder : kScoreReminder;
    req.variables["reask"] = std::to_string(attempt);
  }
  return backend_.complete(req);
}

JudgeVerdictRaw Judge::score(std::string_view template_id, std::map<std::string, std::string> vars) {
  JudgeVerdictRaw out;
  for (int attempt = 0; attempt <= max_reasks_; ++attempt) {
    out.raw_text = ask(template_id, vars, attempt);
    out.attempts = attempt + 1;
    try {
      out.score = parse_unit_score(out.raw_text);
      return out;
    } catch (const Error& e) {
      // An out-of-range literal is a real answer, not a formatting slip.
      if (e.code() == ErrorCode::kOutOfRange) throw;
    }
  }
  throw Error(ErrorCode::kUnparseable, "no score in judge response after " + std::to_string(out.attempts) +
                                           " attempts: '" + out.raw_text + "'");
}

JudgeVerdictRaw Judge::hallucination_raw(std::string_view question, std::string_view answer) {
  require_text(question, "question");
  require_text(answer, "answer");
  return score(template_ids::kJudgeHallucination, {{"question", std::string(question)}, {"answer", std::string(answer)}});
}

JudgeVerdictRaw Judge::quality_raw(std::string_view question, std::string_view answer) {
  require_text(question, "question");
  require_text(answer, "answer");
  return score(template_ids::kJudgeQuality, {{"question", std::string(question)}, {"answer", std::string(answer)}});
}

double Judge::hallucination(std::string_view question, std::string_view answer) {
  return *hallucination_raw(question, answer).score;
}

double Judge::quality(std::string_view question, std::string_view answer) {
  return *quality_raw(question, answer).score;
}

double Judge::description(std::string_view prompt, std::string_view description, Facet facet) {
  require_text(prompt, "prompt");
  require_text(description, "description");
  const auto id = facet == Facet::kRelevance ? template_ids::kJudgeRelevance : template_ids::kJudgeCoherence;
  return *score(id, {{"prompt", std::string(prompt)}, {"description", std::string(description)}}).score;
}

PairVerdict Judge::verdict(std::map<std::string, std::string> vars, int& attempts) {
  std::string raw;
  for (int attempt = 0; attempt <= max_reasks_; ++attempt) {
    raw = ask(template_ids::kJudgePairwise, vars, attempt);
    ++attempts;
    if (auto v = parse_pair_verdict(raw)) return *v;
  }
  throw Error(ErrorCode::kUnparseable, "no verdict in judge response: '" + raw + "'");
}

ComparisonOutcome Judge::compare(std::string_view question, std::string_view answer_a, std::string_view answer_b) {
  require_text(question, "question");
  require_text(answer_a, "answer_a");
  require_text(answer_b, "answer_b");
  int attempts = 0;
  const auto first = verdict(
      {{"question", std::string(question)}, {"answer_a", std::string(answer_a)}, {"answer_b", std::string(answer_b)}},
      attempts);
  const auto second = verdict(
      {{"question", std::string(question)}, {"answer_a", std::string(answer_b)}, {"answer_b", std::string(answer_a)}},
      attempts);
  const auto as_outcome = [](PairVerdict v, bool swapped) {
    if (v == PairVerdict::kTie) return ComparisonOutcome::kTie;
    const bool a_wins = (v == PairVerdict::kA) != swapped;
    return a_wins ? ComparisonOutcome::kWin : ComparisonOutcome::kLoss;
  };
  const auto o1 = as_outcome(first, false);
  const auto o2 = as_outcome(second, true);
  return o1 == o2 ? o1 : ComparisonOutcome::kTie;
}

double score_hallucination(std::string_view question, std::string_view answer, const BackendSpec& judge) {
  auto backend = make_backend(judge);
  return Judge(*backend).hallucination(question, answer);
}

double score_quality(std::string_view question, std::string_view answer, const BackendSpec& judge) {
  auto backend = make_backend(judge);
  return Judge(*backend).quality(question, answer);
}

double score_description(std::string_view prompt, std::string_view description, const BackendSpec& judge,
                         Facet facet) {
  auto backend = make_backend(judge);
  return Judge(*backend).description(prompt, description, facet);
}

ComparisonOutcome compare_pair(std::string_view question, std::string_view answer_a, std::string_view answer_b,
                               const BackendSpec& judge) {
  auto backend = make_backend(judge);
  return Judge(*backend).compare(question, answer_a, answer_b);
}

}  // namespace mpr::judge
