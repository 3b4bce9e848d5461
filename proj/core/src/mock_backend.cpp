#include "mpr/mock_backend.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <regex>
#include <sstream>

#include "mpr/error.hpp"
#include "mpr/resources.hpp"
#include "mpr/templates.hpp"
#include "mpr/text.hpp"

namespace mpr {
namespace {

constexpr std::string_view kContextMarker = "\n\nContext: ";

struct Token {
  std::size_t begin;
  std::size_t end;
};

template <typename Pred>
std::vector<Token> runs(std::string_view s, Pred pred) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < s.size()) {
    if (!pred(s[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < s.size() && pred(s[j])) ++j;
    out.push_back({i, j});
    i = j;
  }
  return out;
}

std::vector<std::string> lower_words(std::string_view s) {
  std::vector<std::string> out;
  for (const auto& t : runs(s, text::is_letter)) out.push_back(text::to_lower(s.substr(t.begin, t.end - t.begin)));
  return out;
}

// Optimal string alignment distance, capped: returns cap + 1 once exceeded.
std::size_t osa_distance(std::string_view a, std::string_view b, std::size_t cap) {
  const std::size_t n = a.size();
  const std::size_t m = b.size();
  if ((n > m ? n - m : m - n) > cap) return cap + 1;
  std::vector<std::vector<std::size_t>> d(n + 1, std::vector<std::size_t>(m + 1));
  for (std::size_t i = 0; i <= n; ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= m; ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t cost = a[i - 1] == b[j - 1] ? 0 : 1;
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + cost});
      if (i > 1 && j > 1 && a[i - 1] == b[j - 2] && a[i - 2] == b[j - 1]) {
        d[i][j] = std::min(d[i][j], d[i - 2][j - 2] + 1);
      }
    }
  }
  return d[n][m];
}

std::string match_case(std::string_view pattern, std::string word) {
  const bool all_upper = pattern.size() > 1 && std::all_of(pattern.begin(), pattern.end(), text::is_upper);
  if (all_upper) {
    for (char& c : word) c = text::to_upper(c);
  } else if (!pattern.empty() && text::is_upper(pattern.front()) && !word.empty()) {
    word.front() = text::to_upper(word.front());
  }
  return word;
}

std::string normalize_key(std::string_view s) {
  std::string t = text::to_lower(text::join(text::split_whitespace(s), " "));
  while (!t.empty() && (t.back() == '.' || t.back() == '?' || t.back() == '!')) t.pop_back();
  return text::trim(t);
}

std::string format_score(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "Score: %.2f", value);
  return buf;
}

double round2(double x) { return std::round(x * 100.0) / 100.0; }

const std::string& var(const ChatRequest& req, const std::string& name) {
  static const std::string kEmpty;
  const auto it = req.variables.find(name);
  return it == req.variables.end() ? kEmpty : it->second;
}

// Rule-based behaviour over a MockTable.
class World {
 public:
  explicit World(const MockTable& t) : t_(t) {}

  bool known(std::string_view lower) const {
    return t_.vocabulary.count(lower) > 0 || t_.proper_nouns.lookup(lower).has_value();
  }

  std::optional<std::string> correction_for(std::string_view token) const {
    if (auto it = t_.term_corrections.find(token); it != t_.term_corrections.end()) return it->second;
    const std::string lower = text::to_lower(token);
    for (const auto& [bad, good] : t_.term_corrections) {
      if (text::to_lower(bad) == lower && !known(lower)) return good;
    }
    return std::nullopt;
  }

  // Described terms present in `s`, in order of first appearance.
  std::vector<std::string> rare_terms(std::string_view s) const {
    std::vector<std::string> found;
    for (const auto& tok : runs(s, text::is_alnum)) {
      const std::string lower = text::to_lower(s.substr(tok.begin, tok.end - tok.begin));
      for (const auto& [term, _] : t_.descriptions) {
        if (text::to_lower(term) == lower && std::find(found.begin(), found.end(), term) == found.end()) {
          found.push_back(term);
        }
      }
    }
    return found;
  }

  bool has_term_corruption(std::string_view s) const {
    for (const auto& tok : runs(s, text::is_alnum)) {
      if (correction_for(s.substr(tok.begin, tok.end - tok.begin))) return true;
    }
    return false;
  }

  bool has_unknown_word(std::string_view s) const {
    for (const auto& w : lower_words(s)) {
      if (w.size() >= 2 && !known(w)) return true;
    }
    return false;
  }

  std::string classify(std::string_view prompt) const {
    if (has_term_corruption(prompt) || t_.paraphrases.count(normalize_key(prompt)) > 0) return "3";
    if (has_unknown_word(prompt)) return "2";
    if (rule_stage1_refine(prompt, t_.proper_nouns) != prompt) return "1";
    return "0";
  }

  std::string stage1(std::string_view prompt) const { return rule_stage1_refine(prompt, t_.proper_nouns); }

  std::string stage2(std::string_view prompt) const {
    std::string out;
    std::size_t cursor = 0;
    for (const auto& tok : runs(prompt, text::is_letter)) {
      out.append(prompt.substr(cursor, tok.begin - cursor));
      cursor = tok.end;
      const std::string word(prompt.substr(tok.begin, tok.end - tok.begin));
      out += repair_word(word);
    }
    out.append(prompt.substr(cursor));
    return out;
  }

  std::string stage3(std::string_view prompt) const {
    std::string corrected = apply_term_corrections(prompt);
    const std::string key = normalize_key(corrected);
    if (auto it = t_.paraphrases.find(key); it != t_.paraphrases.end()) return it->second;
    static const std::regex kTellMe(R"(^tell me about (.+)$)", std::regex::icase);
    std::smatch m;
    const std::string trimmed = text::trim(corrected);
    std::string body = trimmed;
    while (!body.empty() && (body.back() == '.' || body.back() == '?' || body.back() == '!')) body.pop_back();
    if (std::regex_match(body, m, kTellMe)) return "Can you explain " + m[1].str() + "?";
    return corrected;
  }

  std::string reflect(std::string_view prompt, std::string_view candidate) const {
    const auto terms = rare_terms(prompt);
    if (terms.empty()) return "YES, the prompt is self-contained.";
    const std::string cand = text::trim(candidate);
    if (cand.empty() || cand == "(none)") {
      return "NO, a definition of " + terms.front() + " is needed.";
    }
    for (const auto& term : terms) {
      const auto& list = t_.descriptions.find(term)->second;
      const auto it = std::find_if(list.begin(), list.end(), [&](const MockDescription& d) { return d.text == cand; });
      if (it != list.end()) {
        if (!it->sufficient) return "NO, the description of " + term + " is too vague.";
        continue;
      }
      if (text::to_lower(cand).find(text::to_lower(term)) == std::string::npos) {
        return "NO, " + term + " is still unexplained.";
      }
    }
    return "YES, the context covers the key terms.";
  }

  std::string describe(std::string_view prompt, std::string_view iteration) const {
    const auto terms = rare_terms(prompt);
    if (terms.empty()) return "The prompt uses only common terms and needs no extra context.";
    const auto& list = t_.descriptions.find(terms.front())->second;
    std::size_t index = 0;
    try {
      index = iteration.empty() ? 0 : static_cast<std::size_t>(std::stoul(std::string(iteration)));
    } catch (const std::exception&) {
      index = 0;
    }
    return list[index % list.size()].text;
  }

  std::string answer(std::string_view prompt) const {
    std::string body(prompt);
    std::string context;
    if (const auto pos = body.find(kContextMarker); pos != std::string::npos) {
      context = body.substr(pos + kContextMarker.size());
      body.resize(pos);
    }
    std::string out = "This answer addresses: " + text::trim(body);
    if (!context.empty()) out += " " + text::trim(context);
    for (const auto& term : rare_terms(body)) {
      if (text::to_lower(context).find(text::to_lower(term)) == std::string::npos) {
        out += " " + term + " " + t_.fabrication;
      }
    }
    return out;
  }

  struct Assessment {
    double hi;
    double cqs;
  };

  Assessment assess(std::string_view question, std::string_view answer) const {
    const auto words = lower_words(answer);
    const auto grounded = lower_words(question);
    std::size_t oov = 0;
    for (const auto& w : words) {
      if (!known(w) && std::find(grounded.begin(), grounded.end(), w) == grounded.end()) ++oov;
    }
    const double oov_ratio = words.empty() ? 1.0 : static_cast<double>(oov) / static_cast<double>(words.size());
    std::size_t fabrications = 0;
    if (!t_.fabrication.empty()) {
      for (auto pos = answer.find(t_.fabrication); pos != std::string_view::npos;
           pos = answer.find(t_.fabrication, pos + 1)) {
        ++fabrications;
      }
    }
    std::size_t case_anomalies = 0;
    for (const auto& tok : runs(answer, text::is_letter)) {
      const auto w = answer.substr(tok.begin, tok.end - tok.begin);
      bool lower = false;
      bool inner_upper = false;
      for (std::size_t i = 0; i < w.size(); ++i) {
        lower = lower || text::is_lower(w[i]);
        inner_upper = inner_upper || (i > 0 && text::is_upper(w[i]));
      }
      if (lower && inner_upper && !t_.proper_nouns.lookup(text::to_lower(w))) ++case_anomalies;
    }
    const std::string trimmed = text::trim(answer);
    const bool unterminated = trimmed.empty() || (trimmed.back() != '.' && trimmed.back() != '?' && trimmed.back() != '!');

    const double hi = std::clamp(round2(oov_ratio + 0.3 * static_cast<double>(fabrications)), 0.0, 1.0);
    double cqs = 0.92 - 1.2 * oov_ratio - 0.25 * static_cast<double>(fabrications) -
                 0.05 * static_cast<double>(std::min<std::size_t>(case_anomalies, 4)) - (unterminated ? 0.04 : 0.0);
    cqs = std::clamp(round2(cqs), 0.05, 0.95);
    return {hi, cqs};
  }

  std::string judge_pair(std::string_view question, std::string_view a, std::string_view b) const {
    const auto sa = assess(question, a);
    const auto sb = assess(question, b);
    if (sa.hi < sb.hi || (sa.hi == sb.hi && sa.cqs > sb.cqs)) return "Verdict: A";
    if (sb.hi < sa.hi || (sa.hi == sb.hi && sb.cqs > sa.cqs)) return "Verdict: B";
    return "Verdict: TIE";
  }

  std::string relevance(std::string_view prompt, std::string_view description) const {
    const auto terms = rare_terms(prompt);
    if (terms.empty()) return format_score(0.5);
    std::size_t covered = 0;
    for (const auto& term : terms) {
      if (text::to_lower(description).find(text::to_lower(term)) != std::string_view::npos) ++covered;
    }
    return format_score(0.5 + 0.4 * static_cast<double>(covered) / static_cast<double>(terms.size()));
  }

  std::string coherence(std::string_view description) const {
    const std::string d = text::trim(description);
    const std::size_t n = text::split_whitespace(d).size();
    const bool terminated = !d.empty() && d.back() == '.';
    return format_score(terminated && n >= 5 && n <= 40 ? 0.85 : 0.6);
  }

 private:
  std::string repair_word(const std::string& word) const {
    if (auto fix = correction_for(word)) return *fix;
    const std::string lower = text::to_lower(word);
    if (known(lower) || lower.size() < 2) return word;
    std::optional<std::string> best;
    bool best_same_initial = false;
    for (const auto& candidate : t_.vocabulary) {
      if (osa_distance(lower, candidate, 1) != 1) continue;
      const bool same_initial = !candidate.empty() && candidate.front() == lower.front();
      if (!best || (same_initial && !best_same_initial)) {
        best = candidate;
        best_same_initial = same_initial;
      }
    }
    if (!best) return word;
    if (auto proper = t_.proper_nouns.lookup(*best)) return std::string(*proper);
    return match_case(word, *best);
  }

  std::string apply_term_corrections(std::string_view s) const {
    std::string out;
    std::size_t cursor = 0;
    for (const auto& tok : runs(s, text::is_alnum)) {
      out.append(s.substr(cursor, tok.begin - cursor));
      cursor = tok.end;
      const auto token = s.substr(tok.begin, tok.end - tok.begin);
      const auto fix = correction_for(token);
      out += fix ? *fix : std::string(token);
    }
    out.append(s.substr(cursor));
    return out;
  }

  const MockTable& t_;
};

bool fixture_matches(const MockFixture& f, const ChatRequest& req) {
  if (f.template_id != req.template_id) return false;
  for (const auto& [k, v] : f.where) {
    if (var(req, k) != v) return false;
  }
  const std::string& value = var(req, f.field);
  switch (f.match) {
    case MockFixture::Match::kExact: return value == f.value;
    case MockFixture::Match::kContains: return value.find(f.value) != std::string::npos;
    case MockFixture::Match::kPrefix: return value.rfind(f.value, 0) == 0;
    case MockFixture::Match::kRegex: return std::regex_search(value, std::regex(f.value));
  }
  return false;
}

[[noreturn]] void raise_simulated(const std::string& kind, const std::string& backend) {
  if (kind == "timeout") throw Error(ErrorCode::kTimeout, "simulated timeout on " + backend);
  if (kind == "malformed") throw Error(ErrorCode::kMalformedResponse, "simulated malformed response on " + backend);
  if (kind.rfind("http_", 0) == 0) throw HttpStatusError(std::stoi(kind.substr(5)), "simulated on " + backend);
  throw Error(ErrorCode::kInvalidConfig, "unknown simulated error '" + kind + "'");
}

MockFixture::Match parse_match(const std::string& s) {
  if (s == "exact") return MockFixture::Match::kExact;
  if (s == "contains") return MockFixture::Match::kContains;
  if (s == "prefix") return MockFixture::Match::kPrefix;
  if (s == "regex") return MockFixture::Match::kRegex;
  throw Error(ErrorCode::kInvalidConfig, "unknown fixture match kind '" + s + "'");
}

}  // namespace

MockTable MockTable::from_json(const Json& j) {
  MockTable t;
  t.version = j.value("version", std::string{"0"});
  t.proper_nouns = ProperNouns(j.value("proper_nouns", std::vector<std::string>{}));
  for (const auto& w : j.value("vocabulary", std::vector<std::string>{})) t.vocabulary.insert(text::to_lower(w));
  const Json corrections = j.value("term_corrections", Json::object());
  const Json paraphrases = j.value("paraphrases", Json::object());
  const Json descriptions = j.value("descriptions", Json::object());
  const Json fixtures = j.value("fixtures", Json::array());
  for (const auto& [k, v] : corrections.items()) {
    t.term_corrections.emplace(k, v.get<std::string>());
  }
  for (const auto& [k, v] : paraphrases.items()) {
    t.paraphrases.emplace(normalize_key(k), v.get<std::string>());
  }
  for (const auto& [term, list] : descriptions.items()) {
    std::vector<MockDescription> entries;
    for (const auto& e : list) {
      if (e.is_string()) {
        entries.push_back({e.get<std::string>(), true});
      } else {
        entries.push_back({e.at("text").get<std::string>(), e.value("sufficient", true)});
      }
    }
    if (entries.empty()) throw Error(ErrorCode::kInvalidConfig, "mock description list for '" + term + "' is empty");
    t.descriptions.emplace(term, std::move(entries));
  }
  t.fabrication = j.value("fabrication", std::string{});
  for (const auto& f : fixtures) {
    MockFixture fx;
    fx.template_id = f.at("template").get<std::string>();
    fx.field = f.value("field", std::string{"prompt"});
    fx.match = parse_match(f.value("match", std::string{"exact"}));
    fx.value = f.value("value", std::string{});
    if (auto it = f.find("where"); it != f.end()) {
      for (const auto& [k, v] : it->items()) fx.where.emplace(k, v.get<std::string>());
    }
    if (auto it = f.find("response"); it != f.end()) fx.response = it->get<std::string>();
    if (auto it = f.find("error"); it != f.end()) fx.error = it->get<std::string>();
    if (!fx.response && !fx.error) {
      throw Error(ErrorCode::kInvalidConfig, "mock fixture for '" + fx.template_id + "' has neither response nor error");
    }
    t.fixtures.push_back(std::move(fx));
  }
  return t;
}

MockTable MockTable::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open mock table " + path.string());
  try {
    return from_json(Json::parse(in));
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, "mock table " + path.string() + ": " + e.what());
  }
}

std::shared_ptr<const MockTable> MockTable::builtin() {
  static const auto table =
      std::make_shared<const MockTable>(from_json(Json::parse(resources::find("data/mock_table.json"))));
  return table;
}

MockBackend::MockBackend(BackendSpec spec)
    : Backend(std::move(spec)),
      table_(this->spec().data_path ? std::make_shared<const MockTable>(MockTable::load(*this->spec().data_path))
                                    : MockTable::builtin()) {}

MockBackend::MockBackend(BackendSpec spec, std::shared_ptr<const MockTable> table)
    : Backend(std::move(spec)), table_(std::move(table)) {}

std::string MockBackend::do_complete(const ChatRequest& req) {
  for (const auto& f : table_->fixtures) {
    if (!fixture_matches(f, req)) continue;
    if (f.error) raise_simulated(*f.error, spec().id);
    return *f.response;
  }

  const World world(*table_);
  const std::string& id = req.template_id;
  const std::string& prompt = req.variables.count("prompt") ? var(req, "prompt") : req.user;
  namespace ids = template_ids;
  if (id == ids::kClassify) return world.classify(prompt);
  if (id == ids::kStage1) return world.stage1(prompt);
  if (id == ids::kStage2) return world.stage2(prompt);
  if (id == ids::kStage3) return world.stage3(prompt);
  if (id == ids::kCombined) return world.stage3(world.stage2(world.stage1(prompt)));
  if (id == ids::kReflect) return world.reflect(prompt, var(req, "candidate"));
  if (id == ids::kDescribe) return world.describe(prompt, var(req, "iteration"));
  if (id == ids::kAnswer || id.empty()) return world.answer(prompt);
  if (id == ids::kJudgeHallucination) return format_score(world.assess(var(req, "question"), var(req, "answer")).hi);
  if (id == ids::kJudgeQuality) return format_score(world.assess(var(req, "question"), var(req, "answer")).cqs);
  if (id == ids::kJudgeRelevance) return world.relevance(var(req, "prompt"), var(req, "description"));
  if (id == ids::kJudgeCoherence) return world.coherence(var(req, "description"));
  if (id == ids::kJudgePairwise) return world.judge_pair(var(req, "question"), var(req, "answer_a"), var(req, "answer_b"));
  throw Error(ErrorCode::kUnsupportedByBackend, "mock backend has no rule for template '" + id + "'");
}

std::vector<TokenScore> MockBackend::do_score_tokens(std::string_view text) { return surrogate_token_scores(text); }

std::vector<TokenScore> surrogate_token_scores(std::string_view input) {
  std::vector<TokenScore> scores;
  for (auto& token : text::split_whitespace(input)) {
    std::size_t noisy = 0;
    for (char c : token) {
      if (!text::is_alnum(c) && c != ' ') ++noisy;
    }
    // Continuation bytes of multi-byte characters are noise too, but count once per code point.
    for (char c : token) {
      if ((static_cast<unsigned char>(c) & 0xC0) == 0x80) --noisy;
    }
    const double len = static_cast<double>(text::codepoint_count(token));
    const double lp = -(1.0 + 0.1 * static_cast<double>(noisy)) - 0.05 * std::abs(len - 5.0);
    scores.push_back({std::move(token), lp});
  }
  if (scores.empty()) throw Error(ErrorCode::kEmptyInput, "nothing to score");
  return scores;
}

}  // namespace mpr
