#include "mpr/rule_stage1.hpp"

#include <array>
#include <fstream>
#include <sstream>

#include "mpr/error.hpp"
#include "mpr/resources.hpp"
#include "mpr/text.hpp"

namespace mpr {
namespace {

constexpr std::array<std::string_view, 16> kInterrogatives = {
    "what", "who", "where", "when", "why", "how", "which", "is",
    "are", "do", "does", "can", "could", "should", "would", "whom",
};

constexpr bool is_space_sensitive_punct(char c) {
  return c == '.' || c == ',' || c == '?' || c == '!' || c == ';' || c == ':';
}
constexpr bool needs_space_after(char c) { return c == ',' || c == ';' || c == ':' || c == '?' || c == '!'; }
constexpr bool is_terminal(char c) { return c == '.' || c == '?' || c == '!'; }
constexpr bool is_opener(char c) { return c == '"' || c == '\'' || c == '(' || c == '['; }
constexpr bool is_closer(char c) { return c == '"' || c == '\'' || c == ')' || c == ']'; }

bool has_mixed_case(std::string_view word) {
  bool lower = false;
  bool inner_upper = false;
  for (std::size_t i = 0; i < word.size(); ++i) {
    lower = lower || text::is_lower(word[i]);
    inner_upper = inner_upper || (i > 0 && text::is_upper(word[i]));
  }
  return lower && inner_upper;
}

std::string normalize_spacing(std::string_view input) {
  const std::string collapsed = text::join(text::split_whitespace(input), " ");
  std::string out;
  out.reserve(collapsed.size() + 8);
  for (std::size_t i = 0; i < collapsed.size(); ++i) {
    const char c = collapsed[i];
    if (c == ' ' && i + 1 < collapsed.size() && is_space_sensitive_punct(collapsed[i + 1])) continue;
    out.push_back(c);
    if (needs_space_after(c) && i + 1 < collapsed.size() && text::is_letter(collapsed[i + 1])) out.push_back(' ');
  }
  return out;
}

void fix_word_case(std::string& s, const ProperNouns& nouns) {
  std::size_t i = 0;
  while (i < s.size()) {
    if (!text::is_letter(s[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < s.size() && text::is_letter(s[j])) ++j;
    const std::string_view word(s.data() + i, j - i);
    if (has_mixed_case(word)) {
      std::string lowered = text::to_lower(word);
      if (const auto canonical = nouns.lookup(lowered); canonical && canonical->size() == lowered.size()) {
        lowered.assign(*canonical);
      }
      s.replace(i, lowered.size(), lowered);
    }
    i = j;
  }
}

void capitalize_sentences(std::string& s) {
  bool at_start = true;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (at_start) {
      if (is_opener(s[i])) continue;
      s[i] = text::to_upper(s[i]);
      at_start = false;
    }
    if (is_terminal(s[i]) && i + 1 < s.size() && s[i + 1] == ' ') {
      at_start = true;
      ++i;  // skip the space
    }
  }
}

std::string first_word_lower(std::string_view sentence) {
  std::size_t i = 0;
  while (i < sentence.size() && !text::is_letter(sentence[i])) {
    if (sentence[i] == ' ') return {};
    ++i;
  }
  std::size_t j = i;
  while (j < sentence.size() && text::is_letter(sentence[j])) ++j;
  return text::to_lower(sentence.substr(i, j - i));
}

void ensure_terminal(std::string& s) {
  while (!s.empty() && (s.back() == ',' || s.back() == ';' || s.back() == ':' || s.back() == ' ')) s.pop_back();
  std::size_t k = s.size();
  while (k > 0 && is_closer(s[k - 1])) --k;
  if (k > 0 && is_terminal(s[k - 1])) return;

  // Last sentence begins after the final "<terminal><space>" boundary.
  std::size_t start = 0;
  for (std::size_t i = 0; i + 1 < s.size(); ++i) {
    if (is_terminal(s[i]) && s[i + 1] == ' ') start = i + 2;
  }
  const std::string lead = first_word_lower(std::string_view(s).substr(start));
  bool question = false;
  for (auto q : kInterrogatives) question = question || lead == q;
  s.push_back(question ? '?' : '.');
}

}  // namespace

ProperNouns::ProperNouns(const std::vector<std::string>& canonical) {
  for (const auto& noun : canonical) {
    if (!noun.empty()) by_lower_.insert_or_assign(text::to_lower(noun), noun);
  }
}

ProperNouns ProperNouns::parse(std::string_view content) {
  std::vector<std::string> nouns;
  std::istringstream in{std::string(content)};
  std::string line;
  while (std::getline(in, line)) {
    line = text::trim(line);
    if (line.empty() || line.front() == '#') continue;
    nouns.push_back(line);
  }
  return ProperNouns(nouns);
}

ProperNouns ProperNouns::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open proper-noun list " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

const ProperNouns& ProperNouns::builtin() {
  static const ProperNouns nouns = parse(resources::find("data/proper_nouns.txt"));
  return nouns;
}

std::optional<std::string_view> ProperNouns::lookup(std::string_view lowercase) const {
  const auto it = by_lower_.find(lowercase);
  if (it == by_lower_.end()) return std::nullopt;
  return std::string_view(it->second);
}

std::string rule_stage1_refine(std::string_view input, const ProperNouns& proper_nouns) {
  if (text::trim(input).empty()) throw Error(ErrorCode::kEmptyInput, "stage-1 input is blank");
  std::string s = normalize_spacing(input);
  fix_word_case(s, proper_nouns);
  capitalize_sentences(s);
  ensure_terminal(s);
  return s;
}

RuleStage1Backend::RuleStage1Backend(BackendSpec spec)
    : Backend(std::move(spec)),
      nouns_(this->spec().data_path ? ProperNouns::load(*this->spec().data_path) : ProperNouns::builtin()) {}

std::string RuleStage1Backend::do_complete(const ChatRequest& req) {
  const auto it = req.variables.find("prompt");
  return rule_stage1_refine(it != req.variables.end() ? it->second : req.user, nouns_);
}

std::vector<TokenScore> RuleStage1Backend::do_score_tokens(std::string_view) {
  throw Error(ErrorCode::kUnsupportedByBackend, "rule_stage1 backend '" + spec().id + "' cannot score tokens");
}

}  // namespace mpr
