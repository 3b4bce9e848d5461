#include "mpr/sabotage.hpp"

#include <fstream>
#include <sstream>

#include "mpr/error.hpp"
#include "mpr/hash.hpp"
#include "mpr/resources.hpp"
#include "mpr/rng.hpp"
#include "mpr/text.hpp"

namespace mpr::sabotage {
namespace {

constexpr std::uint64_t kStage1Salt = 0x5354414745310001ULL;
constexpr std::uint64_t kStage2Salt = 0x5354414745320002ULL;
constexpr std::uint64_t kStage3Salt = 0x5354414745330003ULL;

constexpr std::array<std::string_view, 26> kQwertyNeighbors = {
    "qswz",    // a
    "ghnv",    // b
    "dfvx",    // c
    "cefrsx",  // d
    "drsw",    // e
    "cdgrtv",  // f
    "bfhtvy",  // g
    "bgjnuy",  // h
    "jkou",    // i
    "hikmnu",  // j
    "ijlmo",   // k
    "kop",     // l
    "jkn",     // m
    "bhjm",    // n
    "iklp",    // o
    "lo",      // p
    "aw",      // q
    "deft",    // r
    "adewxz",  // s
    "fgry",    // t
    "hijy",    // u
    "bcfg",    // v
    "aeqs",    // w
    "cdsz",    // x
    "ghtu",    // y
    "asx",     // z
};

bool is_punct(char c) { return kPunctuationSet.find(c) != std::string_view::npos; }

bool is_terminal(char c) { return c == '.' || c == '?' || c == '!'; }

void require_text(std::string_view text) {
  if (text::trim(text).empty()) throw Error(ErrorCode::kEmptyInput, "sabotage input is blank");
}

// Substitutes `after` for `before` at `offset` and logs the edit.
void apply(std::string& s, std::vector<Edit>& log, std::string kind, std::size_t offset,
           std::string before, std::string after) {
  s.replace(offset, before.size(), after);
  log.push_back(Edit{std::move(kind), offset, std::move(before), std::move(after)});
}

SabotageResult stage1_impl(std::string_view text, const SabotageConfig& cfg) {
  SabotageResult result;
  result.original = std::string(text);
  result.stage = SabotageStage::kStage1;

  Rng rng(derive_seed(cfg.seed, kStage1Salt));
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    if (text::is_letter(c)) {
      if (rng.bernoulli(cfg.p_case_flip)) {
        const char flipped = text::flip_case(c);
        result.edits.push_back(Edit{"case_flip", out.size(), std::string(1, c), std::string(1, flipped)});
        out.push_back(flipped);
      } else {
        out.push_back(c);
      }
    } else if (is_punct(c)) {
      if (rng.bernoulli(cfg.p_punct_drop)) {
        result.edits.push_back(Edit{"punct_drop", out.size(), std::string(1, c), ""});
      } else {
        out.push_back(c);
      }
    } else {
      out.push_back(c);
    }
  }

  if (result.edits.empty()) {
    // Forced edit: flip the first letter, then drop the terminal punctuation.
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (text::is_letter(out[i])) {
        apply(out, result.edits, "case_flip", i, std::string(1, out[i]),
              std::string(1, text::flip_case(out[i])));
        break;
      }
    }
    std::size_t last = out.size();
    while (last > 0 && text::is_ascii_space(out[last - 1])) --last;
    if (last > 0 && is_terminal(out[last - 1])) {
      apply(out, result.edits, "punct_drop", last - 1, std::string(1, out[last - 1]), "");
    }
  }
  result.corrupted = std::move(out);
  return result;
}

struct Span {
  std::size_t begin;
  std::size_t end;
};

template <typename Pred>
std::vector<Span> runs(std::string_view s, Pred pred) {
  std::vector<Span> out;
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

char neighbor_with_case(char c, std::size_t index) {
  const auto neighbors = qwerty_neighbors(c);
  const char n = neighbors[index % neighbors.size()];
  return text::is_upper(c) ? text::to_upper(n) : n;
}

void stage2_typos(SabotageResult& result, const SabotageConfig& cfg) {
  Rng rng(derive_seed(cfg.seed, kStage2Salt));
  const std::string base = result.corrupted;
  std::string out;
  out.reserve(base.size() + 8);
  std::size_t cursor = 0;

  for (const Span& span : runs(base, text::is_letter)) {
    out.append(base, cursor, span.begin - cursor);
    cursor = span.end;
    const std::string word = base.substr(span.begin, span.end - span.begin);
    const std::size_t len = word.size();
    if (!rng.bernoulli(cfg.p_typo)) {
      out += word;
      continue;
    }

    std::vector<std::size_t> swappable;
    for (std::size_t i = 0; i + 1 < len; ++i) {
      if (word[i] != word[i + 1]) swappable.push_back(i);
    }
    std::array<double, kTypoOpCount> weights = cfg.typo_ops;
    if (len < 3 || swappable.empty()) weights[static_cast<std::size_t>(TypoOp::kTranspose)] = 0.0;
    if (len < 3) weights[static_cast<std::size_t>(TypoOp::kDelete)] = 0.0;
    const std::size_t pick = rng.weighted(weights);
    if (pick >= kTypoOpCount) {
      out += word;
      continue;
    }

    const std::size_t at = out.size();
    switch (static_cast<TypoOp>(pick)) {
      case TypoOp::kAdjacentKey: {
        const std::size_t pos = rng.below(len);
        const std::size_t choice = rng.below(qwerty_neighbors(word[pos]).size());
        const std::string changed = detail::replace_adjacent(word, pos, choice);
        result.edits.push_back(Edit{"typo_adjacent_key", at + pos, word.substr(pos, 1), changed.substr(pos, 1)});
        out += changed;
        break;
      }
      case TypoOp::kTranspose: {
        const std::size_t pos = swappable[rng.below(swappable.size())];
        const std::string changed = detail::transpose_at(word, pos);
        result.edits.push_back(Edit{"typo_transpose", at + pos, word.substr(pos, 2), changed.substr(pos, 2)});
        out += changed;
        break;
      }
      case TypoOp::kDelete: {
        const std::size_t pos = rng.below(len);
        result.edits.push_back(Edit{"typo_delete", at + pos, word.substr(pos, 1), ""});
        out += detail::delete_at(word, pos);
        break;
      }
      case TypoOp::kDuplicate: {
        const std::size_t pos = rng.below(len);
        result.edits.push_back(Edit{"typo_duplicate", at + pos, word.substr(pos, 1), word.substr(pos, 1) + word.substr(pos, 1)});
        out += detail::duplicate_at(word, pos);
        break;
      }
    }
  }
  out.append(base, cursor, std::string::npos);
  result.corrupted = std::move(out);
}

bool is_acronym(std::string_view token) {
  if (token.size() < 2 || token.size() > 6) return false;
  for (char c : token) {
    if (!text::is_upper(c)) return false;
  }
  return true;
}

void stage3_terms(SabotageResult& result, const SabotageConfig& cfg) {
  Rng rng(derive_seed(cfg.seed, kStage3Salt));
  std::map<std::string, std::string> lowered;
  for (const auto& [canonical, corrupted] : cfg.term_lexicon) lowered.emplace(text::to_lower(canonical), corrupted);

  const std::string base = result.corrupted;
  const auto tokens = runs(base, text::is_alnum);
  std::string out;
  out.reserve(base.size());
  std::size_t cursor = 0;
  bool found = false;
  for (const Span& span : tokens) {
    out.append(base, cursor, span.begin - cursor);
    cursor = span.end;
    const std::string token = base.substr(span.begin, span.end - span.begin);
    const auto it = lowered.find(text::to_lower(token));
    if (it == lowered.end()) {
      out += token;
      continue;
    }
    found = true;
    if (rng.bernoulli(cfg.p_term) && it->second != token) {
      result.edits.push_back(Edit{"term_replace", out.size(), token, it->second});
      out += it->second;
    } else {
      out += token;
    }
  }
  out.append(base, cursor, std::string::npos);
  result.corrupted = std::move(out);
  if (found) return;

  for (const Span& span : runs(result.corrupted, text::is_alnum)) {
    const std::string_view token = std::string_view(result.corrupted).substr(span.begin, span.end - span.begin);
    if (!is_acronym(token)) continue;
    // Same per-occurrence gate as lexicon terms, so p_term = 0 leaves Stage 2 output intact.
    if (!rng.bernoulli(cfg.p_term)) return;
    const std::size_t pos = rng.below(token.size());
    const char original = token[pos];
    const std::size_t choice = rng.below(qwerty_neighbors(original).size());
    const char replacement = neighbor_with_case(original, choice);
    apply(result.corrupted, result.edits, "acronym_corrupt", span.begin + pos, std::string(1, original),
          std::string(1, replacement));
    return;
  }
  result.edits.push_back(Edit{"no_term_found", 0, "", ""});
}

}  // namespace

std::string_view to_string(TypoOp op) {
  switch (op) {
    case TypoOp::kAdjacentKey: return "adjacent_key";
    case TypoOp::kTranspose: return "transpose";
    case TypoOp::kDelete: return "delete";
    case TypoOp::kDuplicate: return "duplicate";
  }
  return "adjacent_key";
}

void validate(const SabotageConfig& cfg) {
  auto check = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw Error(ErrorCode::kInvalidConfig, std::string(name) + " must lie in [0,1]");
    }
  };
  check(cfg.p_case_flip, "p_case_flip");
  check(cfg.p_punct_drop, "p_punct_drop");
  check(cfg.p_typo, "p_typo");
  check(cfg.p_term, "p_term");
  bool positive = false;
  for (double w : cfg.typo_ops) {
    if (!(w >= 0.0)) throw Error(ErrorCode::kInvalidConfig, "typo_ops weights must be nonnegative");
    positive = positive || w > 0.0;
  }
  if (!positive) throw Error(ErrorCode::kInvalidConfig, "typo_ops needs at least one positive weight");
}

SabotageResult sabotage_stage1(std::string_view text, const SabotageConfig& cfg) {
  require_text(text);
  validate(cfg);
  return stage1_impl(text, cfg);
}

SabotageResult sabotage_stage2(std::string_view text, const SabotageConfig& cfg) {
  require_text(text);
  validate(cfg);
  SabotageResult result = stage1_impl(text, cfg);
  stage2_typos(result, cfg);
  result.stage = SabotageStage::kStage2;
  return result;
}

SabotageResult sabotage_stage3(std::string_view text, const SabotageConfig& cfg) {
  require_text(text);
  validate(cfg);
  SabotageResult result = stage1_impl(text, cfg);
  stage2_typos(result, cfg);
  stage3_terms(result, cfg);
  result.stage = SabotageStage::kStage3;
  return result;
}

SabotageResult sabotage(std::string_view text, SabotageStage stage, const SabotageConfig& cfg) {
  switch (stage) {
    case SabotageStage::kClean:
      throw Error(ErrorCode::kCleanStageRequested, "cannot sabotage at the clean stage");
    case SabotageStage::kStage1: return sabotage_stage1(text, cfg);
    case SabotageStage::kStage2: return sabotage_stage2(text, cfg);
    case SabotageStage::kStage3: return sabotage_stage3(text, cfg);
  }
  throw Error(ErrorCode::kInvalidConfig, "unknown stage");
}

SabotageConfig for_record(const SabotageConfig& cfg, std::string_view record_id) {
  SabotageConfig out = cfg;
  out.seed = record_seed(cfg.seed, record_id);
  return out;
}

std::string apply_edits(std::string_view original, const std::vector<Edit>& edits) {
  std::string s(original);
  for (const Edit& e : edits) {
    if (e.offset > s.size() || s.compare(e.offset, e.before.size(), e.before) != 0) {
      throw Error(ErrorCode::kInvalidConfig, "edit '" + e.kind + "' at offset " + std::to_string(e.offset) +
                                                 " does not match the text");
    }
    s.replace(e.offset, e.before.size(), e.after);
  }
  return s;
}

std::string_view qwerty_neighbors(char c) noexcept {
  const char lower = text::to_lower(c);
  if (!text::is_lower(lower)) return {};
  return kQwertyNeighbors[static_cast<std::size_t>(lower - 'a')];
}

std::map<std::string, std::string> parse_lexicon_tsv(std::string_view content) {
  std::map<std::string, std::string> lexicon;
  std::istringstream in{std::string(content)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw Error(ErrorCode::kMalformedLine, "lexicon line " + std::to_string(line_no) + " has no tab");
    }
    std::string canonical = text::trim(line.substr(0, tab));
    std::string corrupted = text::trim(line.substr(tab + 1));
    if (canonical.empty() || corrupted.empty()) {
      throw Error(ErrorCode::kMalformedLine, "lexicon line " + std::to_string(line_no) + " has an empty column");
    }
    lexicon[std::move(canonical)] = std::move(corrupted);
  }
  return lexicon;
}

std::map<std::string, std::string> load_lexicon_tsv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open lexicon " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_lexicon_tsv(buf.str());
}

std::map<std::string, std::string> default_lexicon() {
  return parse_lexicon_tsv(resources::find("data/lexicon_ml.tsv"));
}

void to_json(Json& j, const SabotageConfig& cfg) {
  Json ops;
  for (std::size_t i = 0; i < kTypoOpCount; ++i) ops[std::string(to_string(static_cast<TypoOp>(i)))] = cfg.typo_ops[i];
  j = Json{{"seed", cfg.seed},         {"p_case_flip", cfg.p_case_flip}, {"p_punct_drop", cfg.p_punct_drop},
           {"p_typo", cfg.p_typo},     {"typo_ops", ops},                {"term_lexicon", cfg.term_lexicon},
           {"p_term", cfg.p_term}};
}

SabotageConfig config_from_json(const Json& j, const std::filesystem::path& base_dir) {
  SabotageConfig cfg;
  cfg.seed = j.value("seed", cfg.seed);
  cfg.p_case_flip = j.value("p_case_flip", cfg.p_case_flip);
  cfg.p_punct_drop = j.value("p_punct_drop", cfg.p_punct_drop);
  cfg.p_typo = j.value("p_typo", cfg.p_typo);
  cfg.p_term = j.value("p_term", cfg.p_term);
  if (auto it = j.find("typo_ops"); it != j.end()) {
    cfg.typo_ops.fill(0.0);
    for (const auto& [name, weight] : it->items()) {
      bool known = false;
      for (std::size_t i = 0; i < kTypoOpCount; ++i) {
        if (name == to_string(static_cast<TypoOp>(i))) {
          cfg.typo_ops[i] = weight.get<double>();
          known = true;
        }
      }
      if (!known) throw Error(ErrorCode::kInvalidConfig, "unknown typo op '" + name + "'");
    }
  }
  if (auto it = j.find("lexicon_tsv"); it != j.end()) {
    std::filesystem::path p = it->get<std::string>();
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    cfg.term_lexicon = load_lexicon_tsv(p);
  } else if (j.value("default_lexicon", false)) {
    cfg.term_lexicon = default_lexicon();
  }
  if (auto it = j.find("term_lexicon"); it != j.end()) {
    for (const auto& [k, v] : it->items()) cfg.term_lexicon[k] = v.get<std::string>();
  }
  validate(cfg);
  return cfg;
}

void to_json(Json& j, const Edit& e) {
  j = Json{{"kind", e.kind}, {"offset", e.offset}, {"before", e.before}, {"after", e.after}};
}

void from_json(const Json& j, Edit& e) {
  e.kind = j.at("kind").get<std::string>();
  e.offset = j.at("offset").get<std::size_t>();
  e.before = j.at("before").get<std::string>();
  e.after = j.at("after").get<std::string>();
}

namespace detail {

std::string replace_adjacent(std::string_view word, std::size_t pos, std::size_t neighbor_index) {
  std::string out(word);
  if (pos < out.size() && !qwerty_neighbors(out[pos]).empty()) out[pos] = neighbor_with_case(out[pos], neighbor_index);
  return out;
}

std::string transpose_at(std::string_view word, std::size_t pos) {
  std::string out(word);
  if (pos + 1 < out.size()) std::swap(out[pos], out[pos + 1]);
  return out;
}

std::string delete_at(std::string_view word, std::size_t pos) {
  std::string out(word);
  if (pos < out.size()) out.erase(pos, 1);
  return out;
}

std::string duplicate_at(std::string_view word, std::size_t pos) {
  std::string out(word);
  if (pos < out.size()) out.insert(pos, 1, out[pos]);
  return out;
}

}  // namespace detail

}  // namespace mpr::sabotage
