#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "mpr/serialize.hpp"
#include "mpr/types.hpp"

// Deterministic corruption of clean text into Stage 1/2/3 ill-formed text.
//
// Every injector returns the corrupted string together with an edit log. Edits
// are applied in list order; each offset is a byte offset into the string as it
// stands after all earlier edits. Replaying the log over the original always
// reproduces the corrupted text (see apply_edits).
//
// Stages are cumulative. Each stage draws from its own RNG stream derived from
// the config seed, so zeroing the Stage-k probabilities leaves the output of the
// lower stages untouched.
namespace mpr::sabotage {

enum class TypoOp : std::uint8_t { kAdjacentKey = 0, kTranspose = 1, kDelete = 2, kDuplicate = 3 };
inline constexpr std::size_t kTypoOpCount = 4;

std::string_view to_string(TypoOp op);

// Characters that Stage 1 may delete.
inline constexpr std::string_view kPunctuationSet = ".,?!;:'";

struct SabotageConfig {
  std::uint64_t seed = 0;
  double p_case_flip = 0.1;
  double p_punct_drop = 0.5;
  double p_typo = 0.15;
  // Weights indexed by TypoOp.
  std::array<double, kTypoOpCount> typo_ops{1.0, 1.0, 1.0, 1.0};
  // canonical term -> corrupted term. Matched case-insensitively on whole tokens.
  std::map<std::string, std::string> term_lexicon;
  double p_term = 1.0;

  bool operator==(const SabotageConfig&) const = default;
};

// Throws Error(kInvalidConfig) on out-of-range probabilities or all-zero typo weights.
void validate(const SabotageConfig& cfg);

struct Edit {
  std::string kind;
  std::size_t offset = 0;
  std::string before;
  std::string after;

  bool operator==(const Edit&) const = default;
};

struct SabotageResult {
  std::string original;
  std::string corrupted;
  SabotageStage stage = SabotageStage::kStage1;
  std::vector<Edit> edits;

  bool operator==(const SabotageResult&) const = default;
};

SabotageResult sabotage_stage1(std::string_view text, const SabotageConfig& cfg);
SabotageResult sabotage_stage2(std::string_view text, const SabotageConfig& cfg);
SabotageResult sabotage_stage3(std::string_view text, const SabotageConfig& cfg);

// Dispatches on stage. Throws kCleanStageRequested for Clean, kEmptyInput for blank text.
SabotageResult sabotage(std::string_view text, SabotageStage stage, const SabotageConfig& cfg);

// Copy of cfg whose seed is mixed with the record id.
SabotageConfig for_record(const SabotageConfig& cfg, std::string_view record_id);

// Replays edits; throws Error(kInvalidConfig) if an edit does not match the text.
std::string apply_edits(std::string_view original, const std::vector<Edit>& edits);

// Neighbouring keys on a US QWERTY layout (lowercase letters, alphabetical order).
// Empty for non-letters.
std::string_view qwerty_neighbors(char c) noexcept;

// Two-column TSV (canonical<TAB>corrupted). Blank lines and '#' comments are skipped.
std::map<std::string, std::string> parse_lexicon_tsv(std::string_view content);
std::map<std::string, std::string> load_lexicon_tsv(const std::filesystem::path& path);

// Shipped ML-jargon lexicon (BERT->VERT, GAN->GAM, ViT->VlT, ...).
std::map<std::string, std::string> default_lexicon();

void to_json(Json& j, const SabotageConfig& cfg);
// Missing fields keep their defaults. `lexicon_tsv` paths resolve against base_dir.
SabotageConfig config_from_json(const Json& j, const std::filesystem::path& base_dir = {});

void to_json(Json& j, const Edit& e);
void from_json(const Json& j, Edit& e);

namespace detail {

// Single-word typo primitives; `pos` indexes into word. Exposed for tests.
std::string replace_adjacent(std::string_view word, std::size_t pos, std::size_t neighbor_index);
std::string transpose_at(std::string_view word, std::size_t pos);
std::string delete_at(std::string_view word, std::size_t pos);
std::string duplicate_at(std::string_view word, std::size_t pos);

}  // namespace detail

}  // namespace mpr::sabotage
