#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mpr/backend.hpp"

namespace mpr {

// Case-insensitive lookup of proper nouns by their canonical spelling
// ("France", "ViT", "QLoRA").
class ProperNouns {
 public:
  ProperNouns() = default;
  explicit ProperNouns(const std::vector<std::string>& canonical);

  // One noun per line; blank lines and '#' comments are skipped.
  static ProperNouns parse(std::string_view content);
  static ProperNouns load(const std::filesystem::path& path);
  // The shipped list.
  static const ProperNouns& builtin();

  // Canonical spelling for a lowercase word, if known.
  std::optional<std::string_view> lookup(std::string_view lowercase) const;

  std::size_t size() const noexcept { return by_lower_.size(); }

 private:
  std::map<std::string, std::string, std::less<>> by_lower_;
};

// Deterministic punctuation/capitalization corrector:
//   whitespace runs collapse to one space; spaces before , . ? ! ; : are removed
//   and one space follows , ; : ? ! when a letter comes next; letter runs with
//   mixed internal case are lowercased and proper nouns restored to their
//   canonical spelling; sentence starts are capitalized; a missing terminal mark
//   becomes "?" after an interrogative lead word and "." otherwise.
// Idempotent. Throws Error(kEmptyInput) for blank text.
std::string rule_stage1_refine(std::string_view text, const ProperNouns& proper_nouns);

// Backend that answers every completion with rule_stage1_refine on the
// request's `prompt` variable (or the raw user message). Cannot score tokens.
class RuleStage1Backend final : public Backend {
 public:
  explicit RuleStage1Backend(BackendSpec spec);

 protected:
  std::string do_complete(const ChatRequest& req) override;
  std::vector<TokenScore> do_score_tokens(std::string_view text) override;

 private:
  ProperNouns nouns_;
};

}  // namespace mpr
