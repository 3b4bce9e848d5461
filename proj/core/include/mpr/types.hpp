#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mpr {

// Corruption severity. Stages are cumulative: Stage2 text also carries Stage1 defects.
enum class SabotageStage : std::uint8_t { kClean = 0, kStage1 = 1, kStage2 = 2, kStage3 = 3 };

constexpr int to_int(SabotageStage s) noexcept { return static_cast<int>(s); }

// Throws Error(kInvalidConfig) outside 0..3.
SabotageStage stage_from_int(int value);

// "clean", "stage1", ...
std::string_view to_string(SabotageStage s);

// Accepts "0".."3", "clean", "stage1".."stage3" (case-insensitive).
SabotageStage parse_stage(std::string_view text);

struct PromptRecord {
  std::string id;
  std::string text;
  std::optional<std::string> gold;
  std::optional<SabotageStage> stage_label;
  std::string dataset;
  std::optional<double> wellformedness;

  bool operator==(const PromptRecord&) const = default;
};

struct Description {
  std::string text;
  double perplexity = 1.0;
  int iteration = 0;

  bool operator==(const Description&) const = default;
};

struct StageOutput {
  SabotageStage stage = SabotageStage::kClean;
  std::string text;

  bool operator==(const StageOutput&) const = default;
};

// One backend round trip made while refining a record.
struct BackendCall {
  std::string phase;
  std::string template_id;
  std::string backend_id;
  std::int64_t elapsed_ms = 0;

  bool operator==(const BackendCall&) const = default;
};

enum class TraceStatus : std::uint8_t { kOk, kFailed };

struct RefinementTrace {
  std::string record_id;
  std::string input;
  SabotageStage classified_stage = SabotageStage::kClean;
  std::vector<StageOutput> stage_outputs;
  std::vector<bool> sufficiency_verdicts;
  std::vector<Description> candidates;
  std::optional<Description> selected;
  std::string final_prompt;
  // Phase name -> wall-clock milliseconds. Always contains "total" once refine returns.
  std::map<std::string, std::int64_t> elapsed_ms;
  std::vector<BackendCall> calls;
  std::vector<std::string> warnings;
  TraceStatus status = TraceStatus::kOk;
  std::optional<std::string> error_phase;
  std::optional<std::string> error_message;

  bool operator==(const RefinementTrace&) const = default;
};

struct ScoreCard {
  double hi = 0.0;
  double cqs = 0.0;
  std::optional<double> relevance;
  std::optional<double> coherence;

  bool operator==(const ScoreCard&) const = default;
};

// True when every present field lies in [0, 1].
bool is_valid(const ScoreCard& card) noexcept;

enum class ComparisonOutcome : std::uint8_t { kWin, kLoss, kTie };

std::string_view to_string(ComparisonOutcome o);
ComparisonOutcome parse_outcome(std::string_view text);

// Maps Win<->Loss, keeps Tie.
constexpr ComparisonOutcome flip(ComparisonOutcome o) noexcept {
  switch (o) {
    case ComparisonOutcome::kWin:
      return ComparisonOutcome::kLoss;
    case ComparisonOutcome::kLoss:
      return ComparisonOutcome::kWin;
    case ComparisonOutcome::kTie:
      break;
  }
  return ComparisonOutcome::kTie;
}

}  // namespace mpr
