#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mpr/backend.hpp"
#include "mpr/pool.hpp"
#include "mpr/templates.hpp"
#include "mpr/types.hpp"

namespace mpr {

// Backend roles a pipeline draws on. "combined" is optional and falls back to
// the stage3 backend.
namespace roles {
inline constexpr std::string_view kClassifier = "classifier";
inline constexpr std::string_view kStage1 = "stage1";
inline constexpr std::string_view kStage2 = "stage2";
inline constexpr std::string_view kStage3 = "stage3";
inline constexpr std::string_view kCombined = "combined";
inline constexpr std::string_view kDescriber = "describer";
inline constexpr std::string_view kReflector = "reflector";
inline constexpr std::string_view kScorer = "scorer";
}  // namespace roles

struct PipelineConfig {
  bool enable_descriptions = true;
  bool enable_multistage = true;
  bool enable_ranking = true;
  int max_description_iters = 3;
  // Re-asks after an unparseable classifier or reflector reply.
  int max_reasks = 2;
  std::map<std::string, BackendSpec> backends;
  // Template id -> template file replacing the built-in text.
  std::map<std::string, std::string> prompt_templates;
  std::optional<std::string> post_hook;
  bool operator==(const PipelineConfig&) const = default;
};

// Every role backed by one mock backend with the given id.
PipelineConfig mock_pipeline_config(const std::string& backend_id = "mock");

// Throws kInvalidConfig for unresolved roles, bad limits or unknown hooks.
void validate(const PipelineConfig& cfg);
const BackendSpec& backend_for(const PipelineConfig& cfg, std::string_view role);

void to_json(Json& j, const PipelineConfig& cfg);
// Template paths are resolved against base_dir.
PipelineConfig pipeline_config_from_json(const Json& j, const std::filesystem::path& base_dir = {});

// Built-in templates with the config's overrides applied.
TemplateSet templates_for(const PipelineConfig& cfg);

// First of the literals 0..3 in the reply.
std::optional<SabotageStage> parse_stage_reply(std::string_view text);
// First standalone YES or NO, case-insensitive.
std::optional<bool> parse_yes_no(std::string_view text);

// Minimum perplexity (earliest iteration on ties) or, with ranking disabled,
// the iteration-0 candidate.
std::optional<Description> select_description(const std::vector<Description>& cands, bool enable_ranking);

// Joins the corrected prompt and the selected context.
inline constexpr std::string_view kContextSeparator = "\n\nContext: ";
std::string assemble_prompt(std::string_view corrected, const std::optional<Description>& selected);

// Composition point for post-hoc mitigation applied to generated answers.
struct PostHookContext {
  std::string prompt;
  std::string answer;
  Backend* answerer = nullptr;
};
using PostHook = std::function<std::string(const PostHookContext&)>;
// "identity" is always registered. Registration is thread-safe.
void register_post_hook(const std::string& name, PostHook hook);
bool has_post_hook(std::string_view name);
const PostHook& post_hook(std::string_view name);

class Refiner {
 public:
  Refiner(PipelineConfig cfg, BackendPool& pool);

  const PipelineConfig& config() const noexcept { return cfg_; }
  const TemplateSet& templates() const noexcept { return templates_; }

  // Operations below record their backend calls into `trace` when given.
  SabotageStage classify_stage(std::string_view prompt, RefinementTrace* trace = nullptr);
  std::vector<StageOutput> run_corrections(std::string_view prompt, SabotageStage stage,
                                           RefinementTrace* trace = nullptr);
  bool check_sufficiency(std::string_view prompt, std::string_view candidate = {}, RefinementTrace* trace = nullptr);
  std::vector<Description> generate_descriptions(std::string_view prompt, RefinementTrace* trace = nullptr);
  std::optional<Description> select(const std::vector<Description>& cands) const {
    return select_description(cands, cfg_.enable_ranking);
  }

  // Full run. Never throws for per-record failures; the trace carries
  // status failed plus the phase and message instead.
  RefinementTrace refine(const PromptRecord& record);
  // Output order follows input order regardless of parallelism.
  std::vector<RefinementTrace> refine_batch(const std::vector<PromptRecord>& records, int parallelism);

  // Answers a prompt through the answer template and applies the configured
  // post hook.
  std::string answer(std::string_view prompt, Backend& answerer) const;

 private:
  std::string call(std::string_view role, std::string_view phase, std::string_view template_id,
                   std::map<std::string, std::string> vars, RefinementTrace* trace, int attempt = 0);

  PipelineConfig cfg_;
  BackendPool& pool_;
  TemplateSet templates_;
};

// Runs fn(i) for i in [0, count) on up to `parallelism` threads.
void parallel_for(std::size_t count, int parallelism, const std::function<void(std::size_t)>& fn);

}  // namespace mpr
