#include "mpr/pipeline.hpp"

#include <spdlog/spdlog.h>

#include <atomic>
#include <exception>
#include <mutex>
#include <regex>
#include <thread>

#include "mpr/error.hpp"
#include "mpr/metrics.hpp"
#include "mpr/text.hpp"
#include "mpr/timing.hpp"

namespace mpr {
namespace {

constexpr std::string_view kRequiredRoles[] = {roles::kClassifier, roles::kStage1,    roles::kStage2, roles::kStage3,
                                               roles::kDescriber,  roles::kReflector, roles::kScorer};

constexpr std::string_view kNoCandidate = "(none)";

std::mutex& hook_mutex() {
  static std::mutex m;
  return m;
}

std::map<std::string, PostHook, std::less<>>& hook_registry() {
  static std::map<std::string, PostHook, std::less<>> hooks{
      {"identity", [](const PostHookContext& ctx) { return ctx.answer; }}};
  return hooks;
}

std::string_view stage_role(SabotageStage s) {
  switch (s) {
    case SabotageStage::kStage1:
      return roles::kStage1;
    case SabotageStage::kStage2:
      return roles::kStage2;
    default:
      return roles::kStage3;
  }
}

std::string_view stage_template(SabotageStage s) {
  switch (s) {
    case SabotageStage::kStage1:
      return template_ids::kStage1;
    case SabotageStage::kStage2:
      return template_ids::kStage2;
    default:
      return template_ids::kStage3;
  }
}

std::string reminder_for(std::string_view template_id) {
  if (template_id == template_ids::kClassify) return "\n\nAnswer with one digit: 0, 1, 2 or 3.";
  if (template_id == template_ids::kReflect) return "\n\nAnswer YES or NO.";
  return {};
}

}  // namespace

PipelineConfig mock_pipeline_config(const std::string& backend_id) {
  PipelineConfig cfg;
  BackendSpec spec;
  spec.id = backend_id;
  spec.kind = BackendKind::kMock;
  for (const auto role : kRequiredRoles) cfg.backends.emplace(std::string(role), spec);
  return cfg;
}

const BackendSpec& backend_for(const PipelineConfig& cfg, std::string_view role) {
  if (const auto it = cfg.backends.find(std::string(role)); it != cfg.backends.end()) return it->second;
  if (role == roles::kCombined) return backend_for(cfg, roles::kStage3);
  throw Error(ErrorCode::kInvalidConfig, "no backend configured for role '" + std::string(role) + "'");
}

void validate(const PipelineConfig& cfg) {
  for (const auto role : kRequiredRoles) validate(backend_for(cfg, role));
  for (const auto& [role, spec] : cfg.backends) {
    if (role != roles::kCombined &&
        std::find(std::begin(kRequiredRoles), std::end(kRequiredRoles), role) == std::end(kRequiredRoles)) {
      throw Error(ErrorCode::kInvalidConfig, "unknown pipeline role '" + role + "'");
    }
    validate(spec);
  }
  if (cfg.max_description_iters < 1) throw Error(ErrorCode::kInvalidConfig, "max_description_iters must be >= 1");
  if (cfg.max_reasks < 0) throw Error(ErrorCode::kInvalidConfig, "max_reasks must be >= 0");
  if (cfg.post_hook && !has_post_hook(*cfg.post_hook)) {
    throw Error(ErrorCode::kInvalidConfig, "unknown post hook '" + *cfg.post_hook + "'");
  }
}

void to_json(Json& j, const PipelineConfig& cfg) {
  j = Json{{"enable_descriptions", cfg.enable_descriptions},
           {"enable_multistage", cfg.enable_multistage},
           {"enable_ranking", cfg.enable_ranking},
           {"max_description_iters", cfg.max_description_iters},
           {"max_reasks", cfg.max_reasks},
           {"backends", cfg.backends},
           {"prompt_templates", cfg.prompt_templates}};
  if (cfg.post_hook) j["post_hook"] = *cfg.post_hook;
}

PipelineConfig pipeline_config_from_json(const Json& j, const std::filesystem::path& base_dir) {
  PipelineConfig cfg = j.contains("backends") ? PipelineConfig{} : mock_pipeline_config();
  try {
    cfg.enable_descriptions = j.value("enable_descriptions", cfg.enable_descriptions);
    cfg.enable_multistage = j.value("enable_multistage", cfg.enable_multistage);
    cfg.enable_ranking = j.value("enable_ranking", cfg.enable_ranking);
    cfg.max_description_iters = j.value("max_description_iters", cfg.max_description_iters);
    cfg.max_reasks = j.value("max_reasks", cfg.max_reasks);
    if (j.contains("backends")) cfg.backends = j.at("backends").get<std::map<std::string, BackendSpec>>();
    if (j.contains("prompt_templates")) {
      for (const auto& [id, path] : j.at("prompt_templates").items()) {
        std::filesystem::path p = path.get<std::string>();
        if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
        cfg.prompt_templates[id] = p.string();
      }
    }
    if (j.contains("post_hook") && !j.at("post_hook").is_null()) cfg.post_hook = j.at("post_hook").get<std::string>();
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, std::string("pipeline config: ") + e.what());
  }
  validate(cfg);
  return cfg;
}

TemplateSet templates_for(const PipelineConfig& cfg) {
  TemplateSet set = TemplateSet::builtin();
  for (const auto& [id, path] : cfg.prompt_templates) set.load_file(id, path);
  return set;
}

std::optional<SabotageStage> parse_stage_reply(std::string_view text) {
  for (const char c : text) {
    if (c >= '0' && c <= '3') return stage_from_int(c - '0');
  }
  return std::nullopt;
}

std::optional<bool> parse_yes_no(std::string_view text) {
  static const std::regex kWord(R"(\b(yes|no)\b)", std::regex::icase);
  const std::string s(text);
  std::smatch m;
  if (!std::regex_search(s, m, kWord)) return std::nullopt;
  return text::to_lower(m[1].str()) == "yes";
}

std::optional<Description> select_description(const std::vector<Description>& cands, bool enable_ranking) {
  if (cands.empty()) return std::nullopt;
  if (!enable_ranking) {
    const auto it = std::min_element(cands.begin(), cands.end(),
                                     [](const Description& a, const Description& b) { return a.iteration < b.iteration; });
    return *it;
  }
  const Description* best = &cands.front();
  for (const auto& d : cands) {
    if (d.perplexity < best->perplexity || (d.perplexity == best->perplexity && d.iteration < best->iteration)) {
      best = &d;
    }
  }
  return *best;
}

std::string assemble_prompt(std::string_view corrected, const std::optional<Description>& selected) {
  std::string out(corrected);
  if (selected) {
    out += kContextSeparator;
    out += selected->text;
  }
  return out;
}

void register_post_hook(const std::string& name, PostHook hook) {
  std::lock_guard lock(hook_mutex());
  hook_registry()[name] = std::move(hook);
}

bool has_post_hook(std::string_view name) {
  std::lock_guard lock(hook_mutex());
  return hook_registry().find(name) != hook_registry().end();
}

const PostHook& post_hook(std::string_view name) {
  std::lock_guard lock(hook_mutex());
  const auto it = hook_registry().find(name);
  if (it == hook_registry().end()) throw Error(ErrorCode::kInvalidConfig, "unknown post hook '" + std::string(name) + "'");
  return it->second;
}

Refiner::Refiner(PipelineConfig cfg, BackendPool& pool)
    : cfg_(std::move(cfg)), pool_(pool), templates_(templates_for(cfg_)) {
  validate(cfg_);
}

std::string Refiner::call(std::string_view role, std::string_view phase, std::string_view template_id,
                          std::map<std::string, std::string> vars, RefinementTrace* trace, int attempt) {
  Backend& backend = pool_.get(backend_for(cfg_, role));
  const auto& tmpl = templates_.get(template_id);
  ChatRequest req;
  if (!tmpl.system.empty()) req.system = tmpl.system;
  req.user = text::render(tmpl.user, vars);
  req.backend_id = backend.spec().id;
  req.template_id = tmpl.id;
  req.template_version = tmpl.version;
  if (attempt > 0) {
    req.user += reminder_for(template_id);
    vars["reask"] = std::to_string(attempt);
  }
  req.variables = std::move(vars);
  auto [reply, ms] = measure_elapsed([&] { return backend.complete(req); });
  if (trace) trace->calls.push_back({std::string(phase), tmpl.id, backend.spec().id, ms});
  return reply;
}

SabotageStage Refiner::classify_stage(std::string_view prompt, RefinementTrace* trace) {
  if (text::trim(prompt).empty()) throw Error(ErrorCode::kEmptyInput, "prompt is empty");
  std::string reply;
  for (int attempt = 0; attempt <= cfg_.max_reasks; ++attempt) {
    reply = call(roles::kClassifier, "classify", template_ids::kClassify, {{"prompt", std::string(prompt)}}, trace,
                 attempt);
    if (auto stage = parse_stage_reply(reply)) return *stage;
  }
  throw Error(ErrorCode::kUnparseableClassification, "classifier reply has no stage digit: '" + reply + "'");
}

std::vector<StageOutput> Refiner::run_corrections(std::string_view prompt, SabotageStage stage, RefinementTrace* trace) {
  if (text::trim(prompt).empty()) throw Error(ErrorCode::kEmptyInput, "prompt is empty");
  std::vector<StageOutput> out;
  if (stage == SabotageStage::kClean) return out;

  const auto correct = [&](std::string_view role, std::string_view tmpl, const std::string& input) {
    std::string text = text::trim(call(role, "corrections", tmpl, {{"prompt", input}}, trace));
    if (text.empty()) throw Error(ErrorCode::kMalformedResponse, "empty correction from role " + std::string(role));
    return text;
  };

  if (!cfg_.enable_multistage) {
    out.push_back({stage, correct(roles::kCombined, template_ids::kCombined, std::string(prompt))});
    return out;
  }
  std::string current(prompt);
  for (int k = 1; k <= to_int(stage); ++k) {
    const auto s = stage_from_int(k);
    current = correct(stage_role(s), stage_template(s), current);
    out.push_back({s, current});
  }
  return out;
}

bool Refiner::check_sufficiency(std::string_view prompt, std::string_view candidate, RefinementTrace* trace) {
  if (text::trim(prompt).empty()) throw Error(ErrorCode::kEmptyInput, "prompt is empty");
  const std::string cand = candidate.empty() ? std::string(kNoCandidate) : std::string(candidate);
  const std::string phase = candidate.empty() ? "sufficiency" : "descriptions";
  std::string reply;
  for (int attempt = 0; attempt <= cfg_.max_reasks; ++attempt) {
    reply = call(roles::kReflector, phase, template_ids::kReflect, {{"prompt", std::string(prompt)}, {"candidate", cand}},
                 trace, attempt);
    if (auto verdict = parse_yes_no(reply)) return *verdict;
  }
  throw Error(ErrorCode::kUnparseableVerdict, "reflector reply has no YES/NO: '" + reply + "'");
}

std::vector<Description> Refiner::generate_descriptions(std::string_view prompt, RefinementTrace* trace) {
  if (!cfg_.enable_descriptions) throw Error(ErrorCode::kInvalidConfig, "description generation is disabled");
  if (text::trim(prompt).empty()) throw Error(ErrorCode::kEmptyInput, "prompt is empty");
  std::vector<Description> cands;
  for (int i = 0; i < cfg_.max_description_iters; ++i) {
    try {
      std::vector<std::string> previous;
      for (const auto& c : cands) previous.push_back("- " + c.text);
      const std::string text = text::trim(call(roles::kDescriber, "descriptions", template_ids::kDescribe,
                                                {{"prompt", std::string(prompt)},
                                                 {"iteration", std::to_string(i)},
                                                 {"previous", previous.empty() ? std::string(kNoCandidate)
                                                                               : text::join(previous, "\n")}},
                                                trace));
      if (text.empty()) throw Error(ErrorCode::kMalformedResponse, "describer returned an empty description");

      Backend& scorer = pool_.get(backend_for(cfg_, roles::kScorer));
      auto [scores, ms] = measure_elapsed([&] { return scorer.score_tokens(text); });
      if (trace) trace->calls.push_back({"descriptions", "score_tokens", scorer.spec().id, ms});
      cands.push_back({text, metrics::perplexity(scores), i});

      const bool sufficient = check_sufficiency(prompt, text, trace);
      if (trace) trace->sufficiency_verdicts.push_back(sufficient);
      if (sufficient) break;
    } catch (const Error& e) {
      if (cands.empty()) throw;
      const std::string warning = "description iteration " + std::to_string(i) + " failed: " + e.what();
      spdlog::warn("{}", warning);
      if (trace) trace->warnings.push_back(warning);
      break;
    }
  }
  return cands;
}

RefinementTrace Refiner::refine(const PromptRecord& record) {
  RefinementTrace trace;
  trace.record_id = record.id;
  trace.input = record.text;
  trace.final_prompt = record.text;
  PhaseClock clock;
  std::string phase = "input";
  try {
    if (text::trim(record.text).empty()) throw Error(ErrorCode::kEmptyInput, "record text is empty");

    phase = "classify";
    trace.classified_stage = classify_stage(record.text, &trace);
    clock.lap(phase);

    phase = "corrections";
    trace.stage_outputs = run_corrections(record.text, trace.classified_stage, &trace);
    if (!trace.stage_outputs.empty()) trace.final_prompt = trace.stage_outputs.back().text;
    clock.lap(phase);

    phase = "sufficiency";
    const bool sufficient = check_sufficiency(trace.final_prompt, {}, &trace);
    trace.sufficiency_verdicts.push_back(sufficient);
    clock.lap(phase);

    if (!sufficient && cfg_.enable_descriptions) {
      phase = "descriptions";
      trace.candidates = generate_descriptions(trace.final_prompt, &trace);
      clock.lap(phase);

      phase = "selection";
      trace.selected = select(trace.candidates);
      trace.final_prompt = assemble_prompt(trace.final_prompt, trace.selected);
      clock.lap(phase);
    }
  } catch (const std::exception& e) {
    clock.lap(phase);
    trace.status = TraceStatus::kFailed;
    trace.error_phase = phase;
    trace.error_message = e.what();
  }
  trace.elapsed_ms = clock.phases();
  trace.elapsed_ms["total"] = clock.total();
  return trace;
}

std::vector<RefinementTrace> Refiner::refine_batch(const std::vector<PromptRecord>& records, int parallelism) {
  std::vector<RefinementTrace> out(records.size());
  parallel_for(records.size(), parallelism, [&](std::size_t i) { out[i] = refine(records[i]); });
  return out;
}

std::string Refiner::answer(std::string_view prompt, Backend& answerer) const {
  if (text::trim(prompt).empty()) throw Error(ErrorCode::kEmptyInput, "prompt is empty");
  const auto& tmpl = templates_.get(template_ids::kAnswer);
  ChatRequest req;
  if (!tmpl.system.empty()) req.system = tmpl.system;
  req.variables = {{"prompt", std::string(prompt)}};
  req.user = text::render(tmpl.user, req.variables);
  req.backend_id = answerer.spec().id;
  req.template_id = tmpl.id;
  req.template_version = tmpl.version;
  std::string reply = text::trim(answerer.complete(req));
  if (!cfg_.post_hook) return reply;
  return post_hook(*cfg_.post_hook)(PostHookContext{std::string(prompt), std::move(reply), &answerer});
}

void parallel_for(std::size_t count, int parallelism, const std::function<void(std::size_t)>& fn) {
  const auto workers = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(parallelism, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace mpr
