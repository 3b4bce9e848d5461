#include "mpr/types.hpp"

#include <cmath>

#include "mpr/error.hpp"
#include "mpr/serialize.hpp"
#include "mpr/text.hpp"

namespace mpr {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kCleanStageRequested: return "CleanStageRequested";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kTimeout: return "Timeout";
    case ErrorCode::kHttpStatus: return "HttpStatus";
    case ErrorCode::kMalformedResponse: return "MalformedResponse";
    case ErrorCode::kRetriesExhausted: return "RetriesExhausted";
    case ErrorCode::kUnsupportedByBackend: return "UnsupportedByBackend";
    case ErrorCode::kUnparseableClassification: return "UnparseableClassification";
    case ErrorCode::kUnparseableVerdict: return "UnparseableVerdict";
    case ErrorCode::kUnparseable: return "Unparseable";
    case ErrorCode::kOutOfRange: return "OutOfRange";
    case ErrorCode::kEmptyScores: return "EmptyScores";
    case ErrorCode::kEmptyOutcomes: return "EmptyOutcomes";
    case ErrorCode::kNoReferences: return "NoReferences";
    case ErrorCode::kMalformedLine: return "MalformedLine";
    case ErrorCode::kDuplicateId: return "DuplicateId";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kEmptyRows: return "EmptyRows";
  }
  return "Unknown";
}

SabotageStage stage_from_int(int value) {
  if (value < 0 || value > 3) {
    throw Error(ErrorCode::kInvalidConfig, "stage out of range: " + std::to_string(value));
  }
  return static_cast<SabotageStage>(value);
}

std::string_view to_string(SabotageStage s) {
  switch (s) {
    case SabotageStage::kClean: return "clean";
    case SabotageStage::kStage1: return "stage1";
    case SabotageStage::kStage2: return "stage2";
    case SabotageStage::kStage3: return "stage3";
  }
  return "clean";
}

SabotageStage parse_stage(std::string_view raw) {
  const std::string s = text::to_lower(text::trim(raw));
  if (s == "0" || s == "clean") return SabotageStage::kClean;
  if (s == "1" || s == "stage1") return SabotageStage::kStage1;
  if (s == "2" || s == "stage2") return SabotageStage::kStage2;
  if (s == "3" || s == "stage3") return SabotageStage::kStage3;
  throw Error(ErrorCode::kInvalidConfig, "unknown stage '" + std::string(raw) + "'");
}

bool is_valid(const ScoreCard& card) noexcept {
  auto in_unit = [](double x) { return x >= 0.0 && x <= 1.0; };
  return in_unit(card.hi) && in_unit(card.cqs) && (!card.relevance || in_unit(*card.relevance)) &&
         (!card.coherence || in_unit(*card.coherence));
}

std::string_view to_string(ComparisonOutcome o) {
  switch (o) {
    case ComparisonOutcome::kWin: return "win";
    case ComparisonOutcome::kLoss: return "loss";
    case ComparisonOutcome::kTie: return "tie";
  }
  return "tie";
}

ComparisonOutcome parse_outcome(std::string_view raw) {
  const std::string s = text::to_lower(text::trim(raw));
  if (s == "win") return ComparisonOutcome::kWin;
  if (s == "loss") return ComparisonOutcome::kLoss;
  if (s == "tie") return ComparisonOutcome::kTie;
  throw Error(ErrorCode::kInvalidConfig, "unknown comparison outcome '" + std::string(raw) + "'");
}

// --- JSON -----------------------------------------------------------------

void to_json(Json& j, SabotageStage s) { j = to_int(s); }

void from_json(const Json& j, SabotageStage& s) {
  if (j.is_number_integer()) {
    s = stage_from_int(j.get<int>());
  } else if (j.is_string()) {
    s = parse_stage(j.get<std::string>());
  } else {
    throw Error(ErrorCode::kInvalidConfig, "stage must be an integer or string");
  }
}

void to_json(Json& j, ComparisonOutcome o) { j = std::string(to_string(o)); }
void from_json(const Json& j, ComparisonOutcome& o) { o = parse_outcome(j.get<std::string>()); }

void to_json(Json& j, const PromptRecord& r) {
  j = Json{{"id", r.id}, {"text", r.text}};
  if (r.gold) j["gold"] = *r.gold;
  if (r.stage_label) j["stage_label"] = *r.stage_label;
  j["dataset"] = r.dataset;
  if (r.wellformedness) j["wellformedness"] = *r.wellformedness;
}

void from_json(const Json& j, PromptRecord& r) {
  r = PromptRecord{};
  r.id = j.at("id").get<std::string>();
  r.text = j.at("text").get<std::string>();
  if (auto it = j.find("gold"); it != j.end() && !it->is_null()) r.gold = it->get<std::string>();
  if (auto it = j.find("stage_label"); it != j.end() && !it->is_null()) {
    r.stage_label = it->get<SabotageStage>();
  }
  if (auto it = j.find("dataset"); it != j.end() && !it->is_null()) r.dataset = it->get<std::string>();
  if (auto it = j.find("wellformedness"); it != j.end() && !it->is_null()) {
    r.wellformedness = it->get<double>();
  }
}

void to_json(Json& j, const Description& d) {
  j = Json{{"text", d.text}, {"perplexity", d.perplexity}, {"iteration", d.iteration}};
}

void from_json(const Json& j, Description& d) {
  d.text = j.at("text").get<std::string>();
  d.perplexity = j.at("perplexity").get<double>();
  d.iteration = j.at("iteration").get<int>();
  if (!std::isfinite(d.perplexity) || d.perplexity <= 0.0 || d.iteration < 0) {
    throw Error(ErrorCode::kOutOfRange, "description needs a finite positive perplexity and iteration >= 0");
  }
}

void to_json(Json& j, const StageOutput& s) { j = Json{{"stage", s.stage}, {"text", s.text}}; }

void from_json(const Json& j, StageOutput& s) {
  s.stage = j.at("stage").get<SabotageStage>();
  s.text = j.at("text").get<std::string>();
}

void to_json(Json& j, const BackendCall& c) {
  j = Json{{"phase", c.phase},
           {"template_id", c.template_id},
           {"backend_id", c.backend_id},
           {"elapsed_ms", c.elapsed_ms}};
}

void from_json(const Json& j, BackendCall& c) {
  c.phase = j.at("phase").get<std::string>();
  c.template_id = j.value("template_id", std::string{});
  c.backend_id = j.value("backend_id", std::string{});
  c.elapsed_ms = j.value("elapsed_ms", std::int64_t{0});
}

Json trace_to_json(const RefinementTrace& t, bool include_timings) {
  Json j;
  j["record_id"] = t.record_id;
  j["input"] = t.input;
  j["classified_stage"] = t.classified_stage;
  j["stage_outputs"] = t.stage_outputs;
  j["sufficiency_verdicts"] = t.sufficiency_verdicts;
  j["candidates"] = t.candidates;
  j["selected"] = t.selected ? Json(*t.selected) : Json(nullptr);
  j["final_prompt"] = t.final_prompt;
  if (include_timings) j["elapsed_ms"] = t.elapsed_ms;
  Json calls = Json::array();
  for (const auto& c : t.calls) {
    Json cj = c;
    if (!include_timings) cj.erase("elapsed_ms");
    calls.push_back(std::move(cj));
  }
  j["calls"] = std::move(calls);
  j["warnings"] = t.warnings;
  j["status"] = t.status == TraceStatus::kOk ? "ok" : "failed";
  if (t.error_phase) j["error_phase"] = *t.error_phase;
  if (t.error_message) j["error_message"] = *t.error_message;
  return j;
}

void to_json(Json& j, const RefinementTrace& t) { j = trace_to_json(t, true); }

void from_json(const Json& j, RefinementTrace& t) {
  t = RefinementTrace{};
  t.record_id = j.at("record_id").get<std::string>();
  t.input = j.at("input").get<std::string>();
  t.classified_stage = j.at("classified_stage").get<SabotageStage>();
  t.stage_outputs = j.at("stage_outputs").get<std::vector<StageOutput>>();
  t.sufficiency_verdicts = j.at("sufficiency_verdicts").get<std::vector<bool>>();
  t.candidates = j.at("candidates").get<std::vector<Description>>();
  if (const auto& sel = j.at("selected"); !sel.is_null()) t.selected = sel.get<Description>();
  t.final_prompt = j.at("final_prompt").get<std::string>();
  if (auto it = j.find("elapsed_ms"); it != j.end()) {
    t.elapsed_ms = it->get<std::map<std::string, std::int64_t>>();
  }
  if (auto it = j.find("calls"); it != j.end()) t.calls = it->get<std::vector<BackendCall>>();
  if (auto it = j.find("warnings"); it != j.end()) t.warnings = it->get<std::vector<std::string>>();
  t.status = j.value("status", std::string{"ok"}) == "ok" ? TraceStatus::kOk : TraceStatus::kFailed;
  if (auto it = j.find("error_phase"); it != j.end()) t.error_phase = it->get<std::string>();
  if (auto it = j.find("error_message"); it != j.end()) t.error_message = it->get<std::string>();
}

void to_json(Json& j, const ScoreCard& s) {
  j = Json{{"hi", s.hi}, {"cqs", s.cqs}};
  if (s.relevance) j["relevance"] = *s.relevance;
  if (s.coherence) j["coherence"] = *s.coherence;
}

void from_json(const Json& j, ScoreCard& s) {
  s = ScoreCard{};
  s.hi = j.at("hi").get<double>();
  s.cqs = j.at("cqs").get<double>();
  if (auto it = j.find("relevance"); it != j.end() && !it->is_null()) s.relevance = it->get<double>();
  if (auto it = j.find("coherence"); it != j.end() && !it->is_null()) s.coherence = it->get<double>();
}

void validate(const PromptRecord& r) {
  if (r.id.empty()) throw Error(ErrorCode::kEmptyInput, "record id is empty");
  if (text::trim(r.text).empty()) throw Error(ErrorCode::kEmptyInput, "record '" + r.id + "' has blank text");
  if (r.wellformedness && !(*r.wellformedness >= 0.0 && *r.wellformedness <= 1.0)) {
    throw Error(ErrorCode::kOutOfRange, "record '" + r.id + "' wellformedness outside [0,1]");
  }
}

}  // namespace mpr
