#pragma once

#include <json.hpp>

#include "mpr/types.hpp"

// JSON record format for the core types. Field names are snake_case; optional
// fields are omitted when absent. Stages serialize as integers 0..3.
namespace mpr {

using Json = nlohmann::json;

void to_json(Json& j, SabotageStage s);
void from_json(const Json& j, SabotageStage& s);

void to_json(Json& j, ComparisonOutcome o);
void from_json(const Json& j, ComparisonOutcome& o);

void to_json(Json& j, const PromptRecord& r);
void from_json(const Json& j, PromptRecord& r);

void to_json(Json& j, const Description& d);
void from_json(const Json& j, Description& d);

void to_json(Json& j, const StageOutput& s);
void from_json(const Json& j, StageOutput& s);

void to_json(Json& j, const BackendCall& c);
void from_json(const Json& j, BackendCall& c);

void to_json(Json& j, const RefinementTrace& t);
void from_json(const Json& j, RefinementTrace& t);

void to_json(Json& j, const ScoreCard& s);
void from_json(const Json& j, ScoreCard& s);

// Timing fields (elapsed_ms, per-call elapsed_ms) are dropped when
// include_timings is false, which makes traces from mock runs byte-comparable.
Json trace_to_json(const RefinementTrace& t, bool include_timings);

// Throws Error(kEmptyInput) when id is empty or text is blank.
void validate(const PromptRecord& r);

}  // namespace mpr
