#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mpr/backend.hpp"
#include "mpr/pipeline.hpp"
#include "mpr/pool.hpp"
#include "mpr/sabotage.hpp"
#include "mpr/types.hpp"

namespace mpr::harness {

struct CorpusRef {
  std::string name;
  std::string path;
  bool operator==(const CorpusRef&) const = default;
};

// A named set of pipeline flags. The built-in names are full,
// no_descriptions, no_multistage and no_ranking.
struct Ablation {
  std::string name;
  bool enable_descriptions = true;
  bool enable_multistage = true;
  bool enable_ranking = true;
  bool operator==(const Ablation&) const = default;
};
Ablation ablation_by_name(std::string_view name);
std::vector<Ablation> paper_ablations();

inline constexpr std::string_view kBaseline = "baseline";

struct ExperimentConfig {
  // Label for the Model column of the report.
  std::string model = "mock";
  std::vector<CorpusRef> corpora;
  std::vector<SabotageStage> stages{SabotageStage::kStage1, SabotageStage::kStage2, SabotageStage::kStage3};
  PipelineConfig pipeline = mock_pipeline_config();
  BackendSpec answerer;
  BackendSpec judge;
  int parallelism = 1;
  std::optional<std::string> cache_dir;
  std::uint64_t seed = 0;
  // Corruption settings; the seed field is replaced by `seed` above.
  sabotage::SabotageConfig sabotage;
  std::vector<Ablation> ablations{ablation_by_name("full")};
  // Adds a row per (corpus, stage) for the unrefined prompts.
  bool baseline = true;
};

ExperimentConfig default_experiment_config();
void validate(const ExperimentConfig& cfg);
// Relative corpus, cache and template paths resolve against base_dir.
ExperimentConfig experiment_config_from_json(const Json& j, const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

struct ReportRow {
  std::string model;
  std::string dataset;
  SabotageStage stage = SabotageStage::kStage1;
  std::string configuration;
  double hi_mean = 0.0;
  double cqs_mean = 0.0;
  // Absent for baseline rows.
  std::optional<double> wr;
  double elapsed_ms_mean = 0.0;
  int n = 0;
  int failed = 0;
  bool operator==(const ReportRow&) const = default;
};

// Outcome for one record under one configuration.
struct RecordResult {
  std::string dataset;
  SabotageStage stage = SabotageStage::kStage1;
  std::string configuration;
  std::string record_id;
  std::string question;
  std::string prompt;
  std::string answer;
  bool failed = false;
  std::string error;
  double hi = 0.0;
  double cqs = 0.0;
  std::optional<ComparisonOutcome> outcome;
  std::int64_t elapsed_ms = 0;
  std::optional<RefinementTrace> trace;
};

struct ExperimentResult {
  std::vector<ReportRow> rows;
  std::vector<RecordResult> records;
};

// Sabotages every record at every stage, answers the corrupted prompt
// (baseline) and each configuration's refined prompt, judges HI and CQS
// against the clean question and compares refined with baseline answers for
// WR. Per-record failures are counted, not fatal. Rows are sorted.
ExperimentResult run_experiment(const ExperimentConfig& cfg, BackendPool& pool);
ExperimentResult run_experiment(const ExperimentConfig& cfg);

// Aggregates records into sorted rows.
std::vector<ReportRow> aggregate(const std::vector<RecordResult>& records, const std::string& model);

enum class ReportFormat : std::uint8_t { kMarkdown, kCsv };
ReportFormat parse_report_format(std::string_view text);

// Sort order: model, dataset, stage, then baseline, full, no_descriptions,
// no_multistage, no_ranking and any other configuration by name.
void sort_rows(std::vector<ReportRow>& rows);

// Markdown shows deltas against the baseline row of the same model, dataset
// and stage, e.g. "0.25 (−0.56)". CSV carries raw values. Both throw kEmptyRows.
std::string render_markdown(std::vector<ReportRow> rows);
std::string render_csv(std::vector<ReportRow> rows);
void emit_report(const std::vector<ReportRow>& rows, ReportFormat format, const std::filesystem::path& path);
std::vector<ReportRow> parse_report_csv(std::string_view content);
std::vector<ReportRow> load_report_csv(const std::filesystem::path& path);

// "(−0.56)", "(+0.12)", "(0.00)".
std::string format_delta(double delta);

}  // namespace mpr::harness
