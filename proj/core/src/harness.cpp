#include "mpr/harness.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

#include "mpr/datasets.hpp"
#include "mpr/error.hpp"
#include "mpr/judge.hpp"
#include "mpr/metrics.hpp"
#include "mpr/text.hpp"
#include "mpr/timing.hpp"

namespace mpr::harness {
namespace {

constexpr std::string_view kCsvHeader = "model,dataset,stage,configuration,hi_mean,cqs_mean,wr,elapsed_ms_mean,n,failed";

BackendSpec mock_spec() {
  BackendSpec spec;
  spec.id = "mock";
  spec.kind = BackendKind::kMock;
  return spec;
}

int configuration_rank(std::string_view name) {
  static constexpr std::string_view kOrder[] = {kBaseline, "full", "no_descriptions", "no_multistage", "no_ranking"};
  for (std::size_t i = 0; i < std::size(kOrder); ++i) {
    if (kOrder[i] == name) return static_cast<int>(i);
  }
  return static_cast<int>(std::size(kOrder));
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (const char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else {
      fields.back() += c;
    }
  }
  return fields;
}

// Work unit: one record of one corpus at one stage.
struct Task {
  std::size_t corpus = 0;
  SabotageStage stage = SabotageStage::kStage1;
  const PromptRecord* record = nullptr;
};

}  // namespace

Ablation ablation_by_name(std::string_view name) {
  if (name == "full") return {"full", true, true, true};
  if (name == "no_descriptions") return {"no_descriptions", false, true, true};
  if (name == "no_multistage") return {"no_multistage", true, false, true};
  if (name == "no_ranking") return {"no_ranking", true, true, false};
  throw Error(ErrorCode::kInvalidConfig, "unknown ablation '" + std::string(name) + "'");
}

std::vector<Ablation> paper_ablations() {
  return {ablation_by_name("full"), ablation_by_name("no_descriptions"), ablation_by_name("no_multistage"),
          ablation_by_name("no_ranking")};
}

ExperimentConfig default_experiment_config() {
  ExperimentConfig cfg;
  cfg.answerer = mock_spec();
  cfg.judge = mock_spec();
  cfg.sabotage.term_lexicon = sabotage::default_lexicon();
  return cfg;
}

void validate(const ExperimentConfig& cfg) {
  if (cfg.corpora.empty()) throw Error(ErrorCode::kInvalidConfig, "experiment has no corpora");
  if (cfg.stages.empty()) throw Error(ErrorCode::kInvalidConfig, "experiment has no stages");
  for (const auto s : cfg.stages) {
    if (s == SabotageStage::kClean) throw Error(ErrorCode::kCleanStageRequested, "experiments sabotage at stage 1-3");
  }
  if (cfg.parallelism < 1) throw Error(ErrorCode::kInvalidConfig, "parallelism must be >= 1");
  if (cfg.ablations.empty() && !cfg.baseline) throw Error(ErrorCode::kInvalidConfig, "nothing to run");
  std::vector<std::string> names;
  for (const auto& a : cfg.ablations) {
    if (a.name.empty() || a.name == kBaseline) throw Error(ErrorCode::kInvalidConfig, "bad ablation name '" + a.name + "'");
    names.push_back(a.name);
  }
  std::sort(names.begin(), names.end());
  if (std::adjacent_find(names.begin(), names.end()) != names.end()) {
    throw Error(ErrorCode::kInvalidConfig, "ablation names must be unique");
  }
  validate(cfg.pipeline);
  validate(cfg.answerer);
  validate(cfg.judge);
  sabotage::validate(cfg.sabotage);
}

ExperimentConfig experiment_config_from_json(const Json& j, const std::filesystem::path& base_dir) {
  ExperimentConfig cfg = default_experiment_config();
  const auto resolve = [&](const std::string& p) {
    std::filesystem::path path = p;
    if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
    return path.lexically_normal().string();
  };
  try {
    cfg.model = j.value("model", cfg.model);
    if (j.contains("corpora")) {
      cfg.corpora.clear();
      for (const auto& c : j.at("corpora")) {
        const std::string path = resolve(c.at("path").get<std::string>());
        const std::string name = c.value("name", std::filesystem::path(path).stem().string());
        cfg.corpora.push_back({name, path});
      }
    }
    if (j.contains("stages")) cfg.stages = j.at("stages").get<std::vector<SabotageStage>>();
    if (j.contains("pipeline")) cfg.pipeline = pipeline_config_from_json(j.at("pipeline"), base_dir);
    if (j.contains("answerer")) cfg.answerer = j.at("answerer").get<BackendSpec>();
    if (j.contains("judge")) cfg.judge = j.at("judge").get<BackendSpec>();
    cfg.parallelism = j.value("parallelism", cfg.parallelism);
    if (j.contains("cache_dir") && !j.at("cache_dir").is_null()) cfg.cache_dir = resolve(j.at("cache_dir").get<std::string>());
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("sabotage")) cfg.sabotage = sabotage::config_from_json(j.at("sabotage"), base_dir);
    if (j.contains("ablations")) {
      cfg.ablations.clear();
      for (const auto& a : j.at("ablations")) {
        if (a.is_string()) {
          cfg.ablations.push_back(ablation_by_name(a.get<std::string>()));
        } else {
          cfg.ablations.push_back({a.at("name").get<std::string>(), a.value("enable_descriptions", true),
                                   a.value("enable_multistage", true), a.value("enable_ranking", true)});
        }
      }
    }
    cfg.baseline = j.value("baseline", cfg.baseline);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, std::string("experiment config: ") + e.what());
  }
  cfg.sabotage.seed = cfg.seed;
  validate(cfg);
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  Json j;
  try {
    j = Json::parse(datasets::read_file(path));
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, path.string() + ": " + e.what());
  }
  return experiment_config_from_json(j, path.parent_path());
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, BackendPool& pool) {
  validate(cfg);

  std::vector<std::vector<PromptRecord>> corpora;
  for (const auto& c : cfg.corpora) corpora.push_back(datasets::load_corpus(c.path));

  std::vector<std::unique_ptr<Refiner>> refiners;
  for (const auto& a : cfg.ablations) {
    PipelineConfig p = cfg.pipeline;
    p.enable_descriptions = a.enable_descriptions;
    p.enable_multistage = a.enable_multistage;
    p.enable_ranking = a.enable_ranking;
    refiners.push_back(std::make_unique<Refiner>(std::move(p), pool));
  }
  // The answer template and post hook come from the base pipeline config.
  const Refiner answer_refiner(cfg.pipeline, pool);

  std::vector<Task> tasks;
  for (std::size_t c = 0; c < corpora.size(); ++c) {
    for (const auto stage : cfg.stages) {
      for (const auto& r : corpora[c]) tasks.push_back({c, stage, &r});
    }
  }

  const std::size_t per_task = (cfg.baseline ? 1 : 0) + cfg.ablations.size();
  std::vector<RecordResult> results(tasks.size() * per_task);
  sabotage::SabotageConfig sab = cfg.sabotage;
  sab.seed = cfg.seed;
  Backend& answerer = pool.get(cfg.answerer);
  Backend& judge_backend = pool.get(cfg.judge);
  const TemplateSet templates = answer_refiner.templates();

  parallel_for(tasks.size(), cfg.parallelism, [&](std::size_t t) {
    const Task& task = tasks[t];
    const PromptRecord& rec = *task.record;
    judge::Judge judge(judge_backend, templates);
    const std::string question = rec.gold ? *rec.gold : rec.text;

    const auto base = [&](std::string configuration) {
      RecordResult r;
      r.dataset = cfg.corpora[task.corpus].name;
      r.stage = task.stage;
      r.configuration = std::move(configuration);
      r.record_id = rec.id;
      r.question = question;
      return r;
    };
    const auto fail = [](RecordResult& r, const std::string& why) {
      r.failed = true;
      r.error = why;
    };

    std::string corrupted;
    std::string baseline_answer;
    std::string setup_error;
    try {
      corrupted = sabotage::sabotage(question, task.stage, sabotage::for_record(sab, rec.id)).corrupted;
    } catch (const std::exception& e) {
      setup_error = std::string("sabotage: ") + e.what();
    }

    std::size_t slot = t * per_task;
    {
      // The baseline answer also anchors the pairwise comparisons.
      RecordResult r = base(std::string(kBaseline));
      r.prompt = corrupted;
      if (!setup_error.empty()) {
        fail(r, setup_error);
      } else {
        try {
          auto [answer, ms] = measure_elapsed([&] { return answer_refiner.answer(corrupted, answerer); });
          baseline_answer = answer;
          r.answer = std::move(answer);
          r.elapsed_ms = ms;
          r.hi = judge.hallucination(question, r.answer);
          r.cqs = judge.quality(question, r.answer);
        } catch (const std::exception& e) {
          fail(r, std::string("baseline: ") + e.what());
        }
      }
      if (cfg.baseline) results[slot++] = std::move(r);
    }

    for (std::size_t a = 0; a < cfg.ablations.size(); ++a) {
      RecordResult r = base(cfg.ablations[a].name);
      if (!setup_error.empty()) {
        fail(r, setup_error);
        results[slot++] = std::move(r);
        continue;
      }
      PromptRecord input = rec;
      input.text = corrupted;
      input.gold = question;
      input.stage_label = task.stage;
      RefinementTrace trace = refiners[a]->refine(input);
      r.prompt = trace.final_prompt;
      r.elapsed_ms = trace.elapsed_ms.at("total");
      if (trace.status == TraceStatus::kFailed) {
        fail(r, "refine/" + trace.error_phase.value_or("?") + ": " + trace.error_message.value_or(""));
      } else {
        try {
          auto [answer, ms] = measure_elapsed([&] { return answer_refiner.answer(trace.final_prompt, answerer); });
          r.answer = std::move(answer);
          r.elapsed_ms += ms;
          r.hi = judge.hallucination(question, r.answer);
          r.cqs = judge.quality(question, r.answer);
          if (!baseline_answer.empty()) r.outcome = judge.compare(question, r.answer, baseline_answer);
        } catch (const std::exception& e) {
          fail(r, std::string("answer/judge: ") + e.what());
        }
      }
      r.trace = std::move(trace);
      results[slot++] = std::move(r);
    }
  });

  ExperimentResult out;
  out.rows = aggregate(results, cfg.model);
  out.records = std::move(results);
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  BackendPool pool(cfg.cache_dir ? std::optional<std::filesystem::path>(*cfg.cache_dir) : std::nullopt);
  return run_experiment(cfg, pool);
}

std::vector<ReportRow> aggregate(const std::vector<RecordResult>& records, const std::string& model) {
  struct Acc {
    ReportRow row;
    double hi = 0;
    double cqs = 0;
    double ms = 0;
    std::vector<ComparisonOutcome> outcomes;
  };
  std::map<std::tuple<std::string, int, std::string>, Acc> groups;
  for (const auto& r : records) {
    auto& acc = groups[{r.dataset, to_int(r.stage), r.configuration}];
    acc.row.model = model;
    acc.row.dataset = r.dataset;
    acc.row.stage = r.stage;
    acc.row.configuration = r.configuration;
    if (r.failed) {
      ++acc.row.failed;
      continue;
    }
    ++acc.row.n;
    acc.hi += r.hi;
    acc.cqs += r.cqs;
    acc.ms += static_cast<double>(r.elapsed_ms);
    if (r.outcome) acc.outcomes.push_back(*r.outcome);
  }
  std::vector<ReportRow> rows;
  for (auto& [_, acc] : groups) {
    if (acc.row.n > 0) {
      const double n = acc.row.n;
      acc.row.hi_mean = acc.hi / n;
      acc.row.cqs_mean = acc.cqs / n;
      acc.row.elapsed_ms_mean = acc.ms / n;
    }
    if (!acc.outcomes.empty()) acc.row.wr = metrics::win_rate(acc.outcomes);
    rows.push_back(std::move(acc.row));
  }
  sort_rows(rows);
  return rows;
}

ReportFormat parse_report_format(std::string_view text) {
  const std::string t = text::to_lower(text);
  if (t == "markdown" || t == "md") return ReportFormat::kMarkdown;
  if (t == "csv") return ReportFormat::kCsv;
  throw Error(ErrorCode::kInvalidConfig, "unknown report format '" + std::string(text) + "'");
}

void sort_rows(std::vector<ReportRow>& rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) {
    return std::forward_as_tuple(a.model, a.dataset, to_int(a.stage), configuration_rank(a.configuration),
                                 a.configuration) < std::forward_as_tuple(b.model, b.dataset, to_int(b.stage),
                                                                          configuration_rank(b.configuration),
                                                                          b.configuration);
  });
}

std::string format_delta(double delta) {
  const double rounded = std::round(delta * 100.0) / 100.0;
  if (rounded == 0.0) return "(0.00)";
  // U+2212 MINUS SIGN, as typeset in the result tables.
  return fmt::format("({}{:.2f})", rounded < 0 ? "−" : "+", std::abs(rounded));
}

std::string render_markdown(std::vector<ReportRow> rows) {
  if (rows.empty()) throw Error(ErrorCode::kEmptyRows, "no report rows");
  sort_rows(rows);
  std::string out =
      "| Model | Dataset | Stage | Configuration | HI ↓ | CQS ↑ | WR ↑ | T (ms) | n | failed |\n"
      "|---|---|---|---|---|---|---|---|---|---|\n";
  for (const auto& row : rows) {
    const ReportRow* baseline = nullptr;
    for (const auto& cand : rows) {
      if (cand.configuration == kBaseline && cand.model == row.model && cand.dataset == row.dataset &&
          cand.stage == row.stage && cand.n > 0) {
        baseline = &cand;
      }
    }
    std::string hi = fmt::format("{:.2f}", row.hi_mean);
    std::string cqs = fmt::format("{:.2f}", row.cqs_mean);
    if (baseline && baseline != &row && row.n > 0) {
      hi += " " + format_delta(row.hi_mean - baseline->hi_mean);
      cqs += " " + format_delta(row.cqs_mean - baseline->cqs_mean);
    }
    out += fmt::format("| {} | {} | {} | {} | {} | {} | {} | {:.1f} | {} | {} |\n", row.model, row.dataset,
                       to_string(row.stage), row.configuration, hi, cqs,
                       row.wr ? fmt::format("{:.2f}", *row.wr) : std::string("-"), row.elapsed_ms_mean, row.n,
                       row.failed);
  }
  return out;
}

std::string render_csv(std::vector<ReportRow> rows) {
  if (rows.empty()) throw Error(ErrorCode::kEmptyRows, "no report rows");
  sort_rows(rows);
  std::string out(kCsvHeader);
  out += '\n';
  for (const auto& row : rows) {
    out += fmt::format("{},{},{},{},{},{},{},{},{},{}\n", csv_field(row.model), csv_field(row.dataset), to_int(row.stage),
                       csv_field(row.configuration), row.hi_mean, row.cqs_mean,
                       row.wr ? fmt::format("{}", *row.wr) : std::string(), row.elapsed_ms_mean, row.n, row.failed);
  }
  return out;
}

void emit_report(const std::vector<ReportRow>& rows, ReportFormat format, const std::filesystem::path& path) {
  datasets::write_file(path, format == ReportFormat::kMarkdown ? render_markdown(rows) : render_csv(rows));
}

std::vector<ReportRow> parse_report_csv(std::string_view content) {
  std::vector<ReportRow> rows;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < content.size()) {
    auto nl = content.find('\n', start);
    if (nl == std::string_view::npos) nl = content.size();
    std::string_view line = content.substr(start, nl - start);
    start = nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line_no == 1) {
      if (line != kCsvHeader) throw Error(ErrorCode::kMalformedLine, "line 1: unexpected report header");
      continue;
    }
    if (text::trim(line).empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 10) throw Error(ErrorCode::kMalformedLine, "line " + std::to_string(line_no) + ": expected 10 fields");
    try {
      ReportRow row;
      row.model = f[0];
      row.dataset = f[1];
      row.stage = stage_from_int(std::stoi(f[2]));
      row.configuration = f[3];
      row.hi_mean = std::stod(f[4]);
      row.cqs_mean = std::stod(f[5]);
      if (!f[6].empty()) row.wr = std::stod(f[6]);
      row.elapsed_ms_mean = std::stod(f[7]);
      row.n = std::stoi(f[8]);
      row.failed = std::stoi(f[9]);
      rows.push_back(std::move(row));
    } catch (const std::exception& e) {
      throw Error(ErrorCode::kMalformedLine, "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return rows;
}

std::vector<ReportRow> load_report_csv(const std::filesystem::path& path) {
  return parse_report_csv(datasets::read_file(path));
}

}  // namespace mpr::harness
