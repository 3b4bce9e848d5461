// mpr: command-line front end for the refinement pipeline and its evaluation harness.

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "mpr/datasets.hpp"
#include "mpr/error.hpp"
#include "mpr/harness.hpp"
#include "mpr/judge.hpp"
#include "mpr/metrics.hpp"
#include "mpr/pipeline.hpp"
#include "mpr/pool.hpp"
#include "mpr/sabotage.hpp"
#include "mpr/text.hpp"

namespace fs = std::filesystem;
using mpr::Json;

namespace {

Json read_json(const fs::path& path) {
  try {
    return Json::parse(mpr::datasets::read_file(path));
  } catch (const Json::exception& e) {
    throw mpr::Error(mpr::ErrorCode::kInvalidConfig, path.string() + ": " + e.what());
  }
}

// Writes to `path`, or stdout when path is empty or "-".
void write_output(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
    std::cout.flush();
  } else {
    mpr::datasets::write_file(path, content);
  }
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::istringstream in(mpr::datasets::read_file(path));
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

// Texts keyed by id: JSONL records ({id, text}) or plain lines numbered from 1.
std::vector<std::pair<std::string, std::string>> read_texts(const fs::path& path) {
  std::vector<std::pair<std::string, std::string>> out;
  if (path.extension() == ".jsonl") {
    for (const auto& r : mpr::datasets::load_corpus(path)) out.emplace_back(r.id, r.text);
    return out;
  }
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) out.emplace_back(std::to_string(i + 1), lines[i]);
  return out;
}

mpr::sabotage::SabotageConfig sabotage_config(const std::string& config_path, const std::string& lexicon_path,
                                              std::optional<std::uint64_t> seed) {
  mpr::sabotage::SabotageConfig cfg;
  if (!config_path.empty()) {
    cfg = mpr::sabotage::config_from_json(read_json(config_path), fs::path(config_path).parent_path());
  } else {
    cfg.term_lexicon = mpr::sabotage::default_lexicon();
  }
  if (!lexicon_path.empty()) cfg.term_lexicon = mpr::sabotage::load_lexicon_tsv(lexicon_path);
  if (seed) cfg.seed = *seed;
  mpr::sabotage::validate(cfg);
  return cfg;
}

mpr::BackendSpec backend_spec(const std::string& path) {
  if (path.empty()) {
    mpr::BackendSpec spec;
    spec.id = "mock";
    spec.kind = mpr::BackendKind::kMock;
    return spec;
  }
  auto spec = read_json(path).get<mpr::BackendSpec>();
  mpr::validate(spec);
  return spec;
}

// Accepts either a pipeline config or an experiment config with a "pipeline" member.
mpr::PipelineConfig pipeline_config(const std::string& path) {
  if (path.empty()) return mpr::mock_pipeline_config();
  const Json j = read_json(path);
  const auto base = fs::path(path).parent_path();
  return mpr::pipeline_config_from_json(j.contains("pipeline") ? j.at("pipeline") : j, base);
}

void print_call_counts(const mpr::BackendPool& pool) {
  std::cerr << "backend calls:";
  for (const auto& [id, n] : pool.upstream_call_counts()) std::cerr << ' ' << id << '=' << n;
  std::cerr << " total=" << pool.upstream_calls() << '\n';
  if (const auto* cache = pool.cache()) {
    std::cerr << "cache: hits=" << cache->hits() << " misses=" << cache->misses() << '\n';
  }
}

int run_sabotage(int stage, std::optional<std::uint64_t> seed, const std::string& config, const std::string& lexicon,
                 const std::string& in, const std::string& out) {
  const auto cfg = sabotage_config(config, lexicon, seed);
  const auto records = mpr::datasets::load_corpus(in);
  std::string lines;
  for (const auto& r : records) {
    const std::string& clean = r.gold ? *r.gold : r.text;
    const auto res = mpr::sabotage::sabotage(clean, mpr::stage_from_int(stage), mpr::sabotage::for_record(cfg, r.id));
    mpr::PromptRecord corrupted = r;
    corrupted.text = res.corrupted;
    corrupted.gold = clean;
    corrupted.stage_label = res.stage;
    Json j = corrupted;
    j["edits"] = res.edits;
    lines += j.dump() + "\n";
  }
  write_output(out, lines);
  spdlog::info("sabotaged {} records at {}", records.size(), mpr::to_string(mpr::stage_from_int(stage)));
  return 0;
}

int run_dataset_build(const std::string& task, std::optional<int> stage, std::optional<std::uint64_t> seed,
                      const std::string& config, const std::string& lexicon, const std::string& in,
                      const std::string& out, double threshold, bool keep_unscored) {
  namespace ds = mpr::datasets;
  if (task == "filter") {
    const auto kept = ds::filter_illformed(ds::load_corpus(in), threshold, keep_unscored);
    std::string lines;
    for (const auto& r : kept) lines += Json(r).dump() + "\n";
    write_output(out, lines);
    spdlog::info("kept {} records", kept.size());
    return 0;
  }
  std::vector<ds::InstructionExample> examples;
  if (task == "describe_term") {
    examples = ds::build_describe_pairs(ds::load_term_descriptions_tsv(in));
  } else {
    int k = stage.value_or(0);
    if (task == "fix_punctuation") k = 1;
    if (task == "fix_typos") k = 2;
    if (task == "paraphrase") k = 3;
    if (task != "pairs" && task != "fix_punctuation" && task != "fix_typos" && task != "paraphrase") {
      throw mpr::Error(mpr::ErrorCode::kInvalidConfig, "unknown dataset task '" + task + "'");
    }
    if (stage && *stage != k) throw mpr::Error(mpr::ErrorCode::kInvalidConfig, "--stage contradicts --task");
    examples = ds::build_pairs(ds::load_corpus(in), mpr::stage_from_int(k), sabotage_config(config, lexicon, seed));
  }
  write_output(out, ds::to_jsonl(examples));
  spdlog::info("emitted {} examples", examples.size());
  return 0;
}

int run_refine(const std::string& config, const std::string& in, const std::string& out, int parallelism,
               const std::string& cache_dir, bool timings) {
  mpr::BackendPool pool(cache_dir.empty() ? std::nullopt : std::optional<fs::path>(cache_dir));
  mpr::Refiner refiner(pipeline_config(config), pool);
  const auto traces = refiner.refine_batch(mpr::datasets::load_corpus(in), parallelism);
  std::string lines;
  std::size_t failed = 0;
  for (const auto& t : traces) {
    lines += mpr::trace_to_json(t, timings).dump() + "\n";
    if (t.status == mpr::TraceStatus::kFailed) ++failed;
  }
  write_output(out, lines);
  spdlog::info("refined {} records ({} failed)", traces.size(), failed);
  print_call_counts(pool);
  return failed == 0 ? 0 : 3;
}

int run_score(const std::string& metric, const std::string& hyp, const std::string& ref, const std::string& smoothing,
              bool no_stem, const std::string& out) {
  namespace m = mpr::metrics;
  const auto hyps = read_texts(hyp);
  std::map<std::string, std::string> refs;
  for (auto& [id, text] : read_texts(ref)) refs[id] = text;
  const auto smooth = smoothing == "none" ? m::Smoothing::kNone : m::Smoothing::kAddOne;
  if (smoothing != "none" && smoothing != "add_one") {
    throw mpr::Error(mpr::ErrorCode::kInvalidConfig, "unknown smoothing '" + smoothing + "'");
  }
  std::string csv = "id,metric,value\n";
  for (const auto& [id, text] : hyps) {
    const auto it = refs.find(id);
    if (it == refs.end()) throw mpr::Error(mpr::ErrorCode::kNoReferences, "no reference for id '" + id + "'");
    const auto c = m::tokenize(text);
    const auto r = m::tokenize(it->second);
    double value = 0;
    if (metric == "bleu") {
      value = m::bleu(c, {r}, 4, smooth);
    } else if (metric == "rouge1") {
      value = m::rouge_n(c, r, 1).f;
    } else if (metric == "rouge2") {
      value = m::rouge_n(c, r, 2).f;
    } else if (metric == "rougeL") {
      value = m::rouge_l(c, r).f;
    } else if (metric == "meteor") {
      value = m::meteor(c, r, !no_stem);
    } else {
      throw mpr::Error(mpr::ErrorCode::kInvalidConfig, "unknown metric '" + metric + "'");
    }
    csv += fmt::format("{},{},{:.6f}\n", id, metric, value);
  }
  write_output(out, csv);
  return 0;
}

int run_judge(const std::string& metric, const std::string& judge_config, const std::string& in,
              const std::string& cache_dir, const std::string& out) {
  mpr::BackendPool pool(cache_dir.empty() ? std::nullopt : std::optional<fs::path>(cache_dir));
  mpr::judge::Judge judge(pool.get(backend_spec(judge_config)));
  std::string csv = "id,metric,value\n";
  std::size_t line_no = 0;
  for (const auto& line : read_lines(in)) {
    ++line_no;
    if (mpr::text::trim(line).empty()) continue;
    const Json j = Json::parse(line);
    const std::string id = j.value("id", std::to_string(line_no));
    const auto field = [&](const char* name) { return j.value(name, std::string{}); };
    std::string value;
    if (metric == "hi") {
      value = fmt::format("{:.4f}", judge.hallucination(field("question"), field("answer")));
    } else if (metric == "cqs") {
      value = fmt::format("{:.4f}", judge.quality(field("question"), field("answer")));
    } else if (metric == "relevance" || metric == "coherence") {
      value = fmt::format("{:.4f}", judge.description(field("prompt"), field("description"),
                                                      mpr::judge::parse_facet(metric)));
    } else if (metric == "pairwise") {
      value = std::string(mpr::to_string(judge.compare(field("question"), field("answer_a"), field("answer_b"))));
    } else {
      throw mpr::Error(mpr::ErrorCode::kInvalidConfig, "unknown judge metric '" + metric + "'");
    }
    csv += fmt::format("{},{},{}\n", id, metric, value);
  }
  write_output(out, csv);
  print_call_counts(pool);
  return 0;
}

int run_experiment_cmd(const std::string& config, const std::string& out_dir, std::optional<int> parallelism,
                       const std::string& cache_dir, const std::string& traces_path) {
  auto cfg = mpr::harness::load_experiment_config(config);
  if (parallelism) cfg.parallelism = *parallelism;
  if (!cache_dir.empty()) cfg.cache_dir = cache_dir;
  mpr::BackendPool pool(cfg.cache_dir ? std::optional<fs::path>(*cfg.cache_dir) : std::nullopt);
  const auto result = mpr::harness::run_experiment(cfg, pool);
  const fs::path dir = out_dir;
  mpr::harness::emit_report(result.rows, mpr::harness::ReportFormat::kMarkdown, dir / "report.md");
  mpr::harness::emit_report(result.rows, mpr::harness::ReportFormat::kCsv, dir / "report.csv");
  if (!traces_path.empty()) {
    std::string lines;
    for (const auto& r : result.records) {
      if (r.trace) lines += mpr::trace_to_json(*r.trace, true).dump() + "\n";
    }
    mpr::datasets::write_file(traces_path, lines);
  }
  std::cout << mpr::harness::render_markdown(result.rows);
  int failed = 0;
  for (const auto& row : result.rows) failed += row.failed;
  std::cerr << "records failed: " << failed << '\n';
  print_call_counts(pool);
  return 0;
}

int run_report(const std::string& in, const std::string& format, const std::string& out) {
  const auto rows = mpr::harness::load_report_csv(in);
  const auto fmt_kind = mpr::harness::parse_report_format(format);
  write_output(out, fmt_kind == mpr::harness::ReportFormat::kMarkdown ? mpr::harness::render_markdown(rows)
                                                                        : mpr::harness::render_csv(rows));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-stage prompt refinement: pipeline, sabotage, metrics and experiment harness"};
  app.require_subcommand(1);
  bool verbose = false;
  bool quiet = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");
  app.add_flag("-q,--quiet", quiet, "Only log errors");

  std::function<int()> action;

  // sabotage
  auto* sab = app.add_subcommand("sabotage", "Corrupt a corpus at a given stage");
  int sab_stage = 1;
  std::optional<std::uint64_t> sab_seed;
  std::string sab_config, sab_lexicon, sab_in, sab_out;
  sab->add_option("--stage", sab_stage, "Stage 1, 2 or 3")->required()->check(CLI::Range(1, 3));
  sab->add_option("--seed", sab_seed, "Global seed (mixed with each record id)");
  sab->add_option("--config", sab_config, "Sabotage config JSON");
  sab->add_option("--lexicon", sab_lexicon, "Term lexicon TSV (canonical<TAB>corrupted)");
  sab->add_option("--in", sab_in, "Input corpus (JSONL or CSV)")->required();
  sab->add_option("--out", sab_out, "Output JSONL (default stdout)");
  sab->callback([&] { action = [&] { return run_sabotage(sab_stage, sab_seed, sab_config, sab_lexicon, sab_in, sab_out); }; });

  // dataset build
  auto* ds = app.add_subcommand("dataset", "Fine-tuning dataset tools");
  ds->require_subcommand(1);
  auto* build = ds->add_subcommand("build", "Emit instruction-tuning JSONL");
  std::string ds_task = "pairs", ds_config, ds_lexicon, ds_in, ds_out;
  std::optional<int> ds_stage;
  std::optional<std::uint64_t> ds_seed;
  double ds_threshold = 0.5;
  bool ds_keep_unscored = false;
  build->add_option("--task", ds_task, "pairs, fix_punctuation, fix_typos, paraphrase, describe_term or filter");
  build->add_option("--stage", ds_stage, "Sabotage stage for pairs")->check(CLI::Range(1, 3));
  build->add_option("--seed", ds_seed, "Global seed");
  build->add_option("--config", ds_config, "Sabotage config JSON");
  build->add_option("--lexicon", ds_lexicon, "Term lexicon TSV");
  build->add_option("--in", ds_in, "Corpus (JSONL/CSV) or term TSV for describe_term")->required();
  build->add_option("--out", ds_out, "Output JSONL (default stdout)");
  build->add_option("--threshold", ds_threshold, "Well-formedness threshold for filter")->check(CLI::Range(0.0, 1.0));
  build->add_flag("--keep-unscored", ds_keep_unscored, "filter: keep records without a well-formedness score");
  build->callback([&] {
    action = [&] {
      return run_dataset_build(ds_task, ds_stage, ds_seed, ds_config, ds_lexicon, ds_in, ds_out, ds_threshold,
                               ds_keep_unscored);
    };
  });

  // refine
  auto* ref = app.add_subcommand("refine", "Run the refinement pipeline over a corpus");
  std::string ref_config, ref_in, ref_out, ref_cache;
  int ref_parallelism = 1;
  bool ref_timings = false;
  ref->add_option("--config", ref_config, "Pipeline (or experiment) config JSON; mock backends when omitted");
  ref->add_option("--in", ref_in, "Input corpus")->required();
  ref->add_option("--out", ref_out, "Trace JSONL (default stdout)");
  ref->add_option("--parallelism,-j", ref_parallelism, "Concurrent records")->check(CLI::PositiveNumber);
  ref->add_option("--cache-dir", ref_cache, "Response cache directory");
  ref->add_flag("--timings", ref_timings, "Include elapsed_ms fields in traces");
  ref->callback([&] { action = [&] { return run_refine(ref_config, ref_in, ref_out, ref_parallelism, ref_cache, ref_timings); }; });

  // score
  auto* sc = app.add_subcommand("score", "Text-overlap metrics, CSV rows (id, metric, value)");
  std::string sc_metric, sc_hyp, sc_ref, sc_smoothing = "add_one", sc_out;
  bool sc_no_stem = false;
  sc->add_option("--metric", sc_metric, "bleu, rouge1, rouge2, rougeL or meteor")
      ->required()
      ->check(CLI::IsMember({"bleu", "rouge1", "rouge2", "rougeL", "meteor"}));
  sc->add_option("--hyp", sc_hyp, "Hypotheses: JSONL records or one per line")->required();
  sc->add_option("--ref", sc_ref, "References: JSONL records or one per line")->required();
  sc->add_option("--smoothing", sc_smoothing, "BLEU smoothing: none or add_one");
  sc->add_flag("--no-stem", sc_no_stem, "METEOR: exact matches only");
  sc->add_option("--out", sc_out, "Output CSV (default stdout)");
  sc->callback([&] { action = [&] { return run_score(sc_metric, sc_hyp, sc_ref, sc_smoothing, sc_no_stem, sc_out); }; });

  // judge
  auto* jd = app.add_subcommand("judge", "LLM-as-judge scoring of JSONL items");
  std::string jd_metric, jd_backend, jd_in, jd_cache, jd_out;
  jd->add_option("--metric", jd_metric, "hi, cqs, relevance, coherence or pairwise")
      ->required()
      ->check(CLI::IsMember({"hi", "cqs", "relevance", "coherence", "pairwise"}));
  jd->add_option("--backend", jd_backend, "Judge BackendSpec JSON; mock when omitted");
  jd->add_option("--in", jd_in, "JSONL with question/answer, prompt/description or question/answer_a/answer_b")
      ->required();
  jd->add_option("--cache-dir", jd_cache, "Response cache directory");
  jd->add_option("--out", jd_out, "Output CSV (default stdout)");
  jd->callback([&] { action = [&] { return run_judge(jd_metric, jd_backend, jd_in, jd_cache, jd_out); }; });

  // run
  auto* run = app.add_subcommand("run", "Run a full experiment and write report.md / report.csv");
  std::string run_config, run_out = ".", run_cache, run_traces;
  std::optional<int> run_parallelism;
  run->add_option("--config", run_config, "Experiment config JSON")->required();
  run->add_option("--out-dir", run_out, "Directory for report.md and report.csv");
  run->add_option("--parallelism,-j", run_parallelism, "Override the config's parallelism")->check(CLI::PositiveNumber);
  run->add_option("--cache-dir", run_cache, "Override the config's cache directory");
  run->add_option("--traces", run_traces, "Also write every refinement trace to this JSONL file");
  run->callback([&] { action = [&] { return run_experiment_cmd(run_config, run_out, run_parallelism, run_cache, run_traces); }; });

  // report
  auto* rep = app.add_subcommand("report", "Re-render a CSV report");
  std::string rep_in, rep_format = "markdown", rep_out;
  rep->add_option("--in", rep_in, "report.csv")->required();
  rep->add_option("--format", rep_format, "markdown or csv");
  rep->add_option("--out", rep_out, "Output path (default stdout)");
  rep->callback([&] { action = [&] { return run_report(rep_in, rep_format, rep_out); }; });

  CLI11_PARSE(app, argc, argv);

  auto logger = spdlog::stderr_color_mt("mpr");
  spdlog::set_default_logger(logger);
  spdlog::set_level(verbose ? spdlog::level::debug : (quiet ? spdlog::level::err : spdlog::level::info));

  try {
    return action ? action() : 0;
  } catch (const mpr::Error& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
}
