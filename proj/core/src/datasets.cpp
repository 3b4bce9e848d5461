#include "mpr/datasets.hpp"

#include <spdlog/spdlog.h>

#include <fstream>
#include <set>
#include <sstream>

#include "mpr/error.hpp"
#include "mpr/text.hpp"

namespace mpr::datasets {
namespace {

struct TaskInfo {
  Task task;
  std::string_view name;
  std::string_view instruction;
};

constexpr TaskInfo kTasks[] = {
    {Task::kFixPunctuation, "fix_punctuation",
     "Fix the punctuation and capitalization errors in the following prompt without changing its wording."},
    {Task::kFixTypos, "fix_typos",
     "Correct the spelling, typographical and grammatical errors in the following prompt."},
    {Task::kParaphrase, "paraphrase",
     "Rewrite the following prompt so that its technical terms are correct and its intent is clear."},
    {Task::kDescribeTerm, "describe_term", "Write a concise description of the following term."},
    {Task::kClassifyStage, "classify_stage",
     "Classify the errors in the following prompt: 0 none, 1 punctuation or capitalization, 2 typographical, "
     "3 technical terms. Reply with the digit."},
};

const TaskInfo& info(Task task) {
  for (const auto& t : kTasks) {
    if (t.task == task) return t;
  }
  throw Error(ErrorCode::kInvalidConfig, "unknown task");
}

Error malformed(std::size_t line_no, const std::string& why) {
  return Error(ErrorCode::kMalformedLine, "line " + std::to_string(line_no) + ": " + why);
}

void check_unique(std::set<std::string, std::less<>>& seen, const std::string& id) {
  if (!seen.insert(id).second) throw Error(ErrorCode::kDuplicateId, "duplicate record id '" + id + "'");
}

// Splits CSV content into rows of fields (RFC 4180 quoting).
std::vector<std::pair<std::size_t, std::vector<std::string>>> parse_csv_rows(std::string_view content) {
  std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  bool any = false;
  std::size_t line = 1;
  std::size_t row_line = 1;
  const auto end_row = [&] {
    if (any || !field.empty() || !fields.empty()) {
      fields.push_back(std::move(field));
      rows.emplace_back(row_line, std::move(fields));
    }
    fields.clear();
    field.clear();
    any = false;
  };
  for (std::size_t i = 0; i < content.size(); ++i) {
    const char c = content[i];
    if (quoted) {
      if (c == '"' && i + 1 < content.size() && content[i + 1] == '"') {
        field.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < content.size() && content[i + 1] == '\n') ++i;
      end_row();
      row_line = ++line;
    } else {
      field.push_back(c);
    }
  }
  if (quoted) throw malformed(row_line, "unterminated quoted field");
  end_row();
  return rows;
}

}  // namespace

std::string_view to_string(Task task) { return info(task).name; }

Task parse_task(std::string_view text) {
  for (const auto& t : kTasks) {
    if (t.name == text) return t.task;
  }
  throw Error(ErrorCode::kInvalidConfig, "unknown task '" + std::string(text) + "'");
}

std::string_view instruction_for(Task task) { return info(task).instruction; }

void to_json(Json& j, const InstructionExample& e) {
  j = Json{{"instruction", e.instruction}, {"input", e.input}, {"output", e.output}, {"task", to_string(e.task)}};
  if (!e.source_id.empty()) j["id"] = e.source_id;
}

void from_json(const Json& j, InstructionExample& e) {
  e.instruction = j.at("instruction").get<std::string>();
  e.input = j.at("input").get<std::string>();
  e.output = j.at("output").get<std::string>();
  e.task = parse_task(j.at("task").get<std::string>());
  e.source_id = j.value("id", std::string{});
  if (e.instruction.empty() || e.input.empty() || e.output.empty()) {
    throw Error(ErrorCode::kEmptyInput, "instruction example with an empty field");
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error(ErrorCode::kIoError, "short write to " + path.string());
}

std::vector<PromptRecord> parse_corpus_jsonl(std::string_view content, std::string_view default_dataset) {
  std::vector<PromptRecord> records;
  std::set<std::string, std::less<>> seen;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= content.size()) {
    const auto nl = content.find('\n', start);
    const auto line = content.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
    ++line_no;
    start = nl == std::string_view::npos ? content.size() + 1 : nl + 1;
    if (text::trim(line).empty()) continue;
    PromptRecord r;
    try {
      r = Json::parse(line).get<PromptRecord>();
      validate(r);
    } catch (const std::exception& e) {
      throw malformed(line_no, e.what());
    }
    if (r.dataset.empty()) r.dataset = std::string(default_dataset);
    check_unique(seen, r.id);
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<PromptRecord> parse_corpus_csv(std::string_view content, std::string_view default_dataset) {
  const auto rows = parse_csv_rows(content);
  std::vector<PromptRecord> records;
  std::set<std::string, std::less<>> seen;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& [line_no, fields] = rows[i];
    if (fields.size() != 1) throw malformed(line_no, "expected exactly one column");
    if (i == 0) continue;  // header
    PromptRecord r;
    r.id = std::to_string(i);
    r.text = fields.front();
    r.dataset = std::string(default_dataset);
    try {
      validate(r);
    } catch (const Error& e) {
      throw malformed(line_no, e.what());
    }
    check_unique(seen, r.id);
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<PromptRecord> load_corpus(const std::filesystem::path& path) {
  const std::string content = read_file(path);
  const std::string stem = path.stem().string();
  if (path.extension() == ".csv") return parse_corpus_csv(content, stem);
  return parse_corpus_jsonl(content, stem);
}

std::size_t write_corpus_jsonl(const std::vector<PromptRecord>& records, const std::filesystem::path& path) {
  std::string out;
  for (const auto& r : records) {
    out += Json(r).dump();
    out += '\n';
  }
  write_file(path, out);
  return records.size();
}

std::vector<PromptRecord> filter_illformed(const std::vector<PromptRecord>& records, double threshold,
                                           bool keep_unscored) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw Error(ErrorCode::kInvalidConfig, "threshold must be in [0, 1]");
  std::vector<PromptRecord> out;
  for (const auto& r : records) {
    if (r.wellformedness ? *r.wellformedness < threshold : keep_unscored) out.push_back(r);
  }
  return out;
}

Task task_for_stage(SabotageStage stage) {
  switch (stage) {
    case SabotageStage::kStage1:
      return Task::kFixPunctuation;
    case SabotageStage::kStage2:
      return Task::kFixTypos;
    case SabotageStage::kStage3:
      return Task::kParaphrase;
    case SabotageStage::kClean:
      break;
  }
  throw Error(ErrorCode::kCleanStageRequested, "no correction task for clean text");
}

std::vector<InstructionExample> build_pairs(const std::vector<PromptRecord>& gold_records, SabotageStage stage,
                                            const sabotage::SabotageConfig& cfg) {
  const Task task = task_for_stage(stage);
  sabotage::validate(cfg);
  std::vector<InstructionExample> out;
  out.reserve(gold_records.size() * 2);
  for (const auto& r : gold_records) {
    const std::string& clean = r.gold ? *r.gold : r.text;
    sabotage::SabotageResult res;
    try {
      res = sabotage::sabotage(clean, stage, sabotage::for_record(cfg, r.id));
    } catch (const Error& e) {
      spdlog::warn("skipping record '{}': {}", r.id, e.what());
      continue;
    }
    out.push_back({std::string(instruction_for(task)), res.corrupted, clean, task, r.id});
    out.push_back({std::string(instruction_for(Task::kClassifyStage)), res.corrupted, std::to_string(to_int(stage)),
                   Task::kClassifyStage, r.id});
  }
  return out;
}

std::vector<InstructionExample> build_describe_pairs(
    const std::vector<std::pair<std::string, std::string>>& term_descriptions) {
  std::vector<InstructionExample> out;
  for (std::size_t i = 0; i < term_descriptions.size(); ++i) {
    const auto& [term, description] = term_descriptions[i];
    if (text::trim(term).empty() || text::trim(description).empty()) {
      spdlog::warn("skipping term-description row {}: empty {}", i + 1,
                   text::trim(term).empty() ? "term" : "description");
      continue;
    }
    out.push_back({std::string(instruction_for(Task::kDescribeTerm)), term, description, Task::kDescribeTerm, {}});
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> parse_term_descriptions_tsv(std::string_view content) {
  std::vector<std::pair<std::string, std::string>> rows;
  std::size_t line_no = 0;
  std::istringstream in{std::string(content)};
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw malformed(line_no, "expected term<TAB>description");
    rows.emplace_back(text::trim(line.substr(0, tab)), text::trim(line.substr(tab + 1)));
  }
  return rows;
}

std::vector<std::pair<std::string, std::string>> load_term_descriptions_tsv(const std::filesystem::path& path) {
  return parse_term_descriptions_tsv(read_file(path));
}

std::string to_jsonl(const std::vector<InstructionExample>& examples) {
  std::string out;
  for (const auto& e : examples) {
    out += Json(e).dump();
    out += '\n';
  }
  return out;
}

std::size_t emit_jsonl(const std::vector<InstructionExample>& examples, const std::filesystem::path& path) {
  write_file(path, to_jsonl(examples));
  return examples.size();
}

std::vector<InstructionExample> load_examples(const std::filesystem::path& path) {
  const std::string content = read_file(path);
  std::vector<InstructionExample> out;
  std::istringstream in(content);
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      out.push_back(Json::parse(line).get<InstructionExample>());
    } catch (const std::exception& e) {
      throw malformed(line_no, e.what());
    }
  }
  return out;
}

}  // namespace mpr::datasets
