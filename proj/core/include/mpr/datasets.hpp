#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mpr/sabotage.hpp"
#include "mpr/serialize.hpp"
#include "mpr/types.hpp"

namespace mpr::datasets {

enum class Task : std::uint8_t { kFixPunctuation, kFixTypos, kParaphrase, kDescribeTerm, kClassifyStage };
std::string_view to_string(Task task);
Task parse_task(std::string_view text);
// Instruction text used for every example of the task.
std::string_view instruction_for(Task task);

struct InstructionExample {
  std::string instruction;
  std::string input;
  std::string output;
  Task task = Task::kFixPunctuation;
  // Id of the record the example came from; empty for term descriptions.
  std::string source_id;
  bool operator==(const InstructionExample&) const = default;
};

void to_json(Json& j, const InstructionExample& e);
void from_json(const Json& j, InstructionExample& e);

// JSONL ({id, text, gold?, stage_label?, wellformedness?, dataset?}) or, for a
// .csv extension, a single-column CSV with a header row; CSV ids are the
// 1-based row numbers. Throws kMalformedLine (message carries the line
// number), kDuplicateId or kIoError.
std::vector<PromptRecord> load_corpus(const std::filesystem::path& path);
std::vector<PromptRecord> parse_corpus_jsonl(std::string_view content, std::string_view default_dataset = {});
std::vector<PromptRecord> parse_corpus_csv(std::string_view content, std::string_view default_dataset = {});
// One record per line. Returns the line count.
std::size_t write_corpus_jsonl(const std::vector<PromptRecord>& records, const std::filesystem::path& path);

// Keeps records whose wellformedness is present and strictly below the
// threshold, in input order. Unscored records are kept only on request.
std::vector<PromptRecord> filter_illformed(const std::vector<PromptRecord>& records, double threshold = 0.5,
                                           bool keep_unscored = false);

Task task_for_stage(SabotageStage stage);

// Per record: a stage-specific correction example (input corrupted, output
// gold) and a classify_stage example (output the stage digit). The sabotage
// seed is mixed with the record id. Records that fail to corrupt are skipped
// with a warning. Throws kCleanStageRequested for Clean.
std::vector<InstructionExample> build_pairs(const std::vector<PromptRecord>& gold_records, SabotageStage stage,
                                            const sabotage::SabotageConfig& cfg);

// Rows with an empty term or description are skipped with a warning;
// duplicates are kept.
std::vector<InstructionExample> build_describe_pairs(
    const std::vector<std::pair<std::string, std::string>>& term_descriptions);
// term<TAB>description per line; blank lines and '#' comments are skipped.
std::vector<std::pair<std::string, std::string>> parse_term_descriptions_tsv(std::string_view content);
std::vector<std::pair<std::string, std::string>> load_term_descriptions_tsv(const std::filesystem::path& path);

// Writes one JSON object per line. Throws kIoError.
std::size_t emit_jsonl(const std::vector<InstructionExample>& examples, const std::filesystem::path& path);
std::string to_jsonl(const std::vector<InstructionExample>& examples);
std::vector<InstructionExample> load_examples(const std::filesystem::path& path);

// Whole-file helpers shared by the loaders.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace mpr::datasets
