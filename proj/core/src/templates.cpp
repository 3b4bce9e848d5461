#include "mpr/templates.hpp"

#include <array>
#include <fstream>
#include <sstream>

#include "mpr/error.hpp"
#include "mpr/hash.hpp"
#include "mpr/resources.hpp"
#include "mpr/text.hpp"

namespace mpr {
namespace {

constexpr std::array<std::pair<std::string_view, std::string_view>, 13> kBuiltin{{
    {template_ids::kClassify, "templates/pipeline/classify.txt"},
    {template_ids::kStage1, "templates/pipeline/stage1.txt"},
    {template_ids::kStage2, "templates/pipeline/stage2.txt"},
    {template_ids::kStage3, "templates/pipeline/stage3.txt"},
    {template_ids::kCombined, "templates/pipeline/combined.txt"},
    {template_ids::kReflect, "templates/pipeline/reflect.txt"},
    {template_ids::kDescribe, "templates/pipeline/describe.txt"},
    {template_ids::kAnswer, "templates/pipeline/answer.txt"},
    {template_ids::kJudgeHallucination, "templates/judge/hallucination.txt"},
    {template_ids::kJudgeQuality, "templates/judge/quality.txt"},
    {template_ids::kJudgeRelevance, "templates/judge/relevance.txt"},
    {template_ids::kJudgeCoherence, "templates/judge/coherence.txt"},
    {template_ids::kJudgePairwise, "templates/judge/pairwise.txt"},
}};

std::string strip_trailing_newlines(std::string s) {
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
  return s;
}

}  // namespace

PromptTemplate parse_template(std::string id, std::string_view source) {
  PromptTemplate t;
  t.id = std::move(id);
  t.version = content_hash(source).substr(0, 16);

  std::string_view rest = source;
  std::size_t pos = 0;
  while (pos <= rest.size()) {
    const std::size_t eol = rest.find('\n', pos);
    std::string_view line = rest.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line == "---") {
      t.system = strip_trailing_newlines(std::string(rest.substr(0, pos)));
      t.user = eol == std::string_view::npos ? std::string{} : std::string(rest.substr(eol + 1));
      t.user = strip_trailing_newlines(std::move(t.user));
      return t;
    }
    if (eol == std::string_view::npos) break;
    pos = eol + 1;
  }
  t.user = strip_trailing_newlines(std::string(source));
  return t;
}

TemplateSet TemplateSet::builtin() {
  TemplateSet set;
  for (const auto& [id, key] : kBuiltin) set.set(std::string(id), resources::find(key));
  return set;
}

const PromptTemplate& TemplateSet::get(std::string_view id) const {
  const auto it = templates_.find(id);
  if (it == templates_.end()) throw Error(ErrorCode::kInvalidConfig, "no template '" + std::string(id) + "'");
  return it->second;
}

bool TemplateSet::contains(std::string_view id) const { return templates_.find(id) != templates_.end(); }

void TemplateSet::set(std::string id, std::string_view source) {
  auto t = parse_template(id, source);
  if (text::trim(t.user).empty()) throw Error(ErrorCode::kInvalidConfig, "template '" + id + "' has no user part");
  templates_.insert_or_assign(std::move(id), std::move(t));
}

void TemplateSet::load_file(std::string id, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open template " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  set(std::move(id), buf.str());
}

}  // namespace mpr
