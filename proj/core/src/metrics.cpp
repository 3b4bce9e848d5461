#include "mpr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "mpr/error.hpp"
#include "mpr/text.hpp"

namespace mpr::metrics {
namespace {

constexpr std::string_view kStripChars = ".,?!;:'\"()";

using NgramCounts = std::map<std::vector<std::string_view>, std::size_t>;

NgramCounts count_ngrams(const TokenSeq& seq, std::size_t n) {
  NgramCounts counts;
  if (n == 0 || seq.size() < n) return counts;
  for (std::size_t i = 0; i + n <= seq.size(); ++i) {
    ++counts[std::vector<std::string_view>(seq.begin() + static_cast<std::ptrdiff_t>(i),
                                           seq.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

PRF make_prf(double overlap, double cand_total, double ref_total) {
  PRF out;
  out.precision = cand_total > 0 ? overlap / cand_total : 0.0;
  out.recall = ref_total > 0 ? overlap / ref_total : 0.0;
  const double sum = out.precision + out.recall;
  out.f = sum > 0 ? 2.0 * out.precision * out.recall / sum : 0.0;
  return out;
}

}  // namespace

TokenSeq tokenize(std::string_view text) {
  TokenSeq out;
  for (auto& piece : text::split_whitespace(text)) {
    std::size_t b = 0;
    std::size_t e = piece.size();
    while (b < e && kStripChars.find(piece[b]) != std::string_view::npos) ++b;
    while (e > b && kStripChars.find(piece[e - 1]) != std::string_view::npos) --e;
    if (b == e) continue;
    out.push_back(text::to_lower(std::string_view(piece).substr(b, e - b)));
  }
  return out;
}

double bleu(const TokenSeq& candidate, const std::vector<TokenSeq>& references, int max_n, Smoothing smoothing) {
  if (max_n < 1) throw Error(ErrorCode::kInvalidConfig, "bleu max_n must be >= 1");
  if (std::all_of(references.begin(), references.end(), [](const TokenSeq& r) { return r.empty(); })) {
    throw Error(ErrorCode::kNoReferences, "bleu needs at least one non-empty reference");
  }
  if (candidate.empty()) return 0.0;

  std::vector<double> matched(static_cast<std::size_t>(max_n));
  std::vector<double> total(static_cast<std::size_t>(max_n));
  bool any_zero = false;
  for (int n = 1; n <= max_n; ++n) {
    const auto cand = count_ngrams(candidate, static_cast<std::size_t>(n));
    NgramCounts max_ref;
    for (const auto& ref : references) {
      for (const auto& [gram, count] : count_ngrams(ref, static_cast<std::size_t>(n))) {
        auto& slot = max_ref[gram];
        slot = std::max(slot, count);
      }
    }
    std::size_t m = 0;
    std::size_t d = 0;
    for (const auto& [gram, count] : cand) {
      d += count;
      if (const auto it = max_ref.find(gram); it != max_ref.end()) m += std::min(count, it->second);
    }
    matched[static_cast<std::size_t>(n - 1)] = static_cast<double>(m);
    total[static_cast<std::size_t>(n - 1)] = static_cast<double>(d);
    any_zero = any_zero || m == 0;
  }

  double log_sum = 0.0;
  for (std::size_t i = 0; i < matched.size(); ++i) {
    double m = matched[i];
    double d = total[i];
    if (smoothing == Smoothing::kAddOne && any_zero && i >= 1) {
      m += 1.0;
      d += 1.0;
    }
    if (m == 0.0) return 0.0;
    log_sum += std::log(m / d);
  }
  const double geo = std::exp(log_sum / static_cast<double>(max_n));

  const auto c = static_cast<double>(candidate.size());
  double r = -1.0;
  for (const auto& ref : references) {
    const auto len = static_cast<double>(ref.size());
    if (r < 0 || std::abs(len - c) < std::abs(r - c) || (std::abs(len - c) == std::abs(r - c) && len < r)) r = len;
  }
  const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
  return bp * geo;
}

PRF rouge_n(const TokenSeq& candidate, const TokenSeq& reference, int n) {
  if (n < 1) throw Error(ErrorCode::kInvalidConfig, "rouge_n needs n >= 1");
  const auto cand = count_ngrams(candidate, static_cast<std::size_t>(n));
  const auto ref = count_ngrams(reference, static_cast<std::size_t>(n));
  std::size_t overlap = 0;
  for (const auto& [gram, count] : cand) {
    if (const auto it = ref.find(gram); it != ref.end()) overlap += std::min(count, it->second);
  }
  const auto grams = [](const TokenSeq& s, int k) {
    return s.size() >= static_cast<std::size_t>(k) ? static_cast<double>(s.size() - static_cast<std::size_t>(k) + 1)
                                                   : 0.0;
  };
  return make_prf(static_cast<double>(overlap), grams(candidate, n), grams(reference, n));
}

std::size_t lcs_length(const TokenSeq& a, const TokenSeq& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0);
  std::vector<std::size_t> cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

PRF rouge_l(const TokenSeq& candidate, const TokenSeq& reference) {
  if (candidate.empty() || reference.empty()) return {};
  return make_prf(static_cast<double>(lcs_length(candidate, reference)), static_cast<double>(candidate.size()),
                  static_cast<double>(reference.size()));
}

std::string stem(std::string_view word) {
  static constexpr std::string_view kSuffixes[] = {"ing", "ed", "es", "ly", "s"};
  for (const auto suffix : kSuffixes) {
    if (word.size() >= suffix.size() + 3 && word.substr(word.size() - suffix.size()) == suffix) {
      return std::string(word.substr(0, word.size() - suffix.size()));
    }
  }
  return std::string(word);
}

double meteor(const TokenSeq& candidate, const TokenSeq& reference, bool enable_stem) {
  if (candidate.empty() || reference.empty()) return 0.0;
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<std::size_t> align(candidate.size(), kNone);
  std::vector<bool> used(reference.size(), false);

  const auto pass = [&](const TokenSeq& c, const TokenSeq& r) {
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (align[i] != kNone) continue;
      for (std::size_t j = 0; j < r.size(); ++j) {
        if (!used[j] && c[i] == r[j]) {
          align[i] = j;
          used[j] = true;
          break;
        }
      }
    }
  };
  pass(candidate, reference);
  if (enable_stem) {
    TokenSeq cs;
    TokenSeq rs;
    for (const auto& t : candidate) cs.push_back(stem(t));
    for (const auto& t : reference) rs.push_back(stem(t));
    pass(cs, rs);
  }

  std::size_t m = 0;
  std::size_t chunks = 0;
  std::size_t prev_j = kNone;
  bool prev_matched = false;
  for (std::size_t i = 0; i < candidate.size(); ++i) {
    if (align[i] == kNone) {
      prev_matched = false;
      continue;
    }
    ++m;
    if (!prev_matched || align[i] != prev_j + 1) ++chunks;
    prev_j = align[i];
    prev_matched = true;
  }
  if (m == 0) return 0.0;

  const double p = static_cast<double>(m) / static_cast<double>(candidate.size());
  const double r = static_cast<double>(m) / static_cast<double>(reference.size());
  const double fmean = 10.0 * p * r / (r + 9.0 * p);
  const double frag = static_cast<double>(chunks) / static_cast<double>(m);
  return fmean * (1.0 - 0.5 * frag * frag * frag);
}

double perplexity(std::span<const TokenScore> scores) {
  if (scores.empty()) throw Error(ErrorCode::kEmptyScores, "perplexity of an empty score list");
  double sum = 0.0;
  for (const auto& s : scores) sum += s.logprob;
  return std::exp(-sum / static_cast<double>(scores.size()));
}

double win_rate(std::span<const ComparisonOutcome> outcomes) {
  if (outcomes.empty()) throw Error(ErrorCode::kEmptyOutcomes, "win rate of no outcomes");
  double score = 0.0;
  for (const auto o : outcomes) {
    if (o == ComparisonOutcome::kWin) score += 1.0;
    if (o == ComparisonOutcome::kTie) score += 0.5;
  }
  return score / static_cast<double>(outcomes.size());
}

}  // namespace mpr::metrics
