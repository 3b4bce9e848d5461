#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mpr/backend.hpp"
#include "mpr/types.hpp"

// Text-overlap metrics over canonical token sequences, plus perplexity and
// win-rate aggregation.
namespace mpr::metrics {

using TokenSeq = std::vector<std::string>;

struct PRF {
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;
  bool operator==(const PRF&) const = default;
};

// Lowercases ASCII letters, splits on Unicode whitespace, strips any of
// . , ? ! ; : ' " ( ) from both ends of each piece and drops empty pieces.
TokenSeq tokenize(std::string_view text);

enum class Smoothing : std::uint8_t { kNone, kAddOne };

// Sentence BLEU with clipped n-gram precisions, uniform weights and the
// closest-reference brevity penalty (ties go to the shorter reference).
// An order n with no candidate n-grams counts as precision 0/0 = 0.
// add_one: when any p_n is zero, every p_n with n >= 2 becomes (m+1)/(d+1).
// Empty candidate scores 0. Throws kNoReferences when every reference is empty.
double bleu(const TokenSeq& candidate, const std::vector<TokenSeq>& references, int max_n = 4,
            Smoothing smoothing = Smoothing::kAddOne);

PRF rouge_n(const TokenSeq& candidate, const TokenSeq& reference, int n);
PRF rouge_l(const TokenSeq& candidate, const TokenSeq& reference);
std::size_t lcs_length(const TokenSeq& a, const TokenSeq& b);

// Strips the first of ing, ed, es, ly, s that ends the word, provided at least
// three characters remain.
std::string stem(std::string_view word);

// METEOR without synonymy: exact pass then optional stem pass, greedy left to
// right; Fmean = 10PR / (R + 9P); penalty = 0.5 * (chunks / m)^3.
double meteor(const TokenSeq& candidate, const TokenSeq& reference, bool enable_stem = true);

// exp(-mean logprob). Throws kEmptyScores.
double perplexity(std::span<const TokenScore> scores);

// (wins + 0.5 * ties) / total. Throws kEmptyOutcomes.
double win_rate(std::span<const ComparisonOutcome> outcomes);

}  // namespace mpr::metrics
