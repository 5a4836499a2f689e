#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "mrgt/datamodel.hpp"

namespace mrgt {

using TokenSeq = std::vector<TokenId>;

/// Corpus-level BLEU-1..4 without smoothing. One reference per candidate.
std::array<double, 4> bleu(std::span<const TokenSeq> candidates, std::span<const TokenSeq> references);

/// Longest common subsequence length.
std::size_t lcs_length(std::span<const TokenId> a, std::span<const TokenId> b);

/// Sentence ROUGE-L F-measure with beta = 1.2.
double rouge_l(std::span<const TokenId> candidate, std::span<const TokenId> reference);
/// Mean of sentence scores.
double rouge_l(std::span<const TokenSeq> candidates, std::span<const TokenSeq> references);

struct MeteorAlignment {
    std::size_t matches = 0;
    std::size_t chunks = 0;
};

/// Exact-match alignment with the most matches, then the fewest chunks.
MeteorAlignment meteor_align(std::span<const TokenId> candidate, std::span<const TokenId> reference);
/// METEOR without stemming or synonyms: Fmean * (1 - 0.5 (chunks/m)^3).
double meteor_lite(std::span<const TokenId> candidate, std::span<const TokenId> reference);
double meteor_lite(std::span<const TokenSeq> candidates, std::span<const TokenSeq> references);

/// CIDEr (not CIDEr-D). Document frequencies come from `corpus`; idf is
/// ln(N / max(1, df)) so n-grams unseen in the corpus keep a finite weight.
double cider(std::span<const TokenSeq> candidates, std::span<const TokenSeq> references,
             std::span<const TokenSeq> corpus);

struct ClassificationReport {
    double accuracy = 0.0;
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    double macro_f1 = 0.0;
};

ClassificationReport classification_report(std::span<const Label> predictions, std::span<const Label> labels);

struct EvalReport {
    std::array<double, 4> bleu{};
    double rouge_l = 0.0;
    double meteor_lite = 0.0;
    double cider = 0.0;
    ClassificationReport classification;
    std::size_t samples = 0;
    std::string regime;
};

EvalReport evaluate_outputs(std::span<const TokenSeq> generated, std::span<const TokenSeq> references,
                            std::span<const Label> predictions, std::span<const Label> labels);

std::string report_json(const EvalReport& r);
/// Columns: B1 B2 B3 B4 ROUGE-L METEOR CIDEr Rec Prec F1 Acc, scaled by 100.
std::string report_table(std::span<const EvalReport> rows, std::span<const std::string> names);

enum class Adequacy : std::uint8_t { justify = 0, weakly_justify = 1, sri = 2, nri = 3 };

struct Rating {
    Adequacy adequacy = Adequacy::justify;
    double fluency = 0.0;  // [0, 1]
};

/// Per sample, one rating per rater.
using HumanRatings = std::vector<std::vector<Rating>>;

struct HumanSummary {
    /// Fractions over {Justify, Weakly Justify, SRI, NRI}.
    std::array<double, 4> distribution{};
    /// Fraction of samples voted Justify or Weakly Justify.
    double adequacy = 0.0;
    double fluency = 0.0;
};

/// Majority vote per sample; ties resolve to the less favourable category.
HumanSummary aggregate_human(const HumanRatings& ratings);

} // namespace mrgt
