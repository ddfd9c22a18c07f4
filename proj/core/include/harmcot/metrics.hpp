#pragma once

// Scalar evaluation quantities: binary classification metrics, Fleiss' kappa
// inter-annotator agreement, text-similarity metrics (BLEU-4, ROUGE-L, greedy
// embedding F-score) and the reasoning-alignment metrics (Sub-Acc, DA).

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "harmcot/embedding.hpp"
#include "harmcot/schema.hpp"

namespace harmcot {
namespace metrics {

// ---------------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------------

struct ConfusionCounts {
    std::size_t tp = 0;
    std::size_t tn = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;

    std::size_t total() const { return tp + tn + fp + fn; }
};

struct ClassScores {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct ClassificationReport {
    double accuracy = 0.0;
    double precision = 0.0;  // positive class = Harmful
    double recall = 0.0;     // positive class = Harmful
    double macro_f1 = 0.0;
    std::vector<ClassScores> per_class;  // [Harmful, Nonharmful]
    ConfusionCounts counts;

    double macro_precision() const;
    double macro_recall() const;
};

// Unparseable predictions count against both classes (scored as predicting
// the opposite of gold). Zero-denominator precision/recall are defined as 0.
// Throws ValidationError on length mismatch or empty input.
ClassificationReport classification_report(const std::vector<ParsedJudgement>& pred,
                                           const std::vector<BinaryLabel>& gold);

// ---------------------------------------------------------------------------
// Inter-annotator agreement
// ---------------------------------------------------------------------------

struct KappaReport {
    double kappa = 0.0;
    std::size_t n_items = 0;
    std::size_t n_raters = 0;
    std::vector<double> per_item_agreement;
};

// Standard Fleiss' kappa over an items x raters matrix of categorical labels.
// Chance agreement of 1 (a single category in use) returns kappa = 1 by
// convention. Throws ValidationError on a ragged or degenerate matrix.
KappaReport fleiss_kappa(const std::vector<std::vector<std::string>>& ratings);

// ---------------------------------------------------------------------------
// Text similarity
// ---------------------------------------------------------------------------

// Geometric mean of modified n-gram precisions (n = 1..4, add-one smoothing
// on zero counts for n >= 2, orders longer than the candidate are neutral),
// times the brevity penalty. Empty candidate scores 0.
double bleu4(const TokenSeq& candidate, const std::vector<TokenSeq>& references);

// LCS-based F-measure (beta = 1); 0 when either side is empty or LCS = 0.
double rouge_l(const TokenSeq& candidate, const TokenSeq& reference);

// Greedy-matching F-score over token embeddings, rescaled from [-1, 1] to
// [0, 1]. Identical tokens match with cosine exactly 1. Either side empty
// scores 0.
double emb_similarity(const TokenSeq& candidate, const TokenSeq& reference,
                      const EmbeddingProvider& embedder);

struct SimilarityWeights {
    double bleu = 1.0;
    double rouge = 1.0;
    double emb = 1.0;
};

struct SimilarityScores {
    double bleu4 = 0.0;
    double rouge_l = 0.0;
    double emb_sim = 0.0;
    double combined = 0.0;  // weighted mean; arithmetic mean by default
};

SimilarityScores similarity_scores(const TokenSeq& candidate, const TokenSeq& reference,
                                   const EmbeddingProvider& embedder,
                                   const SimilarityWeights& weights = {});

// ---------------------------------------------------------------------------
// Reasoning alignment
// ---------------------------------------------------------------------------

struct SubAccReport {
    std::array<double, kNumCategories> per_category{};
    double overall = 0.0;  // macro mean over categories
};

// Fraction of samples whose parsed verdict matches gold subcategory
// membership; Missing counts as wrong. Throws on length mismatch.
SubAccReport sub_acc(const std::vector<ParsedResponse>& responses,
                     const std::vector<MemeRecord>& gold);

// Fraction of responses whose judgement is entailed by their verdicts
// (Harmful iff at least one Applicable); Unparseable counts as misaligned.
double decision_alignment(const std::vector<ParsedResponse>& responses);

}  // namespace metrics
}  // namespace harmcot
