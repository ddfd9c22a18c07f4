#pragma once

// Gated composite reward for reinforcement rollouts: semantic caption
// similarity, subcategory correctness and final-judgement correctness,
// combined as alpha*r_sem + beta*r_sub + gamma*r_fin and forced to 0
// whenever the final judgement is wrong.

#include <optional>

#include "harmcot/embedding.hpp"
#include "harmcot/metrics.hpp"
#include "harmcot/schema.hpp"

namespace harmcot {
namespace reward {

struct RewardWeights {
    double alpha = 0.15;
    double beta = 0.25;
    double gamma = 0.60;

    // Throws ValidationError unless nonnegative and summing to 1 within 1e-9.
    void validate() const;
};

struct RewardBreakdown {
    double r_sem = 0.0;
    std::optional<double> r_sub;  // absent for binary-only samples
    double r_fin = 0.0;           // 0 or 1
    double r_total = 0.0;
};

// Combined caption similarity against the gold caption; 0 when the response
// carries no caption.
double reward_sem(const ParsedResponse& response, const CoTAnnotation& gold,
                  const EmbeddingProvider& embedder,
                  const metrics::SimilarityWeights& sim_weights = {});

// Mean over the five categories of verdict-matches-gold (Missing is wrong).
// Throws ValidationError when the sample has no gold chain-of-thought.
double reward_sub(const ParsedResponse& response, const MemeRecord& gold);

// 1 iff the judgement parses and equals the gold label.
double reward_fin(const ParsedResponse& response, BinaryLabel gold_label);

// The gated combination rule on bare component values. r_sub is absent for
// binary-only samples, in which case the final judgement carries the whole
// reward (r_total = r_fin).
double combine_gated(const RewardWeights& weights, double r_sem, std::optional<double> r_sub,
                     double r_fin);

// Gated total. Components are always computed and recorded; r_total is 0
// unless r_fin = 1. Binary-only samples (no gold cot) earn r_total = r_fin.
RewardBreakdown reward_total(const ParsedResponse& response, const MemeRecord& gold,
                             const RewardWeights& weights, const EmbeddingProvider& embedder,
                             const metrics::SimilarityWeights& sim_weights = {});

}  // namespace reward
}  // namespace harmcot
