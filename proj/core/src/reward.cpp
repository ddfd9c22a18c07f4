#include "harmcot/reward.hpp"

#include <cmath>

namespace harmcot {
namespace reward {

void RewardWeights::validate() const {
    if (alpha < 0.0 || beta < 0.0 || gamma < 0.0) {
        throw ValidationError("reward weights must be nonnegative");
    }
    if (std::abs(alpha + beta + gamma - 1.0) > 1e-9) {
        throw ValidationError("reward weights must sum to 1");
    }
}

double reward_sem(const ParsedResponse& response, const CoTAnnotation& gold,
                  const EmbeddingProvider& embedder,
                  const metrics::SimilarityWeights& sim_weights) {
    if (!response.caption) return 0.0;
    const TokenSeq cand = tokenize(*response.caption);
    const TokenSeq ref = tokenize(gold.caption);
    if (cand.empty() || ref.empty()) return 0.0;
    return metrics::similarity_scores(cand, ref, embedder, sim_weights).combined;
}

double reward_sub(const ParsedResponse& response, const MemeRecord& gold) {
    if (!gold.cot) {
        throw ValidationError("reward_sub called on a binary-only sample ('" + gold.id + "')");
    }
    double sum = 0.0;
    for (HarmCategory c : all_categories()) {
        const bool member = gold.subcategories.count(c) > 0;
        const ParsedVerdict v = response.verdicts[static_cast<std::size_t>(c)];
        const bool correct = (v == ParsedVerdict::Applicable && member) ||
                             (v == ParsedVerdict::NotApplicable && !member);
        if (correct) sum += 1.0;
    }
    return sum / static_cast<double>(kNumCategories);
}

double reward_fin(const ParsedResponse& response, BinaryLabel gold_label) {
    switch (response.judgement) {
        case ParsedJudgement::Harmful:
            return gold_label == BinaryLabel::Harmful ? 1.0 : 0.0;
        case ParsedJudgement::Nonharmful:
            return gold_label == BinaryLabel::Nonharmful ? 1.0 : 0.0;
        case ParsedJudgement::Unparseable:
        default:
            return 0.0;
    }
}

double combine_gated(const RewardWeights& weights, double r_sem, std::optional<double> r_sub,
                     double r_fin) {
    weights.validate();
    if (r_fin == 0.0) return 0.0;  // the gate
    if (!r_sub) return r_fin;      // binary-only: no intermediate targets
    return weights.alpha * r_sem + weights.beta * *r_sub + weights.gamma * r_fin;
}

RewardBreakdown reward_total(const ParsedResponse& response, const MemeRecord& gold,
                             const RewardWeights& weights, const EmbeddingProvider& embedder,
                             const metrics::SimilarityWeights& sim_weights) {
    RewardBreakdown out;
    out.r_fin = reward_fin(response, gold.label);
    if (gold.cot) {
        out.r_sem = reward_sem(response, *gold.cot, embedder, sim_weights);
        out.r_sub = reward_sub(response, gold);
    }
    out.r_total = combine_gated(weights, out.r_sem, out.r_sub, out.r_fin);
    return out;
}

}  // namespace reward
}  // namespace harmcot
