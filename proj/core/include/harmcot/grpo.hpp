#pragma once

// Group-relative policy optimization: per-group advantage normalization,
// sequence-level importance ratios, the clipped surrogate objective and one
// ascent step with hand-derived gradients.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "harmcot/policy.hpp"
#include "harmcot/reward.hpp"
#include "harmcot/schema.hpp"

namespace harmcot {
namespace grpo {

struct GrpoConfig {
    std::size_t group_size = 8;
    double clip_epsilon = 0.2;
    double learning_rate = 0.01;
    double temperature = 1.0;
};

struct SampledResponse {
    TokenSeq tokens;
    double logprob_old = 0.0;  // under the rollout-time policy snapshot
    double logprob_new = 0.0;  // refreshed by grpo_step under the current policy
    reward::RewardBreakdown reward;
};

struct GroupRollout {
    std::string prompt_id;
    PromptSpec prompt;
    std::vector<SampledResponse> responses;
    std::vector<double> advantages;  // filled by compute_advantages
};

// (r - mean) / population-std; all zeros when the std is below 1e-12.
// Throws ValidationError for fewer than two rewards.
std::vector<double> compute_advantages(const std::vector<double>& rewards);

// exp(logprob_new - logprob_old), clamped to [1e-8, 1e8].
// Throws ValidationError on non-finite inputs.
double importance_ratio(double logprob_new, double logprob_old);

// One term of the clipped surrogate: min(rho*A, clip(rho, 1-eps, 1+eps)*A).
double surrogate_term(double rho, double advantage, double eps);

// Group mean of surrogate terms over the stored log-probabilities.
double surrogate_objective(const GroupRollout& group, double eps);

// Objective (mean over groups) and its gradient w.r.t. the policy parameters,
// with logprob_old held fixed. Refreshes each response's logprob_new under
// `policy`. grad_out may be empty to skip gradient work.
double grpo_objective(const Policy& policy, std::vector<GroupRollout>& batch,
                      const GrpoConfig& cfg, std::span<double> grad_out);

// One ascent step on the surrogate averaged over groups. Requires advantages
// to be present; a non-finite gradient aborts the step (parameters untouched,
// stats.aborted set). Constant-reward groups contribute exactly zero.
TrainStats grpo_step(Policy& policy, std::vector<GroupRollout>& batch, const GrpoConfig& cfg);

}  // namespace grpo
}  // namespace harmcot
