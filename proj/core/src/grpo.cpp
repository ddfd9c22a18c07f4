#include "harmcot/grpo.hpp"

#include <algorithm>
#include <cmath>

namespace harmcot {
namespace grpo {

std::vector<double> compute_advantages(const std::vector<double>& rewards) {
    if (rewards.size() < 2) {
        throw ValidationError("compute_advantages: need at least 2 rewards");
    }
    const double n = static_cast<double>(rewards.size());
    double mean = 0.0;
    for (double r : rewards) mean += r;
    mean /= n;
    double var = 0.0;
    for (double r : rewards) {
        const double dev = r - mean;
        var += dev * dev;
    }
    var /= n;  // population variance
    const double std_dev = std::sqrt(var);

    std::vector<double> advantages(rewards.size(), 0.0);
    if (std_dev < 1e-12) return advantages;  // fully-degenerate group: silent no-op
    for (std::size_t i = 0; i < rewards.size(); ++i) {
        advantages[i] = (rewards[i] - mean) / std_dev;
    }
    return advantages;
}

double importance_ratio(double logprob_new, double logprob_old) {
    if (!std::isfinite(logprob_new) || !std::isfinite(logprob_old)) {
        throw ValidationError("importance_ratio: non-finite log-probability");
    }
    return std::clamp(std::exp(logprob_new - logprob_old), 1e-8, 1e8);
}

double surrogate_term(double rho, double advantage, double eps) {
    const double clipped = std::clamp(rho, 1.0 - eps, 1.0 + eps);
    return std::min(rho * advantage, clipped * advantage);
}

double surrogate_objective(const GroupRollout& group, double eps) {
    if (group.responses.empty()) throw ValidationError("surrogate_objective: empty group");
    if (group.advantages.size() != group.responses.size()) {
        throw ValidationError("surrogate_objective: advantages not computed");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < group.responses.size(); ++i) {
        const SampledResponse& r = group.responses[i];
        sum += surrogate_term(importance_ratio(r.logprob_new, r.logprob_old),
                              group.advantages[i], eps);
    }
    return sum / static_cast<double>(group.responses.size());
}

double grpo_objective(const Policy& policy, std::vector<GroupRollout>& batch,
                      const GrpoConfig& cfg, std::span<double> grad_out) {
    if (batch.empty()) throw ValidationError("grpo_objective: empty batch");
    const bool want_grad = !grad_out.empty();
    if (want_grad && grad_out.size() != policy.params().size()) {
        throw ValidationError("grpo_objective: bad gradient buffer size");
    }

    const double inv_groups = 1.0 / static_cast<double>(batch.size());
    double objective = 0.0;
    for (GroupRollout& group : batch) {
        if (group.responses.size() < 2) {
            throw ValidationError("grpo_objective: group '" + group.prompt_id +
                                  "' has fewer than 2 responses");
        }
        if (group.advantages.size() != group.responses.size()) {
            throw ValidationError("grpo_objective: group '" + group.prompt_id +
                                  "' is missing advantages");
        }
        const double inv_g = 1.0 / static_cast<double>(group.responses.size());
        for (std::size_t i = 0; i < group.responses.size(); ++i) {
            SampledResponse& resp = group.responses[i];
            resp.logprob_new = policy.logprob_sequence(group.prompt, resp.tokens);
            const double adv = group.advantages[i];
            const double rho = importance_ratio(resp.logprob_new, resp.logprob_old);
            objective += inv_groups * inv_g * surrogate_term(rho, adv, cfg.clip_epsilon);
            if (!want_grad || adv == 0.0) continue;

            // d/d logprob_new of min(rho*A, clip(rho)*A): rho*A on the active
            // unclipped branch (d rho/d lp = rho), zero where the clipped
            // branch is strictly smaller (clip is flat outside the interval).
            const double unclipped = rho * adv;
            const double clipped =
                std::clamp(rho, 1.0 - cfg.clip_epsilon, 1.0 + cfg.clip_epsilon) * adv;
            if (unclipped <= clipped) {
                const double coef = inv_groups * inv_g * unclipped;
                policy.accumulate_sequence_grad(group.prompt, resp.tokens, coef, grad_out);
            }
        }
    }
    return objective;
}

TrainStats grpo_step(Policy& policy, std::vector<GroupRollout>& batch, const GrpoConfig& cfg) {
    std::vector<double> grad(policy.params().size(), 0.0);
    const double objective = grpo_objective(policy, batch, cfg, grad);

    double norm_sq = 0.0;
    for (double g : grad) norm_sq += g * g;
    const double grad_norm = std::sqrt(norm_sq);

    double sum_reward = 0.0;
    double sum_fin = 0.0;
    std::size_t n_responses = 0;
    std::size_t n_clipped = 0;
    for (const GroupRollout& group : batch) {
        for (const SampledResponse& r : group.responses) {
            sum_reward += r.reward.r_total;
            sum_fin += r.reward.r_fin;
            const double rho = importance_ratio(r.logprob_new, r.logprob_old);
            if (rho < 1.0 - cfg.clip_epsilon || rho > 1.0 + cfg.clip_epsilon) ++n_clipped;
            ++n_responses;
        }
    }

    TrainStats stats;
    stats.objective = objective;
    stats.mean_reward = sum_reward / static_cast<double>(n_responses);
    stats.mean_r_fin = sum_fin / static_cast<double>(n_responses);
    stats.clip_fraction = static_cast<double>(n_clipped) / static_cast<double>(n_responses);
    stats.grad_norm = grad_norm;

    if (!std::isfinite(grad_norm) || !std::isfinite(objective)) {
        stats.aborted = true;
        return stats;
    }
    policy.apply_gradient(grad, cfg.learning_rate);  // ascent on the surrogate
    return stats;
}

}  // namespace grpo
}  // namespace harmcot
