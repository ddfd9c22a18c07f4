#pragma once

// Desk-scale differentiable autoregressive policy. The prompt is pooled
// (mean of prompt-token embeddings) into a context vector, concatenated with
// the embeddings of the last k generated tokens, pushed through one tanh
// hidden layer and projected to vocabulary logits. All gradients are
// hand-derived and checked against finite differences in the test suite.

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "harmcot/schema.hpp"
#include "harmcot/vocab.hpp"

namespace harmcot {

struct PolicyDims {
    std::size_t vocab_size = 0;
    std::size_t embed_dim = 24;
    std::size_t hidden_dim = 32;
    std::size_t context_window = 4;  // k previous generated tokens

    std::size_t context_dim() const { return embed_dim * (context_window + 1); }
    std::size_t param_count() const {
        return vocab_size * embed_dim          // embedding table
               + hidden_dim * context_dim()    // context projection
               + hidden_dim                    // hidden bias
               + vocab_size * hidden_dim       // output projection
               + vocab_size;                   // output bias
    }
};

// Per-step training telemetry shared by the supervised and reinforcement
// paths; absent fields stay disengaged.
struct TrainStats {
    long step = 0;
    std::optional<double> l_cls;
    std::optional<double> l_cot;
    std::optional<double> l_total;
    std::optional<double> objective;
    std::optional<double> mean_reward;
    std::optional<double> mean_r_fin;
    std::optional<double> clip_fraction;
    double grad_norm = 0.0;
    bool aborted = false;  // non-finite gradient: parameters were not touched
};

class Policy {
  public:
    // Zero-initialized parameters (uniform next-token distribution).
    Policy(PolicyDims dims, std::shared_ptr<const Vocabulary> vocab);

    // Zero biases, small seeded pseudo-random weights.
    static Policy random_init(PolicyDims dims, std::shared_ptr<const Vocabulary> vocab,
                              std::uint64_t seed, double weight_scale = 0.1);

    const PolicyDims& dims() const { return dims_; }
    const Vocabulary& vocab() const { return *vocab_; }
    std::shared_ptr<const Vocabulary> vocab_ptr() const { return vocab_; }

    std::span<double> params() { return params_; }
    std::span<const double> params() const { return params_; }

    // log pi(tokens | prompt), the sum of per-position log-probabilities.
    // Empty sequence gives 0. Throws ValidationError on OOV tokens.
    double logprob_sequence(const PromptSpec& prompt, const TokenSeq& tokens) const;
    std::vector<double> per_token_logprobs(const PromptSpec& prompt, const TokenSeq& tokens) const;

    // Next-token log-distribution given the generated history (most recent
    // last); sums to 1 in probability space.
    std::vector<double> next_token_logprobs(const PromptSpec& prompt,
                                            const TokenSeq& history) const;

    struct SampleResult {
        TokenSeq tokens;  // excludes the terminator
        double logprob;   // equals logprob_sequence(prompt, tokens)
    };

    // Autoregressive sampling until the end token or max_len. Deterministic
    // given the seed. greedy=true decodes by argmax (the temperature -> 0
    // limit); temperature scales logits during sampling only, the returned
    // logprob is always the model's.
    SampleResult sample_response(const PromptSpec& prompt, std::size_t max_len,
                                 double temperature, std::uint64_t seed,
                                 bool greedy = false) const;

    // Mean negative log-likelihood per target token; >= 0.
    double loss_cot(const PromptSpec& prompt, const TokenSeq& gold_tokens) const;

    // Cross-entropy of the gold judgement token at the judgement slot (the
    // fixed "JUDGEMENT The image's label is" context; with k = 4 this
    // conditions identically to the slot inside a full document).
    double loss_cls(const PromptSpec& prompt, BinaryLabel gold_label) const;

    // Accumulates d(sum_t coefs[t] * log p(tokens[t]))/dtheta into grad.
    void accumulate_position_grads(const PromptSpec& prompt, const TokenSeq& tokens,
                                   std::span<const double> coefs, std::span<double> grad) const;
    // Same coefficient at every position (sequence-level log-probability).
    void accumulate_sequence_grad(const PromptSpec& prompt, const TokenSeq& tokens, double coef,
                                  std::span<double> grad) const;
    void accumulate_loss_cls_grad(const PromptSpec& prompt, BinaryLabel gold_label, double coef,
                                  std::span<double> grad) const;

    void apply_gradient(std::span<const double> grad, double scale);

    // The teacher-forced prefix used by loss_cls.
    static TokenSeq judgement_context();
    static const Token& judgement_token(BinaryLabel label);

    void save_checkpoint(const std::string& path, const std::string& stage_tag) const;

  private:
    PolicyDims dims_;
    std::shared_ptr<const Vocabulary> vocab_;
    std::vector<double> params_;

    struct Workspace;
    void forward_position(const std::vector<double>& context, const std::vector<int>& token_ids,
                          std::size_t pos, Workspace& ws) const;
    std::vector<double> pooled_context(const PromptSpec& prompt) const;
    std::vector<int> to_ids(const TokenSeq& tokens) const;

    // Parameter block offsets.
    std::size_t off_embed() const { return 0; }
    std::size_t off_w1() const { return dims_.vocab_size * dims_.embed_dim; }
    std::size_t off_b1() const { return off_w1() + dims_.hidden_dim * dims_.context_dim(); }
    std::size_t off_w2() const { return off_b1() + dims_.hidden_dim; }
    std::size_t off_b2() const { return off_w2() + dims_.vocab_size * dims_.hidden_dim; }
};

struct PolicyCheckpoint {
    Policy policy;
    std::string stage_tag;
};

// Validates dimensions against the stored vocabulary and parameter count.
PolicyCheckpoint load_checkpoint(const std::string& path);

enum class SftStage { Caption, Joint };

struct SftExample {
    PromptSpec prompt;
    TokenSeq target_tokens;             // caption tokens or full document tokens
    std::optional<BinaryLabel> label;   // engaged for Joint-stage classification
};

// One batch-mean gradient-descent step. Caption stage: mean caption NLL.
// Joint stage: l_total = l_cls + l_cot, each averaged over the full batch
// (examples without the corresponding target contribute 0 to that term).
TrainStats sft_step(Policy& policy, const std::vector<SftExample>& batch, SftStage stage,
                    double lr);

}  // namespace harmcot
