#include "harmcot/policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "harmcot/rng.hpp"

namespace harmcot {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Construction
// ---------------------------------------------------------------------------

Policy::Policy(PolicyDims dims, std::shared_ptr<const Vocabulary> vocab)
    : dims_(dims), vocab_(std::move(vocab)) {
    if (!vocab_) throw ValidationError("policy requires a vocabulary");
    if (dims_.vocab_size == 0) dims_.vocab_size = vocab_->size();
    if (dims_.vocab_size != vocab_->size()) {
        throw ValidationError("policy dims disagree with vocabulary size");
    }
    if (dims_.embed_dim == 0 || dims_.hidden_dim == 0 || dims_.context_window == 0) {
        throw ValidationError("policy dims must be positive");
    }
    params_.assign(dims_.param_count(), 0.0);
}

Policy Policy::random_init(PolicyDims dims, std::shared_ptr<const Vocabulary> vocab,
                           std::uint64_t seed, double weight_scale) {
    Policy p(dims, std::move(vocab));
    Rng rng(derive_seed(seed, 0x9c1a));
    // Weights get small gaussian noise; biases stay zero.
    const std::size_t weight_end = p.off_b1();
    for (std::size_t i = 0; i < weight_end; ++i) {
        p.params_[i] = weight_scale * rng.next_gaussian();
    }
    for (std::size_t i = p.off_w2(); i < p.off_b2(); ++i) {
        p.params_[i] = weight_scale * rng.next_gaussian();
    }
    return p;
}

// ---------------------------------------------------------------------------
// Forward pass
// ---------------------------------------------------------------------------

struct Policy::Workspace {
    std::vector<double> x;       // context-projection input
    std::vector<double> hidden;  // tanh activations
    std::vector<double> logits;
    std::vector<double> logprobs;
};

std::vector<int> Policy::to_ids(const TokenSeq& tokens) const {
    std::vector<int> ids;
    ids.reserve(tokens.size());
    for (const Token& t : tokens) ids.push_back(vocab_->id(t));
    return ids;
}

std::vector<double> Policy::pooled_context(const PromptSpec& prompt) const {
    std::vector<double> ctx(dims_.embed_dim, 0.0);
    if (prompt.rendered_tokens.empty()) return ctx;
    const double* emb = params_.data() + off_embed();
    for (const Token& t : prompt.rendered_tokens) {
        const int id = vocab_->id(t);
        const double* row = emb + static_cast<std::size_t>(id) * dims_.embed_dim;
        for (std::size_t i = 0; i < dims_.embed_dim; ++i) ctx[i] += row[i];
    }
    const double inv = 1.0 / static_cast<double>(prompt.rendered_tokens.size());
    for (double& v : ctx) v *= inv;
    return ctx;
}

// Fills ws with the forward state for predicting token_ids[pos] (history =
// token_ids[0..pos)). token_ids may be longer; only entries before pos and
// the vocabulary size matter.
void Policy::forward_position(const std::vector<double>& context, const std::vector<int>& token_ids,
                              std::size_t pos, Workspace& ws) const {
    const std::size_t d = dims_.embed_dim;
    const std::size_t h = dims_.hidden_dim;
    const std::size_t v = dims_.vocab_size;
    const std::size_t k = dims_.context_window;
    const std::size_t dctx = dims_.context_dim();

    ws.x.assign(dctx, 0.0);
    std::copy(context.begin(), context.end(), ws.x.begin());
    const double* emb = params_.data() + off_embed();
    for (std::size_t j = 0; j < k; ++j) {
        // slot j holds the (j+1)-th most recent token; zeros before the start
        if (pos < j + 1) break;
        const int id = token_ids[pos - j - 1];
        const double* row = emb + static_cast<std::size_t>(id) * d;
        std::copy(row, row + d, ws.x.begin() + static_cast<std::ptrdiff_t>(d * (j + 1)));
    }

    ws.hidden.assign(h, 0.0);
    const double* w1 = params_.data() + off_w1();
    const double* b1 = params_.data() + off_b1();
    for (std::size_t r = 0; r < h; ++r) {
        const double* row = w1 + r * dctx;
        double acc = b1[r];
        for (std::size_t c = 0; c < dctx; ++c) acc += row[c] * ws.x[c];
        ws.hidden[r] = std::tanh(acc);
    }

    ws.logits.assign(v, 0.0);
    const double* w2 = params_.data() + off_w2();
    const double* b2 = params_.data() + off_b2();
    for (std::size_t r = 0; r < v; ++r) {
        const double* row = w2 + r * h;
        double acc = b2[r];
        for (std::size_t c = 0; c < h; ++c) acc += row[c] * ws.hidden[c];
        ws.logits[r] = acc;
    }

    double max_logit = -std::numeric_limits<double>::infinity();
    for (double z : ws.logits) max_logit = std::max(max_logit, z);
    double sum_exp = 0.0;
    for (double z : ws.logits) sum_exp += std::exp(z - max_logit);
    const double log_z = max_logit + std::log(sum_exp);
    ws.logprobs.assign(v, 0.0);
    for (std::size_t i = 0; i < v; ++i) ws.logprobs[i] = ws.logits[i] - log_z;
}

std::vector<double> Policy::per_token_logprobs(const PromptSpec& prompt,
                                               const TokenSeq& tokens) const {
    const std::vector<int> ids = to_ids(tokens);
    const std::vector<double> context = pooled_context(prompt);
    Workspace ws;
    std::vector<double> out;
    out.reserve(tokens.size());
    for (std::size_t t = 0; t < ids.size(); ++t) {
        forward_position(context, ids, t, ws);
        out.push_back(ws.logprobs[static_cast<std::size_t>(ids[t])]);
    }
    return out;
}

double Policy::logprob_sequence(const PromptSpec& prompt, const TokenSeq& tokens) const {
    double sum = 0.0;
    for (double lp : per_token_logprobs(prompt, tokens)) sum += lp;
    return sum;
}

std::vector<double> Policy::next_token_logprobs(const PromptSpec& prompt,
                                                const TokenSeq& history) const {
    std::vector<int> ids = to_ids(history);
    const std::vector<double> context = pooled_context(prompt);
    Workspace ws;
    forward_position(context, ids, ids.size(), ws);
    return ws.logprobs;
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

Policy::SampleResult Policy::sample_response(const PromptSpec& prompt, std::size_t max_len,
                                             double temperature, std::uint64_t seed,
                                             bool greedy) const {
    if (max_len < 1) throw ValidationError("sample_response: max_len must be >= 1");
    if (!greedy && temperature <= 0.0) {
        throw ValidationError("sample_response: temperature must be positive");
    }

    const std::size_t v = dims_.vocab_size;
    const int end_id = vocab_->end_id();
    const std::vector<double> context = pooled_context(prompt);
    Rng rng(derive_seed(seed, 0x5a11));

    std::vector<int> ids;
    double logprob = 0.0;
    Workspace ws;
    std::vector<double> probs(v);
    for (std::size_t t = 0; t < max_len; ++t) {
        forward_position(context, ids, ids.size(), ws);

        int picked;
        if (greedy) {
            picked = 0;
            for (std::size_t i = 1; i < v; ++i) {
                if (ws.logits[i] > ws.logits[static_cast<std::size_t>(picked)]) {
                    picked = static_cast<int>(i);
                }
            }
        } else {
            double max_scaled = -std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < v; ++i) {
                probs[i] = ws.logits[i] / temperature;
                max_scaled = std::max(max_scaled, probs[i]);
            }
            double total = 0.0;
            for (std::size_t i = 0; i < v; ++i) {
                probs[i] = std::exp(probs[i] - max_scaled);
                total += probs[i];
            }
            const double u = rng.next_double() * total;
            double acc = 0.0;
            picked = static_cast<int>(v) - 1;
            for (std::size_t i = 0; i < v; ++i) {
                acc += probs[i];
                if (u < acc) {
                    picked = static_cast<int>(i);
                    break;
                }
            }
        }

        if (picked == end_id) break;
        logprob += ws.logprobs[static_cast<std::size_t>(picked)];
        ids.push_back(picked);
    }

    SampleResult result;
    result.tokens.reserve(ids.size());
    for (int id : ids) result.tokens.push_back(vocab_->token(id));
    result.logprob = logprob;
    return result;
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

double Policy::loss_cot(const PromptSpec& prompt, const TokenSeq& gold_tokens) const {
    if (gold_tokens.empty()) throw ValidationError("loss_cot: empty gold sequence");
    double sum = 0.0;
    for (double lp : per_token_logprobs(prompt, gold_tokens)) sum += lp;
    return -sum / static_cast<double>(gold_tokens.size());
}

TokenSeq Policy::judgement_context() { return {"JUDGEMENT", "The", "image's", "label", "is"}; }

const Token& Policy::judgement_token(BinaryLabel label) {
    static const Token harmful = "harmful";
    static const Token nonharmful = "nonharmful";
    return label == BinaryLabel::Harmful ? harmful : nonharmful;
}

double Policy::loss_cls(const PromptSpec& prompt, BinaryLabel gold_label) const {
    TokenSeq seq = judgement_context();
    seq.push_back(judgement_token(gold_label));
    return -per_token_logprobs(prompt, seq).back();
}

// ---------------------------------------------------------------------------
// Backward pass
// ---------------------------------------------------------------------------

void Policy::accumulate_position_grads(const PromptSpec& prompt, const TokenSeq& tokens,
                                       std::span<const double> coefs,
                                       std::span<double> grad) const {
    if (coefs.size() != tokens.size()) {
        throw ValidationError("accumulate_position_grads: coefs/tokens length mismatch");
    }
    if (grad.size() != params_.size()) {
        throw ValidationError("accumulate_position_grads: bad gradient buffer size");
    }
    if (tokens.empty()) return;

    const std::size_t d = dims_.embed_dim;
    const std::size_t h = dims_.hidden_dim;
    const std::size_t v = dims_.vocab_size;
    const std::size_t k = dims_.context_window;
    const std::size_t dctx = dims_.context_dim();

    const std::vector<int> ids = to_ids(tokens);
    std::vector<int> prompt_ids;
    prompt_ids.reserve(prompt.rendered_tokens.size());
    for (const Token& t : prompt.rendered_tokens) prompt_ids.push_back(vocab_->id(t));

    const std::vector<double> context = pooled_context(prompt);
    const double prompt_inv =
        prompt_ids.empty() ? 0.0 : 1.0 / static_cast<double>(prompt_ids.size());

    Workspace ws;
    std::vector<double> dlogits(v);
    std::vector<double> dhidden(h);
    std::vector<double> dx(dctx);

    double* g_emb = grad.data() + off_embed();
    double* g_w1 = grad.data() + off_w1();
    double* g_b1 = grad.data() + off_b1();
    double* g_w2 = grad.data() + off_w2();
    double* g_b2 = grad.data() + off_b2();
    const double* w1 = params_.data() + off_w1();
    const double* w2 = params_.data() + off_w2();

    for (std::size_t t = 0; t < ids.size(); ++t) {
        const double coef = coefs[t];
        if (coef == 0.0) continue;
        forward_position(context, ids, t, ws);

        // d(logp[y])/dz = onehot(y) - softmax(z), scaled by coef
        for (std::size_t i = 0; i < v; ++i) dlogits[i] = -coef * std::exp(ws.logprobs[i]);
        dlogits[static_cast<std::size_t>(ids[t])] += coef;

        // output projection
        for (std::size_t r = 0; r < v; ++r) {
            const double dz = dlogits[r];
            if (dz == 0.0) continue;
            double* grow = g_w2 + r * h;
            for (std::size_t c = 0; c < h; ++c) grow[c] += dz * ws.hidden[c];
            g_b2[r] += dz;
        }
        std::fill(dhidden.begin(), dhidden.end(), 0.0);
        for (std::size_t r = 0; r < v; ++r) {
            const double dz = dlogits[r];
            if (dz == 0.0) continue;
            const double* row = w2 + r * h;
            for (std::size_t c = 0; c < h; ++c) dhidden[c] += dz * row[c];
        }

        // tanh hidden layer
        for (std::size_t r = 0; r < h; ++r) {
            dhidden[r] *= 1.0 - ws.hidden[r] * ws.hidden[r];
        }
        for (std::size_t r = 0; r < h; ++r) {
            const double du = dhidden[r];
            if (du == 0.0) continue;
            double* grow = g_w1 + r * dctx;
            for (std::size_t c = 0; c < dctx; ++c) grow[c] += du * ws.x[c];
            g_b1[r] += du;
        }
        std::fill(dx.begin(), dx.end(), 0.0);
        for (std::size_t r = 0; r < h; ++r) {
            const double du = dhidden[r];
            if (du == 0.0) continue;
            const double* row = w1 + r * dctx;
            for (std::size_t c = 0; c < dctx; ++c) dx[c] += du * row[c];
        }

        // embeddings: pooled prompt slice spreads over all prompt tokens
        for (int pid : prompt_ids) {
            double* grow = g_emb + static_cast<std::size_t>(pid) * d;
            for (std::size_t c = 0; c < d; ++c) grow[c] += prompt_inv * dx[c];
        }
        // history slices
        for (std::size_t j = 0; j < k; ++j) {
            if (t < j + 1) break;
            const int hid = ids[t - j - 1];
            double* grow = g_emb + static_cast<std::size_t>(hid) * d;
            const double* slice = dx.data() + d * (j + 1);
            for (std::size_t c = 0; c < d; ++c) grow[c] += slice[c];
        }
    }
}

void Policy::accumulate_sequence_grad(const PromptSpec& prompt, const TokenSeq& tokens, double coef,
                                      std::span<double> grad) const {
    const std::vector<double> coefs(tokens.size(), coef);
    accumulate_position_grads(prompt, tokens, coefs, grad);
}

void Policy::accumulate_loss_cls_grad(const PromptSpec& prompt, BinaryLabel gold_label,
                                      double coef, std::span<double> grad) const {
    TokenSeq seq = judgement_context();
    seq.push_back(judgement_token(gold_label));
    std::vector<double> coefs(seq.size(), 0.0);
    coefs.back() = -coef;  // loss = -logprob at the judgement slot
    accumulate_position_grads(prompt, seq, coefs, grad);
}

void Policy::apply_gradient(std::span<const double> grad, double scale) {
    if (grad.size() != params_.size()) {
        throw ValidationError("apply_gradient: bad gradient buffer size");
    }
    for (std::size_t i = 0; i < params_.size(); ++i) params_[i] += scale * grad[i];
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

void Policy::save_checkpoint(const std::string& path, const std::string& stage_tag) const {
    json j;
    j["format_version"] = 1;
    j["stage"] = stage_tag;
    j["dims"] = {{"vocab_size", dims_.vocab_size},
                 {"embed_dim", dims_.embed_dim},
                 {"hidden_dim", dims_.hidden_dim},
                 {"context_window", dims_.context_window}};
    j["vocab"] = vocab_->tokens();
    j["params"] = params_;
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint '" + path + "'");
    out << j.dump() << "\n";
    if (!out) throw IoError("write failure on checkpoint '" + path + "'");
}

PolicyCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open checkpoint '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw IoError("checkpoint '" + path + "': invalid JSON: " + e.what());
    }
    if (!j.contains("format_version") || j["format_version"].get<int>() != 1) {
        throw IoError("checkpoint '" + path + "': unsupported format version");
    }
    PolicyDims dims;
    dims.vocab_size = j.at("dims").at("vocab_size").get<std::size_t>();
    dims.embed_dim = j.at("dims").at("embed_dim").get<std::size_t>();
    dims.hidden_dim = j.at("dims").at("hidden_dim").get<std::size_t>();
    dims.context_window = j.at("dims").at("context_window").get<std::size_t>();

    auto vocab = std::make_shared<Vocabulary>(j.at("vocab").get<std::vector<std::string>>());
    if (vocab->size() != dims.vocab_size) {
        throw ValidationError("checkpoint '" + path + "': vocabulary size disagrees with dims");
    }
    std::vector<double> params = j.at("params").get<std::vector<double>>();
    if (params.size() != dims.param_count()) {
        throw ValidationError("checkpoint '" + path + "': parameter count " +
                              std::to_string(params.size()) + " does not match dims (" +
                              std::to_string(dims.param_count()) + ")");
    }

    PolicyCheckpoint ck{Policy(dims, std::move(vocab)), j.at("stage").get<std::string>()};
    std::copy(params.begin(), params.end(), ck.policy.params().begin());
    return ck;
}

// ---------------------------------------------------------------------------
// Supervised step
// ---------------------------------------------------------------------------

TrainStats sft_step(Policy& policy, const std::vector<SftExample>& batch, SftStage stage,
                    double lr) {
    if (batch.empty()) throw ValidationError("sft_step: empty batch");

    const double inv_b = 1.0 / static_cast<double>(batch.size());
    std::vector<double> grad(policy.params().size(), 0.0);

    double sum_cls = 0.0;
    double sum_cot = 0.0;
    bool any_cls = false;
    bool any_cot = false;

    for (const SftExample& ex : batch) {
        if (stage == SftStage::Caption) {
            if (ex.target_tokens.empty()) {
                throw ValidationError("sft_step: caption-stage example without caption tokens");
            }
            sum_cot += policy.loss_cot(ex.prompt, ex.target_tokens);
            any_cot = true;
            const double coef = -inv_b / static_cast<double>(ex.target_tokens.size());
            policy.accumulate_sequence_grad(ex.prompt, ex.target_tokens, coef, grad);
            continue;
        }
        // Joint stage
        if (!ex.target_tokens.empty()) {
            sum_cot += policy.loss_cot(ex.prompt, ex.target_tokens);
            any_cot = true;
            const double coef = -inv_b / static_cast<double>(ex.target_tokens.size());
            policy.accumulate_sequence_grad(ex.prompt, ex.target_tokens, coef, grad);
        }
        if (ex.label) {
            sum_cls += policy.loss_cls(ex.prompt, *ex.label);
            any_cls = true;
            policy.accumulate_loss_cls_grad(ex.prompt, *ex.label, inv_b, grad);
        }
    }

    // The coefficient signs above make `grad` hold d(batch loss)/dtheta.
    double norm_sq = 0.0;
    for (double g : grad) norm_sq += g * g;
    const double grad_norm = std::sqrt(norm_sq);

    TrainStats stats;
    if (any_cls) stats.l_cls = sum_cls * inv_b;
    if (any_cot) stats.l_cot = sum_cot * inv_b;
    if (stage == SftStage::Joint) {
        stats.l_total = (any_cls ? *stats.l_cls : 0.0) + (any_cot ? *stats.l_cot : 0.0);
    } else {
        stats.l_total = stats.l_cot;
    }
    stats.grad_norm = grad_norm;

    if (!std::isfinite(grad_norm) || (stats.l_total && !std::isfinite(*stats.l_total))) {
        stats.aborted = true;
        return stats;
    }
    policy.apply_gradient(grad, -lr);
    return stats;
}

}  // namespace harmcot
