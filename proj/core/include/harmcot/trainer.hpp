#pragma once

// Three-stage training pipeline: caption supervision, joint reasoning and
// classification supervision, then group-relative reinforcement with the
// gated composite reward. Also the evaluation harness and the reward-weight
// sweep used by the ablation tooling.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "harmcot/dataset.hpp"
#include "harmcot/embedding.hpp"
#include "harmcot/grpo.hpp"
#include "harmcot/metrics.hpp"
#include "harmcot/policy.hpp"
#include "harmcot/reward.hpp"
#include "harmcot/synth.hpp"

namespace harmcot {
namespace trainer {

struct SftStageConfig {
    bool enabled = true;
    double learning_rate = 0.3;
    long steps = 300;
    std::size_t batch_size = 16;
};

struct Stage2Config {
    bool enabled = true;
    double learning_rate = 0.3;
    long steps = 800;
    std::size_t batch_size = 16;
    bool label_only = false;  // drop the reasoning term, supervise labels only
};

struct Stage3Config {
    bool enabled = true;
    double learning_rate = 0.05;
    long steps = 300;
    std::size_t batch_size = 4;  // prompts per step
    std::size_t group_size = 8;
    double clip_epsilon = 0.2;
    double temperature = 1.0;
    long epochs = 1;
    std::size_t max_tokens = 96;
    long patience = 50;  // consecutive zero-advantage steps before a warning
};

struct PolicyConfig {
    std::size_t embed_dim = 24;
    std::size_t hidden_dim = 32;
    std::size_t context_window = 4;
    double init_scale = 0.1;
};

struct RunConfig {
    std::uint64_t seed = 42;
    std::string train_path;
    std::string test_path;
    std::string rules_path;  // empty: built-in rules
    std::string out_dir = "run";
    std::optional<std::string> resume_checkpoint;  // starting point for the first enabled stage

    PolicyConfig policy;
    SftStageConfig stage1;
    Stage2Config stage2;
    Stage3Config stage3;
    reward::RewardWeights reward_weights;
    metrics::SimilarityWeights similarity_weights;
};

RunConfig load_run_config(const std::string& path);
void save_run_config(const RunConfig& cfg, const std::string& path);

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

struct EvalReport {
    std::size_t n = 0;
    metrics::ClassificationReport classification;
    metrics::SubAccReport sub_acc;
    double decision_alignment = 0.0;
    double format_valid_rate = 0.0;
    // Mean caption similarity over records with a gold caption; disengaged
    // for label-only runs.
    std::optional<metrics::SimilarityScores> similarity;
};

// Greedy-decodes every record, parses, scores. include_similarity=false
// leaves the caption-similarity section out entirely.
EvalReport evaluate(const Policy& policy, const std::vector<MemeRecord>& records,
                    const EmbeddingProvider& embedder, bool include_similarity,
                    const metrics::SimilarityWeights& sim_weights = {},
                    std::size_t max_tokens = 96);

// report.json (full precision) and report.csv (one metric per row, 4
// decimals) under `dir`. Creates the directory.
void write_eval_report(const EvalReport& report, const std::string& dir);
EvalReport load_eval_report(const std::string& dir);

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

// Caption supervision over records with gold captions. Writes a per-step CSV
// log to log_path when nonempty. Throws when no record carries a caption.
Policy run_stage1(const RunConfig& cfg, const std::vector<MemeRecord>& train, Policy policy,
                  const std::string& log_path = "");

// Joint (or label-only) supervision: documents contribute the reasoning
// term, labels contribute the classification term.
Policy run_stage2(const RunConfig& cfg, const std::vector<MemeRecord>& train, Policy policy,
                  const std::string& log_path = "");

struct Stage3Summary {
    long steps_run = 0;
    long patience_warnings = 0;
    long aborted_steps = 0;
};

// Group rollouts, gated rewards, advantage normalization, clipped-surrogate
// ascent. Writes the step log and a per-response rollout log for replay.
Policy run_stage3(const RunConfig& cfg, const std::vector<MemeRecord>& train, Policy policy,
                  Stage3Summary* summary = nullptr, const std::string& log_path = "",
                  const std::string& rollout_log_path = "");

// ---------------------------------------------------------------------------
// Pipeline and sweep
// ---------------------------------------------------------------------------

struct PipelineResult {
    Policy policy;
    std::vector<std::string> checkpoints;  // paths, one per stage run
    Stage3Summary stage3;
};

// Runs the enabled stages in order inside cfg.out_dir: checkpoints, step
// logs, and an evaluation report after stage 2 and stage 3. Stage 3 demands
// a stage-2 lineage (stage 2 enabled, or a resume checkpoint tagged stage2).
PipelineResult run_pipeline(const RunConfig& cfg);

struct SweepPoint {
    reward::RewardWeights weights;
    std::uint64_t seed = 0;
    EvalReport report;
    long patience_warnings = 0;
};

// Reruns stage 3 from the same checkpoint and seed for every grid point.
// Each grid point must satisfy the weight-sum constraint.
std::vector<SweepPoint> sweep_reward_weights(const RunConfig& cfg, const Policy& stage2_policy,
                                             const std::vector<MemeRecord>& train,
                                             const std::vector<MemeRecord>& test,
                                             const std::vector<reward::RewardWeights>& grid);

// gamma axis with the intermediate-signal weights fixed at a 3:5 ratio.
std::vector<reward::RewardWeights> gamma_grid(const std::vector<double>& gammas);

void write_sweep_csv(const std::vector<SweepPoint>& points, const std::string& path);

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

// The supervised view of a record: prompt, document target (with terminator)
// when a gold chain-of-thought exists, label.
SftExample to_sft_example(const MemeRecord& rec, bool label_only);

// Gold document tokens (serialized annotation plus the end token).
TokenSeq document_tokens(const CoTAnnotation& ann);

}  // namespace trainer
}  // namespace harmcot
