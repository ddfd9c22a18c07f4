#include "harmcot/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "harmcot/rng.hpp"

namespace harmcot {
namespace trainer {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string fmt(double v, int decimals = 4) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
    return buf;
}

std::string opt_fmt(const std::optional<double>& v, int decimals = 6) {
    return v ? fmt(*v, decimals) : std::string();
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory '" + dir + "': " + ec.message());
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path + "'");
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw IoError("config '" + path + "': invalid JSON: " + e.what());
    }

    RunConfig cfg;
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("dataset")) {
        const json& d = j["dataset"];
        cfg.train_path = d.value("train", "");
        cfg.test_path = d.value("test", "");
        cfg.rules_path = d.value("rules", "");
    }
    cfg.out_dir = j.value("out_dir", cfg.out_dir);
    if (j.contains("resume_checkpoint")) cfg.resume_checkpoint = j["resume_checkpoint"];

    if (j.contains("policy")) {
        const json& p = j["policy"];
        cfg.policy.embed_dim = p.value("embed_dim", cfg.policy.embed_dim);
        cfg.policy.hidden_dim = p.value("hidden_dim", cfg.policy.hidden_dim);
        cfg.policy.context_window = p.value("context_window", cfg.policy.context_window);
        cfg.policy.init_scale = p.value("init_scale", cfg.policy.init_scale);
    }
    if (j.contains("stage1")) {
        const json& s = j["stage1"];
        cfg.stage1.enabled = s.value("enabled", cfg.stage1.enabled);
        cfg.stage1.learning_rate = s.value("learning_rate", cfg.stage1.learning_rate);
        cfg.stage1.steps = s.value("steps", cfg.stage1.steps);
        cfg.stage1.batch_size = s.value("batch_size", cfg.stage1.batch_size);
    }
    if (j.contains("stage2")) {
        const json& s = j["stage2"];
        cfg.stage2.enabled = s.value("enabled", cfg.stage2.enabled);
        cfg.stage2.learning_rate = s.value("learning_rate", cfg.stage2.learning_rate);
        cfg.stage2.steps = s.value("steps", cfg.stage2.steps);
        cfg.stage2.batch_size = s.value("batch_size", cfg.stage2.batch_size);
        cfg.stage2.label_only = s.value("label_only", cfg.stage2.label_only);
    }
    if (j.contains("stage3")) {
        const json& s = j["stage3"];
        cfg.stage3.enabled = s.value("enabled", cfg.stage3.enabled);
        cfg.stage3.learning_rate = s.value("learning_rate", cfg.stage3.learning_rate);
        cfg.stage3.steps = s.value("steps", cfg.stage3.steps);
        cfg.stage3.batch_size = s.value("batch_size", cfg.stage3.batch_size);
        cfg.stage3.group_size = s.value("group_size", cfg.stage3.group_size);
        cfg.stage3.clip_epsilon = s.value("clip_epsilon", cfg.stage3.clip_epsilon);
        cfg.stage3.temperature = s.value("temperature", cfg.stage3.temperature);
        cfg.stage3.epochs = s.value("epochs", cfg.stage3.epochs);
        cfg.stage3.max_tokens = s.value("max_tokens", cfg.stage3.max_tokens);
        cfg.stage3.patience = s.value("patience", cfg.stage3.patience);
    }
    if (j.contains("reward")) {
        const json& r = j["reward"];
        cfg.reward_weights.alpha = r.value("alpha", cfg.reward_weights.alpha);
        cfg.reward_weights.beta = r.value("beta", cfg.reward_weights.beta);
        cfg.reward_weights.gamma = r.value("gamma", cfg.reward_weights.gamma);
        if (r.contains("similarity_weights")) {
            const json& w = r["similarity_weights"];
            cfg.similarity_weights.bleu = w.at(0).get<double>();
            cfg.similarity_weights.rouge = w.at(1).get<double>();
            cfg.similarity_weights.emb = w.at(2).get<double>();
        }
    }
    return cfg;
}

void save_run_config(const RunConfig& cfg, const std::string& path) {
    json j;
    j["seed"] = cfg.seed;
    j["dataset"] = {{"train", cfg.train_path}, {"test", cfg.test_path}, {"rules", cfg.rules_path}};
    j["out_dir"] = cfg.out_dir;
    if (cfg.resume_checkpoint) j["resume_checkpoint"] = *cfg.resume_checkpoint;
    j["policy"] = {{"embed_dim", cfg.policy.embed_dim},
                   {"hidden_dim", cfg.policy.hidden_dim},
                   {"context_window", cfg.policy.context_window},
                   {"init_scale", cfg.policy.init_scale}};
    j["stage1"] = {{"enabled", cfg.stage1.enabled},
                   {"learning_rate", cfg.stage1.learning_rate},
                   {"steps", cfg.stage1.steps},
                   {"batch_size", cfg.stage1.batch_size}};
    j["stage2"] = {{"enabled", cfg.stage2.enabled},
                   {"learning_rate", cfg.stage2.learning_rate},
                   {"steps", cfg.stage2.steps},
                   {"batch_size", cfg.stage2.batch_size},
                   {"label_only", cfg.stage2.label_only}};
    j["stage3"] = {{"enabled", cfg.stage3.enabled},
                   {"learning_rate", cfg.stage3.learning_rate},
                   {"steps", cfg.stage3.steps},
                   {"batch_size", cfg.stage3.batch_size},
                   {"group_size", cfg.stage3.group_size},
                   {"clip_epsilon", cfg.stage3.clip_epsilon},
                   {"temperature", cfg.stage3.temperature},
                   {"epochs", cfg.stage3.epochs},
                   {"max_tokens", cfg.stage3.max_tokens},
                   {"patience", cfg.stage3.patience}};
    j["reward"] = {{"alpha", cfg.reward_weights.alpha},
                   {"beta", cfg.reward_weights.beta},
                   {"gamma", cfg.reward_weights.gamma},
                   {"similarity_weights",
                    json::array({cfg.similarity_weights.bleu, cfg.similarity_weights.rouge,
                                 cfg.similarity_weights.emb})}};
    auto out = open_out(path);
    out << j.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

TokenSeq document_tokens(const CoTAnnotation& ann) {
    TokenSeq tokens = tokenize(serialize_cot(ann));
    tokens.push_back(Vocabulary::kEndToken);
    return tokens;
}

SftExample to_sft_example(const MemeRecord& rec, bool label_only) {
    SftExample ex;
    ex.prompt = render_prompt(rec, "default");
    if (!label_only && rec.cot) ex.target_tokens = document_tokens(*rec.cot);
    ex.label = rec.label;
    return ex;
}

namespace {

std::vector<std::size_t> draw_batch(Rng& rng, std::size_t n, std::size_t batch_size) {
    std::vector<std::size_t> idx(batch_size);
    for (std::size_t& i : idx) i = static_cast<std::size_t>(rng.next_below(n));
    return idx;
}

void write_sft_log_header(std::ofstream& out) {
    out << "step,l_cls,l_cot,l_total,grad_norm\n";
}

void append_sft_log(std::ofstream& out, const TrainStats& s) {
    out << s.step << ',' << opt_fmt(s.l_cls) << ',' << opt_fmt(s.l_cot) << ','
        << opt_fmt(s.l_total) << ',' << fmt(s.grad_norm, 6) << "\n";
}

}  // namespace

// ---------------------------------------------------------------------------
// Stage 1: caption supervision
// ---------------------------------------------------------------------------

Policy run_stage1(const RunConfig& cfg, const std::vector<MemeRecord>& train, Policy policy,
                  const std::string& log_path) {
    std::vector<SftExample> pool;
    for (const MemeRecord& rec : train) {
        if (!rec.cot || rec.cot->caption.empty()) continue;
        SftExample ex;
        ex.prompt = render_prompt(rec, "default");
        ex.target_tokens = tokenize(rec.cot->caption);
        pool.push_back(std::move(ex));
    }
    if (pool.empty()) throw ValidationError("stage 1: no records carry gold captions");

    std::ofstream log;
    if (!log_path.empty()) {
        log = open_out(log_path);
        write_sft_log_header(log);
    }

    Rng rng(derive_seed(cfg.seed, 1));
    for (long step = 0; step < cfg.stage1.steps; ++step) {
        std::vector<SftExample> batch;
        for (std::size_t i : draw_batch(rng, pool.size(), cfg.stage1.batch_size)) {
            batch.push_back(pool[i]);
        }
        TrainStats stats = sft_step(policy, batch, SftStage::Caption, cfg.stage1.learning_rate);
        stats.step = step;
        if (log.is_open()) append_sft_log(log, stats);
        if (stats.aborted) {
            std::cerr << "stage1: non-finite loss at step " << step << ", step skipped\n";
        }
    }
    return policy;
}

// ---------------------------------------------------------------------------
// Stage 2: joint supervision
// ---------------------------------------------------------------------------

Policy run_stage2(const RunConfig& cfg, const std::vector<MemeRecord>& train, Policy policy,
                  const std::string& log_path) {
    if (train.empty()) throw ValidationError("stage 2: empty training set");
    std::vector<SftExample> pool;
    pool.reserve(train.size());
    for (const MemeRecord& rec : train) pool.push_back(to_sft_example(rec, cfg.stage2.label_only));

    std::ofstream log;
    if (!log_path.empty()) {
        log = open_out(log_path);
        write_sft_log_header(log);
    }

    Rng rng(derive_seed(cfg.seed, 2));
    for (long step = 0; step < cfg.stage2.steps; ++step) {
        std::vector<SftExample> batch;
        for (std::size_t i : draw_batch(rng, pool.size(), cfg.stage2.batch_size)) {
            batch.push_back(pool[i]);
        }
        TrainStats stats = sft_step(policy, batch, SftStage::Joint, cfg.stage2.learning_rate);
        stats.step = step;
        if (log.is_open()) append_sft_log(log, stats);
        if (stats.aborted) {
            std::cerr << "stage2: non-finite loss at step " << step << ", step skipped\n";
        }
    }
    return policy;
}

// ---------------------------------------------------------------------------
// Stage 3: group-relative reinforcement
// ---------------------------------------------------------------------------

Policy run_stage3(const RunConfig& cfg, const std::vector<MemeRecord>& train, Policy policy,
                  Stage3Summary* summary, const std::string& log_path,
                  const std::string& rollout_log_path) {
    if (train.empty()) throw ValidationError("stage 3: empty training set");
    cfg.reward_weights.validate();

    grpo::GrpoConfig gcfg;
    gcfg.group_size = cfg.stage3.group_size;
    gcfg.clip_epsilon = cfg.stage3.clip_epsilon;
    gcfg.learning_rate = cfg.stage3.learning_rate;
    gcfg.temperature = cfg.stage3.temperature;
    if (gcfg.group_size < 2) throw ValidationError("stage 3: group_size must be >= 2");

    const HashEmbedder embedder;
    std::ofstream log;
    if (!log_path.empty()) {
        log = open_out(log_path);
        log << "step,objective,mean_reward,mean_r_fin,clip_fraction,grad_norm\n";
    }
    std::ofstream rollout_log;
    if (!rollout_log_path.empty()) {
        rollout_log = open_out(rollout_log_path);
        rollout_log << "step,prompt_id,response,r_sem,r_sub,r_fin,r_total,advantage,"
                       "logprob_old,logprob_new\n";
    }

    Stage3Summary local;
    Rng rng(derive_seed(cfg.seed, 3));
    long zero_streak = 0;
    const long total_steps = cfg.stage3.steps * std::max<long>(1, cfg.stage3.epochs);

    for (long step = 0; step < total_steps; ++step) {
        std::vector<grpo::GroupRollout> batch;
        batch.reserve(cfg.stage3.batch_size);
        bool all_zero = true;
        for (std::size_t b = 0; b < cfg.stage3.batch_size; ++b) {
            const MemeRecord& rec = train[static_cast<std::size_t>(rng.next_below(train.size()))];
            grpo::GroupRollout group;
            group.prompt_id = rec.id;
            group.prompt = render_prompt(rec, "default");

            std::vector<double> rewards;
            rewards.reserve(gcfg.group_size);
            for (std::size_t g = 0; g < gcfg.group_size; ++g) {
                const std::uint64_t sample_seed = rng.next_u64();
                Policy::SampleResult sampled = policy.sample_response(
                    group.prompt, cfg.stage3.max_tokens, gcfg.temperature, sample_seed);
                grpo::SampledResponse resp;
                resp.tokens = std::move(sampled.tokens);
                resp.logprob_old = sampled.logprob;
                resp.logprob_new = sampled.logprob;
                resp.reward = reward::reward_total(parse_response(resp.tokens), rec,
                                                   cfg.reward_weights, embedder,
                                                   cfg.similarity_weights);
                rewards.push_back(resp.reward.r_total);
                group.responses.push_back(std::move(resp));
            }
            group.advantages = grpo::compute_advantages(rewards);
            for (double a : group.advantages) {
                if (a != 0.0) {
                    all_zero = false;
                    break;
                }
            }
            batch.push_back(std::move(group));
        }

        TrainStats stats = grpo::grpo_step(policy, batch, gcfg);
        stats.step = step;
        if (stats.aborted) {
            ++local.aborted_steps;
            std::cerr << "stage3: non-finite gradient at step " << step << ", step aborted\n";
        }

        if (log.is_open()) {
            log << step << ',' << opt_fmt(stats.objective) << ',' << opt_fmt(stats.mean_reward)
                << ',' << opt_fmt(stats.mean_r_fin) << ',' << opt_fmt(stats.clip_fraction) << ','
                << fmt(stats.grad_norm, 6) << "\n";
        }
        if (rollout_log.is_open()) {
            for (const grpo::GroupRollout& group : batch) {
                for (std::size_t i = 0; i < group.responses.size(); ++i) {
                    const grpo::SampledResponse& r = group.responses[i];
                    rollout_log << step << ',' << group.prompt_id << ',' << i << ','
                                << fmt(r.reward.r_sem, 6) << ','
                                << (r.reward.r_sub ? fmt(*r.reward.r_sub, 6) : std::string())
                                << ',' << fmt(r.reward.r_fin, 6) << ','
                                << fmt(r.reward.r_total, 6) << ',' << fmt(group.advantages[i], 6)
                                << ',' << fmt(r.logprob_old, 6) << ',' << fmt(r.logprob_new, 6)
                                << "\n";
                }
            }
        }

        // Reward-sparsity watchdog: every group degenerate means no learning
        // signal this step.
        if (all_zero) {
            ++zero_streak;
            if (zero_streak >= cfg.stage3.patience) {
                ++local.patience_warnings;
                std::cerr << "stage3: reward sparsity warning: " << zero_streak
                          << " consecutive zero-advantage steps (step " << step << ")\n";
                zero_streak = 0;
            }
        } else {
            zero_streak = 0;
        }
        ++local.steps_run;
    }

    if (summary) *summary = local;
    return policy;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

EvalReport evaluate(const Policy& policy, const std::vector<MemeRecord>& records,
                    const EmbeddingProvider& embedder, bool include_similarity,
                    const metrics::SimilarityWeights& sim_weights, std::size_t max_tokens) {
    if (records.empty()) throw ValidationError("evaluate: empty dataset");

    std::vector<ParsedResponse> responses;
    responses.reserve(records.size());
    std::vector<ParsedJudgement> preds;
    preds.reserve(records.size());
    std::vector<BinaryLabel> gold;
    gold.reserve(records.size());
    std::size_t n_well_formed = 0;

    metrics::SimilarityScores sim_sum;
    std::size_t sim_n = 0;

    for (const MemeRecord& rec : records) {
        const PromptSpec prompt = render_prompt(rec, "default");
        Policy::SampleResult decoded =
            policy.sample_response(prompt, max_tokens, 1.0, 0, /*greedy=*/true);
        ParsedResponse parsed = parse_response(decoded.tokens);
        if (well_formed(parsed)) ++n_well_formed;
        preds.push_back(parsed.judgement);
        gold.push_back(rec.label);

        if (include_similarity && rec.cot && !rec.cot->caption.empty()) {
            metrics::SimilarityScores s;
            if (parsed.caption) {
                const TokenSeq cand = tokenize(*parsed.caption);
                const TokenSeq ref = tokenize(rec.cot->caption);
                if (!cand.empty() && !ref.empty()) {
                    s = metrics::similarity_scores(cand, ref, embedder, sim_weights);
                }
            }
            sim_sum.bleu4 += s.bleu4;
            sim_sum.rouge_l += s.rouge_l;
            sim_sum.emb_sim += s.emb_sim;
            sim_sum.combined += s.combined;
            ++sim_n;
        }
        responses.push_back(std::move(parsed));
    }

    EvalReport report;
    report.n = records.size();
    report.classification = metrics::classification_report(preds, gold);
    report.sub_acc = metrics::sub_acc(responses, records);
    report.decision_alignment = metrics::decision_alignment(responses);
    report.format_valid_rate =
        static_cast<double>(n_well_formed) / static_cast<double>(records.size());
    if (include_similarity && sim_n > 0) {
        const double inv = 1.0 / static_cast<double>(sim_n);
        report.similarity = metrics::SimilarityScores{sim_sum.bleu4 * inv, sim_sum.rouge_l * inv,
                                                      sim_sum.emb_sim * inv, sim_sum.combined * inv};
    }
    return report;
}

namespace {

json report_to_json(const EvalReport& r) {
    json j;
    j["n"] = r.n;
    j["accuracy"] = r.classification.accuracy;
    j["precision"] = r.classification.precision;
    j["recall"] = r.classification.recall;
    j["macro_f1"] = r.classification.macro_f1;
    j["macro_precision"] = r.classification.macro_precision();
    j["macro_recall"] = r.classification.macro_recall();
    json per_class = json::array();
    for (const metrics::ClassScores& c : r.classification.per_class) {
        per_class.push_back(
            {{"precision", c.precision}, {"recall", c.recall}, {"f1", c.f1}});
    }
    j["per_class"] = per_class;
    j["counts"] = {{"tp", r.classification.counts.tp},
                   {"tn", r.classification.counts.tn},
                   {"fp", r.classification.counts.fp},
                   {"fn", r.classification.counts.fn}};
    json sub = json::object();
    for (HarmCategory c : all_categories()) {
        sub[category_name(c)] = r.sub_acc.per_category[static_cast<std::size_t>(c)];
    }
    sub["overall"] = r.sub_acc.overall;
    j["sub_acc"] = sub;
    j["decision_alignment"] = r.decision_alignment;
    j["format_valid_rate"] = r.format_valid_rate;
    if (r.similarity) {
        j["similarity"] = {{"bleu4", r.similarity->bleu4},
                           {"rouge_l", r.similarity->rouge_l},
                           {"emb_sim", r.similarity->emb_sim},
                           {"combined", r.similarity->combined}};
    }
    return j;
}

}  // namespace

void write_eval_report(const EvalReport& report, const std::string& dir) {
    ensure_dir(dir);
    {
        auto out = open_out(dir + "/report.json");
        out << report_to_json(report).dump(2) << "\n";
    }
    auto csv = open_out(dir + "/report.csv");
    csv << "metric,value\n";
    csv << "n," << report.n << "\n";
    csv << "accuracy," << fmt(report.classification.accuracy) << "\n";
    csv << "precision," << fmt(report.classification.precision) << "\n";
    csv << "recall," << fmt(report.classification.recall) << "\n";
    csv << "macro_f1," << fmt(report.classification.macro_f1) << "\n";
    csv << "macro_precision," << fmt(report.classification.macro_precision()) << "\n";
    csv << "macro_recall," << fmt(report.classification.macro_recall()) << "\n";
    for (HarmCategory c : all_categories()) {
        csv << "sub_acc_" << category_name(c) << ','
            << fmt(report.sub_acc.per_category[static_cast<std::size_t>(c)]) << "\n";
    }
    csv << "sub_acc_overall," << fmt(report.sub_acc.overall) << "\n";
    csv << "decision_alignment," << fmt(report.decision_alignment) << "\n";
    csv << "format_valid_rate," << fmt(report.format_valid_rate) << "\n";
    if (report.similarity) {
        csv << "bleu4," << fmt(report.similarity->bleu4) << "\n";
        csv << "rouge_l," << fmt(report.similarity->rouge_l) << "\n";
        csv << "emb_sim," << fmt(report.similarity->emb_sim) << "\n";
        csv << "similarity_combined," << fmt(report.similarity->combined) << "\n";
    }
}

EvalReport load_eval_report(const std::string& dir) {
    std::ifstream in(dir + "/report.json");
    if (!in) throw IoError("cannot open report '" + dir + "/report.json'");
    json j;
    in >> j;
    EvalReport r;
    r.n = j.at("n").get<std::size_t>();
    r.classification.accuracy = j.at("accuracy").get<double>();
    r.classification.precision = j.at("precision").get<double>();
    r.classification.recall = j.at("recall").get<double>();
    r.classification.macro_f1 = j.at("macro_f1").get<double>();
    for (const auto& c : j.at("per_class")) {
        r.classification.per_class.push_back({c.at("precision").get<double>(),
                                              c.at("recall").get<double>(),
                                              c.at("f1").get<double>()});
    }
    r.classification.counts.tp = j.at("counts").at("tp").get<std::size_t>();
    r.classification.counts.tn = j.at("counts").at("tn").get<std::size_t>();
    r.classification.counts.fp = j.at("counts").at("fp").get<std::size_t>();
    r.classification.counts.fn = j.at("counts").at("fn").get<std::size_t>();
    for (HarmCategory c : all_categories()) {
        r.sub_acc.per_category[static_cast<std::size_t>(c)] =
            j.at("sub_acc").at(category_name(c)).get<double>();
    }
    r.sub_acc.overall = j.at("sub_acc").at("overall").get<double>();
    r.decision_alignment = j.at("decision_alignment").get<double>();
    r.format_valid_rate = j.at("format_valid_rate").get<double>();
    if (j.contains("similarity")) {
        const json& s = j["similarity"];
        r.similarity = metrics::SimilarityScores{
            s.at("bleu4").get<double>(), s.at("rouge_l").get<double>(),
            s.at("emb_sim").get<double>(), s.at("combined").get<double>()};
    }
    return r;
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

PipelineResult run_pipeline(const RunConfig& cfg) {
    if (cfg.train_path.empty()) throw ConfigError("run config: dataset.train is required");
    const std::vector<MemeRecord> train = load_dataset(cfg.train_path);
    std::vector<MemeRecord> test;
    if (!cfg.test_path.empty()) test = load_dataset(cfg.test_path);

    ensure_dir(cfg.out_dir);
    save_run_config(cfg, cfg.out_dir + "/config.json");

    PolicyDims dims;
    dims.vocab_size = default_vocabulary().size();
    dims.embed_dim = cfg.policy.embed_dim;
    dims.hidden_dim = cfg.policy.hidden_dim;
    dims.context_window = cfg.policy.context_window;

    auto vocab = std::make_shared<Vocabulary>(default_vocabulary().tokens());
    Policy policy = Policy::random_init(dims, vocab, cfg.seed, cfg.policy.init_scale);
    std::string lineage = "init";

    if (cfg.resume_checkpoint) {
        PolicyCheckpoint ck = load_checkpoint(*cfg.resume_checkpoint);
        policy = std::move(ck.policy);
        lineage = ck.stage_tag;
    }
    if (cfg.stage3.enabled && !cfg.stage2.enabled && lineage != "stage2") {
        throw ConfigError("stage 3 requires a stage-2 checkpoint lineage (got '" + lineage + "')");
    }

    const HashEmbedder embedder;
    PipelineResult result{std::move(policy), {}, {}};

    if (cfg.stage1.enabled) {
        result.policy = run_stage1(cfg, train, std::move(result.policy),
                                   cfg.out_dir + "/stage1_log.csv");
        const std::string path = cfg.out_dir + "/stage1.ckpt.json";
        result.policy.save_checkpoint(path, "stage1");
        result.checkpoints.push_back(path);
        lineage = "stage1";
    }
    if (cfg.stage2.enabled) {
        result.policy = run_stage2(cfg, train, std::move(result.policy),
                                   cfg.out_dir + "/stage2_log.csv");
        const std::string path = cfg.out_dir + "/stage2.ckpt.json";
        result.policy.save_checkpoint(path, "stage2");
        result.checkpoints.push_back(path);
        lineage = "stage2";
        if (!test.empty()) {
            const EvalReport report =
                evaluate(result.policy, test, embedder, !cfg.stage2.label_only,
                         cfg.similarity_weights, cfg.stage3.max_tokens);
            write_eval_report(report, cfg.out_dir + "/eval_stage2");
        }
    }
    if (cfg.stage3.enabled) {
        if (lineage != "stage2") {
            throw ConfigError("stage 3 requires a stage-2 checkpoint lineage (got '" + lineage +
                              "')");
        }
        result.policy = run_stage3(cfg, train, std::move(result.policy), &result.stage3,
                                   cfg.out_dir + "/stage3_log.csv",
                                   cfg.out_dir + "/stage3_rollouts.csv");
        const std::string path = cfg.out_dir + "/stage3.ckpt.json";
        result.policy.save_checkpoint(path, "stage3");
        result.checkpoints.push_back(path);
        if (!test.empty()) {
            const EvalReport report =
                evaluate(result.policy, test, embedder, !cfg.stage2.label_only,
                         cfg.similarity_weights, cfg.stage3.max_tokens);
            write_eval_report(report, cfg.out_dir + "/eval_stage3");
        }
    }

    json summary;
    summary["stage3_steps"] = result.stage3.steps_run;
    summary["stage3_patience_warnings"] = result.stage3.patience_warnings;
    summary["stage3_aborted_steps"] = result.stage3.aborted_steps;
    summary["checkpoints"] = result.checkpoints;
    auto out = open_out(cfg.out_dir + "/summary.json");
    out << summary.dump(2) << "\n";

    return result;
}

// ---------------------------------------------------------------------------
// Reward-weight sweep
// ---------------------------------------------------------------------------

std::vector<reward::RewardWeights> gamma_grid(const std::vector<double>& gammas) {
    std::vector<reward::RewardWeights> grid;
    grid.reserve(gammas.size());
    for (double g : gammas) {
        if (g < 0.0 || g > 1.0) throw ValidationError("gamma_grid: gamma outside [0, 1]");
        reward::RewardWeights w;
        w.gamma = g;
        w.alpha = 0.375 * (1.0 - g);  // 3:5 split of the remainder
        w.beta = 0.625 * (1.0 - g);
        grid.push_back(w);
    }
    return grid;
}

std::vector<SweepPoint> sweep_reward_weights(const RunConfig& cfg, const Policy& stage2_policy,
                                             const std::vector<MemeRecord>& train,
                                             const std::vector<MemeRecord>& test,
                                             const std::vector<reward::RewardWeights>& grid) {
    if (grid.empty()) throw ValidationError("sweep: empty grid");
    for (const reward::RewardWeights& w : grid) w.validate();

    const HashEmbedder embedder;
    std::vector<SweepPoint> points;
    points.reserve(grid.size());
    for (const reward::RewardWeights& weights : grid) {
        RunConfig point_cfg = cfg;
        point_cfg.reward_weights = weights;
        Policy policy = stage2_policy;  // same starting point and seed per point
        Stage3Summary summary;
        policy = run_stage3(point_cfg, train, std::move(policy), &summary);
        SweepPoint point;
        point.weights = weights;
        point.seed = cfg.seed;
        point.report = evaluate(policy, test, embedder, true, cfg.similarity_weights,
                                cfg.stage3.max_tokens);
        point.patience_warnings = summary.patience_warnings;
        points.push_back(std::move(point));
    }
    return points;
}

void write_sweep_csv(const std::vector<SweepPoint>& points, const std::string& path) {
    auto out = open_out(path);
    out << "gamma,alpha,beta,seed,accuracy,precision,recall,f1,patience_warnings\n";
    for (const SweepPoint& p : points) {
        out << fmt(p.weights.gamma) << ',' << fmt(p.weights.alpha) << ',' << fmt(p.weights.beta)
            << ',' << p.seed << ',' << fmt(p.report.classification.accuracy) << ','
            << fmt(p.report.classification.precision) << ','
            << fmt(p.report.classification.recall) << ','
            << fmt(p.report.classification.macro_f1) << ',' << p.patience_warnings << "\n";
    }
}

}  // namespace trainer
}  // namespace harmcot
