#include "cli.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "harmcot/dataset.hpp"
#include "harmcot/metrics.hpp"
#include "harmcot/policy.hpp"
#include "harmcot/rng.hpp"
#include "harmcot/synth.hpp"
#include "harmcot/trainer.hpp"

namespace harmcot {
namespace cli {

namespace fs = std::filesystem;

namespace {

std::string fmt4(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

std::vector<double> parse_double_list(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(std::stod(item));
    }
    return out;
}

synth::TaskRules rules_for(const std::string& rules_path) {
    return rules_path.empty() ? synth::default_task_rules() : synth::load_task_rules(rules_path);
}

std::vector<synth::MockAnnotator> make_annotators(std::size_t count, double error_rate,
                                                  std::uint64_t seed) {
    std::vector<synth::MockAnnotator> annotators;
    for (std::size_t i = 0; i < count; ++i) {
        synth::MockAnnotator a;
        a.id = "mock-" + std::to_string(i + 1);
        a.error_rate = error_rate;
        a.seed = derive_seed(seed, 100 + i);
        annotators.push_back(std::move(a));
    }
    return annotators;
}

std::vector<std::vector<std::string>> load_ratings_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open ratings file '" + path + "'");
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(cell);
        rows.push_back(std::move(row));
    }
    return rows;
}

// --- subcommand handlers ---------------------------------------------------

struct GenDataArgs {
    std::size_t n = 1000;
    std::uint64_t seed = 7;
    std::string out;
    std::string rules_path;
    std::string emit_rules;
    double harmful_rate = -1.0;
    double noise_rate = -1.0;
    double cot_fraction = -1.0;
};

int cmd_gen_data(const GenDataArgs& a) {
    synth::TaskRules rules = rules_for(a.rules_path);
    if (a.harmful_rate >= 0.0) rules.harmful_rate = a.harmful_rate;
    if (a.noise_rate >= 0.0) rules.noise_rate = a.noise_rate;
    if (a.cot_fraction >= 0.0) rules.cot_fraction = a.cot_fraction;
    rules.validate();
    const std::vector<MemeRecord> records = synth::generate_dataset(rules, a.n, a.seed);
    save_dataset(records, a.out);
    if (!a.emit_rules.empty()) synth::save_task_rules(rules, a.emit_rules);
    std::size_t harmful = 0;
    for (const MemeRecord& r : records) {
        if (r.label == BinaryLabel::Harmful) ++harmful;
    }
    std::cout << "wrote " << records.size() << " records to " << a.out << " (harmful fraction "
              << fmt4(static_cast<double>(harmful) / static_cast<double>(records.size()))
              << ")\n";
    return 0;
}

struct SplitArgs {
    std::string in;
    double ratio = 0.7;
    std::uint64_t seed = 7;
    std::string train_out;
    std::string test_out;
};

int cmd_split(const SplitArgs& a) {
    std::string train_out = a.train_out;
    std::string test_out = a.test_out;
    if (train_out.empty() || test_out.empty()) {
        fs::path base(a.in);
        const std::string stem = (base.parent_path() / base.stem()).string();
        if (train_out.empty()) train_out = stem + ".train.jsonl";
        if (test_out.empty()) test_out = stem + ".test.jsonl";
    }
    const std::vector<MemeRecord> records = load_dataset(a.in);
    auto [train, test] = stratified_split(records, a.ratio, a.seed);
    save_dataset(train, train_out);
    save_dataset(test, test_out);
    std::cout << "train " << train.size() << " -> " << train_out << "\n";
    std::cout << "test " << test.size() << " -> " << test_out << "\n";
    return 0;
}

struct AnnotateArgs {
    std::string in;
    std::string out;
    std::string mode = "oracle";
    std::string rules_path;
    double error_rate = 0.05;
    std::uint64_t seed = 7;
};

int cmd_annotate(const AnnotateArgs& a) {
    const synth::TaskRules rules = rules_for(a.rules_path);
    std::vector<MemeRecord> records = load_dataset(a.in);
    if (a.mode == "oracle") {
        std::size_t filled = 0;
        for (MemeRecord& rec : records) {
            if (rec.cot) continue;
            rec.cot = synth::oracle_annotate(rec, rules);
            ++filled;
        }
        save_dataset(records, a.out);
        std::cout << "annotated " << filled << " records -> " << a.out << "\n";
        return 0;
    }
    if (a.mode == "mock") {
        synth::MockAnnotator annotator{"mock-1", a.error_rate, derive_seed(a.seed, 100)};
        std::ofstream out(a.out, std::ios::trunc);
        if (!out) throw IoError("cannot write '" + a.out + "'");
        out << "id,judgement\n";
        for (const MemeRecord& rec : records) {
            out << rec.id << ',' << label_name(annotator.judge(rec, rules)) << "\n";
        }
        std::cout << "mock judgements for " << records.size() << " records -> " << a.out << "\n";
        return 0;
    }
    throw ConfigError("annotate: unknown mode '" + a.mode + "' (oracle|mock)");
}

struct VerifyArgs {
    std::string in;
    std::size_t annotators = 3;
    double error_rate = 0.05;
    std::uint64_t seed = 7;
    std::string rules_path;
    std::string ratings_out;
    std::string resolved_out;
};

int cmd_verify(const VerifyArgs& a) {
    const synth::TaskRules rules = rules_for(a.rules_path);
    const std::vector<MemeRecord> records = load_dataset(a.in);
    const auto annotators = make_annotators(a.annotators, a.error_rate, a.seed);

    std::ofstream ratings;
    if (!a.ratings_out.empty()) {
        ratings.open(a.ratings_out, std::ios::trunc);
        if (!ratings) throw IoError("cannot write '" + a.ratings_out + "'");
    }

    std::vector<MemeRecord> resolved;
    std::size_t consistent = 0;
    for (const MemeRecord& rec : records) {
        const synth::CrossVerifyResult result = synth::cross_verify(rec, annotators, rules);
        if (result.consistent) ++consistent;
        if (ratings.is_open()) {
            for (std::size_t i = 0; i < result.judgements.size(); ++i) {
                if (i) ratings << ',';
                ratings << label_name(result.judgements[i]);
            }
            ratings << "\n";
        }
        if (!a.resolved_out.empty()) {
            MemeRecord out = rec;
            // Keep gold labels; attach the adopted annotation when it is
            // consistent with them, the oracle correction otherwise.
            out.cot = result.annotation.judgement == rec.label
                          ? result.annotation
                          : synth::oracle_annotate(rec, rules);
            resolved.push_back(std::move(out));
        }
    }
    if (!a.resolved_out.empty()) save_dataset(resolved, a.resolved_out);

    const double rate = static_cast<double>(consistent) / static_cast<double>(records.size());
    std::vector<double> error_rates(annotators.size(), a.error_rate);
    std::cout << "consistency_rate " << fmt4(rate) << " (analytic "
              << fmt4(synth::analytic_consistency_rate(error_rates)) << ") over "
              << records.size() << " records\n";
    return 0;
}

struct TrainArgs {
    std::string config;
    std::string stages;
    bool label_only = false;
    std::string out_dir;
    std::string resume;
    std::optional<std::uint64_t> seed;
    std::string train_data;
    std::string test_data;
};

trainer::RunConfig resolve_train_config(const TrainArgs& a) {
    std::string config_path = a.config;
    if (config_path.empty()) {
        if (const char* env = std::getenv("HARMCOT_CONFIG")) config_path = env;
    }
    if (config_path.empty()) throw ConfigError("train: no config (use --config or HARMCOT_CONFIG)");
    trainer::RunConfig cfg = trainer::load_run_config(config_path);
    if (!a.stages.empty()) {
        cfg.stage1.enabled = a.stages.find('1') != std::string::npos;
        cfg.stage2.enabled = a.stages.find('2') != std::string::npos;
        cfg.stage3.enabled = a.stages.find('3') != std::string::npos;
    }
    if (a.label_only) cfg.stage2.label_only = true;
    if (!a.out_dir.empty()) cfg.out_dir = a.out_dir;
    if (!a.resume.empty()) cfg.resume_checkpoint = a.resume;
    if (a.seed) cfg.seed = *a.seed;
    if (!a.train_data.empty()) cfg.train_path = a.train_data;
    if (!a.test_data.empty()) cfg.test_path = a.test_data;
    return cfg;
}

int cmd_train(const TrainArgs& a) {
    const trainer::RunConfig cfg = resolve_train_config(a);
    const trainer::PipelineResult result = trainer::run_pipeline(cfg);
    for (const std::string& ck : result.checkpoints) std::cout << "checkpoint " << ck << "\n";
    if (cfg.stage3.enabled) {
        std::cout << "stage3 steps " << result.stage3.steps_run << ", patience warnings "
                  << result.stage3.patience_warnings << "\n";
    }
    return 0;
}

struct EvalArgs {
    std::string ckpt;
    std::string data;
    std::string out_dir;
    bool no_similarity = false;
    std::size_t max_tokens = 96;
};

int cmd_eval(const EvalArgs& a) {
    const PolicyCheckpoint ck = load_checkpoint(a.ckpt);
    const std::vector<MemeRecord> records = load_dataset(a.data);
    const HashEmbedder embedder;
    const trainer::EvalReport report =
        trainer::evaluate(ck.policy, records, embedder, !a.no_similarity, {}, a.max_tokens);
    if (!a.out_dir.empty()) trainer::write_eval_report(report, a.out_dir);
    std::cout << "accuracy " << fmt4(report.classification.accuracy) << " precision "
              << fmt4(report.classification.precision) << " recall "
              << fmt4(report.classification.recall) << " f1 "
              << fmt4(report.classification.macro_f1) << "\n";
    std::cout << "sub_acc " << fmt4(report.sub_acc.overall) << " decision_alignment "
              << fmt4(report.decision_alignment) << " format_valid "
              << fmt4(report.format_valid_rate) << "\n";
    return 0;
}

struct SweepArgs {
    std::string config;
    std::string gammas = "0.2,0.4,0.6,0.8,1.0";
    std::string alphas;  // alpha axis with gamma fixed at 0.6
    std::string out_dir = "sweep";
    std::optional<std::uint64_t> seed;
};

int cmd_sweep(const SweepArgs& a) {
    TrainArgs t;
    t.config = a.config;
    t.seed = a.seed;
    trainer::RunConfig cfg = resolve_train_config(t);
    cfg.out_dir = a.out_dir;

    const std::vector<MemeRecord> train = load_dataset(cfg.train_path);
    if (cfg.test_path.empty()) throw ConfigError("sweep: config must name a test dataset");
    const std::vector<MemeRecord> test = load_dataset(cfg.test_path);
    if (!cfg.resume_checkpoint) throw ConfigError("sweep: config must name a stage-2 checkpoint");
    PolicyCheckpoint ck = load_checkpoint(*cfg.resume_checkpoint);
    if (ck.stage_tag != "stage2") {
        throw ConfigError("sweep: resume checkpoint must be stage2 (got '" + ck.stage_tag + "')");
    }

    std::error_code ec;
    fs::create_directories(a.out_dir, ec);

    if (!a.gammas.empty()) {
        const auto grid = trainer::gamma_grid(parse_double_list(a.gammas));
        const auto points = trainer::sweep_reward_weights(cfg, ck.policy, train, test, grid);
        trainer::write_sweep_csv(points, a.out_dir + "/sweep_gamma.csv");
        std::cout << "gamma sweep: " << points.size() << " rows -> " << a.out_dir
                  << "/sweep_gamma.csv\n";
    }
    if (!a.alphas.empty()) {
        std::vector<reward::RewardWeights> grid;
        for (double alpha : parse_double_list(a.alphas)) {
            reward::RewardWeights w;
            w.gamma = 0.6;
            w.alpha = alpha;
            w.beta = 0.4 - alpha;
            grid.push_back(w);
        }
        const auto points = trainer::sweep_reward_weights(cfg, ck.policy, train, test, grid);
        trainer::write_sweep_csv(points, a.out_dir + "/sweep_alpha_beta.csv");
        std::cout << "alpha/beta sweep: " << points.size() << " rows -> " << a.out_dir
                  << "/sweep_alpha_beta.csv\n";
    }
    return 0;
}

struct KappaArgs {
    std::string ratings;
};

int cmd_kappa(const KappaArgs& a) {
    const auto rows = load_ratings_csv(a.ratings);
    const metrics::KappaReport report = metrics::fleiss_kappa(rows);
    std::cout << fmt4(report.kappa) << "\n";
    return 0;
}

}  // namespace

void emit_report(const std::string& run_dir) {
    if (!fs::exists(run_dir)) throw IoError("run directory '" + run_dir + "' does not exist");

    // A "run" is any directory holding report.json, directly or via its
    // eval_stage3 / eval_stage2 subdirectories (later stages win).
    auto find_report = [](const fs::path& dir) -> std::optional<fs::path> {
        for (const char* sub : {"eval_stage3", "eval_stage2"}) {
            if (fs::exists(dir / sub / "report.json")) return dir / sub;
        }
        if (fs::exists(dir / "report.json")) return dir;
        return std::nullopt;
    };

    std::vector<std::pair<std::string, fs::path>> runs;
    if (auto own = find_report(run_dir)) {
        runs.emplace_back(fs::path(run_dir).filename().string(), *own);
    } else {
        std::vector<fs::path> subdirs;
        for (const auto& entry : fs::directory_iterator(run_dir)) {
            if (entry.is_directory()) subdirs.push_back(entry.path());
        }
        std::sort(subdirs.begin(), subdirs.end());
        for (const fs::path& sub : subdirs) {
            if (auto rep = find_report(sub)) runs.emplace_back(sub.filename().string(), *rep);
        }
    }
    if (runs.empty()) throw IoError("no evaluation reports under '" + run_dir + "'");

    std::ofstream table(fs::path(run_dir) / "table.csv", std::ios::trunc);
    if (!table) throw IoError("cannot write comparison table");
    table << "run,accuracy,precision,recall,f1\n";
    for (const auto& [name, dir] : runs) {
        const trainer::EvalReport r = trainer::load_eval_report(dir.string());
        table << name << ',' << fmt4(r.classification.accuracy) << ','
              << fmt4(r.classification.precision) << ',' << fmt4(r.classification.recall) << ','
              << fmt4(r.classification.macro_f1) << "\n";
    }
    table.close();

    // Surface sweep CSVs at the top level for plotting.
    std::vector<fs::path> sweeps;
    for (const auto& entry : fs::recursive_directory_iterator(run_dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string name = entry.path().filename().string();
        if (name.rfind("sweep_", 0) == 0 && entry.path().extension() == ".csv" &&
            entry.path().parent_path() != fs::path(run_dir)) {
            sweeps.push_back(entry.path());
        }
    }
    std::sort(sweeps.begin(), sweeps.end());
    for (const fs::path& src : sweeps) {
        fs::copy_file(src, fs::path(run_dir) / src.filename(),
                      fs::copy_options::overwrite_existing);
    }
}

int run(const std::vector<std::string>& args) {
    CLI::App app{"Reasoning-first harmful-meme detection pipeline (desk scale)"};
    app.require_subcommand(1);

    std::optional<std::uint64_t> global_seed;
    app.add_option("--seed", global_seed, "Override every seed in the invoked command");

    GenDataArgs gen;
    CLI::App* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic dataset");
    gen_cmd->add_option("--n", gen.n, "Number of records")->check(CLI::PositiveNumber);
    gen_cmd->add_option("--seed", gen.seed, "Generation seed");
    gen_cmd->add_option("--out", gen.out, "Output dataset (jsonl)")->required();
    gen_cmd->add_option("--rules", gen.rules_path, "Task rules file (default: built-in)");
    gen_cmd->add_option("--emit-rules", gen.emit_rules, "Also write the rules used");
    gen_cmd->add_option("--harmful-rate", gen.harmful_rate, "Override harmful fraction");
    gen_cmd->add_option("--noise-rate", gen.noise_rate, "Override distractor rate");
    gen_cmd->add_option("--cot-fraction", gen.cot_fraction, "Override annotated fraction");

    SplitArgs split;
    CLI::App* split_cmd = app.add_subcommand("split", "Stratified train/test split");
    split_cmd->add_option("--in", split.in, "Input dataset")->required();
    split_cmd->add_option("--ratio", split.ratio, "Train fraction")->check(CLI::Range(0.0, 1.0));
    split_cmd->add_option("--seed", split.seed, "Shuffle seed");
    split_cmd->add_option("--train", split.train_out, "Train output (default <in>.train.jsonl)");
    split_cmd->add_option("--test", split.test_out, "Test output (default <in>.test.jsonl)");

    AnnotateArgs annotate;
    CLI::App* annotate_cmd = app.add_subcommand("annotate", "Oracle or mock annotation");
    annotate_cmd->add_option("--in", annotate.in, "Input dataset")->required();
    annotate_cmd->add_option("--out", annotate.out, "Output file")->required();
    annotate_cmd->add_option("--mode", annotate.mode, "oracle|mock");
    annotate_cmd->add_option("--rules", annotate.rules_path, "Task rules file");
    annotate_cmd->add_option("--error-rate", annotate.error_rate, "Mock annotator error rate");
    annotate_cmd->add_option("--seed", annotate.seed, "Mock annotator seed");

    VerifyArgs verify;
    CLI::App* verify_cmd = app.add_subcommand("verify", "Cross-annotator consistency check");
    verify_cmd->add_option("--in", verify.in, "Input dataset")->required();
    verify_cmd->add_option("--annotators", verify.annotators, "Annotator count")
        ->check(CLI::Range(std::size_t{2}, std::size_t{64}));
    verify_cmd->add_option("--error-rate", verify.error_rate, "Per-annotator error rate");
    verify_cmd->add_option("--seed", verify.seed, "Annotator seed");
    verify_cmd->add_option("--rules", verify.rules_path, "Task rules file");
    verify_cmd->add_option("--ratings", verify.ratings_out, "Write items-by-raters label CSV");
    verify_cmd->add_option("--resolved", verify.resolved_out, "Write resolved annotated dataset");

    TrainArgs train;
    CLI::App* train_cmd = app.add_subcommand("train", "Run the training pipeline");
    train_cmd->add_option("--config", train.config, "Run configuration (JSON)");
    train_cmd->add_option("--stages", train.stages, "Stages to run, e.g. 1,2,3");
    train_cmd->add_flag("--label-only", train.label_only, "Drop reasoning supervision");
    train_cmd->add_option("--out-dir", train.out_dir, "Output directory override");
    train_cmd->add_option("--resume", train.resume, "Starting checkpoint");
    train_cmd->add_option("--train-data", train.train_data, "Train dataset override");
    train_cmd->add_option("--test-data", train.test_data, "Test dataset override");

    EvalArgs eval;
    CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
    eval_cmd->add_option("--ckpt", eval.ckpt, "Checkpoint file")->required();
    eval_cmd->add_option("--data", eval.data, "Dataset to evaluate")->required();
    eval_cmd->add_option("--out-dir", eval.out_dir, "Report directory");
    eval_cmd->add_flag("--no-similarity", eval.no_similarity, "Skip caption similarity");
    eval_cmd->add_option("--max-tokens", eval.max_tokens, "Decoding budget");

    SweepArgs sweep;
    CLI::App* sweep_cmd = app.add_subcommand("sweep", "Reward-weight sweeps from a stage-2 checkpoint");
    sweep_cmd->add_option("--config", sweep.config, "Run configuration (JSON)");
    sweep_cmd->add_option("--gammas", sweep.gammas, "Gamma grid (comma list; 3:5 alpha:beta)");
    sweep_cmd->add_option("--alphas", sweep.alphas, "Alpha grid (gamma fixed at 0.6)");
    sweep_cmd->add_option("--out-dir", sweep.out_dir, "Output directory");

    KappaArgs kappa;
    CLI::App* kappa_cmd = app.add_subcommand("kappa", "Fleiss' kappa over a ratings CSV");
    kappa_cmd->add_option("--ratings", kappa.ratings, "Items-by-raters label CSV")->required();

    std::string report_dir;
    CLI::App* report_cmd = app.add_subcommand("report", "Comparison table over evaluated runs");
    report_cmd->add_option("--run-dir", report_dir, "Directory of runs")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (global_seed) {
            gen.seed = *global_seed;
            split.seed = *global_seed;
            annotate.seed = *global_seed;
            verify.seed = *global_seed;
            train.seed = *global_seed;
            sweep.seed = *global_seed;
        }
        if (gen_cmd->parsed()) return cmd_gen_data(gen);
        if (split_cmd->parsed()) return cmd_split(split);
        if (annotate_cmd->parsed()) return cmd_annotate(annotate);
        if (verify_cmd->parsed()) return cmd_verify(verify);
        if (train_cmd->parsed()) return cmd_train(train);
        if (eval_cmd->parsed()) return cmd_eval(eval);
        if (sweep_cmd->parsed()) return cmd_sweep(sweep);
        if (kappa_cmd->parsed()) return cmd_kappa(kappa);
        if (report_cmd->parsed()) {
            emit_report(report_dir);
            std::cout << "wrote " << report_dir << "/table.csv\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

}  // namespace cli
}  // namespace harmcot
