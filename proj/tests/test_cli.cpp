#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "cli.hpp"
#include "harmcot/dataset.hpp"
#include "harmcot/schema.hpp"

using namespace harmcot;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("harmcot-cli-" + tag);
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("usage errors exit with code 2") {
    CHECK(cli::run({"no-such-command"}) == 2);
    CHECK(cli::run({"gen-data", "--bogus-flag"}) == 2);
    CHECK(cli::run({}) == 2);
    CHECK(cli::run({"split"}) == 2);  // missing required --in
}

TEST_CASE("runtime failures exit with code 1") {
    CHECK(cli::run({"kappa", "--ratings", "/nonexistent/r.csv"}) == 1);
    CHECK(cli::run({"eval", "--ckpt", "/nonexistent.ckpt", "--data", "/nonexistent.jsonl"}) == 1);
}

TEST_CASE("gen-data then split compose per the stratified contract") {
    TempDir tmp("gensplit");
    const std::string data = tmp.file("d.jsonl");
    REQUIRE(cli::run({"gen-data", "--n", "400", "--seed", "7", "--out", data}) == 0);

    const std::string before = slurp(data);
    REQUIRE(cli::run({"split", "--ratio", "0.7", "--in", data, "--seed", "3"}) == 0);
    CHECK(slurp(data) == before);  // inputs are never mutated

    const auto train = load_dataset(tmp.file("d.train.jsonl"));
    const auto test = load_dataset(tmp.file("d.test.jsonl"));
    const auto all = load_dataset(data);
    CHECK(train.size() + test.size() == all.size());

    auto harmful_count = [](const std::vector<MemeRecord>& recs) {
        std::size_t n = 0;
        for (const auto& r : recs) n += r.label == BinaryLabel::Harmful;
        return n;
    };
    const std::size_t harmful_total = harmful_count(all);
    const std::size_t expected_train_harmful = static_cast<std::size_t>(
        std::floor(static_cast<double>(harmful_total) * 0.7 + 0.5));
    CHECK(harmful_count(train) == expected_train_harmful);
    const std::size_t nonharmful_total = all.size() - harmful_total;
    CHECK(train.size() - harmful_count(train) ==
          static_cast<std::size_t>(
              std::floor(static_cast<double>(nonharmful_total) * 0.7 + 0.5)));
}

TEST_CASE("gen-data is reproducible for a fixed seed") {
    TempDir tmp("repro");
    REQUIRE(cli::run({"gen-data", "--n", "50", "--seed", "11", "--out", tmp.file("a.jsonl")}) == 0);
    REQUIRE(cli::run({"gen-data", "--n", "50", "--seed", "11", "--out", tmp.file("b.jsonl")}) == 0);
    CHECK(slurp(tmp.file("a.jsonl")) == slurp(tmp.file("b.jsonl")));
}

TEST_CASE("kappa subcommand prints 1.0000 on the unanimous fixture") {
    TempDir tmp("kappa");
    {
        std::ofstream out(tmp.file("r.csv"));
        for (int i = 0; i < 20; ++i) out << (i % 2 ? "harmful,harmful,harmful\n"
                                                   : "nonharmful,nonharmful,nonharmful\n");
    }
    CHECK(cli::run({"kappa", "--ratings", tmp.file("r.csv")}) == 0);
    // output content is checked end-to-end through the binary in acceptance
}

TEST_CASE("verify emits a ratings matrix consumable by kappa") {
    TempDir tmp("verify");
    const std::string data = tmp.file("d.jsonl");
    REQUIRE(cli::run({"gen-data", "--n", "60", "--seed", "2", "--out", data}) == 0);
    REQUIRE(cli::run({"verify", "--in", data, "--annotators", "3", "--error-rate", "0.0",
                      "--ratings", tmp.file("r.csv")}) == 0);
    const auto ratings = slurp(tmp.file("r.csv"));
    CHECK(std::count(ratings.begin(), ratings.end(), '\n') == 60);
    CHECK(cli::run({"kappa", "--ratings", tmp.file("r.csv")}) == 0);

    SUBCASE("resolved dataset keeps gold labels and gains annotations") {
        REQUIRE(cli::run({"verify", "--in", data, "--annotators", "3", "--error-rate", "0.1",
                          "--seed", "5", "--resolved", tmp.file("resolved.jsonl")}) == 0);
        const auto original = load_dataset(data);
        const auto resolved = load_dataset(tmp.file("resolved.jsonl"));
        REQUIRE(resolved.size() == original.size());
        for (std::size_t i = 0; i < resolved.size(); ++i) {
            CHECK(resolved[i].label == original[i].label);
            CHECK(resolved[i].cot.has_value());
        }
    }
}

TEST_CASE("annotate oracle fills missing annotations") {
    TempDir tmp("annotate");
    const std::string data = tmp.file("d.jsonl");
    REQUIRE(cli::run({"gen-data", "--n", "40", "--seed", "3", "--cot-fraction", "0.0", "--out",
                      data}) == 0);
    for (const auto& rec : load_dataset(data)) CHECK(!rec.cot.has_value());
    REQUIRE(cli::run({"annotate", "--in", data, "--out", tmp.file("ann.jsonl")}) == 0);
    for (const auto& rec : load_dataset(tmp.file("ann.jsonl"))) {
        CHECK(rec.cot.has_value());
        CHECK(rec.cot->judgement == rec.label);
    }
}

TEST_CASE("train/eval/report chain over a miniature run") {
    TempDir tmp("train");
    const std::string data = tmp.file("d.jsonl");
    REQUIRE(cli::run({"gen-data", "--n", "80", "--seed", "4", "--out", data}) == 0);
    REQUIRE(cli::run({"split", "--ratio", "0.7", "--in", data}) == 0);

    {
        std::ofstream cfg(tmp.file("run.json"));
        cfg << R"({
  "seed": 5,
  "dataset": {"train": ")" << tmp.file("d.train.jsonl") << R"(", "test": ")"
            << tmp.file("d.test.jsonl") << R"("},
  "out_dir": ")" << tmp.file("run") << R"(",
  "stage1": {"steps": 15},
  "stage2": {"steps": 25},
  "stage3": {"steps": 3, "batch_size": 2, "group_size": 4, "max_tokens": 70}
})";
    }
    REQUIRE(cli::run({"train", "--config", tmp.file("run.json")}) == 0);
    CHECK(fs::exists(tmp.file("run") + "/stage1.ckpt.json"));
    CHECK(fs::exists(tmp.file("run") + "/stage2.ckpt.json"));
    CHECK(fs::exists(tmp.file("run") + "/stage3.ckpt.json"));
    CHECK(fs::exists(tmp.file("run") + "/eval_stage3/report.json"));

    SUBCASE("--stages narrows what runs") {
        REQUIRE(cli::run({"train", "--config", tmp.file("run.json"), "--stages", "1,2",
                          "--out-dir", tmp.file("run12")}) == 0);
        CHECK(fs::exists(tmp.file("run12") + "/stage2.ckpt.json"));
        CHECK(!fs::exists(tmp.file("run12") + "/stage3.ckpt.json"));
    }

    SUBCASE("eval writes a report for a checkpoint") {
        REQUIRE(cli::run({"eval", "--ckpt", tmp.file("run") + "/stage2.ckpt.json", "--data",
                          tmp.file("d.test.jsonl"), "--out-dir", tmp.file("evaldir"),
                          "--max-tokens", "70"}) == 0);
        CHECK(fs::exists(tmp.file("evaldir") + "/report.json"));
    }

    SUBCASE("report builds an idempotent comparison table") {
        REQUIRE(cli::run({"report", "--run-dir", tmp.path.string()}) == 0);
        const std::string table = slurp(tmp.file("table.csv"));
        CHECK(table.find("run,accuracy,precision,recall,f1") == 0);
        CHECK(table.find("run,") != std::string::npos);
        REQUIRE(cli::run({"report", "--run-dir", tmp.path.string()}) == 0);
        CHECK(slurp(tmp.file("table.csv")) == table);  // identical bytes
    }
}

TEST_CASE("label-only training produces a report without similarity entries") {
    TempDir tmp("labelonly");
    const std::string data = tmp.file("d.jsonl");
    REQUIRE(cli::run({"gen-data", "--n", "60", "--seed", "6", "--out", data}) == 0);
    REQUIRE(cli::run({"split", "--ratio", "0.7", "--in", data}) == 0);
    {
        std::ofstream cfg(tmp.file("run.json"));
        cfg << R"({
  "seed": 5,
  "dataset": {"train": ")" << tmp.file("d.train.jsonl") << R"(", "test": ")"
            << tmp.file("d.test.jsonl") << R"("},
  "out_dir": ")" << tmp.file("run") << R"(",
  "stage1": {"enabled": false},
  "stage2": {"steps": 20},
  "stage3": {"enabled": false}
})";
    }
    REQUIRE(cli::run({"train", "--config", tmp.file("run.json"), "--label-only"}) == 0);
    const std::string report = slurp(tmp.file("run") + "/eval_stage2/report.csv");
    CHECK(report.find("bleu4") == std::string::npos);
    CHECK(report.find("rouge_l") == std::string::npos);
    CHECK(report.find("accuracy") != std::string::npos);
}
