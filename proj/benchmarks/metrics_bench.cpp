#include <benchmark/benchmark.h>

#include "harmcot/embedding.hpp"
#include "harmcot/metrics.hpp"
#include "harmcot/rng.hpp"

using namespace harmcot;

namespace {

TokenSeq make_tokens(std::uint64_t seed, std::size_t len) {
    Rng rng(seed);
    TokenSeq out;
    for (std::size_t i = 0; i < len; ++i) {
        out.push_back("t" + std::to_string(rng.next_below(24)));
    }
    return out;
}

}  // namespace

static void BM_Bleu4(benchmark::State& state) {
    const TokenSeq cand = make_tokens(1, static_cast<std::size_t>(state.range(0)));
    const TokenSeq ref = make_tokens(2, static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(metrics::bleu4(cand, {ref}));
    }
}
BENCHMARK(BM_Bleu4)->Arg(10)->Arg(50);

static void BM_RougeL(benchmark::State& state) {
    const TokenSeq cand = make_tokens(3, static_cast<std::size_t>(state.range(0)));
    const TokenSeq ref = make_tokens(4, static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(metrics::rouge_l(cand, ref));
    }
}
BENCHMARK(BM_RougeL)->Arg(10)->Arg(50);

static void BM_EmbSimilarity(benchmark::State& state) {
    const HashEmbedder embedder;
    const TokenSeq cand = make_tokens(5, static_cast<std::size_t>(state.range(0)));
    const TokenSeq ref = make_tokens(6, static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(metrics::emb_similarity(cand, ref, embedder));
    }
}
BENCHMARK(BM_EmbSimilarity)->Arg(10)->Arg(30);

static void BM_FleissKappa(benchmark::State& state) {
    Rng rng(7);
    std::vector<std::vector<std::string>> ratings(
        static_cast<std::size_t>(state.range(0)), std::vector<std::string>(5));
    for (auto& row : ratings) {
        for (auto& cell : row) cell = rng.next_bernoulli(0.5) ? "harmful" : "nonharmful";
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(metrics::fleiss_kappa(ratings).kappa);
    }
}
BENCHMARK(BM_FleissKappa)->Arg(100)->Arg(1000);

BENCHMARK_MAIN();
