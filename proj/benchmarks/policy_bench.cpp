#include <benchmark/benchmark.h>

#include "harmcot/grpo.hpp"
#include "harmcot/policy.hpp"
#include "harmcot/reward.hpp"
#include "harmcot/synth.hpp"
#include "harmcot/trainer.hpp"

using namespace harmcot;

namespace {

std::shared_ptr<const Vocabulary> vocab_ptr() {
    static auto v = std::make_shared<Vocabulary>(default_vocabulary().tokens());
    return v;
}

Policy bench_policy() {
    PolicyDims dims;
    dims.vocab_size = default_vocabulary().size();
    return Policy::random_init(dims, vocab_ptr(), 1);
}

MemeRecord bench_record() {
    return synth::generate_dataset(synth::default_task_rules(), 1, 3).front();
}

}  // namespace

static void BM_LogprobSequence(benchmark::State& state) {
    const Policy policy = bench_policy();
    const MemeRecord rec = bench_record();
    const PromptSpec prompt = render_prompt(rec, "default");
    const TokenSeq doc = trainer::document_tokens(
        rec.cot ? *rec.cot : synth::oracle_annotate(rec, synth::default_task_rules()));
    for (auto _ : state) {
        benchmark::DoNotOptimize(policy.logprob_sequence(prompt, doc));
    }
}
BENCHMARK(BM_LogprobSequence);

static void BM_SampleResponse(benchmark::State& state) {
    const Policy policy = bench_policy();
    const PromptSpec prompt = render_prompt(bench_record(), "default");
    std::uint64_t seed = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(policy.sample_response(prompt, 96, 1.0, ++seed));
    }
}
BENCHMARK(BM_SampleResponse);

static void BM_SftStep(benchmark::State& state) {
    Policy policy = bench_policy();
    const auto records =
        synth::generate_dataset(synth::default_task_rules(),
                                static_cast<std::size_t>(state.range(0)), 5);
    std::vector<SftExample> batch;
    for (const MemeRecord& rec : records) batch.push_back(trainer::to_sft_example(rec, false));
    for (auto _ : state) {
        benchmark::DoNotOptimize(sft_step(policy, batch, SftStage::Joint, 0.1));
    }
}
BENCHMARK(BM_SftStep)->Arg(4)->Arg(16);

static void BM_GrpoStep(benchmark::State& state) {
    Policy policy = bench_policy();
    const MemeRecord rec = bench_record();
    const PromptSpec prompt = render_prompt(rec, "default");
    const HashEmbedder embedder;
    grpo::GrpoConfig cfg;
    cfg.learning_rate = 0.0;  // measure the step without drifting the policy
    std::uint64_t seed = 0;
    for (auto _ : state) {
        state.PauseTiming();
        std::vector<grpo::GroupRollout> batch(1);
        batch[0].prompt_id = rec.id;
        batch[0].prompt = prompt;
        std::vector<double> rewards;
        for (std::size_t g = 0; g < cfg.group_size; ++g) {
            auto sampled = policy.sample_response(prompt, 96, 1.0, ++seed);
            grpo::SampledResponse resp;
            resp.tokens = std::move(sampled.tokens);
            resp.logprob_old = sampled.logprob;
            resp.reward = reward::reward_total(parse_response(resp.tokens), rec, {}, embedder);
            rewards.push_back(resp.reward.r_total);
            batch[0].responses.push_back(std::move(resp));
        }
        batch[0].advantages = grpo::compute_advantages(rewards);
        state.ResumeTiming();
        benchmark::DoNotOptimize(grpo::grpo_step(policy, batch, cfg));
    }
}
BENCHMARK(BM_GrpoStep);

BENCHMARK_MAIN();
