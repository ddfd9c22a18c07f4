#include <doctest.h>

#include "harmcot/metrics.hpp"
#include "harmcot/reward.hpp"
#include "harmcot/rng.hpp"
#include "harmcot/synth.hpp"

using namespace harmcot;
using reward::RewardWeights;

namespace {

MemeRecord cot_record() {
    MemeRecord rec;
    rec.id = "r1";
    rec.image_tokens = {"v00", "v05", "v06"};
    rec.text = "w00 w05 w06";
    rec.label = BinaryLabel::Harmful;
    rec.subcategories = {HarmCategory::Discrimination};
    rec.cot = synth::oracle_annotate(rec, synth::default_task_rules());
    return rec;
}

ParsedResponse perfect_response(const MemeRecord& rec) {
    return parse_response(tokenize(serialize_cot(*rec.cot)));
}

ParsedResponse random_response(Rng& rng) {
    ParsedResponse r;
    for (auto& v : r.verdicts) {
        const auto roll = rng.next_below(3);
        v = roll == 0 ? ParsedVerdict::Applicable
                      : (roll == 1 ? ParsedVerdict::NotApplicable : ParsedVerdict::Missing);
    }
    const auto roll = rng.next_below(3);
    r.judgement = roll == 0 ? ParsedJudgement::Harmful
                            : (roll == 1 ? ParsedJudgement::Nonharmful
                                         : ParsedJudgement::Unparseable);
    if (rng.next_bernoulli(0.7)) {
        TokenSeq cap;
        const std::size_t len = rng.next_below(6);
        for (std::size_t i = 0; i < len; ++i) cap.push_back("v0" + std::to_string(rng.next_below(10)));
        r.caption = detokenize(cap);
    }
    return r;
}

RewardWeights random_weights(Rng& rng) {
    const double a = rng.next_double();
    const double b = rng.next_double() * (1.0 - a);
    return {a, b, 1.0 - a - b};
}

}  // namespace

TEST_CASE("weights validation") {
    CHECK_NOTHROW(RewardWeights{}.validate());
    CHECK_NOTHROW((RewardWeights{0.0, 0.0, 1.0}.validate()));
    CHECK_THROWS_AS((RewardWeights{0.5, 0.5, 0.5}.validate()), ValidationError);
    CHECK_THROWS_AS((RewardWeights{-0.1, 0.5, 0.6}.validate()), ValidationError);
}

TEST_CASE("reward_sem: identity, absent caption, composition with metrics") {
    const HashEmbedder embedder;
    const MemeRecord rec = cot_record();
    ParsedResponse resp = perfect_response(rec);

    CHECK(reward::reward_sem(resp, *rec.cot, embedder) == 1.0);

    resp.caption.reset();
    CHECK(reward::reward_sem(resp, *rec.cot, embedder) == 0.0);

    resp.caption = "shows v00 with text w06";
    const double expected = metrics::similarity_scores(tokenize(*resp.caption),
                                                       tokenize(rec.cot->caption), embedder)
                                .combined;
    CHECK(reward::reward_sem(resp, *rec.cot, embedder) ==
          doctest::Approx(expected).epsilon(1e-15));
}

TEST_CASE("reward_sub: mean of per-category binaries") {
    const MemeRecord rec = cot_record();
    ParsedResponse resp = perfect_response(rec);
    CHECK(reward::reward_sub(resp, rec) == 1.0);

    resp.verdicts[static_cast<std::size_t>(HarmCategory::Antagonism)] = ParsedVerdict::Applicable;
    CHECK(reward::reward_sub(resp, rec) == doctest::Approx(0.8).epsilon(1e-15));

    for (auto& v : resp.verdicts) v = ParsedVerdict::Missing;
    CHECK(reward::reward_sub(resp, rec) == 0.0);

    MemeRecord binary_only = rec;
    binary_only.cot.reset();
    CHECK_THROWS_AS(reward::reward_sub(resp, binary_only), ValidationError);
}

TEST_CASE("reward_fin truth table") {
    ParsedResponse resp;
    resp.judgement = ParsedJudgement::Harmful;
    CHECK(reward::reward_fin(resp, BinaryLabel::Harmful) == 1.0);
    CHECK(reward::reward_fin(resp, BinaryLabel::Nonharmful) == 0.0);
    resp.judgement = ParsedJudgement::Nonharmful;
    CHECK(reward::reward_fin(resp, BinaryLabel::Harmful) == 0.0);
    resp.judgement = ParsedJudgement::Unparseable;
    CHECK(reward::reward_fin(resp, BinaryLabel::Harmful) == 0.0);
    CHECK(reward::reward_fin(resp, BinaryLabel::Nonharmful) == 0.0);
}

TEST_CASE("combine_gated: hand case and degeneracies") {
    const RewardWeights paper{0.15, 0.25, 0.60};
    CHECK(reward::combine_gated(paper, 0.8, 1.0, 1.0) ==
          doctest::Approx(0.97).epsilon(1e-13));
    CHECK(reward::combine_gated(paper, 0.9, 0.9, 0.0) == 0.0);
    CHECK(reward::combine_gated({0.0, 0.0, 1.0}, 0.3, 0.4, 1.0) == 1.0);
    CHECK(reward::combine_gated(paper, 1.0, 1.0, 1.0) ==
          doctest::Approx(1.0).epsilon(1e-12));
    // binary-only: r_sub absent, judgement carries the reward
    CHECK(reward::combine_gated(paper, 0.0, std::nullopt, 1.0) == 1.0);
    CHECK(reward::combine_gated(paper, 0.0, std::nullopt, 0.0) == 0.0);
}

TEST_CASE("reward_total: gate, bounds, monotonicity, degeneracy (randomized)") {
    const HashEmbedder embedder;
    const MemeRecord rec = cot_record();
    MemeRecord binary_only = rec;
    binary_only.cot.reset();

    Rng rng(303);
    for (int iter = 0; iter < 2000; ++iter) {
        const ParsedResponse resp = random_response(rng);
        const RewardWeights weights = random_weights(rng);
        const MemeRecord& gold = rng.next_bernoulli(0.3) ? binary_only : rec;
        const auto breakdown = reward::reward_total(resp, gold, weights, embedder);

        if (breakdown.r_fin == 0.0) CHECK(breakdown.r_total == 0.0);
        CHECK(breakdown.r_total >= 0.0);
        CHECK(breakdown.r_total <= 1.0 + 1e-12);
        CHECK(breakdown.r_sub.has_value() == gold.cot.has_value());

        const auto degenerate =
            reward::reward_total(resp, gold, {0.0, 0.0, 1.0}, embedder);
        CHECK(degenerate.r_total == degenerate.r_fin);
    }
}

TEST_CASE("reward_total is monotone in r_sem and r_sub when the gate is open") {
    const RewardWeights weights{0.15, 0.25, 0.60};
    Rng rng(404);
    for (int iter = 0; iter < 500; ++iter) {
        const double sem_lo = rng.next_double();
        const double sem_hi = sem_lo + (1.0 - sem_lo) * rng.next_double();
        const double sub = rng.next_double();
        CHECK(reward::combine_gated(weights, sem_hi, sub, 1.0) >=
              reward::combine_gated(weights, sem_lo, sub, 1.0) - 1e-15);
        CHECK(reward::combine_gated(weights, sem_lo, sub, 1.0) >=
              reward::combine_gated(weights, sem_lo, sub * 0.5, 1.0) - 1e-15);
    }
}

TEST_CASE("reward_total telemetry keeps components when gated") {
    const HashEmbedder embedder;
    const MemeRecord rec = cot_record();
    ParsedResponse resp = perfect_response(rec);
    resp.judgement = ParsedJudgement::Nonharmful;  // wrong: gate closes
    const auto breakdown =
        reward::reward_total(resp, rec, RewardWeights{}, embedder);
    CHECK(breakdown.r_total == 0.0);
    CHECK(breakdown.r_fin == 0.0);
    CHECK(breakdown.r_sem == 1.0);       // still recorded
    CHECK(*breakdown.r_sub == doctest::Approx(1.0));
}
