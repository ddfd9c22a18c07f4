#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "harmcot/metrics.hpp"
#include "harmcot/rng.hpp"
#include "harmcot/synth.hpp"

using namespace harmcot;
using synth::default_task_rules;
using synth::generate_dataset;
using synth::oracle_annotate;

TEST_CASE("default rules validate; trigger sets are disjoint") {
    const auto& rules = default_task_rules();
    CHECK_NOTHROW(rules.validate());
    std::set<std::string> seen;
    for (const auto& per_category : rules.triggers) {
        for (const auto& pair : per_category) {
            CHECK(seen.insert(pair.image_token).second);
            CHECK(seen.insert(pair.text_token).second);
        }
    }
}

TEST_CASE("rules file round trip") {
    namespace fs = std::filesystem;
    const auto path = (fs::temp_directory_path() / "harmcot-rules-test.json").string();
    synth::save_task_rules(default_task_rules(), path);
    const synth::TaskRules loaded = synth::load_task_rules(path);
    CHECK(loaded.vocabulary == default_task_rules().vocabulary);
    CHECK(loaded.noise_rate == default_task_rules().noise_rate);
    for (std::size_t c = 0; c < kNumCategories; ++c) {
        REQUIRE(loaded.triggers[c].size() == default_task_rules().triggers[c].size());
        CHECK(loaded.triggers[c][0].image_token ==
              default_task_rules().triggers[c][0].image_token);
    }
    fs::remove(path);
}

TEST_CASE("generated records obey the trigger rules exhaustively") {
    const auto& rules = default_task_rules();
    const auto records = generate_dataset(rules, 2000, 42);
    REQUIRE(records.size() == 2000);
    std::set<std::string> ids;
    for (const MemeRecord& rec : records) {
        CHECK(ids.insert(rec.id).second);
        CHECK_NOTHROW(validate_record(rec));
        const auto expected =
            synth::triggered_categories(rec.image_tokens, tokenize(rec.text), rules);
        CHECK(rec.subcategories == expected);
        CHECK((rec.label == BinaryLabel::Harmful) == !expected.empty());
        CHECK(rec.image_tokens.size() == 3);
        CHECK(tokenize(rec.text).size() == 3);
    }
}

TEST_CASE("generation is reproducible and seed-sensitive") {
    const auto& rules = default_task_rules();
    const auto a = generate_dataset(rules, 100, 9);
    const auto b = generate_dataset(rules, 100, 9);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].image_tokens == b[i].image_tokens);
        CHECK(a[i].text == b[i].text);
        CHECK(a[i].label == b[i].label);
    }
    const auto c = generate_dataset(rules, 100, 10);
    bool any_diff = false;
    for (std::size_t i = 0; i < a.size() && !any_diff; ++i) {
        any_diff = a[i].image_tokens != c[i].image_tokens || a[i].text != c[i].text;
    }
    CHECK(any_diff);
}

TEST_CASE("harmful fraction lands near the configured rate") {
    const auto records = generate_dataset(default_task_rules(), 10000, 77);
    std::size_t harmful = 0;
    for (const auto& rec : records) harmful += rec.label == BinaryLabel::Harmful;
    const double fraction = static_cast<double>(harmful) / 10000.0;
    CHECK(fraction > 0.42);
    CHECK(fraction < 0.48);
}

TEST_CASE("the lookup-table oracle classifies the synthetic task perfectly") {
    const auto& rules = default_task_rules();
    const auto records = generate_dataset(rules, 500, 3);
    for (const MemeRecord& rec : records) {
        const auto cats =
            synth::triggered_categories(rec.image_tokens, tokenize(rec.text), rules);
        const BinaryLabel predicted =
            cats.empty() ? BinaryLabel::Nonharmful : BinaryLabel::Harmful;
        CHECK(predicted == rec.label);
    }
}

TEST_CASE("oracle_annotate: consistent, deterministic, round-trips") {
    const auto& rules = default_task_rules();
    const auto records = generate_dataset(rules, 200, 8);
    for (const MemeRecord& rec : records) {
        const CoTAnnotation ann = oracle_annotate(rec, rules);
        CHECK(ann.judgement == rec.label);
        CHECK_NOTHROW(validate_annotation(ann));
        if (rec.label == BinaryLabel::Nonharmful) {
            for (const auto& v : ann.verdicts) CHECK(!v.applicable);
        }
        const ParsedResponse parsed = parse_response(tokenize(serialize_cot(ann)));
        for (std::size_t c = 0; c < kNumCategories; ++c) {
            CHECK((parsed.verdicts[c] == ParsedVerdict::Applicable) ==
                  ann.verdicts[c].applicable);
        }
        CHECK((parsed.judgement == ParsedJudgement::Harmful) ==
              (ann.judgement == BinaryLabel::Harmful));
        CHECK(*parsed.caption == ann.caption);
    }
}

TEST_CASE("cross_verify: unanimity, dispute routing, analytic rate") {
    const auto& rules = default_task_rules();

    SUBCASE("zero error rate is always consistent") {
        const auto records = generate_dataset(rules, 300, 5);
        std::vector<synth::MockAnnotator> annotators = {
            {"a", 0.0, 1}, {"b", 0.0, 2}, {"c", 0.0, 3}};
        CHECK(synth::consistency_rate(records, annotators, rules) == 1.0);
        const auto result = synth::cross_verify(records[0], annotators, rules);
        CHECK(result.consistent);
        CHECK(result.annotation.judgement == records[0].label);
    }

    SUBCASE("fewer than two annotators is rejected") {
        const auto records = generate_dataset(rules, 1, 5);
        CHECK_THROWS_AS(synth::cross_verify(records[0], {{"solo", 0.0, 1}}, rules),
                        ValidationError);
    }

    SUBCASE("disputed results carry the oracle annotation") {
        const auto records = generate_dataset(rules, 400, 6);
        // error_rate 0.5 disagrees often
        std::vector<synth::MockAnnotator> annotators = {
            {"a", 0.5, 11}, {"b", 0.5, 12}, {"c", 0.5, 13}};
        bool saw_dispute = false;
        for (const MemeRecord& rec : records) {
            const auto result = synth::cross_verify(rec, annotators, rules);
            if (!result.consistent) {
                saw_dispute = true;
                const CoTAnnotation oracle = oracle_annotate(rec, rules);
                CHECK(result.annotation.judgement == oracle.judgement);
                CHECK(result.annotation.caption == oracle.caption);
            }
        }
        CHECK(saw_dispute);
    }

    SUBCASE("measured rate tracks the closed-form all-agree probability") {
        const auto records = generate_dataset(rules, 10000, 7);
        std::vector<synth::MockAnnotator> annotators = {
            {"a", 0.05, 21}, {"b", 0.05, 22}, {"c", 0.05, 23}};
        const double measured = synth::consistency_rate(records, annotators, rules);
        const double analytic = synth::analytic_consistency_rate({0.05, 0.05, 0.05});
        CHECK(analytic == doctest::Approx(std::pow(0.95, 3) + std::pow(0.05, 3)).epsilon(1e-15));
        CHECK(std::abs(measured - analytic) < 0.02);
    }
}

TEST_CASE("mock annotators are deterministic in their seed") {
    const auto& rules = default_task_rules();
    const auto records = generate_dataset(rules, 50, 15);
    const synth::MockAnnotator a{"a", 0.3, 99};
    const synth::MockAnnotator b{"b", 0.3, 99};
    const synth::MockAnnotator c{"c", 0.3, 100};
    bool differs_across_seeds = false;
    for (const MemeRecord& rec : records) {
        CHECK(a.judge(rec, rules) == b.judge(rec, rules));
        if (a.judge(rec, rules) != c.judge(rec, rules)) differs_across_seeds = true;
    }
    CHECK(differs_across_seeds);
}

TEST_CASE("oracle responses score perfectly end to end") {
    const auto& rules = default_task_rules();
    const auto records = generate_dataset(rules, 120, 33);
    std::vector<ParsedResponse> responses;
    std::vector<ParsedJudgement> preds;
    std::vector<BinaryLabel> gold;
    for (const MemeRecord& rec : records) {
        const CoTAnnotation ann = oracle_annotate(rec, rules);
        responses.push_back(parse_response(tokenize(serialize_cot(ann))));
        preds.push_back(responses.back().judgement);
        gold.push_back(rec.label);
    }
    CHECK(metrics::classification_report(preds, gold).accuracy == 1.0);
    CHECK(metrics::classification_report(preds, gold).macro_f1 == 1.0);
    CHECK(metrics::decision_alignment(responses) == 1.0);
    CHECK(metrics::sub_acc(responses, records).overall == 1.0);
}
