#pragma once

// Synthetic meme-surrogate task: rule-driven dataset generation, the oracle
// gold annotator, and the mock multi-annotator cross-verification simulator.
//
// A record is harmful iff some category's trigger pair occurs with its visual
// half among the image tokens AND its textual half in the text, so neither
// modality alone decides the label.

#include <array>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "harmcot/schema.hpp"
#include "harmcot/vocab.hpp"

namespace harmcot {
namespace synth {

struct TriggerPair {
    Token image_token;
    Token text_token;
};

struct TaskRules {
    int version = 1;
    std::vector<std::string> vocabulary;
    std::array<std::vector<TriggerPair>, kNumCategories> triggers;  // pairwise disjoint
    std::vector<Token> visual_tokens;  // full visual content alphabet
    std::vector<Token> text_tokens;    // full textual content alphabet
    double noise_rate = 0.6;           // near-miss distractor probability
    double harmful_rate = 0.45;
    double cot_fraction = 0.9;  // records carrying a gold chain-of-thought

    void validate() const;
};

// Rules over the built-in vocabulary: one trigger pair per category.
const TaskRules& default_task_rules();

TaskRules load_task_rules(const std::string& path);
void save_task_rules(const TaskRules& rules, const std::string& path);

// Categories whose trigger pair occurs across the two modalities: the
// lookup-table oracle classifier for the synthetic task.
std::set<HarmCategory> triggered_categories(const TokenSeq& image_tokens, const TokenSeq& text_tokens,
                                            const TaskRules& rules);

// Deterministic in (rules, n, seed); records get per-index derived seeds so
// generation is order-independent. Gold label/subcategories come from the
// trigger rules; cot_fraction of records carry the oracle annotation.
std::vector<MemeRecord> generate_dataset(const TaskRules& rules, std::size_t n,
                                         std::uint64_t seed);

// Deterministic gold annotation: canonical caption over the content tokens,
// verdicts from the trigger rules, judgement consistent with them.
CoTAnnotation oracle_annotate(const MemeRecord& record, const TaskRules& rules);

struct MockAnnotator {
    std::string id;
    double error_rate = 0.0;  // in [0, 1)
    std::uint64_t seed = 0;

    // The oracle judgement, independently flipped with probability
    // error_rate; deterministic per (seed, record id).
    BinaryLabel judge(const MemeRecord& record, const TaskRules& rules) const;
};

struct CrossVerifyResult {
    bool consistent = false;
    // The adopted annotation: the agreed candidate when consistent (which
    // can carry a wrong judgement when every annotator erred the same way),
    // the oracle correction when disputed.
    CoTAnnotation annotation;
    std::vector<BinaryLabel> judgements;  // one per annotator
};

// Consistent iff all annotator judgements agree; disputes route to the
// oracle. Requires at least two annotators.
CrossVerifyResult cross_verify(const MemeRecord& record,
                               const std::vector<MockAnnotator>& annotators,
                               const TaskRules& rules);

// Fraction of records on which all annotators agree.
double consistency_rate(const std::vector<MemeRecord>& records,
                        const std::vector<MockAnnotator>& annotators, const TaskRules& rules);

// Closed-form all-agree probability for annotators with the given error
// rates on a binary judgement: prod(1 - e_i) + prod(e_i).
double analytic_consistency_rate(const std::vector<double>& error_rates);

}  // namespace synth
}  // namespace harmcot
