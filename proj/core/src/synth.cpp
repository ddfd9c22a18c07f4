#include "harmcot/synth.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "harmcot/rng.hpp"

namespace harmcot {
namespace synth {

using nlohmann::json;

void TaskRules::validate() const {
    if (vocabulary.empty()) throw ValidationError("task rules: empty vocabulary");
    std::set<std::string> vocab_set(vocabulary.begin(), vocabulary.end());
    std::set<std::string> seen_trigger_tokens;
    bool any_trigger = false;
    for (HarmCategory c : all_categories()) {
        for (const TriggerPair& p : triggers[static_cast<std::size_t>(c)]) {
            any_trigger = true;
            if (!vocab_set.count(p.image_token) || !vocab_set.count(p.text_token)) {
                throw ValidationError("task rules: trigger token outside vocabulary");
            }
            if (!seen_trigger_tokens.insert(p.image_token).second ||
                !seen_trigger_tokens.insert(p.text_token).second) {
                throw ValidationError("task rules: trigger sets are not disjoint");
            }
        }
    }
    if (!any_trigger) throw ValidationError("task rules: no triggers defined");
    if (visual_tokens.empty() || text_tokens.empty()) {
        throw ValidationError("task rules: empty content alphabet");
    }
    if (noise_rate < 0.0 || noise_rate >= 1.0) throw ValidationError("task rules: bad noise_rate");
    if (harmful_rate <= 0.0 || harmful_rate >= 1.0) {
        throw ValidationError("task rules: bad harmful_rate");
    }
    if (cot_fraction < 0.0 || cot_fraction > 1.0) {
        throw ValidationError("task rules: bad cot_fraction");
    }
}

const TaskRules& default_task_rules() {
    static const TaskRules rules = [] {
        TaskRules r;
        r.vocabulary = default_vocabulary().tokens();
        char buf[8];
        for (int i = 0; i < 14; ++i) {
            std::snprintf(buf, sizeof(buf), "v%02d", i);
            r.visual_tokens.emplace_back(buf);
        }
        for (int i = 0; i < 14; ++i) {
            std::snprintf(buf, sizeof(buf), "w%02d", i);
            r.text_tokens.emplace_back(buf);
        }
        for (std::size_t c = 0; c < kNumCategories; ++c) {
            r.triggers[c].push_back({r.visual_tokens[c], r.text_tokens[c]});
        }
        r.validate();
        return r;
    }();
    return rules;
}

TaskRules load_task_rules(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open rules file '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw IoError("rules file '" + path + "': invalid JSON: " + e.what());
    }
    TaskRules rules;
    rules.version = j.at("version").get<int>();
    rules.vocabulary = j.at("vocabulary").get<std::vector<std::string>>();
    for (HarmCategory c : all_categories()) {
        const json& t = j.at("triggers").at(category_name(c));
        for (const auto& pair : t) {
            rules.triggers[static_cast<std::size_t>(c)].push_back(
                {pair.at(0).get<std::string>(), pair.at(1).get<std::string>()});
        }
    }
    rules.visual_tokens = j.at("visual_tokens").get<std::vector<std::string>>();
    rules.text_tokens = j.at("text_tokens").get<std::vector<std::string>>();
    rules.noise_rate = j.at("noise_rate").get<double>();
    rules.harmful_rate = j.at("harmful_rate").get<double>();
    rules.cot_fraction = j.at("cot_fraction").get<double>();
    rules.validate();
    return rules;
}

void save_task_rules(const TaskRules& rules, const std::string& path) {
    rules.validate();
    json j;
    j["version"] = rules.version;
    j["vocabulary"] = rules.vocabulary;
    json triggers = json::object();
    for (HarmCategory c : all_categories()) {
        json list = json::array();
        for (const TriggerPair& p : rules.triggers[static_cast<std::size_t>(c)]) {
            list.push_back(json::array({p.image_token, p.text_token}));
        }
        triggers[category_name(c)] = list;
    }
    j["triggers"] = triggers;
    j["visual_tokens"] = rules.visual_tokens;
    j["text_tokens"] = rules.text_tokens;
    j["noise_rate"] = rules.noise_rate;
    j["harmful_rate"] = rules.harmful_rate;
    j["cot_fraction"] = rules.cot_fraction;
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write rules file '" + path + "'");
    out << j.dump(2) << "\n";
}

std::set<HarmCategory> triggered_categories(const TokenSeq& image_tokens,
                                            const TokenSeq& text_tokens, const TaskRules& rules) {
    std::set<HarmCategory> out;
    auto contains = [](const TokenSeq& seq, const Token& tok) {
        return std::find(seq.begin(), seq.end(), tok) != seq.end();
    };
    for (HarmCategory c : all_categories()) {
        for (const TriggerPair& p : rules.triggers[static_cast<std::size_t>(c)]) {
            if (contains(image_tokens, p.image_token) && contains(text_tokens, p.text_token)) {
                out.insert(c);
                break;
            }
        }
    }
    return out;
}

namespace {

constexpr std::size_t kImageSlots = 3;
constexpr std::size_t kTextSlots = 3;

// Draws `count` distinct tokens from `pool` excluding `used`, appending to
// `out`. The pool must be large enough.
void draw_fillers(const std::vector<Token>& pool, std::size_t count, std::set<Token>& used,
                  TokenSeq& out, Rng& rng) {
    std::size_t drawn = 0;
    while (drawn < count) {
        const Token& t = pool[static_cast<std::size_t>(rng.next_below(pool.size()))];
        if (used.count(t)) continue;
        used.insert(t);
        out.push_back(t);
        ++drawn;
    }
}

MemeRecord generate_record(const TaskRules& rules, std::uint64_t seed, std::size_t index) {
    Rng rng(derive_seed(seed, index));
    MemeRecord rec;
    char idbuf[32];
    std::snprintf(idbuf, sizeof(idbuf), "synth-%06zu", index);
    rec.id = idbuf;

    const bool harmful = rng.next_bernoulli(rules.harmful_rate);
    std::set<Token> used_visual;
    std::set<Token> used_text;
    TokenSeq image;
    TokenSeq text;

    auto would_trigger = [&](const Token& image_tok, const Token& text_tok) {
        for (const auto& pairs : rules.triggers) {
            for (const TriggerPair& p : pairs) {
                const bool img_hit = p.image_token == image_tok ||
                                     std::find(image.begin(), image.end(), p.image_token) !=
                                         image.end();
                const bool txt_hit = p.text_token == text_tok ||
                                     std::find(text.begin(), text.end(), p.text_token) !=
                                         text.end();
                if (img_hit && txt_hit) return true;
            }
        }
        return false;
    };

    if (harmful) {
        // One category, sometimes two, with their trigger pairs planted.
        std::size_t n_cats = rng.next_bernoulli(0.25) ? 2 : 1;
        std::vector<std::size_t> cats;
        while (cats.size() < n_cats) {
            const std::size_t c = static_cast<std::size_t>(rng.next_below(kNumCategories));
            if (std::find(cats.begin(), cats.end(), c) == cats.end()) cats.push_back(c);
        }
        for (std::size_t c : cats) {
            const auto& pairs = rules.triggers[c];
            const TriggerPair& p =
                pairs[static_cast<std::size_t>(rng.next_below(pairs.size()))];
            if (!used_visual.insert(p.image_token).second ||
                !used_text.insert(p.text_token).second) {
                continue;  // token collision across categories: plant once
            }
            image.push_back(p.image_token);
            text.push_back(p.text_token);
        }
    } else if (rng.next_bernoulli(rules.noise_rate)) {
        // Near-miss distractor: trigger halves that never complete a pair, so
        // presence alone cannot decide harmfulness. Usually two-sided (a
        // visual half of one category next to a textual half of another),
        // sometimes one-sided.
        const std::size_t a = static_cast<std::size_t>(rng.next_below(kNumCategories));
        const auto& pairs_a = rules.triggers[a];
        const TriggerPair& pa =
            pairs_a[static_cast<std::size_t>(rng.next_below(pairs_a.size()))];
        if (rng.next_bernoulli(0.7)) {
            std::size_t b = static_cast<std::size_t>(rng.next_below(kNumCategories));
            if (b == a) b = (b + 1) % kNumCategories;
            const auto& pairs_b = rules.triggers[b];
            const TriggerPair& pb =
                pairs_b[static_cast<std::size_t>(rng.next_below(pairs_b.size()))];
            if (!would_trigger(pa.image_token, pb.text_token)) {
                image.push_back(pa.image_token);
                text.push_back(pb.text_token);
                used_visual.insert(pa.image_token);
                used_text.insert(pb.text_token);
            }
        } else if (rng.next_bernoulli(0.5)) {
            image.push_back(pa.image_token);
            used_visual.insert(pa.image_token);
        } else {
            text.push_back(pa.text_token);
            used_text.insert(pa.text_token);
        }
    }

    // Fill the remaining slots with benign content. Nonharmful records must
    // not accidentally complete a pair: exclude every trigger token.
    std::set<Token> blocked_visual = used_visual;
    std::set<Token> blocked_text = used_text;
    if (!harmful) {
        for (HarmCategory c : all_categories()) {
            for (const TriggerPair& p : rules.triggers[static_cast<std::size_t>(c)]) {
                blocked_visual.insert(p.image_token);
                blocked_text.insert(p.text_token);
            }
        }
        // Re-allow the planted distractor itself.
        for (const Token& t : image) blocked_visual.erase(t);
        for (const Token& t : text) blocked_text.erase(t);
        blocked_visual.insert(image.begin(), image.end());
        blocked_text.insert(text.begin(), text.end());
    }
    if (image.size() < kImageSlots) {
        draw_fillers(rules.visual_tokens, kImageSlots - image.size(), blocked_visual, image, rng);
    }
    if (text.size() < kTextSlots) {
        draw_fillers(rules.text_tokens, kTextSlots - text.size(), blocked_text, text, rng);
    }

    // Canonical order: both modalities sorted, so the caption is a pure
    // function of what the record contains.
    std::sort(image.begin(), image.end());
    std::sort(text.begin(), text.end());

    rec.image_tokens = image;
    rec.text = detokenize(text);

    // Gold comes from re-running the rules on the assembled record.
    rec.subcategories = triggered_categories(rec.image_tokens, text, rules);
    rec.label = rec.subcategories.empty() ? BinaryLabel::Nonharmful : BinaryLabel::Harmful;

    if (rng.next_bernoulli(rules.cot_fraction)) {
        rec.cot = oracle_annotate(rec, rules);
    }
    return rec;
}

}  // namespace

std::vector<MemeRecord> generate_dataset(const TaskRules& rules, std::size_t n,
                                         std::uint64_t seed) {
    rules.validate();
    if (n < 1) throw ValidationError("generate_dataset: n must be >= 1");
    std::vector<MemeRecord> records;
    records.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        records.push_back(generate_record(rules, seed, i));
    }
    return records;
}

CoTAnnotation oracle_annotate(const MemeRecord& record, const TaskRules& rules) {
    CoTAnnotation ann;
    const TokenSeq text_tokens = tokenize(record.text);
    ann.caption = "shows " + detokenize(record.image_tokens) + " with text " + record.text;

    const std::set<HarmCategory> cats =
        triggered_categories(record.image_tokens, text_tokens, rules);
    for (HarmCategory c : all_categories()) {
        GoldVerdict v;
        if (cats.count(c)) {
            v.applicable = true;
            // Name the completing pair as the rationale.
            for (const TriggerPair& p : rules.triggers[static_cast<std::size_t>(c)]) {
                const bool in_image = std::find(record.image_tokens.begin(),
                                                record.image_tokens.end(),
                                                p.image_token) != record.image_tokens.end();
                const bool in_text =
                    std::find(text_tokens.begin(), text_tokens.end(), p.text_token) !=
                    text_tokens.end();
                if (in_image && in_text) {
                    v.rationale = "due to " + p.image_token + " " + p.text_token;
                    break;
                }
            }
        }
        ann.verdicts[static_cast<std::size_t>(c)] = v;
    }
    ann.judgement = cats.empty() ? BinaryLabel::Nonharmful : BinaryLabel::Harmful;
    return ann;
}

BinaryLabel MockAnnotator::judge(const MemeRecord& record, const TaskRules& rules) const {
    const std::set<HarmCategory> cats =
        triggered_categories(record.image_tokens, tokenize(record.text), rules);
    BinaryLabel verdict = cats.empty() ? BinaryLabel::Nonharmful : BinaryLabel::Harmful;
    Rng rng(derive_seed(seed, fnv1a(record.id)));
    if (rng.next_bernoulli(error_rate)) {
        verdict = verdict == BinaryLabel::Harmful ? BinaryLabel::Nonharmful : BinaryLabel::Harmful;
    }
    return verdict;
}

CrossVerifyResult cross_verify(const MemeRecord& record,
                               const std::vector<MockAnnotator>& annotators,
                               const TaskRules& rules) {
    if (annotators.size() < 2) throw ValidationError("cross_verify: need at least 2 annotators");
    CrossVerifyResult result;
    result.judgements.reserve(annotators.size());
    for (const MockAnnotator& a : annotators) {
        result.judgements.push_back(a.judge(record, rules));
    }
    result.consistent = std::all_of(result.judgements.begin(), result.judgements.end(),
                                    [&](BinaryLabel l) { return l == result.judgements.front(); });
    result.annotation = oracle_annotate(record, rules);
    if (result.consistent) {
        // The agreed candidate stands, even when every annotator erred the
        // same way; such residue is what the downstream audit exists for.
        result.annotation.judgement = result.judgements.front();
    }
    return result;
}

double consistency_rate(const std::vector<MemeRecord>& records,
                        const std::vector<MockAnnotator>& annotators, const TaskRules& rules) {
    if (records.empty()) throw ValidationError("consistency_rate: empty dataset");
    std::size_t consistent = 0;
    for (const MemeRecord& rec : records) {
        if (cross_verify(rec, annotators, rules).consistent) ++consistent;
    }
    return static_cast<double>(consistent) / static_cast<double>(records.size());
}

double analytic_consistency_rate(const std::vector<double>& error_rates) {
    if (error_rates.size() < 2) {
        throw ValidationError("analytic_consistency_rate: need at least 2 annotators");
    }
    double all_correct = 1.0;
    double all_wrong = 1.0;
    for (double e : error_rates) {
        all_correct *= 1.0 - e;
        all_wrong *= e;
    }
    return all_correct + all_wrong;
}

}  // namespace synth
}  // namespace harmcot
