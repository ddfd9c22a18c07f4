#include "harmcot/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace harmcot {
namespace metrics {

namespace {

double safe_div(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

double f1_of(double precision, double recall) {
    return (precision + recall) == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
}

}  // namespace

// ---------------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------------

double ClassificationReport::macro_precision() const {
    double sum = 0.0;
    for (const ClassScores& c : per_class) sum += c.precision;
    return per_class.empty() ? 0.0 : sum / static_cast<double>(per_class.size());
}

double ClassificationReport::macro_recall() const {
    double sum = 0.0;
    for (const ClassScores& c : per_class) sum += c.recall;
    return per_class.empty() ? 0.0 : sum / static_cast<double>(per_class.size());
}

ClassificationReport classification_report(const std::vector<ParsedJudgement>& pred,
                                           const std::vector<BinaryLabel>& gold) {
    if (pred.size() != gold.size()) {
        throw ValidationError("classification_report: pred/gold length mismatch");
    }
    if (pred.empty()) throw ValidationError("classification_report: empty input");

    ConfusionCounts counts;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        BinaryLabel effective;
        switch (pred[i]) {
            case ParsedJudgement::Harmful:
                effective = BinaryLabel::Harmful;
                break;
            case ParsedJudgement::Nonharmful:
                effective = BinaryLabel::Nonharmful;
                break;
            case ParsedJudgement::Unparseable:
            default:
                // Wrong against whichever class the gold is.
                effective = gold[i] == BinaryLabel::Harmful ? BinaryLabel::Nonharmful
                                                            : BinaryLabel::Harmful;
                break;
        }
        if (gold[i] == BinaryLabel::Harmful) {
            if (effective == BinaryLabel::Harmful)
                ++counts.tp;
            else
                ++counts.fn;
        } else {
            if (effective == BinaryLabel::Harmful)
                ++counts.fp;
            else
                ++counts.tn;
        }
    }

    ClassificationReport report;
    report.counts = counts;
    report.accuracy = safe_div(static_cast<double>(counts.tp + counts.tn),
                               static_cast<double>(counts.total()));

    ClassScores pos;  // Harmful
    pos.precision = safe_div(static_cast<double>(counts.tp),
                             static_cast<double>(counts.tp + counts.fp));
    pos.recall = safe_div(static_cast<double>(counts.tp),
                          static_cast<double>(counts.tp + counts.fn));
    pos.f1 = f1_of(pos.precision, pos.recall);

    ClassScores neg;  // Nonharmful
    neg.precision = safe_div(static_cast<double>(counts.tn),
                             static_cast<double>(counts.tn + counts.fn));
    neg.recall = safe_div(static_cast<double>(counts.tn),
                          static_cast<double>(counts.tn + counts.fp));
    neg.f1 = f1_of(neg.precision, neg.recall);

    report.per_class = {pos, neg};
    report.precision = pos.precision;
    report.recall = pos.recall;
    report.macro_f1 = (pos.f1 + neg.f1) / 2.0;
    return report;
}

// ---------------------------------------------------------------------------
// Fleiss' kappa
// ---------------------------------------------------------------------------

KappaReport fleiss_kappa(const std::vector<std::vector<std::string>>& ratings) {
    if (ratings.empty()) throw ValidationError("fleiss_kappa: no items");
    const std::size_t n_raters = ratings.front().size();
    if (n_raters < 2) throw ValidationError("fleiss_kappa: need at least 2 raters");
    for (const auto& row : ratings) {
        if (row.size() != n_raters) throw ValidationError("fleiss_kappa: ragged ratings matrix");
    }

    const std::size_t n_items = ratings.size();
    const double n = static_cast<double>(n_raters);

    std::map<std::string, double> category_totals;
    KappaReport report;
    report.n_items = n_items;
    report.n_raters = n_raters;
    report.per_item_agreement.reserve(n_items);

    double p_bar = 0.0;
    for (const auto& row : ratings) {
        std::map<std::string, std::size_t> counts;
        for (const std::string& label : row) {
            ++counts[label];
            category_totals[label] += 1.0;
        }
        double sum_sq = 0.0;
        for (const auto& [label, count] : counts) {
            (void)label;
            sum_sq += static_cast<double>(count) * static_cast<double>(count);
        }
        const double p_i = (sum_sq - n) / (n * (n - 1.0));
        report.per_item_agreement.push_back(p_i);
        p_bar += p_i;
    }
    p_bar /= static_cast<double>(n_items);

    double p_e = 0.0;
    const double total_ratings = static_cast<double>(n_items) * n;
    for (const auto& [label, count] : category_totals) {
        (void)label;
        const double p_j = count / total_ratings;
        p_e += p_j * p_j;
    }

    report.kappa = p_e >= 1.0 ? 1.0 : (p_bar - p_e) / (1.0 - p_e);
    return report;
}

// ---------------------------------------------------------------------------
// BLEU-4
// ---------------------------------------------------------------------------

namespace {

// n-gram counts keyed by the joined token string; '\x1f' never occurs in
// tokens produced by the tokenizer.
std::map<std::string, std::size_t> ngram_counts(const TokenSeq& tokens, std::size_t n) {
    std::map<std::string, std::size_t> counts;
    if (tokens.size() < n) return counts;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
        std::string key;
        for (std::size_t j = 0; j < n; ++j) {
            if (j) key += '\x1f';
            key += tokens[i + j];
        }
        ++counts[key];
    }
    return counts;
}

}  // namespace

double bleu4(const TokenSeq& candidate, const std::vector<TokenSeq>& references) {
    if (references.empty()) throw ValidationError("bleu4: no references");
    if (candidate.empty()) return 0.0;

    double log_sum = 0.0;
    for (std::size_t n = 1; n <= 4; ++n) {
        const std::size_t total = candidate.size() >= n ? candidate.size() - n + 1 : 0;
        if (total == 0) continue;  // order longer than the candidate: neutral

        auto cand_counts = ngram_counts(candidate, n);
        std::map<std::string, std::size_t> max_ref_counts;
        for (const TokenSeq& ref : references) {
            for (const auto& [key, count] : ngram_counts(ref, n)) {
                max_ref_counts[key] = std::max(max_ref_counts[key], count);
            }
        }
        std::size_t matched = 0;
        for (const auto& [key, count] : cand_counts) {
            auto it = max_ref_counts.find(key);
            if (it != max_ref_counts.end()) matched += std::min(count, it->second);
        }

        double p;
        if (matched == 0) {
            if (n == 1) return 0.0;  // no unigram overlap at all
            p = 1.0 / static_cast<double>(total + 1);
        } else {
            p = static_cast<double>(matched) / static_cast<double>(total);
        }
        log_sum += 0.25 * std::log(p);
    }

    // Brevity penalty against the closest reference length (ties: shorter).
    std::size_t closest = references.front().size();
    for (const TokenSeq& ref : references) {
        const auto diff = [&](std::size_t len) {
            return len > candidate.size() ? len - candidate.size() : candidate.size() - len;
        };
        if (diff(ref.size()) < diff(closest) ||
            (diff(ref.size()) == diff(closest) && ref.size() < closest)) {
            closest = ref.size();
        }
    }
    double bp = 1.0;
    if (candidate.size() < closest) {
        bp = std::exp(1.0 - static_cast<double>(closest) / static_cast<double>(candidate.size()));
    }
    return std::min(1.0, bp * std::exp(log_sum));
}

// ---------------------------------------------------------------------------
// ROUGE-L
// ---------------------------------------------------------------------------

namespace {

std::size_t lcs_length(const TokenSeq& a, const TokenSeq& b) {
    if (a.empty() || b.empty()) return 0;
    std::vector<std::size_t> prev(b.size() + 1, 0);
    std::vector<std::size_t> cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

}  // namespace

double rouge_l(const TokenSeq& candidate, const TokenSeq& reference) {
    if (candidate.empty() || reference.empty()) return 0.0;
    const double lcs = static_cast<double>(lcs_length(candidate, reference));
    if (lcs == 0.0) return 0.0;
    const double p = lcs / static_cast<double>(candidate.size());
    const double r = lcs / static_cast<double>(reference.size());
    return 2.0 * p * r / (p + r);
}

// ---------------------------------------------------------------------------
// Greedy embedding F-score
// ---------------------------------------------------------------------------

namespace {

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0.0;
    double na = 0.0;
    double nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

}  // namespace

double emb_similarity(const TokenSeq& candidate, const TokenSeq& reference,
                      const EmbeddingProvider& embedder) {
    if (candidate.empty() || reference.empty()) return 0.0;

    std::vector<std::vector<double>> cand_emb;
    cand_emb.reserve(candidate.size());
    for (const Token& t : candidate) cand_emb.push_back(embedder.embed(t));
    std::vector<std::vector<double>> ref_emb;
    ref_emb.reserve(reference.size());
    for (const Token& t : reference) ref_emb.push_back(embedder.embed(t));

    // Token string equality short-circuits to cosine 1 so that identical
    // sequences score exactly 1.0.
    auto pair_sim = [&](std::size_t ci, std::size_t ri) {
        if (candidate[ci] == reference[ri]) return 1.0;
        return cosine(cand_emb[ci], ref_emb[ri]);
    };

    double precision = 0.0;
    for (std::size_t ci = 0; ci < candidate.size(); ++ci) {
        double best = -1.0;
        for (std::size_t ri = 0; ri < reference.size(); ++ri) {
            best = std::max(best, pair_sim(ci, ri));
        }
        precision += best;
    }
    precision /= static_cast<double>(candidate.size());

    double recall = 0.0;
    for (std::size_t ri = 0; ri < reference.size(); ++ri) {
        double best = -1.0;
        for (std::size_t ci = 0; ci < candidate.size(); ++ci) {
            best = std::max(best, pair_sim(ci, ri));
        }
        recall += best;
    }
    recall /= static_cast<double>(reference.size());

    double f = 0.0;
    if (precision + recall != 0.0) {
        f = std::clamp(2.0 * precision * recall / (precision + recall), -1.0, 1.0);
    }
    return (f + 1.0) / 2.0;
}

SimilarityScores similarity_scores(const TokenSeq& candidate, const TokenSeq& reference,
                                   const EmbeddingProvider& embedder,
                                   const SimilarityWeights& weights) {
    SimilarityScores scores;
    scores.bleu4 = bleu4(candidate, {reference});
    scores.rouge_l = rouge_l(candidate, reference);
    scores.emb_sim = emb_similarity(candidate, reference, embedder);
    const double total = weights.bleu + weights.rouge + weights.emb;
    if (total <= 0.0) throw ValidationError("similarity weights must have positive sum");
    scores.combined =
        (weights.bleu * scores.bleu4 + weights.rouge * scores.rouge_l + weights.emb * scores.emb_sim) /
        total;
    return scores;
}

// ---------------------------------------------------------------------------
// Reasoning alignment
// ---------------------------------------------------------------------------

SubAccReport sub_acc(const std::vector<ParsedResponse>& responses,
                     const std::vector<MemeRecord>& gold) {
    if (responses.size() != gold.size()) {
        throw ValidationError("sub_acc: responses/gold length mismatch");
    }
    if (responses.empty()) throw ValidationError("sub_acc: empty input");

    SubAccReport report;
    for (HarmCategory c : all_categories()) {
        const std::size_t idx = static_cast<std::size_t>(c);
        std::size_t correct = 0;
        for (std::size_t i = 0; i < responses.size(); ++i) {
            const bool gold_member = gold[i].subcategories.count(c) > 0;
            const ParsedVerdict v = responses[i].verdicts[idx];
            const bool match = (v == ParsedVerdict::Applicable && gold_member) ||
                               (v == ParsedVerdict::NotApplicable && !gold_member);
            if (match) ++correct;
        }
        report.per_category[idx] =
            static_cast<double>(correct) / static_cast<double>(responses.size());
        report.overall += report.per_category[idx];
    }
    report.overall /= static_cast<double>(kNumCategories);
    return report;
}

double decision_alignment(const std::vector<ParsedResponse>& responses) {
    if (responses.empty()) throw ValidationError("decision_alignment: empty input");
    std::size_t aligned = 0;
    for (const ParsedResponse& r : responses) {
        if (r.judgement == ParsedJudgement::Unparseable) continue;
        const bool any_applicable =
            std::any_of(r.verdicts.begin(), r.verdicts.end(),
                        [](ParsedVerdict v) { return v == ParsedVerdict::Applicable; });
        if (any_applicable == (r.judgement == ParsedJudgement::Harmful)) ++aligned;
    }
    return static_cast<double>(aligned) / static_cast<double>(responses.size());
}

}  // namespace metrics
}  // namespace harmcot
