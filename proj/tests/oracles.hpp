#pragma once

// From-definition reference implementations used to cross-check the library.
// Each oracle is deliberately written along a different computational route
// than the production code (pair counting instead of squared sums, memoized
// recursion instead of iterative tables, and so on) and must stay independent
// of the implementation it checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "harmcot/embedding.hpp"
#include "harmcot/schema.hpp"

namespace oracles {

using harmcot::TokenSeq;

// ---------------------------------------------------------------------------
// BLEU-4: counts n-grams as token-vector keys in a std::map.
// ---------------------------------------------------------------------------

inline double bleu4(const TokenSeq& candidate, const std::vector<TokenSeq>& references) {
    if (candidate.empty()) return 0.0;
    double log_sum = 0.0;
    for (std::size_t n = 1; n <= 4; ++n) {
        if (candidate.size() < n) continue;  // neutral order
        std::map<std::vector<std::string>, long> cand;
        for (std::size_t i = 0; i + n <= candidate.size(); ++i) {
            cand[std::vector<std::string>(candidate.begin() + static_cast<std::ptrdiff_t>(i),
                                          candidate.begin() + static_cast<std::ptrdiff_t>(i + n))]++;
        }
        std::map<std::vector<std::string>, long> ref_max;
        for (const TokenSeq& ref : references) {
            std::map<std::vector<std::string>, long> one;
            for (std::size_t i = 0; i + n <= ref.size(); ++i) {
                one[std::vector<std::string>(ref.begin() + static_cast<std::ptrdiff_t>(i),
                                             ref.begin() + static_cast<std::ptrdiff_t>(i + n))]++;
            }
            for (const auto& [k, v] : one) ref_max[k] = std::max(ref_max[k], v);
        }
        long matched = 0;
        long total = 0;
        for (const auto& [k, v] : cand) {
            total += v;
            auto it = ref_max.find(k);
            if (it != ref_max.end()) matched += std::min(v, it->second);
        }
        double p;
        if (matched == 0) {
            if (n == 1) return 0.0;
            p = 1.0 / static_cast<double>(total + 1);
        } else {
            p = static_cast<double>(matched) / static_cast<double>(total);
        }
        log_sum += std::log(p) / 4.0;
    }
    std::size_t closest = references.front().size();
    auto diff = [&](std::size_t len) {
        return len > candidate.size() ? len - candidate.size() : candidate.size() - len;
    };
    for (const TokenSeq& ref : references) {
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
// ROUGE-L: memoized recursive LCS.
// ---------------------------------------------------------------------------

inline std::size_t lcs_recursive(const TokenSeq& a, const TokenSeq& b, std::size_t i,
                                 std::size_t j, std::vector<long>& memo) {
    if (i == a.size() || j == b.size()) return 0;
    long& slot = memo[i * b.size() + j];
    if (slot >= 0) return static_cast<std::size_t>(slot);
    std::size_t value;
    if (a[i] == b[j]) {
        value = 1 + lcs_recursive(a, b, i + 1, j + 1, memo);
    } else {
        value = std::max(lcs_recursive(a, b, i + 1, j, memo),
                         lcs_recursive(a, b, i, j + 1, memo));
    }
    slot = static_cast<long>(value);
    return value;
}

inline double rouge_l(const TokenSeq& candidate, const TokenSeq& reference) {
    if (candidate.empty() || reference.empty()) return 0.0;
    std::vector<long> memo(candidate.size() * reference.size(), -1);
    const double lcs =
        static_cast<double>(lcs_recursive(candidate, reference, 0, 0, memo));
    if (lcs == 0.0) return 0.0;
    const double p = lcs / static_cast<double>(candidate.size());
    const double r = lcs / static_cast<double>(reference.size());
    return 2.0 * p * r / (p + r);
}

// ---------------------------------------------------------------------------
// Greedy embedding F-score.
// ---------------------------------------------------------------------------

inline double emb_greedy_f(const TokenSeq& candidate, const TokenSeq& reference,
                           const harmcot::EmbeddingProvider& embedder) {
    if (candidate.empty() || reference.empty()) return 0.0;
    auto sim = [&](const std::string& a, const std::string& b) {
        if (a == b) return 1.0;
        const std::vector<double> va = embedder.embed(a);
        const std::vector<double> vb = embedder.embed(b);
        double dot = 0.0;
        double na = 0.0;
        double nb = 0.0;
        for (std::size_t i = 0; i < va.size(); ++i) {
            dot += va[i] * vb[i];
            na += va[i] * va[i];
            nb += vb[i] * vb[i];
        }
        if (na == 0.0 || nb == 0.0) return 0.0;
        return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
    };
    double p = 0.0;
    for (const std::string& c : candidate) {
        double best = -1.0;
        for (const std::string& r : reference) best = std::max(best, sim(c, r));
        p += best;
    }
    p /= static_cast<double>(candidate.size());
    double r = 0.0;
    for (const std::string& t : reference) {
        double best = -1.0;
        for (const std::string& c : candidate) best = std::max(best, sim(c, t));
        r += best;
    }
    r /= static_cast<double>(reference.size());
    double f = 0.0;
    if (p + r != 0.0) f = std::clamp(2.0 * p * r / (p + r), -1.0, 1.0);
    return (f + 1.0) / 2.0;
}

// ---------------------------------------------------------------------------
// Fleiss' kappa via agreeing rater pairs.
// ---------------------------------------------------------------------------

inline double fleiss_kappa(const std::vector<std::vector<std::string>>& ratings) {
    const double n_items = static_cast<double>(ratings.size());
    const double n = static_cast<double>(ratings.front().size());

    // Observed agreement: fraction of agreeing rater pairs per item.
    double p_bar = 0.0;
    for (const auto& row : ratings) {
        long agree = 0;
        long pairs = 0;
        for (std::size_t a = 0; a < row.size(); ++a) {
            for (std::size_t b = a + 1; b < row.size(); ++b) {
                ++pairs;
                if (row[a] == row[b]) ++agree;
            }
        }
        p_bar += static_cast<double>(agree) / static_cast<double>(pairs);
    }
    p_bar /= n_items;

    std::map<std::string, double> totals;
    for (const auto& row : ratings) {
        for (const auto& label : row) totals[label] += 1.0;
    }
    double p_e = 0.0;
    for (const auto& [label, count] : totals) {
        const double p = count / (n_items * n);
        p_e += p * p;
    }
    if (p_e >= 1.0) return 1.0;
    return (p_bar - p_e) / (1.0 - p_e);
}

// ---------------------------------------------------------------------------
// Macro F1 from scratch.
// ---------------------------------------------------------------------------

// preds/gold over {0 = positive, 1 = negative}; returns macro F1 over both.
inline double macro_f1(const std::vector<int>& pred, const std::vector<int>& gold) {
    double sum = 0.0;
    for (int cls = 0; cls < 2; ++cls) {
        double tp = 0;
        double fp = 0;
        double fn = 0;
        for (std::size_t i = 0; i < pred.size(); ++i) {
            const bool p = pred[i] == cls;
            const bool g = gold[i] == cls;
            if (p && g) ++tp;
            if (p && !g) ++fp;
            if (!p && g) ++fn;
        }
        const double precision = tp + fp == 0 ? 0.0 : tp / (tp + fp);
        const double recall = tp + fn == 0 ? 0.0 : tp / (tp + fn);
        sum += precision + recall == 0 ? 0.0 : 2 * precision * recall / (precision + recall);
    }
    return sum / 2.0;
}

// ---------------------------------------------------------------------------
// Clipped surrogate and advantages, literal transcriptions.
// ---------------------------------------------------------------------------

inline double surrogate_term(double rho, double adv, double eps) {
    double clipped = rho;
    if (clipped < 1.0 - eps) clipped = 1.0 - eps;
    if (clipped > 1.0 + eps) clipped = 1.0 + eps;
    const double a = rho * adv;
    const double b = clipped * adv;
    return a < b ? a : b;
}

inline std::vector<double> advantages(const std::vector<double>& rewards) {
    double mean = 0.0;
    for (double r : rewards) mean += r;
    mean /= static_cast<double>(rewards.size());
    double var = 0.0;
    for (double r : rewards) var += (r - mean) * (r - mean);
    var /= static_cast<double>(rewards.size());
    std::vector<double> out(rewards.size(), 0.0);
    if (std::sqrt(var) < 1e-12) return out;
    for (std::size_t i = 0; i < rewards.size(); ++i) {
        out[i] = (rewards[i] - mean) / std::sqrt(var);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Central finite differences.
// ---------------------------------------------------------------------------

// Relative error of analytic vs central-difference gradient at `coords` of
// theta, with a small absolute floor so exactly-zero gradients do not blow
// the ratio up. Returns the worst relative error observed.
inline double max_fd_error(std::span<double> theta, const std::function<double()>& eval,
                           std::span<const double> analytic,
                           const std::vector<std::size_t>& coords, double h_scale = 1e-5) {
    double worst = 0.0;
    for (std::size_t idx : coords) {
        const double saved = theta[idx];
        const double h = h_scale * std::max(1.0, std::abs(saved));
        theta[idx] = saved + h;
        const double f_plus = eval();
        theta[idx] = saved - h;
        const double f_minus = eval();
        theta[idx] = saved;
        const double numeric = (f_plus - f_minus) / (2.0 * h);
        const double denom = std::max({std::abs(numeric), std::abs(analytic[idx]), 1e-6});
        worst = std::max(worst, std::abs(numeric - analytic[idx]) / denom);
    }
    return worst;
}

}  // namespace oracles
