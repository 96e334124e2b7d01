#pragma once

// Word-overlap evaluation metrics (BLEU, NIST, ROUGE-L, METEOR restricted to
// exact matches, CIDEr), the slot error rate and pairwise bootstrap
// resampling. Corpus scores follow the conventions of the usual reference
// tools: BLEU-4 with brevity penalty and no smoothing, NIST with
// information-weighted n-grams (n <= 5), ROUGE-L as an LCS F-measure with
// beta = 1.2, CIDEr as min-clipped tf-idf cosine over 1..4-grams with a
// Gaussian length penalty (sigma = 6) scaled by 10.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "csnlg/da.hpp"
#include "csnlg/util.hpp"

namespace csnlg {

struct EvalPair {
    std::vector<std::string> hyp;
    std::vector<std::vector<std::string>> refs;  // usually a single reference
};

namespace detail {

using NGramCounts = std::map<std::vector<std::string>, long>;

inline NGramCounts ngram_counts(const std::vector<std::string>& toks, std::size_t n) {
    NGramCounts out;
    if (toks.size() < n) return out;
    for (std::size_t i = 0; i + n <= toks.size(); ++i)
        out[std::vector<std::string>(toks.begin() + i, toks.begin() + i + n)] += 1;
    return out;
}

inline void require_nonempty(const std::vector<EvalPair>& pairs, const char* what) {
    if (pairs.empty()) throw DataError(std::string(what) + " over an empty corpus");
    for (const auto& p : pairs)
        if (p.refs.empty()) throw DataError(std::string(what) + ": pair without references");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// BLEU

// Corpus BLEU-4, percentage. No smoothing: a zero n-gram precision zeroes the
// score. Reference length uses the closest reference (ties favor the shorter).
inline double corpus_bleu(const std::vector<EvalPair>& pairs, std::size_t max_n = 4) {
    detail::require_nonempty(pairs, "BLEU");
    std::vector<double> matched(max_n, 0.0), total(max_n, 0.0);
    double hyp_len = 0.0, ref_len = 0.0;
    for (const auto& pair : pairs) {
        hyp_len += static_cast<double>(pair.hyp.size());
        std::size_t best_ref = pair.refs[0].size();
        for (const auto& r : pair.refs) {
            auto diff = [&](std::size_t len) {
                return std::llabs(static_cast<long long>(len) - static_cast<long long>(pair.hyp.size()));
            };
            if (diff(r.size()) < diff(best_ref) || (diff(r.size()) == diff(best_ref) && r.size() < best_ref))
                best_ref = r.size();
        }
        ref_len += static_cast<double>(best_ref);
        for (std::size_t n = 1; n <= max_n; ++n) {
            auto hyp_counts = detail::ngram_counts(pair.hyp, n);
            detail::NGramCounts clip;
            for (const auto& r : pair.refs) {
                for (const auto& [gram, cnt] : detail::ngram_counts(r, n)) {
                    auto& c = clip[gram];
                    c = std::max(c, cnt);
                }
            }
            for (const auto& [gram, cnt] : hyp_counts) {
                total[n - 1] += static_cast<double>(cnt);
                auto it = clip.find(gram);
                if (it != clip.end()) matched[n - 1] += static_cast<double>(std::min(cnt, it->second));
            }
        }
    }
    double log_prec = 0.0;
    for (std::size_t n = 0; n < max_n; ++n) {
        if (matched[n] <= 0.0 || total[n] <= 0.0) return 0.0;
        log_prec += std::log(matched[n] / total[n]);
    }
    double bp = hyp_len >= ref_len ? 1.0 : std::exp(1.0 - ref_len / std::max(hyp_len, 1.0));
    if (hyp_len <= 0.0) return 0.0;
    return 100.0 * bp * std::exp(log_prec / static_cast<double>(max_n));
}

// Smoothed sentence BLEU for per-instance score dumps (add-one on n >= 2).
inline double sentence_bleu(const std::vector<std::string>& hyp,
                            const std::vector<std::vector<std::string>>& refs, std::size_t max_n = 4) {
    if (refs.empty()) throw DataError("sentence BLEU without references");
    double log_prec = 0.0;
    for (std::size_t n = 1; n <= max_n; ++n) {
        auto hyp_counts = detail::ngram_counts(hyp, n);
        detail::NGramCounts clip;
        for (const auto& r : refs)
            for (const auto& [gram, cnt] : detail::ngram_counts(r, n)) {
                auto& c = clip[gram];
                c = std::max(c, cnt);
            }
        double matched = 0.0, total = 0.0;
        for (const auto& [gram, cnt] : hyp_counts) {
            total += static_cast<double>(cnt);
            auto it = clip.find(gram);
            if (it != clip.end()) matched += static_cast<double>(std::min(cnt, it->second));
        }
        if (n >= 2) {
            matched += 1.0;
            total += 1.0;
        }
        if (matched <= 0.0 || total <= 0.0) return 0.0;
        log_prec += std::log(matched / total);
    }
    std::size_t best_ref = refs[0].size();
    for (const auto& r : refs) {
        auto diff = [&](std::size_t len) {
            return std::llabs(static_cast<long long>(len) - static_cast<long long>(hyp.size()));
        };
        if (diff(r.size()) < diff(best_ref) || (diff(r.size()) == diff(best_ref) && r.size() < best_ref))
            best_ref = r.size();
    }
    double c = static_cast<double>(hyp.size()), r = static_cast<double>(best_ref);
    double bp = c >= r ? 1.0 : std::exp(1.0 - r / std::max(c, 1.0));
    return 100.0 * bp * std::exp(log_prec / static_cast<double>(max_n));
}

// ---------------------------------------------------------------------------
// NIST

// Information-weighted n-gram co-occurrence (n <= 5) with the NIST brevity
// penalty. Information weights come from reference-corpus counts.
inline double corpus_nist(const std::vector<EvalPair>& pairs, std::size_t max_n = 5) {
    detail::require_nonempty(pairs, "NIST");

    // reference n-gram counts over the whole corpus, n = 0..max_n
    std::vector<detail::NGramCounts> ref_counts(max_n + 1);
    double ref_token_total = 0.0;
    for (const auto& pair : pairs) {
        for (const auto& r : pair.refs) {
            ref_token_total += static_cast<double>(r.size());
            for (std::size_t n = 1; n <= max_n; ++n)
                for (const auto& [gram, cnt] : detail::ngram_counts(r, n)) ref_counts[n][gram] += cnt;
        }
    }
    auto info = [&](const std::vector<std::string>& gram) {
        std::size_t n = gram.size();
        auto it = ref_counts[n].find(gram);
        if (it == ref_counts[n].end()) return 0.0;
        double denom = static_cast<double>(it->second);
        double numer;
        if (n == 1) {
            numer = ref_token_total;
        } else {
            std::vector<std::string> prefix(gram.begin(), gram.end() - 1);
            auto pit = ref_counts[n - 1].find(prefix);
            numer = pit == ref_counts[n - 1].end() ? denom : static_cast<double>(pit->second);
        }
        if (numer <= 0.0 || denom <= 0.0) return 0.0;
        return std::log2(numer / denom);
    };

    double score = 0.0;
    double hyp_len = 0.0, ref_len = 0.0;
    std::vector<double> info_sum(max_n + 1, 0.0), hyp_ngrams(max_n + 1, 0.0);
    for (const auto& pair : pairs) {
        hyp_len += static_cast<double>(pair.hyp.size());
        double avg_ref = 0.0;
        for (const auto& r : pair.refs) avg_ref += static_cast<double>(r.size());
        ref_len += avg_ref / static_cast<double>(pair.refs.size());
        for (std::size_t n = 1; n <= max_n; ++n) {
            auto hyp_counts = detail::ngram_counts(pair.hyp, n);
            detail::NGramCounts clip;
            for (const auto& r : pair.refs)
                for (const auto& [gram, cnt] : detail::ngram_counts(r, n)) {
                    auto& c = clip[gram];
                    c = std::max(c, cnt);
                }
            for (const auto& [gram, cnt] : hyp_counts) {
                hyp_ngrams[n] += static_cast<double>(cnt);
                auto it = clip.find(gram);
                if (it != clip.end())
                    info_sum[n] += static_cast<double>(std::min(cnt, it->second)) * info(gram);
            }
        }
    }
    for (std::size_t n = 1; n <= max_n; ++n)
        if (hyp_ngrams[n] > 0.0) score += info_sum[n] / hyp_ngrams[n];

    const double beta = std::log(0.5) / std::pow(std::log(2.0 / 3.0), 2.0);
    double ratio = ref_len > 0.0 ? std::min(1.0, hyp_len / ref_len) : 1.0;
    double bp = hyp_len <= 0.0 ? 0.0 : std::exp(beta * std::pow(std::log(ratio), 2.0));
    return score * bp;
}

// ---------------------------------------------------------------------------
// ROUGE-L

namespace detail {

inline std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

}  // namespace detail

// Mean per-pair LCS F-measure (beta = 1.2), percentage.
inline double corpus_rouge_l(const std::vector<EvalPair>& pairs, double beta = 1.2) {
    detail::require_nonempty(pairs, "ROUGE-L");
    double total = 0.0;
    for (const auto& pair : pairs) {
        double best = 0.0;
        for (const auto& r : pair.refs) {
            if (pair.hyp.empty() || r.empty()) continue;
            double lcs = static_cast<double>(detail::lcs_length(pair.hyp, r));
            double prec = lcs / static_cast<double>(pair.hyp.size());
            double rec = lcs / static_cast<double>(r.size());
            if (prec > 0.0 && rec > 0.0)
                best = std::max(best, (1.0 + beta * beta) * prec * rec / (rec + beta * beta * prec));
        }
        total += best;
    }
    return 100.0 * total / static_cast<double>(pairs.size());
}

// ---------------------------------------------------------------------------
// METEOR (exact matches only)
//
// Exact-match unigram alignment with the classic 9:1 recall-weighted harmonic
// mean and a fragmentation penalty of 0.5 * (excess_chunks/matches)^3 over
// corpus-aggregated statistics, where a fully contiguous alignment counts
// zero excess chunks (identical corpora therefore score exactly 100).
// Stemming and synonymy stages are not run (no such resources for Czech),
// which is the documented deviation from the full metric.

namespace detail {

struct MeteorStats {
    double matches = 0.0;
    double chunks = 0.0;
    double hyp_len = 0.0;
    double ref_len = 0.0;
};

// Greedy in-order alignment: walk the hypothesis, match each token to the
// first free reference position, preferring the one that continues the
// current chunk.
inline MeteorStats meteor_align(const std::vector<std::string>& hyp, const std::vector<std::string>& ref) {
    MeteorStats st;
    st.hyp_len = static_cast<double>(hyp.size());
    st.ref_len = static_cast<double>(ref.size());
    std::vector<bool> used(ref.size(), false);
    long prev_ref = -2;
    for (std::size_t i = 0; i < hyp.size(); ++i) {
        long pick = -1;
        // continue the chunk when possible
        if (prev_ref + 1 >= 0 && static_cast<std::size_t>(prev_ref + 1) < ref.size() &&
            !used[prev_ref + 1] && ref[prev_ref + 1] == hyp[i]) {
            pick = prev_ref + 1;
        } else {
            for (std::size_t j = 0; j < ref.size(); ++j) {
                if (!used[j] && ref[j] == hyp[i]) {
                    pick = static_cast<long>(j);
                    break;
                }
            }
        }
        if (pick >= 0) {
            used[pick] = true;
            st.matches += 1.0;
            if (pick != prev_ref + 1) st.chunks += 1.0;
            prev_ref = pick;
        }
    }
    return st;
}

}  // namespace detail

inline double corpus_meteor_exact(const std::vector<EvalPair>& pairs) {
    detail::require_nonempty(pairs, "METEOR");
    detail::MeteorStats agg;
    for (const auto& pair : pairs) {
        detail::MeteorStats best;
        double best_score = -1.0;
        for (const auto& r : pair.refs) {
            auto st = detail::meteor_align(pair.hyp, r);
            double p = st.hyp_len > 0 ? st.matches / st.hyp_len : 0.0;
            double rc = st.ref_len > 0 ? st.matches / st.ref_len : 0.0;
            double f = (p > 0 && rc > 0) ? 10.0 * p * rc / (rc + 9.0 * p) : 0.0;
            if (f > best_score) {
                best_score = f;
                best = st;
            }
        }
        agg.matches += best.matches;
        agg.chunks += best.chunks > 0.0 ? best.chunks - 1.0 : 0.0;  // excess chunks
        agg.hyp_len += best.hyp_len;
        agg.ref_len += best.ref_len;
    }
    if (agg.matches <= 0.0 || agg.hyp_len <= 0.0 || agg.ref_len <= 0.0) return 0.0;
    double p = agg.matches / agg.hyp_len;
    double r = agg.matches / agg.ref_len;
    double fmean = 10.0 * p * r / (r + 9.0 * p);
    double penalty = 0.5 * std::pow(agg.chunks / agg.matches, 3.0);
    return 100.0 * fmean * (1.0 - penalty);
}

// ---------------------------------------------------------------------------
// CIDEr

inline double corpus_cider(const std::vector<EvalPair>& pairs, std::size_t max_n = 4,
                           double sigma = 6.0) {
    detail::require_nonempty(pairs, "CIDEr");
    // document frequency over reference sentences
    std::map<std::vector<std::string>, double> df;
    for (const auto& pair : pairs) {
        std::map<std::vector<std::string>, bool> seen;
        for (const auto& r : pair.refs)
            for (std::size_t n = 1; n <= max_n; ++n)
                for (const auto& [gram, cnt] : detail::ngram_counts(r, n)) seen[gram] = true;
        for (const auto& [gram, _] : seen) df[gram] += 1.0;
    }
    double log_corpus = std::log(static_cast<double>(pairs.size()));

    struct Vec {
        std::vector<std::map<std::vector<std::string>, double>> tfidf;
        std::vector<double> norm;
        double length = 0.0;
    };
    auto vectorize = [&](const std::vector<std::string>& toks) {
        Vec v;
        v.tfidf.resize(max_n);
        v.norm.assign(max_n, 0.0);
        v.length = static_cast<double>(toks.size());
        for (std::size_t n = 1; n <= max_n; ++n) {
            for (const auto& [gram, cnt] : detail::ngram_counts(toks, n)) {
                auto it = df.find(gram);
                double idf = log_corpus - std::log(std::max(1.0, it == df.end() ? 0.0 : it->second));
                double w = static_cast<double>(cnt) * idf;
                v.tfidf[n - 1][gram] = w;
                v.norm[n - 1] += w * w;
            }
            v.norm[n - 1] = std::sqrt(v.norm[n - 1]);
        }
        return v;
    };

    double total = 0.0;
    for (const auto& pair : pairs) {
        Vec hv = vectorize(pair.hyp);
        double pair_score = 0.0;
        for (const auto& r : pair.refs) {
            Vec rv = vectorize(r);
            double delta = hv.length - rv.length;
            double penalty = std::exp(-delta * delta / (2.0 * sigma * sigma));
            double sim_total = 0.0;
            for (std::size_t n = 0; n < max_n; ++n) {
                double val = 0.0;
                for (const auto& [gram, w] : hv.tfidf[n]) {
                    auto it = rv.tfidf[n].find(gram);
                    if (it != rv.tfidf[n].end()) val += std::min(w, it->second) * it->second;
                }
                if (hv.norm[n] > 0.0 && rv.norm[n] > 0.0) val /= hv.norm[n] * rv.norm[n];
                sim_total += val * penalty;
            }
            pair_score += sim_total / static_cast<double>(max_n);
        }
        total += pair_score / static_cast<double>(pair.refs.size());
    }
    return 10.0 * total / static_cast<double>(pairs.size());
}

// ---------------------------------------------------------------------------
// Slot error rate
//
// Compares placeholder occurrences in the pre-lexicalization output against
// the delexicalizable slot occurrences of the input DA. kids_allowed (and any
// other non-delexicalized slot) never enters either side.

struct SerCounts {
    long missing = 0;
    long superfluous = 0;
    long slots = 0;  // delexicalizable slot occurrences in the DA

    SerCounts& operator+=(const SerCounts& o) {
        missing += o.missing;
        superfluous += o.superfluous;
        slots += o.slots;
        return *this;
    }

    double rate() const {
        if (slots == 0) return 0.0;
        return 100.0 * static_cast<double>(missing + superfluous) / static_cast<double>(slots);
    }
};

inline SerCounts ser_counts(const std::vector<std::string>& pre_lex_tokens, const DialogueAct& da,
                            const Registry& reg) {
    std::map<std::string, long> expected, produced;
    SerCounts out;
    for (const auto& item : da.items) {
        if (is_delexicalizable(item, reg)) {
            expected[*item.slot] += 1;
            out.slots += 1;
        }
    }
    for (const auto& tok : pre_lex_tokens) {
        auto slot = placeholder_slot(tok);
        if (slot && reg.is_delex_slot(*slot)) produced[*slot] += 1;
    }
    for (const auto& [slot, n] : expected) {
        long have = produced.count(slot) ? produced.at(slot) : 0;
        if (n > have) out.missing += n - have;
    }
    for (const auto& [slot, n] : produced) {
        long want = expected.count(slot) ? expected.at(slot) : 0;
        if (n > want) out.superfluous += n - want;
    }
    return out;
}

inline double ser(const std::vector<std::string>& pre_lex_tokens, const DialogueAct& da,
                  const Registry& reg) {
    return ser_counts(pre_lex_tokens, da, reg).rate();
}

// Corpus SER, both as ratio of totals and as mean of per-instance rates.
struct SerReport {
    SerCounts totals;
    double corpus_rate = 0.0;        // (sum missing+superfluous) / (sum slots)
    double instance_avg_rate = 0.0;  // mean of per-instance rates
};

inline SerReport corpus_ser(const std::vector<std::vector<std::string>>& outputs,
                            const std::vector<DialogueAct>& das, const Registry& reg) {
    if (outputs.size() != das.size()) throw DataError("SER: output/DA count mismatch");
    SerReport rep;
    double rate_sum = 0.0;
    for (std::size_t i = 0; i < outputs.size(); ++i) {
        auto c = ser_counts(outputs[i], das[i], reg);
        rep.totals += c;
        rate_sum += c.rate();
    }
    rep.corpus_rate = rep.totals.rate();
    rep.instance_avg_rate = outputs.empty() ? 0.0 : rate_sum / static_cast<double>(outputs.size());
    return rep;
}

// ---------------------------------------------------------------------------
// Bootstrap significance

// Pairwise bootstrap resampling over per-instance scores. Returns the
// fraction of resamples in which system B's mean reaches system A's; exact
// ties count half, so identical systems land at 0.5.
inline double bootstrap_test(const std::vector<double>& scores_a, const std::vector<double>& scores_b,
                             std::size_t resamples, std::uint64_t seed) {
    if (scores_a.size() != scores_b.size())
        throw DataError("bootstrap: per-instance score lists differ in length");
    if (scores_a.empty()) throw DataError("bootstrap over empty score lists");
    Rng rng(seed);
    double wins_b = 0.0;
    for (std::size_t r = 0; r < resamples; ++r) {
        double sum_a = 0.0, sum_b = 0.0;
        for (std::size_t i = 0; i < scores_a.size(); ++i) {
            std::size_t k = rng.index(scores_a.size());
            sum_a += scores_a[k];
            sum_b += scores_b[k];
        }
        if (sum_b > sum_a) wins_b += 1.0;
        else if (sum_b == sum_a) wins_b += 0.5;
    }
    return wins_b / static_cast<double>(resamples);
}

// ---------------------------------------------------------------------------
// Report

struct MetricReport {
    double bleu = 0.0;
    double nist = 0.0;
    double meteor = 0.0;
    double rouge_l = 0.0;
    double cider = 0.0;
    double ser_corpus = 0.0;
    double ser_instance_avg = 0.0;
    std::size_t pairs = 0;

    std::string table() const {
        char buf[256];
        std::snprintf(buf, sizeof(buf),
                      "BLEU     %8.2f\nNIST     %8.4f\nMETEOR   %8.2f\nROUGE-L  %8.2f\n"
                      "CIDEr    %8.4f\nSER      %8.2f (corpus)  %.2f (instance avg)\npairs    %8zu\n",
                      bleu, nist, meteor, rouge_l, cider, ser_corpus, ser_instance_avg, pairs);
        return buf;
    }
};

inline MetricReport evaluate_outputs(const std::vector<EvalPair>& pairs,
                                     const std::vector<std::vector<std::string>>& pre_lex_outputs,
                                     const std::vector<DialogueAct>& das, const Registry& reg) {
    MetricReport rep;
    rep.pairs = pairs.size();
    rep.bleu = corpus_bleu(pairs);
    rep.nist = corpus_nist(pairs);
    rep.meteor = corpus_meteor_exact(pairs);
    rep.rouge_l = corpus_rouge_l(pairs);
    rep.cider = corpus_cider(pairs);
    if (!pre_lex_outputs.empty()) {
        auto s = corpus_ser(pre_lex_outputs, das, reg);
        rep.ser_corpus = s.corpus_rate;
        rep.ser_instance_avg = s.instance_avg_rate;
    }
    return rep;
}

}  // namespace csnlg
