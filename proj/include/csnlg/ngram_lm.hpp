#pragma once

// Backoff n-gram language model with interpolated Kneser-Ney smoothing.
// Trained on token sequences; scoring works over the closed vocabulary with
// <unk> for unseen tokens and includes the end-of-sentence transition.
//
// Counts: the top level uses raw n-gram counts, lower levels continuation
// counts (distinct left extensions). Discounts are estimated per level from
// count-of-counts, D = n1/(n1 + 2*n2), falling back to 0.75 where those
// statistics are missing. The unigram level interpolates with 1/V so that
// conditional distributions sum to one exactly.

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "csnlg/util.hpp"

namespace csnlg {

inline const std::string kBos = "<s>";
inline const std::string kEos = "</s>";
inline const std::string kUnk = "<unk>";

class NGramModel {
public:
    int order() const { return order_; }

    static NGramModel train(const std::vector<std::vector<std::string>>& corpus, int order,
                            std::optional<double> fixed_discount = std::nullopt) {
        if (corpus.empty()) throw DataError("cannot train a language model on an empty corpus");
        if (order < 1) throw DataError("language model order must be >= 1");

        NGramModel m;
        m.order_ = order;

        // raw counts per level over windows ending at a real token or </s>
        std::vector<std::unordered_map<std::string, long>> raw(order + 1);
        for (const auto& sent : corpus) {
            std::vector<std::string> padded(order - 1, kBos);
            padded.insert(padded.end(), sent.begin(), sent.end());
            padded.push_back(kEos);
            for (std::size_t i = static_cast<std::size_t>(order) - 1; i < padded.size(); ++i) {
                for (int k = 1; k <= order; ++k) {
                    raw[k][gram_key(padded, i + 1 - k, k)] += 1;
                }
            }
        }

        for (const auto& sent : corpus)
            for (const auto& w : sent) m.vocab_[w] = true;
        m.vocab_[kEos] = true;
        m.vocab_size_ = m.vocab_.size() + 1;  // + <unk>

        // numerator counts: raw at the top, continuation below
        m.levels_.resize(order + 1);
        m.levels_[order].nums = std::move(raw[order]);
        for (int k = order - 1; k >= 1; --k) {
            auto& nums = m.levels_[k].nums;
            for (const auto& [key, cnt] : (k + 1 == order ? m.levels_[order].nums : raw[k + 1])) {
                (void)cnt;
                nums[drop_first(key)] += 1;  // one distinct left extension per (k+1)-gram type
            }
        }

        for (int k = 1; k <= order; ++k) {
            auto& level = m.levels_[k];
            long n1 = 0, n2 = 0;
            for (const auto& [key, cnt] : level.nums) {
                if (cnt == 1) ++n1;
                else if (cnt == 2) ++n2;
            }
            level.discount = fixed_discount ? *fixed_discount
                           : (n1 > 0 && n2 > 0) ? static_cast<double>(n1) / (n1 + 2.0 * n2)
                                                : 0.75;
            for (const auto& [key, cnt] : level.nums) {
                auto& h = level.hists[drop_last(key)];
                h.total += cnt;
                h.distinct += 1;
            }
        }
        return m;
    }

    // p(w | history); history longer than order-1 is truncated, unknown
    // tokens are mapped to <unk>.
    double cond_prob(const std::string& word, const std::vector<std::string>& history) const {
        std::vector<std::string> h;
        std::size_t need = static_cast<std::size_t>(order_ - 1);
        std::size_t start = history.size() > need ? history.size() - need : 0;
        for (std::size_t i = start; i < history.size(); ++i) h.push_back(normalize(history[i]));
        while (h.size() < need) h.insert(h.begin(), kBos);
        return level_prob(order_, h, normalize(word));
    }

    // Natural-log score of the sequence including the </s> transition.
    double log_prob(const std::vector<std::string>& tokens) const {
        std::vector<std::string> h(order_ - 1, kBos);
        double lp = 0.0;
        auto step = [&](const std::string& w) {
            lp += std::log(cond_prob(w, h));
            h.push_back(normalize(w));
            if (h.size() > static_cast<std::size_t>(order_ - 1)) h.erase(h.begin());
            if (order_ == 1) h.clear();
        };
        for (const auto& w : tokens) step(w);
        step(kEos);
        return lp;
    }

    double perplexity(const std::vector<std::vector<std::string>>& corpus) const {
        double lp = 0.0;
        std::size_t events = 0;
        for (const auto& sent : corpus) {
            lp += log_prob(sent);
            events += sent.size() + 1;
        }
        return std::exp(-lp / static_cast<double>(events));
    }

    // Prediction vocabulary: seen words, </s> and <unk>.
    std::vector<std::string> vocabulary() const {
        std::vector<std::string> out;
        for (const auto& [w, _] : vocab_) out.push_back(w);
        out.push_back(kUnk);
        return out;
    }

    // Plain-text listing: one row per gram, tab-separated
    //   level  gram  log-prob  backoff
    // sorted lexicographically within each level. "-" marks an absent column
    // (history-only rows have no prob; leaf grams have no backoff).
    std::string serialize() const {
        std::string out = "ngram-lm\torder=" + std::to_string(order_) +
                          "\tvocab=" + std::to_string(vocab_size_) + "\n";
        for (int k = 1; k <= order_; ++k) {
            std::map<std::string, std::pair<std::string, std::string>> rows;  // gram -> (prob, backoff)
            for (const auto& [key, cnt] : levels_[k].nums) {
                (void)cnt;
                auto h = split_key(drop_last(key));
                double p = level_prob(k, h, last_token(key));
                rows[pretty(key)].first = fmt(std::log(p));
            }
            if (k == 1) {
                double p = level_prob(1, {}, kUnk);
                rows[kUnk].first = fmt(std::log(p));
            }
            if (k < order_) {
                for (const auto& [hkey, h] : levels_[k + 1].hists) {
                    if (h.total <= 0) continue;
                    double lambda = levels_[k + 1].discount * h.distinct / h.total;
                    rows[pretty(hkey)].second = fmt(std::log(lambda));
                }
            }
            for (const auto& [gram, cols] : rows) {
                out += std::to_string(k) + '\t' + gram + '\t' +
                       (cols.first.empty() ? "-" : cols.first) + '\t' +
                       (cols.second.empty() ? "-" : cols.second) + '\n';
            }
        }
        return out;
    }

    static NGramModel parse(const std::string& text) {
        NGramModel m;
        m.loaded_ = true;
        std::size_t lineno = 0;
        for (const auto& line : split(text, '\n')) {
            ++lineno;
            if (trim(line).empty()) continue;
            auto cols = split(line, '\t');
            if (cols[0] == "ngram-lm") {
                for (std::size_t i = 1; i < cols.size(); ++i) {
                    if (starts_with(cols[i], "order=")) m.order_ = std::stoi(cols[i].substr(6));
                    if (starts_with(cols[i], "vocab=")) m.vocab_size_ = std::stoul(cols[i].substr(6));
                }
                continue;
            }
            if (cols.size() != 4) throw DataError("model line " + std::to_string(lineno) + ": bad row");
            std::string key = make_key(tokenize(cols[1]));
            if (cols[2] != "-") m.stored_probs_[key] = std::stod(cols[2]);
            if (cols[3] != "-") m.stored_backoffs_[key] = std::stod(cols[3]);
        }
        if (m.order_ < 1) throw DataError("model file missing header");
        for (const auto& [key, p] : m.stored_probs_) {
            (void)p;
            auto toks = split_key(key);
            if (toks.size() == 1 && toks[0] != kUnk && toks[0] != kBos) m.vocab_[toks[0]] = true;
        }
        return m;
    }

    static NGramModel load(const std::string& path) { return parse(read_file(path)); }
    void save(const std::string& path) const { write_file(path, serialize()); }

private:
    struct HistStat {
        long total = 0;
        long distinct = 0;
    };
    struct Level {
        std::unordered_map<std::string, long> nums;
        std::unordered_map<std::string, HistStat> hists;
        double discount = 0.75;
    };

    static constexpr char kSep = '\x1f';

    static std::string gram_key(const std::vector<std::string>& toks, std::size_t start, std::size_t len) {
        std::string key;
        for (std::size_t i = 0; i < len; ++i) {
            if (i) key += kSep;
            key += toks[start + i];
        }
        return key;
    }

    static std::string make_key(const std::vector<std::string>& toks) {
        return gram_key(toks, 0, toks.size());
    }

    static std::string drop_first(const std::string& key) {
        auto pos = key.find(kSep);
        return pos == std::string::npos ? std::string() : key.substr(pos + 1);
    }

    static std::string drop_last(const std::string& key) {
        auto pos = key.rfind(kSep);
        return pos == std::string::npos ? std::string() : key.substr(0, pos);
    }

    static std::string last_token(const std::string& key) {
        auto pos = key.rfind(kSep);
        return pos == std::string::npos ? key : key.substr(pos + 1);
    }

    static std::vector<std::string> split_key(const std::string& key) {
        if (key.empty()) return {};
        return split(key, kSep);
    }

    static std::string pretty(const std::string& key) {
        std::string out = key;
        for (auto& c : out)
            if (c == kSep) c = ' ';
        return out;
    }

    static std::string fmt(double v) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.12g", v);
        return buf;
    }

    std::string normalize(const std::string& w) const {
        if (w == kBos || w == kEos) return w;
        return vocab_.count(w) ? w : kUnk;
    }

    double level_prob(int k, const std::vector<std::string>& history, const std::string& word) const {
        if (loaded_) return stored_prob(k, history, word);
        if (k == 1) {
            const auto& level = levels_[1];
            auto hit = level.hists.find(std::string());
            double total = hit == level.hists.end() ? 0.0 : static_cast<double>(hit->second.total);
            double distinct = hit == level.hists.end() ? 0.0 : static_cast<double>(hit->second.distinct);
            double uniform = 1.0 / static_cast<double>(vocab_size_);
            if (total <= 0) return uniform;
            auto nit = level.nums.find(word);
            double num = nit == level.nums.end() ? 0.0 : static_cast<double>(nit->second);
            double d = level.discount;
            return std::max(num - d, 0.0) / total + d * distinct / total * uniform;
        }
        const auto& level = levels_[k];
        std::string hkey = make_key(history);
        auto hit = level.hists.find(hkey);
        std::vector<std::string> shorter(history.begin() + 1, history.end());
        if (hit == level.hists.end() || hit->second.total <= 0)
            return level_prob(k - 1, shorter, word);
        std::string gkey = hkey.empty() ? word : hkey + kSep + word;
        auto nit = level.nums.find(gkey);
        double num = nit == level.nums.end() ? 0.0 : static_cast<double>(nit->second);
        double d = level.discount;
        double total = static_cast<double>(hit->second.total);
        double lambda = d * hit->second.distinct / total;
        return std::max(num - d, 0.0) / total + lambda * level_prob(k - 1, shorter, word);
    }

    // ARPA-style query over the resolved listing.
    double stored_prob(int k, const std::vector<std::string>& history, const std::string& word) const {
        std::string hkey = make_key(history);
        std::string gkey = hkey.empty() ? word : hkey + kSep + word;
        auto pit = stored_probs_.find(gkey);
        if (pit != stored_probs_.end()) return std::exp(pit->second);
        if (history.empty()) {
            auto uit = stored_probs_.find(kUnk);
            return uit != stored_probs_.end() ? std::exp(uit->second) : 1e-12;
        }
        std::vector<std::string> shorter(history.begin() + 1, history.end());
        auto bit = stored_backoffs_.find(hkey);
        double lambda = bit != stored_backoffs_.end() ? std::exp(bit->second) : 1.0;
        return lambda * stored_prob(k - 1, shorter, word);
    }

    int order_ = 0;
    std::vector<Level> levels_;
    std::map<std::string, bool> vocab_;
    std::size_t vocab_size_ = 0;
    bool loaded_ = false;
    std::unordered_map<std::string, double> stored_probs_;
    std::unordered_map<std::string, double> stored_backoffs_;
};

// Softmax over log scores with temperature; max-subtracted for stability.
inline std::vector<double> softmax_over_scores(const std::vector<double>& scores, double temperature = 1.0) {
    if (scores.empty()) throw DataError("softmax over an empty score list");
    if (temperature <= 0.0) throw DataError("softmax temperature must be positive");
    double mx = scores.front();
    for (double s : scores) {
        if (!std::isfinite(s)) throw DataError("non-finite score in softmax input");
        mx = std::max(mx, s);
    }
    std::vector<double> out(scores.size());
    double total = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        out[i] = std::exp((scores[i] - mx) / temperature);
        total += out[i];
    }
    for (double& v : out) v /= total;
    return out;
}

}  // namespace csnlg
