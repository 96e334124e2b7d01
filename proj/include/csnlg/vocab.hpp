#pragma once

// Token vocabulary with frequency cutoff and reserved markers. Ordering is
// deterministic: specials first, then tokens by descending frequency and
// lexicographic tie-break.

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "csnlg/ngram_lm.hpp"  // <s> / </s> / <unk> markers
#include "csnlg/util.hpp"

namespace csnlg {

class Vocab {
public:
    static Vocab build(const std::vector<std::vector<std::string>>& corpus, long min_freq,
                       bool sequence_markers) {
        std::map<std::string, long> freq;
        for (const auto& sent : corpus)
            for (const auto& tok : sent) freq[tok] += 1;
        Vocab v;
        v.push(kUnk);
        if (sequence_markers) {
            v.push(kBos);
            v.push(kEos);
        }
        std::vector<std::pair<long, std::string>> order;
        for (const auto& [tok, f] : freq)
            if (f >= min_freq && tok != kUnk && tok != kBos && tok != kEos) order.push_back({-f, tok});
        std::sort(order.begin(), order.end());
        for (const auto& [negf, tok] : order) v.push(tok);
        return v;
    }

    int id(const std::string& tok) const {
        auto it = index_.find(tok);
        return it == index_.end() ? unk_ : it->second;
    }

    bool contains(const std::string& tok) const { return index_.count(tok) > 0; }

    const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }

    std::vector<int> ids(const std::vector<std::string>& toks) const {
        std::vector<int> out;
        out.reserve(toks.size());
        for (const auto& t : toks) out.push_back(id(t));
        return out;
    }

    std::size_t size() const { return tokens_.size(); }
    int unk() const { return unk_; }
    int bos() const { return bos_; }
    int eos() const { return eos_; }

    nlohmann::json to_json() const { return nlohmann::json(tokens_); }

    static Vocab from_json(const nlohmann::json& j) {
        Vocab v;
        for (const auto& tok : j) v.push(tok.get<std::string>());
        if (v.unk_ < 0) throw DataError("vocabulary without <unk>");
        return v;
    }

private:
    void push(const std::string& tok) {
        if (index_.count(tok)) return;
        int id = static_cast<int>(tokens_.size());
        index_[tok] = id;
        tokens_.push_back(tok);
        if (tok == kUnk) unk_ = id;
        if (tok == kBos) bos_ = id;
        if (tok == kEos) eos_ = id;
    }

    std::vector<std::string> tokens_;
    std::map<std::string, int> index_;
    int unk_ = -1, bos_ = -1, eos_ = -1;
};

}  // namespace csnlg
