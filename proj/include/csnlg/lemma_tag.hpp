#pragma once

// Interleaved lemma-tag sequences: the generator's second output mode. A
// sequence alternates lemma and tag tokens (l1 t1 l2 t2 ...); realization
// inflects each lemma through the dictionary generator while placeholders
// pass through with their tag kept as a lexicalization hint.

#include <optional>
#include <string>
#include <vector>

#include "csnlg/da.hpp"
#include "csnlg/delex.hpp"
#include "csnlg/morph.hpp"

namespace csnlg {

// Tag tokens are 15 ASCII characters with no lowercase letters; placeholders
// are excluded explicitly (X-good_for_meal is 15 characters long).
inline bool is_tag_token(const std::string& tok) {
    if (tok.size() != kTagLength || is_placeholder(tok)) return false;
    for (unsigned char c : tok) {
        if (c >= 0x80) return false;
        if (c >= 'a' && c <= 'z') return false;
    }
    return true;
}

inline std::vector<std::string> interleave(const std::vector<std::string>& lemmas,
                                           const std::vector<std::string>& tags) {
    if (lemmas.size() != tags.size())
        throw DataError("interleave: " + std::to_string(lemmas.size()) + " lemmas vs " +
                        std::to_string(tags.size()) + " tags");
    std::vector<std::string> out;
    out.reserve(2 * lemmas.size());
    for (std::size_t i = 0; i < lemmas.size(); ++i) {
        out.push_back(lemmas[i]);
        out.push_back(tags[i]);
    }
    return out;
}

struct Deinterleaved {
    std::vector<std::string> lemmas;
    std::vector<std::string> tags;
    std::size_t repairs = 0;  // wildcard tags inserted / stray tags dropped
};

// Inverse of interleave with repair: a lemma without a following tag gets a
// wildcard tag; a tag without a preceding lemma is dropped. Output sequences
// are always parallel.
inline Deinterleaved deinterleave(const std::vector<std::string>& tokens) {
    Deinterleaved out;
    for (const auto& tok : tokens) {
        if (is_tag_token(tok)) {
            if (out.tags.size() < out.lemmas.size()) {
                out.tags.push_back(tok);
            } else {
                ++out.repairs;  // stray tag
            }
        } else {
            if (out.tags.size() < out.lemmas.size()) {
                out.tags.push_back(MorphTag::wildcard().str());
                ++out.repairs;
            }
            out.lemmas.push_back(tok);
        }
    }
    if (out.tags.size() < out.lemmas.size()) {
        out.tags.push_back(MorphTag::wildcard().str());
        ++out.repairs;
    }
    return out;
}

struct RealizedSequence {
    std::vector<std::string> tokens;
    // per token: the generated tag for placeholder positions, empty elsewhere
    std::vector<std::optional<MorphTag>> hints;
};

// Inflect (lemma, tag) pairs through the dictionary; first candidate wins.
// Placeholders pass through untouched, their tags retained as hints. Unknown
// lemmas fall back to the lemma itself.
inline RealizedSequence realize_lemma_tags(const std::vector<std::string>& lemmas,
                                           const std::vector<std::string>& tags,
                                           const MorphDictionary& dict) {
    if (lemmas.size() != tags.size()) throw DataError("realize: lemma/tag length mismatch");
    RealizedSequence out;
    for (std::size_t i = 0; i < lemmas.size(); ++i) {
        std::optional<MorphTag> tag;
        if (tags[i].size() == kTagLength) tag = MorphTag{tags[i]};
        if (is_placeholder(lemmas[i])) {
            out.tokens.push_back(lemmas[i]);
            out.hints.push_back(tag);
            continue;
        }
        auto forms = dict.generate(lemmas[i], tag ? *tag : MorphTag::wildcard());
        out.tokens.push_back(forms.empty() ? lemmas[i] : forms.front());
        out.hints.push_back(std::nullopt);
    }
    return out;
}

// Corpus-wide dictionary from prepared instances: every aligned (form, lemma,
// tag) token triple, skipping placeholder positions.
inline MorphDictionary build_dictionary(const std::vector<Instance>& instances) {
    MorphDictionary dict;
    for (const auto& inst : instances) {
        if (inst.tags.size() != inst.text.size() || inst.lemmas.empty()) continue;
        // walk delex alignment: positions outside matches are 1:1
        std::size_t ti = 0;
        std::size_t mi = 0;
        auto matches = inst.matches;
        for (std::size_t di = 0; di < inst.delex_text.size(); ++di) {
            if (mi < matches.size() && matches[mi].delex_pos == di) {
                ti += matches[mi].len;
                ++mi;
                continue;
            }
            if (ti < inst.text.size() && di < inst.lemmas.size() &&
                inst.tags[ti].size() == kTagLength) {
                dict.add(inst.text[ti], inst.lemmas[di], MorphTag{inst.tags[ti]});
            }
            ++ti;
        }
    }
    return dict;
}

}  // namespace csnlg
