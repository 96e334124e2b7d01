#pragma once

// Text delexicalization against a DA and form lexicon, the corpus consistency
// check, and relexicalization of placeholder texts with new values.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "csnlg/da.hpp"
#include "csnlg/morph.hpp"
#include "csnlg/util.hpp"

namespace csnlg {

// One dataset row. `lemmas` is the delexicalized lemma sequence (aligned to
// delex_text); `tags` aligns to the surface tokens, `delex_tags` to
// delex_text. Tag fields may be empty when the source corpus is untagged.
struct Instance {
    std::string da_string;
    DialogueAct da;
    std::vector<std::string> text;
    std::vector<std::string> delex_text;
    std::vector<std::string> lemmas;
    std::vector<std::string> tags;
    std::vector<std::string> delex_tags;
    std::string signature;

    struct Match {
        std::string slot;
        std::string value;
        SurfaceForm form;     // lexicon form that matched (tag included)
        std::size_t pos;      // token offset in text
        std::size_t len;      // span length in text tokens
        std::size_t delex_pos;  // token offset of the placeholder in delex_text
    };
    std::vector<Match> matches;
};

namespace detail {

// Candidate forms for matching/substitution. Numeral values outside the
// lexicon get a single verbatim pseudo-form with a wildcard tag.
inline std::vector<SurfaceForm> substitution_forms(const FormLexicon& lex, const std::string& slot,
                                                   const std::string& value) {
    const auto& forms = lex.forms_for(slot, value);
    if (!forms.empty()) return forms;
    if (is_numeral(value)) return {SurfaceForm{value, value, MorphTag::wildcard(), 0}};
    return {};
}

inline bool tokens_equal(const std::string& a, const std::string& b, bool case_sensitive) {
    if (case_sensitive) return a == b;
    return utf8_lower(a) == utf8_lower(b);
}

}  // namespace detail

struct DelexResult {
    std::vector<std::string> delex_text;
    std::vector<Instance::Match> matches;
    std::vector<std::string> missing;         // slots of unmatched delexicalizable occurrences, DA order
    std::vector<std::string> missing_values;  // their values, parallel to `missing`
    bool ambiguous_span = false;              // a span matched occurrences of two different slots
};

// Greedy longest-match left-to-right scan. Each delexicalizable DA occurrence
// is consumed at most once; among equal-length matches at a position, the
// occurrence earlier in the DA wins.
inline DelexResult delexicalize_text(const std::vector<std::string>& tokens, const DialogueAct& da,
                                     const FormLexicon& lex, const Registry& reg) {
    struct Occurrence {
        std::string slot;
        std::string value;
        std::vector<std::pair<SurfaceForm, std::vector<std::string>>> forms;  // form + its tokens
        bool consumed = false;
        bool case_sensitive = false;
    };
    std::vector<Occurrence> occs;
    for (const auto& item : da.items) {
        if (!is_delexicalizable(item, reg)) continue;
        Occurrence occ;
        occ.slot = *item.slot;
        occ.value = *item.value;
        occ.case_sensitive = reg.case_sensitive_slots.count(occ.slot) > 0;
        for (const auto& f : detail::substitution_forms(lex, occ.slot, occ.value))
            occ.forms.emplace_back(f, tokenize(f.form));
        occs.push_back(std::move(occ));
    }

    DelexResult res;
    std::size_t i = 0;
    while (i < tokens.size()) {
        // per occurrence: longest form, preferring exact-case matches; across
        // occurrences: longest span, earliest DA occurrence on ties
        std::size_t best_len = 0;
        std::size_t best_occ = occs.size();
        const SurfaceForm* best_form = nullptr;
        bool tie_between_slots = false;
        for (std::size_t k = 0; k < occs.size(); ++k) {
            auto& occ = occs[k];
            if (occ.consumed) continue;
            std::size_t occ_len = 0;
            bool occ_exact = false;
            const SurfaceForm* occ_form = nullptr;
            for (const auto& [form, ftoks] : occ.forms) {
                if (ftoks.empty() || i + ftoks.size() > tokens.size()) continue;
                bool folded_ok = true, exact_ok = true;
                for (std::size_t t = 0; t < ftoks.size(); ++t) {
                    if (tokens[i + t] != ftoks[t]) exact_ok = false;
                    if (!detail::tokens_equal(tokens[i + t], ftoks[t], occ.case_sensitive)) {
                        folded_ok = false;
                        break;
                    }
                }
                if (!folded_ok) continue;
                if (ftoks.size() > occ_len || (ftoks.size() == occ_len && exact_ok && !occ_exact)) {
                    occ_len = ftoks.size();
                    occ_exact = exact_ok;
                    occ_form = &form;
                }
            }
            if (occ_form == nullptr) continue;
            if (occ_len > best_len) {
                best_len = occ_len;
                best_occ = k;
                best_form = occ_form;
                tie_between_slots = false;
            } else if (occ_len == best_len && occs[best_occ].slot != occ.slot) {
                tie_between_slots = true;  // DA-order tie-break applies
            }
        }
        if (best_len > 0) {
            auto& occ = occs[best_occ];
            res.matches.push_back({occ.slot, occ.value, *best_form, i, best_len, res.delex_text.size()});
            res.delex_text.push_back(placeholder_for(occ.slot));
            occ.consumed = true;
            res.ambiguous_span = res.ambiguous_span || tie_between_slots;
            i += best_len;
        } else {
            res.delex_text.push_back(tokens[i]);
            ++i;
        }
    }
    for (const auto& occ : occs) {
        if (!occ.consumed) {
            res.missing.push_back(occ.slot);
            res.missing_values.push_back(occ.value);
        }
    }
    return res;
}

// Collapse matched spans in per-token lemma/tag sequences to the placeholder
// positions of delex_text. Single-token spans keep the corpus tag (it carries
// the in-context case); multiword spans take the lexicon form's tag.
inline void apply_delex_alignment(const std::vector<std::string>& tokens,
                                  const std::vector<std::string>& token_lemmas,
                                  const std::vector<std::string>& token_tags,
                                  const std::vector<Instance::Match>& matches,
                                  std::vector<std::string>& out_lemmas,
                                  std::vector<std::string>& out_tags) {
    out_lemmas.clear();
    out_tags.clear();
    bool have_lemmas = token_lemmas.size() == tokens.size();
    bool have_tags = token_tags.size() == tokens.size();
    std::size_t next_match = 0;
    std::size_t i = 0;
    while (i < tokens.size()) {
        if (next_match < matches.size() && matches[next_match].pos == i) {
            const auto& m = matches[next_match];
            out_lemmas.push_back(placeholder_for(m.slot));
            if (m.len == 1 && have_tags) out_tags.push_back(token_tags[i]);
            else out_tags.push_back(m.form.tag.str());
            i += m.len;
            ++next_match;
        } else {
            out_lemmas.push_back(have_lemmas ? token_lemmas[i] : tokens[i]);
            out_tags.push_back(have_tags ? token_tags[i] : MorphTag::wildcard().str());
            ++i;
        }
    }
}

// Rough-morphology pattern: case and number copied from the replaced form's
// tag, everything else wildcarded.
inline MorphTag rough_morph_pattern(const MorphTag& original) {
    MorphTag p = MorphTag::wildcard();
    p.positions[3] = original.positions[3];  // number
    p.positions[4] = original.positions[4];  // case
    return p;
}

// Replace placeholders with surface forms. `assignment` is an ordered list of
// (slot, value); each placeholder consumes the first unused pair of its slot.
// `tag_hints`, when given, is indexed by placeholder ordinal (0-based, left to
// right); a hint applies the filter_forms backoff, otherwise the first lexicon
// form is used. Multiword forms expand to multiple tokens.
inline std::vector<std::string> relexicalize(const std::vector<std::string>& delex_tokens,
                                             const Substitutions& assignment, const FormLexicon& lex,
                                             const std::vector<std::optional<MorphTag>>* tag_hints = nullptr) {
    std::vector<bool> used(assignment.size(), false);
    std::vector<std::string> out;
    std::size_t ordinal = 0;
    for (const auto& tok : delex_tokens) {
        auto slot = placeholder_slot(tok);
        if (!slot) {
            out.push_back(tok);
            continue;
        }
        std::size_t pick = assignment.size();
        for (std::size_t k = 0; k < assignment.size(); ++k) {
            if (!used[k] && assignment[k].first == *slot) {
                pick = k;
                break;
            }
        }
        if (pick == assignment.size())
            throw DataError("no value assigned for placeholder '" + tok + "'");
        used[pick] = true;
        const std::string& value = assignment[pick].second;
        auto forms = detail::substitution_forms(lex, *slot, value);
        if (forms.empty())
            throw DataError("lexicon has no forms for (" + *slot + ", " + value + ")");
        if (tag_hints && ordinal < tag_hints->size() && (*tag_hints)[ordinal])
            forms = filter_forms(forms, *(*tag_hints)[ordinal]);
        for (auto& piece : tokenize(forms.front().form)) out.push_back(piece);
        ++ordinal;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Consistency check (missing surface-form mentions per instance)

struct ConsistencyReport {
    struct MissingMention {
        std::size_t instance_index;
        std::string da_string;
        std::string slot;
        std::string value;
    };
    std::vector<MissingMention> missing;
    std::map<std::string, std::size_t> missing_per_slot;
    std::size_t instances_checked = 0;
    std::size_t ambiguous_spans = 0;

    bool clean() const { return missing.empty(); }

    std::string summary() const {
        std::string out = std::to_string(instances_checked) + " instances checked, " +
                          std::to_string(missing.size()) + " missing mentions";
        if (ambiguous_spans > 0)
            out += ", " + std::to_string(ambiguous_spans) + " ambiguous spans (DA-order tie-break applied)";
        for (const auto& [slot, n] : missing_per_slot)
            out += "\n  slot " + slot + ": " + std::to_string(n) + " missing";
        return out;
    }
};

inline ConsistencyReport consistency_check(const std::vector<Instance>& instances, const FormLexicon& lex,
                                           const Registry& reg) {
    ConsistencyReport report;
    for (std::size_t idx = 0; idx < instances.size(); ++idx) {
        const auto& inst = instances[idx];
        auto res = delexicalize_text(inst.text, inst.da, lex, reg);
        report.instances_checked++;
        if (res.ambiguous_span) report.ambiguous_spans++;
        for (std::size_t k = 0; k < res.missing.size(); ++k) {
            report.missing.push_back({idx, inst.da_string, res.missing[k], res.missing_values[k]});
            report.missing_per_slot[res.missing[k]]++;
        }
    }
    return report;
}

// Full preparation of one instance: delexicalize, align lemmas/tags, annotate
// the signature. Raw lemma/tag sequences align to text; outputs align per the
// Instance contract.
inline Instance prepare_instance(const std::string& da_string, const DialogueAct& da,
                                 const std::vector<std::string>& text,
                                 const std::vector<std::string>& raw_lemmas,
                                 const std::vector<std::string>& raw_tags, const FormLexicon& lex,
                                 const Registry& reg) {
    Instance inst;
    inst.da_string = da_string;
    inst.da = da;
    inst.text = text;
    inst.tags = raw_tags;
    auto res = delexicalize_text(text, da, lex, reg);
    inst.delex_text = std::move(res.delex_text);
    inst.matches = std::move(res.matches);
    apply_delex_alignment(text, raw_lemmas, raw_tags, inst.matches, inst.lemmas, inst.delex_tags);
    inst.signature = da_signature(da, reg).text;
    return inst;
}

}  // namespace csnlg
