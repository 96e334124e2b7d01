#pragma once

// Positional morphological tags, the slot-value surface form lexicon and the
// corpus-derived dictionary generator (lemma + tag -> inflected forms).
//
// Tags are 15-character positional codes; '-' is a wildcard. Position 1 is
// the coarse part-of-speech, 3 gender, 4 number, 5 case.

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "csnlg/util.hpp"

namespace csnlg {

inline constexpr std::size_t kTagLength = 15;

struct MorphTag {
    std::string positions;  // always length 15

    bool operator==(const MorphTag&) const = default;
    auto operator<=>(const MorphTag&) const = default;

    char at(std::size_t pos1based) const { return positions.at(pos1based - 1); }
    char pos() const { return positions[0]; }
    char gender() const { return positions[2]; }
    char number() const { return positions[3]; }
    char grammatical_case() const { return positions[4]; }

    static MorphTag wildcard() { return MorphTag{std::string(kTagLength, '-')}; }

    bool is_wildcard() const { return positions == std::string(kTagLength, '-'); }

    const std::string& str() const { return positions; }
};

inline MorphTag parse_tag(std::string_view s) {
    if (s.size() != kTagLength)
        throw DataError("morphological tag must have " + std::to_string(kTagLength) +
                        " characters, got " + std::to_string(s.size()) + ": '" + std::string(s) + "'");
    for (std::size_t i = 0; i < s.size(); ++i) {
        unsigned char c = static_cast<unsigned char>(s[i]);
        if (c < 0x21 || c > 0x7E)
            throw DataError("non-printable character in tag at position " + std::to_string(i + 1));
    }
    return MorphTag{std::string(s)};
}

enum class MatchLevel { Exact, CoarsePos, Any };

// Exact: every non-wildcard position of the pattern equals the candidate.
// CoarsePos: position 1 matches (wildcard pattern position matches anything).
// Any: always true.
inline bool tag_match(const MorphTag& candidate, const MorphTag& pattern, MatchLevel level) {
    switch (level) {
        case MatchLevel::Any:
            return true;
        case MatchLevel::CoarsePos:
            return pattern.pos() == '-' || candidate.pos() == pattern.pos();
        case MatchLevel::Exact:
            for (std::size_t i = 0; i < kTagLength; ++i) {
                if (pattern.positions[i] != '-' && candidate.positions[i] != pattern.positions[i])
                    return false;
            }
            return true;
    }
    return false;
}

struct SurfaceForm {
    std::string form;   // multiword values space-joined into one token
    std::string lemma;
    MorphTag tag;
    long frequency = 0;  // filled from training data

    bool operator==(const SurfaceForm&) const = default;
};

struct SlotValue {
    std::string slot;
    std::string value;

    auto operator<=>(const SlotValue&) const = default;
};

// Inflection inventory: (slot, value) -> surface forms, in file order.
class FormLexicon {
public:
    void add(const std::string& slot, const std::string& value, SurfaceForm form) {
        auto& forms = entries_[{slot, value}];
        for (auto& existing : forms) {
            if (existing.form == form.form && existing.tag == form.tag) {
                existing.frequency += form.frequency;
                return;
            }
        }
        forms.push_back(std::move(form));
    }

    const std::vector<SurfaceForm>& forms_for(const std::string& slot, const std::string& value) const {
        static const std::vector<SurfaceForm> empty;
        auto it = entries_.find({slot, value});
        return it == entries_.end() ? empty : it->second;
    }

    bool has(const std::string& slot, const std::string& value) const {
        return entries_.count({slot, value}) > 0;
    }

    const std::map<SlotValue, std::vector<SurfaceForm>>& entries() const { return entries_; }

    std::vector<std::string> values_for_slot(const std::string& slot) const {
        std::vector<std::string> out;
        for (const auto& [key, forms] : entries_)
            if (key.slot == slot) out.push_back(key.value);
        return out;
    }

    void bump_frequency(const std::string& slot, const std::string& value,
                        const std::string& form, const MorphTag& tag, long by = 1) {
        auto it = entries_.find({slot, value});
        if (it == entries_.end()) return;
        for (auto& f : it->second)
            if (f.form == form && f.tag == tag) { f.frequency += by; return; }
    }

    // Tab-separated columns: slot, value, form, lemma, tag[, frequency].
    // Lines starting with '#' are comments.
    static FormLexicon parse(const std::string& text) {
        FormLexicon lex;
        std::size_t lineno = 0;
        for (const auto& raw : split(text, '\n')) {
            ++lineno;
            std::string line = raw;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (trim(line).empty() || line[0] == '#') continue;
            auto cols = split(line, '\t');
            if (cols.size() != 5 && cols.size() != 6)
                throw DataError("lexicon line " + std::to_string(lineno) +
                                ": expected 5 or 6 tab-separated columns, got " + std::to_string(cols.size()));
            SurfaceForm f;
            f.form = cols[2];
            f.lemma = cols[3];
            try {
                f.tag = parse_tag(cols[4]);
            } catch (const DataError& e) {
                throw DataError("lexicon line " + std::to_string(lineno) + ": " + e.what());
            }
            if (cols.size() == 6) f.frequency = std::stol(cols[5]);
            if (f.form.empty()) throw DataError("lexicon line " + std::to_string(lineno) + ": empty form");
            lex.add(cols[0], cols[1], std::move(f));
        }
        return lex;
    }

    static FormLexicon load(const std::string& path) { return parse(read_file(path)); }

    std::string serialize() const {
        std::string out = "# slot\tvalue\tform\tlemma\ttag\tfrequency\n";
        for (const auto& [key, forms] : entries_) {
            for (const auto& f : forms) {
                out += key.slot + '\t' + key.value + '\t' + f.form + '\t' + f.lemma + '\t' +
                       f.tag.str() + '\t' + std::to_string(f.frequency) + '\n';
            }
        }
        return out;
    }

private:
    std::map<SlotValue, std::vector<SurfaceForm>> entries_;
};

// Exact matches if any, else coarse part-of-speech matches, else everything.
// Never empty for non-empty input.
inline std::vector<SurfaceForm> filter_forms(const std::vector<SurfaceForm>& forms, const MorphTag& pattern) {
    std::vector<SurfaceForm> exact, coarse;
    for (const auto& f : forms) {
        if (tag_match(f.tag, pattern, MatchLevel::Exact)) exact.push_back(f);
        if (tag_match(f.tag, pattern, MatchLevel::CoarsePos)) coarse.push_back(f);
    }
    if (!exact.empty()) return exact;
    if (!coarse.empty()) return coarse;
    return forms;
}

// Dictionary-based morphological generator built from aligned corpus triples.
class MorphDictionary {
public:
    struct Entry {
        MorphTag tag;
        std::string form;
        long frequency = 0;
    };

    void add(const std::string& form, const std::string& lemma, const MorphTag& tag, long freq = 1) {
        auto& list = entries_[lemma];
        for (auto& e : list) {
            if (e.form == form && e.tag == tag) {
                e.frequency += freq;
                return;
            }
        }
        list.push_back({tag, form, freq});
    }

    bool has_lemma(const std::string& lemma) const { return entries_.count(lemma) > 0; }

    std::size_t lemma_count() const { return entries_.size(); }

    std::size_t form_count() const {
        std::size_t n = 0;
        for (const auto& [_, list] : entries_) n += list.size();
        return n;
    }

    // Inflected forms for lemma under the pattern, exact-then-coarse-then-all
    // backoff; within a level, most frequent first. Unknown lemmas fall back
    // to the lemma itself.
    std::vector<std::string> generate(const std::string& lemma, const MorphTag& pattern) const {
        auto it = entries_.find(lemma);
        if (it == entries_.end()) return {lemma};
        std::vector<const Entry*> picked;
        for (auto level : {MatchLevel::Exact, MatchLevel::CoarsePos, MatchLevel::Any}) {
            picked.clear();
            for (const auto& e : it->second)
                if (tag_match(e.tag, pattern, level)) picked.push_back(&e);
            if (!picked.empty()) break;
        }
        std::stable_sort(picked.begin(), picked.end(),
                         [](const Entry* a, const Entry* b) { return a->frequency > b->frequency; });
        std::vector<std::string> out;
        for (const Entry* e : picked)
            if (std::find(out.begin(), out.end(), e->form) == out.end()) out.push_back(e->form);
        return out;
    }

    // Persisted in the lexicon row format with a fixed "-" slot/value key.
    std::string serialize() const {
        std::string out = "# slot\tvalue\tform\tlemma\ttag\tfrequency\n";
        for (const auto& [lemma, list] : entries_) {
            for (const auto& e : list)
                out += "-\t-\t" + e.form + '\t' + lemma + '\t' + e.tag.str() + '\t' +
                       std::to_string(e.frequency) + '\n';
        }
        return out;
    }

    static MorphDictionary parse(const std::string& text) {
        MorphDictionary dict;
        std::size_t lineno = 0;
        for (const auto& raw : split(text, '\n')) {
            ++lineno;
            std::string line = raw;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (trim(line).empty() || line[0] == '#') continue;
            auto cols = split(line, '\t');
            if (cols.size() != 5 && cols.size() != 6)
                throw DataError("dictionary line " + std::to_string(lineno) + ": bad column count");
            dict.add(cols[2], cols[3], parse_tag(cols[4]), cols.size() == 6 ? std::stol(cols[5]) : 1);
        }
        return dict;
    }

    static MorphDictionary load(const std::string& path) { return parse(read_file(path)); }

    const std::map<std::string, std::vector<Entry>>& entries() const { return entries_; }

private:
    std::map<std::string, std::vector<Entry>> entries_;
};

// Aligned (form, lemma, tag) rows from the tagged corpus.
struct AlignedRow {
    std::string form;
    std::string lemma;
    std::string tag;
};

inline MorphDictionary ingest_dictionary(const std::vector<AlignedRow>& rows) {
    MorphDictionary dict;
    std::size_t lineno = 0;
    for (const auto& row : rows) {
        ++lineno;
        if (row.form.empty() || row.lemma.empty())
            throw DataError("misaligned dictionary row at line " + std::to_string(lineno));
        MorphTag tag;
        try {
            tag = parse_tag(row.tag);
        } catch (const DataError& e) {
            throw DataError("misaligned dictionary row at line " + std::to_string(lineno) + ": " + e.what());
        }
        dict.add(row.form, row.lemma, tag);
    }
    return dict;
}

}  // namespace csnlg
