#pragma once

// Dialogue acts: the input meaning representation. A DA is an ordered list
// of typed items (da_type, slot?, value?). Multiple acts joined by `&` in the
// string form flatten into one item list, each item keeping its own type.
//
// String grammar:
//   da        := act ("&" act)*
//   act       := da_type "(" [item ("," item)*] ")"
//   item      := slot [ "=" value ]
//   value     := bare token | "quoted string" | 'quoted string'
//
// Serialization always double-quotes values containing spaces, commas or
// quotes, and groups consecutive items of equal type into one act.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "csnlg/util.hpp"

namespace csnlg {

inline const std::string kDontCare = "dont_care";

// Closed inventories of DA types and slots, plus per-slot behavior flags.
struct Registry {
    std::set<std::string> da_types;
    std::set<std::string> slots;
    std::set<std::string> delex_slots;           // slots whose values get placeholders
    std::set<std::string> case_sensitive_slots;  // surface matching respects case
    bool abstract_dont_care = false;             // treat dont_care like any other value in signatures

    bool has_da_type(const std::string& t) const { return da_types.count(t) > 0; }
    bool has_slot(const std::string& s) const { return slots.count(s) > 0; }
    bool is_delex_slot(const std::string& s) const { return delex_slots.count(s) > 0; }

    // Plain key-list format, one entry per line:
    //   da_type <name>
    //   slot <name> [delex|keep] [cs|ci]
    //   option abstract_dont_care
    static Registry parse(const std::string& text) {
        Registry reg;
        std::size_t lineno = 0;
        for (const auto& raw : split(text, '\n')) {
            ++lineno;
            std::string line = trim(raw);
            if (line.empty() || line[0] == '#') continue;
            auto fields = tokenize(line);
            if (fields[0] == "option" && fields.size() == 2 && fields[1] == "abstract_dont_care") {
                reg.abstract_dont_care = true;
            } else if (fields[0] == "da_type" && fields.size() == 2) {
                reg.da_types.insert(fields[1]);
            } else if (fields[0] == "slot" && fields.size() >= 2) {
                reg.slots.insert(fields[1]);
                bool delex = true;
                for (std::size_t i = 2; i < fields.size(); ++i) {
                    if (fields[i] == "keep") delex = false;
                    else if (fields[i] == "delex") delex = true;
                    else if (fields[i] == "cs") reg.case_sensitive_slots.insert(fields[1]);
                    else if (fields[i] == "ci") { /* default */ }
                    else throw DataError("registry line " + std::to_string(lineno) +
                                         ": unknown slot flag '" + fields[i] + "'");
                }
                if (delex) reg.delex_slots.insert(fields[1]);
            } else {
                throw DataError("registry line " + std::to_string(lineno) + ": cannot parse '" + line + "'");
            }
        }
        return reg;
    }

    static Registry load(const std::string& path) { return parse(read_file(path)); }
};

struct DAItem {
    std::string da_type;
    std::optional<std::string> slot;
    std::optional<std::string> value;

    bool operator==(const DAItem&) const = default;
};

struct DialogueAct {
    std::vector<DAItem> items;

    bool operator==(const DialogueAct&) const = default;
    bool empty() const { return items.empty(); }
};

// Canonical string of a DA with delexicalizable values abstracted away; equal
// for two DAs iff they differ only in values of delexicalized slots.
struct DASignature {
    std::string text;

    bool operator==(const DASignature&) const = default;
    auto operator<=>(const DASignature&) const = default;
};

namespace detail {

inline bool needs_quoting(const std::string& v) {
    return v.empty() ||
           v.find_first_of(" ,()&=\"'") != std::string::npos;
}

inline std::string quote_value(const std::string& v) {
    if (!needs_quoting(v)) return v;
    std::string out = "\"";
    for (char c : v) {
        if (c == '"') out += '\\';
        out += c;
    }
    out += '"';
    return out;
}

}  // namespace detail

// A value is delexicalizable when its slot is registered for delexicalization
// and the value is a concrete one (dont_care and slotless items are not).
inline bool is_delexicalizable(const DAItem& item, const Registry& reg) {
    return item.slot && item.value && reg.is_delex_slot(*item.slot) && *item.value != kDontCare;
}

inline std::string placeholder_for(const std::string& slot) { return "X-" + slot; }

inline bool is_placeholder(const std::string& token) { return starts_with(token, "X-"); }

inline std::optional<std::string> placeholder_slot(const std::string& token) {
    if (!is_placeholder(token)) return std::nullopt;
    return token.substr(2);
}

class DAParser {
public:
    DAParser(std::string_view text, const Registry* reg) : s_(text), reg_(reg) {}

    DialogueAct parse() {
        DialogueAct da;
        parse_act(da);
        skip_ws();
        while (pos_ < s_.size() && s_[pos_] == '&') {
            ++pos_;
            parse_act(da);
            skip_ws();
        }
        if (pos_ != s_.size()) fail("unexpected trailing input");
        if (da.items.empty()) fail("empty dialogue act");
        return da;
    }

private:
    void parse_act(DialogueAct& da) {
        skip_ws();
        std::size_t start = pos_;
        std::string type = read_identifier();
        if (type.empty()) fail("expected DA type");
        if (reg_ && !reg_->has_da_type(type))
            throw ParseError("unknown DA type '" + type + "'", start);
        skip_ws();
        expect('(');
        skip_ws();
        if (pos_ < s_.size() && s_[pos_] == ')') {
            ++pos_;
            da.items.push_back({type, std::nullopt, std::nullopt});
            return;
        }
        while (true) {
            DAItem item;
            item.da_type = type;
            std::size_t slot_start = pos_;
            std::string slot = read_identifier();
            if (slot.empty()) fail("expected slot name");
            if (reg_ && !reg_->has_slot(slot))
                throw ParseError("unknown slot '" + slot + "'", slot_start);
            item.slot = slot;
            skip_ws();
            if (pos_ < s_.size() && s_[pos_] == '=') {
                ++pos_;
                skip_ws();
                item.value = read_value();
            }
            da.items.push_back(std::move(item));
            skip_ws();
            if (pos_ < s_.size() && s_[pos_] == ',') {
                ++pos_;
                skip_ws();
                continue;
            }
            expect(')');
            return;
        }
    }

    std::string read_identifier() {
        std::size_t start = pos_;
        if (pos_ < s_.size() && s_[pos_] == '?') ++pos_;  // question acts: ?request, ?confirm, ...
        while (pos_ < s_.size() &&
               (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) {
            ++pos_;
        }
        return std::string(s_.substr(start, pos_ - start));
    }

    std::string read_value() {
        if (pos_ >= s_.size()) fail("expected value");
        char q = s_[pos_];
        if (q == '"' || q == '\'') {
            ++pos_;
            std::string out;
            while (pos_ < s_.size() && s_[pos_] != q) {
                if (s_[pos_] == '\\' && pos_ + 1 < s_.size() && s_[pos_ + 1] == q) ++pos_;
                out += s_[pos_++];
            }
            if (pos_ >= s_.size()) fail("unterminated quoted value");
            ++pos_;
            return out;
        }
        std::size_t start = pos_;
        while (pos_ < s_.size() && s_[pos_] != ',' && s_[pos_] != ')' && s_[pos_] != '&') ++pos_;
        if (pos_ == start) fail("expected value");
        return trim(s_.substr(start, pos_ - start));
    }

    void expect(char c) {
        if (pos_ >= s_.size() || s_[pos_] != c)
            fail(std::string("expected '") + c + "'");
        ++pos_;
    }

    void skip_ws() {
        while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
    }

    [[noreturn]] void fail(const std::string& msg) { throw ParseError(msg, pos_); }

    std::string_view s_;
    const Registry* reg_;
    std::size_t pos_ = 0;
};

inline DialogueAct parse_da(std::string_view text, const Registry& reg) {
    return DAParser(text, &reg).parse();
}

// Registry-free parse, used where the inventory is implicit (tests, tooling).
inline DialogueAct parse_da(std::string_view text) {
    return DAParser(text, nullptr).parse();
}

inline std::string serialize_da(const DialogueAct& da) {
    if (da.items.empty()) throw DataError("cannot serialize an empty dialogue act");
    std::string out;
    std::size_t i = 0;
    while (i < da.items.size()) {
        const std::string& type = da.items[i].da_type;
        if (!out.empty()) out += '&';
        out += type;
        out += '(';
        bool first = true;
        while (i < da.items.size() && da.items[i].da_type == type) {
            const DAItem& item = da.items[i];
            if (!item.slot && !first)
                break;  // a slotless item always opens its own act
            if (!first) out += ',';
            if (item.slot) {
                out += *item.slot;
                if (item.value) {
                    out += '=';
                    out += detail::quote_value(*item.value);
                }
            }
            first = false;
            ++i;
            if (!item.slot) break;
        }
        out += ')';
    }
    return out;
}

// Ordered (slot, original value) substitutions; slots may repeat (e.g. the
// two alternatives of a ?select act).
using Substitutions = std::vector<std::pair<std::string, std::string>>;

inline std::pair<DialogueAct, Substitutions> delexicalize_da(const DialogueAct& da, const Registry& reg) {
    DialogueAct out = da;
    Substitutions subs;
    for (auto& item : out.items) {
        if (is_delexicalizable(item, reg)) {
            subs.emplace_back(*item.slot, *item.value);
            item.value = placeholder_for(*item.slot);
        }
    }
    return {out, subs};
}

inline DASignature da_signature(const DialogueAct& da, const Registry& reg) {
    DialogueAct delexed = delexicalize_da(da, reg).first;
    if (reg.abstract_dont_care) {
        for (auto& item : delexed.items)
            if (item.slot && item.value && *item.value == kDontCare && reg.is_delex_slot(*item.slot))
                item.value = placeholder_for(*item.slot);
    }
    return DASignature{serialize_da(delexed)};
}

// One triple per item; slotless items carry void markers. DA type repeats for
// each slot-value pair of its act.
struct DATriple {
    std::string da_type;
    std::string slot;   // empty marker when the act has no slot
    std::string value;  // empty marker when the item has no value

    bool operator==(const DATriple&) const = default;
};

inline const std::string kVoidMarker = "<void>";

enum class TripleMode { Delexicalized, Lexicalized };

inline std::vector<DATriple> da_to_triples(const DialogueAct& da, const Registry& reg,
                                           TripleMode mode = TripleMode::Delexicalized) {
    const DialogueAct* src = &da;
    DialogueAct delexed;
    if (mode == TripleMode::Delexicalized) {
        delexed = delexicalize_da(da, reg).first;
        src = &delexed;
    }
    std::vector<DATriple> out;
    out.reserve(src->items.size());
    for (const auto& item : src->items) {
        out.push_back({item.da_type,
                       item.slot ? *item.slot : kVoidMarker,
                       item.value ? *item.value : kVoidMarker});
    }
    return out;
}

}  // namespace csnlg
