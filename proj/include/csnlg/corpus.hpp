#pragma once

// Corpus-level operations: deduplication by delexicalized text, LM-weighted
// expansion back to a target DA distribution, overlap-free train/dev/test
// splitting over DA signatures, and dataset statistics.

#include <algorithm>
#include <array>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "csnlg/dataset.hpp"
#include "csnlg/delex.hpp"
#include "csnlg/ngram_lm.hpp"

namespace csnlg {

// ---------------------------------------------------------------------------
// Deduplication

struct UniqueText {
    std::vector<std::string> delex_text;
    long count = 0;
    std::size_t exemplar = 0;  // index of the first instance carrying this text
};

struct DedupResult {
    // signature -> unique delexicalized texts, first-seen order
    std::map<std::string, std::vector<UniqueText>> groups;

    std::size_t unique_count() const {
        std::size_t n = 0;
        for (const auto& [sig, uniq] : groups) n += uniq.size();
        return n;
    }
};

inline DedupResult deduplicate(const std::vector<Instance>& instances, const Registry& reg) {
    DedupResult res;
    for (std::size_t i = 0; i < instances.size(); ++i) {
        const auto& inst = instances[i];
        std::string sig = inst.signature.empty() ? da_signature(inst.da, reg).text : inst.signature;
        auto& uniq = res.groups[sig];
        std::string key = join(inst.delex_text);
        bool found = false;
        for (auto& u : uniq) {
            if (join(u.delex_text) == key) {
                u.count += 1;
                found = true;
                break;
            }
        }
        if (!found) uniq.push_back({inst.delex_text, 1, i});
    }
    return res;
}

// ---------------------------------------------------------------------------
// Expansion

struct ExpansionResult {
    std::vector<Instance> instances;
    std::vector<std::string> review_lines;  // relexicalized sentences with their DAs
};

namespace detail {

// Random concrete values for the delexicalizable items of `da`, drawn
// uniformly over the lexicon's values per slot. Slots without lexicon values
// (numerals in particular) keep the exemplar's value.
inline DialogueAct randomize_da_values(const DialogueAct& da, const FormLexicon& lex, const Registry& reg,
                                       Rng& rng) {
    DialogueAct out = da;
    for (auto& item : out.items) {
        if (!is_delexicalizable(item, reg)) continue;
        auto values = lex.values_for_slot(*item.slot);
        if (values.empty()) continue;
        item.value = values[rng.index(values.size())];
    }
    return out;
}

inline Substitutions substitutions_of(const DialogueAct& da, const Registry& reg) {
    Substitutions subs;
    for (const auto& item : da.items)
        if (is_delexicalizable(item, reg)) subs.emplace_back(*item.slot, *item.value);
    return subs;
}

}  // namespace detail

// Sample additional copies of the unique texts per signature until each
// signature reaches its target count; copies are relexicalized with randomly
// drawn slot values under rough morphology. Signatures absent from `targets`
// keep their current size. Deterministic for a given seed.
inline ExpansionResult expand(const std::vector<Instance>& instances, const DedupResult& dedup,
                              const std::map<std::string, long>& targets, const NGramModel& lm,
                              const FormLexicon& lex, const Registry& reg, std::uint64_t seed,
                              double temperature = 1.0) {
    ExpansionResult res;
    res.instances = instances;
    Rng base(seed);
    for (const auto& [sig, uniques] : dedup.groups) {
        long current = 0;
        for (const auto& u : uniques) current += u.count;
        auto it = targets.find(sig);
        long target = it == targets.end() ? current : it->second;
        if (target < current)
            throw DataError("expansion target " + std::to_string(target) + " below current count " +
                            std::to_string(current) + " for signature " + sig);
        if (target == current) continue;
        if (uniques.empty()) throw DataError("no unique texts for signature " + sig);

        std::vector<double> scores;
        scores.reserve(uniques.size());
        for (const auto& u : uniques) {
            const Instance& ex = instances[u.exemplar];
            scores.push_back(lm.log_prob(ex.lemmas.empty() ? u.delex_text : ex.lemmas));
        }
        auto probs = softmax_over_scores(scores, temperature);
        std::vector<double> cdf(probs.size());
        double acc = 0.0;
        for (std::size_t i = 0; i < probs.size(); ++i) {
            acc += probs[i];
            cdf[i] = acc;
        }

        Rng rng = base.derive(fnv1a(sig));
        for (long n = 0; n < target - current; ++n) {
            double r = rng.real();
            std::size_t pick = std::lower_bound(cdf.begin(), cdf.end(), r) - cdf.begin();
            if (pick >= uniques.size()) pick = uniques.size() - 1;
            const Instance& ex = res.instances[uniques[pick].exemplar];

            DialogueAct new_da = detail::randomize_da_values(ex.da, lex, reg, rng);
            Substitutions subs = detail::substitutions_of(new_da, reg);

            // rough-morphology hints from the exemplar's matched forms
            std::vector<Instance::Match> ordered = ex.matches;
            std::sort(ordered.begin(), ordered.end(),
                      [](const auto& a, const auto& b) { return a.delex_pos < b.delex_pos; });
            std::vector<std::optional<MorphTag>> hints;
            for (const auto& m : ordered) hints.emplace_back(rough_morph_pattern(m.form.tag));

            Instance copy;
            copy.da = new_da;
            copy.da_string = serialize_da(new_da);
            copy.delex_text = ex.delex_text;
            copy.lemmas = ex.lemmas;
            copy.delex_tags = ex.delex_tags;
            copy.signature = sig;
            copy.text = relexicalize(ex.delex_text, subs, lex, &hints);
            res.instances.push_back(std::move(copy));
            res.review_lines.push_back(serialize_da(new_da) + '\t' + join(res.instances.back().text));
        }
    }
    return res;
}

// ---------------------------------------------------------------------------
// Splitting

enum class Part { Train = 0, Dev = 1, Test = 2 };

inline const char* part_name(Part p) {
    switch (p) {
        case Part::Train: return "train";
        case Part::Dev: return "dev";
        case Part::Test: return "test";
    }
    return "?";
}

struct SplitSpec {
    std::map<std::string, Part> assignment;  // signature -> part
    std::array<std::size_t, 3> instance_counts{0, 0, 0};
    std::array<std::size_t, 3> signature_counts{0, 0, 0};
    std::vector<std::string> warnings;
};

// Signatures whose acts carry no slots at all (goodbyes and the like) have a
// single possible DA and default to the training set.
inline std::set<std::string> default_pinned_signatures(const std::vector<Instance>& instances,
                                                       const Registry& reg,
                                                       const std::set<std::string>& pin_types = {"goodbye",
                                                                                                 "?reqmore"}) {
    std::set<std::string> pinned;
    for (const auto& inst : instances) {
        bool slotless = true, types_ok = true;
        for (const auto& item : inst.da.items) {
            if (item.slot) slotless = false;
            if (!pin_types.count(item.da_type)) types_ok = false;
        }
        if (slotless && types_ok)
            pinned.insert(inst.signature.empty() ? da_signature(inst.da, reg).text : inst.signature);
    }
    return pinned;
}

inline SplitSpec split_corpus(const std::vector<Instance>& instances, const Registry& reg,
                              std::array<double, 3> ratios, std::uint64_t seed,
                              const std::set<std::string>& pinned) {
    struct Group {
        std::string sig;
        std::size_t size = 0;
        std::set<std::string> da_types;
    };
    std::map<std::string, Group> by_sig;
    for (const auto& inst : instances) {
        std::string sig = inst.signature.empty() ? da_signature(inst.da, reg).text : inst.signature;
        auto& g = by_sig[sig];
        g.sig = sig;
        g.size += 1;
        for (const auto& item : inst.da.items) g.da_types.insert(item.da_type);
    }

    SplitSpec spec;
    double ratio_total = ratios[0] + ratios[1] + ratios[2];
    std::size_t total = instances.size();
    std::array<double, 3> target{};
    for (int p = 0; p < 3; ++p) target[p] = total * ratios[p] / ratio_total;

    auto assign = [&](const Group& g, Part p) {
        spec.assignment[g.sig] = p;
        spec.instance_counts[static_cast<int>(p)] += g.size;
        spec.signature_counts[static_cast<int>(p)] += 1;
    };

    std::vector<const Group*> rest;
    for (const auto& [sig, g] : by_sig) {
        if (pinned.count(sig)) assign(g, Part::Train);
        else rest.push_back(&g);
    }

    // type coverage: DA types with >= 3 signatures must reach every part
    std::map<std::string, std::vector<const Group*>> by_type;
    for (const auto& [sig, g] : by_sig)
        for (const auto& t : g.da_types) by_type[t].push_back(&g);

    Rng rng(seed);
    rng.shuffle(rest);
    std::stable_sort(rest.begin(), rest.end(),
                     [](const Group* a, const Group* b) { return a->size > b->size; });

    auto pick_part = [&](const Group& g) {
        int best = 0;
        double best_score = 1e300;
        for (int p = 0; p < 3; ++p) {
            if (target[p] <= 0.0) continue;
            double score = (spec.instance_counts[p] + g.size) / target[p];
            if (score < best_score - 1e-12) {
                best_score = score;
                best = p;
            }
        }
        return static_cast<Part>(best);
    };

    for (const Group* g : rest) assign(*g, pick_part(*g));

    // repair pass for type coverage
    auto part_of = [&](const Group* g) { return spec.assignment.at(g->sig); };
    for (const auto& [type, groups] : by_type) {
        if (groups.size() < 3) {
            bool covered_all = true;
            for (int p = 0; p < 3; ++p) {
                bool covered = false;
                for (const Group* g : groups)
                    if (static_cast<int>(part_of(g)) == p) covered = true;
                covered_all = covered_all && covered;
            }
            if (!covered_all)
                spec.warnings.push_back("DA type '" + type + "' has only " + std::to_string(groups.size()) +
                                        " signatures and cannot cover all parts");
            continue;
        }
        for (int p = 0; p < 3; ++p) {
            bool covered = false;
            for (const Group* g : groups)
                if (static_cast<int>(part_of(g)) == p) covered = true;
            if (covered) continue;
            // move the smallest movable signature of this type into part p
            const Group* best = nullptr;
            for (const Group* g : groups) {
                if (pinned.count(g->sig)) continue;
                std::size_t type_count_in_source = 0;
                for (const Group* o : groups)
                    if (part_of(o) == part_of(g)) ++type_count_in_source;
                if (type_count_in_source < 2) continue;  // would break coverage where it came from
                if (!best || g->size < best->size) best = g;
            }
            if (!best) {
                spec.warnings.push_back("cannot repair coverage of DA type '" + type + "' for part " +
                                        part_name(static_cast<Part>(p)));
                continue;
            }
            int from = static_cast<int>(part_of(best));
            spec.instance_counts[from] -= best->size;
            spec.signature_counts[from] -= 1;
            assign(*best, static_cast<Part>(p));
        }
    }

    return spec;
}

inline std::array<std::vector<Instance>, 3> apply_split(const std::vector<Instance>& instances,
                                                        const SplitSpec& spec, const Registry& reg) {
    std::array<std::vector<Instance>, 3> parts;
    for (const auto& inst : instances) {
        std::string sig = inst.signature.empty() ? da_signature(inst.da, reg).text : inst.signature;
        auto it = spec.assignment.find(sig);
        if (it == spec.assignment.end()) throw DataError("signature missing from split: " + sig);
        parts[static_cast<int>(it->second)].push_back(inst);
    }
    return parts;
}

// ---------------------------------------------------------------------------
// Statistics

struct CorpusStats {
    std::size_t instances = 0;
    std::size_t unique_delex_instances = 0;
    std::size_t unique_signatures = 0;
    std::size_t unique_lemmas = 0;
    std::size_t unique_forms = 0;
    std::optional<double> avg_lexicalizations;  // numerals excluded; absent without slot values

    std::string table() const {
        auto line = [](const std::string& k, const std::string& v) {
            std::string out = k;
            while (out.size() < 42) out += ' ';
            return out + v + "\n";
        };
        std::string out;
        out += line("Number of instances", std::to_string(instances));
        out += line("Unique delexicalized instances", std::to_string(unique_delex_instances));
        out += line("Unique delexicalized DAs", std::to_string(unique_signatures));
        out += line("Unique lemmas (in delexicalized set)", std::to_string(unique_lemmas));
        out += line("Unique word forms (in delexicalized set)", std::to_string(unique_forms));
        char buf[32];
        if (avg_lexicalizations) std::snprintf(buf, sizeof(buf), "%.2f", *avg_lexicalizations);
        out += line("Average lexicalizations per slot value", avg_lexicalizations ? buf : "-");
        return out;
    }
};

inline CorpusStats corpus_stats(const std::vector<Instance>& instances, const Registry& reg,
                                bool count_placeholders = false) {
    CorpusStats stats;
    stats.instances = instances.size();
    auto dedup = deduplicate(instances, reg);
    stats.unique_delex_instances = dedup.unique_count();
    stats.unique_signatures = dedup.groups.size();

    std::set<std::string> lemmas, forms;
    std::map<std::pair<std::string, std::string>, std::set<std::string>> forms_per_value;
    for (const auto& inst : instances) {
        for (const auto& tok : inst.lemmas)
            if (count_placeholders || !is_placeholder(tok)) lemmas.insert(tok);
        for (const auto& tok : inst.delex_text)
            if (count_placeholders || !is_placeholder(tok)) forms.insert(tok);
        for (const auto& m : inst.matches) {
            if (is_numeral(m.value)) continue;
            forms_per_value[{m.slot, m.value}].insert(m.form.form);
        }
    }
    stats.unique_lemmas = lemmas.size();
    stats.unique_forms = forms.size();
    if (!forms_per_value.empty()) {
        double total = 0.0;
        for (const auto& [key, fs] : forms_per_value) total += static_cast<double>(fs.size());
        stats.avg_lexicalizations = total / static_cast<double>(forms_per_value.size());
    }
    return stats;
}

}  // namespace csnlg
