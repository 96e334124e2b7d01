#pragma once

// Placeholder lexicalization: choose an inflected surface form for each slot
// value. Three strategies: uniform random, most frequent in training data,
// and a bidirectional LSTM language model scoring every applicable form in
// context. Multiword forms are handled as single merged tokens until the
// final rendering.

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "csnlg/delex.hpp"
#include "csnlg/nn.hpp"
#include "csnlg/seq2seq.hpp"
#include "csnlg/vocab.hpp"

namespace csnlg {

struct BiLmConfig {
    std::size_t embedding_size = 50;
    std::size_t cell_size = 50;
    double learning_rate = 0.001;
    std::size_t batch_size = 20;
    std::size_t max_passes = 50;
    std::size_t validate_from = 1;
    long vocab_min_freq = 1;
    double gradient_clip = 5.0;
};

// Forward and backward LSTM language models over lexicalized tokens sharing
// one vocabulary. p(form | left, right) factorizes as the product of the two
// directional probabilities.
class BiRnnLm {
public:
    BiLmConfig cfg;
    Vocab vocab;
    nn::ModelParams params;

    static BiRnnLm create(const BiLmConfig& cfg, const std::vector<std::vector<std::string>>& corpus,
                          std::uint64_t seed) {
        BiRnnLm lm;
        lm.cfg = cfg;
        lm.vocab = Vocab::build(corpus, cfg.vocab_min_freq, true);
        lm.params = nn::ModelParams(seed);
        Rng rng(seed);
        std::size_t E = cfg.embedding_size, H = cfg.cell_size;
        lm.params.add_uniform("emb", {lm.vocab.size(), E}, rng);
        nn::add_lstm(lm.params, "fwd", E, H, rng);
        nn::add_lstm(lm.params, "bwd", E, H, rng);
        lm.params.add_uniform("out_f.W", {lm.vocab.size(), H}, rng);
        lm.params.add("out_f.b", {lm.vocab.size()});
        lm.params.add_uniform("out_b.W", {lm.vocab.size(), H}, rng);
        lm.params.add("out_b.b", {lm.vocab.size()});
        return lm;
    }

    // Log-probability of `word` after running one direction over `context`
    // (already oriented: left context as-is, right context reversed).
    double directional_log_prob(const std::string& word, const std::vector<std::string>& context,
                                bool forward) const {
        nn::Tape t;
        auto state = run_direction(t, context, forward, false);
        auto logits = t.affine(t.constant(params.at(forward ? "out_f.W" : "out_b.W").value), state.h,
                               t.constant(params.at(forward ? "out_f.b" : "out_b.b").value));
        return Seq2SeqGenerator::log_softmax_at(t.val(logits).v, static_cast<std::size_t>(vocab.id(word)));
    }

    double log_prob_forward(const std::string& word, const std::vector<std::string>& left) const {
        return directional_log_prob(word, left, true);
    }

    double log_prob_backward(const std::string& word, const std::vector<std::string>& right) const {
        std::vector<std::string> rev(right.rbegin(), right.rend());
        return directional_log_prob(word, rev, false);
    }

    // Mean of forward and backward perplexities.
    double perplexity(const std::vector<std::vector<std::string>>& corpus) const {
        double lp = 0.0;
        std::size_t events = 0;
        for (const auto& sent : corpus) {
            lp += sentence_log_prob(sent, true) + sentence_log_prob(sent, false);
            events += 2 * (sent.size() + 1);
        }
        return std::exp(-lp / static_cast<double>(std::max<std::size_t>(events, 1)));
    }

    double sentence_log_prob(const std::vector<std::string>& sent, bool forward) const {
        std::vector<std::string> oriented = sent;
        if (!forward) std::reverse(oriented.begin(), oriented.end());
        nn::Tape t;
        auto bound = bind(t, false);
        double lp = 0.0;
        nn::LstmState state = nn::lstm_initial(t, cfg.cell_size);
        int prev = vocab.bos();
        std::vector<int> ids = vocab.ids(oriented);
        ids.push_back(vocab.eos());
        for (int y : ids) {
            state = nn::lstm_step(t, forward ? bound.fwd_W : bound.bwd_W,
                                  forward ? bound.fwd_b : bound.bwd_b,
                                  t.row(bound.emb, static_cast<std::size_t>(prev)), state, cfg.cell_size);
            auto logits = t.affine(forward ? bound.out_f_W : bound.out_b_W, state.h,
                                   forward ? bound.out_f_b : bound.out_b_b);
            lp += Seq2SeqGenerator::log_softmax_at(t.val(logits).v, static_cast<std::size_t>(y));
            prev = y;
        }
        return lp;
    }

    void save(const std::string& dir) const {
        std::filesystem::create_directories(dir);
        nn::save_params(dir + "/params.bin", params);
        nlohmann::json j;
        j["kind"] = "bilm";
        j["embedding_size"] = cfg.embedding_size;
        j["cell_size"] = cfg.cell_size;
        j["vocab"] = vocab.to_json();
        write_file(dir + "/model.json", j.dump(2));
    }

    static BiRnnLm load(const std::string& dir) {
        BiRnnLm lm;
        auto j = nlohmann::json::parse(read_file(dir + "/model.json"));
        if (j.value("kind", "") != "bilm") throw DataError(dir + ": not a bidirectional LM model");
        lm.cfg.embedding_size = j.at("embedding_size").get<std::size_t>();
        lm.cfg.cell_size = j.at("cell_size").get<std::size_t>();
        lm.vocab = Vocab::from_json(j.at("vocab"));
        lm.params = nn::load_params(dir + "/params.bin");
        return lm;
    }

private:
    struct BoundLm {
        nn::Tape::Id emb, fwd_W, fwd_b, bwd_W, bwd_b, out_f_W, out_f_b, out_b_W, out_b_b;
    };

    BoundLm bind(nn::Tape& t, bool with_grad) const {
        auto* self = const_cast<BiRnnLm*>(this);
        auto get = [&](const char* n) {
            return with_grad ? t.leaf(self->params.at(n)) : t.constant(params.at(n).value);
        };
        return {get("emb"),     get("fwd.W"),   get("fwd.b"),   get("bwd.W"),  get("bwd.b"),
                get("out_f.W"), get("out_f.b"), get("out_b.W"), get("out_b.b")};
    }

    nn::LstmState run_direction(nn::Tape& t, const std::vector<std::string>& context, bool forward,
                                bool with_grad) const {
        auto bound = bind(t, with_grad);
        nn::LstmState state = nn::lstm_initial(t, cfg.cell_size);
        std::vector<int> ids = {vocab.bos()};
        for (const auto& tok : context) ids.push_back(vocab.id(tok));
        for (int id : ids) {
            state = nn::lstm_step(t, forward ? bound.fwd_W : bound.bwd_W,
                                  forward ? bound.fwd_b : bound.bwd_b,
                                  t.row(bound.emb, static_cast<std::size_t>(id)), state, cfg.cell_size);
        }
        return state;
    }

    friend struct BiLmTrainer;
};

struct BiLmTrainResult {
    BiRnnLm model;
    std::vector<double> dev_perplexities;
    std::size_t best_pass = 0;
};

struct BiLmTrainer {
    static BiLmTrainResult train(const BiLmConfig& cfg, const std::vector<std::vector<std::string>>& train,
                                 const std::vector<std::vector<std::string>>& dev, std::uint64_t seed) {
        if (train.empty()) throw DataError("cannot train the LM lexicalizer on an empty corpus");
        BiLmTrainResult res;
        res.model = BiRnnLm::create(cfg, train, seed);
        auto& model = res.model;

        nn::AdamConfig acfg;
        acfg.learning_rate = cfg.learning_rate;
        nn::AdamState adam(acfg);
        Rng shuffle_rng = Rng(seed).derive(0xB1);
        std::vector<std::size_t> order(train.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

        auto sentence_loss = [&](nn::Tape& t, const std::vector<std::string>& sent) {
            auto bound = model.bind(t, true);
            nn::Tape::Id total = -1;
            for (bool forward : {true, false}) {
                std::vector<std::string> oriented = sent;
                if (!forward) std::reverse(oriented.begin(), oriented.end());
                nn::LstmState state = nn::lstm_initial(t, cfg.cell_size);
                int prev = model.vocab.bos();
                std::vector<int> ids = model.vocab.ids(oriented);
                ids.push_back(model.vocab.eos());
                for (int y : ids) {
                    state = nn::lstm_step(t, forward ? bound.fwd_W : bound.bwd_W,
                                          forward ? bound.fwd_b : bound.bwd_b,
                                          t.row(bound.emb, static_cast<std::size_t>(prev)), state,
                                          cfg.cell_size);
                    auto logits = t.affine(forward ? bound.out_f_W : bound.out_b_W, state.h,
                                           forward ? bound.out_f_b : bound.out_b_b);
                    auto loss = t.softmax_xent(logits, static_cast<std::size_t>(y));
                    total = total < 0 ? loss : t.add(total, loss);
                    prev = y;
                }
            }
            return total;
        };

        std::optional<nn::ModelParams> best;
        double best_ppl = 0.0;
        for (std::size_t pass = 1; pass <= cfg.max_passes; ++pass) {
            shuffle_rng.shuffle(order);
            for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
                nn::Tape t;
                std::vector<nn::Tape::Id> losses;
                for (std::size_t k = start; k < std::min(order.size(), start + cfg.batch_size); ++k)
                    losses.push_back(sentence_loss(t, train[order[k]]));
                auto loss = t.mean(losses);
                if (!std::isfinite(t.val(loss).v[0]))
                    throw DataError("non-finite LM loss at pass " + std::to_string(pass));
                model.params.zero_grads();
                t.backward(loss);
                nn::clip_gradients(model.params, cfg.gradient_clip);
                adam.step(model.params);
            }
            if (pass >= cfg.validate_from) {
                double ppl = model.perplexity(dev.empty() ? train : dev);
                res.dev_perplexities.push_back(ppl);
                if (!best || ppl < best_ppl) {
                    best_ppl = ppl;
                    best.emplace(model.params);
                    res.best_pass = pass;
                }
            }
        }
        if (best) model.params = std::move(*best);
        return res;
    }
};

inline BiLmTrainResult train_bi_lm(const BiLmConfig& cfg,
                                   const std::vector<std::vector<std::string>>& train,
                                   const std::vector<std::vector<std::string>>& dev, std::uint64_t seed) {
    return BiLmTrainer::train(cfg, train, dev, seed);
}

// Gold-lexicalized token sequences for LM training: placeholders replaced by
// the matched surface forms, multiword forms merged into single tokens.
inline std::vector<std::string> merged_lexicalized_tokens(const Instance& inst) {
    std::vector<std::string> out;
    std::size_t mi = 0;
    auto matches = inst.matches;
    std::sort(matches.begin(), matches.end(),
              [](const auto& a, const auto& b) { return a.delex_pos < b.delex_pos; });
    for (std::size_t i = 0; i < inst.delex_text.size(); ++i) {
        if (mi < matches.size() && matches[mi].delex_pos == i) {
            out.push_back(matches[mi].form.form);  // merged token, may contain spaces
            ++mi;
        } else {
            out.push_back(inst.delex_text[i]);
        }
    }
    return out;
}

inline std::vector<std::vector<std::string>> bilm_corpus(const std::vector<Instance>& instances) {
    std::vector<std::vector<std::string>> out;
    out.reserve(instances.size());
    for (const auto& inst : instances) out.push_back(merged_lexicalized_tokens(inst));
    return out;
}

// Surface-form frequencies for the most-frequent strategy: how often each
// lexicon form realized its slot value in the training data.
inline FormLexicon with_corpus_frequencies(FormLexicon lex, const std::vector<Instance>& train) {
    for (const auto& inst : train)
        for (const auto& m : inst.matches) lex.bump_frequency(m.slot, m.value, m.form.form, m.form.tag);
    return lex;
}

// ---------------------------------------------------------------------------
// Strategies

enum class LexKind { Random, MostFrequent, RnnLm };

inline LexKind parse_lex_kind(const std::string& s) {
    if (s == "random") return LexKind::Random;
    if (s == "most_frequent") return LexKind::MostFrequent;
    if (s == "rnn_lm") return LexKind::RnnLm;
    throw DataError("unknown lexicalizer: " + s);
}

inline const char* lex_kind_name(LexKind k) {
    switch (k) {
        case LexKind::Random: return "random";
        case LexKind::MostFrequent: return "most_frequent";
        case LexKind::RnnLm: return "rnn_lm";
    }
    return "?";
}

struct LexStrategy {
    LexKind kind = LexKind::MostFrequent;
    std::uint64_t seed = 1;
    const BiRnnLm* lm = nullptr;  // required for RnnLm
};

// Applicable surface forms for a slot value. In word-form mode the full list;
// in lemma-tag mode tag-filtered with the exact/coarse/all backoff. Numerals
// without lexicon entries substitute verbatim.
inline std::vector<SurfaceForm> candidate_forms(const FormLexicon& lex, const std::string& slot,
                                                const std::string& value,
                                                const std::optional<MorphTag>& tag_hint,
                                                GeneratorConfig::Mode mode) {
    auto forms = detail::substitution_forms(lex, slot, value);
    if (forms.empty()) throw DataError("lexicon has no forms for (" + slot + ", " + value + ")");
    if (mode == GeneratorConfig::Mode::LemmaTag && tag_hint) return filter_forms(forms, *tag_hint);
    return forms;
}

// Pick one candidate. Random draws uniformly (seeded rng passed by caller);
// most_frequent takes the highest training frequency; rnn_lm maximizes
// p_fwd(form | left) * p_bwd(form | right). Ties fall back to frequency, then
// to lexicon order.
inline const SurfaceForm& select_form(const LexStrategy& strategy, Rng& rng,
                                      const std::vector<std::string>& left_context,
                                      const std::vector<std::string>& right_context,
                                      const std::vector<SurfaceForm>& candidates) {
    if (candidates.empty()) throw DataError("select_form: no candidates");
    if (candidates.size() == 1) return candidates.front();
    switch (strategy.kind) {
        case LexKind::Random:
            return candidates[rng.index(candidates.size())];
        case LexKind::MostFrequent: {
            const SurfaceForm* best = &candidates.front();
            for (const auto& c : candidates)
                if (c.frequency > best->frequency) best = &c;
            return *best;
        }
        case LexKind::RnnLm: {
            if (!strategy.lm) throw DataError("rnn_lm strategy without a trained LM");
            const SurfaceForm* best = nullptr;
            double best_lp = -1e300;
            for (const auto& c : candidates) {
                double lp = strategy.lm->log_prob_forward(c.form, left_context) +
                            strategy.lm->log_prob_backward(c.form, right_context);
                bool better = lp > best_lp + 1e-12;
                bool tie = !better && lp > best_lp - 1e-12;
                if (!best || better || (tie && c.frequency > best->frequency)) best = &c;
                if (lp > best_lp) best_lp = lp;
            }
            return *best;
        }
    }
    return candidates.front();
}

// Replace every placeholder left to right. DA values are consumed per slot in
// DA order; `hints` (when given) is indexed by token position and supplies
// lemma-tag-mode tag constraints; without hints, an inline tag token directly
// after a placeholder is consumed as its hint. Multiword forms turn into
// multiple output tokens.
//
// A placeholder whose slot has no (remaining) DA value, or whose value has no
// forms, raises DataError; with `unfilled` given it is kept verbatim and its
// slot recorded instead (decode-time outputs can carry superfluous
// placeholders, which the slot error rate already charges).
inline std::vector<std::string> lexicalize_output(const std::vector<std::string>& tokens,
                                                  const DialogueAct& da, const FormLexicon& lex,
                                                  const Registry& reg, const LexStrategy& strategy,
                                                  GeneratorConfig::Mode mode,
                                                  const std::vector<std::optional<MorphTag>>* hints = nullptr,
                                                  std::vector<std::string>* unfilled = nullptr) {
    Substitutions values;
    for (const auto& item : da.items)
        if (is_delexicalizable(item, reg)) values.emplace_back(*item.slot, *item.value);
    std::vector<bool> used(values.size(), false);

    Rng rng(strategy.seed);
    std::vector<std::string> merged;  // multiword forms as single tokens until the end
    struct Pending {
        std::size_t out_pos;
        std::string slot;
        std::string value;
        std::optional<MorphTag> hint;
    };
    std::vector<Pending> pendings;

    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const std::string placeholder = tokens[i];
        auto slot = placeholder_slot(placeholder);
        if (!slot || !reg.has_slot(*slot)) {
            merged.push_back(placeholder);
            continue;
        }
        std::optional<MorphTag> hint;
        if (hints && i < hints->size()) hint = (*hints)[i];
        if (!hints && mode == GeneratorConfig::Mode::LemmaTag && i + 1 < tokens.size() &&
            is_tag_token(tokens[i + 1])) {
            hint = MorphTag{tokens[i + 1]};
            ++i;  // consume the tag token
        }
        std::size_t pick = values.size();
        for (std::size_t k = 0; k < values.size(); ++k) {
            if (!used[k] && values[k].first == *slot) {
                pick = k;
                break;
            }
        }
        if (pick == values.size()) {
            if (!unfilled) throw DataError("placeholder '" + placeholder + "' has no value in the input DA");
            unfilled->push_back(*slot);
            merged.push_back(placeholder);
            continue;
        }
        used[pick] = true;
        pendings.push_back({merged.size(), *slot, values[pick].second, hint});
        merged.push_back(placeholder);  // patched below
    }

    // left-to-right selection so LM contexts see already-chosen forms
    for (const auto& p : pendings) {
        std::vector<SurfaceForm> candidates;
        try {
            candidates = candidate_forms(lex, p.slot, p.value, p.hint, mode);
        } catch (const DataError&) {
            if (!unfilled) throw;
            unfilled->push_back(p.slot);
            continue;
        }
        std::vector<std::string> left(merged.begin(), merged.begin() + static_cast<long>(p.out_pos));
        std::vector<std::string> right(merged.begin() + static_cast<long>(p.out_pos) + 1, merged.end());
        const SurfaceForm& chosen = select_form(strategy, rng, left, right, candidates);
        merged[p.out_pos] = chosen.form;
    }

    std::vector<std::string> out;
    for (const auto& tok : merged)
        for (auto& piece : tokenize(tok)) out.push_back(piece);
    return out;
}

}  // namespace csnlg
