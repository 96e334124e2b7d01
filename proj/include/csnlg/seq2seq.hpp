#pragma once

// Attention seq2seq generator over DA triples: bidirectional LSTM encoder,
// LSTM decoder with feed-forward attention, beam search, and the training
// loop with BLEU-validated early stopping.
//
// Two output modes: surface word forms or interleaved lemma-tag sequences.
// Two input modes: delexicalized or lexicalized triple values.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "csnlg/dataset.hpp"
#include "csnlg/delex.hpp"
#include "csnlg/lemma_tag.hpp"
#include "csnlg/metrics.hpp"
#include "csnlg/nn.hpp"
#include "csnlg/vocab.hpp"

namespace csnlg {

struct GeneratorConfig {
    enum class Mode { WordForms, LemmaTag };
    enum class InputMode { Delexicalized, Lexicalized };

    Mode mode = Mode::WordForms;
    InputMode input_mode = InputMode::Delexicalized;
    std::size_t embedding_size = 200;
    std::size_t cell_size = 200;
    double learning_rate = 0.005;
    double dropout_rate = 0.5;
    std::size_t batch_size = 20;
    std::size_t min_passes = 50;
    std::size_t max_passes = 1000;
    std::size_t patience = 50;
    std::size_t validation_top_k = 10;
    bool patience_on_best_only = false;  // alternative reading: only a new maximum resets patience
    std::size_t beam_size = 20;
    std::size_t max_output_length = 60;
    long vocab_min_freq = 2;
    double gradient_clip = 5.0;

    static const char* mode_name(Mode m) { return m == Mode::WordForms ? "word_forms" : "lemma_tag"; }
    static const char* input_mode_name(InputMode m) {
        return m == InputMode::Delexicalized ? "delexicalized" : "lexicalized";
    }
    static Mode parse_mode(const std::string& s) {
        if (s == "word_forms") return Mode::WordForms;
        if (s == "lemma_tag") return Mode::LemmaTag;
        throw DataError("unknown generator mode: " + s);
    }
    static InputMode parse_input_mode(const std::string& s) {
        if (s == "delexicalized") return InputMode::Delexicalized;
        if (s == "lexicalized") return InputMode::Lexicalized;
        throw DataError("unknown input mode: " + s);
    }
};

// Target-side token sequence for an instance under the given mode.
inline std::vector<std::string> generation_target(const Instance& inst, GeneratorConfig::Mode mode) {
    if (mode == GeneratorConfig::Mode::WordForms) return inst.delex_text;
    return interleave(inst.lemmas, inst.delex_tags);
}

inline std::vector<DATriple> generation_input(const DialogueAct& da, const Registry& reg,
                                              GeneratorConfig::InputMode input_mode) {
    return da_to_triples(da, reg,
                         input_mode == GeneratorConfig::InputMode::Delexicalized
                             ? TripleMode::Delexicalized
                             : TripleMode::Lexicalized);
}

// Flattened triple-part tokens for the encoder vocabulary.
inline std::vector<std::string> triple_tokens(const std::vector<DATriple>& triples) {
    std::vector<std::string> out;
    out.reserve(3 * triples.size());
    for (const auto& t : triples) {
        out.push_back("dt:" + t.da_type);
        out.push_back("sl:" + t.slot);
        out.push_back("vl:" + t.value);
    }
    return out;
}

struct Candidate {
    std::vector<std::string> tokens;  // ends with </s>
    double logprob = 0.0;
    long penalty = 0;

    std::vector<std::string> surface() const {
        std::vector<std::string> out = tokens;
        if (!out.empty() && out.back() == kEos) out.pop_back();
        return out;
    }
};

struct TrainLogEntry {
    std::size_t pass = 0;
    double train_loss = 0.0;
    double dev_bleu = 0.0;
    bool kept = false;
};

class Seq2SeqGenerator {
public:
    GeneratorConfig cfg;
    Vocab in_vocab;
    Vocab out_vocab;
    nn::ModelParams params;

    static Seq2SeqGenerator create(const GeneratorConfig& cfg, const std::vector<Instance>& train,
                                   const Registry& reg, std::uint64_t seed) {
        Seq2SeqGenerator g;
        g.cfg = cfg;
        std::vector<std::vector<std::string>> in_corpus, out_corpus;
        for (const auto& inst : train) {
            in_corpus.push_back(triple_tokens(generation_input(inst.da, reg, cfg.input_mode)));
            out_corpus.push_back(generation_target(inst, cfg.mode));
        }
        g.in_vocab = Vocab::build(in_corpus, 1, false);
        g.out_vocab = Vocab::build(out_corpus, cfg.vocab_min_freq, true);
        g.params = nn::ModelParams(seed);
        Rng rng(seed);
        std::size_t E = cfg.embedding_size, H = cfg.cell_size;
        g.params.add_uniform("emb_in", {g.in_vocab.size(), E}, rng);
        g.params.add_uniform("emb_out", {g.out_vocab.size(), E}, rng);
        nn::add_lstm(g.params, "enc_f", 3 * E, H, rng);
        nn::add_lstm(g.params, "enc_b", 3 * E, H, rng);
        g.params.add_uniform("bridge_h.W", {H, 2 * H}, rng);
        g.params.add("bridge_h.b", {H});
        g.params.add_uniform("bridge_c.W", {H, 2 * H}, rng);
        g.params.add("bridge_c.b", {H});
        nn::add_lstm(g.params, "dec", E + 2 * H, H, rng);
        nn::add_attention(g.params, "attn", H, 2 * H, H, rng);
        g.params.add_uniform("out.W", {g.out_vocab.size(), 3 * H}, rng);
        g.params.add("out.b", {g.out_vocab.size()});
        return g;
    }

    // ---- forward pieces -----------------------------------------------

    struct Bound {
        nn::Tape::Id emb_in, emb_out;
        nn::Tape::Id enc_f_W, enc_f_b, enc_b_W, enc_b_b;
        nn::Tape::Id bridge_h_W, bridge_h_b, bridge_c_W, bridge_c_b;
        nn::Tape::Id dec_W, dec_b;
        nn::AttentionIds attn;
        nn::Tape::Id out_W, out_b;
    };

    Bound bind(nn::Tape& t, bool with_grad) const {
        auto* self = const_cast<Seq2SeqGenerator*>(this);
        auto get = [&](const char* name) {
            return with_grad ? t.leaf(self->params.at(name)) : t.constant(params.at(name).value);
        };
        Bound b;
        b.emb_in = get("emb_in");
        b.emb_out = get("emb_out");
        b.enc_f_W = get("enc_f.W");
        b.enc_f_b = get("enc_f.b");
        b.enc_b_W = get("enc_b.W");
        b.enc_b_b = get("enc_b.b");
        b.bridge_h_W = get("bridge_h.W");
        b.bridge_h_b = get("bridge_h.b");
        b.bridge_c_W = get("bridge_c.W");
        b.bridge_c_b = get("bridge_c.b");
        b.dec_W = get("dec.W");
        b.dec_b = get("dec.b");
        b.attn = {get("attn.W"), get("attn.b"), get("attn.v")};
        b.out_W = get("out.W");
        b.out_b = get("out.b");
        return b;
    }

    struct Encoded {
        std::vector<nn::Tape::Id> states;  // per triple, joined fwd/bwd [2H]
        nn::LstmState dec_init;
    };

    Encoded encode(nn::Tape& t, const Bound& b, const std::vector<DATriple>& triples, bool training,
                   Rng* dropout_rng) const {
        if (triples.empty()) throw DataError("encode: empty dialogue act");
        std::size_t H = cfg.cell_size;
        std::vector<nn::Tape::Id> inputs;
        for (const auto& tr : triples) {
            auto e1 = t.row(b.emb_in, in_vocab.id("dt:" + tr.da_type));
            auto e2 = t.row(b.emb_in, in_vocab.id("sl:" + tr.slot));
            auto e3 = t.row(b.emb_in, in_vocab.id("vl:" + tr.value));
            auto x = t.concat(t.concat(e1, e2), e3);
            if (training && dropout_rng) x = t.dropout(x, cfg.dropout_rate, true, *dropout_rng);
            inputs.push_back(x);
        }
        std::vector<nn::Tape::Id> fwd(inputs.size()), bwd(inputs.size());
        nn::LstmState f = nn::lstm_initial(t, H);
        for (std::size_t i = 0; i < inputs.size(); ++i) {
            f = nn::lstm_step(t, b.enc_f_W, b.enc_f_b, inputs[i], f, H);
            fwd[i] = f.h;
        }
        nn::LstmState r = nn::lstm_initial(t, H);
        for (std::size_t i = inputs.size(); i-- > 0;) {
            r = nn::lstm_step(t, b.enc_b_W, b.enc_b_b, inputs[i], r, H);
            bwd[i] = r.h;
        }
        Encoded enc;
        for (std::size_t i = 0; i < inputs.size(); ++i) enc.states.push_back(t.concat(fwd[i], bwd[i]));
        auto joined_final = t.concat(f.h, r.h);
        enc.dec_init.h = t.tanh_(t.affine(b.bridge_h_W, joined_final, b.bridge_h_b));
        enc.dec_init.c = t.tanh_(t.affine(b.bridge_c_W, joined_final, b.bridge_c_b));
        return enc;
    }

    struct StepOut {
        nn::LstmState state;
        nn::Tape::Id logits;
    };

    StepOut decode_step(nn::Tape& t, const Bound& b, const Encoded& enc, nn::LstmState state,
                        int prev_token, bool training, Rng* dropout_rng) const {
        nn::Tape::Id context = -1;
        nn::attention_weights(t, b.attn, state.h, enc.states, &context);
        auto x = t.concat(t.row(b.emb_out, static_cast<std::size_t>(prev_token)), context);
        if (training && dropout_rng) x = t.dropout(x, cfg.dropout_rate, true, *dropout_rng);
        auto next = nn::lstm_step(t, b.dec_W, b.dec_b, x, state, cfg.cell_size);
        auto logits = t.affine(b.out_W, t.concat(next.h, context), b.out_b);
        return {next, logits};
    }

    // Summed cross-entropy of the target sequence (</s> included).
    nn::Tape::Id sequence_loss(nn::Tape& t, const Bound& b, const std::vector<DATriple>& triples,
                               const std::vector<int>& target_ids, bool training, Rng* dropout_rng) const {
        auto enc = encode(t, b, triples, training, dropout_rng);
        nn::LstmState state = enc.dec_init;
        int prev = out_vocab.bos();
        nn::Tape::Id loss = -1;
        std::vector<int> with_eos = target_ids;
        with_eos.push_back(out_vocab.eos());
        for (int y : with_eos) {
            auto step = decode_step(t, b, enc, state, prev, training, dropout_rng);
            auto tok_loss = t.softmax_xent(step.logits, static_cast<std::size_t>(y));
            loss = loss < 0 ? tok_loss : t.add(loss, tok_loss);
            state = step.state;
            prev = y;
        }
        return loss;
    }

    // Teacher-forced log-probability of a finished token sequence (with </s>).
    double sequence_log_prob(const DialogueAct& da, const Registry& reg,
                             const std::vector<std::string>& tokens) const {
        nn::Tape t;
        auto b = bind(t, false);
        auto enc = encode(t, b, generation_input(da, reg, cfg.input_mode), false, nullptr);
        nn::LstmState state = enc.dec_init;
        int prev = out_vocab.bos();
        double lp = 0.0;
        std::vector<int> ids = out_vocab.ids(tokens);
        ids.push_back(out_vocab.eos());
        for (int y : ids) {
            auto step = decode_step(t, b, enc, state, prev, false, nullptr);
            lp += log_softmax_at(t.val(step.logits).v, static_cast<std::size_t>(y));
            state = step.state;
            prev = y;
        }
        return lp;
    }

    std::vector<std::string> greedy_decode(const DialogueAct& da, const Registry& reg) const {
        nn::Tape t;
        auto b = bind(t, false);
        auto enc = encode(t, b, generation_input(da, reg, cfg.input_mode), false, nullptr);
        nn::LstmState state = enc.dec_init;
        int prev = out_vocab.bos();
        std::vector<std::string> out;
        for (std::size_t step_i = 0; step_i < cfg.max_output_length; ++step_i) {
            auto step = decode_step(t, b, enc, state, prev, false, nullptr);
            const auto& logits = t.val(step.logits).v;
            int best = -1;
            for (std::size_t v = 0; v < logits.size(); ++v) {
                if (static_cast<int>(v) == out_vocab.bos()) continue;
                if (best < 0 || logits[v] > logits[static_cast<std::size_t>(best)])
                    best = static_cast<int>(v);
            }
            if (best == out_vocab.eos()) break;
            out.push_back(out_vocab.token(best));
            state = step.state;
            prev = best;
        }
        return out;
    }

    // Standard beam search; returns up to `beam` finished candidates sorted by
    // log-probability. Hypotheses still alive at the length cap are finished
    // by appending </s> with its probability.
    std::vector<Candidate> beam_decode(const DialogueAct& da, const Registry& reg, std::size_t beam,
                                       std::size_t max_len) const {
        if (beam == 0) throw DataError("beam size must be positive");
        nn::Tape t;
        auto b = bind(t, false);
        auto enc = encode(t, b, generation_input(da, reg, cfg.input_mode), false, nullptr);

        struct Hyp {
            std::vector<int> tokens;
            double lp = 0.0;
            nn::LstmState state;
            int prev;
        };
        std::vector<Hyp> live = {{{}, 0.0, enc.dec_init, out_vocab.bos()}};
        std::vector<Candidate> finished;

        auto finish = [&](const Hyp& h, double eos_lp) {
            Candidate c;
            for (int id : h.tokens) c.tokens.push_back(out_vocab.token(id));
            c.tokens.push_back(kEos);
            c.logprob = h.lp + eos_lp;
            finished.push_back(std::move(c));
        };

        for (std::size_t depth = 0; depth <= max_len && !live.empty(); ++depth) {
            struct Expansion {
                std::size_t hyp;
                int token;
                double lp;
                nn::LstmState state;
            };
            std::vector<Expansion> expansions;
            for (std::size_t hi = 0; hi < live.size(); ++hi) {
                auto step = decode_step(t, b, enc, live[hi].state, live[hi].prev, false, nullptr);
                const auto& logits = t.val(step.logits).v;
                double logz = log_sum_exp(logits);
                bool at_cap = depth == max_len;
                if (at_cap) {
                    finish(live[hi], logits[static_cast<std::size_t>(out_vocab.eos())] - logz);
                    continue;
                }
                for (std::size_t v = 0; v < logits.size(); ++v) {
                    if (static_cast<int>(v) == out_vocab.bos()) continue;
                    expansions.push_back({hi, static_cast<int>(v), live[hi].lp + logits[v] - logz,
                                          step.state});
                }
            }
            if (expansions.empty()) break;
            std::stable_sort(expansions.begin(), expansions.end(), [](const auto& a, const auto& b2) {
                if (a.lp != b2.lp) return a.lp > b2.lp;
                if (a.hyp != b2.hyp) return a.hyp < b2.hyp;
                return a.token < b2.token;
            });
            std::vector<Hyp> next_live;
            for (const auto& ex : expansions) {
                if (next_live.size() >= beam) break;
                Hyp h = live[ex.hyp];
                h.lp = ex.lp;
                h.state = ex.state;
                if (ex.token == out_vocab.eos()) {
                    finish(h, 0.0);
                } else {
                    h.tokens.push_back(ex.token);
                    h.prev = ex.token;
                    next_live.push_back(std::move(h));
                }
            }
            live = std::move(next_live);
        }
        std::stable_sort(finished.begin(), finished.end(),
                         [](const Candidate& a, const Candidate& b2) { return a.logprob > b2.logprob; });
        if (finished.size() > beam) finished.resize(beam);
        return finished;
    }

    // ---- persistence ----------------------------------------------------

    void save(const std::string& dir) const {
        std::filesystem::create_directories(dir);
        nn::save_params(dir + "/params.bin", params);
        nlohmann::json j;
        j["kind"] = "generator";
        j["mode"] = GeneratorConfig::mode_name(cfg.mode);
        j["input_mode"] = GeneratorConfig::input_mode_name(cfg.input_mode);
        j["embedding_size"] = cfg.embedding_size;
        j["cell_size"] = cfg.cell_size;
        j["beam_size"] = cfg.beam_size;
        j["max_output_length"] = cfg.max_output_length;
        j["in_vocab"] = in_vocab.to_json();
        j["out_vocab"] = out_vocab.to_json();
        write_file(dir + "/model.json", j.dump(2));
    }

    static Seq2SeqGenerator load(const std::string& dir) {
        Seq2SeqGenerator g;
        auto j = nlohmann::json::parse(read_file(dir + "/model.json"));
        if (j.value("kind", "") != "generator") throw DataError(dir + ": not a generator model");
        g.cfg.mode = GeneratorConfig::parse_mode(j.at("mode").get<std::string>());
        g.cfg.input_mode = GeneratorConfig::parse_input_mode(j.at("input_mode").get<std::string>());
        g.cfg.embedding_size = j.at("embedding_size").get<std::size_t>();
        g.cfg.cell_size = j.at("cell_size").get<std::size_t>();
        g.cfg.beam_size = j.value("beam_size", std::size_t{20});
        g.cfg.max_output_length = j.value("max_output_length", std::size_t{60});
        g.in_vocab = Vocab::from_json(j.at("in_vocab"));
        g.out_vocab = Vocab::from_json(j.at("out_vocab"));
        g.params = nn::load_params(dir + "/params.bin");
        return g;
    }

    static double log_sum_exp(const std::vector<double>& v) {
        double mx = *std::max_element(v.begin(), v.end());
        double total = 0.0;
        for (double x : v) total += std::exp(x - mx);
        return mx + std::log(total);
    }

    static double log_softmax_at(const std::vector<double>& logits, std::size_t idx) {
        return logits[idx] - log_sum_exp(logits);
    }
};

struct GeneratorTrainResult {
    Seq2SeqGenerator model;
    std::vector<TrainLogEntry> log;
    std::size_t best_pass = 0;
    double best_bleu = -1.0;
    std::size_t stopped_at = 0;
};

// Adam training with per-pass greedy-decode BLEU validation. Keeps the
// parameters of the best validation pass; stops once the pool of the top-k
// validation scores has gained no member for `patience` passes (never before
// min_passes, never past max_passes).
inline GeneratorTrainResult train_generator(const GeneratorConfig& cfg,
                                            const std::vector<Instance>& train,
                                            const std::vector<Instance>& dev, const Registry& reg,
                                            std::uint64_t seed) {
    if (train.empty()) throw DataError("cannot train the generator on an empty dataset");
    GeneratorTrainResult res;
    res.model = Seq2SeqGenerator::create(cfg, train, reg, seed);
    auto& model = res.model;

    std::vector<std::vector<DATriple>> inputs;
    std::vector<std::vector<int>> targets;
    for (const auto& inst : train) {
        inputs.push_back(generation_input(inst.da, reg, cfg.input_mode));
        targets.push_back(model.out_vocab.ids(generation_target(inst, cfg.mode)));
    }
    std::vector<EvalPair> dev_pairs(dev.size());
    for (std::size_t i = 0; i < dev.size(); ++i) dev_pairs[i].refs = {generation_target(dev[i], cfg.mode)};

    nn::AdamConfig adam_cfg;
    adam_cfg.learning_rate = cfg.learning_rate;
    nn::AdamState adam(adam_cfg);
    Rng shuffle_rng = Rng(seed).derive(0xA1);
    Rng dropout_rng = Rng(seed).derive(0xD0);

    std::optional<nn::ModelParams> best_params;
    std::vector<double> top_scores;  // up to validation_top_k best dev BLEUs
    std::size_t last_new_top = 0;

    std::vector<std::size_t> order(train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (std::size_t pass = 1; pass <= cfg.max_passes; ++pass) {
        shuffle_rng.shuffle(order);
        double pass_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            nn::Tape t;
            auto b = model.bind(t, true);
            std::vector<nn::Tape::Id> losses;
            for (std::size_t k = start; k < std::min(order.size(), start + cfg.batch_size); ++k) {
                std::size_t idx = order[k];
                losses.push_back(model.sequence_loss(t, b, inputs[idx], targets[idx],
                                                     cfg.dropout_rate > 0.0, &dropout_rng));
            }
            auto batch_loss = t.mean(losses);
            double loss_value = t.val(batch_loss).v[0];
            if (!std::isfinite(loss_value))
                throw DataError("non-finite training loss at pass " + std::to_string(pass));
            model.params.zero_grads();
            t.backward(batch_loss);
            nn::clip_gradients(model.params, cfg.gradient_clip);
            adam.step(model.params);
            pass_loss += loss_value;
            ++batches;
        }
        pass_loss /= std::max<std::size_t>(batches, 1);

        double bleu = 0.0;
        if (!dev.empty()) {
            for (std::size_t i = 0; i < dev.size(); ++i)
                dev_pairs[i].hyp = model.greedy_decode(dev[i].da, reg);
            bleu = corpus_bleu(dev_pairs);
        }
        bool kept = bleu > res.best_bleu;
        if (kept) {
            res.best_bleu = bleu;
            res.best_pass = pass;
            best_params.emplace(model.params);
        }
        bool entered_top;
        if (cfg.patience_on_best_only) {
            entered_top = kept;
        } else {
            entered_top = top_scores.size() < cfg.validation_top_k ||
                          bleu > *std::min_element(top_scores.begin(), top_scores.end());
            if (entered_top) {
                top_scores.push_back(bleu);
                if (top_scores.size() > cfg.validation_top_k) {
                    top_scores.erase(std::min_element(top_scores.begin(), top_scores.end()));
                }
            }
        }
        if (entered_top) last_new_top = pass;
        res.log.push_back({pass, pass_loss, bleu, kept});
        res.stopped_at = pass;
        if (pass >= cfg.min_passes && pass - last_new_top >= cfg.patience) break;
    }
    if (best_params) model.params = std::move(*best_params);
    return res;
}

}  // namespace csnlg
