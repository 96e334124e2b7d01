#pragma once

// Semantic reranker: a bidirectional LSTM classifier over candidate outputs
// predicting which DA types and slot-value items they express. The number of
// disagreements with the input DA becomes the candidate's penalty.

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "csnlg/seq2seq.hpp"

namespace csnlg {

struct RerankerConfig {
    std::size_t embedding_size = 50;
    std::size_t cell_size = 50;
    double learning_rate = 0.001;
    std::size_t batch_size = 20;
    std::size_t passes = 100;
    std::size_t validate_from = 10;
    double dev_error_weight = 10.0;
    long vocab_min_freq = 1;
    double gradient_clip = 5.0;
};

// Indicator inventory entries: one per DA type and one per delexicalized
// (da_type, slot, value) item.
inline std::vector<std::string> da_indicator_set(const DialogueAct& da, const Registry& reg) {
    std::set<std::string> out;
    auto delexed = delexicalize_da(da, reg).first;
    for (const auto& item : delexed.items) {
        out.insert("type:" + item.da_type);
        out.insert("item:" + item.da_type + "|" + (item.slot ? *item.slot : kVoidMarker) + "|" +
                   (item.value ? *item.value : kVoidMarker));
    }
    return {out.begin(), out.end()};
}

class Reranker {
public:
    RerankerConfig cfg;
    Vocab vocab;
    std::vector<std::string> indicators;  // sorted
    nn::ModelParams params;

    static Reranker create(const RerankerConfig& cfg, const std::vector<Instance>& train,
                           GeneratorConfig::Mode mode, const Registry& reg, std::uint64_t seed) {
        Reranker r;
        r.cfg = cfg;
        std::vector<std::vector<std::string>> corpus;
        std::set<std::string> inventory;
        for (const auto& inst : train) {
            corpus.push_back(generation_target(inst, mode));
            for (const auto& ind : da_indicator_set(inst.da, reg)) inventory.insert(ind);
        }
        r.vocab = Vocab::build(corpus, cfg.vocab_min_freq, false);
        r.indicators.assign(inventory.begin(), inventory.end());
        r.params = nn::ModelParams(seed);
        Rng rng(seed);
        std::size_t E = cfg.embedding_size, H = cfg.cell_size;
        r.params.add_uniform("emb", {r.vocab.size(), E}, rng);
        nn::add_lstm(r.params, "fwd", E, H, rng);
        nn::add_lstm(r.params, "bwd", E, H, rng);
        r.params.add_uniform("out.W", {r.indicators.size(), 2 * H}, rng);
        r.params.add("out.b", {r.indicators.size()});
        return r;
    }

    nn::Tape::Id logits(nn::Tape& t, const std::vector<int>& token_ids, bool with_grad) const {
        if (token_ids.empty()) throw DataError("reranker: empty token sequence");
        auto* self = const_cast<Reranker*>(this);
        auto get = [&](const char* name) {
            return with_grad ? t.leaf(self->params.at(name)) : t.constant(params.at(name).value);
        };
        auto emb = get("emb");
        auto fwd_W = get("fwd.W"), fwd_b = get("fwd.b");
        auto bwd_W = get("bwd.W"), bwd_b = get("bwd.b");
        auto out_W = get("out.W"), out_b = get("out.b");
        std::size_t H = cfg.cell_size;
        nn::LstmState f = nn::lstm_initial(t, H);
        for (int id : token_ids)
            f = nn::lstm_step(t, fwd_W, fwd_b, t.row(emb, static_cast<std::size_t>(id)), f, H);
        nn::LstmState r = nn::lstm_initial(t, H);
        for (std::size_t i = token_ids.size(); i-- > 0;)
            r = nn::lstm_step(t, bwd_W, bwd_b, t.row(emb, static_cast<std::size_t>(token_ids[i])), r, H);
        return t.affine(out_W, t.concat(f.h, r.h), out_b);
    }

    // Predicted indicator set; sigmoid >= 0.5 (logit >= 0) counts as present.
    std::set<std::string> classify(const std::vector<std::string>& tokens) const {
        nn::Tape t;
        auto lg = logits(t, vocab.ids(tokens), false);
        std::set<std::string> out;
        const auto& v = t.val(lg).v;
        for (std::size_t i = 0; i < indicators.size(); ++i)
            if (v[i] >= 0.0) out.insert(indicators[i]);
        return out;
    }

    // Symmetric difference between the classifier's prediction and the DA.
    long penalty(const std::vector<std::string>& tokens, const DialogueAct& da,
                 const Registry& reg) const {
        auto predicted = classify(tokens);
        auto gold_list = da_indicator_set(da, reg);
        std::set<std::string> gold(gold_list.begin(), gold_list.end());
        long diff = 0;
        for (const auto& p : predicted)
            if (!gold.count(p)) ++diff;
        for (const auto& g : gold)
            if (!predicted.count(g)) ++diff;
        return diff;
    }

    void save(const std::string& dir) const {
        std::filesystem::create_directories(dir);
        nn::save_params(dir + "/params.bin", params);
        nlohmann::json j;
        j["kind"] = "reranker";
        j["embedding_size"] = cfg.embedding_size;
        j["cell_size"] = cfg.cell_size;
        j["vocab"] = vocab.to_json();
        j["indicators"] = indicators;
        write_file(dir + "/model.json", j.dump(2));
    }

    static Reranker load(const std::string& dir) {
        Reranker r;
        auto j = nlohmann::json::parse(read_file(dir + "/model.json"));
        if (j.value("kind", "") != "reranker") throw DataError(dir + ": not a reranker model");
        r.cfg.embedding_size = j.at("embedding_size").get<std::size_t>();
        r.cfg.cell_size = j.at("cell_size").get<std::size_t>();
        r.vocab = Vocab::from_json(j.at("vocab"));
        r.indicators = j.at("indicators").get<std::vector<std::string>>();
        r.params = nn::load_params(dir + "/params.bin");
        return r;
    }
};

struct RerankerTrainResult {
    Reranker model;
    std::vector<double> val_errors;  // weighted train+dev error per validated pass
    std::size_t best_pass = 0;
};

inline RerankerTrainResult train_reranker(const RerankerConfig& cfg, const std::vector<Instance>& train,
                                          const std::vector<Instance>& dev, GeneratorConfig::Mode mode,
                                          const Registry& reg, std::uint64_t seed) {
    if (train.empty()) throw DataError("cannot train the reranker on an empty dataset");
    RerankerTrainResult res;
    res.model = Reranker::create(cfg, train, mode, reg, seed);
    auto& model = res.model;

    auto make_example = [&](const Instance& inst) {
        std::pair<std::vector<int>, std::vector<double>> ex;
        ex.first = model.vocab.ids(generation_target(inst, mode));
        ex.second.assign(model.indicators.size(), 0.0);
        for (const auto& ind : da_indicator_set(inst.da, reg)) {
            auto it = std::lower_bound(model.indicators.begin(), model.indicators.end(), ind);
            if (it != model.indicators.end() && *it == ind)
                ex.second[static_cast<std::size_t>(it - model.indicators.begin())] = 1.0;
        }
        return ex;
    };
    std::vector<std::pair<std::vector<int>, std::vector<double>>> train_ex, dev_ex;
    for (const auto& inst : train) train_ex.push_back(make_example(inst));
    for (const auto& inst : dev) dev_ex.push_back(make_example(inst));

    auto error_rate = [&](const std::vector<std::pair<std::vector<int>, std::vector<double>>>& exs) {
        if (exs.empty()) return 0.0;
        std::size_t wrong = 0, total = 0;
        for (const auto& [ids, gold] : exs) {
            nn::Tape t;
            const auto& v = t.val(model.logits(t, ids, false)).v;
            for (std::size_t i = 0; i < gold.size(); ++i) {
                bool pred = v[i] >= 0.0;
                if (pred != (gold[i] > 0.5)) ++wrong;
                ++total;
            }
        }
        return static_cast<double>(wrong) / static_cast<double>(std::max<std::size_t>(total, 1));
    };

    nn::AdamConfig acfg;
    acfg.learning_rate = cfg.learning_rate;
    nn::AdamState adam(acfg);
    Rng shuffle_rng = Rng(seed).derive(0xE1);
    std::vector<std::size_t> order(train_ex.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    std::optional<nn::ModelParams> best;
    double best_val = 0.0;
    for (std::size_t pass = 1; pass <= cfg.passes; ++pass) {
        shuffle_rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            nn::Tape t;
            std::vector<nn::Tape::Id> losses;
            for (std::size_t k = start; k < std::min(order.size(), start + cfg.batch_size); ++k) {
                const auto& [ids, gold] = train_ex[order[k]];
                losses.push_back(t.binary_xent(model.logits(t, ids, true), gold));
            }
            auto loss = t.mean(losses);
            if (!std::isfinite(t.val(loss).v[0]))
                throw DataError("non-finite reranker loss at pass " + std::to_string(pass));
            model.params.zero_grads();
            t.backward(loss);
            nn::clip_gradients(model.params, cfg.gradient_clip);
            adam.step(model.params);
        }
        if (pass >= cfg.validate_from) {
            double val = error_rate(train_ex) + cfg.dev_error_weight * error_rate(dev_ex);
            res.val_errors.push_back(val);
            if (!best || val < best_val) {
                best_val = val;
                best.emplace(model.params);
                res.best_pass = pass;
            }
        }
    }
    if (best) model.params = std::move(*best);
    return res;
}

// Order candidates by (penalty ascending, log-probability descending); the
// sort is stable, so equal pairs keep their beam order. With `lambda` set the
// ranking key becomes logprob - lambda * penalty instead.
inline void rerank(std::vector<Candidate>& candidates, const Reranker& model, const DialogueAct& da,
                   const Registry& reg, std::optional<double> lambda = std::nullopt) {
    for (auto& c : candidates) {
        auto tokens = c.surface();
        // an empty candidate expresses nothing: every gold indicator is missed
        c.penalty = tokens.empty() ? static_cast<long>(da_indicator_set(da, reg).size())
                                   : model.penalty(tokens, da, reg);
    }
    if (lambda) {
        std::stable_sort(candidates.begin(), candidates.end(), [&](const Candidate& a, const Candidate& b) {
            return a.logprob - *lambda * static_cast<double>(a.penalty) >
                   b.logprob - *lambda * static_cast<double>(b.penalty);
        });
    } else {
        std::stable_sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
            if (a.penalty != b.penalty) return a.penalty < b.penalty;
            return a.logprob > b.logprob;
        });
    }
}

}  // namespace csnlg
