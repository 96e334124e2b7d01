#pragma once

// Finite-difference verification of every differentiable operation: LSTM
// step, attention, softmax cross-entropy, and a full decoder step through a
// miniature generator. Used by the `gradcheck` CLI command and the test
// suites.

#include <string>
#include <vector>

#include "csnlg/nn.hpp"
#include "csnlg/seq2seq.hpp"

namespace csnlg {

struct GradSuiteResult {
    struct Entry {
        std::string name;
        double max_rel_error = 0.0;
        std::size_t checked = 0;
        std::string worst;
    };
    std::vector<Entry> entries;
    double tolerance = 1e-4;

    bool ok() const {
        for (const auto& e : entries)
            if (e.checked == 0 || e.max_rel_error >= tolerance) return false;
        return !entries.empty();
    }
};

namespace detail {

template <typename Forward>
void run_check(GradSuiteResult& res, const std::string& name, nn::ModelParams& params, Forward&& fwd) {
    params.zero_grads();
    {
        nn::Tape t;
        t.backward(fwd(t));
    }
    auto loss = [&]() {
        nn::Tape t;
        return t.val(fwd(t)).v[0];
    };
    auto report = nn::finite_difference_check(params, loss);
    auto& entry = res.entries.emplace_back();
    entry.name = name;
    entry.max_rel_error = std::max(entry.max_rel_error, report.max_rel_error);
    entry.checked = report.checked;
    entry.worst = report.worst;
}

inline std::vector<Instance> micro_grad_corpus(const Registry& reg) {
    std::vector<Instance> out;
    for (const char* spec : {"inform(name=N1)\tv a b", "inform(name=N2,food=F1)\tv b a c",
                             "goodbye()\tz z"}) {
        auto parts = split(spec, '\t');
        Instance inst;
        inst.da_string = parts[0];
        inst.da = parse_da(parts[0], reg);
        inst.text = tokenize(parts[1]);
        inst.delex_text = inst.text;
        inst.lemmas = inst.text;
        inst.signature = da_signature(inst.da, reg).text;
        out.push_back(inst);
    }
    return out;
}

inline Registry micro_grad_registry() {
    return Registry::parse("da_type inform\nda_type goodbye\nslot name delex\nslot food delex\n");
}

}  // namespace detail

inline GradSuiteResult run_gradient_suite(std::uint64_t seed, int instances_per_op = 5,
                                          double tolerance = 1e-4) {
    GradSuiteResult res;
    res.tolerance = tolerance;
    Rng master(seed);

    auto merge_into = [&](const std::string& name, GradSuiteResult& scratch) {
        GradSuiteResult::Entry merged;
        merged.name = name;
        for (const auto& e : scratch.entries) {
            merged.checked += e.checked;
            if (e.max_rel_error > merged.max_rel_error) {
                merged.max_rel_error = e.max_rel_error;
                merged.worst = e.worst;
            }
        }
        res.entries.push_back(merged);
    };

    {
        GradSuiteResult scratch;
        for (int i = 0; i < instances_per_op; ++i) {
            Rng init = master.derive(100 + i);
            std::size_t in_dim = 2 + init.index(3), hidden = 2 + init.index(3);
            nn::ModelParams params;
            nn::add_lstm(params, "cell", in_dim, hidden, init);
            params.add_uniform("x", {in_dim}, init, -1.0, 1.0);
            params.add_uniform("h0", {hidden}, init, -0.5, 0.5);
            params.add_uniform("c0", {hidden}, init, -0.5, 0.5);
            params.add_uniform("probe_h", {hidden}, init, -1.0, 1.0);
            params.add_uniform("probe_c", {hidden}, init, -1.0, 1.0);
            detail::run_check(scratch, "lstm", params, [&](nn::Tape& t) {
                auto st = nn::lstm_step(t, t.leaf(params.at("cell.W")), t.leaf(params.at("cell.b")),
                                        t.leaf(params.at("x")),
                                        {t.leaf(params.at("h0")), t.leaf(params.at("c0"))}, hidden);
                return t.add(t.dot(st.h, t.leaf(params.at("probe_h"))),
                             t.dot(st.c, t.leaf(params.at("probe_c"))));
            });
        }
        merge_into("lstm_step", scratch);
    }

    {
        GradSuiteResult scratch;
        for (int i = 0; i < instances_per_op; ++i) {
            Rng init = master.derive(200 + i);
            std::size_t dec = 2 + init.index(3), enc = 2 + init.index(3), att = 2 + init.index(3);
            std::size_t n_states = 1 + init.index(4);
            nn::ModelParams params;
            nn::add_attention(params, "attn", dec, enc, att, init);
            params.add_uniform("dec", {dec}, init, -1.0, 1.0);
            for (std::size_t s = 0; s < n_states; ++s)
                params.add_uniform("e" + std::to_string(s), {enc}, init, -1.0, 1.0);
            params.add_uniform("probe", {enc}, init, -1.0, 1.0);
            detail::run_check(scratch, "attention", params, [&](nn::Tape& t) {
                nn::AttentionIds ids{t.leaf(params.at("attn.W")), t.leaf(params.at("attn.b")),
                                     t.leaf(params.at("attn.v"))};
                std::vector<nn::Tape::Id> states;
                for (std::size_t s = 0; s < n_states; ++s)
                    states.push_back(t.leaf(params.at("e" + std::to_string(s))));
                nn::Tape::Id ctx = -1;
                nn::attention_weights(t, ids, t.leaf(params.at("dec")), states, &ctx);
                return t.dot(ctx, t.leaf(params.at("probe")));
            });
        }
        merge_into("attention", scratch);
    }

    {
        GradSuiteResult scratch;
        for (int i = 0; i < instances_per_op; ++i) {
            Rng init = master.derive(300 + i);
            std::size_t n = 3 + init.index(5);
            std::size_t target = init.index(n);
            nn::ModelParams params;
            params.add_uniform("logits", {n}, init, -2.0, 2.0);
            detail::run_check(scratch, "softmax_xent", params, [&](nn::Tape& t) {
                return t.softmax_xent(t.leaf(params.at("logits")), target);
            });
        }
        merge_into("softmax_xent", scratch);
    }

    {
        GradSuiteResult scratch;
        auto reg = detail::micro_grad_registry();
        auto corpus = detail::micro_grad_corpus(reg);
        for (int i = 0; i < instances_per_op; ++i) {
            GeneratorConfig cfg;
            cfg.embedding_size = 3;
            cfg.cell_size = 4;
            cfg.dropout_rate = 0.0;
            cfg.vocab_min_freq = 1;
            auto gen = Seq2SeqGenerator::create(cfg, corpus, reg, master.derive(400 + i).raw());
            const auto& inst = corpus[static_cast<std::size_t>(i) % corpus.size()];
            auto triples = generation_input(inst.da, reg, cfg.input_mode);
            auto target = gen.out_vocab.ids(inst.delex_text);
            detail::run_check(scratch, "decoder", gen.params, [&](nn::Tape& t) {
                auto b = gen.bind(t, true);
                return gen.sequence_loss(t, b, triples, target, false, nullptr);
            });
        }
        merge_into("decoder_step", scratch);
    }

    return res;
}

inline std::string format_gradient_suite(const GradSuiteResult& res) {
    std::string out;
    for (const auto& e : res.entries) {
        char buf[256];
        std::snprintf(buf, sizeof(buf), "%-14s max rel err %.3e over %zu checks%s%s\n", e.name.c_str(),
                      e.max_rel_error, e.checked,
                      e.max_rel_error >= res.tolerance ? "  FAIL at " : "",
                      e.max_rel_error >= res.tolerance ? e.worst.c_str() : "");
        out += buf;
    }
    out += res.ok() ? "gradient suite: PASS\n" : "gradient suite: FAIL\n";
    return out;
}

}  // namespace csnlg
