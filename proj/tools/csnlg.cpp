// csnlg: data-to-text NLG toolkit for morphologically rich languages.
//
// Pipeline: prepare (delexicalize + consistency check) -> split/expand ->
// train (generator / reranker / lexicalizer-lm / ngram-lm) -> generate ->
// lexicalize -> evaluate. All randomized steps take an explicit --seed and
// write a manifest next to their outputs.
//
// Exit codes: 0 success, 1 data inconsistency, 2 usage error, 3 internal
// failure.

#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "csnlg/corpus.hpp"
#include "csnlg/dataset.hpp"
#include "csnlg/gradcheck.hpp"
#include "csnlg/lexicalize.hpp"
#include "csnlg/manifest.hpp"
#include "csnlg/metrics.hpp"
#include "csnlg/ngram_lm.hpp"
#include "csnlg/reranker.hpp"
#include "csnlg/seq2seq.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace csnlg;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitDataInconsistency = 1;
constexpr int kExitUsage = 2;
constexpr int kExitInternal = 3;

std::string out_dir_override(const std::string& dir) {
    const char* env = std::getenv("CSNLG_OUTPUT_DIR");
    if (env && *env && !dir.empty() && dir[0] != '/') return std::string(env) + "/" + dir;
    return dir;
}

struct GeneratorOutput {
    std::string da;
    std::vector<std::string> output;  // pre-lexicalization tokens
    std::vector<std::string> text;    // lexicalized tokens (after `lexicalize`)
    double logprob = 0.0;
    long penalty = 0;
    std::string mode;
};

std::vector<GeneratorOutput> load_outputs(const std::string& path) {
    std::vector<GeneratorOutput> out;
    std::size_t lineno = 0;
    for (const auto& line : split(read_file(path), '\n')) {
        ++lineno;
        if (trim(line).empty()) continue;
        try {
            auto j = json::parse(line);
            GeneratorOutput o;
            o.da = j.at("da").get<std::string>();
            o.output = tokenize(j.at("output").get<std::string>());
            if (j.contains("text")) o.text = tokenize(j.at("text").get<std::string>());
            o.logprob = j.value("logprob", 0.0);
            o.penalty = j.value("penalty", 0l);
            o.mode = j.value("mode", std::string("word_forms"));
            out.push_back(std::move(o));
        } catch (const json::exception& e) {
            throw DataError(path + " line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

void save_outputs(const std::string& path, const std::vector<GeneratorOutput>& outs) {
    std::string blob;
    for (const auto& o : outs) {
        json j;
        j["da"] = o.da;
        j["output"] = join(o.output);
        if (!o.text.empty()) j["text"] = join(o.text);
        j["logprob"] = o.logprob;
        j["penalty"] = o.penalty;
        j["mode"] = o.mode;
        blob += j.dump();
        blob += '\n';
    }
    write_file(path, blob);
}

// ---------------------------------------------------------------------------

int cmd_prepare(const std::string& dataset_path, const std::string& lexicon_path,
                const std::string& registry_path, const std::string& out_path,
                const std::string& report_path, const std::string& dict_path, bool allow_missing) {
    auto reg = Registry::load(registry_path);
    auto lex = FormLexicon::load(lexicon_path);
    auto raw = load_dataset(dataset_path, &reg);

    std::vector<Instance> prepared;
    prepared.reserve(raw.size());
    for (auto& inst : raw) {
        prepared.push_back(prepare_instance(inst.da_string, inst.da, inst.text, inst.lemmas,
                                            inst.tags, lex, reg));
    }
    auto report = consistency_check(prepared, lex, reg);
    auto stats = corpus_stats(prepared, reg);

    save_dataset(out_path, prepared);
    std::string report_text = report.summary() + "\n\n" + stats.table();
    if (!report.missing.empty()) {
        report_text += "\nmissing mentions:\n";
        for (const auto& m : report.missing) {
            report_text += "  instance " + std::to_string(m.instance_index) + "  slot " + m.slot +
                           "  value '" + m.value + "'  da " + m.da_string + "\n";
        }
    }
    if (!report_path.empty()) write_file(report_path, report_text);
    std::cout << report_text;

    if (!dict_path.empty()) {
        auto dict = build_dictionary(prepared);
        write_file(dict_path, dict.serialize());
    }

    Manifest m("prepare");
    m.input(dataset_path);
    m.input(lexicon_path);
    m.input(registry_path);
    m.output(out_path);
    if (!dict_path.empty()) m.output(dict_path);
    m.config("allow_missing", allow_missing ? "true" : "false");
    m.write(out_path + ".manifest");

    if (!report.clean() && !allow_missing) {
        std::cerr << "prepare: " << report.missing.size() << " missing slot mentions\n";
        return kExitDataInconsistency;
    }
    return kExitOk;
}

int cmd_stats(const std::string& dataset_path, const std::string& registry_path,
              bool count_placeholders) {
    auto reg = Registry::load(registry_path);
    auto data = load_dataset(dataset_path, &reg);
    std::cout << corpus_stats(data, reg, count_placeholders).table();
    return kExitOk;
}

int cmd_dedup(const std::string& dataset_path, const std::string& registry_path,
              const std::string& out_path) {
    auto reg = Registry::load(registry_path);
    auto data = load_dataset(dataset_path, &reg);
    auto dedup = deduplicate(data, reg);
    std::string blob;
    for (const auto& [sig, uniques] : dedup.groups) {
        for (const auto& u : uniques) {
            json j;
            j["signature"] = sig;
            j["delex_text"] = join(u.delex_text);
            j["count"] = u.count;
            blob += j.dump();
            blob += '\n';
        }
    }
    std::cout << data.size() << " instances, " << dedup.unique_count() << " unique, "
              << dedup.groups.size() << " signatures\n";
    if (!out_path.empty()) {
        write_file(out_path, blob);
        Manifest m("dedup");
        m.input(dataset_path);
        m.output(out_path);
        m.write(out_path + ".manifest");
    }
    return kExitOk;
}

int cmd_split(const std::string& dataset_path, const std::string& registry_path,
              const std::string& out_dir, std::uint64_t seed, const std::string& ratios_str,
              const std::string& pin_types_str) {
    auto reg = Registry::load(registry_path);
    auto data = load_dataset(dataset_path, &reg);

    auto parts_str = split(ratios_str, ',');
    if (parts_str.size() != 3) throw DataError("--ratios needs three comma-separated numbers");
    std::array<double, 3> ratios{std::stod(parts_str[0]), std::stod(parts_str[1]),
                                 std::stod(parts_str[2])};

    std::set<std::string> pin_types;
    for (const auto& t : split(pin_types_str, ','))
        if (!t.empty()) pin_types.insert(t);
    auto pinned = default_pinned_signatures(data, reg, pin_types);

    auto spec = split_corpus(data, reg, ratios, seed, pinned);
    auto parts = apply_split(data, spec, reg);

    fs::create_directories(out_dir);
    const char* names[3] = {"train", "dev", "test"};
    Manifest m("split");
    m.input(dataset_path);
    m.input(registry_path);
    m.set_seed(seed);
    m.config("ratios", ratios_str);
    for (int p = 0; p < 3; ++p) {
        std::string path = out_dir + "/" + names[p] + ".jsonl";
        save_dataset(path, parts[p]);
        m.output(path);
        std::cout << names[p] << ": " << spec.signature_counts[p] << " signatures, "
                  << spec.instance_counts[p] << " instances\n";
    }
    for (const auto& w : spec.warnings) std::cout << "warning: " << w << "\n";
    m.write(out_dir + "/split.manifest");
    return kExitOk;
}

int cmd_expand(const std::string& dataset_path, const std::string& registry_path,
               const std::string& lexicon_path, const std::string& lm_path,
               const std::string& targets_path, const std::string& out_path,
               const std::string& review_path, std::uint64_t seed, double temperature) {
    auto reg = Registry::load(registry_path);
    auto lex = FormLexicon::load(lexicon_path);
    auto data = load_dataset(dataset_path, &reg);
    auto lm = NGramModel::load(lm_path);

    std::map<std::string, long> targets;
    std::size_t lineno = 0;
    for (const auto& line : split(read_file(targets_path), '\n')) {
        ++lineno;
        if (trim(line).empty() || line[0] == '#') continue;
        auto cols = split(line, '\t');
        if (cols.size() != 2)
            throw DataError(targets_path + " line " + std::to_string(lineno) +
                            ": expected 'signature<TAB>count'");
        targets[cols[0]] = std::stol(cols[1]);
    }

    auto dedup = deduplicate(data, reg);
    auto res = expand(data, dedup, targets, lm, lex, reg, seed, temperature);
    save_dataset(out_path, res.instances);
    if (!review_path.empty()) write_file(review_path, join(res.review_lines, "\n") + "\n");
    std::cout << "expanded " << data.size() << " -> " << res.instances.size() << " instances\n";

    Manifest m("expand");
    m.input(dataset_path);
    m.input(lexicon_path);
    m.input(lm_path);
    m.input(targets_path);
    m.set_seed(seed);
    m.config("temperature", std::to_string(temperature));
    m.output(out_path);
    if (!review_path.empty()) m.output(review_path);
    m.write(out_path + ".manifest");
    return kExitOk;
}

int cmd_train_ngram(const std::string& dataset_path, const std::string& registry_path,
                    const std::string& out_path, int order, const std::string& field) {
    auto reg = Registry::load(registry_path);
    auto data = load_dataset(dataset_path, &reg);
    std::vector<std::vector<std::string>> corpus;
    for (const auto& inst : data) {
        if (field == "lemmas") corpus.push_back(inst.lemmas.empty() ? inst.delex_text : inst.lemmas);
        else if (field == "delex_text") corpus.push_back(inst.delex_text);
        else if (field == "text") corpus.push_back(inst.text);
        else throw DataError("unknown --field: " + field);
    }
    auto lm = NGramModel::train(corpus, order);
    lm.save(out_path);
    std::cout << "trained order-" << order << " model on " << corpus.size() << " sequences, "
              << "perplexity " << lm.perplexity(corpus) << "\n";

    Manifest m("train-ngram-lm");
    m.input(dataset_path);
    m.config("order", std::to_string(order));
    m.config("field", field);
    m.output(out_path);
    m.write(out_path + ".manifest");
    return kExitOk;
}

struct GeneratorCliOptions {
    std::string mode = "word_forms";
    std::string input_mode = "delexicalized";
    std::size_t embedding_size = 200;
    std::size_t cell_size = 200;
    double learning_rate = 0.005;
    double dropout = 0.5;
    std::size_t batch_size = 20;
    std::size_t min_passes = 50;
    std::size_t max_passes = 1000;
    std::size_t patience = 50;
    std::size_t beam = 20;
    long vocab_min_freq = 2;
    bool patience_on_best = false;

    GeneratorConfig to_config() const {
        GeneratorConfig cfg;
        cfg.mode = GeneratorConfig::parse_mode(mode);
        cfg.input_mode = GeneratorConfig::parse_input_mode(input_mode);
        cfg.embedding_size = embedding_size;
        cfg.cell_size = cell_size;
        cfg.learning_rate = learning_rate;
        cfg.dropout_rate = dropout;
        cfg.batch_size = batch_size;
        cfg.min_passes = min_passes;
        cfg.max_passes = max_passes;
        cfg.patience = patience;
        cfg.beam_size = beam;
        cfg.vocab_min_freq = vocab_min_freq;
        cfg.patience_on_best_only = patience_on_best;
        return cfg;
    }
};

int cmd_train_generator(const std::string& train_path, const std::string& dev_path,
                        const std::string& registry_path, const std::string& out_dir,
                        std::uint64_t seed, const GeneratorCliOptions& opts) {
    auto reg = Registry::load(registry_path);
    auto train = load_dataset(train_path, &reg);
    auto dev = dev_path.empty() ? std::vector<Instance>{} : load_dataset(dev_path, &reg);
    auto cfg = opts.to_config();

    auto res = train_generator(cfg, train, dev, reg, seed);
    fs::create_directories(out_dir);
    res.model.save(out_dir);

    std::string log_blob = "pass\ttrain_loss\tdev_bleu\tkept\n";
    for (const auto& e : res.log) {
        char buf[128];
        std::snprintf(buf, sizeof(buf), "%zu\t%.6f\t%.4f\t%s\n", e.pass, e.train_loss, e.dev_bleu,
                      e.kept ? "kept" : "discarded");
        log_blob += buf;
    }
    write_file(out_dir + "/train.log", log_blob);
    std::cout << "trained generator: " << res.stopped_at << " passes, best dev BLEU " << res.best_bleu
              << " at pass " << res.best_pass << "\n";

    Manifest m("train-generator");
    m.input(train_path);
    if (!dev_path.empty()) m.input(dev_path);
    m.input(registry_path);
    m.set_seed(seed);
    m.config("mode", opts.mode);
    m.config("input_mode", opts.input_mode);
    m.config("embedding_size", std::to_string(opts.embedding_size));
    m.config("cell_size", std::to_string(opts.cell_size));
    m.config("learning_rate", std::to_string(opts.learning_rate));
    m.config("dropout", std::to_string(opts.dropout));
    m.config("batch_size", std::to_string(opts.batch_size));
    m.config("passes", std::to_string(opts.min_passes) + ".." + std::to_string(opts.max_passes));
    m.config("patience", std::to_string(opts.patience));
    m.output(out_dir + "/params.bin");
    m.output(out_dir + "/model.json");
    m.write(out_dir + "/train.manifest");
    return kExitOk;
}

int cmd_train_reranker(const std::string& train_path, const std::string& dev_path,
                       const std::string& registry_path, const std::string& out_dir,
                       std::uint64_t seed, const std::string& mode, std::size_t embedding,
                       std::size_t cell, double lr, std::size_t passes, std::size_t validate_from) {
    auto reg = Registry::load(registry_path);
    auto train = load_dataset(train_path, &reg);
    auto dev = dev_path.empty() ? std::vector<Instance>{} : load_dataset(dev_path, &reg);
    RerankerConfig cfg;
    cfg.embedding_size = embedding;
    cfg.cell_size = cell;
    cfg.learning_rate = lr;
    cfg.passes = passes;
    cfg.validate_from = validate_from;
    auto res = train_reranker(cfg, train, dev, GeneratorConfig::parse_mode(mode), reg, seed);
    fs::create_directories(out_dir);
    res.model.save(out_dir);
    std::cout << "trained reranker: best validation error at pass " << res.best_pass << "\n";

    Manifest m("train-reranker");
    m.input(train_path);
    if (!dev_path.empty()) m.input(dev_path);
    m.set_seed(seed);
    m.config("mode", mode);
    m.config("passes", std::to_string(passes));
    m.output(out_dir + "/params.bin");
    m.write(out_dir + "/train.manifest");
    return kExitOk;
}

int cmd_train_bilm(const std::string& train_path, const std::string& dev_path,
                   const std::string& registry_path, const std::string& out_dir, std::uint64_t seed,
                   std::size_t embedding, std::size_t cell, double lr, std::size_t max_passes) {
    auto reg = Registry::load(registry_path);
    auto train = load_dataset(train_path, &reg);
    auto dev = dev_path.empty() ? std::vector<Instance>{} : load_dataset(dev_path, &reg);
    BiLmConfig cfg;
    cfg.embedding_size = embedding;
    cfg.cell_size = cell;
    cfg.learning_rate = lr;
    cfg.max_passes = max_passes;
    auto res = train_bi_lm(cfg, bilm_corpus(train), bilm_corpus(dev), seed);
    fs::create_directories(out_dir);
    res.model.save(out_dir);
    std::cout << "trained lexicalizer LM: best dev perplexity at pass " << res.best_pass << "\n";

    Manifest m("train-lexicalizer-lm");
    m.input(train_path);
    if (!dev_path.empty()) m.input(dev_path);
    m.set_seed(seed);
    m.config("max_passes", std::to_string(max_passes));
    m.output(out_dir + "/params.bin");
    m.write(out_dir + "/train.manifest");
    return kExitOk;
}

int cmd_generate(const std::string& model_dir, const std::string& dataset_path,
                 const std::string& registry_path, const std::string& out_path,
                 const std::string& reranker_dir, std::size_t beam, std::size_t max_len) {
    if (!fs::exists(model_dir + "/model.json"))
        throw DataError("checkpoint not found: " + model_dir + "/model.json");
    auto reg = Registry::load(registry_path);
    auto gen = Seq2SeqGenerator::load(model_dir);
    auto data = load_dataset(dataset_path, &reg);
    std::optional<Reranker> reranker;
    if (!reranker_dir.empty()) reranker.emplace(Reranker::load(reranker_dir));

    std::vector<GeneratorOutput> outs;
    for (const auto& inst : data) {
        auto cands = gen.beam_decode(inst.da, reg, beam, max_len);
        GeneratorOutput o;
        o.da = inst.da_string;
        o.mode = GeneratorConfig::mode_name(gen.cfg.mode);
        if (!cands.empty()) {
            if (reranker) rerank(cands, *reranker, inst.da, reg);
            o.output = cands[0].surface();
            o.logprob = cands[0].logprob;
            o.penalty = cands[0].penalty;
        }
        outs.push_back(std::move(o));
    }
    save_outputs(out_path, outs);
    std::cout << "generated " << outs.size() << " outputs\n";

    Manifest m("generate");
    m.input(model_dir + "/params.bin");
    m.input(model_dir + "/model.json");
    m.input(dataset_path);
    if (!reranker_dir.empty()) m.input(reranker_dir + "/params.bin");
    m.config("beam", std::to_string(beam));
    m.config("max_len", std::to_string(max_len));
    m.output(out_path);
    m.write(out_path + ".manifest");
    return kExitOk;
}

int cmd_lexicalize(const std::string& outputs_path, const std::string& dataset_path,
                   const std::string& lexicon_path, const std::string& registry_path,
                   const std::string& dict_path, const std::string& out_path,
                   const std::string& strategy_name, const std::string& lm_dir,
                   const std::string& freq_train_path, std::uint64_t seed) {
    auto reg = Registry::load(registry_path);
    auto lex = FormLexicon::load(lexicon_path);
    auto outs = load_outputs(outputs_path);
    auto data = load_dataset(dataset_path, &reg);
    if (outs.size() != data.size())
        throw DataError("outputs and dataset differ in size (" + std::to_string(outs.size()) + " vs " +
                        std::to_string(data.size()) + ")");
    if (!freq_train_path.empty())
        lex = with_corpus_frequencies(std::move(lex), load_dataset(freq_train_path, &reg));

    std::optional<BiRnnLm> lm;
    LexStrategy strategy;
    strategy.kind = parse_lex_kind(strategy_name);
    strategy.seed = seed;
    if (strategy.kind == LexKind::RnnLm) {
        if (lm_dir.empty()) throw DataError("rnn_lm strategy needs --lm");
        lm.emplace(BiRnnLm::load(lm_dir));
        strategy.lm = &*lm;
    }
    std::optional<MorphDictionary> dict;
    if (!dict_path.empty()) dict.emplace(MorphDictionary::load(dict_path));

    std::size_t unfilled_total = 0;
    for (std::size_t i = 0; i < outs.size(); ++i) {
        auto& o = outs[i];
        strategy.seed = Rng(seed).derive(i).raw();  // per-instance stream, order-independent
        std::vector<std::string> unfilled;
        if (o.mode == "lemma_tag") {
            auto de = deinterleave(o.output);
            if (!dict) throw DataError("lemma_tag outputs need --dictionary for realization");
            auto realized = realize_lemma_tags(de.lemmas, de.tags, *dict);
            o.text = lexicalize_output(realized.tokens, data[i].da, lex, reg, strategy,
                                       GeneratorConfig::Mode::LemmaTag, &realized.hints, &unfilled);
        } else {
            o.text = lexicalize_output(o.output, data[i].da, lex, reg, strategy,
                                       GeneratorConfig::Mode::WordForms, nullptr, &unfilled);
        }
        unfilled_total += unfilled.size();
    }
    save_outputs(out_path, outs);
    std::cout << "lexicalized " << outs.size() << " outputs with " << strategy_name;
    if (unfilled_total > 0) std::cout << " (" << unfilled_total << " placeholders left unfilled)";
    std::cout << "\n";

    Manifest m("lexicalize");
    m.input(outputs_path);
    m.input(dataset_path);
    m.input(lexicon_path);
    if (!dict_path.empty()) m.input(dict_path);
    if (!lm_dir.empty()) m.input(lm_dir + "/params.bin");
    m.set_seed(seed);
    m.config("strategy", strategy_name);
    m.output(out_path);
    m.write(out_path + ".manifest");
    return kExitOk;
}

int cmd_evaluate(const std::string& outputs_path, const std::string& dataset_path,
                 const std::string& registry_path, const std::string& report_path,
                 const std::string& machine_path, const std::string& per_instance_path,
                 const std::string& space) {
    auto reg = Registry::load(registry_path);
    auto outs = load_outputs(outputs_path);
    auto data = load_dataset(dataset_path, &reg);
    if (outs.size() != data.size())
        throw DataError("outputs and dataset differ in size (" + std::to_string(outs.size()) + " vs " +
                        std::to_string(data.size()) + ")");

    std::vector<EvalPair> pairs(outs.size());
    std::vector<std::vector<std::string>> pre_lex(outs.size());
    std::vector<DialogueAct> das(outs.size());
    for (std::size_t i = 0; i < outs.size(); ++i) {
        if (space == "surface") {
            if (outs[i].text.empty() && !outs[i].output.empty())
                throw DataError("outputs lack lexicalized text; run `csnlg lexicalize` first or pass "
                                "--space delex");
            pairs[i].hyp = outs[i].text;
            pairs[i].refs = {data[i].text};
        } else {
            pairs[i].hyp = outs[i].output;
            pairs[i].refs = {data[i].delex_text.empty() ? data[i].text : data[i].delex_text};
        }
        pre_lex[i] = outs[i].output;
        das[i] = data[i].da;
    }
    auto report = evaluate_outputs(pairs, pre_lex, das, reg);
    std::cout << report.table();
    if (!report_path.empty()) write_file(report_path, report.table());
    if (!machine_path.empty()) {
        json j;
        j["bleu"] = report.bleu;
        j["nist"] = report.nist;
        j["meteor"] = report.meteor;
        j["rouge_l"] = report.rouge_l;
        j["cider"] = report.cider;
        j["ser"] = report.ser_corpus;
        j["ser_instance_avg"] = report.ser_instance_avg;
        j["pairs"] = report.pairs;
        write_file(machine_path, j.dump(2) + "\n");
    }
    if (!per_instance_path.empty()) {
        std::string blob;
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            json j;
            j["index"] = i;
            j["bleu"] = sentence_bleu(pairs[i].hyp, pairs[i].refs);
            j["ser"] = ser(pre_lex[i], das[i], reg);
            blob += j.dump();
            blob += '\n';
        }
        write_file(per_instance_path, blob);
    }
    return kExitOk;
}

int cmd_bootstrap(const std::string& a_path, const std::string& b_path, const std::string& metric,
                  std::size_t resamples, std::uint64_t seed) {
    auto read_scores = [&](const std::string& path) {
        std::vector<double> out;
        for (const auto& line : split(read_file(path), '\n')) {
            if (trim(line).empty()) continue;
            out.push_back(json::parse(line).at(metric).get<double>());
        }
        return out;
    };
    double p = bootstrap_test(read_scores(a_path), read_scores(b_path), resamples, seed);
    std::cout << "p(B >= A) = " << p << "\n";
    return kExitOk;
}

int cmd_gradcheck(std::uint64_t seed, int instances, double tolerance) {
    auto res = run_gradient_suite(seed, instances, tolerance);
    std::cout << format_gradient_suite(res);
    return res.ok() ? kExitOk : kExitInternal;
}

int cmd_sweep(const std::string& train_path, const std::string& dev_path, const std::string& test_path,
              const std::string& registry_path, const std::string& lexicon_path,
              const std::string& dict_path, const std::string& out_dir, const std::string& seeds_str,
              GeneratorCliOptions gen_opts, std::size_t reranker_passes, std::size_t lm_passes) {
    auto reg = Registry::load(registry_path);
    auto lex_base = FormLexicon::load(lexicon_path);
    auto train = load_dataset(train_path, &reg);
    auto dev = load_dataset(dev_path, &reg);
    auto test = load_dataset(test_path, &reg);
    auto lex = with_corpus_frequencies(lex_base, train);
    std::optional<MorphDictionary> dict;
    if (!dict_path.empty()) dict.emplace(MorphDictionary::load(dict_path));
    else dict.emplace(build_dictionary(train));

    std::vector<std::uint64_t> seeds;
    for (const auto& s : split(seeds_str, ','))
        if (!s.empty()) seeds.push_back(std::stoull(s));
    if (seeds.empty()) throw DataError("--seeds must list at least one seed");

    fs::create_directories(out_dir + "/reports");
    std::string summary = "input_das\tmode\tlexicalizer\tseed\tbleu\tnist\tmeteor\trouge_l\tcider\tser\n";

    for (auto seed : seeds) {
        // one lexicalizer LM per seed, shared across modes
        BiLmConfig lm_cfg;
        lm_cfg.max_passes = lm_passes;
        auto bilm = train_bi_lm(lm_cfg, bilm_corpus(train), bilm_corpus(dev), seed).model;

        for (const std::string input_mode : {"delexicalized", "lexicalized"}) {
            for (const std::string mode : {"word_forms", "lemma_tag"}) {
                GeneratorCliOptions opts = gen_opts;
                opts.mode = mode;
                opts.input_mode = input_mode;
                auto cfg = opts.to_config();
                auto gen_res = train_generator(cfg, train, dev, reg, seed);

                RerankerConfig rcfg;
                rcfg.passes = reranker_passes;
                auto rr_res = train_reranker(rcfg, train, dev, cfg.mode, reg, seed);

                std::vector<GeneratorOutput> outs;
                for (const auto& inst : test) {
                    auto cands = gen_res.model.beam_decode(inst.da, reg, cfg.beam_size,
                                                           cfg.max_output_length);
                    GeneratorOutput o;
                    o.da = inst.da_string;
                    o.mode = mode;
                    if (!cands.empty()) {
                        rerank(cands, rr_res.model, inst.da, reg);
                        o.output = cands[0].surface();
                        o.logprob = cands[0].logprob;
                        o.penalty = cands[0].penalty;
                    }
                    outs.push_back(std::move(o));
                }

                for (const std::string lex_kind : {"random", "most_frequent", "rnn_lm"}) {
                    LexStrategy strategy;
                    strategy.kind = parse_lex_kind(lex_kind);
                    strategy.lm = &bilm;
                    auto final_outs = outs;
                    for (std::size_t i = 0; i < final_outs.size(); ++i) {
                        strategy.seed = Rng(seed).derive(i).raw();
                        std::vector<std::string> unfilled;
                        if (mode == "lemma_tag") {
                            auto de = deinterleave(final_outs[i].output);
                            auto realized = realize_lemma_tags(de.lemmas, de.tags, *dict);
                            final_outs[i].text =
                                lexicalize_output(realized.tokens, test[i].da, lex, reg, strategy,
                                                  GeneratorConfig::Mode::LemmaTag, &realized.hints,
                                                  &unfilled);
                        } else {
                            final_outs[i].text =
                                lexicalize_output(final_outs[i].output, test[i].da, lex, reg, strategy,
                                                  GeneratorConfig::Mode::WordForms, nullptr, &unfilled);
                        }
                    }

                    std::vector<EvalPair> pairs(test.size());
                    std::vector<std::vector<std::string>> pre_lex(test.size());
                    std::vector<DialogueAct> das(test.size());
                    for (std::size_t i = 0; i < test.size(); ++i) {
                        pairs[i].hyp = final_outs[i].text;
                        pairs[i].refs = {test[i].text};
                        pre_lex[i] = final_outs[i].output;
                        das[i] = test[i].da;
                    }
                    auto rep = evaluate_outputs(pairs, pre_lex, das, reg);
                    std::string stem = input_mode + "__" + mode + "__" + lex_kind + "__seed" +
                                       std::to_string(seed);
                    json j;
                    j["input_das"] = input_mode;
                    j["mode"] = mode;
                    j["lexicalizer"] = lex_kind;
                    j["seed"] = seed;
                    j["bleu"] = rep.bleu;
                    j["nist"] = rep.nist;
                    j["meteor"] = rep.meteor;
                    j["rouge_l"] = rep.rouge_l;
                    j["cider"] = rep.cider;
                    j["ser"] = rep.ser_corpus;
                    write_file(out_dir + "/reports/" + stem + ".json", j.dump(2) + "\n");
                    char row[512];
                    std::snprintf(row, sizeof(row),
                                  "%s\t%s\t%s\t%llu\t%.2f\t%.4f\t%.2f\t%.2f\t%.4f\t%.2f\n",
                                  input_mode.c_str(), mode.c_str(), lex_kind.c_str(),
                                  static_cast<unsigned long long>(seed), rep.bleu, rep.nist, rep.meteor,
                                  rep.rouge_l, rep.cider, rep.ser_corpus);
                    summary += row;
                    std::cout << row;
                }
            }
        }
    }
    write_file(out_dir + "/reports/summary.tsv", summary);

    Manifest m("sweep");
    m.input(train_path);
    m.input(dev_path);
    m.input(test_path);
    m.input(lexicon_path);
    m.config("seeds", seeds_str);
    m.output(out_dir + "/reports/summary.tsv");
    m.write(out_dir + "/sweep.manifest");
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"csnlg: trainable data-to-text generation with morphological lexicalization"};
    app.require_subcommand(1);

    std::string dataset, lexicon, registry, out, report, dict, dev, test, model_dir, reranker_dir;
    bool allow_missing = false, count_placeholders = false;
    auto* prepare = app.add_subcommand("prepare", "delexicalize and check a raw corpus");
    prepare->add_option("--dataset", dataset)->required();
    prepare->add_option("--lexicon", lexicon)->required();
    prepare->add_option("--registry", registry)->required();
    prepare->add_option("--out", out)->required();
    prepare->add_option("--report", report);
    prepare->add_option("--dictionary", dict);
    prepare->add_flag("--allow-missing", allow_missing);

    auto* stats = app.add_subcommand("stats", "corpus statistics");
    stats->add_option("--dataset", dataset)->required();
    stats->add_option("--registry", registry)->required();
    stats->add_flag("--count-placeholders", count_placeholders);

    auto* dedup = app.add_subcommand("dedup", "unique delexicalized texts per DA signature");
    dedup->add_option("--dataset", dataset)->required();
    dedup->add_option("--registry", registry)->required();
    dedup->add_option("--out", out);

    std::uint64_t seed = 1;
    std::string ratios = "3,1,1", pin_types = "goodbye,?reqmore";
    auto* split_cmd = app.add_subcommand("split", "overlap-free train/dev/test split");
    split_cmd->add_option("--dataset", dataset)->required();
    split_cmd->add_option("--registry", registry)->required();
    split_cmd->add_option("--out-dir", out)->required();
    split_cmd->add_option("--seed", seed)->required();
    split_cmd->add_option("--ratios", ratios);
    split_cmd->add_option("--pin-types", pin_types);

    std::string lm_path, targets, review;
    double temperature = 1.0;
    auto* expand_cmd = app.add_subcommand("expand", "LM-weighted duplication to target counts");
    expand_cmd->add_option("--dataset", dataset)->required();
    expand_cmd->add_option("--registry", registry)->required();
    expand_cmd->add_option("--lexicon", lexicon)->required();
    expand_cmd->add_option("--lm", lm_path)->required();
    expand_cmd->add_option("--targets", targets)->required();
    expand_cmd->add_option("--out", out)->required();
    expand_cmd->add_option("--review", review);
    expand_cmd->add_option("--seed", seed)->required();
    expand_cmd->add_option("--temperature", temperature);

    auto* train = app.add_subcommand("train", "train a model");
    train->require_subcommand(1);

    int order = 5;
    std::string field = "lemmas";
    auto* train_ngram = train->add_subcommand("ngram-lm", "backoff n-gram language model");
    train_ngram->add_option("--dataset", dataset)->required();
    train_ngram->add_option("--registry", registry)->required();
    train_ngram->add_option("--out", out)->required();
    train_ngram->add_option("--order", order);
    train_ngram->add_option("--field", field);

    GeneratorCliOptions gen_opts;
    std::string train_path;
    auto* train_gen = train->add_subcommand("generator", "attention seq2seq generator");
    train_gen->add_option("--train", train_path)->required();
    train_gen->add_option("--dev", dev);
    train_gen->add_option("--registry", registry)->required();
    train_gen->add_option("--out", out)->required();
    train_gen->add_option("--seed", seed)->required();
    train_gen->add_option("--mode", gen_opts.mode)->check(CLI::IsMember({"word_forms", "lemma_tag"}));
    train_gen->add_option("--input-mode", gen_opts.input_mode)
        ->check(CLI::IsMember({"delexicalized", "lexicalized"}));
    train_gen->add_option("--embedding-size", gen_opts.embedding_size);
    train_gen->add_option("--cell-size", gen_opts.cell_size);
    train_gen->add_option("--learning-rate", gen_opts.learning_rate);
    train_gen->add_option("--dropout", gen_opts.dropout);
    train_gen->add_option("--batch-size", gen_opts.batch_size);
    train_gen->add_option("--min-passes", gen_opts.min_passes);
    train_gen->add_option("--max-passes", gen_opts.max_passes);
    train_gen->add_option("--patience", gen_opts.patience);
    train_gen->add_option("--beam", gen_opts.beam);
    train_gen->add_option("--vocab-min-freq", gen_opts.vocab_min_freq);
    train_gen->add_flag("--patience-on-best", gen_opts.patience_on_best,
                        "reset patience only on a new best score");

    std::size_t r_embedding = 50, r_cell = 50, r_passes = 100, r_validate_from = 10;
    double r_lr = 0.001;
    std::string r_mode = "word_forms";
    auto* train_rr = train->add_subcommand("reranker", "semantic classification reranker");
    train_rr->add_option("--train", train_path)->required();
    train_rr->add_option("--dev", dev);
    train_rr->add_option("--registry", registry)->required();
    train_rr->add_option("--out", out)->required();
    train_rr->add_option("--seed", seed)->required();
    train_rr->add_option("--mode", r_mode)->check(CLI::IsMember({"word_forms", "lemma_tag"}));
    train_rr->add_option("--embedding-size", r_embedding);
    train_rr->add_option("--cell-size", r_cell);
    train_rr->add_option("--learning-rate", r_lr);
    train_rr->add_option("--passes", r_passes);
    train_rr->add_option("--validate-from", r_validate_from);

    std::size_t lm_embedding = 50, lm_cell = 50, lm_max_passes = 50;
    double lm_lr = 0.001;
    auto* train_lm = train->add_subcommand("lexicalizer-lm", "bidirectional LSTM LM for lexicalization");
    train_lm->add_option("--train", train_path)->required();
    train_lm->add_option("--dev", dev);
    train_lm->add_option("--registry", registry)->required();
    train_lm->add_option("--out", out)->required();
    train_lm->add_option("--seed", seed)->required();
    train_lm->add_option("--embedding-size", lm_embedding);
    train_lm->add_option("--cell-size", lm_cell);
    train_lm->add_option("--learning-rate", lm_lr);
    train_lm->add_option("--max-passes", lm_max_passes);

    std::size_t beam = 20, max_len = 60;
    auto* generate = app.add_subcommand("generate", "beam decode a dataset's DAs");
    generate->add_option("--model", model_dir)->required();
    generate->add_option("--dataset", dataset)->required();
    generate->add_option("--registry", registry)->required();
    generate->add_option("--out", out)->required();
    generate->add_option("--reranker", reranker_dir);
    generate->add_option("--beam", beam);
    generate->add_option("--max-len", max_len);

    std::string outputs_path, strategy_name = "most_frequent", lm_dir, freq_train;
    auto* lexicalize = app.add_subcommand("lexicalize", "fill placeholders with inflected forms");
    lexicalize->add_option("--outputs", outputs_path)->required();
    lexicalize->add_option("--dataset", dataset)->required();
    lexicalize->add_option("--lexicon", lexicon)->required();
    lexicalize->add_option("--registry", registry)->required();
    lexicalize->add_option("--dictionary", dict);
    lexicalize->add_option("--out", out)->required();
    lexicalize->add_option("--strategy", strategy_name)
        ->check(CLI::IsMember({"random", "most_frequent", "rnn_lm"}));
    lexicalize->add_option("--lm", lm_dir);
    lexicalize->add_option("--freq-train", freq_train,
                           "prepared corpus supplying surface-form frequencies");
    lexicalize->add_option("--seed", seed);

    std::string machine, per_instance, space = "surface";
    auto* evaluate = app.add_subcommand("evaluate", "word-overlap metrics and slot error rate");
    evaluate->add_option("--outputs", outputs_path)->required();
    evaluate->add_option("--dataset", dataset)->required();
    evaluate->add_option("--registry", registry)->required();
    evaluate->add_option("--report", report);
    evaluate->add_option("--machine", machine);
    evaluate->add_option("--per-instance", per_instance);
    evaluate->add_option("--space", space)->check(CLI::IsMember({"surface", "delex"}));

    std::string scores_a, scores_b, metric = "bleu";
    std::size_t resamples = 1000;
    auto* bootstrap = app.add_subcommand("bootstrap", "pairwise bootstrap significance");
    bootstrap->add_option("--a", scores_a)->required();
    bootstrap->add_option("--b", scores_b)->required();
    bootstrap->add_option("--metric", metric);
    bootstrap->add_option("--resamples", resamples);
    bootstrap->add_option("--seed", seed)->required();

    int gc_instances = 5;
    double gc_tolerance = 1e-4;
    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient suite");
    gradcheck->add_option("--seed", seed);
    gradcheck->add_option("--instances", gc_instances);
    gradcheck->add_option("--tolerance", gc_tolerance);

    std::string seeds_str = "1,2,3,4,5";
    std::size_t sweep_rr_passes = 100, sweep_lm_passes = 50;
    GeneratorCliOptions sweep_opts;
    auto* sweep = app.add_subcommand("sweep", "all mode/input/lexicalizer variants across seeds");
    sweep->add_option("--train", train_path)->required();
    sweep->add_option("--dev", dev)->required();
    sweep->add_option("--test", test)->required();
    sweep->add_option("--registry", registry)->required();
    sweep->add_option("--lexicon", lexicon)->required();
    sweep->add_option("--dictionary", dict);
    sweep->add_option("--out-dir", out)->required();
    sweep->add_option("--seeds", seeds_str);
    sweep->add_option("--embedding-size", sweep_opts.embedding_size);
    sweep->add_option("--cell-size", sweep_opts.cell_size);
    sweep->add_option("--learning-rate", sweep_opts.learning_rate);
    sweep->add_option("--dropout", sweep_opts.dropout);
    sweep->add_option("--batch-size", sweep_opts.batch_size);
    sweep->add_option("--min-passes", sweep_opts.min_passes);
    sweep->add_option("--max-passes", sweep_opts.max_passes);
    sweep->add_option("--patience", sweep_opts.patience);
    sweep->add_option("--beam", sweep_opts.beam);
    sweep->add_option("--vocab-min-freq", sweep_opts.vocab_min_freq);
    sweep->add_option("--reranker-passes", sweep_rr_passes);
    sweep->add_option("--lm-passes", sweep_lm_passes);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*prepare)
            return cmd_prepare(dataset, lexicon, registry, out_dir_override(out), report, dict,
                               allow_missing);
        if (*stats) return cmd_stats(dataset, registry, count_placeholders);
        if (*dedup) return cmd_dedup(dataset, registry, out_dir_override(out));
        if (*split_cmd)
            return cmd_split(dataset, registry, out_dir_override(out), seed, ratios, pin_types);
        if (*expand_cmd)
            return cmd_expand(dataset, registry, lexicon, lm_path, targets, out_dir_override(out),
                              review, seed, temperature);
        if (*train_ngram) return cmd_train_ngram(dataset, registry, out_dir_override(out), order, field);
        if (*train_gen)
            return cmd_train_generator(train_path, dev, registry, out_dir_override(out), seed, gen_opts);
        if (*train_rr)
            return cmd_train_reranker(train_path, dev, registry, out_dir_override(out), seed, r_mode,
                                      r_embedding, r_cell, r_lr, r_passes, r_validate_from);
        if (*train_lm)
            return cmd_train_bilm(train_path, dev, registry, out_dir_override(out), seed, lm_embedding,
                                  lm_cell, lm_lr, lm_max_passes);
        if (*generate)
            return cmd_generate(model_dir, dataset, registry, out_dir_override(out), reranker_dir, beam,
                                max_len);
        if (*lexicalize)
            return cmd_lexicalize(outputs_path, dataset, lexicon, registry, dict, out_dir_override(out),
                                  strategy_name, lm_dir, freq_train, seed);
        if (*evaluate)
            return cmd_evaluate(outputs_path, dataset, registry, report, machine, per_instance, space);
        if (*bootstrap) return cmd_bootstrap(scores_a, scores_b, metric, resamples, seed);
        if (*gradcheck) return cmd_gradcheck(seed, gc_instances, gc_tolerance);
        if (*sweep)
            return cmd_sweep(train_path, dev, test, registry, lexicon, dict, out_dir_override(out),
                             seeds_str, sweep_opts, sweep_rr_passes, sweep_lm_passes);
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDataInconsistency;
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kExitDataInconsistency;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
    return kExitUsage;
}
