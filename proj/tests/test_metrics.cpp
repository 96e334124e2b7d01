#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "csnlg/metrics.hpp"
#include "toy_corpus.hpp"

using namespace csnlg;
using Catch::Approx;

namespace {

std::vector<EvalPair> identical_pairs() {
    std::vector<EvalPair> pairs;
    for (const char* s : {"Ananta je levná restaurace .", "Na shledanou .",
                          "Green Spirit je drahá turecká restaurace .", "Přejete si ještě něco ?"}) {
        EvalPair p;
        p.hyp = tokenize(s);
        p.refs = {tokenize(s)};
        pairs.push_back(p);
    }
    return pairs;
}

std::vector<EvalPair> random_pairs(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::string> vocab = {"a", "b", "c", "d", "e", "restaurace", "je", ".", "v", "na"};
    std::vector<EvalPair> pairs;
    for (std::size_t i = 0; i < n; ++i) {
        EvalPair p;
        std::size_t rl = 3 + rng.index(8);
        for (std::size_t k = 0; k < rl; ++k) p.refs.push_back({});
        p.refs.resize(1);
        for (std::size_t k = 0; k < rl; ++k) p.refs[0].push_back(vocab[rng.index(vocab.size())]);
        std::size_t hl = 3 + rng.index(8);
        for (std::size_t k = 0; k < hl; ++k) {
            // bias toward copying the reference for nonzero overlap
            if (k < rl && rng.real() < 0.6) p.hyp.push_back(p.refs[0][k]);
            else p.hyp.push_back(vocab[rng.index(vocab.size())]);
        }
        pairs.push_back(p);
    }
    return pairs;
}

}  // namespace

TEST_CASE("all metrics hit their maximum on identical corpora") {
    auto pairs = identical_pairs();
    CHECK(corpus_bleu(pairs) == Approx(100.0).margin(1e-9));
    CHECK(corpus_rouge_l(pairs) == Approx(100.0).margin(1e-9));
    CHECK(corpus_meteor_exact(pairs) == Approx(100.0).margin(1e-6));
    CHECK(corpus_nist(pairs) > 0.0);
    CHECK(corpus_cider(pairs) > 0.0);
}

TEST_CASE("bleu is zero without 4-gram overlap and errors on empty corpora") {
    std::vector<EvalPair> pairs = {{tokenize("x y z w q"), {tokenize("a b c d e")}}};
    CHECK(corpus_bleu(pairs) == 0.0);
    CHECK_THROWS_AS(corpus_bleu({}), DataError);

    // unigram overlap alone still gives zero BLEU-4
    std::vector<EvalPair> uni = {{tokenize("a x a y a z"), {tokenize("a b c d a e")}}};
    CHECK(corpus_bleu(uni) == 0.0);
    CHECK(corpus_bleu(identical_pairs()) == 100.0);
}

TEST_CASE("nist matches hand-computed values") {
    // two identical pairs: info is zero beyond unigrams with count > 1
    std::vector<EvalPair> rep = {{tokenize("a b"), {tokenize("a b")}},
                                 {tokenize("a b"), {tokenize("a b")}}};
    CHECK(corpus_nist(rep) == Approx(1.0).margin(1e-9));

    // worked two-sentence corpus:
    //   refs "a b c" / "a d": info(a)=log2(5/2), info(b)=info(c)=info(d)=log2(5)
    //   bigram info: (a b) = 1, (b c) = 0, (a d) = 1; trigram info zero
    //   score = (2*log2(2.5) + 3*log2(5))/5 + 2/3
    std::vector<EvalPair> two = {{tokenize("a b c"), {tokenize("a b c")}},
                                 {tokenize("a d"), {tokenize("a d")}}};
    double expected = (2.0 * std::log2(2.5) + 3.0 * std::log2(5.0)) / 5.0 + 2.0 / 3.0;
    CHECK(corpus_nist(two) == Approx(expected).margin(1e-12));

    // empty hypothesis scores zero
    std::vector<EvalPair> empty_hyp = {{{}, {tokenize("a b c")}}};
    CHECK(corpus_nist(empty_hyp) == 0.0);
    CHECK_THROWS_AS(corpus_nist({}), DataError);
}

TEST_CASE("nist brevity penalty halves the score at 2/3 length") {
    // hyp = first 2 of 3 ref tokens, all unigram matches; score_1 = info/2... but
    // the bp factor must equal 0.5 at ratio 2/3 by construction of beta
    const double beta = std::log(0.5) / std::pow(std::log(2.0 / 3.0), 2.0);
    double bp = std::exp(beta * std::pow(std::log(2.0 / 3.0), 2.0));
    CHECK(bp == Approx(0.5).margin(1e-12));
}

TEST_CASE("rouge_l lcs behavior") {
    std::vector<EvalPair> pairs = {{tokenize("a b c d"), {tokenize("a c b d")}}};
    // LCS("a b c d", "a c b d") = 3 ("a b d" or "a c d")
    double p = 3.0 / 4.0, r = 3.0 / 4.0, beta = 1.2;
    double expected = 100.0 * (1 + beta * beta) * p * r / (r + beta * beta * p);
    CHECK(corpus_rouge_l(pairs) == Approx(expected).margin(1e-9));

    std::vector<EvalPair> none = {{tokenize("x y"), {tokenize("a b")}}};
    CHECK(corpus_rouge_l(none) == 0.0);
}

TEST_CASE("meteor exact counts chunks") {
    // perfect match: one chunk, zero excess, no penalty
    std::vector<EvalPair> same = {{tokenize("a b c"), {tokenize("a b c")}}};
    CHECK(corpus_meteor_exact(same) == Approx(100.0).margin(1e-12));

    // swapped halves: 2 chunks = 1 excess chunk, all tokens matched
    std::vector<EvalPair> swapped = {{tokenize("c a b"), {tokenize("a b c")}}};
    double fmean = 1.0;  // P = R = 1
    double penalty = 0.5 * std::pow(1.0 / 3.0, 3.0);
    CHECK(corpus_meteor_exact(swapped) == Approx(100.0 * fmean * (1.0 - penalty)).margin(1e-9));

    std::vector<EvalPair> none = {{tokenize("x y"), {tokenize("a b")}}};
    CHECK(corpus_meteor_exact(none) == 0.0);
}

TEST_CASE("cider degenerates gracefully on a single pair") {
    std::vector<EvalPair> one = {{tokenize("a b c"), {tokenize("a b c")}}};
    double v = corpus_cider(one);
    CHECK(std::isfinite(v));
    CHECK(v == Approx(0.0).margin(1e-12));  // idf = log(1) - log(1) = 0

    auto pairs = identical_pairs();
    CHECK(corpus_cider(pairs) > 1.0);  // identical corpora score high
}

TEST_CASE("metrics are invariant under corpus permutation") {
    auto pairs = random_pairs(30, 99);
    auto shuffled = pairs;
    Rng rng(5);
    rng.shuffle(shuffled);
    CHECK(corpus_bleu(shuffled) == Approx(corpus_bleu(pairs)).margin(1e-12));
    CHECK(corpus_nist(shuffled) == Approx(corpus_nist(pairs)).margin(1e-12));
    CHECK(corpus_rouge_l(shuffled) == Approx(corpus_rouge_l(pairs)).margin(1e-12));
    CHECK(corpus_meteor_exact(shuffled) == Approx(corpus_meteor_exact(pairs)).margin(1e-12));
    CHECK(corpus_cider(shuffled) == Approx(corpus_cider(pairs)).margin(1e-12));
}

TEST_CASE("word-overlap scores do not grow under random token deletion (statistical)") {
    Rng rng(17);
    double prev_bleu = 1e9, prev_rouge = 1e9, prev_meteor = 1e9;
    // delete progressively more tokens from identical corpora; average over chains
    for (std::size_t deletions : {0u, 2u, 5u, 9u}) {
        double bleu = 0.0, rouge = 0.0, meteor = 0.0;
        const int chains = 20;
        for (int chain = 0; chain < chains; ++chain) {
            auto pairs = identical_pairs();
            for (std::size_t d = 0; d < deletions; ++d) {
                auto& hyp = pairs[rng.index(pairs.size())].hyp;
                if (!hyp.empty()) hyp.erase(hyp.begin() + static_cast<long>(rng.index(hyp.size())));
            }
            bleu += corpus_bleu(pairs);
            rouge += corpus_rouge_l(pairs);
            meteor += corpus_meteor_exact(pairs);
        }
        bleu /= chains;
        rouge /= chains;
        meteor /= chains;
        CHECK(bleu <= prev_bleu + 1e-9);
        CHECK(rouge <= prev_rouge + 1e-9);
        CHECK(meteor <= prev_meteor + 1e-9);
        prev_bleu = bleu;
        prev_rouge = rouge;
        prev_meteor = meteor;
    }
}

TEST_CASE("slot error rate formula") {
    auto reg = toy::registry();

    auto da3 = parse_da("inform(name=Ananta,food=Czech,area=Karlín)", reg);
    CHECK(ser(tokenize("X-name je X-food v X-area ."), da3, reg) == Approx(0.0));
    CHECK(ser(tokenize("X-name je X-food ."), da3, reg) == Approx(100.0 / 3.0));
    CHECK(ser(tokenize("X-name X-name je X-food v X-area ."), da3, reg) == Approx(100.0 / 3.0));

    // kids_allowed never counts on either side
    auto da_kids = parse_da("inform(name=Ananta,kids_allowed=yes)", reg);
    CHECK(ser(tokenize("X-name je fajn ."), da_kids, reg) == Approx(0.0));

    // dont_care values produce no placeholder requirement
    auto da_dc = parse_da("inform(area=dont_care,food=Turkish)", reg);
    CHECK(ser(tokenize("X-food je jedno kde ."), da_dc, reg) == Approx(0.0));
    CHECK(ser(tokenize("je jedno kde ."), da_dc, reg) == Approx(100.0));

    // zero delexicalizable slots contribute nothing
    auto da_gb = parse_da("goodbye()", reg);
    CHECK(ser(tokenize("Na shledanou ."), da_gb, reg) == Approx(0.0));

    // corpus view: totals ratio vs instance average
    std::vector<std::vector<std::string>> outs = {tokenize("X-name je X-food ."), tokenize("ahoj .")};
    std::vector<DialogueAct> das = {da3, da_gb};
    auto rep = corpus_ser(outs, das, reg);
    CHECK(rep.corpus_rate == Approx(100.0 / 3.0));
    CHECK(rep.instance_avg_rate == Approx(100.0 / 6.0));
    CHECK(rep.totals.missing == 1);
    CHECK(rep.totals.superfluous == 0);
}

TEST_CASE("ser is zero iff placeholder multiset matches the DA") {
    auto reg = toy::registry();
    auto lex = toy::lexicon();
    for (const auto& inst : toy::prepared_corpus()) {
        CHECK(ser(inst.delex_text, inst.da, reg) == Approx(0.0));
    }
    // duplicated slot: both occurrences required
    auto sel = parse_da("?select(food=Czech,food=Turkish)", reg);
    CHECK(ser(tokenize("chcete X-food ?"), sel, reg) == Approx(50.0));
    CHECK(ser(tokenize("chcete X-food nebo X-food ?"), sel, reg) == Approx(0.0));
}

TEST_CASE("bootstrap significance") {
    Rng rng(3);
    std::vector<double> a, b;
    for (int i = 0; i < 200; ++i) {
        double base = rng.real();
        a.push_back(base);
        b.push_back(base);
    }
    double p_same = bootstrap_test(a, b, 1000, 42);
    CHECK(p_same == Approx(0.5).margin(1e-12));  // ties count half

    // A dominates B on every instance
    std::vector<double> worse = b;
    for (auto& x : worse) x -= 0.5;
    CHECK(bootstrap_test(a, worse, 1000, 42) < 0.01);
    CHECK(bootstrap_test(worse, a, 1000, 42) > 0.99);

    // seeded reproducibility
    std::vector<double> noisy_a, noisy_b;
    for (int i = 0; i < 100; ++i) {
        noisy_a.push_back(rng.real());
        noisy_b.push_back(rng.real());
    }
    CHECK(bootstrap_test(noisy_a, noisy_b, 500, 7) == bootstrap_test(noisy_a, noisy_b, 500, 7));

    CHECK_THROWS_AS(bootstrap_test({1.0}, {1.0, 2.0}, 10, 1), DataError);
    CHECK_THROWS_AS(bootstrap_test({}, {}, 10, 1), DataError);
}

TEST_CASE("evaluate_outputs aggregates a full report") {
    auto reg = toy::registry();
    auto pairs = identical_pairs();
    std::vector<std::vector<std::string>> outs;
    std::vector<DialogueAct> das;
    auto corpus = toy::prepared_corpus();
    for (std::size_t i = 0; i < 4; ++i) {
        outs.push_back(corpus[i].delex_text);
        das.push_back(corpus[i].da);
    }
    auto rep = evaluate_outputs(pairs, outs, das, reg);
    CHECK(rep.bleu == Approx(100.0).margin(1e-9));
    CHECK(rep.ser_corpus == Approx(0.0));
    CHECK(rep.pairs == 4);
    CHECK_FALSE(rep.table().empty());
}
