#include <catch2/catch_amalgamated.hpp>

#include "csnlg/util.hpp"

using namespace csnlg;

TEST_CASE("tokenize and join") {
    CHECK(tokenize("  a  b\tc ") == std::vector<std::string>{"a", "b", "c"});
    CHECK(tokenize("") == std::vector<std::string>{});
    CHECK(join({"x", "y"}) == "x y");
}

TEST_CASE("utf8 lowercase covers Czech letters") {
    CHECK(utf8_lower("Ananta") == "ananta");
    CHECK(utf8_lower("ČESKÁ Kuchyně") == "česká kuchyně");
    CHECK(utf8_lower("ŘÍZEK Šťáva") == "řízek šťáva");
    CHECK(utf8_lower("BarBar") == "barbar");
}

TEST_CASE("numeral detection") {
    CHECK(is_numeral("218"));
    CHECK(is_numeral("4,50"));
    CHECK_FALSE(is_numeral("a1"));
    CHECK_FALSE(is_numeral(""));
    CHECK_FALSE(is_numeral("."));
}

TEST_CASE("rng determinism and derivation") {
    Rng a(42), b(42);
    for (int i = 0; i < 10; ++i) CHECK(a.raw() == b.raw());
    Rng c = Rng(42).derive(7);
    Rng d = Rng(42).derive(7);
    CHECK(c.raw() == d.raw());
    CHECK(Rng(42).derive(7).raw() != Rng(42).derive(8).raw());
    Rng e(1);
    for (int i = 0; i < 1000; ++i) {
        double r = e.real();
        CHECK(r >= 0.0);
        CHECK(r < 1.0);
        CHECK(e.below(10) < 10);
    }
}

TEST_CASE("sha1 known vectors") {
    CHECK(Sha1::of("") == "da39a3ee5e6b4b0d3255bfef95601890afd80709");
    CHECK(Sha1::of("abc") == "a9993e364706816aba3e25717850c26c9cd0d89d");
    CHECK(Sha1::of("The quick brown fox jumps over the lazy dog") ==
          "2fd4e1c67a2d28fced849ee1bb76e7391b93eb12");
}
