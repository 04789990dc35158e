#include "ccaudit/error.hpp"
#include "ccaudit/lexicon.hpp"
#include "ccaudit/text.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"
#include "temp_dir.hpp"

#include <doctest.h>

#include <random>
#include <set>
#include <sstream>

using namespace ccaudit;
using lexicon::CountMode;
using lexicon::Lexicon;

namespace {

Lexicon lex(std::string name, std::vector<std::string> phrases) { return lexicon::make_lexicon(std::move(name), phrases); }

std::uint64_t hits(const lexicon::Matcher& m, std::string_view text, const std::string& name,
                   CountMode mode = CountMode::Total) {
    return m.count_hits(text, mode).at(name);
}

// Random lexicons and texts over a small vocabulary so matches are frequent.
struct RandomCase {
    std::vector<Lexicon> lexicons;
    std::vector<std::string> tokens;
};

RandomCase random_case(std::mt19937_64& rng, std::size_t max_patterns, std::size_t max_tokens, std::size_t vocab) {
    RandomCase c;
    const auto word = [&] { return "w" + std::to_string(rng() % vocab); };
    const std::size_t nlex = 1 + rng() % 3;
    for (std::size_t l = 0; l < nlex; ++l) {
        std::vector<std::string> phrases;
        const std::size_t np = 1 + rng() % max_patterns;
        for (std::size_t p = 0; p < np; ++p) {
            std::string s;
            const std::size_t len = 1 + rng() % 5;
            for (std::size_t i = 0; i < len; ++i) s += (i ? " " : "") + word();
            phrases.push_back(s);
        }
        c.lexicons.push_back(lexicon::make_lexicon("lex" + std::to_string(l), phrases));
    }
    const std::size_t nt = rng() % (max_tokens + 1);
    for (std::size_t i = 0; i < nt; ++i) c.tokens.push_back(word());
    return c;
}

std::string join(const std::vector<std::string>& tokens) {
    std::string s;
    for (const auto& t : tokens) s += (s.empty() ? "" : " ") + t;
    return s;
}

} // namespace

TEST_CASE("loading dedups, normalizes and skips comments") {
    std::istringstream a("foo\nfoo\nbar baz\n");
    const auto l = lexicon::parse_lexicon(a, "t");
    CHECK(l.patterns.size() == 2);
    CHECK(l.duplicates_removed == 1);

    std::istringstream b("# only\n  # comments\n\n");
    try {
        lexicon::parse_lexicon(b, "t");
        FAIL("expected EmptyLexicon");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::EmptyLexicon);
    }

    std::istringstream c("FOO  Bar\n");
    CHECK(lexicon::parse_lexicon(c, "t").patterns == std::vector<lexicon::Pattern>{{"foo", "bar"}});

    std::istringstream too_long("a b c d e f\n");
    CHECK_THROWS_AS(lexicon::parse_lexicon(too_long, "t"), Error);
}

TEST_CASE("load_lexicon reads files and records their hash") {
    testing::TempDir dir;
    testing::write_file(dir.file("l.txt"), "alpha\nbeta gamma\n");
    const auto l = lexicon::load_lexicon(dir.file("l.txt"), "demo");
    CHECK(l.name == "demo");
    CHECK(l.patterns.size() == 2);
    CHECK(l.source_sha256 == lexicon::sha256_hex("alpha\nbeta gamma\n"));
    CHECK(lexicon::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    try {
        lexicon::load_lexicon(dir.file("nope.txt"), "x");
        FAIL("expected IoError");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::IoError);
    }
}

TEST_CASE("the shipped demo lexicons load and share no tokens") {
    const auto hate = lexicon::load_lexicon(testing::repo_data_dir() + "/lexicons/demo_hate.txt", "hate");
    const auto sexual = lexicon::load_lexicon(testing::repo_data_dir() + "/lexicons/demo_sexual.txt", "sexual");
    std::set<std::string> seen;
    std::size_t tokens = 0;
    for (const auto* l : {&hate, &sexual})
        for (const auto& p : l->patterns)
            for (const auto& t : p) seen.insert(t), ++tokens;
    CHECK(seen.size() == tokens);
}

TEST_CASE("counting examples") {
    const auto x = lexicon::Matcher::compile(std::vector<Lexicon>{lex("x", {"x"})});
    CHECK(hits(x, "x y x", "x") == 2);
    CHECK(hits(x, "", "x") == 0);

    const auto bad = lexicon::Matcher::compile(std::vector<Lexicon>{lex("b", {"bad word"})});
    CHECK(hits(bad, "a bad word is a bad word", "b") == 2);
    CHECK(hits(bad, "a bad word is a bad word", "b", CountMode::Distinct) == 1);

    const auto ab = lexicon::Matcher::compile(std::vector<Lexicon>{lex("ab", {"ab"})});
    CHECK(hits(ab, "slab", "ab") == 0);
    CHECK(hits(ab, "slab, ab!AB", "ab") == 2);
}

TEST_CASE("two lexicons sharing a pattern each count it") {
    const auto m = lexicon::Matcher::compile(std::vector<Lexicon>{lex("one", {"shared", "only one"}),
                                                                  lex("two", {"shared"})});
    const auto c = m.count_hits("shared words only one shared");
    CHECK(c.at("one") == 3);
    CHECK(c.at("two") == 2);
    CHECK(m.lexicon_names() == std::vector<std::string>{"one", "two"});
    CHECK(m.pattern_count() == 2);
}

TEST_CASE("empty text yields zero for every lexicon") {
    const auto m = lexicon::Matcher::compile(std::vector<Lexicon>{lex("a", {"p"}), lex("b", {"q r"})});
    const auto c = m.count_hits("");
    CHECK(c == lexicon::HitCounts{{"a", 0}, {"b", 0}});
}

TEST_CASE("overlapping and nested patterns all count") {
    const auto m = lexicon::Matcher::compile(std::vector<Lexicon>{lex("l", {"a a", "a", "a b a", "b"})});
    // tokens: a a b a a -> "a" x4, "a a" x2, "b" x1, "a b a" x1
    CHECK(hits(m, "a a b a a", "l") == 8);
    CHECK(hits(m, "a a b a a", "l", CountMode::Distinct) == 4);
}

TEST_CASE("compile rejects empty and duplicate lexicon lists") {
    CHECK_THROWS_AS(lexicon::Matcher::compile(std::vector<Lexicon>{}), Error);
    CHECK_THROWS_AS(lexicon::Matcher::compile(std::vector<Lexicon>{lex("a", {"x"}), lex("a", {"y"})}), Error);
}

TEST_CASE("flag applies a count threshold") {
    const lexicon::HitCounts c{{"hate", 3}, {"sexual", 0}, {"big", 10}};
    CHECK(lexicon::flag(c, "hate", 3));
    CHECK_FALSE(lexicon::flag(c, "hate", 4));
    CHECK_FALSE(lexicon::flag(c, "sexual", 1));
    CHECK(lexicon::flag(c, "big", 10));
    try {
        lexicon::flag(c, "missing", 1);
        FAIL("expected UnknownLexicon");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::UnknownLexicon);
    }
    CHECK_THROWS_AS(lexicon::flag(c, "hate", 0), Error);
}

TEST_CASE("flag is monotone in the threshold") {
    for (std::uint64_t count = 0; count < 30; ++count) {
        const lexicon::HitCounts c{{"l", count}};
        for (std::uint64_t t = 1; t < 30; ++t)
            for (std::uint64_t lower = 1; lower <= t; ++lower)
                if (lexicon::flag(c, "l", t)) REQUIRE(lexicon::flag(c, "l", lower));
    }
}

TEST_CASE("automaton matches the naive scan on random inputs") {
    std::mt19937_64 rng(42);
    for (int round = 0; round < 300; ++round) {
        const auto c = random_case(rng, 30, 400, 12);
        const auto m = lexicon::Matcher::compile(c.lexicons);
        for (auto mode : {CountMode::Total, CountMode::Distinct}) {
            REQUIRE(m.count_tokens(c.tokens, mode) == testing::naive_hits(c.lexicons, c.tokens, mode));
            REQUIRE(m.count_hits(join(c.tokens), mode) == testing::naive_hits(c.lexicons, c.tokens, mode));
        }
    }
}

TEST_CASE("10,000 random patterns against the naive scan") {
    std::mt19937_64 rng(7);
    std::vector<std::string> phrases;
    for (int i = 0; i < 10000; ++i) {
        std::string s;
        const std::size_t len = 1 + rng() % 5;
        for (std::size_t j = 0; j < len; ++j) s += (j ? " " : "") + ("t" + std::to_string(rng() % 300));
        phrases.push_back(s);
    }
    const std::vector<Lexicon> lexicons = {lexicon::make_lexicon("big", phrases),
                                           lexicon::make_lexicon("small", std::vector<std::string>(phrases.begin(), phrases.begin() + 500))};
    const auto m = lexicon::Matcher::compile(lexicons);
    for (int round = 0; round < 3; ++round) {
        std::vector<std::string> tokens;
        for (int i = 0; i < 20000; ++i) tokens.push_back("t" + std::to_string(rng() % 300));
        for (auto mode : {CountMode::Total, CountMode::Distinct})
            CHECK(m.count_tokens(tokens, mode) == testing::naive_hits(lexicons, tokens, mode));
    }
}

TEST_CASE("count properties: monotone, superadditive, case invariant") {
    std::mt19937_64 rng(99);
    for (int round = 0; round < 200; ++round) {
        const auto a = random_case(rng, 10, 60, 6);
        const auto m = lexicon::Matcher::compile(a.lexicons);
        std::vector<std::string> more;
        const std::size_t extra = rng() % 30;
        for (std::size_t i = 0; i < extra; ++i) more.push_back("w" + std::to_string(rng() % 6));
        const auto ta = join(a.tokens), tb = join(more);
        const auto ca = m.count_hits(ta), cb = m.count_hits(tb), cab = m.count_hits(ta + " " + tb);
        for (const auto& name : m.lexicon_names()) {
            REQUIRE(cab.at(name) >= ca.at(name));                // appending never decreases
            REQUIRE(cab.at(name) >= ca.at(name) + cb.at(name));  // boundary matches only add
        }
        REQUIRE(m.count_hits(text::to_upper(ta)) == ca);
    }
}
