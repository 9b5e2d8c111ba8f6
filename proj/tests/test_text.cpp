#include <doctest.h>

#include "vawi/text.hpp"

using namespace vawi;

namespace {

TokenizedText annotated(const std::string& raw) {
    return annotate(tokenize(raw), builtin_lexicon(), builtin_stopwords());
}

} // namespace

TEST_SUITE("text") {

TEST_CASE("tokenize splits the example sentence into six tokens") {
    TokenizedText t = tokenize("He is eating a green apple");
    REQUIRE(t.size() == 6);
    CHECK(t.tokens[0] == "he");
    CHECK(t.tokens[4] == "green");
    CHECK(t.tokens[5] == "apple");
}

TEST_CASE("tokenize of empty string yields no tokens") {
    TokenizedText t = tokenize("");
    CHECK(t.size() == 0);
}

TEST_CASE("offsets recover the original text") {
    const std::string raw = "Two eyes.";
    TokenizedText t = tokenize(raw);
    REQUIRE(t.size() == 3);
    CHECK(t.tokens[0] == "two");
    CHECK(t.tokens[1] == "eyes");
    CHECK(t.tokens[2] == ".");
    for (std::size_t i = 0; i < t.size(); ++i) {
        std::string span = raw.substr(t.offsets[i].begin, t.offsets[i].end - t.offsets[i].begin);
        for (char& c : span) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        CHECK(span == t.tokens[i]);
    }
    // offsets are ascending and non-overlapping
    for (std::size_t i = 1; i < t.size(); ++i) {
        CHECK(t.offsets[i - 1].end <= t.offsets[i].begin);
    }
}

TEST_CASE("parallel arrays always line up") {
    for (const char* raw : {"", "one", "a b c!", "  spaced   out  ", "x,y;z"}) {
        TokenizedText t = tokenize(raw);
        CHECK(t.tokens.size() == t.offsets.size());
        CHECK(t.tokens.size() == t.pos_tags.size());
        CHECK(t.tokens.size() == t.stopword_flags.size());
    }
}

TEST_CASE("annotate tags the paper exemplar pair") {
    TokenizedText t = annotated("green apple");
    REQUIRE(t.size() == 2);
    CHECK(t.pos_tags[0] == PosTag::Adj);
    CHECK(t.pos_tags[1] == PosTag::Noun);
    CHECK(t.stopword_flags[0] == 0);
    CHECK(t.stopword_flags[1] == 0);
}

TEST_CASE("annotate flags stopwords") {
    TokenizedText t = annotated("he is eating a green apple");
    CHECK(t.stopword_flags[0] == 1); // he
    CHECK(t.stopword_flags[1] == 1); // is
    CHECK(t.stopword_flags[3] == 1); // a
    CHECK(t.stopword_flags[4] == 0);
    CHECK(t.pos_tags[2] == PosTag::Verb); // eating, from the lexicon
}

TEST_CASE("unknown words fall back to suffix heuristics") {
    CHECK(heuristic_pos("blorptivity") == PosTag::Noun);
    CHECK(heuristic_pos("blarpness") == PosTag::Noun);
    CHECK(heuristic_pos("zorgful") == PosTag::Adj);
    CHECK(heuristic_pos("cromulent") == PosTag::Other);
    CHECK(heuristic_pos("y") == PosTag::Other); // suffix must be proper

    TokenizedText t = annotated("blorptivity");
    CHECK(t.pos_tags[0] == PosTag::Noun);
}

TEST_CASE("punctuation tokens stay OTHER") {
    TokenizedText t = annotated("red, apple!");
    REQUIRE(t.size() == 4);
    CHECK(t.tokens[1] == ",");
    CHECK(t.pos_tags[1] == PosTag::Other);
    CHECK(t.tokens[3] == "!");
    CHECK(t.pos_tags[3] == PosTag::Other);
}

TEST_CASE("annotate is idempotent") {
    TokenizedText once = annotated("He is eating a green apple, maybe two.");
    TokenizedText twice = annotate(once, builtin_lexicon(), builtin_stopwords());
    CHECK(once.tokens == twice.tokens);
    CHECK(once.pos_tags == twice.pos_tags);
    CHECK(once.stopword_flags == twice.stopword_flags);
}

TEST_CASE("lexicon and stopword files match the builtin lists") {
    Lexicon lex = load_lexicon(std::string(VAWI_DATA_DIR) + "/lexicon.txt");
    CHECK(lex.at("green") == PosTag::Adj);
    CHECK(lex.at("apple") == PosTag::Noun);
    CHECK(lex == builtin_lexicon());

    StopwordSet stops = load_stopwords(std::string(VAWI_DATA_DIR) + "/stopwords.txt");
    CHECK(stops.count("is") == 1);
    CHECK(stops.count("a") == 1);
    CHECK(stops == builtin_stopwords());
}

} // TEST_SUITE
