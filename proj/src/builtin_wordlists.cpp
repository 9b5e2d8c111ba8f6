#include "vawi/text.hpp"

namespace vawi {

namespace {

// Keep in sync with data/stopwords.txt.
constexpr const char* kStopwords[] = {
    "a",       "about",   "above",  "after",  "again",   "against", "all",    "am",
    "an",      "and",     "any",    "are",    "as",      "at",      "be",     "because",
    "been",    "before",  "being",  "below",  "between", "both",    "but",    "by",
    "can",     "could",   "did",    "do",     "does",    "doing",   "down",   "during",
    "each",    "few",     "for",    "from",   "further", "had",     "has",    "have",
    "having",  "he",      "her",    "here",   "hers",    "him",     "his",    "how",
    "i",       "if",      "in",     "into",   "is",      "it",      "its",    "itself",
    "just",    "me",      "more",   "most",   "my",      "no",      "nor",    "not",
    "now",     "of",      "off",    "on",     "once",    "only",    "or",     "other",
    "our",     "ours",    "out",    "over",   "own",     "same",    "she",    "should",
    "so",      "some",    "such",   "than",   "that",    "the",     "their",  "theirs",
    "them",    "then",    "there",  "these",  "they",    "this",    "those",  "through",
    "to",      "too",     "under",  "until",  "up",      "very",    "was",    "we",
    "were",    "what",    "when",   "where",  "which",   "while",   "who",    "whom",
    "why",     "will",    "with",   "would",  "you",     "your",    "yours",  "yourself",
};

// Keep in sync with data/lexicon.txt.
struct LexEntry {
    const char* word;
    PosTag tag;
};

constexpr LexEntry kLexicon[] = {
    {"apple", PosTag::Noun},     {"audience", PosTag::Noun},  {"bird", PosTag::Noun},
    {"boat", PosTag::Noun},      {"book", PosTag::Noun},      {"bottle", PosTag::Noun},
    {"box", PosTag::Noun},       {"car", PosTag::Noun},       {"cat", PosTag::Noun},
    {"chair", PosTag::Noun},     {"cloud", PosTag::Noun},     {"coin", PosTag::Noun},
    {"cup", PosTag::Noun},       {"day", PosTag::Noun},       {"dog", PosTag::Noun},
    {"door", PosTag::Noun},      {"eye", PosTag::Noun},       {"eyes", PosTag::Noun},
    {"face", PosTag::Noun},      {"film", PosTag::Noun},      {"fish", PosTag::Noun},
    {"flower", PosTag::Noun},    {"grass", PosTag::Noun},     {"hand", PosTag::Noun},
    {"house", PosTag::Noun},     {"human", PosTag::Noun},     {"lake", PosTag::Noun},
    {"leads", PosTag::Noun},     {"leaf", PosTag::Noun},      {"leaves", PosTag::Noun},
    {"market", PosTag::Noun},    {"moon", PosTag::Noun},      {"moringa", PosTag::Noun},
    {"mountain", PosTag::Noun},  {"night", PosTag::Noun},     {"people", PosTag::Noun},
    {"performances", PosTag::Noun}, {"photo", PosTag::Noun},  {"powder", PosTag::Noun},
    {"rain", PosTag::Noun},      {"river", PosTag::Noun},     {"road", PosTag::Noun},
    {"rock", PosTag::Noun},      {"seers", PosTag::Noun},     {"sight", PosTag::Noun},
    {"sky", PosTag::Noun},       {"snow", PosTag::Noun},      {"spider", PosTag::Noun},
    {"stone", PosTag::Noun},     {"sun", PosTag::Noun},       {"table", PosTag::Noun},
    {"tree", PosTag::Noun},      {"wall", PosTag::Noun},      {"water", PosTag::Noun},
    {"waterfall", PosTag::Noun}, {"window", PosTag::Noun},

    {"big", PosTag::Adj},        {"black", PosTag::Adj},      {"blue", PosTag::Adj},
    {"bright", PosTag::Adj},     {"brown", PosTag::Adj},      {"clean", PosTag::Adj},
    {"clear", PosTag::Adj},      {"cold", PosTag::Adj},       {"dark", PosTag::Adj},
    {"deep", PosTag::Adj},       {"dry", PosTag::Adj},        {"flat", PosTag::Adj},
    {"green", PosTag::Adj},      {"grounded", PosTag::Adj},   {"hot", PosTag::Adj},
    {"large", PosTag::Adj},      {"long", PosTag::Adj},       {"mesmerizing", PosTag::Adj},
    {"old", PosTag::Adj},        {"orange", PosTag::Adj},     {"red", PosTag::Adj},
    {"riveted", PosTag::Adj},    {"round", PosTag::Adj},      {"sharp", PosTag::Adj},
    {"short", PosTag::Adj},      {"small", PosTag::Adj},      {"smooth", PosTag::Adj},
    {"soft", PosTag::Adj},       {"square", PosTag::Adj},     {"sunny", PosTag::Adj},
    {"tall", PosTag::Adj},       {"two", PosTag::Adj},        {"upright", PosTag::Adj},
    {"warm", PosTag::Adj},       {"wet", PosTag::Adj},        {"white", PosTag::Adj},
    {"wide", PosTag::Adj},       {"yellow", PosTag::Adj},     {"yellowish", PosTag::Adj},

    {"catch", PosTag::Verb},     {"drink", PosTag::Verb},     {"eat", PosTag::Verb},
    {"eating", PosTag::Verb},    {"go", PosTag::Verb},        {"hold", PosTag::Verb},
    {"keep", PosTag::Verb},      {"look", PosTag::Verb},      {"make", PosTag::Verb},
    {"run", PosTag::Verb},       {"see", PosTag::Verb},       {"sell", PosTag::Verb},
    {"sit", PosTag::Verb},       {"take", PosTag::Verb},      {"turn", PosTag::Verb},
    {"walk", PosTag::Verb},
};

} // namespace

const std::vector<std::string>& builtin_stopword_list() {
    static const std::vector<std::string> list(std::begin(kStopwords), std::end(kStopwords));
    return list;
}

const StopwordSet& builtin_stopwords() {
    static const StopwordSet set(std::begin(kStopwords), std::end(kStopwords));
    return set;
}

const Lexicon& builtin_lexicon() {
    static const Lexicon lex = [] {
        Lexicon l;
        for (const auto& e : kLexicon) l[e.word] = e.tag;
        return l;
    }();
    return lex;
}

} // namespace vawi
