#include "vawi/text.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>

namespace vawi {

const char* pos_tag_name(PosTag tag) {
    switch (tag) {
        case PosTag::Noun: return "NOUN";
        case PosTag::Adj: return "ADJ";
        case PosTag::Verb: return "VERB";
        case PosTag::Other: return "OTHER";
    }
    return "OTHER";
}

PosTag pos_tag_from_name(std::string_view name) {
    if (name == "NOUN") return PosTag::Noun;
    if (name == "ADJ") return PosTag::Adj;
    if (name == "VERB") return PosTag::Verb;
    if (name == "OTHER") return PosTag::Other;
    throw ParseError("unknown POS tag '" + std::string(name) + "'");
}

namespace {

bool is_word_char(unsigned char c) {
    // Non-ASCII bytes are kept inside word tokens so UTF-8 input stays intact.
    return std::isalnum(c) != 0 || c == '\'' || c >= 0x80;
}

bool is_space_char(unsigned char c) {
    return std::isspace(c) != 0;
}

std::string lowercase_ascii(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

} // namespace

TokenizedText tokenize(std::string_view raw) {
    TokenizedText t;
    t.raw.assign(raw);
    std::size_t i = 0;
    const std::size_t n = raw.size();
    while (i < n) {
        const auto c = static_cast<unsigned char>(raw[i]);
        if (is_space_char(c)) {
            ++i;
            continue;
        }
        std::size_t begin = i;
        if (is_word_char(c)) {
            while (i < n && is_word_char(static_cast<unsigned char>(raw[i]))) ++i;
        } else {
            ++i; // punctuation: one character per token
        }
        t.tokens.push_back(lowercase_ascii(raw.substr(begin, i - begin)));
        t.offsets.push_back({begin, i});
        t.pos_tags.push_back(PosTag::Other);
        t.stopword_flags.push_back(0);
    }
    return t;
}

PosTag heuristic_pos(std::string_view word) {
    static constexpr std::array<std::string_view, 6> noun_suffixes = {
        "ness", "tion", "sion", "ity", "ment", "er"};
    static constexpr std::array<std::string_view, 5> adj_suffixes = {
        "ous", "ful", "ish", "ive", "y"};
    auto ends_with = [&](std::string_view suffix) {
        return word.size() > suffix.size() &&
               word.substr(word.size() - suffix.size()) == suffix;
    };
    for (auto s : noun_suffixes)
        if (ends_with(s)) return PosTag::Noun;
    for (auto s : adj_suffixes)
        if (ends_with(s)) return PosTag::Adj;
    return PosTag::Other;
}

TokenizedText annotate(TokenizedText t, const Lexicon& lexicon, const StopwordSet& stopwords) {
    for (std::size_t i = 0; i < t.tokens.size(); ++i) {
        const std::string& w = t.tokens[i];
        t.stopword_flags[i] = stopwords.count(w) ? 1 : 0;
        const bool is_word =
            !w.empty() && is_word_char(static_cast<unsigned char>(w.front()));
        if (!is_word) {
            t.pos_tags[i] = PosTag::Other;
            continue;
        }
        auto it = lexicon.find(w);
        t.pos_tags[i] = it != lexicon.end() ? it->second : heuristic_pos(w);
    }
    return t;
}

Lexicon load_lexicon(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open lexicon file '" + path + "'");
    Lexicon lex;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw ParseError("lexicon line " + std::to_string(line_no) +
                             ": expected 'word<TAB>TAG'");
        }
        lex[lowercase_ascii(line.substr(0, tab))] = pos_tag_from_name(line.substr(tab + 1));
    }
    return lex;
}

StopwordSet load_stopwords(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open stopword file '" + path + "'");
    StopwordSet set;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) set.insert(lowercase_ascii(line));
    }
    return set;
}

} // namespace vawi
