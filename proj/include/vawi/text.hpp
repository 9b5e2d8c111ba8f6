#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "vawi/common.hpp"

namespace vawi {

enum class PosTag : std::uint8_t { Noun, Adj, Verb, Other };

const char* pos_tag_name(PosTag tag);
PosTag pos_tag_from_name(std::string_view name);

// One tokenized input sentence. Parallel arrays, one entry per token.
struct TokenizedText {
    std::string raw;
    std::vector<std::string> tokens; // lowercased
    struct ByteRange {
        std::size_t begin = 0;
        std::size_t end = 0;
        bool operator==(const ByteRange&) const = default;
    };
    std::vector<ByteRange> offsets; // into raw, non-overlapping, ascending
    std::vector<PosTag> pos_tags;
    std::vector<std::uint8_t> stopword_flags;

    std::size_t size() const { return tokens.size(); }
};

// Lowercased whitespace-and-punctuation split. Punctuation characters become
// single-character tokens tagged Other. Empty input yields no tokens.
TokenizedText tokenize(std::string_view raw);

using Lexicon = std::unordered_map<std::string, PosTag>;
using StopwordSet = std::unordered_set<std::string>;

// POS tags from the lexicon with a suffix-heuristic fallback, stopword flags
// from the given set. Idempotent.
TokenizedText annotate(TokenizedText t, const Lexicon& lexicon, const StopwordSet& stopwords);

// Suffix fallback used when a word is missing from the lexicon:
// -ness/-tion/-sion/-ity/-ment/-er -> Noun, -ous/-ful/-ish/-ive/-y -> Adj,
// anything else -> Other. Noun suffixes win so "-ity" beats the "-y" rule.
PosTag heuristic_pos(std::string_view word);

// File format: one "word<TAB>TAG" line per entry, TAG in {NOUN,ADJ,VERB,OTHER}.
Lexicon load_lexicon(const std::string& path);
// File format: one word per line.
StopwordSet load_stopwords(const std::string& path);

// Lists compiled into the library so nothing depends on the working
// directory. The data/ copies in the repo carry the same content.
const Lexicon& builtin_lexicon();
const StopwordSet& builtin_stopwords();
const std::vector<std::string>& builtin_stopword_list(); // stable order

} // namespace vawi
