#include "vawi/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_set>

#include <json.hpp>

#include "vawi/common.hpp"

namespace vawi {

const char* label_rule_name(LabelRule rule) {
    return rule == LabelRule::MajorityAttribute ? "majority_attribute"
                                                : "first_word_attribute";
}

LabelRule label_rule_from_name(std::string_view name) {
    if (name == "majority_attribute") return LabelRule::MajorityAttribute;
    if (name == "first_word_attribute") return LabelRule::FirstWordAttribute;
    throw ConfigError("unknown label rule '" + std::string(name) + "'");
}

void SyntheticTaskSpec::validate() const {
    if (attribute_class_count < 2) {
        throw ConfigError("attribute_class_count must be at least 2");
    }
    if (words_per_sentence < 3) {
        throw ConfigError("words_per_sentence must be at least 3");
    }
    if (train_split_fraction <= 0.0 || train_split_fraction >= 1.0) {
        throw ConfigError("train_split_fraction must lie strictly inside (0, 1)");
    }
    if (content_word_count + builtin_stopword_list().size() > vocab_size) {
        throw ConfigError("vocab_size too small for content words plus stopwords");
    }
    const auto train_pool = static_cast<std::size_t>(
        std::llround(train_split_fraction * static_cast<double>(content_word_count)));
    if (train_pool == 0 || train_pool == content_word_count) {
        throw ConfigError("content vocabulary too small for the requested train/test split");
    }
}

std::size_t label_from_attributes(const std::vector<std::size_t>& attrs, LabelRule rule) {
    if (attrs.empty()) throw ContractError("label_from_attributes: no content words");
    if (rule == LabelRule::FirstWordAttribute) return attrs.front();
    std::vector<std::size_t> counts;
    for (std::size_t a : attrs) {
        if (a >= counts.size()) counts.resize(a + 1, 0);
        ++counts[a];
    }
    std::size_t best = 0;
    for (std::size_t c = 1; c < counts.size(); ++c) {
        if (counts[c] > counts[best]) best = c; // ties keep the smaller class
    }
    return best;
}

namespace {

// Pronounceable nonce word: CV syllables plus a suffix the POS heuristics
// recognize, so the generated content words tag as Noun/Adj without any
// lexicon entries.
std::string make_content_word(RngStream& rng) {
    static constexpr char consonants[] = "bdfgklmnprstvz";
    static constexpr char vowels[] = "aeiou";
    static constexpr const char* suffixes[] = {"ness", "tion", "ity", "ous", "ful", "ish"};
    std::string w;
    const std::size_t syllables = 2 + rng.uniform_below(2);
    for (std::size_t s = 0; s < syllables; ++s) {
        w += consonants[rng.uniform_below(sizeof(consonants) - 1)];
        w += vowels[rng.uniform_below(sizeof(vowels) - 1)];
    }
    w += suffixes[rng.uniform_below(6)];
    return w;
}

} // namespace

SyntheticDataset generate_synthetic(const SyntheticTaskSpec& spec, RngStream& rng) {
    spec.validate();

    SyntheticDataset out;
    std::unordered_set<std::string> used;
    const auto& stopwords = builtin_stopword_list();
    for (const auto& s : stopwords) used.insert(s);

    // Content words with hidden attribute classes.
    std::vector<std::string> content;
    while (content.size() < spec.content_word_count) {
        std::string w = make_content_word(rng);
        if (heuristic_pos(w) == PosTag::Other) continue;
        if (!used.insert(w).second) continue;
        content.push_back(w);
        out.attributes.emplace_back(w, rng.uniform_below(spec.attribute_class_count));
    }

    // Disjoint train/test content pools (Fisher-Yates split).
    std::vector<std::size_t> perm(content.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    for (std::size_t i = perm.size(); i > 1; --i) {
        std::swap(perm[i - 1], perm[rng.uniform_below(i)]);
    }
    const auto train_pool_size = static_cast<std::size_t>(std::llround(
        spec.train_split_fraction * static_cast<double>(spec.content_word_count)));
    std::vector<std::size_t> train_pool(perm.begin(), perm.begin() + train_pool_size);
    std::vector<std::size_t> test_pool(perm.begin() + train_pool_size, perm.end());

    std::unordered_set<std::string> train_words, test_words;
    for (std::size_t i : train_pool) train_words.insert(content[i]);
    for (std::size_t i : test_pool) test_words.insert(content[i]);
    for (const auto& w : test_words) {
        if (train_words.count(w)) {
            throw ContractError("synthetic generator: train/test content vocabularies overlap");
        }
    }

    auto make_sentence = [&](const std::vector<std::size_t>& pool) {
        const std::size_t wps = spec.words_per_sentence;
        // Wide spread of content-word counts: sentences range from one
        // content word up to mostly-content, so augmentation row counts vary
        // a lot from example to example.
        const std::size_t content_count = 1 + rng.uniform_below(std::min<std::size_t>(5, wps - 2));
        // Choose distinct positions for the content words.
        std::vector<std::size_t> slots(wps);
        for (std::size_t i = 0; i < wps; ++i) slots[i] = i;
        for (std::size_t i = wps; i > 1; --i) std::swap(slots[i - 1], slots[rng.uniform_below(i)]);
        std::vector<bool> is_content(wps, false);
        for (std::size_t i = 0; i < content_count; ++i) is_content[slots[i]] = true;

        std::vector<std::string> words(wps);
        std::vector<std::size_t> attrs;
        for (std::size_t i = 0; i < wps; ++i) {
            if (is_content[i]) {
                const std::size_t ci = pool[rng.uniform_below(pool.size())];
                words[i] = content[ci];
                attrs.push_back(out.attributes[ci].second);
            } else {
                words[i] = stopwords[rng.uniform_below(stopwords.size())];
            }
        }
        std::string raw;
        for (std::size_t i = 0; i < wps; ++i) {
            if (i) raw += ' ';
            raw += words[i];
        }
        LabeledExample ex;
        ex.text = annotate(tokenize(raw), builtin_lexicon(), builtin_stopwords());
        ex.label = static_cast<double>(label_from_attributes(attrs, spec.label_rule));
        return ex;
    };

    out.train.reserve(spec.train_sentences);
    for (std::size_t i = 0; i < spec.train_sentences; ++i) out.train.push_back(make_sentence(train_pool));
    out.test.reserve(spec.test_sentences);
    for (std::size_t i = 0; i < spec.test_sentences; ++i) out.test.push_back(make_sentence(test_pool));
    return out;
}

std::vector<LabeledExample> load_jsonl(const std::string& path) {
    return load_jsonl(path, builtin_lexicon(), builtin_stopwords());
}

std::vector<LabeledExample> load_jsonl(const std::string& path, const Lexicon& lexicon,
                                       const StopwordSet& stopwords) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open dataset file '" + path + "'");
    std::vector<LabeledExample> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(path + " line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!j.is_object() || !j.contains("text") || !j.contains("label")) {
            throw ParseError(path + " line " + std::to_string(line_no) +
                             ": expected object with \"text\" and \"label\"");
        }
        if (!j["text"].is_string() || !j["label"].is_number()) {
            throw ParseError(path + " line " + std::to_string(line_no) +
                             ": \"text\" must be a string and \"label\" a number");
        }
        LabeledExample ex;
        ex.text = annotate(tokenize(j["text"].get<std::string>()), lexicon, stopwords);
        ex.label = j["label"].get<double>();
        out.push_back(std::move(ex));
    }
    return out;
}

void save_jsonl(const std::vector<LabeledExample>& examples, const std::string& path) {
    std::ofstream outf(path);
    if (!outf) throw ParseError("cannot write dataset file '" + path + "'");
    for (const auto& ex : examples) {
        nlohmann::json j;
        j["text"] = ex.text.raw;
        if (ex.label == std::floor(ex.label) && std::fabs(ex.label) < 1e15) {
            j["label"] = static_cast<long long>(ex.label);
        } else {
            j["label"] = ex.label;
        }
        outf << j.dump() << '\n';
    }
}

AttributeTable load_attribute_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open attribute table '" + path + "'");
    AttributeTable table;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw ParseError(path + " line " + std::to_string(line_no) +
                             ": expected 'word<TAB>class'");
        }
        try {
            table.emplace_back(line.substr(0, tab),
                               static_cast<std::size_t>(std::stoull(line.substr(tab + 1))));
        } catch (const std::exception&) {
            throw ParseError(path + " line " + std::to_string(line_no) +
                             ": class must be a non-negative integer");
        }
    }
    return table;
}

void save_attribute_table(const AttributeTable& table, const std::string& path) {
    std::ofstream outf(path);
    if (!outf) throw ParseError("cannot write attribute table '" + path + "'");
    for (const auto& [word, cls] : table) outf << word << '\t' << cls << '\n';
}

} // namespace vawi
