#pragma once

#include <string>
#include <utility>
#include <vector>

#include "vawi/rng.hpp"
#include "vawi/text.hpp"

namespace vawi {

struct LabeledExample {
    TokenizedText text;
    double label = 0.0; // class index for classification, value for regression
};

enum class LabelRule { MajorityAttribute, FirstWordAttribute };

const char* label_rule_name(LabelRule rule);
LabelRule label_rule_from_name(std::string_view name);

// Parameters of the held-out-vocabulary probe task. Every content word gets a
// hidden attribute class; sentence labels are a function of those attributes;
// test sentences use only content words never seen in training, so a model
// can solve the test set only through an external source of attributes.
struct SyntheticTaskSpec {
    std::size_t vocab_size = 1000; // upper bound on distinct words overall
    std::size_t content_word_count = 60;
    std::size_t attribute_class_count = 4;
    std::size_t words_per_sentence = 8;
    double train_split_fraction = 0.5;
    LabelRule label_rule = LabelRule::MajorityAttribute;
    std::size_t train_sentences = 400;
    std::size_t test_sentences = 200;

    void validate() const;
};

// Ordered so files and vocabularies come out deterministic.
using AttributeTable = std::vector<std::pair<std::string, std::size_t>>;

struct SyntheticDataset {
    std::vector<LabeledExample> train;
    std::vector<LabeledExample> test;
    AttributeTable attributes;
};

SyntheticDataset generate_synthetic(const SyntheticTaskSpec& spec, RngStream& rng);

// Label computation shared with tests: attributes of the content words in
// sentence order -> label. Majority ties go to the smallest class index.
std::size_t label_from_attributes(const std::vector<std::size_t>& attrs, LabelRule rule);

// One {"text": ..., "label": ...} object per line. Text is re-annotated with
// the given lexicon/stopword lists on load.
std::vector<LabeledExample> load_jsonl(const std::string& path);
std::vector<LabeledExample> load_jsonl(const std::string& path, const Lexicon& lexicon,
                                       const StopwordSet& stopwords);
void save_jsonl(const std::vector<LabeledExample>& examples, const std::string& path);

// Tab-separated "word<TAB>class" rows.
AttributeTable load_attribute_table(const std::string& path);
void save_attribute_table(const AttributeTable& table, const std::string& path);

} // namespace vawi
