#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "vawi/dataset.hpp"
#include "vawi/rng.hpp"
#include "vawi/tensor.hpp"

namespace vawi {

struct EncoderConfig {
    std::size_t vocab_size = 0; // filled in when the vocabulary is built
    std::size_t hidden_size = 64;
    std::size_t layer_count = 2;
    std::size_t head_count = 4;
    std::size_t max_sequence_length = 64;
    bool causal = false;
    std::size_t ff_multiplier = 4;

    void validate() const;
    std::size_t head_dim() const { return hidden_size / head_count; }
};

// Word-level vocabulary. Id 0 is <unk>; causal vocabularies additionally
// reserve <eos>, appended automatically by encode().
struct Vocab {
    std::vector<std::string> words;
    std::unordered_map<std::string, std::size_t> index;
    std::size_t unk_id = 0;
    std::optional<std::size_t> eos_id;

    static Vocab build(const std::vector<std::string>& word_list, bool with_eos);
    std::size_t id(const std::string& word) const;
    std::vector<std::size_t> ids(const std::vector<std::string>& tokens) const;
    std::size_t size() const { return words.size(); }
};

struct NamedTensor {
    std::string name;
    Tensor tensor;
};

// One transformer encoder's weights plus its vocabulary. Tensor order is
// fixed at init time and preserved everywhere (checkpoints, optimizers).
struct EncoderParams {
    EncoderConfig config;
    Vocab vocab;
    std::vector<NamedTensor> tensors;
    std::unordered_map<std::string, std::size_t> by_name;

    Tensor& get(const std::string& name);
    const Tensor& get(const std::string& name) const;
    void add(std::string name, Tensor t);
    void set_trainable(bool trainable);
};

struct EncoderOutputs {
    std::vector<Tensor> hidden_states;               // per layer, (seq x d)
    std::vector<std::vector<Tensor>> attention_maps; // [layer][head], (seq x seq)
    Tensor final_states;                             // (seq x d), after final norm
    std::vector<std::size_t> token_ids;              // includes EOS when causal
};

// Fresh trainable encoder. Weights and embeddings ~ Normal(0, 0.02^2),
// biases zero, learned absolute position embeddings.
EncoderParams init_plm(const EncoderConfig& config, const Vocab& vocab, RngStream& rng);

// Frozen causal encoder standing in for an aligned text tower: each content
// word's embedding carries its attribute class as a one-hot block in the
// first attribute_class_count dimensions. All tensors are non-trainable.
EncoderParams init_vl_encoder(const EncoderConfig& config, const Vocab& vocab,
                              const AttributeTable& attributes,
                              std::size_t attribute_class_count, RngStream& rng);

// Pre-norm transformer forward with attention maps retained for every layer
// and head. Causal encoders append their EOS id before embedding.
EncoderOutputs encode(const EncoderParams& params, std::vector<std::size_t> token_ids);

// Lower-level pieces used by the injection module.
Tensor embed_tokens(const EncoderParams& params, const std::vector<std::size_t>& ids);
Tensor position_rows(const EncoderParams& params, std::size_t count);
// Runs the layer stack over already-embedded rows. When per_layer_prefix is
// given, its rows are prepended to every layer's input and stripped from the
// running text rows after each layer (prefix re-injection).
EncoderOutputs run_layers(const EncoderParams& params, Tensor input_rows,
                          const Tensor* per_layer_prefix = nullptr);

// ---- parameter partition ----

enum class Group : std::uint8_t { Plm = 0, Vlp = 1, Ref = 2, Head = 3 };

const char* group_name(Group g);

struct ParameterPartition {
    struct Entry {
        std::string name;
        Tensor tensor;
        Group group;
        bool trainable;
    };
    std::vector<Entry> entries;

    void add(const std::string& name, Tensor t, Group group, bool trainable);
    std::vector<Tensor> tensors_in_group(Group g) const;
    std::vector<Tensor> trainable_tensors() const;
    std::vector<std::pair<std::string, Tensor>> named_trainable() const;
};

} // namespace vawi
