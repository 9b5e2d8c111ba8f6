#include "vawi/encoder.hpp"

#include <cmath>
#include <unordered_set>

#include "vawi/common.hpp"

namespace vawi {

void EncoderConfig::validate() const {
    if (hidden_size == 0 || layer_count == 0 || head_count == 0 ||
        max_sequence_length == 0 || ff_multiplier == 0) {
        throw ConfigError("encoder: all size fields must be at least 1");
    }
    if (hidden_size % head_count != 0) {
        throw ConfigError("encoder: hidden_size " + std::to_string(hidden_size) +
                          " is not divisible by head_count " + std::to_string(head_count));
    }
    if (vocab_size == 0) {
        throw ConfigError("encoder: vocab_size is unset");
    }
}

Vocab Vocab::build(const std::vector<std::string>& word_list, bool with_eos) {
    Vocab v;
    auto push = [&](const std::string& w) {
        if (v.index.emplace(w, v.words.size()).second) v.words.push_back(w);
    };
    push("<unk>");
    v.unk_id = 0;
    if (with_eos) {
        push("<eos>");
        v.eos_id = 1;
    }
    for (const auto& w : word_list) push(w);
    return v;
}

std::size_t Vocab::id(const std::string& word) const {
    auto it = index.find(word);
    return it != index.end() ? it->second : unk_id;
}

std::vector<std::size_t> Vocab::ids(const std::vector<std::string>& tokens) const {
    std::vector<std::size_t> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(id(t));
    return out;
}

Tensor& EncoderParams::get(const std::string& name) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw ContractError("encoder: no tensor named '" + name + "'");
    return tensors[it->second].tensor;
}

const Tensor& EncoderParams::get(const std::string& name) const {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw ContractError("encoder: no tensor named '" + name + "'");
    return tensors[it->second].tensor;
}

void EncoderParams::add(std::string name, Tensor t) {
    by_name.emplace(name, tensors.size());
    tensors.push_back({std::move(name), std::move(t)});
}

void EncoderParams::set_trainable(bool trainable) {
    for (auto& nt : tensors) nt.tensor.set_requires_grad(trainable);
}

namespace {

constexpr double kInitStd = 0.02;

Tensor gaussian_param(std::size_t r, std::size_t c, RngStream& rng) {
    std::vector<double> v(r * c);
    for (double& x : v) x = rng.gaussian(0.0, kInitStd);
    return Tensor::from_data(r, c, std::move(v), true);
}

EncoderParams init_encoder(const EncoderConfig& config, const Vocab& vocab, RngStream& rng) {
    EncoderParams p;
    p.config = config;
    p.config.vocab_size = vocab.size();
    p.config.validate();
    p.vocab = vocab;

    const std::size_t d = config.hidden_size;
    const std::size_t ff = d * config.ff_multiplier;

    p.add("tok_emb", gaussian_param(vocab.size(), d, rng));
    p.add("pos_emb", gaussian_param(config.max_sequence_length, d, rng));
    for (std::size_t l = 0; l < config.layer_count; ++l) {
        const std::string pre = "layer" + std::to_string(l) + ".";
        p.add(pre + "ln1.gamma", Tensor::from_data(1, d, std::vector<double>(d, 1.0), true));
        p.add(pre + "ln1.beta", Tensor::zeros(1, d, true));
        p.add(pre + "attn.wq", gaussian_param(d, d, rng));
        p.add(pre + "attn.bq", Tensor::zeros(1, d, true));
        p.add(pre + "attn.wk", gaussian_param(d, d, rng));
        p.add(pre + "attn.bk", Tensor::zeros(1, d, true));
        p.add(pre + "attn.wv", gaussian_param(d, d, rng));
        p.add(pre + "attn.bv", Tensor::zeros(1, d, true));
        p.add(pre + "attn.wo", gaussian_param(d, d, rng));
        p.add(pre + "attn.bo", Tensor::zeros(1, d, true));
        p.add(pre + "ln2.gamma", Tensor::from_data(1, d, std::vector<double>(d, 1.0), true));
        p.add(pre + "ln2.beta", Tensor::zeros(1, d, true));
        p.add(pre + "ff.w1", gaussian_param(d, ff, rng));
        p.add(pre + "ff.b1", Tensor::zeros(1, ff, true));
        p.add(pre + "ff.w2", gaussian_param(ff, d, rng));
        p.add(pre + "ff.b2", Tensor::zeros(1, d, true));
    }
    p.add("ln_f.gamma", Tensor::from_data(1, d, std::vector<double>(d, 1.0), true));
    p.add("ln_f.beta", Tensor::zeros(1, d, true));
    return p;
}

} // namespace

EncoderParams init_plm(const EncoderConfig& config, const Vocab& vocab, RngStream& rng) {
    if (config.causal) throw ConfigError("init_plm: the trainable encoder is bidirectional");
    return init_encoder(config, vocab, rng);
}

EncoderParams init_vl_encoder(const EncoderConfig& config, const Vocab& vocab,
                              const AttributeTable& attributes,
                              std::size_t attribute_class_count, RngStream& rng) {
    if (!config.causal) throw ConfigError("init_vl_encoder: config must be causal");
    if (attribute_class_count > config.hidden_size) {
        throw ConfigError("init_vl_encoder: attribute_class_count " +
                          std::to_string(attribute_class_count) + " exceeds hidden_size " +
                          std::to_string(config.hidden_size));
    }
    if (!vocab.eos_id) throw ConfigError("init_vl_encoder: vocabulary lacks <eos>");

    EncoderParams p = init_encoder(config, vocab, rng);

    // Write the hidden attribute classes into the reserved embedding block.
    // Words without an attribute (stopwords, punctuation, specials) get a
    // zero block, so attribute information exists only for content words.
    auto& emb = p.get("tok_emb").mutable_data();
    const std::size_t d = config.hidden_size;
    for (std::size_t w = 0; w < vocab.size(); ++w) {
        for (std::size_t c = 0; c < attribute_class_count; ++c) emb[w * d + c] = 0.0;
    }
    for (const auto& [word, cls] : attributes) {
        auto it = vocab.index.find(word);
        if (it == vocab.index.end()) continue;
        if (cls >= attribute_class_count) {
            throw ConfigError("init_vl_encoder: attribute class " + std::to_string(cls) +
                              " out of range for word '" + word + "'");
        }
        emb[it->second * d + cls] = 1.0;
    }

    p.set_trainable(false);
    return p;
}

Tensor embed_tokens(const EncoderParams& params, const std::vector<std::size_t>& ids) {
    for (std::size_t id : ids) {
        if (id >= params.config.vocab_size) {
            throw DimensionError("embed_tokens: token id " + std::to_string(id) +
                                 " out of range for vocab of " +
                                 std::to_string(params.config.vocab_size));
        }
    }
    return gather_rows(params.get("tok_emb"), ids);
}

Tensor position_rows(const EncoderParams& params, std::size_t count) {
    if (count > params.config.max_sequence_length) {
        throw LengthError("sequence of " + std::to_string(count) +
                          " tokens exceeds max_sequence_length " +
                          std::to_string(params.config.max_sequence_length));
    }
    std::vector<std::size_t> idx(count);
    for (std::size_t i = 0; i < count; ++i) idx[i] = i;
    return gather_rows(params.get("pos_emb"), idx);
}

namespace {

struct LayerResult {
    Tensor output;
    std::vector<Tensor> attention; // per head
};

LayerResult transformer_layer(const EncoderParams& params, std::size_t layer, const Tensor& x) {
    const auto& cfg = params.config;
    const std::string pre = "layer" + std::to_string(layer) + ".";
    const std::size_t heads = cfg.head_count;
    const std::size_t dh = cfg.head_dim();
    const double att_scale = 1.0 / std::sqrt(static_cast<double>(dh));

    Tensor a = layer_norm_rows(x, params.get(pre + "ln1.gamma"), params.get(pre + "ln1.beta"));
    Tensor q = add_row_broadcast(matmul(a, params.get(pre + "attn.wq")), params.get(pre + "attn.bq"));
    Tensor k = add_row_broadcast(matmul(a, params.get(pre + "attn.wk")), params.get(pre + "attn.bk"));
    Tensor v = add_row_broadcast(matmul(a, params.get(pre + "attn.wv")), params.get(pre + "attn.bv"));

    LayerResult res;
    std::vector<Tensor> contexts;
    contexts.reserve(heads);
    for (std::size_t h = 0; h < heads; ++h) {
        Tensor qh = slice_cols(q, h * dh, dh);
        Tensor kh = slice_cols(k, h * dh, dh);
        Tensor vh = slice_cols(v, h * dh, dh);
        Tensor scores = scale(matmul(qh, transpose(kh)), att_scale);
        Tensor attn = softmax_rows(scores, cfg.causal);
        res.attention.push_back(attn);
        contexts.push_back(matmul(attn, vh));
    }
    Tensor ctx = concat_cols(contexts);
    Tensor attn_out =
        add_row_broadcast(matmul(ctx, params.get(pre + "attn.wo")), params.get(pre + "attn.bo"));
    Tensor x1 = add(x, attn_out);

    Tensor f = layer_norm_rows(x1, params.get(pre + "ln2.gamma"), params.get(pre + "ln2.beta"));
    Tensor h1 = gelu(add_row_broadcast(matmul(f, params.get(pre + "ff.w1")),
                                       params.get(pre + "ff.b1")));
    Tensor ff_out =
        add_row_broadcast(matmul(h1, params.get(pre + "ff.w2")), params.get(pre + "ff.b2"));
    res.output = add(x1, ff_out);
    return res;
}

} // namespace

EncoderOutputs run_layers(const EncoderParams& params, Tensor input_rows,
                          const Tensor* per_layer_prefix) {
    const std::size_t prefix_rows = per_layer_prefix ? per_layer_prefix->rows() : 0;
    if (input_rows.rows() + prefix_rows > params.config.max_sequence_length) {
        throw LengthError("sequence of " + std::to_string(input_rows.rows() + prefix_rows) +
                          " rows exceeds max_sequence_length " +
                          std::to_string(params.config.max_sequence_length));
    }

    EncoderOutputs out;
    Tensor text = std::move(input_rows);
    for (std::size_t l = 0; l < params.config.layer_count; ++l) {
        Tensor layer_in =
            per_layer_prefix ? concat_rows({*per_layer_prefix, text}) : text;
        LayerResult res = transformer_layer(params, l, layer_in);
        out.hidden_states.push_back(res.output);
        out.attention_maps.push_back(std::move(res.attention));
        if (per_layer_prefix) {
            std::vector<std::size_t> text_rows(res.output.rows() - prefix_rows);
            for (std::size_t i = 0; i < text_rows.size(); ++i) text_rows[i] = prefix_rows + i;
            text = gather_rows(res.output, text_rows);
        } else {
            text = res.output;
        }
    }
    const Tensor& last = out.hidden_states.back();
    out.final_states = layer_norm_rows(last, params.get("ln_f.gamma"), params.get("ln_f.beta"));
    return out;
}

EncoderOutputs encode(const EncoderParams& params, std::vector<std::size_t> token_ids) {
    if (params.config.causal) token_ids.push_back(*params.vocab.eos_id);
    if (token_ids.empty()) throw ContractError("encode: empty token sequence");
    if (token_ids.size() > params.config.max_sequence_length) {
        throw LengthError("sequence of " + std::to_string(token_ids.size()) +
                          " tokens exceeds max_sequence_length " +
                          std::to_string(params.config.max_sequence_length));
    }
    Tensor x = add(embed_tokens(params, token_ids), position_rows(params, token_ids.size()));
    EncoderOutputs out = run_layers(params, std::move(x));
    out.token_ids = std::move(token_ids);
    return out;
}

const char* group_name(Group g) {
    switch (g) {
        case Group::Plm: return "plm";
        case Group::Vlp: return "vlp";
        case Group::Ref: return "ref";
        case Group::Head: return "head";
    }
    return "?";
}

void ParameterPartition::add(const std::string& name, Tensor t, Group group, bool trainable) {
    for (const auto& e : entries) {
        if (e.name == name) throw ContractError("partition: duplicate tensor name '" + name + "'");
    }
    entries.push_back({name, std::move(t), group, trainable});
}

std::vector<Tensor> ParameterPartition::tensors_in_group(Group g) const {
    std::vector<Tensor> out;
    for (const auto& e : entries)
        if (e.group == g) out.push_back(e.tensor);
    return out;
}

std::vector<Tensor> ParameterPartition::trainable_tensors() const {
    std::vector<Tensor> out;
    for (const auto& e : entries)
        if (e.trainable) out.push_back(e.tensor);
    return out;
}

std::vector<std::pair<std::string, Tensor>> ParameterPartition::named_trainable() const {
    std::vector<std::pair<std::string, Tensor>> out;
    for (const auto& e : entries)
        if (e.trainable) out.emplace_back(e.name, e.tensor);
    return out;
}

} // namespace vawi
