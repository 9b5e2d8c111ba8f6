#include "vawi/vh_extract.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "vawi/common.hpp"

namespace vawi {

std::vector<std::size_t> top_k_hard(std::span<const double> scores, std::size_t k) {
    if (k == 0) throw ContractError("top_k_hard: k must be at least 1");
    k = std::min(k, scores.size());
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [&](std::size_t a, std::size_t b) {
                          if (scores[a] != scores[b]) return scores[a] > scores[b];
                          return a < b;
                      });
    order.resize(k);
    std::sort(order.begin(), order.end());
    return order;
}

VHSelection extract_sbs(const TokenizedText& t) {
    VHSelection sel;
    for (std::size_t i = 0; i < t.size(); ++i) {
        const bool visual_pos = t.pos_tags[i] == PosTag::Noun || t.pos_tags[i] == PosTag::Adj;
        if (visual_pos && !t.stopword_flags[i]) {
            sel.indices.push_back(i);
            sel.words.push_back(t.tokens[i]);
        }
    }
    return sel;
}

VHSelection extract_vabs(const TokenizedText& t, const EncoderParams& vl_params, std::size_t k,
                         int attn_layer) {
    if (k == 0) throw ContractError("extract_vabs: k must be at least 1");
    if (t.size() == 0) return {};
    if (attn_layer >= static_cast<int>(vl_params.config.layer_count)) {
        throw ConfigError("extract_vabs: attn_layer " + std::to_string(attn_layer) +
                          " out of range for " + std::to_string(vl_params.config.layer_count) +
                          " layers");
    }

    EncoderOutputs out = encode(vl_params, vl_params.vocab.ids(t.tokens));
    const std::size_t m = t.size();       // EOS sits at row m
    VHSelection sel;
    sel.scores.assign(m, 0.0);
    std::size_t maps = 0;
    for (std::size_t l = 0; l < out.attention_maps.size(); ++l) {
        if (attn_layer >= 0 && static_cast<std::size_t>(attn_layer) != l) continue;
        for (const Tensor& attn : out.attention_maps[l]) {
            for (std::size_t i = 0; i < m; ++i) sel.scores[i] += attn.at(m, i);
            ++maps;
        }
    }
    for (double& s : sel.scores) s /= static_cast<double>(maps);

    sel.indices = top_k_hard(sel.scores, k);
    for (std::size_t i : sel.indices) sel.words.push_back(t.tokens[i]);
    return sel;
}

std::vector<std::pair<std::string, Tensor>> LbsExtractor::named() const {
    return {{"extractor.w1", w1}, {"extractor.b1", b1}, {"extractor.w2", w2}, {"extractor.b2", b2}};
}

LbsExtractor init_lbs_extractor(std::size_t d_plm, std::size_t d_vl, RngStream& rng) {
    LbsExtractor e;
    e.input_dim = d_plm + d_vl;
    const std::size_t hidden = e.input_dim / 2;
    auto init = [&](std::size_t r, std::size_t c) {
        std::vector<double> v(r * c);
        for (double& x : v) x = rng.gaussian(0.0, 0.02);
        return Tensor::from_data(r, c, std::move(v), true);
    };
    e.w1 = init(e.input_dim, hidden);
    e.b1 = Tensor::zeros(1, hidden, true);
    e.w2 = init(hidden, 1);
    e.b2 = Tensor::zeros(1, 1, true);
    return e;
}

std::vector<std::size_t> gumbel_top_k(std::span<const double> scores, std::size_t k, double tau,
                                      RngStream& rng) {
    if (tau == 0.0) return top_k_hard(scores, k);
    std::vector<double> perturbed(scores.begin(), scores.end());
    for (double& s : perturbed) s += tau * gumbel_from_uniform(rng.uniform_open01());
    return top_k_hard(perturbed, k);
}

VHSelection extract_lbs(const TokenizedText& t, const EncoderParams& plm_params,
                        const EncoderParams& vl_params, const LbsExtractor& extractor,
                        std::size_t k, double temperature, RngStream& rng) {
    if (k == 0) throw ContractError("extract_lbs: k must be at least 1");
    if (t.size() == 0) return {};
    const std::size_t m = t.size();

    EncoderOutputs plm_out = encode(plm_params, plm_params.vocab.ids(t.tokens));
    EncoderOutputs vl_out = encode(vl_params, vl_params.vocab.ids(t.tokens));

    // Per-word states; the causal encoder's EOS row is dropped.
    std::vector<std::size_t> word_rows(m);
    std::iota(word_rows.begin(), word_rows.end(), 0);
    Tensor h_plm = plm_out.final_states;
    Tensor h_vl = gather_rows(vl_out.final_states, word_rows);
    Tensor joint = concat_cols({h_plm, h_vl});

    if (joint.cols() != extractor.input_dim) {
        throw ConfigError("extract_lbs: extractor expects input dim " +
                          std::to_string(extractor.input_dim) + " but encoders produce " +
                          std::to_string(joint.cols()));
    }

    Tensor hidden = tanh_op(add_row_broadcast(matmul(joint, extractor.w1), extractor.b1));
    Tensor score_col = add_row_broadcast(matmul(hidden, extractor.w2), extractor.b2); // m x 1
    Tensor scores_row = transpose(score_col);                                         // 1 x m

    // Perturbed scores: the noise is a constant in the graph, so gradients
    // reach the MLP through the scores alone.
    Tensor z = scores_row;
    if (temperature != 0.0) {
        Tensor noise = scale(gumbel_sample(1, m, rng), temperature);
        z = add(scores_row, noise);
    }

    VHSelection sel;
    sel.scores.assign(scores_row.data().begin(), scores_row.data().end());
    sel.indices = top_k_hard(z.data(), k);
    for (std::size_t i : sel.indices) sel.words.push_back(t.tokens[i]);

    // Relaxed selection weight per chosen token: a two-way softmax of the
    // chosen score against every non-chosen score. Raising a chosen token's
    // score raises its weight, which is what lets selection pressure
    // back-propagate into the MLP.
    std::vector<bool> chosen(m, false);
    for (std::size_t i : sel.indices) chosen[i] = true;
    std::vector<std::size_t> rest;
    for (std::size_t i = 0; i < m; ++i)
        if (!chosen[i]) rest.push_back(i);

    std::vector<Tensor> weights;
    weights.reserve(sel.indices.size());
    for (std::size_t i : sel.indices) {
        std::vector<std::size_t> contest{i};
        contest.insert(contest.end(), rest.begin(), rest.end());
        Tensor logits = gather_cols(z, contest);
        weights.push_back(pick(softmax_rows(logits), 0, 0));
    }
    if (!weights.empty()) sel.soft_weights = concat_cols(weights);
    return sel;
}

VHSelection subsample_selection(const VHSelection& sel, double fraction, RngStream& rng) {
    if (fraction < 0.0 || fraction > 1.0) {
        throw ContractError("subsample_selection: fraction must lie in [0, 1]");
    }
    const std::size_t n = sel.size();
    const auto keep = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
    if (keep == n) return sel;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.uniform_below(i)]);
    order.resize(keep);
    std::sort(order.begin(), order.end());

    VHSelection out;
    out.scores = sel.scores;
    for (std::size_t pos : order) {
        out.indices.push_back(sel.indices[pos]);
        out.words.push_back(sel.words[pos]);
    }
    if (sel.soft_weights.defined() && keep > 0) {
        out.soft_weights = gather_cols(sel.soft_weights, order);
    }
    return out;
}

std::string selection_to_json(const VHSelection& sel) {
    nlohmann::json j;
    j["indices"] = sel.indices;
    j["words"] = sel.words;
    if (!sel.scores.empty()) j["scores"] = sel.scores;
    return j.dump();
}

} // namespace vawi
