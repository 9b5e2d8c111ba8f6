#pragma once

#include <span>
#include <string>
#include <vector>

#include "vawi/encoder.hpp"
#include "vawi/rng.hpp"
#include "vawi/tensor.hpp"
#include "vawi/text.hpp"

namespace vawi {

// Result of one extraction pass over a sentence. indices are ascending token
// positions; scores (when present) cover every token; soft_weights (learned
// strategy only) is a differentiable 1 x l tensor aligned with indices.
struct VHSelection {
    std::vector<std::size_t> indices;
    std::vector<std::string> words;
    std::vector<double> scores;
    Tensor soft_weights;

    std::size_t size() const { return indices.size(); }
    bool empty() const { return indices.empty(); }
};

// Indices of the k largest scores; ties prefer the smaller index; the result
// is sorted ascending. k larger than the input clamps to everything.
std::vector<std::size_t> top_k_hard(std::span<const double> scores, std::size_t k);

// Syntax strategy: every non-stopword Noun/Adj token, original order, no cap.
VHSelection extract_sbs(const TokenizedText& t);

// Attention strategy: score each token by the mean attention the terminal
// EOS query pays it, averaged over heads and (by default) all layers; then
// take the top k. attn_layer >= 0 restricts to one layer.
VHSelection extract_vabs(const TokenizedText& t, const EncoderParams& vl_params, std::size_t k,
                         int attn_layer = -1);

// Two-layer scoring MLP over concatenated encoder states. Input dimension is
// d_plm + d_vl, hidden is half that with tanh, output a scalar per token.
struct LbsExtractor {
    Tensor w1, b1, w2, b2;
    std::size_t input_dim = 0;
    std::vector<std::pair<std::string, Tensor>> named() const;
};

LbsExtractor init_lbs_extractor(std::size_t d_plm, std::size_t d_vl, RngStream& rng);

// Learned strategy: MLP scores + temperature-scaled Gumbel noise, hard top-k
// forward. soft_weights carry the relaxation used for gradients; pass
// soft_forward=true to make the forward value itself differentiable (used by
// the gradient checker).
VHSelection extract_lbs(const TokenizedText& t, const EncoderParams& plm_params,
                        const EncoderParams& vl_params, const LbsExtractor& extractor,
                        std::size_t k, double temperature, RngStream& rng);

// Selection mechanics shared with tests: perturb scores with tau-scaled
// Gumbel noise and take the hard top-k. tau == 0 skips sampling entirely.
std::vector<std::size_t> gumbel_top_k(std::span<const double> scores, std::size_t k, double tau,
                                      RngStream& rng);

// Keep round(fraction * size) entries chosen uniformly without replacement,
// order preserved. soft_weights, when present, are narrowed to the survivors.
VHSelection subsample_selection(const VHSelection& sel, double fraction, RngStream& rng);

// {"indices": [...], "words": [...], "scores": [...]} (scores omitted when absent).
std::string selection_to_json(const VHSelection& sel);

} // namespace vawi
