#include "vawi/augment.hpp"

#include <cmath>

#include "vawi/common.hpp"
#include "vawi/text.hpp"

namespace vawi {

std::optional<std::string> compose_prefix(const VHSelection& sel) {
    if (sel.empty()) return std::nullopt;
    std::string x_prime(kCaptionPrefix);
    for (std::size_t i = 0; i < sel.words.size(); ++i) {
        if (i) x_prime += ' ';
        x_prime += sel.words[i];
    }
    return x_prime;
}

AlignedRepr encode_aligned(const std::string& x_prime, const EncoderParams& vl_params) {
    const TokenizedText toks = tokenize(x_prime);
    const std::size_t prefix_tokens = tokenize(std::string(kCaptionPrefix)).size();

    EncoderOutputs out = encode(vl_params, vl_params.vocab.ids(toks.tokens));
    AlignedRepr ar;
    ar.h_x = out.final_states;
    ar.k = ar.h_x.rows();
    for (std::size_t i = prefix_tokens; i < toks.size(); ++i) ar.vh_token_positions.push_back(i);
    return ar;
}

std::vector<std::pair<std::string, Tensor>> ReformulationParams::named() const {
    return {{"ref.pos_emb", position_embeddings},
            {"ref.w_k", w_k},
            {"ref.b_k", b_k},
            {"ref.w_v", w_v},
            {"ref.b_v", b_v}};
}

ReformulationParams init_reformulation(std::size_t l_max, std::size_t d_vl, std::size_t d_out,
                                       RngStream& rng) {
    if (l_max == 0 || d_vl == 0 || d_out == 0) {
        throw ConfigError("init_reformulation: all dimensions must be at least 1");
    }
    ReformulationParams p;
    p.l_max = l_max;
    p.d_out = d_out;
    auto init = [&](std::size_t r, std::size_t c) {
        std::vector<double> v(r * c);
        for (double& x : v) x = rng.gaussian(0.0, 0.02);
        return Tensor::from_data(r, c, std::move(v), true);
    };
    p.position_embeddings = init(l_max, d_out);
    p.w_k = init(d_vl, d_out);
    p.w_v = init(d_vl, d_out);
    p.b_k = Tensor::zeros(1, d_out, true);
    p.b_v = Tensor::zeros(1, d_out, true);
    return p;
}

const char* augmentation_source_name(AugmentationSource s) {
    return s == AugmentationSource::VlEncoder ? "vl_encoder" : "random_noise";
}

AugmentationSource augmentation_source_from_name(std::string_view name) {
    if (name == "vl_encoder") return AugmentationSource::VlEncoder;
    if (name == "random_noise") return AugmentationSource::RandomNoise;
    throw ConfigError("unknown augmentation source '" + std::string(name) + "'");
}

VisualAugmentation reformulate(const AlignedRepr& aligned, const ReformulationParams& params,
                               std::size_t l) {
    if (l == 0) throw ContractError("reformulate: need at least one VH word");
    if (l > params.l_max) {
        throw ConfigError("reformulate: " + std::to_string(l) + " VH words exceed l_max " +
                          std::to_string(params.l_max));
    }
    if (aligned.h_x.cols() != params.w_k.rows()) {
        throw ConfigError("reformulate: aligned states are " + aligned.h_x.shape_string() +
                          " but projections expect " + std::to_string(params.w_k.rows()) +
                          " input columns");
    }

    std::vector<std::size_t> q_rows(l);
    for (std::size_t i = 0; i < l; ++i) q_rows[i] = i;
    Tensor q = gather_rows(params.position_embeddings, q_rows);
    Tensor keys = add_row_broadcast(matmul(aligned.h_x, params.w_k), params.b_k);
    Tensor values = add_row_broadcast(matmul(aligned.h_x, params.w_v), params.b_v);

    const double att_scale = 1.0 / std::sqrt(static_cast<double>(params.d_out));
    Tensor attn = softmax_rows(scale(matmul(q, transpose(keys)), att_scale));

    VisualAugmentation va;
    va.h_v = matmul(attn, values);
    va.attention = attn;
    va.source = AugmentationSource::VlEncoder;
    return va;
}

VisualAugmentation random_noise_source(std::size_t l, std::size_t d_out, RngStream& rng) {
    if (l == 0) throw ContractError("random_noise_source: l must be at least 1");
    VisualAugmentation va;
    va.h_v = gaussian_sample(l, d_out, rng, 0.0, 0.02);
    va.source = AugmentationSource::RandomNoise;
    return va;
}

VisualAugmentation apply_soft_weights(const VisualAugmentation& va, const Tensor& soft_weights) {
    if (soft_weights.rows() != 1 || soft_weights.cols() != va.l()) {
        throw DimensionError("apply_soft_weights: weights " + soft_weights.shape_string() +
                             " do not match " + std::to_string(va.l()) + " augmentation rows");
    }
    VisualAugmentation out = va;
    out.h_v = scale_rows(va.h_v, soft_weights);
    return out;
}

} // namespace vawi
