#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vawi/encoder.hpp"
#include "vawi/rng.hpp"
#include "vawi/tensor.hpp"
#include "vawi/vh_extract.hpp"

namespace vawi {

inline constexpr std::string_view kCaptionPrefix = "a photo of : ";

// Caption-style prompt for the aligned encoder. An empty selection yields
// nullopt, which downstream treats as "run the unaugmented path".
std::optional<std::string> compose_prefix(const VHSelection& sel);

// Final-layer states of the frozen aligned encoder over the prefixed text,
// including the prefix tokens and the terminal EOS.
struct AlignedRepr {
    Tensor h_x;                                 // k x d_vl
    std::size_t k = 0;                          // rows of h_x
    std::vector<std::size_t> vh_token_positions; // position of each VH word in x'
};

AlignedRepr encode_aligned(const std::string& x_prime, const EncoderParams& vl_params);

// Position-aware cross-attention that turns aligned representations into one
// augmentation row per VH word. The query depends only on the row position;
// the input text enters through keys and values.
struct ReformulationParams {
    Tensor position_embeddings; // l_max x d_out
    Tensor w_k, w_v;            // d_vl x d_out
    Tensor b_k, b_v;            // 1 x d_out
    std::size_t l_max = 0;
    std::size_t d_out = 0;

    std::vector<std::pair<std::string, Tensor>> named() const;
};

ReformulationParams init_reformulation(std::size_t l_max, std::size_t d_vl, std::size_t d_out,
                                       RngStream& rng);

enum class AugmentationSource { VlEncoder, RandomNoise };

const char* augmentation_source_name(AugmentationSource s);
AugmentationSource augmentation_source_from_name(std::string_view name);

struct VisualAugmentation {
    Tensor h_v;                               // l x d_out
    std::vector<std::size_t> source_positions; // original-sentence token index per row
    AugmentationSource source = AugmentationSource::VlEncoder;
    Tensor attention;                         // l x k cross-attention weights (empty for noise)

    std::size_t l() const { return h_v.rows(); }
};

// h_v = softmax(E[0:l] (H_x W_k + b_k)^T / sqrt(d_out)) (H_x W_v + b_v).
VisualAugmentation reformulate(const AlignedRepr& aligned, const ReformulationParams& params,
                               std::size_t l);

// Ablation source: rows ~ Normal(0, 0.02^2); carries no information about
// the input. source_positions are filled by the caller.
VisualAugmentation random_noise_source(std::size_t l, std::size_t d_out, RngStream& rng);

// Scales row i of h_v by weights[0, i]. Forward values are unchanged when
// the weights are straight-through ones.
VisualAugmentation apply_soft_weights(const VisualAugmentation& va, const Tensor& soft_weights);

} // namespace vawi
