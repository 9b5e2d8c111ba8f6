#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vawi/adam.hpp"
#include "vawi/augment.hpp"
#include "vawi/checkpoint.hpp"
#include "vawi/dataset.hpp"
#include "vawi/encoder.hpp"
#include "vawi/vh_extract.hpp"

namespace vawi {

enum class Regime { FullFinetune, PromptTune };
enum class InsertPosition { AfterVh, BeforeText, AfterText, None };
enum class Strategy { Sbs, Vabs, Lbs };
enum class LossKind { CrossEntropy, Mse };

const char* regime_name(Regime r);
Regime regime_from_name(std::string_view name);
const char* insert_position_name(InsertPosition p);
InsertPosition insert_position_from_name(std::string_view name);
const char* strategy_name(Strategy s);
Strategy strategy_from_name(std::string_view name);
const char* loss_kind_name(LossKind k);
LossKind loss_kind_from_name(std::string_view name);

struct InjectionConfig {
    Regime regime = Regime::FullFinetune;
    InsertPosition insertion_position = InsertPosition::AfterVh; // ignored by prompt tuning
    Strategy strategy = Strategy::Sbs;
    std::size_t k = 3;
    double temperature = 1.0;
    AugmentationSource source = AugmentationSource::VlEncoder;
    double vh_fraction = 1.0;
    int vabs_attn_layer = -1;            // -1 = average over all layers
    bool add_position_to_inserted = true;

    void validate() const;
};

struct TrainConfig {
    double lr = 2e-3;
    double weight_decay = 0.01;
    double warmup_fraction = 0.06;
    std::size_t epochs = 8;
    std::size_t batch_size = 16;
    std::uint64_t seed = 1234;
    LossKind loss = LossKind::CrossEntropy;

    void validate() const;
};

struct Metrics {
    double metric = 0.0; // accuracy (classification) or MSE (regression)
    double loss = 0.0;
    bool is_accuracy = true;
    struct EpochStats {
        double loss = 0.0;
        double metric = 0.0;
    };
    std::vector<EpochStats> per_epoch;
    std::map<std::string, double> group_update_norms;
};

// ---- injection primitives ----

struct InsertResult {
    Tensor rows;                        // (m + l) x d
    std::vector<std::size_t> index_map; // original position -> new position
    std::vector<std::size_t> original_positions; // new positions of original rows
};

// Places augmentation rows into a sequence of word-embedding rows. AfterVh
// puts each row directly after its source token; BeforeText/AfterText place
// the whole block in selection order; None returns the input untouched.
InsertResult inject_embeddings(const Tensor& word_embeddings, const VisualAugmentation& va,
                               InsertPosition position);

// ---- model bundle ----

struct VawiModel {
    EncoderParams plm;        // group plm
    EncoderParams vl;         // group vlp, frozen
    ReformulationParams ref;  // group ref
    LbsExtractor extractor;   // group ref (trained alongside the reformulation layer)
    Tensor head_w, head_b;    // group head
    std::size_t class_count = 2;
    std::size_t l_max = 16;

    ParameterPartition partition() const;
    // Trainability per regime: vlp is always frozen; prompt tuning also
    // freezes the backbone and trains only ref + head.
    void apply_regime(Regime regime);
};

struct ModelConfig {
    EncoderConfig plm;
    EncoderConfig vl;
    std::size_t attribute_class_count = 4;
    std::size_t l_max = 16;
    std::size_t class_count = 4;
};

// Builds vocabularies from the attribute table, the bundled stopword list and
// every token of the given datasets, then initializes all parameter groups.
VawiModel init_model(const ModelConfig& config, const AttributeTable& attributes,
                     const std::vector<const std::vector<LabeledExample>*>& datasets,
                     std::uint64_t seed);

// ---- forward / training ----

struct ExampleKey {
    std::uint64_t epoch = 0;
    std::uint64_t example = 0; // dataset index
};

struct ForwardResult {
    Tensor loss;
    Tensor logits;     // 1 x class_count (classification) or 1 x 1 (regression)
    double prediction; // argmax class or regression value
    std::optional<VHSelection> selection;
    std::optional<VisualAugmentation> augmentation;
    std::vector<std::size_t> index_map;
    EncoderOutputs plm_outputs;
};

// Full pipeline for one example: extract -> subsample -> augment -> inject ->
// encode -> pool -> head -> loss. soft_forward routes the learned strategy's
// relaxed weights into the forward value (for gradient checking) instead of
// straight-through ones.
ForwardResult task_forward(VawiModel& model, const LabeledExample& example,
                           const InjectionConfig& cfg, LossKind loss, std::uint64_t seed,
                           ExampleKey key, bool soft_forward = false);

// Trains in place and reports per-epoch stats; eval_set, when given, supplies
// the final metric. Deterministic for a fixed (config, seed).
Metrics train(VawiModel& model, const InjectionConfig& inject_cfg, const TrainConfig& train_cfg,
              const std::vector<LabeledExample>& train_set,
              const std::vector<LabeledExample>* eval_set);

// Deterministic, mutation-free evaluation. Shards across threads when the
// VAWI_THREADS environment variable allows; the reduction order is fixed.
Metrics evaluate(VawiModel& model, const std::vector<LabeledExample>& dataset,
                 const InjectionConfig& cfg, LossKind loss, std::uint64_t seed);

// ---- ablations ----

struct SweepRow {
    std::string value;
    double metric = 0.0;
    double loss = 0.0;
};

enum class SweepAxis { K, InsertionPosition, AugmentationSource, VhFraction };

SweepAxis sweep_axis_from_name(std::string_view name);
const char* sweep_axis_name(SweepAxis axis);

// One train + evaluate per axis value, all from the same seed and model init.
std::vector<SweepRow> ablation_sweep(const ModelConfig& model_cfg,
                                     const InjectionConfig& base_inject,
                                     const TrainConfig& train_cfg, SweepAxis axis,
                                     const std::vector<std::string>& values,
                                     const AttributeTable& attributes,
                                     const std::vector<LabeledExample>& train_set,
                                     const std::vector<LabeledExample>& test_set);

} // namespace vawi
