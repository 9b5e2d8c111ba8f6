#include "vawi/inject.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <thread>
#include <unordered_map>

#include "vawi/common.hpp"

namespace vawi {

// ---- enum plumbing ----

const char* regime_name(Regime r) {
    return r == Regime::FullFinetune ? "full_finetune" : "prompt_tune";
}

Regime regime_from_name(std::string_view name) {
    if (name == "full_finetune") return Regime::FullFinetune;
    if (name == "prompt_tune") return Regime::PromptTune;
    throw ConfigError("unknown regime '" + std::string(name) + "'");
}

const char* insert_position_name(InsertPosition p) {
    switch (p) {
        case InsertPosition::AfterVh: return "after_vh";
        case InsertPosition::BeforeText: return "before_text";
        case InsertPosition::AfterText: return "after_text";
        case InsertPosition::None: return "none";
    }
    return "?";
}

InsertPosition insert_position_from_name(std::string_view name) {
    if (name == "after_vh") return InsertPosition::AfterVh;
    if (name == "before_text") return InsertPosition::BeforeText;
    if (name == "after_text") return InsertPosition::AfterText;
    if (name == "none") return InsertPosition::None;
    throw ConfigError("unknown insertion position '" + std::string(name) + "'");
}

const char* strategy_name(Strategy s) {
    switch (s) {
        case Strategy::Sbs: return "sbs";
        case Strategy::Vabs: return "vabs";
        case Strategy::Lbs: return "lbs";
    }
    return "?";
}

Strategy strategy_from_name(std::string_view name) {
    if (name == "sbs") return Strategy::Sbs;
    if (name == "vabs") return Strategy::Vabs;
    if (name == "lbs") return Strategy::Lbs;
    throw ConfigError("unknown strategy '" + std::string(name) + "'");
}

const char* loss_kind_name(LossKind k) {
    return k == LossKind::CrossEntropy ? "cross_entropy" : "mse";
}

LossKind loss_kind_from_name(std::string_view name) {
    if (name == "cross_entropy") return LossKind::CrossEntropy;
    if (name == "mse") return LossKind::Mse;
    throw ConfigError("unknown loss '" + std::string(name) + "'");
}

void InjectionConfig::validate() const {
    if (k == 0) throw ConfigError("injection: k must be at least 1");
    if (vh_fraction < 0.0 || vh_fraction > 1.0) {
        throw ConfigError("injection: vh_fraction must lie in [0, 1]");
    }
    if (temperature < 0.0) throw ConfigError("injection: temperature must be non-negative");
}

void TrainConfig::validate() const {
    if (warmup_fraction < 0.0 || warmup_fraction >= 1.0) {
        throw ConfigError("train: warmup_fraction must lie in [0, 1)");
    }
    if (batch_size == 0) throw ConfigError("train: batch_size must be at least 1");
    if (lr <= 0.0) throw ConfigError("train: lr must be positive");
}

// ---- injection primitives ----

InsertResult inject_embeddings(const Tensor& word_embeddings, const VisualAugmentation& va,
                               InsertPosition position) {
    const std::size_t m = word_embeddings.rows();
    InsertResult res;
    if (position == InsertPosition::None || !va.h_v.defined() || va.l() == 0) {
        res.rows = word_embeddings;
        res.index_map.resize(m);
        std::iota(res.index_map.begin(), res.index_map.end(), 0);
        res.original_positions = res.index_map;
        return res;
    }

    const std::size_t l = va.l();
    std::vector<RowRef> plan;
    plan.reserve(m + l);
    res.index_map.assign(m, 0);

    if (position == InsertPosition::AfterVh) {
        if (va.source_positions.size() != l) {
            throw ContractError("inject_embeddings: augmentation rows lack source positions");
        }
        for (std::size_t p : va.source_positions) {
            if (p >= m) {
                throw ContractError("inject_embeddings: source position " + std::to_string(p) +
                                    " out of range for " + std::to_string(m) + " tokens");
            }
        }
        std::size_t next_aug = 0;
        for (std::size_t i = 0; i < m; ++i) {
            res.index_map[i] = plan.size();
            plan.push_back({0, i});
            while (next_aug < l && va.source_positions[next_aug] == i) {
                plan.push_back({1, next_aug});
                ++next_aug;
            }
        }
    } else if (position == InsertPosition::BeforeText) {
        for (std::size_t j = 0; j < l; ++j) plan.push_back({1, j});
        for (std::size_t i = 0; i < m; ++i) {
            res.index_map[i] = plan.size();
            plan.push_back({0, i});
        }
    } else { // AfterText
        for (std::size_t i = 0; i < m; ++i) {
            res.index_map[i] = plan.size();
            plan.push_back({0, i});
        }
        for (std::size_t j = 0; j < l; ++j) plan.push_back({1, j});
    }

    res.rows = interleave_rows(word_embeddings, va.h_v, plan);
    res.original_positions = res.index_map;
    return res;
}

// ---- model bundle ----

ParameterPartition VawiModel::partition() const {
    ParameterPartition part;
    for (const auto& nt : plm.tensors) {
        part.add("plm." + nt.name, nt.tensor, Group::Plm, nt.tensor.requires_grad());
    }
    for (const auto& nt : vl.tensors) {
        part.add("vlp." + nt.name, nt.tensor, Group::Vlp, nt.tensor.requires_grad());
    }
    for (const auto& [name, t] : ref.named()) part.add(name, t, Group::Ref, t.requires_grad());
    for (const auto& [name, t] : extractor.named()) part.add(name, t, Group::Ref, t.requires_grad());
    part.add("head.w", head_w, Group::Head, head_w.requires_grad());
    part.add("head.b", head_b, Group::Head, head_b.requires_grad());
    return part;
}

void VawiModel::apply_regime(Regime regime) {
    plm.set_trainable(regime == Regime::FullFinetune);
    // vl stays frozen in every regime
    for (auto& [name, t] : ref.named()) {
        (void)name;
        Tensor tensor = t;
        tensor.set_requires_grad(true);
    }
    for (auto& [name, t] : extractor.named()) {
        (void)name;
        Tensor tensor = t;
        tensor.set_requires_grad(true);
    }
    head_w.set_requires_grad(true);
    head_b.set_requires_grad(true);
}

VawiModel init_model(const ModelConfig& config, const AttributeTable& attributes,
                     const std::vector<const std::vector<LabeledExample>*>& datasets,
                     std::uint64_t seed) {
    // Deterministic word list: attribute table order, bundled stopwords,
    // caption prefix tokens, then dataset tokens in encounter order.
    std::vector<std::string> words;
    std::unordered_map<std::string, bool> seen;
    auto push = [&](const std::string& w) {
        if (seen.emplace(w, true).second) words.push_back(w);
    };
    for (const auto& [w, cls] : attributes) {
        (void)cls;
        push(w);
    }
    for (const auto& w : builtin_stopword_list()) push(w);
    for (const auto& tok : tokenize(std::string(kCaptionPrefix)).tokens) push(tok);
    for (const auto* ds : datasets) {
        if (!ds) continue;
        for (const auto& ex : *ds)
            for (const auto& tok : ex.text.tokens) push(tok);
    }

    VawiModel model;
    model.l_max = config.l_max;
    model.class_count = config.class_count;

    Vocab plm_vocab = Vocab::build(words, /*with_eos=*/false);
    Vocab vl_vocab = Vocab::build(words, /*with_eos=*/true);

    RngStream plm_rng(seed, {0, 0, purpose::init});
    RngStream vl_rng(seed, {0, 1, purpose::init});
    RngStream ref_rng(seed, {0, 2, purpose::init});
    RngStream ext_rng(seed, {0, 3, purpose::init});
    RngStream head_rng(seed, {0, 4, purpose::init});

    EncoderConfig plm_cfg = config.plm;
    plm_cfg.causal = false;
    plm_cfg.vocab_size = plm_vocab.size();
    model.plm = init_plm(plm_cfg, plm_vocab, plm_rng);

    EncoderConfig vl_cfg = config.vl;
    vl_cfg.causal = true;
    vl_cfg.vocab_size = vl_vocab.size();
    model.vl = init_vl_encoder(vl_cfg, vl_vocab, attributes, config.attribute_class_count, vl_rng);

    model.ref = init_reformulation(config.l_max, config.vl.hidden_size, config.plm.hidden_size,
                                   ref_rng);
    model.extractor =
        init_lbs_extractor(config.plm.hidden_size, config.vl.hidden_size, ext_rng);

    std::vector<double> hw(config.plm.hidden_size * config.class_count);
    for (double& x : hw) x = head_rng.gaussian(0.0, 0.02);
    model.head_w = Tensor::from_data(config.plm.hidden_size, config.class_count, std::move(hw), true);
    model.head_b = Tensor::zeros(1, config.class_count, true);
    return model;
}

// ---- forward ----

namespace {

constexpr std::uint64_t kEvalEpoch = 1u << 30; // keeps eval streams clear of training epochs

// Cache for the feature-based strategies, whose selections and frozen aligned
// states are pure functions of the example.
struct SelectionCache {
    std::unordered_map<const LabeledExample*, VHSelection> selections;
    std::unordered_map<const LabeledExample*, AlignedRepr> aligned;
};

VHSelection obtain_selection(VawiModel& model, const LabeledExample& example,
                             const InjectionConfig& cfg, std::uint64_t seed, ExampleKey key,
                             SelectionCache* cache) {
    if (cfg.strategy == Strategy::Lbs) {
        RngStream rng(seed, {key.epoch, key.example, purpose::gumbel});
        return extract_lbs(example.text, model.plm, model.vl, model.extractor, cfg.k,
                           cfg.temperature, rng);
    }
    if (cache) {
        auto it = cache->selections.find(&example);
        if (it != cache->selections.end()) return it->second;
    }
    VHSelection sel = cfg.strategy == Strategy::Sbs
                          ? extract_sbs(example.text)
                          : extract_vabs(example.text, model.vl, cfg.k, cfg.vabs_attn_layer);
    if (cache) cache->selections.emplace(&example, sel);
    return sel;
}

AlignedRepr obtain_aligned(VawiModel& model, const LabeledExample& example,
                           const std::string& x_prime, const InjectionConfig& cfg,
                           SelectionCache* cache) {
    const bool cacheable =
        cache && cfg.strategy != Strategy::Lbs && cfg.vh_fraction == 1.0;
    if (cacheable) {
        auto it = cache->aligned.find(&example);
        if (it != cache->aligned.end()) return it->second;
    }
    AlignedRepr ar = encode_aligned(x_prime, model.vl);
    if (cacheable) {
        // Store values only; the frozen encoder's graph is not worth keeping.
        AlignedRepr stored{detach(ar.h_x), ar.k, ar.vh_token_positions};
        cache->aligned.emplace(&example, stored);
        return stored;
    }
    return ar;
}

Tensor classification_loss(const Tensor& logits, double label, std::size_t class_count) {
    if (label != std::floor(label) || label < 0.0 ||
        static_cast<std::size_t>(label) >= class_count) {
        throw ConfigError("cross-entropy loss needs an integer label below " +
                          std::to_string(class_count) + ", got " + std::to_string(label));
    }
    return scale(pick(log_softmax_rows(logits), 0, static_cast<std::size_t>(label)), -1.0);
}

ForwardResult forward_example(VawiModel& model, const LabeledExample& example,
                              const InjectionConfig& cfg, LossKind loss, std::uint64_t seed,
                              ExampleKey key, bool soft_forward, SelectionCache* cache) {
    const std::size_t m = example.text.size();
    if (m == 0) throw ContractError("task_forward: empty example");

    const bool injection_possible =
        cfg.regime == Regime::PromptTune || cfg.insertion_position != InsertPosition::None;

    std::optional<VHSelection> selection;
    std::optional<VisualAugmentation> augmentation;
    if (injection_possible) {
        VHSelection sel = obtain_selection(model, example, cfg, seed, key, cache);
        if (cfg.vh_fraction < 1.0) {
            RngStream rng(seed, {key.epoch, key.example, purpose::subsample});
            sel = subsample_selection(sel, cfg.vh_fraction, rng);
        }
        if (!sel.empty()) {
            VisualAugmentation va;
            if (cfg.source == AugmentationSource::VlEncoder) {
                const auto x_prime = compose_prefix(sel);
                AlignedRepr ar = obtain_aligned(model, example, *x_prime, cfg, cache);
                va = reformulate(ar, model.ref, sel.size());
            } else {
                RngStream rng(seed, {key.epoch, key.example, purpose::noise});
                va = random_noise_source(sel.size(), model.ref.d_out, rng);
            }
            va.source_positions = sel.indices;
            if (cfg.strategy == Strategy::Lbs && sel.soft_weights.defined()) {
                Tensor w = soft_forward ? sel.soft_weights
                                        : straight_through_ones(sel.soft_weights);
                va = apply_soft_weights(va, w);
            }
            augmentation = std::move(va);
        }
        selection = std::move(sel);
    }

    ForwardResult res;
    res.augmentation = augmentation;
    const std::vector<std::size_t> ids = model.plm.vocab.ids(example.text.tokens);
    Tensor pooled;

    if (cfg.regime == Regime::PromptTune) {
        Tensor x = add(embed_tokens(model.plm, ids), position_rows(model.plm, m));
        const Tensor* prefix = augmentation ? &augmentation->h_v : nullptr;
        res.plm_outputs = run_layers(model.plm, std::move(x), prefix);
        const std::size_t offset = augmentation ? augmentation->l() : 0;
        std::vector<std::size_t> text_rows(m);
        std::iota(text_rows.begin(), text_rows.end(), offset);
        pooled = mean_rows(gather_rows(res.plm_outputs.final_states, text_rows));
        res.index_map = std::move(text_rows);
    } else {
        Tensor tok = embed_tokens(model.plm, ids);
        InsertResult ins =
            augmentation ? inject_embeddings(tok, *augmentation, cfg.insertion_position)
                         : inject_embeddings(tok, VisualAugmentation{}, InsertPosition::None);
        Tensor positions = position_rows(model.plm, ins.rows.rows());
        if (!cfg.add_position_to_inserted && ins.rows.rows() > m) {
            std::vector<double> mask(ins.rows.rows(), 0.0);
            for (std::size_t p : ins.original_positions) mask[p] = 1.0;
            positions = scale_rows(positions, Tensor::row_vector(std::move(mask)));
        }
        res.plm_outputs = run_layers(model.plm, add(ins.rows, positions));
        pooled = mean_rows(gather_rows(res.plm_outputs.final_states, ins.original_positions));
        res.index_map = std::move(ins.index_map);
    }

    res.logits = add_row_broadcast(matmul(pooled, model.head_w), model.head_b);
    if (loss == LossKind::CrossEntropy) {
        if (model.class_count < 2) {
            throw ConfigError("cross-entropy loss needs at least 2 classes");
        }
        res.loss = classification_loss(res.logits, example.label, model.class_count);
        std::size_t best = 0;
        for (std::size_t c = 1; c < res.logits.cols(); ++c) {
            if (res.logits.at(0, c) > res.logits.at(0, best)) best = c;
        }
        res.prediction = static_cast<double>(best);
    } else {
        if (res.logits.cols() != 1) {
            throw ConfigError("mse loss needs a single-output head, got " +
                              std::to_string(res.logits.cols()) + " outputs");
        }
        Tensor diff = sub(res.logits, Tensor::scalar(example.label));
        res.loss = mul(diff, diff);
        res.prediction = res.logits.item();
    }
    res.selection = std::move(selection);
    return res;
}

double env_thread_cap() {
    const char* env = std::getenv("VAWI_THREADS");
    if (!env) return 1;
    const long v = std::strtol(env, nullptr, 10);
    return v < 1 ? 1 : static_cast<double>(v);
}

} // namespace

ForwardResult task_forward(VawiModel& model, const LabeledExample& example,
                           const InjectionConfig& cfg, LossKind loss, std::uint64_t seed,
                           ExampleKey key, bool soft_forward) {
    cfg.validate();
    return forward_example(model, example, cfg, loss, seed, key, soft_forward, nullptr);
}

Metrics evaluate(VawiModel& model, const std::vector<LabeledExample>& dataset,
                 const InjectionConfig& cfg, LossKind loss, std::uint64_t seed) {
    cfg.validate();
    Metrics metrics;
    metrics.is_accuracy = loss == LossKind::CrossEntropy;
    if (dataset.empty()) return metrics;

    const auto n = dataset.size();
    std::vector<double> losses(n, 0.0);
    std::vector<double> hits(n, 0.0);

    const auto threads = static_cast<std::size_t>(
        std::min<double>(env_thread_cap(), static_cast<double>(n)));

    auto worker = [&](std::size_t begin, std::size_t end) {
        SelectionCache local_cache;
        for (std::size_t i = begin; i < end; ++i) {
            ForwardResult fr = forward_example(model, dataset[i], cfg, loss, seed,
                                               {kEvalEpoch, i}, false, &local_cache);
            losses[i] = fr.loss.item();
            if (loss == LossKind::CrossEntropy) {
                hits[i] = fr.prediction == dataset[i].label ? 1.0 : 0.0;
            } else {
                const double d = fr.prediction - dataset[i].label;
                hits[i] = d * d;
            }
        }
    };

    if (threads <= 1) {
        worker(0, n);
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (n + threads - 1) / threads;
        for (std::size_t t = 0; t < threads; ++t) {
            const std::size_t begin = t * chunk;
            const std::size_t end = std::min(n, begin + chunk);
            if (begin < end) pool.emplace_back(worker, begin, end);
        }
        for (auto& th : pool) th.join();
    }

    // Fixed-order reduction keeps the result independent of scheduling.
    double loss_sum = 0.0, hit_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        loss_sum += losses[i];
        hit_sum += hits[i];
    }
    metrics.loss = loss_sum / static_cast<double>(n);
    metrics.metric = hit_sum / static_cast<double>(n);
    return metrics;
}

Metrics train(VawiModel& model, const InjectionConfig& inject_cfg, const TrainConfig& train_cfg,
              const std::vector<LabeledExample>& train_set,
              const std::vector<LabeledExample>* eval_set) {
    inject_cfg.validate();
    train_cfg.validate();
    model.apply_regime(inject_cfg.regime);

    ParameterPartition part = model.partition();
    std::vector<std::vector<double>> init_values;
    init_values.reserve(part.entries.size());
    for (const auto& e : part.entries) {
        init_values.emplace_back(e.tensor.data().begin(), e.tensor.data().end());
    }

    Metrics metrics;
    metrics.is_accuracy = train_cfg.loss == LossKind::CrossEntropy;

    std::vector<Tensor> params = part.trainable_tensors();
    AdamState adam = make_adam_state(params, train_cfg.lr, train_cfg.weight_decay);

    const std::size_t n = train_set.size();
    const std::size_t steps_per_epoch =
        n == 0 ? 0 : (n + train_cfg.batch_size - 1) / train_cfg.batch_size;
    const std::uint64_t total_steps =
        static_cast<std::uint64_t>(train_cfg.epochs) * steps_per_epoch;

    SelectionCache cache;
    std::uint64_t step = 0;
    for (std::size_t epoch = 0; epoch < train_cfg.epochs && n > 0; ++epoch) {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        RngStream shuffle_rng(train_cfg.seed, {epoch, 0, purpose::shuffle});
        for (std::size_t i = n; i > 1; --i) {
            std::swap(order[i - 1], order[shuffle_rng.uniform_below(i)]);
        }

        double epoch_loss = 0.0, epoch_metric = 0.0;
        for (std::size_t start = 0; start < n; start += train_cfg.batch_size) {
            const std::size_t end = std::min(n, start + train_cfg.batch_size);
            ++step;

            Tensor batch_loss;
            for (std::size_t bi = start; bi < end; ++bi) {
                const std::size_t idx = order[bi];
                ForwardResult fr =
                    forward_example(model, train_set[idx], inject_cfg, train_cfg.loss,
                                    train_cfg.seed, {epoch, idx}, false, &cache);
                batch_loss = batch_loss.defined() ? add(batch_loss, fr.loss) : fr.loss;
                epoch_loss += fr.loss.item();
                if (train_cfg.loss == LossKind::CrossEntropy) {
                    epoch_metric += fr.prediction == train_set[idx].label ? 1.0 : 0.0;
                } else {
                    const double d = fr.prediction - train_set[idx].label;
                    epoch_metric += d * d;
                }
            }
            batch_loss = scale(batch_loss, 1.0 / static_cast<double>(end - start));
            if (!std::isfinite(batch_loss.item())) {
                throw NumericError("train: loss is not finite at step " + std::to_string(step));
            }

            for (auto& p : params) p.zero_grad();
            batch_loss.backward();
            adam_step(params, adam,
                      warmup_lr_multiplier(step, total_steps, train_cfg.warmup_fraction));
        }
        metrics.per_epoch.push_back({epoch_loss / static_cast<double>(n),
                                     epoch_metric / static_cast<double>(n)});
    }

    if (eval_set) {
        Metrics eval = evaluate(model, *eval_set, inject_cfg, train_cfg.loss, train_cfg.seed);
        metrics.metric = eval.metric;
        metrics.loss = eval.loss;
    } else if (!metrics.per_epoch.empty()) {
        metrics.metric = metrics.per_epoch.back().metric;
        metrics.loss = metrics.per_epoch.back().loss;
    }

    for (int g = 0; g < 4; ++g) {
        metrics.group_update_norms[group_name(static_cast<Group>(g))] = 0.0;
    }
    for (std::size_t i = 0; i < part.entries.size(); ++i) {
        const auto& e = part.entries[i];
        double sq = 0.0;
        auto cur = e.tensor.data();
        for (std::size_t j = 0; j < cur.size(); ++j) {
            const double d = cur[j] - init_values[i][j];
            sq += d * d;
        }
        metrics.group_update_norms[group_name(e.group)] += sq;
    }
    for (auto& [name, v] : metrics.group_update_norms) {
        (void)name;
        v = std::sqrt(v);
    }
    return metrics;
}

// ---- ablations ----

SweepAxis sweep_axis_from_name(std::string_view name) {
    if (name == "k") return SweepAxis::K;
    if (name == "insertion_position") return SweepAxis::InsertionPosition;
    if (name == "augmentation_source") return SweepAxis::AugmentationSource;
    if (name == "vh_fraction") return SweepAxis::VhFraction;
    throw ConfigError("unknown sweep axis '" + std::string(name) + "'");
}

const char* sweep_axis_name(SweepAxis axis) {
    switch (axis) {
        case SweepAxis::K: return "k";
        case SweepAxis::InsertionPosition: return "insertion_position";
        case SweepAxis::AugmentationSource: return "augmentation_source";
        case SweepAxis::VhFraction: return "vh_fraction";
    }
    return "?";
}

std::vector<SweepRow> ablation_sweep(const ModelConfig& model_cfg,
                                     const InjectionConfig& base_inject,
                                     const TrainConfig& train_cfg, SweepAxis axis,
                                     const std::vector<std::string>& values,
                                     const AttributeTable& attributes,
                                     const std::vector<LabeledExample>& train_set,
                                     const std::vector<LabeledExample>& test_set) {
    std::vector<SweepRow> rows;
    for (const std::string& value : values) {
        InjectionConfig cfg = base_inject;
        try {
            switch (axis) {
                case SweepAxis::K:
                    cfg.k = static_cast<std::size_t>(std::stoull(value));
                    break;
                case SweepAxis::InsertionPosition:
                    cfg.insertion_position = insert_position_from_name(value);
                    break;
                case SweepAxis::AugmentationSource:
                    cfg.source = augmentation_source_from_name(value);
                    break;
                case SweepAxis::VhFraction:
                    cfg.vh_fraction = std::stod(value);
                    break;
            }
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception&) {
            throw ConfigError("sweep: cannot parse value '" + value + "' for axis " +
                              sweep_axis_name(axis));
        }

        VawiModel model = init_model(model_cfg, attributes, {&train_set, &test_set},
                                     train_cfg.seed);
        train(model, cfg, train_cfg, train_set, nullptr);
        Metrics eval = evaluate(model, test_set, cfg, train_cfg.loss, train_cfg.seed);
        rows.push_back({value, eval.metric, eval.loss});
    }
    return rows;
}

} // namespace vawi
