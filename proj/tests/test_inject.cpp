#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vawi/gradcheck.hpp"
#include "vawi/inject.hpp"

using namespace vawi;

namespace {

bool bitwise_equal(const Tensor& a, const Tensor& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a.data()[i] != b.data()[i]) return false;
    return true;
}

ModelConfig tiny_model_config(std::size_t classes = 4) {
    ModelConfig mc;
    mc.plm.hidden_size = 16;
    mc.plm.layer_count = 2;
    mc.plm.head_count = 4;
    mc.plm.max_sequence_length = 32;
    mc.plm.ff_multiplier = 2;
    mc.vl.hidden_size = 16;
    mc.vl.layer_count = 2;
    mc.vl.head_count = 4;
    mc.vl.max_sequence_length = 32;
    mc.vl.causal = true;
    mc.vl.ff_multiplier = 2;
    mc.attribute_class_count = 4;
    mc.l_max = 8;
    mc.class_count = classes;
    return mc;
}

// Small synthetic task shared by the training tests.
struct Fixture {
    SyntheticDataset data;
    VawiModel model;

    explicit Fixture(std::uint64_t seed = 99, std::size_t train_n = 48, std::size_t test_n = 16) {
        SyntheticTaskSpec spec;
        spec.content_word_count = 24;
        spec.train_sentences = train_n;
        spec.test_sentences = test_n;
        spec.words_per_sentence = 6;
        RngStream rng(seed, {0, 0, purpose::data_gen});
        data = generate_synthetic(spec, rng);
        model = init_model(tiny_model_config(), data.attributes, {&data.train, &data.test}, seed);
    }
};

InjectionConfig sbs_config() {
    InjectionConfig cfg;
    cfg.strategy = Strategy::Sbs;
    cfg.insertion_position = InsertPosition::AfterVh;
    return cfg;
}

TrainConfig quick_train(std::size_t epochs, std::uint64_t seed = 7) {
    TrainConfig tc;
    tc.lr = 2e-3;
    tc.epochs = epochs;
    tc.batch_size = 8;
    tc.seed = seed;
    return tc;
}

std::vector<std::vector<double>> snapshot(const ParameterPartition& part) {
    std::vector<std::vector<double>> out;
    for (const auto& e : part.entries) {
        out.emplace_back(e.tensor.data().begin(), e.tensor.data().end());
    }
    return out;
}

} // namespace

TEST_SUITE("inject") {

TEST_CASE("insertion mode none returns the input untouched") {
    Tensor we = Tensor::from_data(3, 4, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12});
    VisualAugmentation va;
    InsertResult res = inject_embeddings(we, va, InsertPosition::None);
    CHECK(res.rows.same_node(we));
    CHECK(res.index_map == std::vector<std::size_t>{0, 1, 2});
}

TEST_CASE("insertion after a single VH word") {
    Tensor we = Tensor::from_data(3, 2, {0, 0, 1, 1, 2, 2});
    VisualAugmentation va;
    va.h_v = Tensor::from_data(1, 2, {9, 9});
    va.source_positions = {1};
    InsertResult res = inject_embeddings(we, va, InsertPosition::AfterVh);
    REQUIRE(res.rows.rows() == 4);
    CHECK(res.rows.at(2, 0) == 9.0); // inserted row lands at new index 2
    CHECK(res.index_map == std::vector<std::size_t>{0, 1, 3});
}

TEST_CASE("insertion preserves original row order (index-map oracle)") {
    Tensor we = Tensor::from_data(4, 2, {0, 10, 1, 11, 2, 12, 3, 13});
    VisualAugmentation va;
    va.h_v = Tensor::from_data(2, 2, {100, 100, 200, 200});
    va.source_positions = {0, 2};

    for (InsertPosition pos :
         {InsertPosition::AfterVh, InsertPosition::BeforeText, InsertPosition::AfterText}) {
        InsertResult res = inject_embeddings(we, va, pos);
        REQUIRE(res.rows.rows() == 6);
        Tensor back = gather_rows(res.rows, res.index_map);
        CHECK(bitwise_equal(back, we));
        CHECK(std::is_sorted(res.index_map.begin(), res.index_map.end()));
    }

    // block modes put the block where the name says
    InsertResult before = inject_embeddings(we, va, InsertPosition::BeforeText);
    CHECK(before.rows.at(0, 0) == 100.0);
    CHECK(before.rows.at(1, 0) == 200.0);
    InsertResult after = inject_embeddings(we, va, InsertPosition::AfterText);
    CHECK(after.rows.at(4, 0) == 100.0);
    CHECK(after.rows.at(5, 0) == 200.0);
}

TEST_CASE("insertion validates source positions") {
    Tensor we = Tensor::from_data(2, 2, {0, 0, 1, 1});
    VisualAugmentation va;
    va.h_v = Tensor::from_data(1, 2, {9, 9});
    va.source_positions = {5};
    CHECK_THROWS_AS(inject_embeddings(we, va, InsertPosition::AfterVh), ContractError);
}

TEST_CASE("prompt mode grows every layer input by l") {
    Fixture fx;
    InjectionConfig cfg = sbs_config();
    cfg.regime = Regime::PromptTune;

    const LabeledExample& ex = fx.data.train[0];
    ForwardResult fr = task_forward(fx.model, ex, cfg, LossKind::CrossEntropy, 7, {0, 0});
    REQUIRE(fr.selection.has_value());
    const std::size_t l = fr.augmentation ? fr.augmentation->l() : 0;
    REQUIRE(l > 0);
    for (const Tensor& h : fr.plm_outputs.hidden_states) {
        CHECK(h.rows() == ex.text.size() + l);
    }
    // pooling covers exactly the original tokens
    CHECK(fr.index_map.size() == ex.text.size());
}

TEST_CASE("prompt mode with empty selection equals the plain forward") {
    Fixture fx;
    InjectionConfig cfg = sbs_config();
    cfg.regime = Regime::PromptTune;

    LabeledExample stopword_only;
    stopword_only.text =
        annotate(tokenize("he is a the of"), builtin_lexicon(), builtin_stopwords());
    stopword_only.label = 0.0;

    ForwardResult fr =
        task_forward(fx.model, stopword_only, cfg, LossKind::CrossEntropy, 7, {0, 0});
    REQUIRE(fr.selection.has_value());
    CHECK(fr.selection->empty());
    for (const Tensor& h : fr.plm_outputs.hidden_states) {
        CHECK(h.rows() == stopword_only.text.size());
    }

    // and matches a hand-built unaugmented forward bit for bit
    std::vector<std::size_t> ids = fx.model.plm.vocab.ids(stopword_only.text.tokens);
    Tensor x = add(embed_tokens(fx.model.plm, ids), position_rows(fx.model.plm, ids.size()));
    EncoderOutputs plain = run_layers(fx.model.plm, std::move(x));
    Tensor pooled = mean_rows(plain.final_states);
    Tensor logits = add_row_broadcast(matmul(pooled, fx.model.head_w), fx.model.head_b);
    CHECK(bitwise_equal(fr.logits, logits));
}

TEST_CASE("uniform logits give log(C) cross entropy, exact regression gives zero") {
    Fixture fx;
    auto& hw = fx.model.head_w.mutable_data();
    std::fill(hw.begin(), hw.end(), 0.0);

    InjectionConfig cfg = sbs_config();
    ForwardResult fr =
        task_forward(fx.model, fx.data.train[0], cfg, LossKind::CrossEntropy, 7, {0, 0});
    CHECK(fr.loss.item() == doctest::Approx(std::log(4.0)).epsilon(1e-12));

    // single-output head, label 0, zero weights: exact prediction
    VawiModel reg_model = init_model(tiny_model_config(1), fx.data.attributes,
                                     {&fx.data.train, &fx.data.test}, 99);
    std::fill(reg_model.head_w.mutable_data().begin(), reg_model.head_w.mutable_data().end(),
              0.0);
    LabeledExample ex = fx.data.train[0];
    ex.label = 0.0;
    ForwardResult rr = task_forward(reg_model, ex, cfg, LossKind::Mse, 7, {0, 0});
    CHECK(rr.loss.item() == 0.0);
    CHECK(rr.prediction == 0.0);
}

TEST_CASE("label and loss kind must agree") {
    Fixture fx;
    InjectionConfig cfg = sbs_config();
    LabeledExample ex = fx.data.train[0];
    ex.label = 7.0; // beyond the 4 classes
    CHECK_THROWS_AS(task_forward(fx.model, ex, cfg, LossKind::CrossEntropy, 7, {0, 0}),
                    ConfigError);
    ex.label = 0.5; // fractional
    CHECK_THROWS_AS(task_forward(fx.model, ex, cfg, LossKind::CrossEntropy, 7, {0, 0}),
                    ConfigError);
}

TEST_CASE("evaluate mean loss equals the per-example oracle") {
    Fixture fx;
    InjectionConfig cfg = sbs_config();
    Metrics m = evaluate(fx.model, fx.data.test, cfg, LossKind::CrossEntropy, 7);

    double oracle = 0.0;
    for (std::size_t i = 0; i < fx.data.test.size(); ++i) {
        ForwardResult fr = task_forward(fx.model, fx.data.test[i], cfg, LossKind::CrossEntropy,
                                        7, {1u << 30, i});
        oracle += fr.loss.item();
    }
    oracle /= static_cast<double>(fx.data.test.size());
    CHECK(std::fabs(m.loss - oracle) < 1e-12);
}

TEST_CASE("evaluate is deterministic and mutation-free") {
    Fixture fx;
    InjectionConfig cfg = sbs_config();
    auto before = snapshot(fx.model.partition());
    Metrics a = evaluate(fx.model, fx.data.test, cfg, LossKind::CrossEntropy, 7);
    Metrics b = evaluate(fx.model, fx.data.test, cfg, LossKind::CrossEntropy, 7);
    CHECK(a.metric == b.metric);
    CHECK(a.loss == b.loss);
    auto after = snapshot(fx.model.partition());
    CHECK(before == after);
}

TEST_CASE("zero epochs leave the model bit-identical to initialization") {
    Fixture fx;
    auto before = snapshot(fx.model.partition());
    Metrics m = train(fx.model, sbs_config(), quick_train(0), fx.data.train, nullptr);
    auto after = snapshot(fx.model.partition());
    CHECK(before == after);
    CHECK(m.per_epoch.empty());
}

TEST_CASE("full finetune trains the backbone but never the frozen encoder") {
    Fixture fx;
    ParameterPartition part = fx.model.partition();
    auto before = snapshot(part);
    train(fx.model, sbs_config(), quick_train(2), fx.data.train, nullptr);
    auto after = snapshot(part);

    bool plm_changed = false, vlp_changed = false, ref_changed = false, head_changed = false;
    for (std::size_t i = 0; i < part.entries.size(); ++i) {
        const bool changed = before[i] != after[i];
        switch (part.entries[i].group) {
            case Group::Plm: plm_changed |= changed; break;
            case Group::Vlp: vlp_changed |= changed; break;
            case Group::Ref: ref_changed |= changed; break;
            case Group::Head: head_changed |= changed; break;
        }
    }
    CHECK(plm_changed);
    CHECK(!vlp_changed);
    CHECK(ref_changed);
    CHECK(head_changed);
}

TEST_CASE("prompt tuning freezes the backbone bit-exactly") {
    Fixture fx;
    InjectionConfig cfg = sbs_config();
    cfg.regime = Regime::PromptTune;
    ParameterPartition part = fx.model.partition();
    auto before = snapshot(part);
    train(fx.model, cfg, quick_train(2), fx.data.train, nullptr);
    auto after = snapshot(part);

    bool ref_changed = false;
    for (std::size_t i = 0; i < part.entries.size(); ++i) {
        switch (part.entries[i].group) {
            case Group::Plm:
            case Group::Vlp:
                CHECK(before[i] == after[i]);
                break;
            case Group::Ref:
                ref_changed |= before[i] != after[i];
                break;
            case Group::Head:
                break;
        }
    }
    CHECK(ref_changed);

    // gradients on the frozen backbone are exactly absent
    ForwardResult fr =
        task_forward(fx.model, fx.data.train[0], cfg, LossKind::CrossEntropy, 7, {0, 0});
    fr.loss.backward();
    for (const auto& nt : fx.model.plm.tensors) CHECK(nt.tensor.grad().empty());
    for (const auto& nt : fx.model.vl.tensors) CHECK(nt.tensor.grad().empty());
}

TEST_CASE("training trajectories are bit-reproducible") {
    Fixture a(1234), b(1234);
    Metrics ma = train(a.model, sbs_config(), quick_train(2, 55), a.data.train, &a.data.test);
    Metrics mb = train(b.model, sbs_config(), quick_train(2, 55), b.data.train, &b.data.test);
    REQUIRE(ma.per_epoch.size() == mb.per_epoch.size());
    for (std::size_t e = 0; e < ma.per_epoch.size(); ++e) {
        CHECK(ma.per_epoch[e].loss == mb.per_epoch[e].loss);
        CHECK(ma.per_epoch[e].metric == mb.per_epoch[e].metric);
    }
    CHECK(ma.metric == mb.metric);

    auto pa = snapshot(a.model.partition());
    auto pb = snapshot(b.model.partition());
    CHECK(pa == pb);
}

TEST_CASE("insertion position none reproduces the unaugmented loss trajectory") {
    Fixture a(321), b(321);
    InjectionConfig none_cfg = sbs_config();
    none_cfg.insertion_position = InsertPosition::None;

    Metrics ma = train(a.model, none_cfg, quick_train(2, 9), a.data.train, nullptr);

    // Hand-rolled training loop with no augmentation modules at all, same
    // schedule and streams: the trajectories must agree bit for bit.
    b.model.apply_regime(Regime::FullFinetune);
    ParameterPartition part = b.model.partition();
    std::vector<Tensor> params = part.trainable_tensors();
    TrainConfig tc = quick_train(2, 9);
    AdamState adam = make_adam_state(params, tc.lr, tc.weight_decay);
    const std::size_t n = b.data.train.size();
    const std::size_t steps_per_epoch = (n + tc.batch_size - 1) / tc.batch_size;
    const std::uint64_t total_steps = tc.epochs * steps_per_epoch;
    std::uint64_t step = 0;
    std::vector<double> epoch_losses;
    for (std::size_t epoch = 0; epoch < tc.epochs; ++epoch) {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        RngStream shuffle_rng(tc.seed, {epoch, 0, purpose::shuffle});
        for (std::size_t i = n; i > 1; --i) {
            std::swap(order[i - 1], order[shuffle_rng.uniform_below(i)]);
        }
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n; start += tc.batch_size) {
            const std::size_t end = std::min(n, start + tc.batch_size);
            ++step;
            Tensor batch_loss;
            for (std::size_t bi = start; bi < end; ++bi) {
                const LabeledExample& ex = b.data.train[order[bi]];
                std::vector<std::size_t> ids = b.model.plm.vocab.ids(ex.text.tokens);
                Tensor x = add(embed_tokens(b.model.plm, ids),
                               position_rows(b.model.plm, ids.size()));
                EncoderOutputs out = run_layers(b.model.plm, std::move(x));
                Tensor pooled = mean_rows(out.final_states);
                Tensor logits =
                    add_row_broadcast(matmul(pooled, b.model.head_w), b.model.head_b);
                Tensor loss = scale(
                    pick(log_softmax_rows(logits), 0, static_cast<std::size_t>(ex.label)),
                    -1.0);
                batch_loss = batch_loss.defined() ? add(batch_loss, loss) : loss;
                epoch_loss += loss.item();
            }
            batch_loss = scale(batch_loss, 1.0 / static_cast<double>(end - start));
            for (auto& p : params) p.zero_grad();
            batch_loss.backward();
            adam_step(params, adam,
                      warmup_lr_multiplier(step, total_steps, tc.warmup_fraction));
        }
        epoch_losses.push_back(epoch_loss / static_cast<double>(n));
    }

    REQUIRE(ma.per_epoch.size() == epoch_losses.size());
    for (std::size_t e = 0; e < epoch_losses.size(); ++e) {
        CHECK(ma.per_epoch[e].loss == epoch_losses[e]);
    }
    auto pa = snapshot(a.model.partition());
    auto pb = snapshot(b.model.partition());
    CHECK(pa == pb);
}

TEST_CASE("end-to-end learned-strategy pipeline passes the gradient check") {
    Fixture fx;
    InjectionConfig cfg;
    cfg.strategy = Strategy::Lbs;
    cfg.k = 2;
    cfg.temperature = 1.0;
    cfg.insertion_position = InsertPosition::AfterVh;
    fx.model.apply_regime(Regime::FullFinetune);

    const LabeledExample& ex = fx.data.train[1];
    auto f = [&]() {
        return task_forward(fx.model, ex, cfg, LossKind::CrossEntropy, 7, {0, 1},
                            /*soft_forward=*/true)
            .loss;
    };
    // sampled coordinates keep this fast; every parameter group is covered
    auto params = fx.model.partition().named_trainable();
    auto report = finite_diff_check(f, params, 1e-5, 6);
    CHECK(report.max_rel_err < 1e-4);
}

TEST_CASE("ablation sweep produces one row per value and rejects bad axes") {
    Fixture fx(77, 24, 8);
    TrainConfig tc = quick_train(1);
    auto rows = ablation_sweep(tiny_model_config(), sbs_config(), tc, SweepAxis::VhFraction,
                               {"0", "0.5", "1"}, fx.data.attributes, fx.data.train,
                               fx.data.test);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].value == "0");
    CHECK(rows[2].value == "1");

    CHECK_THROWS_AS(sweep_axis_from_name("banana"), ConfigError);
    CHECK_THROWS_AS(ablation_sweep(tiny_model_config(), sbs_config(), tc, SweepAxis::K,
                                   {"not_a_number"}, fx.data.attributes, fx.data.train,
                                   fx.data.test),
                    ConfigError);
}

TEST_CASE("subsampled fraction of zero reduces to the baseline forward") {
    Fixture fx;
    InjectionConfig cfg = sbs_config();
    cfg.vh_fraction = 0.0;
    ForwardResult fr =
        task_forward(fx.model, fx.data.train[0], cfg, LossKind::CrossEntropy, 7, {0, 0});
    REQUIRE(fr.selection.has_value());
    CHECK(fr.selection->empty());
    CHECK(!fr.augmentation.has_value());
    CHECK(fr.plm_outputs.hidden_states.back().rows() == fx.data.train[0].text.size());
}

} // TEST_SUITE
