#include "vawi/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace vawi {

using nlohmann::json;

RunConfig RunConfig::defaults() {
    RunConfig c;
    c.plm.hidden_size = 64;
    c.plm.layer_count = 2;
    c.plm.head_count = 4;
    c.plm.max_sequence_length = 64;
    c.plm.ff_multiplier = 4;
    c.plm.causal = false;

    c.vl.hidden_size = 32;
    c.vl.layer_count = 2;
    c.vl.head_count = 4;
    c.vl.max_sequence_length = 64;
    c.vl.ff_multiplier = 2;
    c.vl.causal = true;
    return c;
}

ModelConfig RunConfig::model_config() const {
    ModelConfig mc;
    mc.plm = plm;
    mc.vl = vl;
    mc.attribute_class_count = task.attribute_class_count;
    mc.l_max = l_max;
    mc.class_count = training.loss == LossKind::Mse ? 1 : task.attribute_class_count;
    return mc;
}

void RunConfig::validate() const {
    injection.validate();
    training.validate();
    task.validate();
    if (l_max == 0) throw ConfigError("l_max must be at least 1");
    if (plm.hidden_size % plm.head_count != 0 || vl.hidden_size % vl.head_count != 0) {
        throw ConfigError("hidden_size must be divisible by head_count");
    }
}

namespace {

json encoder_to_json(const EncoderConfig& e) {
    return json{{"hidden_size", e.hidden_size},
                {"layer_count", e.layer_count},
                {"head_count", e.head_count},
                {"max_sequence_length", e.max_sequence_length},
                {"ff_multiplier", e.ff_multiplier}};
}

void encoder_from_json(const json& j, EncoderConfig& e) {
    if (j.contains("hidden_size")) e.hidden_size = j.at("hidden_size").get<std::size_t>();
    if (j.contains("layer_count")) e.layer_count = j.at("layer_count").get<std::size_t>();
    if (j.contains("head_count")) e.head_count = j.at("head_count").get<std::size_t>();
    if (j.contains("max_sequence_length"))
        e.max_sequence_length = j.at("max_sequence_length").get<std::size_t>();
    if (j.contains("ff_multiplier")) e.ff_multiplier = j.at("ff_multiplier").get<std::size_t>();
}

template <typename Fn>
void maybe(const json& j, const char* key, Fn&& fn) {
    if (j.contains(key)) fn(j.at(key));
}

} // namespace

RunConfig run_config_from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    RunConfig c = RunConfig::defaults();
    try {
        maybe(j, "plm", [&](const json& v) { encoder_from_json(v, c.plm); });
        maybe(j, "vl", [&](const json& v) { encoder_from_json(v, c.vl); });
        maybe(j, "l_max", [&](const json& v) { c.l_max = v.get<std::size_t>(); });
        maybe(j, "injection", [&](const json& v) {
            maybe(v, "regime",
                  [&](const json& x) { c.injection.regime = regime_from_name(x.get<std::string>()); });
            maybe(v, "position", [&](const json& x) {
                c.injection.insertion_position = insert_position_from_name(x.get<std::string>());
            });
            maybe(v, "strategy", [&](const json& x) {
                c.injection.strategy = strategy_from_name(x.get<std::string>());
            });
            maybe(v, "k", [&](const json& x) { c.injection.k = x.get<std::size_t>(); });
            maybe(v, "temperature",
                  [&](const json& x) { c.injection.temperature = x.get<double>(); });
            maybe(v, "source", [&](const json& x) {
                c.injection.source = augmentation_source_from_name(x.get<std::string>());
            });
            maybe(v, "vh_fraction",
                  [&](const json& x) { c.injection.vh_fraction = x.get<double>(); });
            maybe(v, "attn_layer",
                  [&](const json& x) { c.injection.vabs_attn_layer = x.get<int>(); });
            maybe(v, "add_position_to_inserted",
                  [&](const json& x) { c.injection.add_position_to_inserted = x.get<bool>(); });
        });
        maybe(j, "train", [&](const json& v) {
            maybe(v, "lr", [&](const json& x) { c.training.lr = x.get<double>(); });
            maybe(v, "weight_decay",
                  [&](const json& x) { c.training.weight_decay = x.get<double>(); });
            maybe(v, "warmup_fraction",
                  [&](const json& x) { c.training.warmup_fraction = x.get<double>(); });
            maybe(v, "epochs", [&](const json& x) { c.training.epochs = x.get<std::size_t>(); });
            maybe(v, "batch_size",
                  [&](const json& x) { c.training.batch_size = x.get<std::size_t>(); });
            maybe(v, "seed", [&](const json& x) { c.training.seed = x.get<std::uint64_t>(); });
            maybe(v, "loss",
                  [&](const json& x) { c.training.loss = loss_kind_from_name(x.get<std::string>()); });
        });
        maybe(j, "task", [&](const json& v) {
            maybe(v, "vocab_size",
                  [&](const json& x) { c.task.vocab_size = x.get<std::size_t>(); });
            maybe(v, "content_word_count",
                  [&](const json& x) { c.task.content_word_count = x.get<std::size_t>(); });
            maybe(v, "attribute_class_count",
                  [&](const json& x) { c.task.attribute_class_count = x.get<std::size_t>(); });
            maybe(v, "words_per_sentence",
                  [&](const json& x) { c.task.words_per_sentence = x.get<std::size_t>(); });
            maybe(v, "train_split_fraction",
                  [&](const json& x) { c.task.train_split_fraction = x.get<double>(); });
            maybe(v, "label_rule", [&](const json& x) {
                c.task.label_rule = label_rule_from_name(x.get<std::string>());
            });
            maybe(v, "train_sentences",
                  [&](const json& x) { c.task.train_sentences = x.get<std::size_t>(); });
            maybe(v, "test_sentences",
                  [&](const json& x) { c.task.test_sentences = x.get<std::size_t>(); });
        });
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return c;
}

RunConfig run_config_from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return run_config_from_json_text(buf.str());
}

std::string run_config_to_json_text(const RunConfig& c) {
    json j;
    j["plm"] = encoder_to_json(c.plm);
    j["vl"] = encoder_to_json(c.vl);
    j["l_max"] = c.l_max;
    j["injection"] = json{{"regime", regime_name(c.injection.regime)},
                          {"position", insert_position_name(c.injection.insertion_position)},
                          {"strategy", strategy_name(c.injection.strategy)},
                          {"k", c.injection.k},
                          {"temperature", c.injection.temperature},
                          {"source", augmentation_source_name(c.injection.source)},
                          {"vh_fraction", c.injection.vh_fraction},
                          {"attn_layer", c.injection.vabs_attn_layer},
                          {"add_position_to_inserted", c.injection.add_position_to_inserted}};
    j["train"] = json{{"lr", c.training.lr},
                      {"weight_decay", c.training.weight_decay},
                      {"warmup_fraction", c.training.warmup_fraction},
                      {"epochs", c.training.epochs},
                      {"batch_size", c.training.batch_size},
                      {"seed", c.training.seed},
                      {"loss", loss_kind_name(c.training.loss)}};
    j["task"] = json{{"vocab_size", c.task.vocab_size},
                     {"content_word_count", c.task.content_word_count},
                     {"attribute_class_count", c.task.attribute_class_count},
                     {"words_per_sentence", c.task.words_per_sentence},
                     {"train_split_fraction", c.task.train_split_fraction},
                     {"label_rule", label_rule_name(c.task.label_rule)},
                     {"train_sentences", c.task.train_sentences},
                     {"test_sentences", c.task.test_sentences}};
    // nlohmann::json keeps object keys sorted, so this dump is canonical.
    return j.dump(2);
}

std::string config_hash(const RunConfig& config) {
    const std::string canonical = run_config_to_json_text(config);
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : canonical) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string metrics_to_json_text(const Metrics& metrics, const std::string& hash) {
    json j;
    j["config_hash"] = hash;
    j["final"] = json{{"metric", metrics.metric},
                      {"loss", metrics.loss},
                      {"kind", metrics.is_accuracy ? "accuracy" : "mse"}};
    json epochs = json::array();
    for (const auto& e : metrics.per_epoch) {
        epochs.push_back(json{{"loss", e.loss}, {"metric", e.metric}});
    }
    j["per_epoch"] = epochs;
    j["group_update_norms"] = metrics.group_update_norms;
    return j.dump(2) + "\n";
}

} // namespace vawi
