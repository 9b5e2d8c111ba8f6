// Command-line front end: dataset generation, VH-word extraction, training,
// evaluation, ablation sweeps, gradient checking and attention dumps.
// One JSON config file plus flag overrides (flags win); every command is
// deterministic given --seed and records the config hash in its artifacts.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "vawi/checkpoint.hpp"
#include "vawi/config.hpp"
#include "vawi/gradcheck.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace vawi;

namespace {

struct CommonOpts {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> strategy;
    std::optional<std::size_t> k;
    std::optional<double> temperature;
    std::optional<std::string> regime;
    std::optional<std::string> position;
    std::optional<std::string> source;
    std::optional<double> fraction;
    std::optional<int> attn_layer;
};

void add_common_flags(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "JSON config file");
    cmd->add_option("--seed", opts.seed, "random seed (overrides config)");
    cmd->add_option("--strategy", opts.strategy, "sbs|vabs|lbs");
    cmd->add_option("--k", opts.k, "VH-word count for vabs/lbs");
    cmd->add_option("--temperature", opts.temperature, "gumbel temperature for lbs");
    cmd->add_option("--regime", opts.regime, "full_finetune|prompt_tune");
    cmd->add_option("--position", opts.position, "after_vh|before_text|after_text|none");
    cmd->add_option("--source", opts.source, "vl_encoder|random_noise");
    cmd->add_option("--fraction", opts.fraction, "VH-word subsampling fraction in [0,1]");
    cmd->add_option("--attn-layer", opts.attn_layer,
                    "restrict vabs scores to one layer (-1 = average all)");
}

RunConfig resolve_config(const CommonOpts& opts) {
    RunConfig cfg = opts.config_path.empty() ? RunConfig::defaults()
                                             : run_config_from_file(opts.config_path);
    if (opts.seed) cfg.training.seed = *opts.seed;
    if (opts.strategy) cfg.injection.strategy = strategy_from_name(*opts.strategy);
    if (opts.k) cfg.injection.k = *opts.k;
    if (opts.temperature) cfg.injection.temperature = *opts.temperature;
    if (opts.regime) cfg.injection.regime = regime_from_name(*opts.regime);
    if (opts.position) cfg.injection.insertion_position = insert_position_from_name(*opts.position);
    if (opts.source) cfg.injection.source = augmentation_source_from_name(*opts.source);
    if (opts.fraction) cfg.injection.vh_fraction = *opts.fraction;
    if (opts.attn_layer) cfg.injection.vabs_attn_layer = *opts.attn_layer;
    cfg.validate();
    return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << text;
}

struct LoadedData {
    std::vector<LabeledExample> train;
    std::vector<LabeledExample> test;
    AttributeTable attributes;
};

LoadedData load_data_dir(const std::string& dir) {
    LoadedData d;
    d.train = load_jsonl((fs::path(dir) / "train.jsonl").string());
    d.test = load_jsonl((fs::path(dir) / "test.jsonl").string());
    d.attributes = load_attribute_table((fs::path(dir) / "attributes.tsv").string());
    return d;
}

VawiModel build_model(const RunConfig& cfg, const LoadedData& data) {
    return init_model(cfg.model_config(), data.attributes, {&data.train, &data.test},
                      cfg.training.seed);
}

json attention_to_json(const EncoderOutputs& out) {
    json layers = json::array();
    for (const auto& layer : out.attention_maps) {
        json heads = json::array();
        for (const Tensor& head : layer) {
            json rows = json::array();
            for (std::size_t i = 0; i < head.rows(); ++i) {
                json row = json::array();
                for (std::size_t j = 0; j < head.cols(); ++j) row.push_back(head.at(i, j));
                rows.push_back(row);
            }
            heads.push_back(rows);
        }
        layers.push_back(heads);
    }
    return layers;
}

json matrix_to_json(const Tensor& t) {
    json rows = json::array();
    for (std::size_t i = 0; i < t.rows(); ++i) {
        json row = json::array();
        for (std::size_t j = 0; j < t.cols(); ++j) row.push_back(t.at(i, j));
        rows.push_back(row);
    }
    return rows;
}

// ---- subcommands ----

int cmd_gen(const CommonOpts& opts, const std::string& out_dir, bool force) {
    RunConfig cfg = resolve_config(opts);
    fs::create_directories(out_dir);
    const fs::path train_path = fs::path(out_dir) / "train.jsonl";
    const fs::path test_path = fs::path(out_dir) / "test.jsonl";
    const fs::path attr_path = fs::path(out_dir) / "attributes.tsv";
    for (const auto& p : {train_path, test_path, attr_path}) {
        if (fs::exists(p) && !force) {
            throw ConfigError("refusing to overwrite '" + p.string() + "' without --force");
        }
    }

    RngStream rng(cfg.training.seed, {0, 0, purpose::data_gen});
    SyntheticDataset data = generate_synthetic(cfg.task, rng);
    save_jsonl(data.train, train_path.string());
    save_jsonl(data.test, test_path.string());
    save_attribute_table(data.attributes, attr_path.string());
    write_text(fs::path(out_dir) / "gen_meta.json",
               json{{"config_hash", config_hash(cfg)},
                    {"train_sentences", data.train.size()},
                    {"test_sentences", data.test.size()}}
                   .dump(2) +
                   "\n");
    std::cout << "wrote " << data.train.size() << " train / " << data.test.size()
              << " test sentences to " << out_dir << " (config " << config_hash(cfg) << ")\n";
    return 0;
}

int cmd_extract(const CommonOpts& opts, const std::string& input, const std::string& output,
                const std::string& attributes_path) {
    RunConfig cfg = resolve_config(opts);

    std::ifstream in(input);
    if (!in) throw ParseError("cannot open input '" + input + "'");
    std::vector<TokenizedText> sentences;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::string raw = line;
        if (line.front() == '{') {
            try {
                json j = json::parse(line);
                if (j.contains("text")) raw = j["text"].get<std::string>();
            } catch (const json::exception& e) {
                throw ParseError(input + " line " + std::to_string(line_no) + ": " + e.what());
            }
        }
        sentences.push_back(annotate(tokenize(raw), builtin_lexicon(), builtin_stopwords()));
    }

    AttributeTable attributes;
    if (!attributes_path.empty()) attributes = load_attribute_table(attributes_path);

    // Word list for the encoders: everything in the inputs plus specials.
    std::vector<LabeledExample> wrapped;
    wrapped.reserve(sentences.size());
    for (auto& s : sentences) {
        LabeledExample ex;
        ex.text = s;
        wrapped.push_back(std::move(ex));
    }
    VawiModel model =
        init_model(cfg.model_config(), attributes, {&wrapped}, cfg.training.seed);

    std::ostringstream out_text;
    for (std::size_t i = 0; i < wrapped.size(); ++i) {
        VHSelection sel;
        switch (cfg.injection.strategy) {
            case Strategy::Sbs:
                sel = extract_sbs(wrapped[i].text);
                break;
            case Strategy::Vabs:
                sel = extract_vabs(wrapped[i].text, model.vl, cfg.injection.k,
                                   cfg.injection.vabs_attn_layer);
                break;
            case Strategy::Lbs: {
                RngStream rng(cfg.training.seed, {0, i, purpose::gumbel});
                sel = extract_lbs(wrapped[i].text, model.plm, model.vl, model.extractor,
                                  cfg.injection.k, cfg.injection.temperature, rng);
                break;
            }
        }
        out_text << selection_to_json(sel) << '\n';
    }
    if (output.empty() || output == "-") {
        std::cout << out_text.str();
    } else {
        write_text(output, out_text.str());
    }
    return 0;
}

int cmd_train(const CommonOpts& opts, const std::string& data_dir, const std::string& out_dir) {
    RunConfig cfg = resolve_config(opts);
    LoadedData data = load_data_dir(data_dir);
    VawiModel model = build_model(cfg, data);

    Metrics metrics = train(model, cfg.injection, cfg.training, data.train, &data.test);

    fs::create_directories(out_dir);
    save_checkpoint(model.partition(), (fs::path(out_dir) / "checkpoint.bin").string());
    write_text(fs::path(out_dir) / "metrics.json",
               metrics_to_json_text(metrics, config_hash(cfg)));
    write_text(fs::path(out_dir) / "config.json", run_config_to_json_text(cfg) + "\n");
    std::cout << "final " << (metrics.is_accuracy ? "accuracy" : "mse") << " " << metrics.metric
              << " loss " << metrics.loss << " (config " << config_hash(cfg) << ")\n";
    return 0;
}

int cmd_eval(const CommonOpts& opts, const std::string& data_dir,
             const std::string& checkpoint_path, const std::string& out_file) {
    RunConfig cfg = resolve_config(opts);
    LoadedData data = load_data_dir(data_dir);
    VawiModel model = build_model(cfg, data);
    if (!checkpoint_path.empty()) {
        ParameterPartition target = model.partition();
        apply_checkpoint(target, load_checkpoint(checkpoint_path));
    }

    Metrics metrics =
        evaluate(model, data.test, cfg.injection, cfg.training.loss, cfg.training.seed);
    const std::string text = metrics_to_json_text(metrics, config_hash(cfg));
    if (!out_file.empty()) write_text(out_file, text);
    std::cout << (metrics.is_accuracy ? "accuracy " : "mse ") << metrics.metric << " loss "
              << metrics.loss << "\n";
    return 0;
}

int cmd_sweep(const CommonOpts& opts, const std::string& data_dir, const std::string& axis,
              const std::string& values_csv, const std::string& out_file) {
    RunConfig cfg = resolve_config(opts);
    LoadedData data = load_data_dir(data_dir);

    std::vector<std::string> values;
    std::stringstream ss(values_csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) values.push_back(item);
    }
    if (values.empty()) throw ConfigError("sweep: --values is empty");

    auto rows = ablation_sweep(cfg.model_config(), cfg.injection, cfg.training,
                               sweep_axis_from_name(axis), values, data.attributes, data.train,
                               data.test);

    std::ostringstream table;
    table << "# axis=" << axis << " config=" << config_hash(cfg) << "\n";
    table << "value\tmetric\tloss\n";
    for (const auto& row : rows) {
        table << row.value << '\t' << row.metric << '\t' << row.loss << '\n';
    }
    if (out_file.empty() || out_file == "-") {
        std::cout << table.str();
    } else {
        write_text(out_file, table.str());
        std::cout << "wrote " << rows.size() << " rows to " << out_file << "\n";
    }
    return 0;
}

int cmd_gradcheck(const CommonOpts& opts) {
    RunConfig cfg = resolve_config(opts);
    const double tol = 1e-4;
    bool ok = true;
    auto report_line = [&](const char* name, const GradCheckReport& r) {
        const bool pass = r.max_rel_err < tol;
        ok = ok && pass;
        std::cout << name << ": max_rel_err=" << r.max_rel_err << " over " << r.coords_checked
                  << " coords (worst " << r.worst_param << "[" << r.worst_index << "]) "
                  << (pass ? "< 1e-4" : ">= 1e-4 FAIL") << "\n";
    };

    // (a) reformulation layer alone, exhaustive at small dimensions
    {
        RngStream rng(cfg.training.seed, {0, 10, purpose::init});
        ReformulationParams ref = init_reformulation(4, 6, 8, rng);
        RngStream data_rng(cfg.training.seed, {0, 11, purpose::noise});
        Tensor h_x = gaussian_sample(5, 6, data_rng, 0.0, 0.5);
        auto f = [&]() {
            AlignedRepr ar;
            ar.h_x = h_x;
            ar.k = 5;
            VisualAugmentation va = reformulate(ar, ref, 3);
            RngStream local(cfg.training.seed, {0, 12, purpose::noise});
            return sum_all(mul(va.h_v, gaussian_sample(3, 8, local, 0.0, 1.0)));
        };
        report_line("reformulation_layer", finite_diff_check(f, ref.named(), 1e-5));
    }

    // Shared toy task for the pipeline checks.
    SyntheticTaskSpec task = cfg.task;
    task.train_sentences = 8;
    task.test_sentences = 4;
    RngStream gen_rng(cfg.training.seed, {0, 0, purpose::data_gen});
    SyntheticDataset data = generate_synthetic(task, gen_rng);

    // (b) learned-extractor path: soft forward, loss depends on the scores
    {
        ModelConfig small = cfg.model_config();
        small.plm.hidden_size = 16;
        small.plm.ff_multiplier = 2;
        small.vl.hidden_size = 16;
        small.vl.ff_multiplier = 2;
        VawiModel model = init_model(small, data.attributes, {&data.train}, cfg.training.seed);
        model.apply_regime(Regime::FullFinetune);
        InjectionConfig inj = cfg.injection;
        inj.strategy = Strategy::Lbs;
        inj.k = 2;
        inj.temperature = 1.0;
        inj.insertion_position = InsertPosition::AfterVh;
        const LabeledExample& ex = data.train[0];
        auto f = [&]() {
            return task_forward(model, ex, inj, cfg.training.loss, cfg.training.seed, {0, 0},
                                /*soft_forward=*/true)
                .loss;
        };
        report_line("lbs_extractor_path",
                    finite_diff_check(f, model.extractor.named(), 1e-5));
    }

    // (c) full one-example pipeline at the configured dimensions, sampled
    {
        VawiModel model =
            init_model(cfg.model_config(), data.attributes, {&data.train}, cfg.training.seed);
        model.apply_regime(Regime::FullFinetune);
        InjectionConfig inj = cfg.injection;
        inj.strategy = Strategy::Lbs;
        inj.temperature = 1.0;
        inj.insertion_position = InsertPosition::AfterVh;
        const LabeledExample& ex = data.train[1];
        auto f = [&]() {
            return task_forward(model, ex, inj, cfg.training.loss, cfg.training.seed, {0, 1},
                                /*soft_forward=*/true)
                .loss;
        };
        report_line("full_pipeline",
                    finite_diff_check(f, model.partition().named_trainable(), 1e-5, 12));
    }

    if (!ok) throw NumericError("gradient check failed");
    return 0;
}

int cmd_dump_attn(const CommonOpts& opts, const std::string& text,
                  const std::string& attributes_path, const std::string& out_file) {
    RunConfig cfg = resolve_config(opts);
    AttributeTable attributes;
    if (!attributes_path.empty()) attributes = load_attribute_table(attributes_path);

    LabeledExample ex;
    ex.text = annotate(tokenize(text), builtin_lexicon(), builtin_stopwords());
    ex.label = 0.0;
    if (ex.text.size() == 0) throw ConfigError("dump-attn: --text is empty");
    std::vector<LabeledExample> wrapped{ex};
    VawiModel model =
        init_model(cfg.model_config(), attributes, {&wrapped}, cfg.training.seed);

    json out;
    out["config_hash"] = config_hash(cfg);
    out["text"] = text;

    // before: the plain encoder, no augmentation anywhere
    InjectionConfig plain = cfg.injection;
    plain.regime = Regime::FullFinetune;
    plain.insertion_position = InsertPosition::None;
    ForwardResult before =
        task_forward(model, ex, plain, cfg.training.loss, cfg.training.seed, {0, 0});
    out["before"] = {{"attention", attention_to_json(before.plm_outputs)}};

    // after: the configured injection (position none would be a no-op here)
    InjectionConfig after_cfg = cfg.injection;
    if (after_cfg.regime == Regime::FullFinetune &&
        after_cfg.insertion_position == InsertPosition::None) {
        after_cfg.insertion_position = InsertPosition::AfterVh;
    }
    ForwardResult after =
        task_forward(model, ex, after_cfg, cfg.training.loss, cfg.training.seed, {0, 0});
    out["after"] = {{"attention", attention_to_json(after.plm_outputs)}};
    if (after.selection) {
        json sel;
        sel["indices"] = after.selection->indices;
        sel["words"] = after.selection->words;
        out["selection"] = sel;
    }
    if (after.augmentation) {
        out["reformulation"] = {{"h_v", matrix_to_json(after.augmentation->h_v)}};
        if (after.augmentation->attention.defined()) {
            out["reformulation"]["attention"] = matrix_to_json(after.augmentation->attention);
        }
        json positions = json::array();
        for (std::size_t p : after.augmentation->source_positions) positions.push_back(p);
        out["reformulation"]["source_positions"] = positions;
    }

    const std::string dumped = out.dump(2) + "\n";
    if (out_file.empty() || out_file == "-") {
        std::cout << dumped;
    } else {
        write_text(out_file, dumped);
        std::cout << "wrote attention dump to " << out_file << "\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"desk-scale visually-augmented fine-tuning laboratory"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::string out_dir, data_dir, input, output, axis, values, checkpoint, attributes, text;
    bool force = false;

    CLI::App* gen = app.add_subcommand("gen", "generate a synthetic dataset");
    add_common_flags(gen, opts);
    gen->add_option("--out", out_dir, "output directory")->required();
    gen->add_flag("--force", force, "overwrite existing files");

    CLI::App* extract = app.add_subcommand("extract", "extract VH-words per input line");
    add_common_flags(extract, opts);
    extract->add_option("--input", input, "text or JSONL file, one sentence per line")
        ->required();
    extract->add_option("--out", output, "output JSONL ('-' = stdout)");
    extract->add_option("--attributes", attributes, "attribute table for the aligned encoder");

    CLI::App* train_cmd = app.add_subcommand("train", "train on a generated dataset");
    add_common_flags(train_cmd, opts);
    train_cmd->add_option("--data", data_dir, "dataset directory from 'gen'")->required();
    train_cmd->add_option("--out", out_dir, "output directory")->required();

    CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
    add_common_flags(eval_cmd, opts);
    eval_cmd->add_option("--data", data_dir, "dataset directory")->required();
    eval_cmd->add_option("--checkpoint", checkpoint, "checkpoint file (default: fresh init)");
    eval_cmd->add_option("--out", output, "metrics JSON output file");

    CLI::App* sweep = app.add_subcommand("sweep", "ablation sweep over one axis");
    add_common_flags(sweep, opts);
    sweep->add_option("--data", data_dir, "dataset directory")->required();
    sweep->add_option("--axis", axis, "k|insertion_position|augmentation_source|vh_fraction")
        ->required();
    sweep->add_option("--values", values, "comma-separated axis values")->required();
    sweep->add_option("--out", output, "TSV output file ('-' = stdout)");

    CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient suite");
    add_common_flags(gradcheck, opts);

    CLI::App* dump = app.add_subcommand("dump-attn", "dump attention maps before/after");
    add_common_flags(dump, opts);
    dump->add_option("--text", text, "input sentence")->required();
    dump->add_option("--attributes", attributes, "attribute table for the aligned encoder");
    dump->add_option("--out", output, "JSON output file ('-' = stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return 1;
    }

    try {
        if (gen->parsed()) return cmd_gen(opts, out_dir, force);
        if (extract->parsed()) return cmd_extract(opts, input, output, attributes);
        if (train_cmd->parsed()) return cmd_train(opts, data_dir, out_dir);
        if (eval_cmd->parsed()) return cmd_eval(opts, data_dir, checkpoint, output);
        if (sweep->parsed()) return cmd_sweep(opts, data_dir, axis, values, output);
        if (gradcheck->parsed()) return cmd_gradcheck(opts);
        if (dump->parsed()) return cmd_dump_attn(opts, text, attributes, output);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const ParseError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
