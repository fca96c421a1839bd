#include <fstream>
#include <iostream>

#include "styleaug/checkpoint.hpp"
#include "styleaug/config.hpp"
#include "styleaug/metrics.hpp"
#include "styleaug/sweep.hpp"

namespace styleaug {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

LabeledDataset resolve_dataset(const RunConfig& cfg) {
    if (!cfg.data_root().empty()) {
        if (cfg.data_layout() == "folders") return load_image_folder(cfg.data_root());
        if (cfg.data_labels().empty())
            throw ConfigError("data.labels is required for the csv layout");
        return load_dataset(cfg.data_root(), cfg.data_labels(), cfg.data_label_column());
    }
    return make_toy_dataset(cfg.toy_classes(), cfg.toy_image_size(), cfg.seed());
}

fs::path default_decoder_path(const RunConfig& cfg) {
    const std::string flag = cfg.tree().at("train").at("decoder").get<std::string>();
    if (!flag.empty()) return flag;
    return cfg.out_dir() / "train-style" / "decoder.ckpt";
}

fs::path default_model_path(const RunConfig& cfg) {
    const std::string flag = cfg.tree().at("train").at("model").get<std::string>();
    if (!flag.empty()) return flag;
    return cfg.out_dir() / "train-clf" / "model.ckpt";
}

StyleTransferEngine load_engine(const RunConfig& cfg) {
    const fs::path path = default_decoder_path(cfg);
    if (!fs::exists(path))
        throw StageDependencyError("stage needs the style engine checkpoint " + path.string() +
                                   " (run train-style first)");
    return StyleTransferEngine::load(path);
}

StageConvEncoder resolve_backbone(const RunConfig& cfg, const StyleTransferEngine* engine) {
    const std::string id = cfg.backbone_id();
    if (id == "toy") {
        if (!engine)
            throw StageDependencyError(
                "backbone 'toy' loads the frozen encoder from the style engine checkpoint; run "
                "train-style first");
        return engine->encoder;
    }
    // Larger pretrained backbones load from a converted checkpoint container.
    const std::string weights =
        cfg.tree().at("train").at("backbone_weights").get<std::string>();
    if (weights.empty())
        throw ConfigError("backbone '" + id +
                          "' needs train.backbone_weights pointing at a converted weight "
                          "container (see scripts/full_scale_reproduction.md)");
    StyleTransferEngine container = StyleTransferEngine::load(weights);
    return container.encoder;
}

void write_history_csv(const fs::path& path, const std::vector<double>& losses) {
    std::ofstream out(path);
    out << "iteration,loss\n";
    for (size_t i = 0; i < losses.size(); ++i) out << i << "," << losses[i] << "\n";
}

StyleTrainConfig style_train_config(const RunConfig& cfg) {
    StyleTrainConfig st;
    st.iterations = cfg.style_iters();
    st.style_weight = cfg.style_weight();
    st.lr = cfg.style_lr();
    st.batch = cfg.style_batch();
    st.image_size = cfg.train_config().image_size;
    st.workers = cfg.train_config().workers;
    st.seed = cfg.seed();
    return st;
}

void stage_ingest(const RunConfig& cfg) {
    LabeledDataset ds = resolve_dataset(cfg);
    const fs::path dir = cfg.out_dir() / "ingest";
    fs::create_directories(dir);

    const ClassHistogram hist = class_histogram(ds);
    json summary;
    summary["classes"] = ds.classes();
    summary["items"] = ds.size();
    summary["splits"] = {{"train", ds.split_indices(Split::Train).size()},
                         {"dev", ds.split_indices(Split::Dev).size()},
                         {"test", ds.split_indices(Split::Test).size()}};
    json counts = json::object();
    for (const auto& [cls, n] : hist.counts) counts[cls] = n;
    summary["train_histogram"] = counts;
    summary["warnings"] = ds.warnings();
    try {
        const auto part = partition_majority_minority(hist, cfg.partition_override());
        summary["partition"] = {{"majority", part.majority}, {"minority", part.minority}};
    } catch (const ValidationError& e) {
        summary["partition"] = {{"error", e.what()}};
    }

    if (cfg.data_root().empty()) {
        const fs::path toy_dir = dir / "toy";
        materialize_dataset(ds, toy_dir);
        summary["materialized"] = toy_dir.string();
    }
    std::ofstream out(dir / "dataset_summary.json");
    out << summary.dump(2) << "\n";
    std::cout << summary.dump(2) << "\n";
    write_provenance(dir, make_provenance("ingest", cfg, {cfg.data_labels()}));
}

void stage_train_style(const RunConfig& cfg) {
    LabeledDataset ds = resolve_dataset(cfg);
    const fs::path dir = cfg.out_dir() / "train-style";
    fs::create_directories(dir);

    EncoderSpec spec;
    spec.channels = cfg.style_channels();
    spec.strides.assign(spec.channels.size(), 2);
    spec.strides[0] = 1;
    StyleTransferEngine engine(spec);
    std::mt19937_64 rng(mix_seed(cfg.seed(), "engine-init"));
    engine.encoder.init_params(rng);
    engine.decoder.init_params(rng);

    StyleTrainConfig st = style_train_config(cfg);
    StyleTrainConfig pre = st;
    pre.iterations = cfg.style_pretrain_iters();
    pre.lr = std::max(st.lr, 1e-3);  // AE warm-up converges with a hotter rate
    if (pre.iterations > 0) {
        const auto ae_history = pretrain_encoder(engine, ds, pre);
        write_history_csv(dir / "encoder_pretrain_history.csv", ae_history);
    }

    const auto history = train_decoder(engine, ds, st);
    write_history_csv(dir / "decoder_loss_history.csv", history);
    engine.save(dir / "decoder.ckpt");
    std::cout << "train-style: " << history.size() << " iterations, final loss "
              << history.back() << ", saved " << (dir / "decoder.ckpt").string() << "\n";
    write_provenance(dir, make_provenance("train-style", cfg, {cfg.data_labels()}));
}

void stage_augment(const RunConfig& cfg) {
    LabeledDataset ds = resolve_dataset(cfg);
    StyleTransferEngine engine = load_engine(cfg);
    const fs::path dir = cfg.out_dir() / "augment";

    const ClassHistogram hist = class_histogram(ds);
    const auto part = partition_majority_minority(hist, cfg.partition_override());
    const AugmentationBudget budget =
        augmentation_budget(hist, part, cfg.budget_p1(), cfg.budget_p2());

    const auto items =
        generate_augmented_set(ds, engine, budget, cfg.budget_alpha(), cfg.seed(),
                               cfg.train_config().workers, cfg.train_config().image_size);
    const fs::path manifest = write_augmentation_manifest(items, dir);
    std::cout << "augment: wrote " << items.size() << " stylized items, manifest "
              << manifest.string() << "\n";
    write_provenance(dir, make_provenance("augment", cfg, {default_decoder_path(cfg)}));
}

void stage_train_clf(const RunConfig& cfg) {
    LabeledDataset ds = resolve_dataset(cfg);
    const fs::path dir = cfg.out_dir() / "train-clf";
    fs::create_directories(dir);

    StyleTransferEngine engine;
    const StyleTransferEngine* engine_ptr = nullptr;
    if (cfg.backbone_id() == "toy") {
        engine = load_engine(cfg);
        engine_ptr = &engine;
    }
    StageConvEncoder backbone = resolve_backbone(cfg, engine_ptr);

    std::vector<AugmentedItem> aug;
    std::string manifest = cfg.tree().at("train").at("aug_manifest").get<std::string>();
    if (manifest == "default") {
        const fs::path candidate = cfg.out_dir() / "augment" / "aug_manifest.csv";
        manifest = fs::exists(candidate) ? candidate.string() : "";
        if (manifest.empty())
            throw StageDependencyError("train.aug_manifest=default but " + candidate.string() +
                                       " is missing (run augment first)");
    }
    if (!manifest.empty() && manifest != "none") aug = load_augmentation_manifest(manifest);

    TrainConfig tc = cfg.train_config();
    AttentionClassifier model =
        build_model(cfg.backbone_id(), backbone, TapSpec(), ds.classes(), tc);

    const auto train_items = make_examples(ds, Split::Train, aug.empty() ? nullptr : &aug);
    const auto dev_items = make_examples(ds, Split::Dev);
    const TrainHistory hist = train_classifier(model, train_items, dev_items, tc);

    std::ofstream csv(dir / "train_history.csv");
    csv << "epoch,train_loss,dev_accuracy,dev_macro_f1\n";
    for (size_t e = 0; e < hist.epochs.size(); ++e)
        csv << e << "," << hist.epochs[e].train_loss << "," << hist.epochs[e].dev_accuracy << ","
            << hist.epochs[e].dev_macro_f1 << "\n";

    model.save(dir / "model.ckpt");
    std::cout << "train-clf: " << hist.epochs.size() << " epochs, best dev accuracy "
              << hist.best_dev_accuracy << " (epoch " << hist.best_epoch << "), saved "
              << (dir / "model.ckpt").string() << "\n";
    write_provenance(dir, make_provenance("train-clf", cfg,
                                          {default_decoder_path(cfg), fs::path(manifest)}));
}

void stage_eval(const RunConfig& cfg) {
    LabeledDataset ds = resolve_dataset(cfg);
    const fs::path model_path = default_model_path(cfg);
    if (!fs::exists(model_path))
        throw StageDependencyError("eval needs the classifier checkpoint " + model_path.string() +
                                   " (run train-clf first)");
    AttentionClassifier model = AttentionClassifier::load(model_path);

    const fs::path dir = cfg.out_dir() / "eval";
    fs::create_directories(dir);
    const auto items = make_examples(ds, cfg.report_split());
    const Metrics m = evaluate(model, items);
    std::ofstream out(dir / "metrics.json");
    out << m.to_json().dump(2) << "\n";
    std::cout << m.to_json().dump(2) << "\n";
    write_provenance(dir, make_provenance("eval", cfg, {model_path}));
}

void stage_sweep(const RunConfig& cfg) {
    LabeledDataset ds = resolve_dataset(cfg);
    StyleTransferEngine engine = load_engine(cfg);
    const fs::path dir = cfg.out_dir() / "sweep";

    SweepPipeline pipeline;
    pipeline.ds = &ds;
    pipeline.engine = &engine;
    pipeline.partition_override = cfg.partition_override();
    pipeline.alpha = cfg.budget_alpha();
    pipeline.train = cfg.train_config();
    pipeline.backbone_id = cfg.backbone_id();
    pipeline.out_dir = dir;

    const SweepGrid grid =
        sweep(pipeline, cfg.sweep_p1(), cfg.sweep_p2(), cfg.seed(), cfg.sweep_include_control());
    write_sweep_csv(grid, dir / "sweep_grid.csv");
    write_sweep_table(grid, dir / "sweep_grid.txt");
    std::cout << format_sweep_table(grid);
    write_provenance(dir, make_provenance("sweep", cfg, {default_decoder_path(cfg)}));

    if (grid.failed_cells() > 0)
        throw NumericError(std::to_string(grid.failed_cells()) +
                           " sweep cell(s) failed; see sweep_grid.csv and cell markers");
}

void stage_report(const RunConfig& cfg) {
    LabeledDataset ds = resolve_dataset(cfg);
    const fs::path model_path = default_model_path(cfg);
    if (!fs::exists(model_path))
        throw StageDependencyError("report needs the classifier checkpoint " +
                                   model_path.string() + " (run train-clf first)");
    AttentionClassifier model = AttentionClassifier::load(model_path);
    const fs::path dir = cfg.out_dir() / "report";
    fs::create_directories(dir);

    const auto items = make_examples(ds, cfg.report_split());
    const size_t k = std::min<size_t>(cfg.report_topk(), items.size());
    const ConfidenceRanking ranking = rank_confidence(model, items, k);

    std::ofstream csv(dir / "confidence.csv");
    csv << "rank,kind,id,label,predicted,loss\n";
    for (size_t i = 0; i < ranking.most_confident.size(); ++i) {
        const auto& e = ranking.most_confident[i];
        csv << i << ",most," << e.id << "," << e.label << ","
            << model.class_names()[e.predicted] << "," << e.loss << "\n";
    }
    for (size_t i = 0; i < ranking.least_confident.size(); ++i) {
        const auto& e = ranking.least_confident[i];
        csv << i << ",least," << e.id << "," << e.label << ","
            << model.class_names()[e.predicted] << "," << e.loss << "\n";
    }

    if (cfg.report_attention()) {
        const size_t n = std::min<size_t>(cfg.report_items(), items.size());
        std::vector<TrainExample> subset(items.begin(), items.begin() + n);
        const auto files = export_attention_maps(model, subset, dir / "attention");
        std::cout << "report: wrote " << files.size() << " attention files\n";
    }
    std::cout << "report: confidence ranking at " << (dir / "confidence.csv").string() << "\n";
    write_provenance(dir, make_provenance("report", cfg, {model_path}));
}

void stage_toy_e2e(const RunConfig& cfg) {
    stage_ingest(cfg);
    stage_train_style(cfg);
    stage_augment(cfg);

    // the augment stage just wrote the manifest; consume it explicitly
    RunConfig with_aug = cfg;
    with_aug.set("train.aug_manifest",
                 (cfg.out_dir() / "augment" / "aug_manifest.csv").string());
    stage_train_clf(with_aug);
    stage_eval(with_aug);
    stage_report(with_aug);
}

}  // namespace

void run_stage(const std::string& subcommand, const RunConfig& cfg) {
    if (subcommand == "ingest") return stage_ingest(cfg);
    if (subcommand == "train-style") return stage_train_style(cfg);
    if (subcommand == "augment") return stage_augment(cfg);
    if (subcommand == "train-clf") return stage_train_clf(cfg);
    if (subcommand == "eval") return stage_eval(cfg);
    if (subcommand == "sweep") return stage_sweep(cfg);
    if (subcommand == "report") return stage_report(cfg);
    if (subcommand == "toy-e2e") return stage_toy_e2e(cfg);
    std::string valid;
    for (const auto& c : known_subcommands()) valid += (valid.empty() ? "" : ", ") + c;
    throw ConfigError("unknown subcommand '" + subcommand + "'; valid: " + valid);
}

}  // namespace styleaug
