#include <CLI11.hpp>

#include <iostream>

#include "styleaug/config.hpp"

using styleaug::RunConfig;

namespace {

struct Overrides {
    std::vector<std::pair<std::string, std::string>> entries;

    void bind(CLI::App* cmd, const std::string& flag, const std::string& key,
              const std::string& help) {
        cmd->add_option_function<std::string>(
            flag, [this, key](const std::string& v) { entries.emplace_back(key, v); }, help);
    }
};

void add_common(CLI::App* cmd, Overrides& ov, std::string& config_path,
                std::vector<std::string>& sets) {
    cmd->add_option("--config", config_path, "JSON config file; flags override its keys");
    cmd->add_option("--set", sets, "generic override key.path=value (repeatable)");
    ov.bind(cmd, "--out", "out", "output root directory");
    ov.bind(cmd, "--seed", "seed", "master seed recorded in every artifact");
    ov.bind(cmd, "--data", "data.root", "dataset root (empty: synthetic toy data)");
    ov.bind(cmd, "--labels", "data.labels", "labels csv (image,...,set columns)");
    ov.bind(cmd, "--label-column", "data.label_column", "label column (default status)");
    ov.bind(cmd, "--layout", "data.layout", "data layout: csv | folders");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"style-transfer augmentation pipeline for imbalanced image classification"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> sets;
    Overrides ov;

    auto* ingest = app.add_subcommand("ingest", "load a dataset, report class statistics");
    add_common(ingest, ov, config_path, sets);

    auto* train_style =
        app.add_subcommand("train-style", "train the AdaIN decoder over the frozen encoder");
    add_common(train_style, ov, config_path, sets);
    ov.bind(train_style, "--iters", "style.iters", "decoder iterations (paper default 20000)");
    ov.bind(train_style, "--style-weight", "style.style_weight", "style loss weight (default 10)");
    ov.bind(train_style, "--style-lr", "style.lr", "decoder learning rate (default 1e-4)");
    ov.bind(train_style, "--pretrain-iters", "style.pretrain_iters",
            "autoencoder warm-up iterations for the desk-scale encoder");

    auto* augment = app.add_subcommand(
        "augment", "materialize class-preserving stylized samples per the p1/p2 budget");
    add_common(augment, ov, config_path, sets);
    ov.bind(augment, "--decoder", "train.decoder", "style engine checkpoint (decoder.ckpt)");
    ov.bind(augment, "--p1", "budget.p1", "extra-majority proportion in [0,1]");
    ov.bind(augment, "--p2", "budget.p2", "extra-minority proportion in [0,1]");
    ov.bind(augment, "--alpha", "budget.alpha", "style/content blend in [0,1] (default 1.0)");

    auto* train_clf =
        app.add_subcommand("train-clf", "train the spatial-attention classifier head");
    add_common(train_clf, ov, config_path, sets);
    ov.bind(train_clf, "--aug-manifest", "train.aug_manifest",
            "aug_manifest.csv to extend the train split ('none' to skip, 'default' for the "
            "augment stage output)");
    ov.bind(train_clf, "--backbone", "train.backbone",
            "backbone id: toy | resnet34 | resnet50 | vgg16 | vgg19");
    ov.bind(train_clf, "--backbone-weights", "train.backbone_weights",
            "converted weight container for non-toy backbones");
    ov.bind(train_clf, "--decoder", "train.decoder",
            "style engine checkpoint providing the frozen toy backbone");
    ov.bind(train_clf, "--epochs", "train.epochs", "epochs (paper default 20)");
    ov.bind(train_clf, "--batch", "train.batch_size", "batch size (paper default 64)");
    ov.bind(train_clf, "--lr", "train.lr", "learning rate (paper default 1e-4)");
    ov.bind(train_clf, "--dropout", "train.dropout", "head dropout (paper default 0.23)");
    ov.bind(train_clf, "--focal-alpha", "train.focal_alpha", "focal alpha (paper default 2)");
    ov.bind(train_clf, "--focal-gamma", "train.focal_gamma", "focal gamma (paper default 2)");
    ov.bind(train_clf, "--weight-decay", "train.weight_decay", "L2 coefficient (default 1e-4)");
    ov.bind(train_clf, "--workers", "train.workers", "data/compute workers (paper default 8)");

    auto* eval = app.add_subcommand("eval", "evaluate a trained classifier on a split");
    add_common(eval, ov, config_path, sets);
    ov.bind(eval, "--model", "train.model", "classifier checkpoint (model.ckpt)");
    ov.bind(eval, "--split", "report.split", "split to evaluate: train | dev | test");

    auto* sweep = app.add_subcommand(
        "sweep", "train/evaluate the full p1 x p2 grid and emit the metrics matrix");
    add_common(sweep, ov, config_path, sets);
    ov.bind(sweep, "--p1", "sweep.p1", "p1 grid, start:end:step or comma list");
    ov.bind(sweep, "--p2", "sweep.p2", "p2 grid, start:end:step or comma list");
    ov.bind(sweep, "--decoder", "train.decoder", "style engine checkpoint");
    ov.bind(sweep, "--epochs", "train.epochs", "epochs per cell");

    auto* report = app.add_subcommand(
        "report", "confidence ranking and attention-map export for a trained model");
    add_common(report, ov, config_path, sets);
    ov.bind(report, "--model", "train.model", "classifier checkpoint");
    ov.bind(report, "--split", "report.split", "split to report on (default test)");
    ov.bind(report, "--topk", "report.topk", "list length for most/least confident");
    ov.bind(report, "--attention", "report.attention", "write attention overlays (true/false)");
    ov.bind(report, "--items", "report.items", "how many items get attention overlays");

    auto* toy = app.add_subcommand(
        "toy-e2e", "synthetic-data pipeline end to end: ingest, style, augment, train, report");
    add_common(toy, ov, config_path, sets);
    ov.bind(toy, "--iters", "style.iters", "decoder iterations");
    ov.bind(toy, "--epochs", "train.epochs", "classifier epochs");
    ov.bind(toy, "--p1", "budget.p1", "extra-majority proportion");
    ov.bind(toy, "--p2", "budget.p2", "extra-minority proportion");

    CLI11_PARSE(app, argc, argv);

    try {
        RunConfig cfg = config_path.empty() ? RunConfig::defaults()
                                            : RunConfig::from_file(config_path);
        for (const auto& [key, value] : ov.entries) cfg.set(key, value);
        for (const auto& kv : sets) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos)
                throw styleaug::ConfigError("--set expects key.path=value, got '" + kv + "'");
            cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
        }
        run_stage(app.get_subcommands().front()->get_name(), cfg);
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return styleaug::exit_code_for(e);
    }
}
