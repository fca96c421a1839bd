#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "styleaug/metrics.hpp"
#include "styleaug/sweep.hpp"

using namespace styleaug;
namespace fs = std::filesystem;

namespace {

LabeledDataset shared_toy() {
    static LabeledDataset ds = make_toy_dataset({{"circle", {16, "circle", "warm"}},
                                                 {"square", {16, "square", "cool"}},
                                                 {"triangle", {6, "triangle", "earth"}},
                                                 {"cross", {4, "cross", "pastel"}}},
                                                32, 61);
    return ds;
}

TrainConfig tiny_config(uint64_t seed = 3) {
    TrainConfig cfg;
    cfg.batch_size = 8;
    cfg.epochs = 1;
    cfg.workers = 2;
    cfg.head_width = 16;
    cfg.image_size = 32;
    cfg.seed = seed;
    cfg.learning_rate = 1e-3;
    return cfg;
}

AttentionClassifier tiny_model(const LabeledDataset& ds, uint64_t seed = 3) {
    EncoderSpec spec;
    spec.channels = {4, 6, 8, 12};
    StageConvEncoder enc(spec);
    std::mt19937_64 rng(seed);
    enc.init_params(rng);
    return build_model("toy", enc, TapSpec(), ds.classes(), tiny_config(seed));
}

StyleTransferEngine tiny_engine(const LabeledDataset& ds, uint64_t seed = 5) {
    EncoderSpec spec;
    spec.channels = {4, 6, 8, 12};
    StyleTransferEngine engine(spec);
    std::mt19937_64 rng(mix_seed(seed, "engine"));
    engine.encoder.init_params(rng);
    engine.decoder.init_params(rng);
    StyleTrainConfig cfg;
    cfg.iterations = 40;
    cfg.batch = 4;
    cfg.image_size = 32;
    cfg.workers = 2;
    cfg.seed = seed;
    cfg.lr = 2e-3;
    pretrain_encoder(engine, ds, cfg);
    cfg.iterations = 30;
    train_decoder(engine, ds, cfg);
    return engine;
}

}  // namespace

TEST_CASE("metrics hand confusion example") {
    // truth [A,A,B,B], preds [A,B,B,B]
    Metrics m = compute_metrics({0, 0, 1, 1}, {0, 1, 1, 1}, {"A", "B"});
    CHECK(m.accuracy == doctest::Approx(0.75));
    CHECK(m.per_class.at("A").precision == doctest::Approx(1.0));
    CHECK(m.per_class.at("A").recall == doctest::Approx(0.5));
    CHECK(m.per_class.at("B").precision == doctest::Approx(2.0 / 3.0));
    CHECK(m.per_class.at("B").recall == doctest::Approx(1.0));
    CHECK(m.macro_precision == doctest::Approx(5.0 / 6.0).epsilon(1e-9));
    CHECK(m.macro_recall == doctest::Approx(0.75));
}

TEST_CASE("all-correct predictions score 1.0 everywhere") {
    Metrics m = compute_metrics({0, 1, 2, 0}, {0, 1, 2, 0}, {"a", "b", "c"});
    CHECK(m.accuracy == 1.0);
    CHECK(m.macro_precision == 1.0);
    CHECK(m.macro_recall == 1.0);
    CHECK(m.macro_f1 == 1.0);
}

TEST_CASE("single-class eval set uses the 0-convention with flags") {
    Metrics m = compute_metrics({0, 0}, {0, 0}, {"present", "zmissing"});
    CHECK(m.per_class.at("present").f1 == 1.0);
    CHECK(m.per_class.at("zmissing").support == 0);
    CHECK(m.per_class.at("zmissing").precision == 0.0);
    CHECK(m.per_class.at("zmissing").precision_zero_div);
    CHECK(m.per_class.at("zmissing").recall_zero_div);
    // macro still averages over the full class map
    CHECK(m.macro_f1 == doctest::Approx(0.5));
}

TEST_CASE("macro values equal unweighted means of per-class values") {
    std::mt19937_64 rng(71);
    const std::vector<std::string> names = {"w", "x", "y", "z"};
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<int> truth(60), pred(60);
        for (int i = 0; i < 60; ++i) {
            truth[i] = static_cast<int>(rng() % 4);
            pred[i] = static_cast<int>(rng() % 4);
        }
        Metrics m = compute_metrics(truth, pred, names);
        double p = 0, r = 0, f = 0;
        for (const auto& [_, pc] : m.per_class) {
            p += pc.precision;
            r += pc.recall;
            f += pc.f1;
        }
        CHECK(std::abs(m.macro_precision - p / 4) <= 1e-9);
        CHECK(std::abs(m.macro_recall - r / 4) <= 1e-9);
        CHECK(std::abs(m.macro_f1 - f / 4) <= 1e-9);

        // accuracy equals trace/N
        size_t diag = 0;
        for (int i = 0; i < 60; ++i)
            if (truth[i] == pred[i]) ++diag;
        CHECK(m.accuracy == doctest::Approx(static_cast<double>(diag) / 60.0));
    }
}

TEST_CASE("evaluate rejects unknown labels and empty inputs") {
    LabeledDataset ds = shared_toy();
    AttentionClassifier model = tiny_model(ds);
    CHECK_THROWS_AS(evaluate(model, {}), ValidationError);

    LabeledDataset other = make_toy_dataset(
        {{"ringer", {2, "ring", "mono"}}, {"diamond", {2, "diamond", "warm"}}}, 32, 4);
    auto items = make_examples(other, Split::Train);
    CHECK_THROWS_AS(evaluate(model, items), ValidationError);
}

TEST_CASE("metrics json round trip") {
    Metrics m = compute_metrics({0, 0, 1, 1}, {0, 1, 1, 1}, {"A", "B"});
    Metrics back = Metrics::from_json(m.to_json());
    CHECK(back.accuracy == m.accuracy);
    CHECK(back.macro_f1 == m.macro_f1);
    CHECK(back.per_class.at("B").precision == m.per_class.at("B").precision);
    CHECK(back.per_class.at("A").support == m.per_class.at("A").support);
}

TEST_CASE("confidence ranking contracts") {
    LabeledDataset ds = shared_toy();
    AttentionClassifier model = tiny_model(ds);
    auto items = make_examples(ds, Split::Test);
    REQUIRE(items.size() >= 8);

    SUBCASE("k equal to item count gives reversed permutations") {
        auto r = rank_confidence(model, items, items.size());
        REQUIRE(r.most_confident.size() == items.size());
        REQUIRE(r.least_confident.size() == items.size());
        for (size_t i = 0; i < items.size(); ++i) {
            CHECK(r.most_confident[i].id ==
                  r.least_confident[items.size() - 1 - i].id);
        }
        // ascending vs descending
        for (size_t i = 1; i < items.size(); ++i) {
            CHECK(r.most_confident[i - 1].loss <= r.most_confident[i].loss);
            CHECK(r.least_confident[i - 1].loss >= r.least_confident[i].loss);
        }
    }
    SUBCASE("disjoint when 2k <= N and deterministic") {
        const size_t k = items.size() / 2;
        auto r1 = rank_confidence(model, items, k);
        auto r2 = rank_confidence(model, items, k);
        std::set<std::string> most, least;
        for (const auto& e : r1.most_confident) most.insert(e.id);
        for (const auto& e : r1.least_confident) least.insert(e.id);
        for (const auto& id : most) CHECK(least.count(id) == 0);
        for (size_t i = 0; i < k; ++i) {
            CHECK(r1.most_confident[i].id == r2.most_confident[i].id);
            CHECK(r1.least_confident[i].id == r2.least_confident[i].id);
        }
    }
    SUBCASE("k beyond N errors") {
        CHECK_THROWS_AS(rank_confidence(model, items, items.size() + 1), ValidationError);
    }
}

TEST_CASE("color ramp entries are distinct and invertible") {
    const auto& lut = attention_color_ramp();
    REQUIRE(lut.size() == 256);
    std::set<std::array<uint8_t, 3>> seen(lut.begin(), lut.end());
    CHECK(seen.size() == 256);
    for (int i = 0; i < 256; i += 17) CHECK(ramp_index_of(lut[i]) == i);
}

TEST_CASE("attention overlay is a rank-preserving map of the weights") {
    std::mt19937_64 rng(83);
    Tensor map = Tensor::uniform({4, 4}, rng);
    Image overlay = render_attention_overlay(map, 4, 4);

    // recover indices and compare orderings (ties from quantization allowed)
    std::vector<std::pair<double, int>> pairs;
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) {
            const std::array<uint8_t, 3> rgb = {overlay.at(y, x, 0), overlay.at(y, x, 1),
                                                overlay.at(y, x, 2)};
            const int idx = ramp_index_of(rgb);
            REQUIRE(idx >= 0);
            pairs.emplace_back(map[static_cast<size_t>(y) * 4 + x], idx);
        }
    std::sort(pairs.begin(), pairs.end());
    for (size_t i = 1; i < pairs.size(); ++i) CHECK(pairs[i - 1].second <= pairs[i].second);

    // uniform map renders constant
    Tensor flat({3, 3});
    flat.fill(1.0 / 9.0);
    Image constant = render_attention_overlay(flat, 6, 6);
    for (size_t p = 3; p < constant.rgb.size(); p += 3) {
        CHECK(constant.rgb[p] == constant.rgb[0]);
        CHECK(constant.rgb[p + 1] == constant.rgb[1]);
        CHECK(constant.rgb[p + 2] == constant.rgb[2]);
    }
}

TEST_CASE("attention export writes input plus four overlays per item") {
    LabeledDataset ds = shared_toy();
    AttentionClassifier model = tiny_model(ds);
    auto test_items = make_examples(ds, Split::Test);
    std::vector<TrainExample> four(test_items.begin(), test_items.begin() + 4);

    const fs::path dir = fs::temp_directory_path() / "styleaug_attn_export";
    fs::remove_all(dir);
    auto files = export_attention_maps(model, four, dir);
    CHECK(files.size() == 4 * 5);
    size_t inputs = 0, taps = 0;
    for (const auto& f : files) {
        CHECK(fs::exists(f));
        if (f.string().find("_input.png") != std::string::npos) ++inputs;
        if (f.string().find("_tap") != std::string::npos) ++taps;
    }
    CHECK(inputs == 4);
    CHECK(taps == 16);
    fs::remove_all(dir);
}

TEST_CASE("sweep cell seeds are stable and distinct") {
    const uint64_t a = sweep_cell_seed(7, 0.1, 0.2);
    CHECK(a == sweep_cell_seed(7, 0.1, 0.2));
    CHECK(a != sweep_cell_seed(7, 0.2, 0.1));
    CHECK(a != sweep_cell_seed(8, 0.1, 0.2));
}

TEST_CASE("sweep validates grids") {
    SweepPipeline pipeline;
    LabeledDataset ds = shared_toy();
    StyleTransferEngine engine = tiny_engine(ds);
    pipeline.ds = &ds;
    pipeline.engine = &engine;
    pipeline.train = tiny_config();
    CHECK_THROWS_AS(sweep(pipeline, {}, {0.5}, 1), ValidationError);
    CHECK_THROWS_AS(sweep(pipeline, {0.5, 0.2}, {0.5}, 1), ValidationError);
    CHECK_THROWS_AS(sweep(pipeline, {0.5, 1.2}, {0.5}, 1), ValidationError);
}

TEST_CASE("sweep runs a 2x2 grid, control matches an independent run bit-for-bit") {
    LabeledDataset ds = shared_toy();
    StyleTransferEngine engine = tiny_engine(ds);

    SweepPipeline pipeline;
    pipeline.ds = &ds;
    pipeline.engine = &engine;
    pipeline.train = tiny_config(11);
    const fs::path dir = fs::temp_directory_path() / "styleaug_sweep_test";
    fs::remove_all(dir);
    pipeline.out_dir = dir;

    SweepGrid grid = sweep(pipeline, {0.5, 1.0}, {0.5, 1.0}, 42);
    CHECK(grid.cells.size() == 4);
    CHECK(grid.failed_cells() == 0);
    REQUIRE(grid.control.has_value());

    // control cell equals the budget-zero training run, bit for bit
    SweepCell rerun = run_sweep_cell(pipeline, 0.0, 0.0, grid.control->seed);
    CHECK(rerun.test_metrics.accuracy == grid.control->test_metrics.accuracy);
    CHECK(rerun.test_metrics.macro_precision == grid.control->test_metrics.macro_precision);
    CHECK(rerun.test_metrics.macro_recall == grid.control->test_metrics.macro_recall);
    CHECK(rerun.test_metrics.macro_f1 == grid.control->test_metrics.macro_f1);

    // resumability: a second sweep reuses the markers (fast) and agrees
    SweepGrid again = sweep(pipeline, {0.5, 1.0}, {0.5, 1.0}, 42);
    CHECK(again.cell(0.5, 1.0).test_metrics.accuracy ==
          grid.cell(0.5, 1.0).test_metrics.accuracy);

    // artifacts
    write_sweep_csv(grid, dir / "sweep_grid.csv");
    write_sweep_table(grid, dir / "sweep_grid.txt");
    CHECK(fs::exists(dir / "sweep_grid.csv"));
    CHECK(fs::exists(dir / "sweep_grid.txt"));
    const std::string table = format_sweep_table(grid);
    CHECK(table.find("p1/p2") == 0);
    CHECK(table.find("/") != std::string::npos);

    // csv re-written from an identical grid is byte-identical
    write_sweep_csv(again, dir / "sweep_grid2.csv");
    std::ifstream f1(dir / "sweep_grid.csv"), f2(dir / "sweep_grid2.csv");
    std::stringstream s1, s2;
    s1 << f1.rdbuf();
    s2 << f2.rdbuf();
    CHECK(s1.str() == s2.str());

    fs::remove_all(dir);
}

TEST_CASE("sweep records cell failures and continues") {
    LabeledDataset ds = shared_toy();
    StyleTransferEngine engine = tiny_engine(ds);
    engine.decoder_trained = false;  // forces stylize to fail for nonzero budgets

    SweepPipeline pipeline;
    pipeline.ds = &ds;
    pipeline.engine = &engine;
    pipeline.train = tiny_config();

    SweepGrid grid = sweep(pipeline, {0.5}, {0.5}, 9, /*include_control=*/true);
    CHECK(grid.cells.size() == 1);
    CHECK_FALSE(grid.cell(0.5, 0.5).ok);
    CHECK(grid.cell(0.5, 0.5).error.find("decoder") != std::string::npos);
    CHECK(grid.failed_cells() == 1);
    // the control needs no stylization, so it succeeds
    REQUIRE(grid.control.has_value());
    CHECK(grid.control->ok);
}
