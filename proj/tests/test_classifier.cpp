#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "styleaug/classifier.hpp"
#include "test_util.hpp"

using namespace styleaug;
using testutil::dot;
using testutil::fd_grad;
using testutil::max_grad_rel_err;

namespace {

StageConvEncoder small_backbone(uint64_t seed = 123) {
    EncoderSpec spec;
    spec.channels = {4, 6, 8, 12};
    spec.strides = {1, 2, 2, 2};
    StageConvEncoder enc(spec);
    std::mt19937_64 rng(seed);
    enc.init_params(rng);
    return enc;
}

TrainConfig small_config() {
    TrainConfig cfg;
    cfg.batch_size = 8;
    cfg.epochs = 2;
    cfg.workers = 2;
    cfg.head_width = 32;
    cfg.image_size = 32;
    cfg.seed = 7;
    return cfg;
}

AttentionClassifier small_model(const std::vector<std::string>& classes = {"a", "b", "c", "d"}) {
    return build_model("toy", small_backbone(), TapSpec(), classes, small_config());
}

LabeledDataset toy_imbalanced(uint64_t seed = 51) {
    return make_toy_dataset({{"circle", {40, "circle", "warm"}},
                             {"square", {40, "square", "cool"}},
                             {"triangle", {10, "triangle", "earth"}},
                             {"cross", {6, "cross", "pastel"}}},
                            32, seed);
}

Tensor ce_reference(const Tensor& logits, int target) {
    Tensor p = nn::softmax(logits);
    Tensor out({1});
    out[0] = -std::log(p[target]);
    return out;
}

}  // namespace

TEST_CASE("spatial attention: uniform scores give the spatial mean") {
    Tensor local({2, 2, 2});
    // channel 0 constant 1, channel 1 varies but orthogonal to global
    local.vec() = {1, 1, 1, 1, 1, 2, 3, 4};
    Tensor global({2}, {1.0, 0.0});
    AttentionOutput out = spatial_attention(local, global);
    for (size_t p = 0; p < 4; ++p)
        CHECK(out.attention_map[p] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(out.descriptor[0] == doctest::Approx(1.0));
    CHECK(out.descriptor[1] == doctest::Approx(2.5));  // mean of {1,2,3,4}
}

TEST_CASE("spatial attention: hand softmax with scores (0, ln 3)") {
    // d=1: positions with values l1, l2; global chosen so scores are (0, ln3)
    const double l1 = 0.0, l2 = std::log(3.0);
    Tensor local({1, 1, 2}, {l1, l2});
    Tensor global({1}, {1.0});
    AttentionOutput out = spatial_attention(local, global);
    CHECK(out.attention_map[0] == doctest::Approx(0.25).epsilon(1e-9));
    CHECK(out.attention_map[1] == doctest::Approx(0.75).epsilon(1e-9));
    CHECK(out.descriptor[0] == doctest::Approx(0.25 * l1 + 0.75 * l2).epsilon(1e-9));
}

TEST_CASE("attention maps are normalized for random inputs") {
    std::mt19937_64 rng(19);
    for (int trial = 0; trial < 50; ++trial) {
        Tensor local = Tensor::randn({3, 4, 5}, rng);
        Tensor global = Tensor::randn({3}, rng);
        AttentionOutput out = spatial_attention(local, global);
        double sum = 0.0;
        for (size_t p = 0; p < out.attention_map.numel(); ++p) {
            CHECK(out.attention_map[p] >= 0.0);
            sum += out.attention_map[p];
        }
        CHECK(std::abs(sum - 1.0) <= 1e-6);
    }
}

TEST_CASE("spatial attention rejects dimension mismatch") {
    Tensor local({2, 2, 2});
    Tensor global({3});
    CHECK_THROWS_AS(spatial_attention(local, global), ShapeError);
}

TEST_CASE("spatial attention gradients match finite differences") {
    std::mt19937_64 rng(23);
    Tensor local = Tensor::randn({3, 4, 4}, rng);
    Tensor global = Tensor::randn({3}, rng);
    Tensor probe = Tensor::randn({3}, rng);

    Tensor d_local, d_global;
    spatial_attention_backward(local, global, probe, &d_local, &d_global);
    auto loss = [&]() { return dot(probe, spatial_attention(local, global).descriptor); };
    CHECK(max_grad_rel_err(d_local, fd_grad(loss, local)) < 1e-3);
    CHECK(max_grad_rel_err(d_global, fd_grad(loss, global)) < 1e-3);
}

TEST_CASE("focal loss reduces to cross-entropy at gamma=0, alpha=1") {
    std::mt19937_64 rng(29);
    for (int trial = 0; trial < 200; ++trial) {
        Tensor logits = Tensor::randn({5}, rng, 2.0);
        const int target = static_cast<int>(rng() % 5);
        const double fl = focal_loss(logits, target, 1.0, 0.0);
        const double ce = ce_reference(logits, target)[0];
        CHECK(std::abs(fl - ce) <= 1e-6);
    }
}

TEST_CASE("focal loss hand value at p_t = 0.9") {
    // 2-class logits (ln 9, 0) put softmax at (0.9, 0.1)
    Tensor logits({2}, {std::log(9.0), 0.0});
    const double fl = focal_loss(logits, 0, 2.0, 2.0);
    CHECK(fl == doctest::Approx(2.0 * 0.01 * -std::log(0.9)).epsilon(1e-12));
    CHECK(fl == doctest::Approx(0.0021072).epsilon(1e-4));
}

TEST_CASE("focal loss properties") {
    // strictly decreasing in p_t, zero in the limit
    double prev = 1e300;
    for (double pt : {0.05, 0.2, 0.5, 0.7, 0.9, 0.99, 0.999999}) {
        Tensor logits({2}, {std::log(pt / (1.0 - pt)), 0.0});
        const double fl = focal_loss(logits, 0, 2.0, 2.0);
        CHECK(fl >= 0.0);
        CHECK(fl < prev);
        prev = fl;
    }
    Tensor bad({2}, {std::numeric_limits<double>::quiet_NaN(), 0.0});
    CHECK_THROWS_AS(focal_loss(bad, 0, 2.0, 2.0), NumericError);
}

TEST_CASE("focal loss gradient matches finite differences, incl. the listed point") {
    // the spec's (p_t=0.9, gamma=2, alpha=2) point
    Tensor at_listed({2}, {std::log(9.0), 0.0});
    Tensor g = focal_loss_backward(at_listed, 0, 2.0, 2.0);
    auto loss_listed = [&]() { return focal_loss(at_listed, 0, 2.0, 2.0); };
    CHECK(max_grad_rel_err(g, fd_grad(loss_listed, at_listed)) < 1e-3);

    std::mt19937_64 rng(31);
    for (auto [alpha, gamma] : {std::pair{2.0, 2.0}, {1.0, 0.0}, {0.5, 3.0}}) {
        Tensor logits = Tensor::randn({4}, rng);
        const int target = static_cast<int>(rng() % 4);
        Tensor grad = focal_loss_backward(logits, target, alpha, gamma);
        auto loss = [&, a = alpha, gm = gamma]() { return focal_loss(logits, target, a, gm); };
        CHECK(max_grad_rel_err(grad, fd_grad(loss, logits)) < 1e-3);
    }
}

TEST_CASE("build_model freezes the backbone and sizes the head") {
    AttentionClassifier model = small_model();
    CHECK(model.num_classes() == 4);
    // alphabetical class map
    CHECK(model.class_index("a") == 0);
    CHECK(model.class_index("d") == 3);
    CHECK_THROWS_AS(model.class_index("zebra"), ValidationError);

    // trainable set = projections + two dense layers
    const int d = 12;
    const size_t proj = (4 + 1) * 12 + (6 + 1) * 12 + (8 + 1) * 12 + (12 + 1) * 12;
    const size_t fc1 = (5 * d + 1) * 32;
    const size_t fc2 = (32 + 1) * 4;
    CHECK(model.head().trainable_count() == proj + fc1 + fc2);

    // logits length = num classes
    std::mt19937_64 rng(1);
    Tensor img = Tensor::uniform({3, 32, 32}, rng);
    CHECK(model.forward_logits(img).numel() == 4);

    // unknown tap id
    TapSpec bad;
    bad.tap_points = {"stage1", "stage2", "stage3", "nope"};
    CHECK_THROWS_AS(build_model("toy", small_backbone(), bad, {"a", "b"}, small_config()),
                    ConfigError);
}

TEST_CASE("forward shapes, eval determinism, per-sample independence") {
    AttentionClassifier model = small_model();
    std::mt19937_64 rng(3);
    std::vector<Tensor> batch = {Tensor::uniform({3, 32, 32}, rng),
                                 Tensor::uniform({3, 32, 32}, rng)};
    auto out = model.forward(batch);
    REQUIRE(out.logits.size() == 2);
    REQUIRE(out.attention.size() == 2);
    CHECK(out.logits[0].numel() == 4);
    CHECK(out.attention[0].size() == 4);
    CHECK(out.attention[0][0].attention_map.shape() == std::vector<int>{32, 32});
    CHECK(out.attention[0][1].attention_map.shape() == std::vector<int>{16, 16});
    CHECK(out.attention[0][2].attention_map.shape() == std::vector<int>{8, 8});
    CHECK(out.attention[0][3].attention_map.shape() == std::vector<int>{4, 4});

    // dropout disabled at evaluation: repeated forward identical
    auto again = model.forward(batch);
    for (size_t i = 0; i < 2; ++i)
        CHECK(out.logits[i].checksum() == again.logits[i].checksum());

    // permuting the batch permutes logits identically
    std::vector<Tensor> swapped = {batch[1], batch[0]};
    auto perm = model.forward(swapped);
    CHECK(perm.logits[0].checksum() == out.logits[1].checksum());
    CHECK(perm.logits[1].checksum() == out.logits[0].checksum());

    // wrong resolution
    Tensor wrong = Tensor::uniform({3, 64, 64}, rng);
    CHECK_THROWS_AS(model.forward_logits(wrong), ShapeError);
}

TEST_CASE("attention head gradients match finite differences") {
    AttentionClassifier model = small_model({"a", "b"});
    AttentionHead& head = model.head();
    head.dropout_p = 0.0;  // smooth path for the check

    std::mt19937_64 rng(37);
    std::vector<Tensor> taps = {Tensor::randn({4, 4, 4}, rng), Tensor::randn({6, 4, 4}, rng),
                                Tensor::randn({8, 4, 4}, rng), Tensor::randn({12, 4, 4}, rng)};
    Tensor global = Tensor::randn({12}, rng);
    Tensor probe = Tensor::randn({2}, rng);

    std::vector<const Tensor*> tap_ptrs;
    for (const auto& t : taps) tap_ptrs.push_back(&t);

    auto loss = [&]() {
        return dot(probe, head.forward(tap_ptrs, global, false, nullptr).logits);
    };

    AttentionHead::Cache cache;
    head.forward(tap_ptrs, global, false, nullptr, &cache);
    for (auto* p : head.params()) p->zero_grad();
    std::vector<Tensor> d_taps;
    Tensor d_global;
    head.backward(cache, probe, &d_taps, &d_global);

    for (size_t i = 0; i < taps.size(); ++i)
        CHECK(max_grad_rel_err(d_taps[i], fd_grad(loss, taps[i])) < 1e-3);
    CHECK(max_grad_rel_err(d_global, fd_grad(loss, global)) < 1e-3);
    for (auto* p : head.params())
        CHECK(max_grad_rel_err(p->grad, fd_grad(loss, p->value)) < 1e-3);
}

TEST_CASE("training freezes the backbone and improves the loss") {
    LabeledDataset ds = toy_imbalanced();

    int improved = 0;
    for (uint64_t seed : {1ull, 2ull, 3ull}) {
        TrainConfig cfg = small_config();
        cfg.epochs = 5;
        cfg.batch_size = 16;
        cfg.learning_rate = 3e-3;
        cfg.seed = seed;
        AttentionClassifier model =
            build_model("toy", small_backbone(seed), TapSpec(), ds.classes(), cfg);

        const uint64_t backbone_sum = model.backbone_checksum();
        auto train = make_examples(ds, Split::Train);
        auto dev = make_examples(ds, Split::Dev);
        TrainHistory hist = train_classifier(model, train, dev, cfg);

        REQUIRE(hist.epochs.size() == 5);
        CHECK(model.backbone_checksum() == backbone_sum);
        CHECK(hist.best_epoch >= 0);
        if (hist.epochs.back().train_loss < hist.epochs.front().train_loss) ++improved;
    }
    CHECK(improved >= 2);
}

TEST_CASE("training is deterministic given the seed") {
    LabeledDataset ds = toy_imbalanced(77);
    auto run = [&]() {
        TrainConfig cfg = small_config();
        cfg.epochs = 2;
        cfg.batch_size = 8;
        cfg.seed = 5;
        AttentionClassifier model =
            build_model("toy", small_backbone(5), TapSpec(), ds.classes(), cfg);
        auto train = make_examples(ds, Split::Train);
        auto dev = make_examples(ds, Split::Dev);
        TrainHistory hist = train_classifier(model, train, dev, cfg);
        return std::pair{hist.epochs.back().train_loss, model.head().checksum()};
    };
    auto a = run();
    auto b = run();
    CHECK(a.first == b.first);
    CHECK(a.second == b.second);
}

TEST_CASE("classifier checkpoint round trip") {
    AttentionClassifier model = small_model();
    const auto path = std::filesystem::temp_directory_path() / "styleaug_test_clf.ckpt";
    model.save(path);
    AttentionClassifier loaded = AttentionClassifier::load(path);
    CHECK(loaded.backbone_checksum() == model.backbone_checksum());
    CHECK(loaded.head().checksum() == model.head().checksum());
    CHECK(loaded.class_names() == model.class_names());
    CHECK(loaded.config().dropout_p == model.config().dropout_p);

    std::mt19937_64 rng(9);
    Tensor img = Tensor::uniform({3, 32, 32}, rng);
    CHECK(loaded.forward_logits(img).checksum() == model.forward_logits(img).checksum());
    std::filesystem::remove(path);
}
