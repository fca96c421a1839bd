#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "styleaug/balancer.hpp"

using namespace styleaug;

namespace {

ClassHistogram hist_abcd() {
    ClassHistogram h;
    h.counts = {{"A", 1000}, {"B", 800}, {"C", 200}, {"D", 100}};
    return h;
}

MajorityMinorityPartition part_abcd() {
    MajorityMinorityPartition p;
    p.majority = {"A", "B"};
    p.minority = {"C", "D"};
    return p;
}

LabeledDataset mini_toy() {
    return make_toy_dataset({{"circle", {5, "circle", "warm"}}, {"square", {3, "square", "cool"}}},
                            32, 41);
}

// Marker stylize hook: records call count, returns the content image with the
// first byte tagged so outputs are distinguishable.
struct CountingStylize {
    size_t calls = 0;
    Image operator()(const Image& c, const Image&, double) {
        ++calls;
        Image out = c;
        out.rgb[0] = static_cast<uint8_t>(calls & 0xff);
        return out;
    }
};

}  // namespace

TEST_CASE("budget hand example") {
    AugmentationBudget b = augmentation_budget(hist_abcd(), part_abcd(), 0.5, 0.2);
    CHECK(b.per_class.at("A") == 500);
    CHECK(b.per_class.at("B") == 400);
    CHECK(b.per_class.at("C") == 40);
    CHECK(b.per_class.at("D") == 20);
    CHECK(b.total() == 960);
}

TEST_CASE("budget floors and zero case") {
    ClassHistogram h;
    h.counts = {{"C", 7}, {"E", 50}};
    MajorityMinorityPartition p;
    p.majority = {"E"};
    p.minority = {"C"};
    AugmentationBudget b = augmentation_budget(h, p, 0.0, 0.5);
    CHECK(b.per_class.at("C") == 3);  // floor(0.5*7)
    CHECK(b.per_class.at("E") == 0);

    AugmentationBudget zero = augmentation_budget(hist_abcd(), part_abcd(), 0.0, 0.0);
    CHECK(zero.total() == 0);
}

TEST_CASE("budget validates proportions and coverage") {
    CHECK_THROWS_AS(augmentation_budget(hist_abcd(), part_abcd(), 1.2, 0.0), ValidationError);
    CHECK_THROWS_AS(augmentation_budget(hist_abcd(), part_abcd(), 0.0, -0.1), ValidationError);
    MajorityMinorityPartition incomplete;
    incomplete.majority = {"A"};
    incomplete.minority = {"C", "D"};
    CHECK_THROWS_AS(augmentation_budget(hist_abcd(), incomplete, 0.5, 0.5), ValidationError);
}

TEST_CASE("budget matches a brute-force recomputation on random instances") {
    std::mt19937_64 rng(1234);
    std::uniform_int_distribution<int> count_dist(1, 2000);
    std::uniform_real_distribution<double> p_dist(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        ClassHistogram h;
        MajorityMinorityPartition p;
        const int n_classes = 2 + static_cast<int>(rng() % 5);
        for (int c = 0; c < n_classes; ++c) {
            const std::string name = "cls" + std::to_string(c);
            h.counts[name] = static_cast<size_t>(count_dist(rng));
            if (c % 2 == 0)
                p.majority.insert(name);
            else
                p.minority.insert(name);
        }
        const double p1 = p_dist(rng), p2 = p_dist(rng);
        AugmentationBudget b = augmentation_budget(h, p, p1, p2);
        AugmentationBudget b2 = augmentation_budget(h, p, p1, p2);
        for (const auto& [cls, count] : h.counts) {
            const double prop = p.majority.count(cls) ? p1 : p2;
            const size_t expect = static_cast<size_t>(std::floor(prop * count));
            CHECK(b.per_class.at(cls) == expect);
            CHECK(b2.per_class.at(cls) == expect);  // determinism
        }
    }
}

TEST_CASE("budget monotonicity in p1 and p2") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> p_dist(0.0, 1.0);
    for (int trial = 0; trial < 30; ++trial) {
        double p1a = p_dist(rng), p1b = p_dist(rng);
        if (p1a > p1b) std::swap(p1a, p1b);
        double p2 = p_dist(rng);
        AugmentationBudget lo = augmentation_budget(hist_abcd(), part_abcd(), p1a, p2);
        AugmentationBudget hi = augmentation_budget(hist_abcd(), part_abcd(), p1b, p2);
        for (const auto& cls : {"A", "B"}) CHECK(lo.per_class.at(cls) <= hi.per_class.at(cls));
        for (const auto& cls : {"C", "D"}) CHECK(lo.per_class.at(cls) == hi.per_class.at(cls));
    }
}

TEST_CASE("equal proportions keep the distribution shape") {
    for (double p : {0.25, 0.5, 1.0}) {
        AugmentationBudget b = augmentation_budget(hist_abcd(), part_abcd(), p, p);
        for (const auto& [cls, count] : hist_abcd().counts) {
            CHECK(b.per_class.at(cls) ==
                  static_cast<size_t>(std::floor(p * static_cast<double>(count))));
        }
    }
}

TEST_CASE("sample_pairs basics") {
    CHECK(sample_pairs(4, 0, 1).empty());
    CHECK_THROWS_WITH_AS(sample_pairs(0, 3, 1), doctest::Contains("empty class"),
                         ValidationError);

    const auto forced = sample_pairs(1, 3, 5);
    REQUIRE(forced.size() == 3);
    for (const auto& [c, s] : forced) {
        CHECK(c == 0);
        CHECK(s == 0);
    }

    const auto a = sample_pairs(10, 100, 7);
    const auto b = sample_pairs(10, 100, 7);
    CHECK(a == b);
}

TEST_CASE("pair sampling is uniform over the content slot") {
    const auto pairs = sample_pairs(4, 10000, 0);
    size_t freq[4] = {0, 0, 0, 0};
    for (const auto& [c, _] : pairs) ++freq[c];
    for (size_t i = 0; i < 4; ++i) {
        CHECK(freq[i] >= 2400);  // within 4% of 2500
        CHECK(freq[i] <= 2600);
    }
}

TEST_CASE("generate_augmented_set construction and class preservation") {
    LabeledDataset ds = mini_toy();
    AugmentationBudget budget;
    budget.per_class = {{"circle", 2}, {"square", 1}};

    CountingStylize counter;
    StylizeFn fn = [&counter](const Image& c, const Image& s, double a) {
        return counter(c, s, a);
    };
    auto items = generate_augmented_set(ds, fn, budget, 1.0, 3, 1);
    REQUIRE(items.size() == 3);
    std::multiset<std::string> labels;
    for (const auto& it : items) labels.insert(it.label);
    CHECK(labels == std::multiset<std::string>{"circle", "circle", "square"});
    CHECK(counter.calls == 3);

    // provenance stays inside the item's own class and the train split
    for (const auto& it : items) {
        bool content_ok = false, style_ok = false;
        for (size_t i = 0; i < ds.size(); ++i) {
            const auto& src = ds.item(i);
            if (src.id == it.content_src) {
                CHECK(src.label == it.label);
                CHECK(src.split == Split::Train);
                content_ok = true;
            }
            if (src.id == it.style_src) {
                CHECK(src.label == it.label);
                CHECK(src.split == Split::Train);
                style_ok = true;
            }
        }
        CHECK(content_ok);
        CHECK(style_ok);
    }
}

TEST_CASE("zero budget performs no stylization") {
    LabeledDataset ds = mini_toy();
    AugmentationBudget budget;
    budget.per_class = {{"circle", 0}, {"square", 0}};
    CountingStylize counter;
    StylizeFn fn = [&counter](const Image& c, const Image& s, double a) {
        return counter(c, s, a);
    };
    auto items = generate_augmented_set(ds, fn, budget, 1.0, 3, 1);
    CHECK(items.empty());
    CHECK(counter.calls == 0);
}

TEST_CASE("budget for an absent class errors") {
    LabeledDataset ds = mini_toy();
    AugmentationBudget budget;
    budget.per_class = {{"hexagon", 2}};
    StylizeFn fn = [](const Image& c, const Image&, double) { return c; };
    CHECK_THROWS_AS(generate_augmented_set(ds, fn, budget, 1.0, 3, 1), ValidationError);
}

TEST_CASE("generation is deterministic and worker-count independent") {
    LabeledDataset ds = mini_toy();
    AugmentationBudget budget;
    budget.per_class = {{"circle", 4}, {"square", 2}};
    // stylize hook mixes both inputs so pair identity matters
    StylizeFn fn = [](const Image& c, const Image& s, double) {
        Image out = c;
        for (size_t i = 0; i < out.rgb.size(); ++i)
            out.rgb[i] = static_cast<uint8_t>((out.rgb[i] + s.rgb[i]) / 2);
        return out;
    };
    auto a = generate_augmented_set(ds, fn, budget, 1.0, 11, 1);
    auto b = generate_augmented_set(ds, fn, budget, 1.0, 11, 4);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].image.checksum() == b[i].image.checksum());
        CHECK(a[i].content_src == b[i].content_src);
        CHECK(a[i].style_src == b[i].style_src);
    }
}

TEST_CASE("manifest round trip") {
    LabeledDataset ds = mini_toy();
    AugmentationBudget budget;
    budget.per_class = {{"circle", 2}, {"square", 1}};
    StylizeFn fn = [](const Image& c, const Image&, double) { return c; };
    auto items = generate_augmented_set(ds, fn, budget, 0.8, 13, 1);

    const auto dir = std::filesystem::temp_directory_path() / "styleaug_manifest_test";
    std::filesystem::remove_all(dir);
    const auto manifest = write_augmentation_manifest(items, dir);
    CHECK(manifest.filename() == "aug_manifest.csv");

    auto loaded = load_augmentation_manifest(manifest);
    REQUIRE(loaded.size() == items.size());
    for (size_t i = 0; i < items.size(); ++i) {
        CHECK(loaded[i].label == items[i].label);
        CHECK(loaded[i].content_src == items[i].content_src);
        CHECK(loaded[i].style_src == items[i].style_src);
        CHECK(loaded[i].alpha == doctest::Approx(items[i].alpha));
        CHECK(loaded[i].seed == items[i].seed);
        CHECK(loaded[i].image.checksum() == items[i].image.checksum());
    }
    std::filesystem::remove_all(dir);

    CHECK_THROWS_AS(load_augmentation_manifest("/nonexistent/aug_manifest.csv"),
                    StageDependencyError);
}
