#include "styleaug/balancer.hpp"

#include <cmath>
#include <fstream>
#include <random>

namespace styleaug {

namespace fs = std::filesystem;

size_t AugmentationBudget::total() const {
    size_t n = 0;
    for (const auto& [_, c] : per_class) n += c;
    return n;
}

AugmentationBudget augmentation_budget(const ClassHistogram& hist,
                                       const MajorityMinorityPartition& partition, double p1,
                                       double p2) {
    if (p1 < 0.0 || p1 > 1.0 || p2 < 0.0 || p2 > 1.0)
        throw ValidationError("p1/p2 must be in [0,1], got p1=" + std::to_string(p1) +
                              " p2=" + std::to_string(p2));
    for (const auto& [cls, _] : hist.counts) {
        if (!partition.majority.count(cls) && !partition.minority.count(cls))
            throw ValidationError("partition does not cover class '" + cls + "'");
    }

    AugmentationBudget budget;
    budget.p1 = p1;
    budget.p2 = p2;
    for (const auto& [cls, count] : hist.counts) {
        const double p = partition.majority.count(cls) ? p1 : p2;
        budget.per_class[cls] = static_cast<size_t>(std::floor(p * static_cast<double>(count)));
    }
    return budget;
}

std::vector<std::pair<size_t, size_t>> sample_pairs(size_t class_size, size_t n, uint64_t seed) {
    if (n == 0) return {};
    if (class_size == 0) throw ValidationError("cannot augment empty class");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<size_t> pick(0, class_size - 1);
    std::vector<std::pair<size_t, size_t>> pairs;
    pairs.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        const size_t content = pick(rng);
        const size_t style = pick(rng);
        pairs.emplace_back(content, style);
    }
    return pairs;
}

std::vector<AugmentedItem> generate_augmented_set(const LabeledDataset& ds,
                                                  const StyleTransferEngine& engine,
                                                  const AugmentationBudget& budget, double alpha,
                                                  uint64_t seed, int workers, int image_size) {
    StylizeFn fn = [&engine](const Image& c, const Image& s, double a) {
        return engine.stylize(c, s, a);
    };
    return generate_augmented_set(ds, fn, budget, alpha, seed, workers, image_size);
}

std::vector<AugmentedItem> generate_augmented_set(const LabeledDataset& ds,
                                                  const StylizeFn& stylize,
                                                  const AugmentationBudget& budget, double alpha,
                                                  uint64_t seed, int workers, int image_size) {
    if (alpha < 0.0 || alpha > 1.0)
        throw ValidationError("alpha must be in [0,1], got " + std::to_string(alpha));

    std::vector<AugmentedItem> out;
    for (const auto& [cls, n] : budget.per_class) {  // map order: deterministic
        if (n == 0) continue;
        const auto idx = ds.class_train_indices(cls);
        if (idx.empty()) throw ValidationError("cannot augment empty class '" + cls + "'");

        const uint64_t class_seed = mix_seed(seed, "aug/" + cls);
        const auto pairs = sample_pairs(idx.size(), n, class_seed);

        const size_t base = out.size();
        out.resize(base + n);
        parallel_blocks(n, workers, [&](size_t b0, size_t b1, int) {
            for (size_t i = b0; i < b1; ++i) {
                const auto& [ci, si] = pairs[i];
                const LabeledItem& content = ds.item(idx[ci]);
                const LabeledItem& style = ds.item(idx[si]);
                Image cimg = content.load();
                Image simg = style.load();
                if (image_size > 0) {
                    cimg = resize_image(cimg, image_size, image_size);
                    simg = resize_image(simg, image_size, image_size);
                }
                AugmentedItem item;
                item.image = stylize(cimg, simg, alpha);
                item.label = cls;
                item.content_src = content.id;
                item.style_src = style.id;
                item.alpha = alpha;
                item.seed = class_seed;
                out[base + i] = std::move(item);
            }
        });
    }
    return out;
}

std::filesystem::path write_augmentation_manifest(const std::vector<AugmentedItem>& items,
                                                  const fs::path& out_dir) {
    fs::create_directories(out_dir);
    const fs::path manifest = out_dir / "aug_manifest.csv";
    std::ofstream csv(manifest);
    if (!csv) throw IngestionError("cannot write manifest: " + manifest.string());
    csv << "image,label,content_src,style_src,alpha,seed\n";
    std::map<std::string, size_t> counters;
    for (const auto& item : items) {
        const size_t k = counters[item.label]++;
        const std::string rel =
            "aug/" + item.label + "/aug_" + item.label + "_" + std::to_string(k) + ".png";
        save_png(item.image, out_dir / rel);
        csv << rel << "," << item.label << "," << item.content_src << "," << item.style_src << ","
            << item.alpha << "," << item.seed << "\n";
    }
    return manifest;
}

std::vector<AugmentedItem> load_augmentation_manifest(const fs::path& manifest) {
    std::ifstream in(manifest);
    if (!in) throw StageDependencyError("required artifact missing: " + manifest.string());
    std::string header;
    std::getline(in, header);
    if (header.rfind("image,label,content_src,style_src,alpha,seed", 0) != 0)
        throw FormatError("unexpected manifest header in " + manifest.string());

    const fs::path base = manifest.parent_path();
    std::vector<AugmentedItem> items;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        std::vector<std::string> f;
        std::string cur;
        for (char ch : line) {
            if (ch == ',') {
                f.push_back(cur);
                cur.clear();
            } else if (ch != '\r') {
                cur.push_back(ch);
            }
        }
        f.push_back(cur);
        if (f.size() != 6) throw FormatError("bad manifest row: " + line);
        AugmentedItem item;
        item.image = load_image(base / f[0]);
        item.label = f[1];
        item.content_src = f[2];
        item.style_src = f[3];
        item.alpha = std::stod(f[4]);
        item.seed = std::stoull(f[5]);
        items.push_back(std::move(item));
    }
    return items;
}

}  // namespace styleaug
