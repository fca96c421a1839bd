#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "styleaug/dataset.hpp"
#include "styleaug/styletransfer.hpp"

namespace styleaug {

// Per-class synthetic sample counts derived from (histogram, partition, p1, p2):
// floor(p1 * count) for majority classes, floor(p2 * count) for minority.
struct AugmentationBudget {
    double p1 = 0.0;
    double p2 = 0.0;
    std::map<std::string, size_t> per_class;

    size_t total() const;
};

struct AugmentedItem {
    Image image;
    std::string label;
    std::string content_src;  // item id of the content image
    std::string style_src;    // item id of the style image (same class)
    double alpha = 1.0;
    uint64_t seed = 0;
};

AugmentationBudget augmentation_budget(const ClassHistogram& hist,
                                       const MajorityMinorityPartition& partition, double p1,
                                       double p2);

// n (content, style) index pairs drawn uniformly with replacement; content
// may equal style. Deterministic given the seed.
std::vector<std::pair<size_t, size_t>> sample_pairs(size_t class_size, size_t n, uint64_t seed);

using StylizeFn =
    std::function<Image(const Image& content, const Image& style, double alpha)>;

// Stylizes budgeted pairs per class; labels are inherited from the content
// item (content and style always share the class). Items are produced in
// pair order regardless of worker parallelism.
std::vector<AugmentedItem> generate_augmented_set(const LabeledDataset& ds,
                                                  const StyleTransferEngine& engine,
                                                  const AugmentationBudget& budget, double alpha,
                                                  uint64_t seed, int workers = 1,
                                                  int image_size = 0);

// Test seam: same contract with the stylization call injected.
std::vector<AugmentedItem> generate_augmented_set(const LabeledDataset& ds,
                                                  const StylizeFn& stylize,
                                                  const AugmentationBudget& budget, double alpha,
                                                  uint64_t seed, int workers = 1,
                                                  int image_size = 0);

// Writes images under <out>/aug/<class>/ plus aug_manifest.csv with columns
// image,label,content_src,style_src,alpha,seed. Returns the manifest path.
std::filesystem::path write_augmentation_manifest(const std::vector<AugmentedItem>& items,
                                                  const std::filesystem::path& out_dir);

// Loads a manifest back as in-memory train items for classifier training.
std::vector<AugmentedItem> load_augmentation_manifest(const std::filesystem::path& manifest);

}  // namespace styleaug
