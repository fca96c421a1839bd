#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "styleaug/image.hpp"

namespace styleaug {

enum class Split { Train, Dev, Test };

Split split_from_string(const std::string& s);
std::string to_string(Split s);

// One labeled sample. Either a file reference (pixels decoded on demand) or
// an in-memory image (toy data, stylized augmentations).
struct LabeledItem {
    std::string id;
    std::filesystem::path path;  // empty when in-memory
    Image pixels;                // empty when file-backed
    std::string label;
    Split split = Split::Train;
    int height = 0;
    int width = 0;

    bool in_memory() const { return !pixels.empty(); }
    Image load() const;
};

struct ClassHistogram {
    std::map<std::string, size_t> counts;  // train split only

    size_t total() const;
    std::vector<std::string> classes() const;
};

struct MajorityMinorityPartition {
    std::set<std::string> majority;
    std::set<std::string> minority;
};

class LabeledDataset {
public:
    LabeledDataset() = default;
    LabeledDataset(std::vector<LabeledItem> items, std::vector<std::string> classes,
                   std::vector<std::string> warnings = {});

    const std::vector<LabeledItem>& items() const { return items_; }
    const std::vector<std::string>& classes() const { return classes_; }
    const std::vector<std::string>& warnings() const { return warnings_; }

    std::vector<size_t> split_indices(Split s) const;
    std::vector<size_t> class_train_indices(const std::string& label) const;
    size_t size() const { return items_.size(); }
    const LabeledItem& item(size_t i) const { return items_[i]; }

private:
    std::vector<LabeledItem> items_;
    std::vector<std::string> classes_;  // sorted, distinct
    std::vector<std::string> warnings_;
};

// Kaokore-convention loader: a UTF-8 comma-separated labels file with a
// header row; `label_column` picks the task (e.g. "status" or "gender");
// the `set` column must be one of train/dev/test. Image files resolve
// against root, falling back to root/images_256 (the public layout).
LabeledDataset load_dataset(const std::filesystem::path& root,
                            const std::filesystem::path& labels_csv,
                            const std::string& label_column);

// Directory-per-class layout: either root/<class>/*.png (all train) or
// root/{train,dev,test}/<class>/*.png.
LabeledDataset load_image_folder(const std::filesystem::path& root);

ClassHistogram class_histogram(const LabeledDataset& ds);

// Without an override: classes with train count >= median(count) are
// majority, the rest minority. Errors when a side would sit empty.
MajorityMinorityPartition partition_majority_minority(
    const ClassHistogram& hist,
    const std::optional<MajorityMinorityPartition>& override_lists = std::nullopt);

// Synthetic imbalanced dataset: each class is a shape recipe (content cue)
// drawn over a randomized texture/palette background (style nuisance).
struct ToyClassSpec {
    size_t count = 0;       // train items
    std::string shape;      // circle | square | triangle | cross | ring | diamond
    std::string palette;    // warm | cool | earth | pastel | mono
};

LabeledDataset make_toy_dataset(const std::map<std::string, ToyClassSpec>& spec, int image_size,
                                uint64_t seed);

// Materializes a dataset to `root` as images plus a Kaokore-style labels.csv
// (columns image,label,set). Returns the labels file path.
std::filesystem::path materialize_dataset(const LabeledDataset& ds,
                                          const std::filesystem::path& root);

}  // namespace styleaug
