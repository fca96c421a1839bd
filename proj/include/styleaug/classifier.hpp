#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "styleaug/balancer.hpp"
#include "styleaug/dataset.hpp"
#include "styleaug/styletransfer.hpp"

namespace styleaug {

// Which backbone activations feed the attention modules. The toy backbone
// exposes taps stage1..stage4; the global point is the GAP descriptor of the
// deepest layer.
struct TapSpec {
    std::vector<std::string> tap_points = {"stage1", "stage2", "stage3", "stage4"};
    std::string global_point = "gap";
};

struct TrainConfig {
    int batch_size = 64;
    double learning_rate = 1e-4;
    int epochs = 20;
    double dropout_p = 0.23;
    double focal_alpha = 2.0;  // honored as printed; > 1 is unconventional
    double focal_gamma = 2.0;
    double weight_decay = 1e-4;
    int workers = 8;
    uint64_t seed = 0;
    int head_width = 512;
    int image_size = 64;
    // Frozen-backbone features are cached across epochs when they fit this
    // budget; otherwise they are recomputed per batch. Results are identical
    // either way.
    double feature_cache_gb = 1.5;

    void validate() const;
};

struct AttentionOutput {
    Tensor descriptor;     // {d}
    Tensor attention_map;  // {h,w}, non-negative, sums to 1
};

// Dot-product attention between an already-projected local map {d,h,w} and
// the global descriptor {d}: softmax over positions, attended sum.
AttentionOutput spatial_attention(const Tensor& local_proj, const Tensor& global_vec);

// Gradients w.r.t. the projected local map and the global vector.
void spatial_attention_backward(const Tensor& local_proj, const Tensor& global_vec,
                                const Tensor& d_descriptor, Tensor* d_local, Tensor* d_global);

// FL = -alpha * (1 - p_t)^gamma * log(p_t), batch reduction = mean.
double focal_loss(const Tensor& logits, int target, double alpha, double gamma);
Tensor focal_loss_backward(const Tensor& logits, int target, double alpha, double gamma,
                           double upstream = 1.0);
double focal_loss_batch(const std::vector<Tensor>& logits, const std::vector<int>& targets,
                        double alpha, double gamma);

// Trainable part: per-tap 1x1 projections to the global dimension, dot-product
// attention, then concat(descriptors, global) -> dense -> relu -> dropout ->
// dense(num_classes).
struct AttentionHead {
    std::vector<nn::Conv2d> projections;
    nn::Dense fc1;
    nn::Dense fc2;
    double dropout_p = 0.23;

    struct Cache {
        std::vector<nn::ConvCache> proj;
        std::vector<Tensor> projected;
        std::vector<Tensor> weights;  // flat softmax weights per tap
        Tensor global_vec;
        Tensor head_in;
        Tensor pre_relu;
        Tensor mask;  // empty in eval mode
        Tensor dropped;
    };

    struct Output {
        Tensor logits;
        std::vector<AttentionOutput> attention;
    };

    Output forward(const std::vector<const Tensor*>& taps, const Tensor& global_vec,
                   bool train_mode, std::mt19937_64* dropout_rng, Cache* cache = nullptr) const;

    // Accumulates parameter gradients; optionally emits gradients w.r.t. the
    // tap inputs and the global descriptor (used by gradient checks; training
    // discards them because the backbone is frozen).
    void backward(const Cache& cache, const Tensor& d_logits, std::vector<Tensor>* d_taps,
                  Tensor* d_global);

    std::vector<nn::Param*> params();
    std::vector<const nn::Param*> params() const;
    size_t trainable_count() const;
    uint64_t checksum() const { return nn::params_checksum(params()); }
};

class AttentionClassifier {
public:
    AttentionClassifier() = default;

    struct BatchOutput {
        std::vector<Tensor> logits;                           // per item {C}
        std::vector<std::vector<AttentionOutput>> attention;  // per item, per tap
    };

    // Eval-mode forward (dropout off); items are processed independently.
    BatchOutput forward(const std::vector<Tensor>& image_batch) const;
    Tensor forward_logits(const Tensor& image) const;

    int predict(const Tensor& image) const;

    const std::vector<std::string>& class_names() const { return class_names_; }
    int num_classes() const { return static_cast<int>(class_names_.size()); }
    int class_index(const std::string& label) const;
    int input_size() const { return cfg_.image_size; }
    const TrainConfig& config() const { return cfg_; }
    const TapSpec& tap_spec() const { return taps_; }
    const std::string& backbone_id() const { return backbone_id_; }

    const StageConvEncoder& backbone() const { return backbone_; }
    AttentionHead& head() { return head_; }
    const AttentionHead& head() const { return head_; }
    uint64_t backbone_checksum() const { return backbone_.checksum(); }

    void save(const std::filesystem::path& path) const;
    static AttentionClassifier load(const std::filesystem::path& path);

    friend AttentionClassifier build_model(const std::string& backbone_id,
                                           const StageConvEncoder& backbone, const TapSpec& taps,
                                           const std::vector<std::string>& class_names,
                                           const TrainConfig& cfg);

    // Backbone taps + GAP descriptor for one input image (frozen, const).
    struct Features {
        std::vector<Tensor> taps;
        Tensor global_vec;
    };
    Features extract_features(const Tensor& image) const;

private:
    std::string backbone_id_;
    StageConvEncoder backbone_;
    TapSpec taps_;
    std::vector<int> tap_layer_;  // pyramid indices for each tap point
    AttentionHead head_;
    std::vector<std::string> class_names_;  // sorted; index = position
    TrainConfig cfg_;
};

// Marks the backbone non-trainable and wires the head. The tap ids must
// exist on the backbone; class indices follow alphabetical label order.
AttentionClassifier build_model(const std::string& backbone_id, const StageConvEncoder& backbone,
                                const TapSpec& taps, const std::vector<std::string>& class_names,
                                const TrainConfig& cfg);

// One training example: either an original dataset item or a stylized
// augmentation (both carry a class label).
struct TrainExample {
    const LabeledItem* item = nullptr;
    const AugmentedItem* aug = nullptr;

    const std::string& label() const { return item ? item->label : aug->label; }
    Image load() const { return item ? item->load() : aug->image; }
};

struct EpochRecord {
    double train_loss = 0.0;
    double dev_accuracy = 0.0;
    double dev_macro_f1 = 0.0;
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
    int best_epoch = -1;
    double best_dev_accuracy = 0.0;
};

// Adam over head parameters only (focal loss + L2); keeps the best-dev-
// accuracy parameters in the returned model. Deterministic given cfg.seed.
TrainHistory train_classifier(AttentionClassifier& model,
                              const std::vector<TrainExample>& train_items,
                              const std::vector<TrainExample>& dev_items, const TrainConfig& cfg);

std::vector<TrainExample> make_examples(const LabeledDataset& ds, Split split,
                                        const std::vector<AugmentedItem>* aug = nullptr);

}  // namespace styleaug
