#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "styleaug/classifier.hpp"

namespace styleaug {

struct PerClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    size_t support = 0;
    // 0-convention flags: set when the corresponding denominator was zero
    bool precision_zero_div = false;
    bool recall_zero_div = false;
};

struct Metrics {
    double accuracy = 0.0;
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    double macro_f1 = 0.0;
    std::map<std::string, PerClassMetrics> per_class;

    nlohmann::json to_json() const;
    static Metrics from_json(const nlohmann::json& j);
};

// Pure metric math: truth/pred are class indices into class_names. Macro
// values are unweighted means over all classes in the map; zero denominators
// follow the 0-convention and are flagged.
Metrics compute_metrics(const std::vector<int>& truth, const std::vector<int>& pred,
                        const std::vector<std::string>& class_names);

Metrics evaluate(const AttentionClassifier& model, const std::vector<TrainExample>& items);

// ---------------------------------------------------------------------------
// Confidence ranking (per-sample focal loss, the training criterion)
// ---------------------------------------------------------------------------

struct ConfidenceEntry {
    std::string id;
    std::string label;
    int predicted = 0;
    double loss = 0.0;
};

struct ConfidenceRanking {
    std::vector<ConfidenceEntry> most_confident;   // ascending loss
    std::vector<ConfidenceEntry> least_confident;  // descending loss
};

ConfidenceRanking rank_confidence(const AttentionClassifier& model,
                                  const std::vector<TrainExample>& items, size_t k);

std::string example_id(const TrainExample& ex);

// ---------------------------------------------------------------------------
// Attention map export
// ---------------------------------------------------------------------------

// 256-entry low -> high color ramp (dark blue to red); all entries distinct
// so the rendered color identifies its ramp index.
const std::vector<std::array<uint8_t, 3>>& attention_color_ramp();

// Min-max normalizes the map, applies the ramp, nearest-upsamples to the
// target size. Constant maps render as the mid-ramp color.
Image render_attention_overlay(const Tensor& attention_map, int out_h, int out_w);

// Recovers the ramp index of a rendered pixel (exact LUT lookup).
int ramp_index_of(const std::array<uint8_t, 3>& rgb);

// Writes <id>_input.png plus <id>_tap{1..4}.png per item. Returns the file
// paths in write order.
std::vector<std::filesystem::path> export_attention_maps(
    const AttentionClassifier& model, const std::vector<TrainExample>& items,
    const std::filesystem::path& out_dir);

}  // namespace styleaug
