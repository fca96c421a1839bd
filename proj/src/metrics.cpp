#include "styleaug/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace styleaug {

using nlohmann::json;

json Metrics::to_json() const {
    json j;
    j["accuracy"] = accuracy;
    j["macro_precision"] = macro_precision;
    j["macro_recall"] = macro_recall;
    j["macro_f1"] = macro_f1;
    json pc = json::object();
    for (const auto& [cls, m] : per_class) {
        pc[cls] = {{"precision", m.precision},
                   {"recall", m.recall},
                   {"f1", m.f1},
                   {"support", m.support},
                   {"precision_zero_div", m.precision_zero_div},
                   {"recall_zero_div", m.recall_zero_div}};
    }
    j["per_class"] = pc;
    return j;
}

Metrics Metrics::from_json(const json& j) {
    Metrics m;
    m.accuracy = j.at("accuracy").get<double>();
    m.macro_precision = j.at("macro_precision").get<double>();
    m.macro_recall = j.at("macro_recall").get<double>();
    m.macro_f1 = j.at("macro_f1").get<double>();
    for (const auto& [cls, v] : j.at("per_class").items()) {
        PerClassMetrics pm;
        pm.precision = v.at("precision").get<double>();
        pm.recall = v.at("recall").get<double>();
        pm.f1 = v.at("f1").get<double>();
        pm.support = v.at("support").get<size_t>();
        pm.precision_zero_div = v.at("precision_zero_div").get<bool>();
        pm.recall_zero_div = v.at("recall_zero_div").get<bool>();
        m.per_class[cls] = pm;
    }
    return m;
}

Metrics compute_metrics(const std::vector<int>& truth, const std::vector<int>& pred,
                        const std::vector<std::string>& class_names) {
    if (truth.empty() || truth.size() != pred.size())
        throw ValidationError("compute_metrics: empty or mismatched truth/pred");
    const int C = static_cast<int>(class_names.size());
    std::vector<std::vector<size_t>> confusion(C, std::vector<size_t>(C, 0));
    for (size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] < 0 || truth[i] >= C || pred[i] < 0 || pred[i] >= C)
            throw ValidationError("compute_metrics: class index out of range");
        ++confusion[truth[i]][pred[i]];
    }

    Metrics m;
    size_t diag = 0;
    for (int c = 0; c < C; ++c) diag += confusion[c][c];
    m.accuracy = static_cast<double>(diag) / static_cast<double>(truth.size());

    for (int c = 0; c < C; ++c) {
        size_t tp = confusion[c][c], fp = 0, fn = 0, support = 0;
        for (int o = 0; o < C; ++o) {
            if (o != c) {
                fp += confusion[o][c];
                fn += confusion[c][o];
            }
            support += confusion[c][o];
        }
        PerClassMetrics pm;
        pm.support = support;
        if (tp + fp > 0) {
            pm.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        } else {
            pm.precision_zero_div = true;
        }
        if (tp + fn > 0) {
            pm.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
        } else {
            pm.recall_zero_div = true;
        }
        pm.f1 = (pm.precision + pm.recall) > 0
                    ? 2.0 * pm.precision * pm.recall / (pm.precision + pm.recall)
                    : 0.0;
        m.per_class[class_names[c]] = pm;

        m.macro_precision += pm.precision;
        m.macro_recall += pm.recall;
        m.macro_f1 += pm.f1;
    }
    m.macro_precision /= C;
    m.macro_recall /= C;
    m.macro_f1 /= C;
    return m;
}

Metrics evaluate(const AttentionClassifier& model, const std::vector<TrainExample>& items) {
    if (items.empty()) throw ValidationError("evaluate: no items");
    std::vector<int> truth(items.size()), pred(items.size());
    for (size_t i = 0; i < items.size(); ++i) truth[i] = model.class_index(items[i].label());
    parallel_blocks(items.size(), model.config().workers, [&](size_t b0, size_t b1, int) {
        for (size_t i = b0; i < b1; ++i) {
            Image img = items[i].load();
            const int size = model.input_size();
            if (img.height != size || img.width != size) img = resize_image(img, size, size);
            pred[i] = model.predict(image_to_tensor(img));
        }
    });
    return compute_metrics(truth, pred, model.class_names());
}

// ---------------------------------------------------------------------------
// Confidence ranking
// ---------------------------------------------------------------------------

std::string example_id(const TrainExample& ex) {
    if (ex.item) return ex.item->id;
    return "aug(" + ex.aug->content_src + "+" + ex.aug->style_src + ")";
}

ConfidenceRanking rank_confidence(const AttentionClassifier& model,
                                  const std::vector<TrainExample>& items, size_t k) {
    if (k > items.size())
        throw ValidationError("rank_confidence: k=" + std::to_string(k) + " exceeds item count " +
                              std::to_string(items.size()));
    std::vector<ConfidenceEntry> entries(items.size());
    const double alpha = model.config().focal_alpha;
    const double gamma = model.config().focal_gamma;
    parallel_blocks(items.size(), model.config().workers, [&](size_t b0, size_t b1, int) {
        for (size_t i = b0; i < b1; ++i) {
            Image img = items[i].load();
            const int size = model.input_size();
            if (img.height != size || img.width != size) img = resize_image(img, size, size);
            const Tensor logits = model.forward_logits(image_to_tensor(img));
            const int target = model.class_index(items[i].label());
            ConfidenceEntry e;
            e.id = example_id(items[i]);
            e.label = items[i].label();
            e.loss = focal_loss(logits, target, alpha, gamma);
            int best = 0;
            for (size_t j = 1; j < logits.numel(); ++j)
                if (logits[j] > logits[best]) best = static_cast<int>(j);
            e.predicted = best;
            entries[i] = std::move(e);
        }
    });

    std::sort(entries.begin(), entries.end(), [](const ConfidenceEntry& a,
                                                 const ConfidenceEntry& b) {
        if (a.loss != b.loss) return a.loss < b.loss;
        return a.id < b.id;  // total order: deterministic tie-break
    });

    ConfidenceRanking out;
    out.most_confident.assign(entries.begin(), entries.begin() + k);
    out.least_confident.assign(entries.rbegin(), entries.rbegin() + k);
    return out;
}

// ---------------------------------------------------------------------------
// Attention export
// ---------------------------------------------------------------------------

const std::vector<std::array<uint8_t, 3>>& attention_color_ramp() {
    static const std::vector<std::array<uint8_t, 3>> lut = [] {
        // dark blue -> blue -> cyan -> green -> yellow -> red
        const std::array<std::array<double, 3>, 6> stops = {{{0.0, 0.0, 0.35},
                                                             {0.0, 0.0, 1.0},
                                                             {0.0, 1.0, 1.0},
                                                             {0.0, 0.85, 0.25},
                                                             {1.0, 1.0, 0.0},
                                                             {1.0, 0.0, 0.0}}};
        std::vector<std::array<uint8_t, 3>> table(256);
        for (int i = 0; i < 256; ++i) {
            const double t = i / 255.0 * (stops.size() - 1);
            const int s = std::min<int>(static_cast<int>(t), stops.size() - 2);
            const double f = t - s;
            for (int c = 0; c < 3; ++c) {
                const double v = stops[s][c] * (1.0 - f) + stops[s + 1][c] * f;
                table[i][c] = static_cast<uint8_t>(std::lround(v * 255.0));
            }
        }
        return table;
    }();
    return lut;
}

int ramp_index_of(const std::array<uint8_t, 3>& rgb) {
    const auto& lut = attention_color_ramp();
    for (int i = 0; i < 256; ++i)
        if (lut[i] == rgb) return i;
    return -1;
}

Image render_attention_overlay(const Tensor& attention_map, int out_h, int out_w) {
    if (attention_map.ndim() != 2)
        throw ShapeError("attention map must be {H,W}, got " + attention_map.shape_str());
    const int h = attention_map.dim(0), w = attention_map.dim(1);
    double lo = attention_map[0], hi = attention_map[0];
    for (size_t i = 1; i < attention_map.numel(); ++i) {
        lo = std::min(lo, attention_map[i]);
        hi = std::max(hi, attention_map[i]);
    }
    const double range = hi - lo;
    const auto& lut = attention_color_ramp();

    Image out;
    out.height = out_h;
    out.width = out_w;
    out.rgb.resize(static_cast<size_t>(out_h) * out_w * 3);
    for (int y = 0; y < out_h; ++y) {
        const int sy = std::min(h - 1, y * h / out_h);
        for (int x = 0; x < out_w; ++x) {
            const int sx = std::min(w - 1, x * w / out_w);
            const double v = attention_map[static_cast<size_t>(sy) * w + sx];
            const int idx =
                range > 0 ? static_cast<int>(std::lround((v - lo) / range * 255.0)) : 128;
            const auto& c = lut[idx];
            const size_t p = (static_cast<size_t>(y) * out_w + x) * 3;
            out.rgb[p] = c[0];
            out.rgb[p + 1] = c[1];
            out.rgb[p + 2] = c[2];
        }
    }
    return out;
}

std::vector<std::filesystem::path> export_attention_maps(
    const AttentionClassifier& model, const std::vector<TrainExample>& items,
    const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    std::vector<std::filesystem::path> written;
    for (const auto& ex : items) {
        Image img = ex.load();
        const int size = model.input_size();
        if (img.height != size || img.width != size) img = resize_image(img, size, size);

        auto out = model.forward({image_to_tensor(img)});
        std::string id = example_id(ex);
        std::replace(id.begin(), id.end(), '/', '_');
        const auto dot = id.rfind(".png");
        if (dot != std::string::npos) id.resize(dot);

        const auto input_path = out_dir / (id + "_input.png");
        save_png(img, input_path);
        written.push_back(input_path);
        for (size_t t = 0; t < out.attention[0].size(); ++t) {
            const Image overlay =
                render_attention_overlay(out.attention[0][t].attention_map, size, size);
            const auto path = out_dir / (id + "_tap" + std::to_string(t + 1) + ".png");
            save_png(overlay, path);
            written.push_back(path);
        }
    }
    return written;
}

}  // namespace styleaug
