#include "styleaug/classifier.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>

#include "styleaug/checkpoint.hpp"

namespace styleaug {

void TrainConfig::validate() const {
    if (batch_size <= 0) throw ValidationError("batch_size must be positive");
    if (learning_rate <= 0) throw ValidationError("learning_rate must be positive");
    if (epochs <= 0) throw ValidationError("epochs must be positive");
    if (dropout_p < 0.0 || dropout_p >= 1.0) throw ValidationError("dropout_p must be in [0,1)");
    if (focal_alpha <= 0 || focal_gamma < 0)
        throw ValidationError("focal_alpha must be > 0 and focal_gamma >= 0");
    if (weight_decay < 0) throw ValidationError("weight_decay must be >= 0");
    if (workers <= 0) throw ValidationError("workers must be positive");
    if (head_width <= 0) throw ValidationError("head_width must be positive");
    if (image_size < 8) throw ValidationError("image_size too small");
}

using VecMap = Eigen::Map<Eigen::VectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

AttentionOutput spatial_attention(const Tensor& local_proj, const Tensor& global_vec) {
    if (local_proj.ndim() != 3 || local_proj.dim(0) != global_vec.dim(0))
        throw ShapeError("spatial_attention: projected local " + local_proj.shape_str() +
                         " does not match global dimension " + global_vec.shape_str());
    const int d = local_proj.dim(0), h = local_proj.dim(1), w = local_proj.dim(2);
    const size_t npos = static_cast<size_t>(h) * w;

    // per-channel planes are contiguous; accumulate scores row-wise
    Tensor scores({h, w});
    VecMap s(scores.data(), npos);
    for (int c = 0; c < d; ++c)
        s += global_vec[c] * ConstVecMap(local_proj.data() + c * npos, npos);
    Tensor weights = nn::softmax(scores);

    AttentionOutput out;
    out.descriptor = Tensor::uninit({d});
    ConstVecMap wv(weights.data(), npos);
    for (int c = 0; c < d; ++c)
        out.descriptor[c] = ConstVecMap(local_proj.data() + c * npos, npos).dot(wv);
    out.attention_map = std::move(weights);
    return out;
}

// Shared backward core; `weights` must be the forward softmax output.
static void attention_backward_core(const Tensor& local_proj, const Tensor& global_vec,
                                    const Tensor& weights, const Tensor& d_descriptor,
                                    Tensor* d_local, Tensor* d_global) {
    const int d = local_proj.dim(0);
    const size_t npos = weights.numel();
    ConstVecMap wv(weights.data(), npos);

    // a_p = <dD, P_p>; ds = softmax backward of (w . a)
    Eigen::VectorXd a = Eigen::VectorXd::Zero(npos);
    for (int c = 0; c < d; ++c)
        a += d_descriptor[c] * ConstVecMap(local_proj.data() + c * npos, npos);
    const double wa = wv.dot(a);
    Eigen::VectorXd ds = wv.cwiseProduct(a.array().matrix() -
                                         Eigen::VectorXd::Constant(npos, wa));

    if (d_local) {
        *d_local = Tensor::uninit(local_proj.shape());
        for (int c = 0; c < d; ++c) {
            VecMap row(d_local->data() + c * npos, npos);
            row = d_descriptor[c] * wv + global_vec[c] * ds;
        }
    }
    if (d_global) {
        *d_global = Tensor::uninit(global_vec.shape());
        for (int c = 0; c < d; ++c)
            (*d_global)[c] = ConstVecMap(local_proj.data() + c * npos, npos).dot(ds);
    }
}

void spatial_attention_backward(const Tensor& local_proj, const Tensor& global_vec,
                                const Tensor& d_descriptor, Tensor* d_local, Tensor* d_global) {
    const AttentionOutput fwd = spatial_attention(local_proj, global_vec);
    attention_backward_core(local_proj, global_vec, fwd.attention_map, d_descriptor, d_local,
                            d_global);
}

double focal_loss(const Tensor& logits, int target, double alpha, double gamma) {
    if (!all_finite(logits)) throw NumericError("focal_loss: non-finite logits");
    if (target < 0 || target >= static_cast<int>(logits.numel()))
        throw ValidationError("focal_loss: target out of range");
    const Tensor p = nn::softmax(logits);
    const double pt = std::max(p[target], 1e-12);
    return -alpha * std::pow(1.0 - pt, gamma) * std::log(pt);
}

Tensor focal_loss_backward(const Tensor& logits, int target, double alpha, double gamma,
                           double upstream) {
    const Tensor p = nn::softmax(logits);
    const double pt = std::max(p[target], 1e-12);
    // dFL/dpt; the gamma term vanishes at gamma == 0
    double dpt = -alpha / pt * std::pow(1.0 - pt, gamma);
    if (gamma > 0.0)
        dpt += alpha * gamma * std::pow(1.0 - pt, gamma - 1.0) * std::log(pt);
    Tensor g(logits.shape());
    for (size_t j = 0; j < logits.numel(); ++j) {
        const double dj = (static_cast<int>(j) == target ? 1.0 : 0.0);
        g[j] = upstream * dpt * pt * (dj - p[j]);
    }
    return g;
}

double focal_loss_batch(const std::vector<Tensor>& logits, const std::vector<int>& targets,
                        double alpha, double gamma) {
    if (logits.empty() || logits.size() != targets.size())
        throw ValidationError("focal_loss_batch: empty or mismatched batch");
    double acc = 0.0;
    for (size_t i = 0; i < logits.size(); ++i)
        acc += focal_loss(logits[i], targets[i], alpha, gamma);
    return acc / static_cast<double>(logits.size());
}

// ---------------------------------------------------------------------------
// AttentionHead
// ---------------------------------------------------------------------------

AttentionHead::Output AttentionHead::forward(const std::vector<const Tensor*>& taps,
                                             const Tensor& global_vec, bool train_mode,
                                             std::mt19937_64* dropout_rng, Cache* cache) const {
    if (taps.size() != projections.size())
        throw ShapeError("head expects " + std::to_string(projections.size()) + " taps");
    const int d = global_vec.dim(0);

    Output out;
    std::vector<Tensor> descriptors;
    if (cache) {
        cache->proj.resize(taps.size());
        cache->projected.resize(taps.size());
        cache->weights.resize(taps.size());
        cache->global_vec = global_vec;
    }
    for (size_t i = 0; i < taps.size(); ++i) {
        Tensor projected =
            projections[i].forward(*taps[i], cache ? &cache->proj[i] : nullptr);
        if (cache) {
            cache->projected[i] = std::move(projected);
            AttentionOutput att = spatial_attention(cache->projected[i], global_vec);
            cache->weights[i] = att.attention_map;
            descriptors.push_back(att.descriptor);
            out.attention.push_back(std::move(att));
        } else {
            AttentionOutput att = spatial_attention(projected, global_vec);
            descriptors.push_back(att.descriptor);
            out.attention.push_back(std::move(att));
        }
    }

    Tensor head_in({static_cast<int>(taps.size() + 1) * d});
    size_t off = 0;
    for (const auto& desc : descriptors) {
        std::copy(desc.data(), desc.data() + d, head_in.data() + off);
        off += d;
    }
    std::copy(global_vec.data(), global_vec.data() + d, head_in.data() + off);

    Tensor pre_relu = fc1.forward(head_in);
    Tensor hidden = nn::relu(pre_relu);
    Tensor mask;
    if (train_mode && dropout_p > 0.0) {
        if (!dropout_rng) throw ValidationError("train-mode forward needs a dropout rng");
        mask = nn::dropout_mask(hidden.shape(), dropout_p, *dropout_rng);
        for (size_t i = 0; i < hidden.numel(); ++i) hidden[i] *= mask[i];
    }
    out.logits = fc2.forward(hidden);

    if (cache) {
        cache->head_in = std::move(head_in);
        cache->pre_relu = std::move(pre_relu);
        cache->mask = std::move(mask);
        cache->dropped = std::move(hidden);
    }
    return out;
}

void AttentionHead::backward(const Cache& cache, const Tensor& d_logits,
                             std::vector<Tensor>* d_taps, Tensor* d_global) {
    const int d = cache.global_vec.dim(0);
    const size_t n_taps = projections.size();

    Tensor d_hidden = fc2.backward(cache.dropped, d_logits, true, true);
    if (!cache.mask.empty())
        for (size_t i = 0; i < d_hidden.numel(); ++i) d_hidden[i] *= cache.mask[i];
    Tensor d_pre = nn::relu_backward(cache.pre_relu, d_hidden);
    Tensor d_head_in = fc1.backward(cache.head_in, d_pre, true, true);

    if (d_taps) d_taps->assign(n_taps, Tensor());
    Tensor d_global_acc({d});
    std::copy(d_head_in.data() + n_taps * d, d_head_in.data() + (n_taps + 1) * d,
              d_global_acc.data());

    for (size_t i = 0; i < n_taps; ++i) {
        Tensor d_desc({d});
        std::copy(d_head_in.data() + i * d, d_head_in.data() + (i + 1) * d, d_desc.data());

        Tensor d_proj, d_g_att;
        attention_backward_core(cache.projected[i], cache.global_vec, cache.weights[i], d_desc,
                                &d_proj, &d_g_att);
        for (int c = 0; c < d; ++c) d_global_acc[c] += d_g_att[c];

        const bool want_dx = d_taps != nullptr;
        Tensor dx = projections[i].backward(cache.proj[i], d_proj, want_dx, true);
        if (d_taps) (*d_taps)[i] = std::move(dx);
    }
    if (d_global) *d_global = std::move(d_global_acc);
}

std::vector<nn::Param*> AttentionHead::params() {
    std::vector<nn::Param*> ps;
    for (auto& p : projections) {
        ps.push_back(&p.weight);
        ps.push_back(&p.bias);
    }
    ps.push_back(&fc1.weight);
    ps.push_back(&fc1.bias);
    ps.push_back(&fc2.weight);
    ps.push_back(&fc2.bias);
    return ps;
}

std::vector<const nn::Param*> AttentionHead::params() const {
    std::vector<const nn::Param*> ps;
    for (const auto& p : projections) {
        ps.push_back(&p.weight);
        ps.push_back(&p.bias);
    }
    ps.push_back(&fc1.weight);
    ps.push_back(&fc1.bias);
    ps.push_back(&fc2.weight);
    ps.push_back(&fc2.bias);
    return ps;
}

size_t AttentionHead::trainable_count() const {
    size_t n = 0;
    for (const auto* p : params()) n += p->value.numel();
    return n;
}

// ---------------------------------------------------------------------------
// AttentionClassifier
// ---------------------------------------------------------------------------

AttentionClassifier build_model(const std::string& backbone_id, const StageConvEncoder& backbone,
                                const TapSpec& taps, const std::vector<std::string>& class_names,
                                const TrainConfig& cfg) {
    cfg.validate();
    if (class_names.size() < 2) throw ValidationError("classifier needs at least 2 classes");
    if (taps.tap_points.size() != 4)
        throw ConfigError("tap spec must name exactly 4 taps, got " +
                          std::to_string(taps.tap_points.size()));
    if (taps.global_point != "gap")
        throw ConfigError("unsupported global point '" + taps.global_point + "'");

    AttentionClassifier model;
    model.backbone_id_ = backbone_id;
    model.backbone_ = backbone;
    model.taps_ = taps;
    model.cfg_ = cfg;
    model.class_names_ = class_names;
    std::sort(model.class_names_.begin(), model.class_names_.end());

    const auto names = backbone.tap_names();
    int prev = -1;
    for (const auto& point : taps.tap_points) {
        auto it = std::find(names.begin(), names.end(), point);
        if (it == names.end())
            throw ConfigError("tap '" + point + "' not found on backbone '" + backbone_id + "'");
        const int layer = static_cast<int>(it - names.begin());
        if (layer <= prev) throw ConfigError("taps must be strictly ordered by depth");
        prev = layer;
        model.tap_layer_.push_back(layer);
    }

    const int d = backbone.spec().channels.back();
    std::mt19937_64 rng(mix_seed(cfg.seed, "head-init"));
    for (size_t i = 0; i < model.tap_layer_.size(); ++i) {
        const int c_in = backbone.spec().channels[model.tap_layer_[i]];
        model.head_.projections.emplace_back("head.proj" + std::to_string(i + 1), c_in, d, 1, 1,
                                             nn::PadMode::Zero);
        model.head_.projections.back().init_params(rng);
    }
    const int concat = static_cast<int>(model.tap_layer_.size() + 1) * d;
    model.head_.fc1 = nn::Dense("head.fc1", concat, cfg.head_width);
    model.head_.fc1.init_params(rng);
    model.head_.fc2 =
        nn::Dense("head.fc2", cfg.head_width, static_cast<int>(model.class_names_.size()));
    model.head_.fc2.init_params(rng);
    model.head_.dropout_p = cfg.dropout_p;
    return model;
}

AttentionClassifier::Features AttentionClassifier::extract_features(const Tensor& image) const {
    if (image.dim(1) != cfg_.image_size || image.dim(2) != cfg_.image_size)
        throw ShapeError("classifier expects " + std::to_string(cfg_.image_size) + "x" +
                         std::to_string(cfg_.image_size) + " inputs, got " + image.shape_str());
    const FeaturePyramid pyr = backbone_.forward(image);
    Features f;
    for (int layer : tap_layer_) f.taps.push_back(pyr.layers[layer]);
    f.global_vec = nn::global_avg_pool(pyr.layers.back());
    return f;
}

Tensor AttentionClassifier::forward_logits(const Tensor& image) const {
    const Features f = extract_features(image);
    std::vector<const Tensor*> taps;
    for (const auto& t : f.taps) taps.push_back(&t);
    return head_.forward(taps, f.global_vec, false, nullptr).logits;
}

AttentionClassifier::BatchOutput AttentionClassifier::forward(
    const std::vector<Tensor>& image_batch) const {
    BatchOutput out;
    out.logits.resize(image_batch.size());
    out.attention.resize(image_batch.size());
    parallel_blocks(image_batch.size(), cfg_.workers, [&](size_t b0, size_t b1, int) {
        for (size_t i = b0; i < b1; ++i) {
            const Features f = extract_features(image_batch[i]);
            std::vector<const Tensor*> taps;
            for (const auto& t : f.taps) taps.push_back(&t);
            AttentionHead::Output o = head_.forward(taps, f.global_vec, false, nullptr);
            out.logits[i] = std::move(o.logits);
            out.attention[i] = std::move(o.attention);
        }
    });
    return out;
}

int AttentionClassifier::predict(const Tensor& image) const {
    const Tensor logits = forward_logits(image);
    int best = 0;
    for (size_t j = 1; j < logits.numel(); ++j)
        if (logits[j] > logits[best]) best = static_cast<int>(j);
    return best;
}

int AttentionClassifier::class_index(const std::string& label) const {
    auto it = std::lower_bound(class_names_.begin(), class_names_.end(), label);
    if (it == class_names_.end() || *it != label)
        throw ValidationError("unknown label '" + label + "'");
    return static_cast<int>(it - class_names_.begin());
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

std::vector<TrainExample> make_examples(const LabeledDataset& ds, Split split,
                                        const std::vector<AugmentedItem>* aug) {
    std::vector<TrainExample> out;
    for (const auto& item : ds.items())
        if (item.split == split) out.push_back({&item, nullptr});
    if (aug)
        for (const auto& a : *aug) out.push_back({nullptr, &a});
    return out;
}

namespace {

AttentionClassifier::Features features_for(const AttentionClassifier& model,
                                           const TrainExample& ex, int image_size) {
    Image img = ex.load();
    if (img.height != image_size || img.width != image_size)
        img = resize_image(img, image_size, image_size);
    return model.extract_features(image_to_tensor(img));
}

size_t features_bytes(const AttentionClassifier& model) {
    const auto& spec = model.backbone().spec();
    size_t count = static_cast<size_t>(spec.channels.back());
    int side = model.input_size();
    for (size_t i = 0; i < spec.channels.size(); ++i) {
        side /= spec.strides[i];
        count += static_cast<size_t>(spec.channels[i]) * side * side;
    }
    return count * sizeof(double);
}

}  // namespace

TrainHistory train_classifier(AttentionClassifier& model,
                              const std::vector<TrainExample>& train_items,
                              const std::vector<TrainExample>& dev_items,
                              const TrainConfig& cfg) {
    cfg.validate();
    if (train_items.empty()) throw ValidationError("train set is empty");

    std::vector<int> targets;
    targets.reserve(train_items.size());
    for (const auto& ex : train_items) targets.push_back(model.class_index(ex.label()));
    std::vector<int> dev_targets;
    for (const auto& ex : dev_items) dev_targets.push_back(model.class_index(ex.label()));

    auto master_params = model.head().params();
    nn::Adam opt(master_params, cfg.learning_rate, cfg.weight_decay);
    const int workers = std::max(1, cfg.workers);
    std::vector<AttentionHead> slots(static_cast<size_t>(workers), model.head());

    // The backbone is frozen, so tap features are constants per item; cache
    // them across epochs when they fit the budget.
    const size_t total_items = train_items.size() + dev_items.size();
    const bool cache_features = static_cast<double>(features_bytes(model)) * total_items <=
                                cfg.feature_cache_gb * 1e9;
    std::vector<AttentionClassifier::Features> train_feats, dev_feats;
    if (cache_features) {
        train_feats.resize(train_items.size());
        dev_feats.resize(dev_items.size());
        parallel_blocks(train_items.size(), workers, [&](size_t b0, size_t b1, int) {
            for (size_t i = b0; i < b1; ++i)
                train_feats[i] = features_for(model, train_items[i], cfg.image_size);
        });
        parallel_blocks(dev_items.size(), workers, [&](size_t b0, size_t b1, int) {
            for (size_t i = b0; i < b1; ++i)
                dev_feats[i] = features_for(model, dev_items[i], cfg.image_size);
        });
    }

    const size_t n = train_items.size();
    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;

    TrainHistory history;
    std::vector<nn::Param> best;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::mt19937_64 shuffle_rng(mix_seed(cfg.seed, "shuffle/" + std::to_string(epoch)));
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        double epoch_loss = 0.0;
        size_t batch_index = 0;
        for (size_t start = 0; start < n; start += cfg.batch_size, ++batch_index) {
            const size_t bsz = std::min<size_t>(cfg.batch_size, n - start);

            for (auto& slot : slots) {
                auto dst = slot.params();
                for (size_t i = 0; i < master_params.size(); ++i)
                    dst[i]->value = master_params[i]->value;
            }

            std::vector<double> losses(bsz, 0.0);
            parallel_blocks(bsz, workers, [&](size_t b0, size_t b1, int slot_id) {
                auto& head = slots[slot_id];
                for (size_t b = b0; b < b1; ++b) {
                    const size_t idx = order[start + b];
                    AttentionClassifier::Features local;
                    if (!cache_features)
                        local = features_for(model, train_items[idx], cfg.image_size);
                    const AttentionClassifier::Features& f =
                        cache_features ? train_feats[idx] : local;
                    std::vector<const Tensor*> taps;
                    for (const auto& t : f.taps) taps.push_back(&t);

                    std::mt19937_64 dropout_rng(mix_seed(
                        cfg.seed, "dropout/" + std::to_string(epoch) + "/" + std::to_string(idx)));
                    AttentionHead::Cache cache;
                    AttentionHead::Output o =
                        head.forward(taps, f.global_vec, true, &dropout_rng, &cache);
                    losses[b] = focal_loss(o.logits, targets[idx], cfg.focal_alpha,
                                           cfg.focal_gamma);
                    const Tensor d_logits =
                        focal_loss_backward(o.logits, targets[idx], cfg.focal_alpha,
                                            cfg.focal_gamma, 1.0 / static_cast<double>(bsz));
                    head.backward(cache, d_logits, nullptr, nullptr);
                }
            });

            double batch_loss = 0.0;
            for (double l : losses) batch_loss += l;
            batch_loss /= static_cast<double>(bsz);
            if (!std::isfinite(batch_loss))
                throw NumericError("non-finite loss at epoch " + std::to_string(epoch) +
                                   " batch " + std::to_string(batch_index));
            epoch_loss += batch_loss * static_cast<double>(bsz);

            opt.zero_grad();
            for (auto& slot : slots) {
                auto src = slot.params();
                for (size_t i = 0; i < master_params.size(); ++i) {
                    for (size_t j = 0; j < master_params[i]->grad.numel(); ++j)
                        master_params[i]->grad[j] += src[i]->grad[j];
                    src[i]->zero_grad();
                }
            }
            opt.step();
        }

        EpochRecord rec;
        rec.train_loss = epoch_loss / static_cast<double>(n);

        if (!dev_items.empty()) {
            std::vector<int> preds(dev_items.size());
            parallel_blocks(dev_items.size(), workers, [&](size_t b0, size_t b1, int) {
                for (size_t i = b0; i < b1; ++i) {
                    AttentionClassifier::Features local;
                    if (!cache_features)
                        local = features_for(model, dev_items[i], cfg.image_size);
                    const AttentionClassifier::Features& f =
                        cache_features ? dev_feats[i] : local;
                    std::vector<const Tensor*> taps;
                    for (const auto& t : f.taps) taps.push_back(&t);
                    const Tensor logits =
                        model.head().forward(taps, f.global_vec, false, nullptr).logits;
                    int best = 0;
                    for (size_t j = 1; j < logits.numel(); ++j)
                        if (logits[j] > logits[best]) best = static_cast<int>(j);
                    preds[i] = best;
                }
            });
            size_t correct = 0;
            for (size_t i = 0; i < preds.size(); ++i)
                if (preds[i] == dev_targets[i]) ++correct;
            rec.dev_accuracy = static_cast<double>(correct) / dev_items.size();

            // macro F1 over the model's class map
            const int C = model.num_classes();
            std::vector<double> tp(C, 0), fp(C, 0), fn(C, 0);
            for (size_t i = 0; i < preds.size(); ++i) {
                if (preds[i] == dev_targets[i])
                    tp[preds[i]] += 1;
                else {
                    fp[preds[i]] += 1;
                    fn[dev_targets[i]] += 1;
                }
            }
            double f1_sum = 0.0;
            for (int c = 0; c < C; ++c) {
                const double denom = 2 * tp[c] + fp[c] + fn[c];
                f1_sum += denom > 0 ? 2 * tp[c] / denom : 0.0;
            }
            rec.dev_macro_f1 = f1_sum / C;
        }
        history.epochs.push_back(rec);

        if (history.best_epoch < 0 || rec.dev_accuracy > history.best_dev_accuracy) {
            history.best_epoch = epoch;
            history.best_dev_accuracy = rec.dev_accuracy;
            best.clear();
            for (const auto* p : master_params) {
                nn::Param snap;
                snap.value = p->value;
                best.push_back(std::move(snap));
            }
        }
    }

    if (!best.empty()) {
        for (size_t i = 0; i < master_params.size(); ++i)
            master_params[i]->value = best[i].value;
    }
    return history;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

void AttentionClassifier::save(const std::filesystem::path& path) const {
    nlohmann::json meta;
    meta["backbone_id"] = backbone_id_;
    meta["encoder_spec"] = {{"channels", backbone_.spec().channels},
                            {"strides", backbone_.spec().strides},
                            {"ksize", backbone_.spec().ksize}};
    meta["tap_points"] = taps_.tap_points;
    meta["global_point"] = taps_.global_point;
    meta["class_names"] = class_names_;
    meta["train_config"] = {{"batch_size", cfg_.batch_size},
                            {"learning_rate", cfg_.learning_rate},
                            {"epochs", cfg_.epochs},
                            {"dropout_p", cfg_.dropout_p},
                            {"focal_alpha", cfg_.focal_alpha},
                            {"focal_gamma", cfg_.focal_gamma},
                            {"weight_decay", cfg_.weight_decay},
                            {"workers", cfg_.workers},
                            {"seed", cfg_.seed},
                            {"head_width", cfg_.head_width},
                            {"image_size", cfg_.image_size}};

    std::vector<std::pair<std::string, const Tensor*>> tensors;
    for (const auto* p : backbone_.params()) tensors.emplace_back(p->name, &p->value);
    for (const auto* p : head_.params()) tensors.emplace_back(p->name, &p->value);
    save_checkpoint(path, "classifier", meta, tensors);
}

AttentionClassifier AttentionClassifier::load(const std::filesystem::path& path) {
    const LoadedCheckpoint ckpt = load_checkpoint(path, "classifier");
    EncoderSpec spec;
    spec.channels = ckpt.meta.at("encoder_spec").at("channels").get<std::vector<int>>();
    spec.strides = ckpt.meta.at("encoder_spec").at("strides").get<std::vector<int>>();
    spec.ksize = ckpt.meta.at("encoder_spec").at("ksize").get<int>();

    TrainConfig cfg;
    const auto& tc = ckpt.meta.at("train_config");
    cfg.batch_size = tc.at("batch_size").get<int>();
    cfg.learning_rate = tc.at("learning_rate").get<double>();
    cfg.epochs = tc.at("epochs").get<int>();
    cfg.dropout_p = tc.at("dropout_p").get<double>();
    cfg.focal_alpha = tc.at("focal_alpha").get<double>();
    cfg.focal_gamma = tc.at("focal_gamma").get<double>();
    cfg.weight_decay = tc.at("weight_decay").get<double>();
    cfg.workers = tc.at("workers").get<int>();
    cfg.seed = tc.at("seed").get<uint64_t>();
    cfg.head_width = tc.at("head_width").get<int>();
    cfg.image_size = tc.at("image_size").get<int>();

    TapSpec taps;
    taps.tap_points = ckpt.meta.at("tap_points").get<std::vector<std::string>>();
    taps.global_point = ckpt.meta.at("global_point").get<std::string>();

    StageConvEncoder backbone(spec);
    for (auto* p : backbone.params()) p->value = ckpt.tensor(p->name);

    AttentionClassifier model =
        build_model(ckpt.meta.at("backbone_id").get<std::string>(), backbone, taps,
                    ckpt.meta.at("class_names").get<std::vector<std::string>>(), cfg);
    for (auto* p : model.head_.params()) p->value = ckpt.tensor(p->name);
    return model;
}

}  // namespace styleaug
