#include "styleaug/styletransfer.hpp"

#include <cmath>

#include "styleaug/checkpoint.hpp"

namespace styleaug {

ChannelStats channel_stats(const Tensor& fmap, double eps) {
    if (fmap.ndim() != 3) throw ShapeError("channel_stats expects {C,H,W}, got " + fmap.shape_str());
    const int c = fmap.dim(0);
    const size_t spatial = static_cast<size_t>(fmap.dim(1)) * fmap.dim(2);
    if (spatial == 0) throw ShapeError("channel_stats needs at least one spatial position");

    ChannelStats st;
    st.eps = eps;
    st.mean = Tensor({c});
    st.std = Tensor({c});
    for (int ch = 0; ch < c; ++ch) {
        const double* p = fmap.data() + ch * spatial;
        double mean = 0.0;
        for (size_t i = 0; i < spatial; ++i) mean += p[i];
        mean /= static_cast<double>(spatial);
        double var = 0.0;
        for (size_t i = 0; i < spatial; ++i) {
            const double d = p[i] - mean;
            var += d * d;
        }
        var /= static_cast<double>(spatial);
        st.mean[ch] = mean;
        st.std[ch] = std::sqrt(var + eps);
    }
    return st;
}

Tensor adain(const Tensor& c_feat, const Tensor& s_feat, double eps) {
    if (c_feat.dim(0) != s_feat.dim(0))
        throw ShapeError("adain channel mismatch: " + c_feat.shape_str() + " vs " +
                         s_feat.shape_str());
    const ChannelStats cs = channel_stats(c_feat, eps);
    const ChannelStats ss = channel_stats(s_feat, eps);

    const int c = c_feat.dim(0);
    const size_t spatial = static_cast<size_t>(c_feat.dim(1)) * c_feat.dim(2);
    Tensor out(c_feat.shape());
    for (int ch = 0; ch < c; ++ch) {
        const double scale = ss.std[ch] / cs.std[ch];
        const double shift = ss.mean[ch] - scale * cs.mean[ch];
        const double* src = c_feat.data() + ch * spatial;
        double* dst = out.data() + ch * spatial;
        for (size_t i = 0; i < spatial; ++i) dst[i] = scale * src[i] + shift;
    }
    return out;
}

void adain_backward(const Tensor& c_feat, const Tensor& s_feat, const Tensor& d_out, Tensor* d_c,
                    Tensor* d_s, double eps) {
    if (!d_out.same_shape(c_feat))
        throw ShapeError("adain_backward: upstream gradient shape mismatch");
    const ChannelStats cs = channel_stats(c_feat, eps);
    const ChannelStats ss = channel_stats(s_feat, eps);

    const int c = c_feat.dim(0);
    const size_t n = static_cast<size_t>(c_feat.dim(1)) * c_feat.dim(2);
    const size_t m = static_cast<size_t>(s_feat.dim(1)) * s_feat.dim(2);

    if (d_c) *d_c = Tensor(c_feat.shape());
    if (d_s) *d_s = Tensor(s_feat.shape());

    for (int ch = 0; ch < c; ++ch) {
        const double* cp = c_feat.data() + ch * n;
        const double* gp = d_out.data() + ch * n;
        const double mu_c = cs.mean[ch], sd_c = cs.std[ch];
        const double mu_s = ss.mean[ch], sd_s = ss.std[ch];

        double gsum = 0.0, gdot = 0.0;  // sum(G), sum(G * (c - mu_c))
        for (size_t i = 0; i < n; ++i) {
            gsum += gp[i];
            gdot += gp[i] * (cp[i] - mu_c);
        }

        if (d_c) {
            double* dcp = d_c->data() + ch * n;
            const double scale = sd_s / sd_c;
            const double var_term = gdot / (static_cast<double>(n) * sd_c * sd_c);
            for (size_t i = 0; i < n; ++i) {
                dcp[i] = scale * (gp[i] - gsum / static_cast<double>(n) -
                                  (cp[i] - mu_c) * var_term);
            }
        }
        if (d_s) {
            const double* sp = s_feat.data() + ch * m;
            double* dsp = d_s->data() + ch * m;
            const double coef = gdot / sd_c / (static_cast<double>(m) * sd_s);
            for (size_t k = 0; k < m; ++k) {
                dsp[k] = coef * (sp[k] - mu_s) + gsum / static_cast<double>(m);
            }
        }
    }
}

double content_loss(const Tensor& stylized_feat, const Tensor& target_feat) {
    if (!stylized_feat.same_shape(target_feat))
        throw ShapeError("content_loss shape mismatch: " + stylized_feat.shape_str() + " vs " +
                         target_feat.shape_str());
    const size_t n = stylized_feat.numel();
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double d = stylized_feat[i] - target_feat[i];
        acc += d * d;
    }
    return acc / static_cast<double>(n);
}

void content_loss_backward(const Tensor& stylized_feat, const Tensor& target_feat, double upstream,
                           Tensor* d_stylized, Tensor* d_target) {
    const size_t n = stylized_feat.numel();
    const double k = 2.0 * upstream / static_cast<double>(n);
    if (d_stylized && d_stylized->numel() != n) *d_stylized = Tensor(stylized_feat.shape());
    if (d_target && d_target->numel() != n) *d_target = Tensor(target_feat.shape());
    for (size_t i = 0; i < n; ++i) {
        const double d = k * (stylized_feat[i] - target_feat[i]);
        if (d_stylized) (*d_stylized)[i] += d;
        if (d_target) (*d_target)[i] -= d;
    }
}

double style_loss(const FeaturePyramid& stylized, const FeaturePyramid& style, double eps) {
    if (stylized.depth() != style.depth())
        throw ValidationError("style_loss layer-count mismatch: " +
                              std::to_string(stylized.depth()) + " vs " +
                              std::to_string(style.depth()));
    double loss = 0.0;
    for (size_t i = 0; i < stylized.depth(); ++i) {
        const Tensor& a = stylized.layers[i];
        const Tensor& b = style.layers[i];
        if (a.dim(0) != b.dim(0))
            throw ShapeError("style_loss channel mismatch at layer " + std::to_string(i));
        const ChannelStats sa = channel_stats(a, eps);
        const ChannelStats sb = channel_stats(b, eps);
        const int c = a.dim(0);
        double mu_term = 0.0, sd_term = 0.0;
        for (int ch = 0; ch < c; ++ch) {
            const double dm = sa.mean[ch] - sb.mean[ch];
            const double ds = sa.std[ch] - sb.std[ch];
            mu_term += dm * dm;
            sd_term += ds * ds;
        }
        loss += (mu_term + sd_term) / static_cast<double>(c);
    }
    return loss;
}

std::vector<Tensor> style_loss_backward(const FeaturePyramid& stylized,
                                        const FeaturePyramid& style, double upstream, double eps) {
    std::vector<Tensor> grads;
    grads.reserve(stylized.depth());
    for (size_t i = 0; i < stylized.depth(); ++i) {
        const Tensor& a = stylized.layers[i];
        const Tensor& b = style.layers[i];
        const ChannelStats sa = channel_stats(a, eps);
        const ChannelStats sb = channel_stats(b, eps);
        const int c = a.dim(0);
        const size_t n = static_cast<size_t>(a.dim(1)) * a.dim(2);
        Tensor g(a.shape());
        for (int ch = 0; ch < c; ++ch) {
            const double dmu = upstream * 2.0 * (sa.mean[ch] - sb.mean[ch]) /
                               static_cast<double>(c) / static_cast<double>(n);
            const double dsd = upstream * 2.0 * (sa.std[ch] - sb.std[ch]) /
                               static_cast<double>(c) / (static_cast<double>(n) * sa.std[ch]);
            const double* ap = a.data() + ch * n;
            double* gp = g.data() + ch * n;
            for (size_t j = 0; j < n; ++j) {
                gp[j] = dmu + dsd * (ap[j] - sa.mean[ch]);
            }
        }
        grads.push_back(std::move(g));
    }
    return grads;
}

// ---------------------------------------------------------------------------
// Encoder / decoder
// ---------------------------------------------------------------------------

StageConvEncoder::StageConvEncoder(const EncoderSpec& spec) : spec_(spec) {
    if (spec.channels.size() != spec.strides.size() || spec.channels.empty())
        throw ConfigError("encoder spec needs matching non-empty channels/strides");
    int in_ch = 3;
    for (size_t i = 0; i < spec.channels.size(); ++i) {
        convs_.emplace_back("encoder.stage" + std::to_string(i + 1), in_ch, spec.channels[i],
                            spec.ksize, spec.strides[i], nn::PadMode::Zero);
        in_ch = spec.channels[i];
    }
}

std::vector<std::string> StageConvEncoder::tap_names() const {
    std::vector<std::string> names;
    for (size_t i = 0; i < convs_.size(); ++i) names.push_back("stage" + std::to_string(i + 1));
    return names;
}

FeaturePyramid StageConvEncoder::forward(const Tensor& image, EncoderCache* cache) const {
    if (image.ndim() != 3 || image.dim(0) != 3)
        throw ShapeError("encoder expects a 3-channel image tensor, got " + image.shape_str());
    const int stride = total_stride();
    if (image.dim(1) % stride != 0 || image.dim(2) % stride != 0)
        throw ShapeError("encoder input " + image.shape_str() +
                         " must have spatial size divisible by " + std::to_string(stride));

    FeaturePyramid pyr;
    if (cache) {
        cache->conv.resize(convs_.size());
        cache->pre_relu.resize(convs_.size());
    }
    Tensor x = image;
    for (size_t i = 0; i < convs_.size(); ++i) {
        Tensor pre = convs_[i].forward(x, cache ? &cache->conv[i] : nullptr);
        Tensor tap = nn::relu(pre);
        if (cache) cache->pre_relu[i] = std::move(pre);
        x = tap;
        pyr.layers.push_back(std::move(tap));
    }
    return pyr;
}

Tensor StageConvEncoder::backward(const EncoderCache& cache, const std::vector<Tensor>& d_taps,
                                  bool want_dx, bool want_param_grads) {
    if (d_taps.size() != convs_.size())
        throw ShapeError("encoder backward expects one gradient slot per tap");
    Tensor carry;  // gradient arriving at the current stage's ReLU output
    for (int i = static_cast<int>(convs_.size()) - 1; i >= 0; --i) {
        Tensor total;
        if (!carry.empty() && !d_taps[i].empty()) {
            total = carry;
            for (size_t j = 0; j < total.numel(); ++j) total[j] += d_taps[i][j];
        } else if (!carry.empty()) {
            total = std::move(carry);
        } else if (!d_taps[i].empty()) {
            total = d_taps[i];
        } else {
            total = Tensor(cache.pre_relu[i].shape());
        }
        Tensor d_pre = nn::relu_backward(cache.pre_relu[i], total);
        const bool need_dx = i > 0 || want_dx;
        carry = convs_[i].backward(cache.conv[i], d_pre, need_dx, want_param_grads);
    }
    return carry;
}

void StageConvEncoder::init_params(std::mt19937_64& rng) {
    for (auto& c : convs_) c.init_params(rng);
}

std::vector<nn::Param*> StageConvEncoder::params() {
    std::vector<nn::Param*> ps;
    for (auto& c : convs_) {
        ps.push_back(&c.weight);
        ps.push_back(&c.bias);
    }
    return ps;
}

std::vector<const nn::Param*> StageConvEncoder::params() const {
    std::vector<const nn::Param*> ps;
    for (const auto& c : convs_) {
        ps.push_back(&c.weight);
        ps.push_back(&c.bias);
    }
    return ps;
}

MirrorDecoder::MirrorDecoder(const EncoderSpec& enc_spec) {
    const auto& ch = enc_spec.channels;
    const int L = static_cast<int>(ch.size());
    for (int k = 0; k < L - 1; ++k) {
        const int i = L - 1 - k;  // encoder stage being inverted
        convs_.emplace_back("decoder.block" + std::to_string(k + 1), ch[i], ch[i - 1],
                            enc_spec.ksize, 1, nn::PadMode::Reflect);
    }
    convs_.emplace_back("decoder.out", ch[0], 3, enc_spec.ksize, 1, nn::PadMode::Reflect);
    strides_ = enc_spec.strides;
}

Tensor MirrorDecoder::forward(const Tensor& content_shaped, DecoderCache* cache) const {
    const int L = static_cast<int>(convs_.size());
    if (cache) {
        cache->conv.resize(L);
        cache->pre_relu.resize(L - 1);
    }
    Tensor x = content_shaped;
    for (int k = 0; k < L - 1; ++k) {
        const int i = L - 1 - k;
        Tensor pre = convs_[k].forward(x, cache ? &cache->conv[k] : nullptr);
        x = nn::relu(pre);
        if (cache) cache->pre_relu[k] = std::move(pre);
        if (strides_[i] == 2) x = nn::upsample_nearest2x(x);
    }
    if (strides_[0] == 2) x = nn::upsample_nearest2x(x);
    return convs_[L - 1].forward(x, cache ? &cache->conv[L - 1] : nullptr);
}

Tensor MirrorDecoder::backward(const DecoderCache& cache, const Tensor& d_out, bool want_dx,
                               bool want_param_grads) {
    const int L = static_cast<int>(convs_.size());
    Tensor d = convs_[L - 1].backward(cache.conv[L - 1], d_out, true, want_param_grads);
    if (strides_[0] == 2) d = nn::upsample_nearest2x_backward(d);
    for (int k = L - 2; k >= 0; --k) {
        const int i = L - 1 - k;
        if (strides_[i] == 2) d = nn::upsample_nearest2x_backward(d);
        d = nn::relu_backward(cache.pre_relu[k], d);
        const bool need_dx = k > 0 || want_dx;
        d = convs_[k].backward(cache.conv[k], d, need_dx, want_param_grads);
    }
    return d;
}

void MirrorDecoder::init_params(std::mt19937_64& rng) {
    for (auto& c : convs_) c.init_params(rng);
}

std::vector<nn::Param*> MirrorDecoder::params() {
    std::vector<nn::Param*> ps;
    for (auto& c : convs_) {
        ps.push_back(&c.weight);
        ps.push_back(&c.bias);
    }
    return ps;
}

std::vector<const nn::Param*> MirrorDecoder::params() const {
    std::vector<const nn::Param*> ps;
    for (const auto& c : convs_) {
        ps.push_back(&c.weight);
        ps.push_back(&c.bias);
    }
    return ps;
}

// ---------------------------------------------------------------------------
// Engine
// ---------------------------------------------------------------------------

Image StyleTransferEngine::stylize(const Image& content, const Image& style, double alpha) const {
    if (alpha < 0.0 || alpha > 1.0)
        throw ValidationError("alpha must be in [0,1], got " + std::to_string(alpha));
    if (!decoder_trained)
        throw StageDependencyError("stylize requires a trained decoder (run train-style)");

    const Tensor ct = image_to_tensor(content);
    const Tensor st = image_to_tensor(style);
    const Tensor c = encoder.forward(ct).content_feature();
    const Tensor s = encoder.forward(st).content_feature();

    Tensor t = adain(c, s, eps);
    Tensor t_alpha(c.shape());
    for (size_t i = 0; i < t.numel(); ++i) t_alpha[i] = alpha * t[i] + (1.0 - alpha) * c[i];

    const Tensor out = decoder.forward(t_alpha);
    return tensor_to_image(out);
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

namespace {

Tensor item_tensor(const LabeledItem& item, int size) {
    Image img = item.load();
    if (img.height != size || img.width != size) img = resize_image(img, size, size);
    return image_to_tensor(img);
}

void sync_param_values(std::vector<nn::Param*>& master, std::vector<StyleTransferEngine>& slots,
                       bool encoder_too) {
    for (auto& slot : slots) {
        auto dec = slot.decoder.params();
        auto dst = encoder_too ? slot.encoder.params() : std::vector<nn::Param*>{};
        dst.insert(dst.end(), dec.begin(), dec.end());
        for (size_t i = 0; i < master.size(); ++i) dst[i]->value = master[i]->value;
    }
}

void reduce_grads(std::vector<nn::Param*>& master, std::vector<StyleTransferEngine>& slots,
                  bool encoder_too) {
    for (auto& slot : slots) {
        auto dec = slot.decoder.params();
        auto src = encoder_too ? slot.encoder.params() : std::vector<nn::Param*>{};
        src.insert(src.end(), dec.begin(), dec.end());
        for (size_t i = 0; i < master.size(); ++i) {
            for (size_t j = 0; j < master[i]->grad.numel(); ++j)
                master[i]->grad[j] += src[i]->grad[j];
            src[i]->zero_grad();
        }
    }
}

void check_train_pre(const LabeledDataset& ds, const StyleTrainConfig& cfg) {
    if (cfg.iterations <= 0)
        throw ValidationError("iterations must be > 0, got " + std::to_string(cfg.iterations));
    if (ds.split_indices(Split::Train).empty())
        throw ValidationError("train split is empty");
}

}  // namespace

std::vector<double> pretrain_encoder(StyleTransferEngine& engine, const LabeledDataset& ds,
                                     const StyleTrainConfig& cfg) {
    check_train_pre(ds, cfg);
    const auto train_idx = ds.split_indices(Split::Train);
    std::mt19937_64 rng(mix_seed(cfg.seed, "encoder-pretrain"));
    std::uniform_int_distribution<size_t> pick(0, train_idx.size() - 1);

    auto master_params = engine.encoder.params();
    {
        auto dec = engine.decoder.params();
        master_params.insert(master_params.end(), dec.begin(), dec.end());
    }
    nn::Adam opt(master_params, cfg.lr);

    const int workers = std::max(1, cfg.workers);
    std::vector<StyleTransferEngine> slots(static_cast<size_t>(workers), engine);

    std::vector<double> history;
    history.reserve(cfg.iterations);
    for (long it = 0; it < cfg.iterations; ++it) {
        const int B = cfg.batch;
        std::vector<size_t> batch(B);
        for (int b = 0; b < B; ++b) batch[b] = train_idx[pick(rng)];

        sync_param_values(master_params, slots, true);
        std::vector<double> losses(B, 0.0);
        parallel_blocks(B, workers, [&](size_t b0, size_t b1, int slot) {
            auto& eng = slots[slot];
            for (size_t b = b0; b < b1; ++b) {
                const Tensor x = item_tensor(ds.item(batch[b]), cfg.image_size);
                EncoderCache ecache;
                DecoderCache dcache;
                const FeaturePyramid pyr = eng.encoder.forward(x, &ecache);
                const Tensor out = eng.decoder.forward(pyr.content_feature(), &dcache);
                losses[b] = content_loss(out, x);

                Tensor d_out;
                content_loss_backward(out, x, 1.0 / B, &d_out, nullptr);
                Tensor d_content = eng.decoder.backward(dcache, d_out, true, true);
                std::vector<Tensor> d_taps(eng.encoder.stages());
                d_taps.back() = std::move(d_content);
                eng.encoder.backward(ecache, d_taps, false, true);
            }
        });

        double loss = 0.0;
        for (double l : losses) loss += l;
        loss /= B;
        if (!std::isfinite(loss))
            throw NumericError("non-finite loss in encoder pretraining at iteration " +
                               std::to_string(it));
        history.push_back(loss);

        opt.zero_grad();
        reduce_grads(master_params, slots, true);
        opt.step();
    }
    sync_param_values(master_params, slots, true);
    return history;
}

std::vector<double> train_decoder(StyleTransferEngine& engine, const LabeledDataset& ds,
                                  const StyleTrainConfig& cfg) {
    check_train_pre(ds, cfg);
    const auto train_idx = ds.split_indices(Split::Train);
    std::mt19937_64 rng(mix_seed(cfg.seed, "decoder-train"));
    std::uniform_int_distribution<size_t> pick(0, train_idx.size() - 1);

    engine.style_weight = cfg.style_weight;
    engine.train_seed = cfg.seed;
    auto master_params = engine.decoder.params();
    nn::Adam opt(master_params, cfg.lr);

    const int workers = std::max(1, cfg.workers);
    std::vector<StyleTransferEngine> slots(static_cast<size_t>(workers), engine);

    std::vector<double> history;
    history.reserve(cfg.iterations);
    for (long it = 0; it < cfg.iterations; ++it) {
        const int B = cfg.batch;
        std::vector<std::pair<size_t, size_t>> batch(B);
        for (int b = 0; b < B; ++b) {
            const size_t ci = train_idx[pick(rng)];
            const size_t si = train_idx[pick(rng)];
            batch[b] = {ci, si};
        }

        sync_param_values(master_params, slots, false);
        std::vector<double> losses(B, 0.0);
        parallel_blocks(B, workers, [&](size_t b0, size_t b1, int slot) {
            auto& eng = slots[slot];
            for (size_t b = b0; b < b1; ++b) {
                const Tensor xc = item_tensor(ds.item(batch[b].first), cfg.image_size);
                const Tensor xs = item_tensor(ds.item(batch[b].second), cfg.image_size);
                const FeaturePyramid c_pyr = eng.encoder.forward(xc);
                const FeaturePyramid s_pyr = eng.encoder.forward(xs);
                const Tensor t =
                    adain(c_pyr.content_feature(), s_pyr.content_feature(), eng.eps);

                DecoderCache dcache;
                const Tensor g_out = eng.decoder.forward(t, &dcache);
                EncoderCache ecache;
                const FeaturePyramid out_pyr = eng.encoder.forward(g_out, &ecache);

                const double lc = content_loss(out_pyr.content_feature(), t);
                const double ls = style_loss(out_pyr, s_pyr, eng.eps);
                losses[b] = lc + cfg.style_weight * ls;

                std::vector<Tensor> d_taps =
                    style_loss_backward(out_pyr, s_pyr, cfg.style_weight / B, eng.eps);
                content_loss_backward(out_pyr.content_feature(), t, 1.0 / B, &d_taps.back(),
                                      nullptr);
                const Tensor d_gout = eng.encoder.backward(ecache, d_taps, true, false);
                eng.decoder.backward(dcache, d_gout, false, true);
            }
        });

        double loss = 0.0;
        for (double l : losses) loss += l;
        loss /= B;
        if (!std::isfinite(loss))
            throw NumericError("non-finite loss in decoder training at iteration " +
                               std::to_string(it));
        history.push_back(loss);

        opt.zero_grad();
        reduce_grads(master_params, slots, false);
        opt.step();
    }
    engine.decoder_trained = true;
    return history;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

void StyleTransferEngine::save(const std::filesystem::path& path) const {
    nlohmann::json meta;
    meta["eps"] = eps;
    meta["style_weight"] = style_weight;
    meta["train_seed"] = train_seed;
    meta["decoder_trained"] = decoder_trained;
    meta["encoder_spec"] = {{"channels", encoder.spec().channels},
                            {"strides", encoder.spec().strides},
                            {"ksize", encoder.spec().ksize}};
    meta["tap_layers"] = encoder.tap_names();

    std::vector<std::pair<std::string, const Tensor*>> tensors;
    for (const auto* p : encoder.params()) tensors.emplace_back(p->name, &p->value);
    for (const auto* p : decoder.params()) tensors.emplace_back(p->name, &p->value);
    save_checkpoint(path, "style_engine", meta, tensors);
}

StyleTransferEngine StyleTransferEngine::load(const std::filesystem::path& path) {
    const LoadedCheckpoint ckpt = load_checkpoint(path, "style_engine");
    EncoderSpec spec;
    spec.channels = ckpt.meta.at("encoder_spec").at("channels").get<std::vector<int>>();
    spec.strides = ckpt.meta.at("encoder_spec").at("strides").get<std::vector<int>>();
    spec.ksize = ckpt.meta.at("encoder_spec").at("ksize").get<int>();

    StyleTransferEngine engine(spec);
    engine.eps = ckpt.meta.at("eps").get<double>();
    engine.style_weight = ckpt.meta.at("style_weight").get<double>();
    engine.train_seed = ckpt.meta.at("train_seed").get<uint64_t>();
    engine.decoder_trained = ckpt.meta.at("decoder_trained").get<bool>();
    for (auto* p : engine.encoder.params()) p->value = ckpt.tensor(p->name);
    for (auto* p : engine.decoder.params()) p->value = ckpt.tensor(p->name);
    return engine;
}

}  // namespace styleaug
