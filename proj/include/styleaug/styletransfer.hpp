#pragma once

#include <filesystem>
#include <vector>

#include "styleaug/dataset.hpp"
#include "styleaug/image.hpp"
#include "styleaug/nn.hpp"

namespace styleaug {

// Stabilizer inside sqrt(var + eps); keeps the per-channel normalization
// finite on constant channels.
inline constexpr double kStatsEps = 1e-5;

// Ordered encoder taps; the deepest tap doubles as the content feature.
struct FeaturePyramid {
    std::vector<Tensor> layers;

    const Tensor& content_feature() const { return layers.back(); }
    size_t depth() const { return layers.size(); }
};

struct ChannelStats {
    Tensor mean;  // {C}
    Tensor std;   // {C}, sqrt(var + eps)
    double eps = kStatsEps;
};

// Per-channel spatial mean and stabilized population standard deviation.
ChannelStats channel_stats(const Tensor& fmap, double eps = kStatsEps);

// AdaIN: re-standardize the content feature per channel, then scale/shift to
// the style feature's channel statistics. Spatial sizes may differ; channel
// counts must match.
Tensor adain(const Tensor& c_feat, const Tensor& s_feat, double eps = kStatsEps);

// Gradients of adain w.r.t. both inputs given the upstream gradient d_out.
void adain_backward(const Tensor& c_feat, const Tensor& s_feat, const Tensor& d_out,
                    Tensor* d_c, Tensor* d_s, double eps = kStatsEps);

// Mean squared error over all elements (the content loss when applied to
// f(g(t)) vs t).
double content_loss(const Tensor& stylized_feat, const Tensor& target_feat);
void content_loss_backward(const Tensor& stylized_feat, const Tensor& target_feat,
                           double upstream, Tensor* d_stylized, Tensor* d_target);

// Sum over layers of MSE between per-channel mean vectors plus MSE between
// per-channel std vectors.
double style_loss(const FeaturePyramid& stylized, const FeaturePyramid& style,
                  double eps = kStatsEps);
// d(style_loss)/d(stylized layers); the style side is a constant target.
std::vector<Tensor> style_loss_backward(const FeaturePyramid& stylized,
                                        const FeaturePyramid& style, double upstream,
                                        double eps = kStatsEps);

// ---------------------------------------------------------------------------
// Networks
// ---------------------------------------------------------------------------

// Stage layout of the convolutional encoder. Default is the desk-scale
// 4-stage encoder: one 3x3 conv + ReLU per stage, strides {1,2,2,2}, tap
// after every ReLU.
struct EncoderSpec {
    std::vector<int> channels = {8, 16, 32, 64};
    std::vector<int> strides = {1, 2, 2, 2};
    int ksize = 3;

    int total_stride() const {
        int s = 1;
        for (int v : strides) s *= v;
        return s;
    }
};

struct EncoderCache {
    std::vector<nn::ConvCache> conv;
    std::vector<Tensor> pre_relu;
};

class StageConvEncoder {
public:
    StageConvEncoder() = default;
    explicit StageConvEncoder(const EncoderSpec& spec);

    FeaturePyramid forward(const Tensor& image, EncoderCache* cache = nullptr) const;

    // d_taps[i] may be empty (no gradient arriving at that tap). Returns the
    // input-image gradient when want_dx.
    Tensor backward(const EncoderCache& cache, const std::vector<Tensor>& d_taps, bool want_dx,
                    bool want_param_grads);

    const EncoderSpec& spec() const { return spec_; }
    int total_stride() const { return spec_.total_stride(); }
    std::vector<std::string> tap_names() const;
    int stages() const { return static_cast<int>(convs_.size()); }

    void init_params(std::mt19937_64& rng);
    std::vector<nn::Param*> params();
    std::vector<const nn::Param*> params() const;
    uint64_t checksum() const { return nn::params_checksum(params()); }

private:
    EncoderSpec spec_;
    std::vector<nn::Conv2d> convs_;
};

struct DecoderCache {
    std::vector<nn::ConvCache> conv;
    std::vector<Tensor> pre_relu;  // all convs except the last have ReLU
};

// Mirror of the encoder: reflection-padded 3x3 convs with nearest-neighbor
// 2x upsampling between stages, linear 3-channel output.
class MirrorDecoder {
public:
    MirrorDecoder() = default;
    explicit MirrorDecoder(const EncoderSpec& enc_spec);

    Tensor forward(const Tensor& content_shaped, DecoderCache* cache = nullptr) const;
    Tensor backward(const DecoderCache& cache, const Tensor& d_out, bool want_dx,
                    bool want_param_grads);

    void init_params(std::mt19937_64& rng);
    std::vector<nn::Param*> params();
    std::vector<const nn::Param*> params() const;
    uint64_t checksum() const { return nn::params_checksum(params()); }

private:
    std::vector<nn::Conv2d> convs_;
    std::vector<int> strides_;  // encoder strides, mirrored on the way up
};

// Frozen encoder + trainable decoder + AdaIN parameters.
struct StyleTransferEngine {
    StageConvEncoder encoder;
    MirrorDecoder decoder;
    double eps = kStatsEps;
    double style_weight = 10.0;
    uint64_t train_seed = 0;
    bool decoder_trained = false;

    explicit StyleTransferEngine(const EncoderSpec& spec = EncoderSpec())
        : encoder(spec), decoder(spec) {}

    FeaturePyramid encode_features(const Tensor& image) const { return encoder.forward(image); }

    // t_alpha = alpha * adain(c, s) + (1 - alpha) * c, decoded to an image the
    // size of the content input. Requires a trained decoder.
    Image stylize(const Image& content, const Image& style, double alpha) const;

    void save(const std::filesystem::path& path) const;
    static StyleTransferEngine load(const std::filesystem::path& path);
};

struct StyleTrainConfig {
    long iterations = 20000;
    double style_weight = 10.0;
    double lr = 1e-4;
    int batch = 8;
    int image_size = 64;
    int workers = 8;
    uint64_t seed = 0;
};

// Autoencoder warm-up standing in for pretrained encoder weights: trains
// encoder + decoder on pixel reconstruction. Returns per-iteration losses.
std::vector<double> pretrain_encoder(StyleTransferEngine& engine, const LabeledDataset& ds,
                                     const StyleTrainConfig& cfg);

// AdaIN objective: per iteration sample content/style uniformly from the
// train split (class-agnostic), minimize L_c + style_weight * L_s w.r.t.
// decoder parameters only. Returns per-iteration losses (length =
// iterations). Encoder parameters are bit-identical before and after.
std::vector<double> train_decoder(StyleTransferEngine& engine, const LabeledDataset& ds,
                                  const StyleTrainConfig& cfg);

}  // namespace styleaug
