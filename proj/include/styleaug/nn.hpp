#pragma once

#include <memory>
#include <random>
#include <string>
#include <vector>

#include "styleaug/tensor.hpp"

namespace styleaug::nn {

// A named parameter with its gradient accumulator and Adam state.
struct Param {
    std::string name;
    Tensor value;
    Tensor grad;
    Tensor adam_m;
    Tensor adam_v;

    void init_state() {
        grad = Tensor::zeros(value.shape());
        adam_m = Tensor::zeros(value.shape());
        adam_v = Tensor::zeros(value.shape());
    }
    void zero_grad() { grad.fill(0.0); }
};

enum class PadMode { Zero, Reflect };

// im2col-backed 2D convolution with square kernels and "same"-style padding
// (pad = ksize/2). Forward keeps the column matrix in a per-call cache so the
// backward pass can form weight gradients with a single GEMM.
struct ConvCache {
    std::vector<int> in_shape;      // {C,H,W} of the unpadded input
    std::vector<int> padded_shape;  // {C,Hp,Wp}
    Tensor cols;                    // {Cin*k*k, Hout*Wout}
    std::vector<int> out_shape;     // {Cout,Hout,Wout}
};

class Conv2d {
public:
    Conv2d() = default;
    Conv2d(std::string name, int in_ch, int out_ch, int ksize, int stride, PadMode pad);

    Tensor forward(const Tensor& x, ConvCache* cache = nullptr) const;
    // dy has the output shape. Accumulates into weight.grad/bias.grad when
    // want_param_grads; returns dx when want_dx (empty tensor otherwise).
    Tensor backward(const ConvCache& cache, const Tensor& dy,
                    bool want_dx, bool want_param_grads);

    int in_channels() const { return in_ch_; }
    int out_channels() const { return out_ch_; }
    int ksize() const { return ksize_; }
    int stride() const { return stride_; }
    PadMode pad_mode() const { return pad_; }

    Param weight;  // {out_ch, in_ch*k*k}
    Param bias;    // {out_ch}

    void init_params(std::mt19937_64& rng);
    std::vector<Param*> params() { return {&weight, &bias}; }

private:
    int in_ch_ = 0, out_ch_ = 0, ksize_ = 3, stride_ = 1;
    PadMode pad_ = PadMode::Zero;
};

// Fully connected layer, y = W x + b on flat vectors.
class Dense {
public:
    Dense() = default;
    Dense(std::string name, int in_dim, int out_dim);

    Tensor forward(const Tensor& x) const;
    // Returns dx; accumulates parameter grads when requested.
    Tensor backward(const Tensor& x, const Tensor& dy, bool want_dx, bool want_param_grads);

    int in_dim() const { return in_dim_; }
    int out_dim() const { return out_dim_; }

    Param weight;  // {out_dim, in_dim}
    Param bias;    // {out_dim}

    void init_params(std::mt19937_64& rng);
    std::vector<Param*> params() { return {&weight, &bias}; }

private:
    int in_dim_ = 0, out_dim_ = 0;
};

// Elementwise and structural ops (functional style; backward takes the
// forward inputs it needs).
Tensor relu(const Tensor& x);
Tensor relu_backward(const Tensor& x, const Tensor& dy);

Tensor upsample_nearest2x(const Tensor& x);
Tensor upsample_nearest2x_backward(const Tensor& dy);

Tensor global_avg_pool(const Tensor& x);  // {C,H,W} -> {C}

// Explicit padding helpers (exposed for tests).
Tensor pad2d(const Tensor& x, int p, PadMode mode);
Tensor pad2d_backward(const Tensor& dxp, int p, PadMode mode, int h, int w);

// Numerically stable softmax over a flat vector.
Tensor softmax(const Tensor& logits);

// Inverted dropout; mask entries are 0 or 1/(1-p).
Tensor dropout_mask(const std::vector<int>& shape, double p, std::mt19937_64& rng);

// Adam with classic L2 regularization folded into the gradient
// (grad + weight_decay * value) before the moment updates.
class Adam {
public:
    Adam(std::vector<Param*> params, double lr, double weight_decay = 0.0,
         double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

    void step();
    void zero_grad();
    const std::vector<Param*>& params() const { return params_; }

private:
    std::vector<Param*> params_;
    double lr_, wd_, beta1_, beta2_, eps_;
    long t_ = 0;
};

uint64_t params_checksum(const std::vector<const Param*>& ps);

}  // namespace styleaug::nn
