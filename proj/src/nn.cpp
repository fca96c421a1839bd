#include "styleaug/nn.hpp"

#include <Eigen/Core>

#include <cmath>

namespace styleaug::nn {

namespace {

using MatMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

int reflect_index(int i, int n) {
    // PyTorch-style reflection without edge repetition; needs n > pad.
    if (i < 0) return -i;
    if (i >= n) return 2 * n - 2 - i;
    return i;
}

}  // namespace

Tensor pad2d(const Tensor& x, int p, PadMode mode) {
    if (p == 0) return x;
    const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    if (mode == PadMode::Reflect && (h <= p || w <= p))
        throw ShapeError("reflection pad " + std::to_string(p) + " needs spatial size > pad, got " +
                         x.shape_str());
    Tensor out = Tensor::uninit({c, h + 2 * p, w + 2 * p});
    for (int ch = 0; ch < c; ++ch) {
        for (int y = -p; y < h + p; ++y) {
            for (int xx = -p; xx < w + p; ++xx) {
                double v = 0.0;
                if (mode == PadMode::Reflect) {
                    v = x.at3(ch, reflect_index(y, h), reflect_index(xx, w));
                } else if (y >= 0 && y < h && xx >= 0 && xx < w) {
                    v = x.at3(ch, y, xx);
                }
                out.at3(ch, y + p, xx + p) = v;
            }
        }
    }
    return out;
}

Tensor pad2d_backward(const Tensor& dxp, int p, PadMode mode, int h, int w) {
    if (p == 0) return dxp;
    const int c = dxp.dim(0);
    Tensor dx({c, h, w});
    for (int ch = 0; ch < c; ++ch) {
        for (int y = -p; y < h + p; ++y) {
            for (int xx = -p; xx < w + p; ++xx) {
                if (mode == PadMode::Reflect) {
                    dx.at3(ch, reflect_index(y, h), reflect_index(xx, w)) +=
                        dxp.at3(ch, y + p, xx + p);
                } else if (y >= 0 && y < h && xx >= 0 && xx < w) {
                    dx.at3(ch, y, xx) += dxp.at3(ch, y + p, xx + p);
                }
            }
        }
    }
    return dx;
}

Conv2d::Conv2d(std::string name, int in_ch, int out_ch, int ksize, int stride, PadMode pad)
    : in_ch_(in_ch), out_ch_(out_ch), ksize_(ksize), stride_(stride), pad_(pad) {
    weight.name = name + ".weight";
    weight.value = Tensor({out_ch, in_ch * ksize * ksize});
    bias.name = name + ".bias";
    bias.value = Tensor({out_ch});
    weight.init_state();
    bias.init_state();
}

void Conv2d::init_params(std::mt19937_64& rng) {
    // He initialization for ReLU stacks.
    const int fan_in = in_ch_ * ksize_ * ksize_;
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
    for (auto& v : weight.value.vec()) v = dist(rng);
    bias.value.fill(0.0);
}

static void im2col(const Tensor& xp, int ksize, int stride, int hout, int wout, Tensor& cols) {
    const int c = xp.dim(0), hp = xp.dim(1), wp = xp.dim(2);
    const int npos = hout * wout;
    double* col = cols.data();
    for (int ch = 0; ch < c; ++ch) {
        for (int ky = 0; ky < ksize; ++ky) {
            for (int kx = 0; kx < ksize; ++kx) {
                const int row = (ch * ksize + ky) * ksize + kx;
                double* dst = col + static_cast<size_t>(row) * npos;
                for (int oy = 0; oy < hout; ++oy) {
                    const double* src = xp.data() +
                        (static_cast<size_t>(ch) * hp + (oy * stride + ky)) * wp + kx;
                    if (stride == 1) {
                        std::copy(src, src + wout, dst);
                        dst += wout;
                    } else {
                        for (int ox = 0; ox < wout; ++ox) {
                            *dst++ = src[ox * stride];
                        }
                    }
                }
            }
        }
    }
}

static void col2im(const Tensor& cols, int c, int hp, int wp, int ksize, int stride, int hout,
                   int wout, Tensor& dxp) {
    const int npos = hout * wout;
    const double* col = cols.data();
    for (int ch = 0; ch < c; ++ch) {
        for (int ky = 0; ky < ksize; ++ky) {
            for (int kx = 0; kx < ksize; ++kx) {
                const int row = (ch * ksize + ky) * ksize + kx;
                const double* src = col + static_cast<size_t>(row) * npos;
                for (int oy = 0; oy < hout; ++oy) {
                    double* dst = dxp.data() +
                        (static_cast<size_t>(ch) * hp + (oy * stride + ky)) * wp + kx;
                    for (int ox = 0; ox < wout; ++ox) {
                        dst[ox * stride] += src[oy * wout + ox];
                    }
                }
            }
        }
    }
}

Tensor Conv2d::forward(const Tensor& x, ConvCache* cache) const {
    if (x.ndim() != 3 || x.dim(0) != in_ch_)
        throw ShapeError("conv expects {" + std::to_string(in_ch_) + ",H,W}, got " + x.shape_str());
    const int p = ksize_ / 2;

    // 1x1 stride-1 convolutions (the attention projections) multiply the
    // input planes directly; no padding or column matrix is ever formed.
    if (ksize_ == 1 && stride_ == 1) {
        const int npos = x.dim(1) * x.dim(2);
        Tensor y = Tensor::uninit({out_ch_, x.dim(1), x.dim(2)});
        ConstMatMap W(weight.value.data(), out_ch_, in_ch_);
        ConstMatMap X(x.data(), in_ch_, npos);
        MatMap Y(y.data(), out_ch_, npos);
        Y.noalias() = W * X;
        for (int oc = 0; oc < out_ch_; ++oc) Y.row(oc).array() += bias.value[oc];
        if (cache) {
            cache->in_shape = x.shape();
            cache->padded_shape = x.shape();
            cache->cols = x;
            cache->out_shape = y.shape();
        }
        return y;
    }

    Tensor xp = pad2d(x, p, pad_);
    const int hp = xp.dim(1), wp = xp.dim(2);
    const int hout = (hp - ksize_) / stride_ + 1;
    const int wout = (wp - ksize_) / stride_ + 1;
    const int patch = in_ch_ * ksize_ * ksize_;
    const int npos = hout * wout;

    Tensor cols = Tensor::uninit({patch, npos});
    im2col(xp, ksize_, stride_, hout, wout, cols);

    Tensor y = Tensor::uninit({out_ch_, hout, wout});
    ConstMatMap W(weight.value.data(), out_ch_, patch);
    ConstMatMap C(cols.data(), patch, npos);
    MatMap Y(y.data(), out_ch_, npos);
    Y.noalias() = W * C;
    for (int oc = 0; oc < out_ch_; ++oc) Y.row(oc).array() += bias.value[oc];

    if (cache) {
        cache->in_shape = x.shape();
        cache->padded_shape = xp.shape();
        cache->cols = std::move(cols);
        cache->out_shape = y.shape();
    }
    return y;
}

Tensor Conv2d::backward(const ConvCache& cache, const Tensor& dy, bool want_dx,
                        bool want_param_grads) {
    const int patch = in_ch_ * ksize_ * ksize_;
    const int hout = cache.out_shape[1], wout = cache.out_shape[2];
    const int npos = hout * wout;
    if (dy.shape() != cache.out_shape)
        throw ShapeError("conv backward: dy shape " + dy.shape_str() + " mismatch");

    ConstMatMap dY(dy.data(), out_ch_, npos);
    if (want_param_grads) {
        ConstMatMap C(cache.cols.data(), patch, npos);
        MatMap dW(weight.grad.data(), out_ch_, patch);
        dW.noalias() += dY * C.transpose();
        for (int oc = 0; oc < out_ch_; ++oc) bias.grad[oc] += dY.row(oc).sum();
    }
    if (!want_dx) return Tensor();

    Tensor dcols = Tensor::uninit({patch, npos});
    ConstMatMap W(weight.value.data(), out_ch_, patch);
    MatMap dC(dcols.data(), patch, npos);
    dC.noalias() = W.transpose() * dY;

    const int p = ksize_ / 2;
    Tensor dxp(cache.padded_shape);
    col2im(dcols, in_ch_, cache.padded_shape[1], cache.padded_shape[2], ksize_, stride_, hout,
           wout, dxp);
    return pad2d_backward(dxp, p, pad_, cache.in_shape[1], cache.in_shape[2]);
}

Dense::Dense(std::string name, int in_dim, int out_dim) : in_dim_(in_dim), out_dim_(out_dim) {
    weight.name = name + ".weight";
    weight.value = Tensor({out_dim, in_dim});
    bias.name = name + ".bias";
    bias.value = Tensor({out_dim});
    weight.init_state();
    bias.init_state();
}

void Dense::init_params(std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / in_dim_));
    for (auto& v : weight.value.vec()) v = dist(rng);
    bias.value.fill(0.0);
}

Tensor Dense::forward(const Tensor& x) const {
    if (static_cast<int>(x.numel()) != in_dim_)
        throw ShapeError("dense expects " + std::to_string(in_dim_) + " inputs, got " +
                         x.shape_str());
    Tensor y({out_dim_});
    ConstMatMap W(weight.value.data(), out_dim_, in_dim_);
    Eigen::Map<const Eigen::VectorXd> X(x.data(), in_dim_);
    Eigen::Map<Eigen::VectorXd> Y(y.data(), out_dim_);
    Y.noalias() = W * X;
    Y += Eigen::Map<const Eigen::VectorXd>(bias.value.data(), out_dim_);
    return y;
}

Tensor Dense::backward(const Tensor& x, const Tensor& dy, bool want_dx, bool want_param_grads) {
    Eigen::Map<const Eigen::VectorXd> X(x.data(), in_dim_);
    Eigen::Map<const Eigen::VectorXd> dY(dy.data(), out_dim_);
    if (want_param_grads) {
        MatMap dW(weight.grad.data(), out_dim_, in_dim_);
        dW.noalias() += dY * X.transpose();
        Eigen::Map<Eigen::VectorXd>(bias.grad.data(), out_dim_) += dY;
    }
    if (!want_dx) return Tensor();
    Tensor dx({in_dim_});
    ConstMatMap W(weight.value.data(), out_dim_, in_dim_);
    Eigen::Map<Eigen::VectorXd>(dx.data(), in_dim_).noalias() = W.transpose() * dY;
    return dx;
}

Tensor relu(const Tensor& x) {
    Tensor y = x;
    for (auto& v : y.vec()) v = v > 0.0 ? v : 0.0;
    return y;
}

Tensor relu_backward(const Tensor& x, const Tensor& dy) {
    Tensor dx = dy;
    for (size_t i = 0; i < dx.numel(); ++i)
        if (x[i] <= 0.0) dx[i] = 0.0;
    return dx;
}

Tensor upsample_nearest2x(const Tensor& x) {
    const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    Tensor y = Tensor::uninit({c, 2 * h, 2 * w});
    for (int ch = 0; ch < c; ++ch)
        for (int yy = 0; yy < 2 * h; ++yy)
            for (int xx = 0; xx < 2 * w; ++xx)
                y.at3(ch, yy, xx) = x.at3(ch, yy / 2, xx / 2);
    return y;
}

Tensor upsample_nearest2x_backward(const Tensor& dy) {
    const int c = dy.dim(0), h2 = dy.dim(1), w2 = dy.dim(2);
    Tensor dx({c, h2 / 2, w2 / 2});
    for (int ch = 0; ch < c; ++ch)
        for (int yy = 0; yy < h2; ++yy)
            for (int xx = 0; xx < w2; ++xx)
                dx.at3(ch, yy / 2, xx / 2) += dy.at3(ch, yy, xx);
    return dx;
}

Tensor global_avg_pool(const Tensor& x) {
    const int c = x.dim(0);
    const size_t spatial = static_cast<size_t>(x.dim(1)) * x.dim(2);
    Tensor y({c});
    for (int ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        const double* p = x.data() + ch * spatial;
        for (size_t i = 0; i < spatial; ++i) acc += p[i];
        y[ch] = acc / static_cast<double>(spatial);
    }
    return y;
}

Tensor softmax(const Tensor& logits) {
    Tensor p = logits;
    double mx = p[0];
    for (size_t i = 1; i < p.numel(); ++i) mx = std::max(mx, p[i]);
    double sum = 0.0;
    for (auto& v : p.vec()) {
        v = std::exp(v - mx);
        sum += v;
    }
    for (auto& v : p.vec()) v /= sum;
    return p;
}

Tensor dropout_mask(const std::vector<int>& shape, double p, std::mt19937_64& rng) {
    if (p < 0.0 || p >= 1.0) throw ValidationError("dropout probability must be in [0,1)");
    Tensor mask(shape);
    const double keep = 1.0 - p;
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    for (auto& v : mask.vec()) v = dist(rng) < keep ? 1.0 / keep : 0.0;
    return mask;
}

Adam::Adam(std::vector<Param*> params, double lr, double weight_decay, double beta1, double beta2,
           double eps)
    : params_(std::move(params)), lr_(lr), wd_(weight_decay), beta1_(beta1), beta2_(beta2),
      eps_(eps) {}

void Adam::zero_grad() {
    for (auto* p : params_) p->zero_grad();
}

void Adam::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (auto* p : params_) {
        for (size_t i = 0; i < p->value.numel(); ++i) {
            const double g = p->grad[i] + wd_ * p->value[i];
            p->adam_m[i] = beta1_ * p->adam_m[i] + (1.0 - beta1_) * g;
            p->adam_v[i] = beta2_ * p->adam_v[i] + (1.0 - beta2_) * g * g;
            const double mhat = p->adam_m[i] / bc1;
            const double vhat = p->adam_v[i] / bc2;
            p->value[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

uint64_t params_checksum(const std::vector<const Param*>& ps) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (const auto* p : ps)
        h = fnv1a64(p->value.data(), p->value.numel() * sizeof(double), h);
    return h;
}

}  // namespace styleaug::nn
