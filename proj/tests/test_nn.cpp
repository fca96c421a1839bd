#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "styleaug/nn.hpp"
#include "test_util.hpp"

using namespace styleaug;
using testutil::dot;
using testutil::fd_grad;
using testutil::max_grad_rel_err;

namespace {

// Direct convolution, independent of the im2col path.
Tensor naive_conv(const nn::Conv2d& conv, const Tensor& x) {
    const int k = conv.ksize(), stride = conv.stride(), p = k / 2;
    const Tensor xp = nn::pad2d(x, p, conv.pad_mode());
    const int hout = (xp.dim(1) - k) / stride + 1;
    const int wout = (xp.dim(2) - k) / stride + 1;
    Tensor y({conv.out_channels(), hout, wout});
    for (int oc = 0; oc < conv.out_channels(); ++oc) {
        for (int oy = 0; oy < hout; ++oy) {
            for (int ox = 0; ox < wout; ++ox) {
                double acc = conv.bias.value[oc];
                for (int ic = 0; ic < conv.in_channels(); ++ic)
                    for (int ky = 0; ky < k; ++ky)
                        for (int kx = 0; kx < k; ++kx)
                            acc += conv.weight.value[(oc * conv.in_channels() + ic) * k * k +
                                                     ky * k + kx] *
                                   xp.at3(ic, oy * stride + ky, ox * stride + kx);
                y.at3(oc, oy, ox) = acc;
            }
        }
    }
    return y;
}

}  // namespace

TEST_CASE("conv forward matches direct convolution") {
    std::mt19937_64 rng(42);
    for (auto [stride, mode] : {std::pair{1, nn::PadMode::Zero}, {2, nn::PadMode::Zero},
                                {1, nn::PadMode::Reflect}}) {
        nn::Conv2d conv("c", 3, 5, 3, stride, mode);
        conv.init_params(rng);
        Tensor x = Tensor::randn({3, 8, 8}, rng);
        Tensor got = conv.forward(x);
        Tensor want = naive_conv(conv, x);
        REQUIRE(got.shape() == want.shape());
        for (size_t i = 0; i < got.numel(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
    }
}

TEST_CASE("conv gradients match finite differences") {
    std::mt19937_64 rng(7);
    for (auto [stride, mode] : {std::pair{1, nn::PadMode::Zero}, {2, nn::PadMode::Zero},
                                {1, nn::PadMode::Reflect}, {2, nn::PadMode::Reflect}}) {
        nn::Conv2d conv("c", 2, 3, 3, stride, mode);
        conv.init_params(rng);
        Tensor x = Tensor::randn({2, 6, 6}, rng);
        Tensor probe;
        {
            nn::ConvCache cache;
            Tensor y = conv.forward(x, &cache);
            probe = Tensor::randn(y.shape(), rng);
        }
        auto loss = [&]() { return dot(probe, conv.forward(x)); };

        nn::ConvCache cache;
        conv.forward(x, &cache);
        conv.weight.zero_grad();
        conv.bias.zero_grad();
        Tensor dx = conv.backward(cache, probe, true, true);

        CHECK(max_grad_rel_err(dx, fd_grad(loss, x)) < 1e-6);
        CHECK(max_grad_rel_err(conv.weight.grad, fd_grad(loss, conv.weight.value)) < 1e-6);
        CHECK(max_grad_rel_err(conv.bias.grad, fd_grad(loss, conv.bias.value)) < 1e-6);
    }
}

TEST_CASE("dense gradients match finite differences") {
    std::mt19937_64 rng(11);
    nn::Dense fc("fc", 7, 4);
    fc.init_params(rng);
    Tensor x = Tensor::randn({7}, rng);
    Tensor probe = Tensor::randn({4}, rng);
    auto loss = [&]() { return dot(probe, fc.forward(x)); };

    fc.weight.zero_grad();
    fc.bias.zero_grad();
    Tensor dx = fc.backward(x, probe, true, true);

    CHECK(max_grad_rel_err(dx, fd_grad(loss, x)) < 1e-6);
    CHECK(max_grad_rel_err(fc.weight.grad, fd_grad(loss, fc.weight.value)) < 1e-6);
    CHECK(max_grad_rel_err(fc.bias.grad, fd_grad(loss, fc.bias.value)) < 1e-6);
}

TEST_CASE("upsample nearest 2x and its backward") {
    std::mt19937_64 rng(3);
    Tensor x = Tensor::randn({2, 3, 3}, rng);
    Tensor y = nn::upsample_nearest2x(x);
    REQUIRE(y.shape() == std::vector<int>{2, 6, 6});
    CHECK(y.at3(1, 5, 4) == x.at3(1, 2, 2));

    Tensor probe = Tensor::randn(y.shape(), rng);
    auto loss = [&]() { return dot(probe, nn::upsample_nearest2x(x)); };
    Tensor dx = nn::upsample_nearest2x_backward(probe);
    CHECK(max_grad_rel_err(dx, fd_grad(loss, x)) < 1e-6);
}

TEST_CASE("softmax normalizes and is stable under shift") {
    Tensor logits({3}, {1000.0, 1001.0, 999.0});
    Tensor p = nn::softmax(logits);
    double sum = p[0] + p[1] + p[2];
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(p[1] > p[0]);
    CHECK(p[0] > p[2]);
}

TEST_CASE("adam reduces a quadratic") {
    nn::Param p;
    p.name = "w";
    p.value = Tensor({4}, {4.0, -3.0, 2.0, -1.0});
    p.init_state();
    nn::Adam opt({&p}, 0.1);
    for (int i = 0; i < 400; ++i) {
        opt.zero_grad();
        for (size_t j = 0; j < 4; ++j) p.grad[j] = 2.0 * p.value[j];
        opt.step();
    }
    for (size_t j = 0; j < 4; ++j) CHECK(std::abs(p.value[j]) < 1e-2);
}

TEST_CASE("dropout mask scales by keep probability") {
    std::mt19937_64 rng(5);
    Tensor m = nn::dropout_mask({10000}, 0.23, rng);
    size_t kept = 0;
    for (size_t i = 0; i < m.numel(); ++i) {
        CHECK((m[i] == 0.0 || m[i] == doctest::Approx(1.0 / 0.77)));
        if (m[i] != 0.0) ++kept;
    }
    CHECK(kept > 7400);
    CHECK(kept < 8000);
    CHECK_THROWS_AS(nn::dropout_mask({4}, 1.0, rng), ValidationError);
}

TEST_CASE("reflection padding needs spatial size greater than pad") {
    Tensor tiny({1, 1, 1}, {5.0});
    CHECK_THROWS_AS(nn::pad2d(tiny, 1, nn::PadMode::Reflect), ShapeError);
    Tensor x({1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
    Tensor xp = nn::pad2d(x, 1, nn::PadMode::Reflect);
    // row -1 reflects to row 1, col -1 to col 1
    CHECK(xp.at3(0, 0, 0) == 5.0);
    CHECK(xp.at3(0, 0, 1) == 4.0);
    CHECK(xp.at3(0, 1, 0) == 2.0);
}
