#include <doctest.h>

#include <vector>

#include "helpers.hpp"
#include "specmix/nn.hpp"
#include "specmix/rng.hpp"

using namespace specmix;
using namespace specmix::nn;
using testutil::fd_central;
using testutil::kernel3;
using testutil::rel_err;
using testutil::row3;

namespace {

// independent dense reference: explicit zero-padded buffer, no loop tricks
Tensor conv_reference(const Tensor& input, const Tensor& kernel, int stride) {
    const int64_t B = input.shape[0], L = input.shape[1], Cin = input.shape[2];
    const int64_t K = kernel.shape[0], Cout = kernel.shape[2];
    const int64_t Lout = (L + stride - 1) / stride;
    const int64_t pad_left = (K - 1) / 2;
    Tensor out = Tensor::zeros({B, Lout, Cout});
    for (int64_t b = 0; b < B; ++b)
        for (int64_t t = 0; t < Lout; ++t)
            for (int64_t co = 0; co < Cout; ++co) {
                double acc = 0.0;
                for (int64_t k = 0; k < K; ++k)
                    for (int64_t ci = 0; ci < Cin; ++ci) {
                        const int64_t src = t * stride + k - pad_left;
                        const double x = (src < 0 || src >= L) ? 0.0 : input.at3(b, src, ci);
                        acc += x * kernel.data[(k * Cin + ci) * Cout + co];
                    }
                out.at3(b, t, co) = acc;
            }
    return out;
}

Tensor random_tensor(std::vector<int64_t> shape, Rng& rng) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (double& x : t.data) x = rng.normal();
    return t;
}

} // namespace

TEST_CASE("width-2 selector kernel reproduces the input") {
    Tensor out = conv1d_forward(row3({1, 2, 3, 4}), kernel3({1, 0}), 1);
    CHECK(out.shape == std::vector<int64_t>{1, 4, 1});
    CHECK(out.data == std::vector<double>{1, 2, 3, 4});
}

TEST_CASE("even-width sliding sum pads on the right") {
    Tensor out = conv1d_forward(row3({1, 2, 3, 4}), kernel3({1, 1}), 1);
    CHECK(out.data == std::vector<double>{3, 5, 7, 4});
}

TEST_CASE("output length is ceil(L/stride)") {
    CHECK(conv_out_length(288, 1) == 288);
    CHECK(conv_out_length(288, 2) == 144);
    CHECK(conv_out_length(5, 2) == 3);
    CHECK(conv_out_length(1, 2) == 1);
    Tensor in = Tensor::zeros({2, 288, 1});
    Tensor k = Tensor::zeros({32, 1, 16});
    CHECK(conv1d_forward(in, k, 2).shape == std::vector<int64_t>{2, 144, 16});
}

TEST_CASE("forward matches the dense reference on random shapes") {
    Rng rng(17);
    struct Case {
        int64_t B, L, Cin, K, Cout;
        int stride;
    };
    for (const Case& c : {Case{2, 11, 3, 4, 5, 1}, Case{3, 16, 1, 32, 4, 1},
                          Case{2, 9, 2, 3, 3, 2}, Case{1, 7, 4, 5, 2, 2},
                          Case{2, 5, 2, 2, 3, 2}}) {
        Tensor in = random_tensor({c.B, c.L, c.Cin}, rng);
        Tensor k = random_tensor({c.K, c.Cin, c.Cout}, rng);
        Tensor fast = conv1d_forward(in, k, c.stride);
        Tensor ref = conv_reference(in, k, c.stride);
        REQUIRE(fast.shape == ref.shape);
        for (size_t i = 0; i < fast.data.size(); ++i)
            CHECK(fast.data[i] == doctest::Approx(ref.data[i]).epsilon(1e-12));
    }
}

TEST_CASE("backward matches finite differences") {
    Rng rng(23);
    for (int stride : {1, 2}) {
        Tensor in = random_tensor({2, 7, 3}, rng);
        Tensor k = random_tensor({4, 3, 2}, rng);
        Tensor co_weights = random_tensor({2, conv_out_length(7, stride), 2}, rng);

        auto loss = [&]() {
            Tensor out = conv1d_forward(in, k, stride);
            double s = 0.0;
            for (size_t i = 0; i < out.data.size(); ++i) s += out.data[i] * co_weights.data[i];
            return s;
        };

        Tensor gi, gk;
        conv1d_backward(in, k, stride, co_weights, &gi, &gk);

        for (size_t i = 0; i < in.data.size(); ++i) {
            const double fd = fd_central(loss, in.data[i], 1e-6);
            CHECK(rel_err(gi.data[i], fd) < 1e-5);
        }
        for (size_t i = 0; i < k.data.size(); ++i) {
            const double fd = fd_central(loss, k.data[i], 1e-6);
            CHECK(rel_err(gk.data[i], fd) < 1e-5);
        }
    }
}

TEST_CASE("shape mismatches are rejected") {
    Tensor in = Tensor::zeros({1, 8, 3});
    Tensor k = Tensor::zeros({4, 2, 5});   // expects 2 channels, input has 3
    CHECK_THROWS_AS(conv1d_forward(in, k, 1), ShapeError);
    CHECK_THROWS_AS(conv1d_forward(in, Tensor::zeros({4, 3, 5}), 0), std::invalid_argument);
}
