#include <gtest/gtest.h>

#include <random>

#include "drd/kernels.hpp"
#include "drd/models.hpp"
#include "drd/ops.hpp"
#include "test_util.hpp"

using namespace drd;
using namespace drd::ops;
using drd::testing::numeric_gradient;
using drd::testing::random_tensor;
using drd::testing::relative_error;

namespace {

// Checks d loss / d input for every input, all coordinates.
void expect_gradients(std::vector<Tensor> inputs, const std::function<Tensor(const std::vector<Tensor>&)>& loss,
                      double tol, double h = 1e-5) {
    const Tensor l = loss(inputs);
    const auto analytic = gradients(l, inputs);
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        std::vector<std::size_t> all(inputs[i].numel());
        for (std::size_t k = 0; k < all.size(); ++k) all[k] = k;
        const auto numeric = numeric_gradient(inputs[i], all, [&] { return loss(inputs).item(); }, h);
        EXPECT_LT(relative_error(analytic[i], numeric), tol) << "input " << i;
    }
}

}  // namespace

TEST(Gradcheck, CkaLossWithRespectToRawFeatures) {
    std::mt19937_64 rng(21);
    for (int rep = 0; rep < 5; ++rep) {
        expect_gradients({random_tensor({4, 6}, rng, 1.0, true), random_tensor({4, 6}, rng, 1.0, true)},
                         [](const std::vector<Tensor>& in) {
                             return kernels::cka_loss(kernels::gram(in[0]), kernels::gram(in[1]));
                         },
                         1e-4, 1e-4);
    }
}

TEST(Gradcheck, Conv2dStridedAndPadded) {
    std::mt19937_64 rng(22);
    for (auto [stride, pad] : {std::pair{1, 1}, std::pair{2, 1}, std::pair{2, 0}}) {
        expect_gradients({random_tensor({2, 3, 5, 5}, rng, 1.0, true), random_tensor({4, 3, 3, 3}, rng, 0.5, true),
                          random_tensor({4}, rng, 0.5, true)},
                         [&](const std::vector<Tensor>& in) {
                             const Tensor y = conv2d(in[0], in[1], in[2], stride, pad);
                             return sum(mul(y, y));
                         },
                         1e-7);
    }
}

TEST(Gradcheck, LinearMatmulTranspose) {
    std::mt19937_64 rng(23);
    expect_gradients({random_tensor({3, 4}, rng, 1.0, true), random_tensor({5, 4}, rng, 1.0, true),
                      random_tensor({5}, rng, 1.0, true)},
                     [](const std::vector<Tensor>& in) {
                         const Tensor y = linear(in[0], in[1], in[2]);
                         return sum(matmul(transpose(y), y));
                     },
                     1e-7);
}

TEST(Gradcheck, ResizePoolSoftmaxFamily) {
    std::mt19937_64 rng(24);
    expect_gradients({random_tensor({2, 3, 4, 4}, rng, 1.0, true)},
                     [](const std::vector<Tensor>& in) {
                         const Tensor r = resize_bilinear(in[0], 7, 5);
                         const Tensor ls = log_softmax(r);
                         return add(mean(mul(ls, softmax(r))), sum(mul(global_avg_pool(r), global_avg_pool(r))));
                     },
                     1e-7);
}

TEST(Gradcheck, ElementwiseAndReductions) {
    std::mt19937_64 rng(25);
    std::vector<double> pos(12);
    std::uniform_real_distribution<double> u(0.5, 2.0);
    for (auto& v : pos) v = u(rng);
    expect_gradients({Tensor::parameter({3, 4}, pos), random_tensor({3, 4}, rng, 1.0, true)},
                     [](const std::vector<Tensor>& in) {
                         const Tensor a = div(exp(in[1]), sqrt(in[0]));
                         const Tensor b = relu(sub(in[1], scale(in[0], 0.3)));
                         return add(sum(sum_per_sample(a)), mse(b, in[0]));
                     },
                     1e-7);
}

TEST(Gradcheck, KlCrossEntropyDice) {
    std::mt19937_64 rng(26);
    const std::vector<int> labels{0, 2, 1};
    expect_gradients({random_tensor({3, 3}, rng, 1.0, true), random_tensor({3, 3}, rng, 1.0, true)},
                     [&](const std::vector<Tensor>& in) {
                         return add(kernels::kl_divergence(in[0], in[1]), kernels::cross_entropy(in[1], labels));
                     },
                     1e-7);
    std::vector<double> mask(2 * 4 * 4);
    for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = (i % 3 == 0) ? 1.0 : 0.0;
    const Tensor target({2, 4, 4}, mask);
    expect_gradients({random_tensor({2, 2, 4, 4}, rng, 1.0, true)},
                     [&](const std::vector<Tensor>& in) {
                         return kernels::dice_loss(select_channel(softmax(in[0]), 1), target);
                     },
                     1e-7);
}

TEST(Gradcheck, BothModelFamiliesEndToEnd) {
    std::mt19937_64 rng(27);
    for (auto family : {Family::patch_flat, Family::conv_hierarchical}) {
        ModelSpec spec;
        spec.family = family;
        spec.depth = 2;
        spec.width = 4;
        spec.image_size = 8;
        spec.patch = 2;
        spec.outputs = 3;
        const BlockSequence model = build_model(spec, 5);
        const Tensor x = random_tensor({2, 3, 8, 8}, rng);
        const std::vector<int> labels{1, 2};
        auto params = model.parameters();
        auto loss = [&] { return kernels::cross_entropy(model.forward(x), labels); };
        const auto analytic = gradients(loss(), params);
        for (std::size_t p = 0; p < params.size(); p += 2) {
            auto idx = drd::testing::sample_indices(params[p].numel(), 6, rng);
            std::vector<double> a;
            for (auto k : idx) a.push_back(analytic[p][k]);
            const auto n = numeric_gradient(params[p], idx, [&] { return loss().item(); });
            EXPECT_LT(relative_error(a, n), 1e-5) << to_string(family) << " param " << p;
        }
    }
}

TEST(Autograd, GradientsLeaveLeafAccumulatorsUntouched) {
    std::mt19937_64 rng(28);
    Tensor w = random_tensor({3}, rng, 1.0, true);
    sum(mul(w, w)).backward();
    const std::vector<double> before(w.grad().begin(), w.grad().end());
    gradients(sum(scale(w, 5.0)), std::vector<Tensor>{w});
    EXPECT_EQ(std::vector<double>(w.grad().begin(), w.grad().end()), before);
}

TEST(Autograd, NoGradGuardRecordsNothing) {
    std::mt19937_64 rng(29);
    Tensor w = random_tensor({3}, rng, 1.0, true);
    NoGradGuard guard;
    EXPECT_FALSE(sum(mul(w, w)).requires_grad());
}

TEST(Autograd, DetachParamsGuardBlocksParameterGradients) {
    std::mt19937_64 rng(30);
    ModelSpec spec;
    spec.depth = 1;
    spec.width = 2;
    spec.image_size = 8;
    const BlockSequence model = build_model(spec, 1);
    Tensor x = random_tensor({1, 3, 8, 8}, rng, 1.0, true);
    Tensor loss;
    {
        DetachParamsGuard guard;
        loss = sum(model.forward(x));
    }
    const auto g = gradients(loss, model.parameters());
    for (const auto& v : g) {
        for (double e : v) EXPECT_EQ(e, 0.0);
    }
    const auto gx = gradients(loss, std::vector<Tensor>{x});
    double norm = 0.0;
    for (double e : gx[0]) norm += e * e;
    EXPECT_GT(norm, 0.0);
}
