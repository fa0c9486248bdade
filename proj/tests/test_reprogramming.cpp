#include <gtest/gtest.h>

#include <random>

#include "drd/error.hpp"
#include "drd/kernels.hpp"
#include "drd/nn.hpp"
#include "drd/ops.hpp"
#include "drd/reprogramming.hpp"
#include "drd/serialization.hpp"
#include "test_util.hpp"

using namespace drd;
using namespace drd::ops;

namespace {

ProjectorSpec spec_of(ProjectorKind kind, FeatureDims in, FeatureDims out, std::size_t hidden = 0, bool bias = true) {
    ProjectorSpec s;
    s.kind = kind;
    s.in = in;
    s.out = out;
    s.hidden_width = hidden;
    s.bias = bias;
    return s;
}

// Weight-array sizes enumerated from the layer layout.
std::size_t hand_count(const ProjectorSpec& s) {
    const std::size_t ci = s.in.channels, co = s.out.channels, b = s.bias ? 1 : 0;
    std::size_t h = s.hidden_width;
    if (h == 0) h = s.kind == ProjectorKind::wide_conv3 ? 4 * co : co;
    switch (s.kind) {
        case ProjectorKind::linear:
            return s.in.size() * s.out.size() + b * s.out.size();
        case ProjectorKind::resize_1x1:
            return ci * co + b * co;
        case ProjectorKind::conv2:
            return (9 * ci * h + b * h) + (h * co + b * co);
        case ProjectorKind::conv3_default:
        case ProjectorKind::wide_conv3:
            return (9 * ci * h + b * h) + (9 * h * h + b * h) + (h * co + b * co);
    }
    return 0;
}

std::size_t enumerated(const Projector& p) {
    std::size_t n = 0;
    for (const auto& t : p.parameters()) n += t.numel();
    return n;
}

}  // namespace

TEST(Projector, LinearParamCountExample) {
    const auto s = spec_of(ProjectorKind::linear, {64, 16, 16}, {32, 8, 8});
    EXPECT_EQ(analytic_param_count(s), 16384u * 2048u + 2048u);
}

TEST(Projector, Resize1x1ParamCountExample) {
    const auto s = spec_of(ProjectorKind::resize_1x1, {64, 16, 16}, {32, 8, 8});
    EXPECT_EQ(analytic_param_count(s), 64u * 32u + 32u);
    EXPECT_EQ(build_projector(s, 1).param_count(), 64u * 32u + 32u);
}

TEST(Projector, ParamCountsMatchHandCountForEveryKind) {
    std::mt19937_64 rng(41);
    std::uniform_int_distribution<std::size_t> c(1, 6), hw(1, 6), hid(0, 5);
    for (int rep = 0; rep < 40; ++rep) {
        for (auto kind : {ProjectorKind::linear, ProjectorKind::resize_1x1, ProjectorKind::conv2,
                          ProjectorKind::conv3_default, ProjectorKind::wide_conv3}) {
            const auto s = spec_of(kind, {c(rng), hw(rng), hw(rng)}, {c(rng), hw(rng), hw(rng)}, hid(rng), rep % 2 == 0);
            const Projector p = build_projector(s, 7);
            EXPECT_EQ(p.param_count(), hand_count(s)) << to_string(kind);
            EXPECT_EQ(analytic_param_count(s), hand_count(s));
            EXPECT_EQ(enumerated(p), hand_count(s));
        }
    }
}

TEST(Projector, WideIsRoughlyTwiceDefaultAtReferenceDims) {
    const auto d = spec_of(ProjectorKind::conv3_default, {16, 8, 8}, {32, 2, 2});
    const auto w = spec_of(ProjectorKind::wide_conv3, {16, 8, 8}, {32, 2, 2});
    EXPECT_GT(analytic_param_count(w), analytic_param_count(d));
}

TEST(Projector, EqualSeedsGiveIdenticalParameters) {
    const auto s = spec_of(ProjectorKind::conv3_default, {4, 6, 6}, {3, 3, 3});
    const Projector a = build_projector(s, 9), b = build_projector(s, 9), c = build_projector(s, 10);
    const auto pa = a.parameters(), pb = b.parameters(), pc = c.parameters();
    bool differs = false;
    for (std::size_t i = 0; i < pa.size(); ++i) {
        EXPECT_TRUE(std::equal(pa[i].data().begin(), pa[i].data().end(), pb[i].data().begin()));
        differs = differs || !std::equal(pa[i].data().begin(), pa[i].data().end(), pc[i].data().begin());
    }
    EXPECT_TRUE(differs);
}

TEST(Reprogram, OutputShapeMatchesTargetForRandomSpecs) {
    std::mt19937_64 rng(42);
    std::uniform_int_distribution<std::size_t> c(1, 5), hw(1, 9), b(1, 3), k(0, 4);
    const ProjectorKind kinds[] = {ProjectorKind::linear, ProjectorKind::resize_1x1, ProjectorKind::conv2,
                                   ProjectorKind::conv3_default, ProjectorKind::wide_conv3};
    for (int rep = 0; rep < 50; ++rep) {
        const auto s = spec_of(kinds[k(rng)], {c(rng), hw(rng), hw(rng)}, {c(rng), hw(rng), hw(rng)});
        const Projector p = build_projector(s, static_cast<std::uint64_t>(rep));
        const std::size_t batch = b(rng);
        const Tensor y =
            reprogram(p, drd::testing::random_tensor({batch, s.in.channels, s.in.height, s.in.width}, rng));
        EXPECT_EQ(y.shape(), (Shape{batch, s.out.channels, s.out.height, s.out.width}));
    }
}

TEST(Reprogram, ReferenceShapeExample) {
    std::mt19937_64 rng(43);
    const Projector p = build_projector(spec_of(ProjectorKind::conv3_default, {64, 16, 16}, {32, 8, 8}), 1);
    EXPECT_EQ(reprogram(p, drd::testing::random_tensor({2, 64, 16, 16}, rng)).shape(), (Shape{2, 32, 8, 8}));
    EXPECT_THROW(reprogram(p, drd::testing::random_tensor({2, 32, 16, 16}, rng)), Error);
}

TEST(Reprogram, IdentityResizeProjectorIsBitwisePassThrough) {
    std::mt19937_64 rng(44);
    for (auto kind : {ProjectorKind::resize_1x1, ProjectorKind::linear}) {
        Projector p = build_projector(spec_of(kind, {5, 4, 4}, {5, 4, 4}), 3);
        p.set_identity();
        const Tensor x = drd::testing::random_tensor({3, 5, 4, 4}, rng);
        const Tensor y = reprogram(p, x);
        EXPECT_TRUE(std::equal(x.data().begin(), x.data().end(), y.data().begin())) << to_string(kind);
    }
}

TEST(Reprogram, ZeroInputThroughBiasFreeLinearKindsIsZero) {
    for (auto kind : {ProjectorKind::resize_1x1, ProjectorKind::linear}) {
        const Projector p = build_projector(spec_of(kind, {3, 4, 4}, {2, 2, 2}, 0, false), 5);
        const Tensor y = reprogram(p, Tensor({2, 3, 4, 4}, 0.0));
        for (double v : y.data()) EXPECT_EQ(v, 0.0);
    }
}

TEST(Reprogram, OneOptimizerStepChangesParameters) {
    std::mt19937_64 rng(45);
    const Projector p = build_projector(spec_of(ProjectorKind::conv3_default, {3, 6, 6}, {4, 3, 3}), 6);
    const auto params = p.parameters();
    std::vector<std::vector<double>> snapshot;
    for (const auto& t : params) snapshot.emplace_back(t.data().begin(), t.data().end());
    AdamWOptions o;
    o.learning_rate = 1e-2;
    AdamW opt(params, o);
    const Tensor y = reprogram(p, drd::testing::random_tensor({2, 3, 6, 6}, rng));
    opt.zero_grad();
    sum(mul(y, y)).backward();
    opt.step();
    bool changed = false;
    for (std::size_t i = 0; i < params.size(); ++i) {
        changed = changed || !std::equal(snapshot[i].begin(), snapshot[i].end(), params[i].data().begin());
    }
    EXPECT_TRUE(changed);
}

TEST(CountFlops, HandExamples) {
    EXPECT_EQ(count_flops(spec_of(ProjectorKind::resize_1x1, {64, 8, 8}, {32, 8, 8})), 131072.0);
    EXPECT_EQ(count_flops(spec_of(ProjectorKind::linear, {10, 1, 1}, {10, 1, 1})), 100.0);
    const auto s = spec_of(ProjectorKind::conv3_default, {4, 6, 6}, {3, 2, 2}, 5);
    EXPECT_EQ(count_flops(s), 9.0 * 4 * 5 * 36 + 9.0 * 5 * 5 * 36 + 5.0 * 3 * 4);
    const auto c2 = spec_of(ProjectorKind::conv2, {4, 6, 6}, {3, 2, 2}, 5);
    EXPECT_EQ(count_flops(c2), 9.0 * 4 * 5 * 36 + 5.0 * 3 * 4);
}

TEST(CountFlops, DoublingSpatialSizeQuadruplesConvMacs) {
    const auto a = spec_of(ProjectorKind::conv3_default, {4, 6, 6}, {3, 6, 6});
    const auto b = spec_of(ProjectorKind::conv3_default, {4, 12, 12}, {3, 12, 12});
    EXPECT_EQ(count_flops(b), 4.0 * count_flops(a));
}

TEST(ProjectorSpec, ValidationAndJsonRoundTrip) {
    EXPECT_THROW(build_projector(spec_of(ProjectorKind::conv2, {0, 4, 4}, {2, 2, 2}), 1), Error);
    const auto s = spec_of(ProjectorKind::wide_conv3, {4, 6, 6}, {3, 2, 2}, 7, false);
    EXPECT_EQ(projector_spec_from_json(to_json(s)), s);
}
