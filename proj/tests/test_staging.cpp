#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "drd/error.hpp"
#include "drd/models.hpp"
#include "drd/ops.hpp"
#include "drd/serialization.hpp"
#include "drd/staging.hpp"
#include "test_util.hpp"

using namespace drd;

using Index = std::vector<std::size_t>;

TEST(Partition, ExplicitBoundariesAcceptedVerbatim) {
    EXPECT_EQ(drd::partition(12, 4, Index{2, 5, 8, 11}).boundaries, (Index{2, 5, 8, 11}));
}

TEST(Partition, CeilFormulaDefaults) {
    EXPECT_EQ(drd::partition(4, 4).boundaries, (Index{0, 1, 2, 3}));
    EXPECT_EQ(drd::partition(10, 4).boundaries, (Index{2, 4, 7, 9}));
    EXPECT_EQ(drd::partition(12, 4).boundaries, (Index{2, 5, 8, 11}));
    EXPECT_EQ(drd::partition(7, 1).boundaries, (Index{6}));
}

TEST(Partition, DefaultStageSizesAreFloorOrCeil) {
    for (std::size_t b = 1; b <= 20; ++b) {
        for (std::size_t n = 1; n <= b; ++n) {
            const auto plan = drd::partition(b, n);
            ASSERT_EQ(plan.boundaries.size(), n);
            EXPECT_EQ(plan.boundaries.back(), b - 1);
            std::size_t prev = 0;
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t size = plan.boundaries[i] + 1 - prev;
                EXPECT_TRUE(size == b / n || size == (b + n - 1) / n) << b << "/" << n;
                prev = plan.boundaries[i] + 1;
            }
        }
    }
}

TEST(Partition, RejectsInvalidInput) {
    EXPECT_THROW(drd::partition(3, 4), Error);
    EXPECT_THROW(drd::partition(12, 4, Index{2, 5, 5, 11}), Error);
    EXPECT_THROW(drd::partition(12, 4, Index{2, 5, 8, 10}), Error);
    EXPECT_THROW(drd::partition(12, 4, Index{2, 5, 11}), Error);
    EXPECT_THROW(drd::partition(12, 0), Error);
}

TEST(Partition, HierarchicalModelUsesNaturalStages) {
    ModelSpec spec;
    spec.depth = 4;
    const BlockSequence m = build_model(spec, 1);
    EXPECT_EQ(drd::partition(m, 4).boundaries, (Index{0, 1, 2, 3}));
    EXPECT_EQ(drd::partition(m, 2).boundaries, (Index{1, 3}));
}

TEST(Pairing, Strategies) {
    EXPECT_EQ(make_pairing(4, PairingStrategy::identity), (Index{0, 1, 2, 3}));
    EXPECT_EQ(make_pairing(4, PairingStrategy::reverse), (Index{3, 2, 1, 0}));
    EXPECT_EQ(make_pairing(4, PairingStrategy::shift_right), (Index{1, 2, 3, 0}));
    EXPECT_EQ(make_pairing(4, "reverse"), (Index{3, 2, 1, 0}));
    EXPECT_THROW(make_pairing(4, "sideways"), Error);
    EXPECT_THROW(make_pairing(0, PairingStrategy::identity), Error);
}

TEST(Pairing, EveryStrategyIsABijection) {
    for (std::size_t n = 1; n <= 9; ++n) {
        for (auto s : {PairingStrategy::identity, PairingStrategy::reverse, PairingStrategy::shift_right}) {
            auto p = make_pairing(n, s);
            std::sort(p.begin(), p.end());
            for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(p[i], i);
        }
    }
}

TEST(StagePlan, ValidateRejectsNonPermutation) {
    StagePlan plan = drd::partition(4, 4);
    EXPECT_THROW(with_pairing(plan, Index{0, 0, 1, 2}), Error);
    EXPECT_NO_THROW(with_pairing(plan, Index{3, 2, 1, 0}));
}

TEST(StagePlan, JsonRoundTrip) {
    const StagePlan plan = with_pairing(drd::partition(12, 4), make_pairing(4, PairingStrategy::shift_right));
    EXPECT_EQ(stage_plan_from_json(to_json(plan)), plan);
}

namespace {

ModelSpec small(Family f, std::size_t depth) {
    ModelSpec s;
    s.family = f;
    s.depth = depth;
    s.width = 4;
    s.image_size = 16;
    s.patch = 4;
    return s;
}

}  // namespace

TEST(StageOutputs, CountLastEqualsBackboneAndDeterministic) {
    std::mt19937_64 rng(31);
    const Tensor x = drd::testing::random_tensor({2, 3, 16, 16}, rng);
    for (auto f : {Family::patch_flat, Family::conv_hierarchical}) {
        const BlockSequence m = build_model(small(f, 4), 3);
        const Tensor backbone = m.run_from(x, 0);
        for (std::size_t n = 1; n <= 4; ++n) {
            const auto plan = drd::partition(m, n);
            const auto outs = stage_outputs(m, plan, x);
            ASSERT_EQ(outs.size(), n);
            EXPECT_TRUE(std::equal(outs.back().data().begin(), outs.back().data().end(), backbone.data().begin()));
            const auto again = stage_outputs(m, plan, x);
            for (std::size_t i = 0; i < n; ++i) {
                EXPECT_TRUE(std::equal(outs[i].data().begin(), outs[i].data().end(), again[i].data().begin()));
            }
        }
        const auto per_block = stage_outputs(m, drd::partition(m.size(), 4), x);
        Tensor h = x;
        for (std::size_t b = 0; b < 4; ++b) {
            h = m.run(h, b, b);
            EXPECT_EQ(per_block[b].shape(), h.shape());
        }
    }
}

TEST(StageDims, MatchStageOutputs) {
    std::mt19937_64 rng(32);
    const BlockSequence m = build_model(small(Family::conv_hierarchical, 4), 3);
    const auto plan = drd::partition(m, 4);
    const auto dims = stage_dims(m, plan, FeatureDims{3, 16, 16});
    const auto outs = stage_outputs(m, plan, drd::testing::random_tensor({1, 3, 16, 16}, rng));
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_EQ(outs[i].shape(), (Shape{1, dims[i].channels, dims[i].height, dims[i].width}));
    }
}
