#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <random>

#include "drd/diagnostics.hpp"
#include "drd/error.hpp"
#include "drd/ops.hpp"
#include "test_util.hpp"

using namespace drd;
using drd::testing::random_tensor;

namespace {

// Two-sided tail of Student's t by Simpson quadrature of the density.
double t_two_sided_p(double t, double df) {
    const double c = std::exp(std::lgamma((df + 1.0) / 2.0) - std::lgamma(df / 2.0)) / std::sqrt(df * std::numbers::pi);
    auto pdf = [&](double x) { return c * std::pow(1.0 + x * x / df, -(df + 1.0) / 2.0); };
    const double upper = std::abs(t);
    const int n = 20000;
    const double h = upper / n;
    double s = pdf(0.0) + pdf(upper);
    for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * pdf(i * h);
    return 1.0 - 2.0 * s * h / 3.0;
}

template <class T>
std::optional<ErrorKind> kind_of(T&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    return std::nullopt;
}

RunConfig tiny() {
    RunConfig c = reference_config(TaskKind::classification);
    c.task.image_size = 16;
    c.task.n_pretrain = 16;
    c.task.n_pretrain_test = 8;
    c.task.n_train = 12;
    c.task.n_test = 9;
    c.teacher.depth = 4;
    c.teacher.width = 8;
    c.teacher.image_size = 16;
    c.student.width = 4;
    c.student.image_size = 16;
    c.epochs = 1;
    c.batch_size = 6;
    c.method = Method::drd;
    return c;
}

}  // namespace

TEST(PairedTTest, HandExample) {
    const std::vector<double> a{1, 2, 3, 4}, b{0, 0, 0, 0};
    const auto r = paired_t_test(a, b);
    EXPECT_NEAR(r.t, 3.873, 1e-3);
    EXPECT_NEAR(r.p, 0.0305, 1e-3);
    EXPECT_EQ(r.df, 3u);
    EXPECT_DOUBLE_EQ(r.mean_difference, 2.5);
}

TEST(PairedTTest, MatchesQuadratureOracleOnRandomCases) {
    std::mt19937_64 rng(71);
    std::uniform_int_distribution<int> len(3, 12);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        const int k = len(rng);
        const double shift = 0.6 * n(rng);
        std::vector<double> a(k), b(k);
        double md = 0.0;
        for (int i = 0; i < k; ++i) {
            b[i] = 70.0 + 5.0 * n(rng);
            a[i] = b[i] + shift + n(rng);
            md += a[i] - b[i];
        }
        md /= k;
        double ss = 0.0;
        for (int i = 0; i < k; ++i) ss += (a[i] - b[i] - md) * (a[i] - b[i] - md);
        const double t = md / (std::sqrt(ss / (k - 1)) / std::sqrt(double(k)));
        const auto r = paired_t_test(a, b);
        EXPECT_NEAR(r.t, t, 1e-9 * std::max(1.0, std::abs(t)));
        EXPECT_NEAR(r.p, t_two_sided_p(t, k - 1), 1e-6);
        const auto flipped = paired_t_test(b, a);
        EXPECT_NEAR(flipped.t, -r.t, 1e-12);
        EXPECT_NEAR(flipped.p, r.p, 1e-12);
    }
}

TEST(PairedTTest, DegenerateInputs) {
    const std::vector<double> a{1, 2, 3}, b{0, 1, 2};
    EXPECT_EQ(kind_of([&] { paired_t_test(a, b); }), ErrorKind::degenerate_test);
    const std::vector<double> one{1};
    EXPECT_THROW(paired_t_test(one, one), Error);
    const std::vector<double> shorter{1, 2};
    EXPECT_THROW(paired_t_test(a, shorter), Error);
}

TEST(StageSimilarity, IdenticalStagesGiveUnitDiagonal) {
    std::mt19937_64 rng(72);
    const std::vector<Tensor> f{random_tensor({32, 6, 4, 4}, rng), random_tensor({32, 10}, rng),
                                random_tensor({32, 3, 2, 2}, rng)};
    const auto m = stage_similarity(f, f);
    ASSERT_EQ(m.rows, 3u);
    ASSERT_EQ(m.cols, 3u);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(m.at(i, i), 1.0, 1e-12);
    EXPECT_NEAR(m.diagonal_mean(), 1.0, 1e-12);
    for (double v : m.values) {
        EXPECT_GE(v, -1.0);
        EXPECT_LE(v, 1.0);
    }
}

TEST(StageSimilarity, IndependentFeaturesAreNearZero) {
    std::mt19937_64 rng(73);
    std::vector<Tensor> t, s;
    for (int i = 0; i < 4; ++i) {
        t.push_back(random_tensor({512, 64}, rng));
        s.push_back(random_tensor({512, 64}, rng));
    }
    const auto m = stage_similarity(t, s);
    for (double v : m.values) EXPECT_LT(std::abs(v), 0.15);
    EXPECT_LT(std::abs(m.off_diagonal_mean()), 0.15);
}

TEST(StageSimilarity, InputErrors) {
    std::mt19937_64 rng(74);
    const std::vector<Tensor> none;
    const std::vector<Tensor> a{random_tensor({8, 4}, rng)}, b{random_tensor({6, 4}, rng)};
    EXPECT_THROW(stage_similarity(none, a), Error);
    EXPECT_THROW(stage_similarity(a, b), Error);
}

TEST(Convergence, TrendAndDivergence) {
    const std::vector<double> dec{5, 4, 3, 2, 1, 0.5}, flat{2, 2, 2, 2}, metrics6{10, 20, 30, 40, 35, 50},
        metrics4{1, 2, 3, 2};
    auto d = convergence_track(dec, metrics6);
    EXPECT_EQ(d.decrease_fraction, 1.0);
    EXPECT_FALSE(d.diverged);
    EXPECT_EQ(d.final_metric, 50.0);
    EXPECT_EQ(d.best_metric, 50.0);
    EXPECT_EQ(d.initial_loss, 5.0);
    EXPECT_EQ(d.final_loss, 0.5);
    EXPECT_EQ(convergence_track(flat, metrics4).decrease_fraction, 0.0);
    EXPECT_EQ(convergence_track(flat, metrics4).best_metric, 3.0);

    const std::vector<double> blow{1, 2, 11, 3}, nan{1, std::numeric_limits<double>::quiet_NaN(), 1, 1},
        edge{1, 10, 2, 1};
    EXPECT_TRUE(convergence_track(blow, metrics4).diverged);
    EXPECT_TRUE(convergence_track(nan, metrics4).diverged);
    EXPECT_FALSE(convergence_track(edge, metrics4).diverged);
    const std::vector<double> single{1};
    EXPECT_THROW(convergence_track(single, single), Error);
}

TEST(GradientDiagnosisTerms, CopiedAndDetachedTerms) {
    std::mt19937_64 rng(75);
    const Tensor p = random_tensor({5, 3}, rng, 1.0, true);
    const Tensor q = random_tensor({5, 3}, rng);
    LossTerms terms;
    terms.sup = ops::sum(ops::mul(p, q));
    terms.hybrid = ops::scale(ops::sum(ops::mul(p, q)), 3.0);
    terms.kd = ops::scale(ops::sum(ops::mul(p, p)), 0.0);
    terms.cka = ops::sum(ops::mul(p.detach(), q));
    terms.mimic = Tensor::scalar(0.0);
    terms.train = terms.sup;
    const std::vector<Tensor> scope{p};
    const auto d = diagnose_terms(terms, scope, "p");
    ASSERT_TRUE(d.cos_hybrid_vs_sup.has_value());
    EXPECT_NEAR(*d.cos_hybrid_vs_sup, 1.0, 1e-12);
    EXPECT_FALSE(d.cos_kd_vs_sup.has_value());
    EXPECT_EQ(d.cka_to_sup_norm_ratio, 0.0);
    EXPECT_NEAR(d.hybrid_norm, 3.0 * d.sup_norm, 1e-12);
    EXPECT_EQ(d.parameter_scope, "p");

    terms.sup = ops::sum(ops::mul(p.detach(), q));
    EXPECT_EQ(kind_of([&] { diagnose_terms(terms, scope, "p"); }), ErrorKind::zero_vector);
}

TEST(GradientDiagnosisTerms, SessionDiagnosisLeavesParametersAlone) {
    const RunConfig c = tiny();
    const TaskData data = generate_task(c.task);
    const BlockSequence teacher = build_model(c.teacher, 3);
    Session s(c, data, &teacher);
    for (auto p : s.trainable_parameters()) p.zero_grad();
    std::vector<std::vector<double>> before;
    for (const auto& p : s.trainable_parameters()) before.emplace_back(p.data().begin(), p.data().end());
    const auto idx = iota_indices(0, 8);
    const auto d = gradient_diagnosis(s.state(schedule_weights(0, 1)), batch_images(data.train, idx),
                                      make_target(data.train, idx, TaskKind::classification));
    ASSERT_TRUE(d.cos_hybrid_vs_sup && d.cos_kd_vs_sup);
    EXPECT_LE(std::abs(*d.cos_hybrid_vs_sup), 1.0 + 1e-12);
    EXPECT_LE(std::abs(*d.cos_kd_vs_sup), 1.0 + 1e-12);
    EXPECT_TRUE(std::isfinite(d.cka_to_sup_norm_ratio));
    EXPECT_EQ(d.parameter_scope, "student.block[3]");
    std::size_t k = 0;
    for (const auto& p : s.trainable_parameters()) {
        EXPECT_TRUE(std::equal(p.data().begin(), p.data().end(), before[k++].begin()));
        for (double g : p.grad()) EXPECT_EQ(g, 0.0);
    }
}

TEST(Overhead, ParameterCountsAreExact) {
    const RunConfig c = tiny();
    const TaskData data = generate_task(c.task);
    const BlockSequence teacher = build_model(c.teacher, 3);
    const auto r = measure_overhead(c, data, &teacher, 3, 1);
    Session s(c, data, &teacher);
    std::size_t student = 0, proj = 0, t = 0;
    for (const auto& p : s.student().parameters()) student += p.numel();
    for (const auto& pr : s.projectors()) proj += pr.param_count();
    for (const auto& p : teacher.parameters()) t += p.numel();
    EXPECT_EQ(r.student_params, student);
    EXPECT_EQ(r.projector_params, proj);
    EXPECT_EQ(r.projector_params, s.projector_parameter_count());
    EXPECT_EQ(r.teacher_params, t);
    EXPECT_EQ(r.iterations, 3u);
    EXPECT_GT(r.ms_per_iter, 0.0);
}
