#pragma once

// Analysis instruments: per-term gradient diagnosis, teacher/student stage
// similarity, convergence summaries, paired t-tests and step timing.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "drd/cotraining.hpp"

namespace drd {

struct GradientDiagnosis {
    // Unset when that term has an identically zero gradient on the scope
    // (e.g. the arm has no hybrid term).
    std::optional<double> cos_hybrid_vs_sup;
    std::optional<double> cos_kd_vs_sup;
    // ||g_CKA|| / ||g_sup|| as a fraction.
    double cka_to_sup_norm_ratio = 0.0;
    double sup_norm = 0.0;
    double hybrid_norm = 0.0;
    double kd_norm = 0.0;
    double cka_norm = 0.0;
    std::string parameter_scope;
};

// Gradients of each unweighted term with respect to `scope`. Throws
// zero_vector when the supervised gradient vanishes.
GradientDiagnosis diagnose_terms(const LossTerms& terms, std::span<const Tensor> scope, const std::string& scope_name);

// Scope: every parameter of the student's final block. Parameters and their
// accumulated gradients are left untouched.
GradientDiagnosis gradient_diagnosis(const TrainingState& state, const Tensor& images, const Target& target);

// Teacher-stage x student-stage mean cosine similarities.
struct SimilarityMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;  // row-major

    double at(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
    double diagonal_mean() const;
    double off_diagonal_mean() const;
};

// Each stage feature (n, C, H, W) or (n, C) is average-pooled over space to
// (n, C) and centred over the n samples. For a pair of stages whose channel
// counts differ, both vectors are average-pooled along the channel axis to
// the shorter length. Entry (i, j) is the mean over samples of the cosine
// between teacher stage i and student stage j; a zero vector counts as 0.
SimilarityMatrix stage_similarity(std::span<const Tensor> teacher_features, std::span<const Tensor> student_features);

struct ConvergenceSummary {
    std::size_t epochs = 0;
    // Share of epoch-to-epoch transitions where the smoothed loss fell.
    double decrease_fraction = 0.0;
    double initial_loss = 0.0;
    double final_loss = 0.0;
    double final_metric = 0.0;
    double best_metric = 0.0;
    // Any non-finite loss, or a loss exceeding the initial one by more than
    // 9 |initial| (i.e. > 10x a positive initial loss).
    bool diverged = false;
};

// Trailing moving average of `window` epochs smooths the loss curve.
ConvergenceSummary convergence_track(std::span<const double> losses, std::span<const double> metrics,
                                     std::size_t window = 3);
ConvergenceSummary convergence_track(std::span<const EpochRecord> history, std::size_t window = 3);

struct TTestResult {
    double t = 0.0;
    double p = 1.0;  // two-sided
    std::size_t df = 0;
    double mean_difference = 0.0;
    double sd_difference = 0.0;
};

// Paired two-sided t-test on a - b. Throws degenerate_test when the
// differences have zero variance.
TTestResult paired_t_test(std::span<const double> a, std::span<const double> b);

struct OverheadReport {
    double ms_per_iter = 0.0;
    std::size_t iterations = 0;
    std::size_t warmup = 0;
    std::size_t student_params = 0;
    std::size_t projector_params = 0;
    std::size_t teacher_params = 0;  // frozen
};

// Mean wall-clock time of a full training step (forward, backward, update)
// over `iterations` steps after `warmup` untimed ones.
OverheadReport measure_overhead(const RunConfig& config, const TaskData& data, const BlockSequence* teacher,
                                std::size_t iterations = 100, std::size_t warmup = 10);

}  // namespace drd
