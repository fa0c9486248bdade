#pragma once

// Co-training engine: frozen-teacher stage features, reprogrammed injection
// into the student, hybrid logits, the weighted objective and its schedule.

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "drd/config.hpp"
#include "drd/data.hpp"
#include "drd/reprogramming.hpp"
#include "drd/staging.hpp"
#include "drd/supervision.hpp"

namespace drd {

// z^S and the N hybrid logits z_i^{T->S}.
struct LogitsBundle {
    Tensor student_logits;
    std::vector<Tensor> hybrid_logits;
};

struct HybridForward {
    LogitsBundle logits;
    // f_i^{T->S}, in teacher stage order.
    std::vector<Tensor> features_ts;
    // f^S_{pairing(i)}: the student feature each f_i^{T->S} is aligned with.
    std::vector<Tensor> features_s;
};

// Teacher stage i is reprogrammed by projectors[i] and injected after
// student stage plan_t.pairing[i]; the remaining student blocks and the
// student head produce z_i^{T->S}. The teacher runs without a graph.
HybridForward forward_hybrid(const BlockSequence& teacher, const BlockSequence& student, const StagePlan& plan_t,
                             const StagePlan& plan_s, std::span<const Projector> projectors, const Tensor& batch);

// Same, from precomputed teacher stage features.
HybridForward forward_hybrid_from_features(const BlockSequence& student, const StagePlan& plan_t,
                                           const StagePlan& plan_s, std::span<const Projector> projectors,
                                           std::span<const Tensor> teacher_features, const Tensor& batch);

// Teacher stage features without a graph.
std::vector<Tensor> teacher_stage_features(const BlockSequence& teacher, const StagePlan& plan_t, const Tensor& batch);

struct LossWeights {
    double alpha = 1.0;
    double beta = 1.0;
    std::size_t epoch = 0;
    std::size_t total_epochs = 1;
};

// alpha = beta = 1 - epoch / total_epochs.
LossWeights schedule_weights(std::size_t epoch, std::size_t total_epochs);

struct LossReport {
    double l_sup = 0.0;
    double l_hybrid = 0.0;
    double l_kd = 0.0;
    double l_cka = 0.0;
    // Feature-mimic term of the direct_reprog and feature_mimic arms; 0 otherwise.
    double l_mimic = 0.0;
    double l_train = 0.0;
    double alpha = 0.0;
    double beta = 0.0;
};

// |l_train - (l_sup + alpha l_hybrid + beta l_kd + l_cka + l_mimic)|
double identity_residual(const LossReport& report);

struct LossSwitches {
    bool hybrid = true;
    bool kd = true;
    bool cka = true;
};

// Differentiable terms of one step. Disabled terms are constant zeros.
struct LossTerms {
    Tensor sup;
    Tensor hybrid;
    Tensor kd;
    Tensor cka;
    Tensor mimic;
    Tensor train;
    LossReport report;
};

// L_train = L_sup + alpha L_hybrid + beta L_KD + L_CKA with
//   L_hybrid = sum_i loss(z_i, y), L_KD = sum_i KL(z_i || z^S),
//   L_CKA = mean_i cka_loss(K(f_i^{T->S}), K(f^S_{pairing(i)})).
// Throws numerical_failure when any term is not finite.
LossTerms total_loss(const LogitsBundle& bundle, std::span<const Tensor> features_ts, std::span<const Tensor> features_s,
                     const Target& target, const LossWeights& weights, TaskKind kind, LossSwitches switches = {});

// Everything a loss evaluation needs; borrowed from the owning session.
struct TrainingState {
    const RunConfig* config = nullptr;
    const BlockSequence* teacher = nullptr;  // null for vanilla
    const BlockSequence* student = nullptr;
    const StagePlan* plan_t = nullptr;
    const StagePlan* plan_s = nullptr;
    const std::vector<Projector>* projectors = nullptr;
    LossWeights weights;
};

// The method's objective on one batch, with teacher features computed on the fly.
LossTerms objective(const TrainingState& state, const Tensor& images, const Target& target);

// The method's objective with precomputed teacher features (empty for vanilla).
LossTerms objective_from_features(const TrainingState& state, std::span<const Tensor> teacher_features,
                                  const Tensor& images, const Target& target);

// Per-run streams derived from RunConfig::seed: student initialisation,
// batch order, and projector i at kProjectorSeedTag + i.
inline constexpr std::uint64_t kStudentSeedTag = 0x5701;
inline constexpr std::uint64_t kBatchSeedTag = 0xba7c;
inline constexpr std::uint64_t kProjectorSeedTag = 0x9e00;

// Owns the student, projectors, plans, optimizer and batch stream of one run.
class Session {
public:
    Session(const RunConfig& config, const TaskData& data, const BlockSequence* teacher);

    Session(const Session&) = delete;
    Session& operator=(const Session&) = delete;

    // One optimizer step on the given training indices.
    LossReport step(std::span<const std::size_t> batch, const LossWeights& weights);
    std::vector<std::vector<std::size_t>> next_epoch_batches();

    TrainingState state(const LossWeights& weights) const;
    double evaluate_test() const;
    // Projected teacher (or raw, when projectors point the other way) and
    // student stage features over the first `count` test samples.
    std::pair<std::vector<Tensor>, std::vector<Tensor>> similarity_features(std::size_t count) const;

    const RunConfig& config() const { return config_; }
    const TaskData& data() const { return data_; }
    BlockSequence& student() { return student_; }
    const BlockSequence& student() const { return student_; }
    const std::vector<Projector>& projectors() const { return projectors_; }
    const StagePlan& plan_t() const { return plan_t_; }
    const StagePlan& plan_s() const { return plan_s_; }
    std::vector<Tensor> trainable_parameters() const;
    std::size_t projector_parameter_count() const;
    std::string rng_state() const;

private:
    const RunConfig& config_;
    const TaskData& data_;
    const BlockSequence* teacher_;
    TaskKind kind_;
    BlockSequence student_;
    StagePlan plan_t_;
    StagePlan plan_s_;
    std::vector<Projector> projectors_;
    std::vector<Tensor> train_teacher_features_;
    std::optional<AdamW> optimizer_;
    Rng batch_rng_;
};

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based count of completed epochs
    LossReport mean;        // average over the epoch's steps
    double test_metric = 0.0;
    double seconds = 0.0;
};

struct TrainHooks {
    // After each epoch, with the number of completed epochs.
    std::function<void(Session&, std::size_t)> on_epoch_end;
    std::function<void(const LossReport&)> on_step;
};

struct TrainOutcome {
    double initial_metric = 0.0;
    double final_metric = 0.0;
    std::vector<EpochRecord> history;
    std::vector<LossReport> steps;
    double seconds = 0.0;
    double ms_per_step = 0.0;
};

// Joint optimisation of student and projector parameters under the method's
// objective; the teacher is only read. With 0 epochs nothing changes and
// the initial metric is returned. On numerical failure the partial history
// is passed to `on_failure` before the error propagates.
TrainOutcome train(Session& session, const TrainHooks& hooks = {},
                   const std::function<void(const TrainOutcome&)>& on_failure = {});

// Builds the teacher-side dimensions for each projector of a config.
std::vector<ProjectorSpec> projector_specs(const RunConfig& config, const BlockSequence& teacher,
                                           const BlockSequence& student, const StagePlan& plan_t,
                                           const StagePlan& plan_s);

}  // namespace drd
