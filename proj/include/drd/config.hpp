#pragma once

// Declarative description of one experiment run.

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "drd/data.hpp"
#include "drd/models.hpp"
#include "drd/reprogramming.hpp"
#include "drd/staging.hpp"

namespace drd {

// drd           full objective: sup + hybrid + KD + CKA
// drd_no_cka    co-training reprogramming with KD, no CKA
// direct_reprog projectors fit to student features (mimic) and KD; the
//               hybrid path does not update student blocks and has no
//               supervised term
// feature_mimic Hint-style: student features projected onto teacher features
// vanilla       student alone, supervised loss only
enum class Method { drd, drd_no_cka, direct_reprog, feature_mimic, vanilla };

Method parse_method(std::string_view name);
std::string_view to_string(Method method);
bool uses_teacher(Method method);

struct PretrainConfig {
    std::size_t max_epochs = 40;
    std::size_t batch_size = 32;
    double learning_rate = 1e-3;
    // Percent; unset uses the task default.
    std::optional<double> threshold;
    // Teacher initialisation and pretraining batch order.
    std::uint64_t seed = 11;

    bool operator==(const PretrainConfig&) const = default;
};

struct RunConfig {
    SyntheticTaskSpec task;
    ModelSpec teacher;
    ModelSpec student;
    PretrainConfig pretrain;

    Method method = Method::drd;
    std::size_t n_stages = 4;
    std::optional<std::vector<std::size_t>> teacher_boundaries;
    std::optional<std::vector<std::size_t>> student_boundaries;
    PairingStrategy pairing = PairingStrategy::identity;
    ProjectorKind projector = ProjectorKind::conv3_default;
    std::size_t projector_hidden = 0;

    std::size_t epochs = 40;
    std::size_t batch_size = 12;
    double learning_rate = 5e-3;
    double weight_decay = 1e-2;
    std::uint64_t seed = 0;

    // Gradient diagnoses at 25/50/75% of training.
    bool diagnose = true;

    bool operator==(const RunConfig&) const = default;
};

// Reference configurations: 3-way few-shot classification at 32x32 and
// foreground segmentation at 48x48, patch_flat teacher (12 blocks) and
// conv_hierarchical student (4 blocks).
RunConfig reference_config(TaskKind kind);

// Head kinds, output counts and image sizes must agree with the task;
// vanilla must keep projector-related fields at their defaults.
void validate(const RunConfig& config);

}  // namespace drd
