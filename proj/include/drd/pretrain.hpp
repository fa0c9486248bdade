#pragma once

// Broad pretraining of the teacher and the frozen-feature linear probe.

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "drd/data.hpp"
#include "drd/staging.hpp"

namespace drd {

struct PretrainOptions {
    std::size_t max_epochs = 30;
    std::size_t batch_size = 32;
    double learning_rate = 5e-3;
    std::uint64_t seed = 0;
    // Percent; unset uses default_pretrain_threshold.
    std::optional<double> threshold;
    // Called after every epoch with (epochs done, held-out metric).
    std::function<void(std::size_t, double)> on_epoch;
};

// 90 (accuracy) for classification, 85 (Dice) for segmentation.
double default_pretrain_threshold(TaskKind kind);

struct PretrainReport {
    double heldout_metric = 0.0;
    std::size_t epochs_run = 0;
    std::vector<double> epoch_metrics;
};

// Trains `teacher` (blocks and head) in place, stopping as soon as the
// held-out metric reaches the threshold. Throws pretraining_failure when
// max_epochs pass without reaching it. Zero epochs leaves the teacher
// untouched and skips the check.
PretrainReport pretrain_teacher(BlockSequence& teacher, const Dataset& train, const Dataset& heldout, TaskKind kind,
                                const PretrainOptions& options);

// Global-average-pooled final backbone features, (N, C).
std::vector<std::vector<double>> pooled_features(const BlockSequence& backbone, const Dataset& data);

// Percent test accuracy of a ridge-regularised least-squares probe on the
// pooled final features of `backbone` (its head is ignored).
double linear_probe_accuracy(const BlockSequence& backbone, const Dataset& train, const Dataset& test,
                             double ridge = 1e-3);

}  // namespace drd
