#pragma once

// Task-level plumbing shared by teacher pretraining and co-training: batch
// targets, the supervised loss, evaluation metrics and epoch batching.

#include <cstdint>
#include <span>
#include <vector>

#include "drd/data.hpp"
#include "drd/nn.hpp"
#include "drd/staging.hpp"

namespace drd {

// Labels for classification, (B, H, W) binary masks for segmentation.
struct Target {
    std::vector<int> labels;
    Tensor masks;
};

Target make_target(const Dataset& data, std::span<const std::size_t> indices, TaskKind kind);

// Cross-entropy on (B, C) logits, or Dice on the foreground channel of the
// channel softmax of (B, 2, H, W) mask logits.
Tensor task_loss(const Tensor& logits, const Target& target, TaskKind kind);

// Percent accuracy, or percent mean per-image Dice of the argmax mask (an
// image with empty prediction and empty target scores 100).
double task_metric(const Tensor& logits, const Target& target, TaskKind kind);

// Metric of `model.forward` over a whole dataset, evaluated without a graph.
double evaluate(const BlockSequence& model, const Dataset& data, TaskKind kind, std::size_t batch_size = 100);

// Shuffled index batches of at most batch_size; a trailing batch smaller than
// two samples is merged into its predecessor so batch statistics (Gram
// matrices) stay defined.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t count, std::size_t batch_size, Rng& rng);

std::vector<std::size_t> iota_indices(std::size_t begin, std::size_t end);

// Rows `indices` of a (N, ...) tensor, as a constant.
Tensor gather(const Tensor& rows, std::span<const std::size_t> indices);

}  // namespace drd
