#pragma once

// Numerical primitives for the distillation objective: Gram matrices,
// centering, HSIC and CKA, plus the classification/segmentation losses.
// Tensor-valued functions are differentiable; span overloads are plain
// evaluations for callers outside a training graph.

#include <cstddef>
#include <span>
#include <vector>

#include "drd/tensor.hpp"

namespace drd::kernels {

// Degenerate-denominator threshold for CKA.
inline constexpr double kCkaEpsilon = 1e-12;
// Additive smoothing in the Dice coefficient.
inline constexpr double kDiceSmoothing = 1.0;

// n x n matrix of pairwise sample inner products.
struct GramMatrix {
    Tensor values;

    std::size_t size() const { return values.dim(0); }
};

// Rows of a probability distribution; each row sums to one.
struct ProbVector {
    std::vector<double> probs;
    std::size_t classes = 0;

    std::size_t rows() const { return classes == 0 ? 0 : probs.size() / classes; }
};

// `features` is (n, d) or (n, C, H, W); the latter is flattened per sample.
GramMatrix gram(const Tensor& features);

// H K H with H = I - 11^T / n.
GramMatrix center_gram(const GramMatrix& k);

// <HKH, HLH>_F / (n - 1)^2
Tensor hsic(const GramMatrix& k, const GramMatrix& l);

// -HSIC(K,L) / sqrt(HSIC(K,K) HSIC(L,L)); throws degenerate_features when
// either self-similarity is at or below kCkaEpsilon.
Tensor cka_loss(const GramMatrix& k, const GramMatrix& l);

ProbVector softmax(std::span<const double> logits, std::size_t classes);

// KL(softmax(p) || softmax(q)) at temperature 1. Rank-1 inputs are single
// distributions; rank >= 2 inputs are (B, C, ...) with classes on axis 1 and
// the result is averaged over every batch/spatial position.
Tensor kl_divergence(const Tensor& p_logits, const Tensor& q_logits);
double kl_divergence(std::span<const double> p_logits, std::span<const double> q_logits);

// Batch mean of -log softmax(logits)[label]; logits are (B, C).
Tensor cross_entropy(const Tensor& logits, std::span<const int> labels);

// 1 - mean_b (2 sum(p t) + eps) / (sum(p) + sum(t) + eps); inputs (B, H, W).
Tensor dice_loss(const Tensor& pred_probs, const Tensor& target);

double cosine_similarity(std::span<const double> u, std::span<const double> v);

}  // namespace drd::kernels
