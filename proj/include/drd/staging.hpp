#pragma once

// Coarse stage decomposition of block-structured networks and the
// teacher-to-student stage pairing.
//
// Block and stage indices are 0-based throughout. A plan with boundaries
// {2,5,8,11} taps the outputs of blocks 2, 5, 8 and 11.

#include <cstddef>
#include <memory>
#include <optional>
#include <string_view>
#include <vector>

#include "drd/nn.hpp"
#include "drd/tensor.hpp"

namespace drd {

struct FeatureDims {
    std::size_t channels = 0;
    std::size_t height = 0;
    std::size_t width = 0;

    std::size_t size() const { return channels * height * width; }
    bool operator==(const FeatureDims&) const = default;
};

FeatureDims feature_dims(const Tensor& feature_map);

// Ordered computation blocks plus an optional output head. Students carry
// their task head; frozen teachers are stored without one.
class BlockSequence {
public:
    BlockSequence() = default;
    BlockSequence(std::vector<std::unique_ptr<Module>> blocks, std::unique_ptr<Module> head,
                  std::vector<std::size_t> natural_stage_ends = {});

    std::size_t size() const { return blocks_.size(); }
    const Module& block(std::size_t index) const;
    bool has_head() const { return head_ != nullptr; }
    const Module& head() const;
    std::unique_ptr<Module> release_head() { return std::move(head_); }

    // Ends of the model's own resolution stages, if it has any.
    const std::vector<std::size_t>& natural_stage_ends() const { return natural_stage_ends_; }

    // Applies blocks first..last inclusive.
    Tensor run(const Tensor& x, std::size_t first, std::size_t last) const;
    // Applies blocks first..end; identity when first == size().
    Tensor run_from(const Tensor& x, std::size_t first) const;
    // Applies every block, then the head if present.
    Tensor forward(const Tensor& x) const;

    std::vector<Tensor> parameters() const;
    std::vector<Tensor> block_parameters(std::size_t index) const;
    std::size_t parameter_count() const;

private:
    std::vector<std::unique_ptr<Module>> blocks_;
    std::unique_ptr<Module> head_;
    std::vector<std::size_t> natural_stage_ends_;
};

enum class PairingStrategy { identity, reverse, shift_right };

PairingStrategy parse_pairing(std::string_view name);
std::string_view to_string(PairingStrategy strategy);

struct StagePlan {
    std::size_t n_stages = 0;
    std::vector<std::size_t> boundaries;
    // pairing[i] is the student stage slot that teacher stage i targets.
    std::vector<std::size_t> pairing;

    // First block belonging to stage i.
    std::size_t stage_start(std::size_t stage) const;
    bool operator==(const StagePlan&) const = default;
};

// Throws invalid_argument unless boundaries are strictly increasing, end at
// the last block and pairing is a permutation of the stage slots.
void validate(const StagePlan& plan, std::size_t block_count);

// Default boundaries: the model's natural stages when there are exactly
// n_stages of them, otherwise ceil(k * B / N) - 1 for k = 1..N.
StagePlan partition(const BlockSequence& model, std::size_t n_stages,
                    const std::optional<std::vector<std::size_t>>& boundaries = std::nullopt);
StagePlan partition(std::size_t block_count, std::size_t n_stages,
                    const std::optional<std::vector<std::size_t>>& boundaries = std::nullopt);

// identity i -> i, reverse i -> N-1-i, shift_right i -> (i+1) mod N.
std::vector<std::size_t> make_pairing(std::size_t n_stages, PairingStrategy strategy);
std::vector<std::size_t> make_pairing(std::size_t n_stages, std::string_view strategy);

StagePlan with_pairing(StagePlan plan, std::vector<std::size_t> pairing);

// Activations after each boundary block, in stage order.
std::vector<Tensor> stage_outputs(const BlockSequence& model, const StagePlan& plan, const Tensor& input);

// Stage feature dims for a (1, C, H, W) probe input.
std::vector<FeatureDims> stage_dims(const BlockSequence& model, const StagePlan& plan, const FeatureDims& input);

}  // namespace drd
