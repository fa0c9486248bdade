#pragma once

// Toy block-structured networks of two families:
//   conv_hierarchical  CNN-like; every block downsamples (or keeps) resolution
//                      and widens channels, so each block is a natural stage.
//   patch_flat         ViT-like; a patchifying stem followed by residual
//                      blocks at one uniform token-grid resolution.

#include <cstdint>
#include <string_view>
#include <vector>

#include "drd/staging.hpp"

namespace drd {

enum class Family { conv_hierarchical, patch_flat };
enum class HeadKind { classifier, dense_mask };

Family parse_family(std::string_view name);
std::string_view to_string(Family family);
HeadKind parse_head(std::string_view name);
std::string_view to_string(HeadKind head);

struct ModelSpec {
    Family family = Family::conv_hierarchical;
    std::size_t depth = 4;
    std::size_t width = 8;
    HeadKind head = HeadKind::classifier;
    // Classes for a classifier, mask channels for a dense head.
    std::size_t outputs = 3;
    std::size_t in_channels = 3;
    std::size_t image_size = 32;
    // patch_flat only.
    std::size_t patch = 4;
    // conv_hierarchical only; empty means stride 2 in every block.
    std::vector<std::size_t> strides;

    bool operator==(const ModelSpec&) const = default;
};

void validate(const ModelSpec& spec);

// Channel width of block k for conv_hierarchical: width * min(2^k, 4).
std::size_t hierarchical_width(const ModelSpec& spec, std::size_t block);

BlockSequence build_model(const ModelSpec& spec, std::uint64_t seed);

// Head matching `spec` for a backbone whose final feature has `channels`.
std::unique_ptr<Module> build_head(const ModelSpec& spec, std::size_t channels, Rng& rng);

}  // namespace drd
