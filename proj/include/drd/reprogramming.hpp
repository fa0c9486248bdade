#pragma once

// Trainable projectors that carry a teacher stage feature into the feature
// geometry of its paired student stage.

#include <cstdint>
#include <string_view>
#include <vector>

#include "drd/nn.hpp"
#include "drd/staging.hpp"

namespace drd {

enum class ProjectorKind { linear, resize_1x1, conv2, conv3_default, wide_conv3 };

ProjectorKind parse_projector_kind(std::string_view name);
std::string_view to_string(ProjectorKind kind);

struct ProjectorSpec {
    ProjectorKind kind = ProjectorKind::conv3_default;
    FeatureDims in;
    FeatureDims out;
    // 0 selects the default: out.channels, or 4 * out.channels for wide_conv3.
    std::size_t hidden_width = 0;
    bool bias = true;

    std::size_t hidden() const;
    bool operator==(const ProjectorSpec&) const = default;
};

void validate(const ProjectorSpec& spec);

// Layouts (3x3 convolutions are stride 1, padding 1):
//   linear         flatten -> dense -> reshape
//   resize_1x1     bilinear resize -> 1x1 conv
//   conv2          3x3 conv + ReLU + resize -> 1x1 conv
//   conv3_default  3x3 conv + ReLU -> 3x3 conv + ReLU + resize -> 1x1 conv
//   wide_conv3     conv3_default with a 4x wider hidden width
class Projector : public Module {
public:
    Projector(const ProjectorSpec& spec, std::uint64_t seed);

    Tensor forward(const Tensor& x) const override;
    std::vector<Tensor> parameters() const override;

    const ProjectorSpec& spec() const { return spec_; }
    std::size_t param_count() const;

    // Exact pass-through; needs resize_1x1 or linear with equal in/out dims.
    void set_identity();

private:
    ProjectorSpec spec_;
    Linear dense_;
    Conv2d first_;
    Conv2d second_;
    Conv2d pointwise_;
};

Projector build_projector(const ProjectorSpec& spec, std::uint64_t seed);

// f^{T->S} = phi(f^T); checks the input geometry against the spec.
Tensor reprogram(const Projector& projector, const Tensor& f_teacher);

// Parameter count implied by the spec.
std::size_t analytic_param_count(const ProjectorSpec& spec);

// Multiply-accumulates of one forward pass for a single sample (convolution
// and dense products; interpolation and bias additions are not counted).
double count_flops(const ProjectorSpec& spec);

}  // namespace drd
