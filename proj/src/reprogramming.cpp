#include "drd/reprogramming.hpp"

#include <algorithm>

#include "drd/error.hpp"
#include "drd/ops.hpp"

namespace drd {

ProjectorKind parse_projector_kind(std::string_view name) {
    if (name == "linear") {
        return ProjectorKind::linear;
    }
    if (name == "resize_1x1") {
        return ProjectorKind::resize_1x1;
    }
    if (name == "conv2") {
        return ProjectorKind::conv2;
    }
    if (name == "conv3_default") {
        return ProjectorKind::conv3_default;
    }
    if (name == "wide_conv3") {
        return ProjectorKind::wide_conv3;
    }
    fail(ErrorKind::invalid_argument, "unknown projector kind '" + std::string(name) + "'");
}

std::string_view to_string(ProjectorKind kind) {
    switch (kind) {
        case ProjectorKind::linear:
            return "linear";
        case ProjectorKind::resize_1x1:
            return "resize_1x1";
        case ProjectorKind::conv2:
            return "conv2";
        case ProjectorKind::conv3_default:
            return "conv3_default";
        case ProjectorKind::wide_conv3:
            return "wide_conv3";
    }
    return "conv3_default";
}

std::size_t ProjectorSpec::hidden() const {
    if (hidden_width > 0) {
        return hidden_width;
    }
    return kind == ProjectorKind::wide_conv3 ? 4 * out.channels : out.channels;
}

void validate(const ProjectorSpec& spec) {
    require(spec.in.channels > 0 && spec.out.channels > 0, "projector channels must be positive");
    require(spec.in.height > 0 && spec.in.width > 0 && spec.out.height > 0 && spec.out.width > 0,
            "projector spatial sizes must be positive");
}

Projector::Projector(const ProjectorSpec& spec, std::uint64_t seed) : spec_(spec) {
    validate(spec_);
    Rng rng(seed);
    const std::size_t hidden = spec_.hidden();
    switch (spec_.kind) {
        case ProjectorKind::linear:
            dense_ = Linear(spec_.in.size(), spec_.out.size(), rng, spec_.bias);
            break;
        case ProjectorKind::resize_1x1:
            pointwise_ = Conv2d(spec_.in.channels, spec_.out.channels, 1, 1, 0, rng, 1.0, spec_.bias);
            break;
        case ProjectorKind::conv2:
            first_ = Conv2d(spec_.in.channels, hidden, 3, 1, 1, rng, 1.0, spec_.bias);
            pointwise_ = Conv2d(hidden, spec_.out.channels, 1, 1, 0, rng, 1.0, spec_.bias);
            break;
        case ProjectorKind::conv3_default:
        case ProjectorKind::wide_conv3:
            first_ = Conv2d(spec_.in.channels, hidden, 3, 1, 1, rng, 1.0, spec_.bias);
            second_ = Conv2d(hidden, hidden, 3, 1, 1, rng, 1.0, spec_.bias);
            pointwise_ = Conv2d(hidden, spec_.out.channels, 1, 1, 0, rng, 1.0, spec_.bias);
            break;
    }
}

Tensor Projector::forward(const Tensor& x) const {
    const FeatureDims& out = spec_.out;
    switch (spec_.kind) {
        case ProjectorKind::linear: {
            Tensor y = dense_(ops::flatten(x));
            return ops::reshape(y, Shape{x.dim(0), out.channels, out.height, out.width});
        }
        case ProjectorKind::resize_1x1:
            return pointwise_(ops::resize_bilinear(x, out.height, out.width));
        case ProjectorKind::conv2: {
            Tensor h = ops::relu(first_(x));
            return pointwise_(ops::resize_bilinear(h, out.height, out.width));
        }
        case ProjectorKind::conv3_default:
        case ProjectorKind::wide_conv3: {
            Tensor h = ops::relu(first_(x));
            h = ops::relu(second_(h));
            return pointwise_(ops::resize_bilinear(h, out.height, out.width));
        }
    }
    return x;
}

std::vector<Tensor> Projector::parameters() const {
    std::vector<Tensor> params;
    if (dense_.weight.defined()) {
        dense_.collect(params);
    }
    if (first_.weight.defined()) {
        first_.collect(params);
    }
    if (second_.weight.defined()) {
        second_.collect(params);
    }
    if (pointwise_.weight.defined()) {
        pointwise_.collect(params);
    }
    return params;
}

std::size_t Projector::param_count() const { return parameter_count(*this); }

void Projector::set_identity() {
    require(spec_.in == spec_.out, "identity projector needs equal input and output dims");
    Tensor* weight = nullptr;
    Tensor* bias = nullptr;
    std::size_t stride = 0;
    if (spec_.kind == ProjectorKind::resize_1x1) {
        weight = &pointwise_.weight;
        bias = &pointwise_.bias;
        stride = spec_.in.channels;  // (C, C, 1, 1): diagonal at c * C + c
    } else if (spec_.kind == ProjectorKind::linear) {
        weight = &dense_.weight;
        bias = &dense_.bias;
        stride = spec_.in.size();
    } else {
        fail(ErrorKind::invalid_argument, "identity projector needs kind linear or resize_1x1");
    }
    auto w = weight->mutable_data();
    std::fill(w.begin(), w.end(), 0.0);
    for (std::size_t i = 0; i < stride; ++i) {
        w[i * stride + i] = 1.0;
    }
    if (bias->defined()) {
        auto b = bias->mutable_data();
        std::fill(b.begin(), b.end(), 0.0);
    }
}

Projector build_projector(const ProjectorSpec& spec, std::uint64_t seed) { return Projector(spec, seed); }

Tensor reprogram(const Projector& projector, const Tensor& f_teacher) {
    require(f_teacher.rank() == 4 && feature_dims(f_teacher) == projector.spec().in,
            "reprogram: teacher feature " + to_string(f_teacher.shape()) + " does not match projector input (" +
                std::to_string(projector.spec().in.channels) + "," + std::to_string(projector.spec().in.height) +
                "," + std::to_string(projector.spec().in.width) + ")");
    return projector.forward(f_teacher);
}

std::size_t analytic_param_count(const ProjectorSpec& spec) {
    validate(spec);
    const std::size_t b = spec.bias ? 1 : 0;
    const std::size_t in_c = spec.in.channels, out_c = spec.out.channels, hidden = spec.hidden();
    switch (spec.kind) {
        case ProjectorKind::linear:
            return spec.in.size() * spec.out.size() + b * spec.out.size();
        case ProjectorKind::resize_1x1:
            return in_c * out_c + b * out_c;
        case ProjectorKind::conv2:
            return in_c * hidden * 9 + b * hidden + hidden * out_c + b * out_c;
        case ProjectorKind::conv3_default:
        case ProjectorKind::wide_conv3:
            return in_c * hidden * 9 + b * hidden + hidden * hidden * 9 + b * hidden + hidden * out_c + b * out_c;
    }
    return 0;
}

double count_flops(const ProjectorSpec& spec) {
    const double in_area = static_cast<double>(spec.in.height * spec.in.width);
    const double out_area = static_cast<double>(spec.out.height * spec.out.width);
    const double in_c = static_cast<double>(spec.in.channels);
    const double out_c = static_cast<double>(spec.out.channels);
    const double hidden = static_cast<double>(spec.hidden());
    switch (spec.kind) {
        case ProjectorKind::linear:
            return static_cast<double>(spec.in.size()) * static_cast<double>(spec.out.size());
        case ProjectorKind::resize_1x1:
            return out_area * in_c * out_c;
        case ProjectorKind::conv2:
            return in_area * in_c * hidden * 9.0 + out_area * hidden * out_c;
        case ProjectorKind::conv3_default:
        case ProjectorKind::wide_conv3:
            return in_area * (in_c * hidden * 9.0 + hidden * hidden * 9.0) + out_area * hidden * out_c;
    }
    return 0.0;
}

}  // namespace drd
