#include "drd/nn.hpp"

#include <cmath>

#include "drd/error.hpp"
#include "drd/ops.hpp"

namespace drd {

namespace {

std::vector<double> normal_values(std::size_t count, double stddev, Rng& rng) {
    std::normal_distribution<double> dist(0.0, stddev);
    std::vector<double> values(count);
    for (double& v : values) {
        v = dist(rng);
    }
    return values;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(tag >> 32), 0x5eedu};
    std::uint32_t words[2];
    seq.generate(words, words + 2);
    return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

std::size_t parameter_count(const Module& module) {
    std::size_t total = 0;
    for (const auto& p : module.parameters()) {
        total += p.numel();
    }
    return total;
}

Conv2d::Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t stride_,
               std::size_t padding_, Rng& rng, double gain, bool with_bias)
    : stride(stride_), padding(padding_) {
    require(in_channels > 0 && out_channels > 0 && kernel > 0, "Conv2d: channel and kernel sizes must be positive");
    const std::size_t fan_in = in_channels * kernel * kernel;
    weight = Tensor::parameter(Shape{out_channels, in_channels, kernel, kernel},
                               normal_values(out_channels * fan_in, gain * std::sqrt(2.0 / fan_in), rng));
    if (with_bias) {
        bias = Tensor::parameter(Shape{out_channels}, std::vector<double>(out_channels, 0.0));
    }
}

Tensor Conv2d::operator()(const Tensor& x) const {
    return ops::conv2d(x, param(weight), bias.defined() ? param(bias) : Tensor(), stride, padding);
}

void Conv2d::collect(std::vector<Tensor>& out) const {
    out.push_back(weight);
    if (bias.defined()) {
        out.push_back(bias);
    }
}

Linear::Linear(std::size_t in_features, std::size_t out_features, Rng& rng, bool with_bias) {
    require(in_features > 0 && out_features > 0, "Linear: sizes must be positive");
    weight = Tensor::parameter(Shape{out_features, in_features},
                               normal_values(out_features * in_features, std::sqrt(1.0 / in_features), rng));
    if (with_bias) {
        bias = Tensor::parameter(Shape{out_features}, std::vector<double>(out_features, 0.0));
    }
}

Tensor Linear::operator()(const Tensor& x) const {
    return ops::linear(x, param(weight), bias.defined() ? param(bias) : Tensor());
}

void Linear::collect(std::vector<Tensor>& out) const {
    out.push_back(weight);
    if (bias.defined()) {
        out.push_back(bias);
    }
}

AdamW::AdamW(std::vector<Tensor> params, AdamWOptions options) : params_(std::move(params)), options_(options) {
    first_.reserve(params_.size());
    second_.reserve(params_.size());
    for (const auto& p : params_) {
        require(p.requires_grad(), "AdamW: parameter does not require gradients");
        first_.emplace_back(p.numel(), 0.0);
        second_.emplace_back(p.numel(), 0.0);
    }
}

void AdamW::zero_grad() {
    for (auto& p : params_) {
        p.zero_grad();
    }
}

void AdamW::step() {
    ++step_;
    const double t = static_cast<double>(step_);
    const double correction1 = 1.0 - std::pow(options_.beta1, t);
    const double correction2 = 1.0 - std::pow(options_.beta2, t);
    for (std::size_t k = 0; k < params_.size(); ++k) {
        auto value = params_[k].mutable_data();
        auto grad = params_[k].grad();
        auto& m = first_[k];
        auto& v = second_[k];
        const bool has_grad = !grad.empty();
        for (std::size_t i = 0; i < value.size(); ++i) {
            const double g = has_grad ? grad[i] : 0.0;
            m[i] = options_.beta1 * m[i] + (1.0 - options_.beta1) * g;
            v[i] = options_.beta2 * v[i] + (1.0 - options_.beta2) * g * g;
            const double update = (m[i] / correction1) / (std::sqrt(v[i] / correction2) + options_.epsilon);
            value[i] -= options_.learning_rate * (update + options_.weight_decay * value[i]);
        }
    }
}

void copy_parameters(std::span<const Tensor> from, std::span<Tensor> to) {
    require(from.size() == to.size(), "copy_parameters: parameter list length mismatch");
    for (std::size_t k = 0; k < from.size(); ++k) {
        require(from[k].shape() == to[k].shape(), "copy_parameters: shape mismatch at index " + std::to_string(k));
        auto dst = to[k].mutable_data();
        std::copy(from[k].data().begin(), from[k].data().end(), dst.begin());
    }
}

}  // namespace drd
