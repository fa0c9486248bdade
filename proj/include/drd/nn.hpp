#pragma once

// Layers, modules and the optimizer shared by teachers, students and
// projectors.

#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "drd/tensor.hpp"

namespace drd {

using Rng = std::mt19937_64;

// Independent stream for (seed, tag); used so that e.g. student init and
// batch order do not share state.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag);

class Module {
public:
    virtual ~Module() = default;
    virtual Tensor forward(const Tensor& x) const = 0;
    virtual std::vector<Tensor> parameters() const = 0;
};

std::size_t parameter_count(const Module& module);

// Square-kernel convolution with He-normal initialisation.
struct Conv2d {
    Tensor weight;
    Tensor bias;
    std::size_t stride = 1;
    std::size_t padding = 0;

    Conv2d() = default;
    Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t stride,
           std::size_t padding, Rng& rng, double gain = 1.0, bool with_bias = true);

    Tensor operator()(const Tensor& x) const;
    void collect(std::vector<Tensor>& out) const;
};

struct Linear {
    Tensor weight;
    Tensor bias;

    Linear() = default;
    Linear(std::size_t in_features, std::size_t out_features, Rng& rng, bool with_bias = true);

    Tensor operator()(const Tensor& x) const;
    void collect(std::vector<Tensor>& out) const;
};

struct AdamWOptions {
    double learning_rate = 5e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 1e-2;
};

// Decoupled weight decay Adam over a fixed parameter list.
class AdamW {
public:
    AdamW(std::vector<Tensor> params, AdamWOptions options);

    void zero_grad();
    void step();
    std::size_t steps() const { return step_; }
    void set_learning_rate(double lr) { options_.learning_rate = lr; }

private:
    std::vector<Tensor> params_;
    AdamWOptions options_;
    std::vector<std::vector<double>> first_;
    std::vector<std::vector<double>> second_;
    std::size_t step_ = 0;
};

// Copies values (not gradients) between equally shaped parameter lists.
void copy_parameters(std::span<const Tensor> from, std::span<Tensor> to);

}  // namespace drd
