#pragma once

// Dense double-precision tensors with tape-free reverse-mode differentiation.
//
// Every op that touches a tensor requiring gradients records its inputs and a
// backward closure on the result node. backward() walks the resulting DAG in
// reverse topological order. Leaf gradients accumulate across calls; interior
// gradients are reset at the start of each backward pass, so several losses
// built from one forward graph can each be differentiated in turn.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace drd {

using Shape = std::vector<std::size_t>;

std::size_t element_count(const Shape& shape);
std::string to_string(const Shape& shape);

namespace detail {

struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // empty until first accumulation
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> inputs;
    std::function<void(Node&)> backward;

    bool is_leaf() const { return inputs.empty(); }
    std::vector<double>& grad_buffer();
};

}  // namespace detail

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> values);

    static Tensor scalar(double value);
    // Leaf that accumulates gradients.
    static Tensor parameter(Shape shape, std::vector<double> values);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    std::size_t dim(std::size_t axis) const;
    std::size_t rank() const { return shape().size(); }
    std::size_t numel() const;

    std::span<const double> data() const;
    std::span<double> mutable_data();
    std::span<const double> grad() const;
    double item() const;

    bool requires_grad() const;
    void zero_grad();

    // Seeds d(this)/d(this) = 1; this must hold a single element.
    void backward() const;

    // Same values, no history, no gradient.
    Tensor detach() const;
    Tensor clone() const;

    const std::shared_ptr<detail::Node>& node() const { return node_; }
    explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

private:
    std::shared_ptr<detail::Node> node_;
};

// Builds a result node. Graph edges are recorded only when gradient recording
// is enabled and at least one input requires a gradient.
Tensor make_result(Shape shape, std::vector<double> value, std::vector<Tensor> inputs,
                   std::function<void(detail::Node&)> backward);

bool grad_enabled();

// Disables graph recording in scope (frozen-teacher forwards, evaluation).
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

// Inside this scope, layers read their weights through detach(); the
// computation still differentiates with respect to its inputs.
class DetachParamsGuard {
public:
    DetachParamsGuard();
    ~DetachParamsGuard();
    DetachParamsGuard(const DetachParamsGuard&) = delete;
    DetachParamsGuard& operator=(const DetachParamsGuard&) = delete;

private:
    bool previous_;
};

// Parameter accessor used by layers; honours DetachParamsGuard.
Tensor param(const Tensor& weight);

// Gradients of `loss` with respect to `wrt`, leaving every leaf gradient in
// the graph as it was before the call.
std::vector<std::vector<double>> gradients(const Tensor& loss, std::span<const Tensor> wrt);

}  // namespace drd
