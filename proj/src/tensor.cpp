#include "drd/tensor.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "drd/error.hpp"

namespace drd {

namespace {

thread_local bool g_grad_enabled = true;
thread_local bool g_detach_params = false;

std::vector<detail::Node*> topological_order(detail::Node* root) {
    std::vector<detail::Node*> order;
    std::unordered_set<detail::Node*> visited;
    std::vector<std::pair<detail::Node*, std::size_t>> stack;
    stack.emplace_back(root, 0);
    visited.insert(root);
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->inputs.size()) {
            detail::Node* child = node->inputs[next++].get();
            if (child->requires_grad && visited.insert(child).second) {
                stack.emplace_back(child, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    return order;  // inputs before consumers
}

}  // namespace

std::size_t element_count(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string to_string(const Shape& shape) {
    std::ostringstream out;
    out << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        out << (i ? "," : "") << shape[i];
    }
    out << ')';
    return out.str();
}

std::vector<double>& detail::Node::grad_buffer() {
    if (grad.size() != value.size()) {
        grad.assign(value.size(), 0.0);
    }
    return grad;
}

Tensor::Tensor(Shape shape, double fill) : node_(std::make_shared<detail::Node>()) {
    node_->value.assign(element_count(shape), fill);
    node_->shape = std::move(shape);
}

Tensor::Tensor(Shape shape, std::vector<double> values) : node_(std::make_shared<detail::Node>()) {
    require(values.size() == element_count(shape),
            "tensor value count " + std::to_string(values.size()) + " does not match shape " +
                drd::to_string(shape));
    node_->shape = std::move(shape);
    node_->value = std::move(values);
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{}, std::vector<double>{value}); }

Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
    Tensor t(std::move(shape), std::move(values));
    t.node_->requires_grad = true;
    return t;
}

const Shape& Tensor::shape() const { return node_->shape; }

std::size_t Tensor::dim(std::size_t axis) const {
    require(axis < node_->shape.size(), "axis out of range for shape " + drd::to_string(shape()));
    return node_->shape[axis];
}

std::size_t Tensor::numel() const { return node_->value.size(); }

std::span<const double> Tensor::data() const { return node_->value; }

std::span<double> Tensor::mutable_data() { return node_->value; }

std::span<const double> Tensor::grad() const { return node_->grad; }

double Tensor::item() const {
    require(numel() == 1, "item() on tensor of shape " + drd::to_string(shape()));
    return node_->value[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

void Tensor::zero_grad() {
    if (!node_->grad.empty()) {
        std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
    }
}

void Tensor::backward() const {
    require(numel() == 1, "backward() requires a single-element tensor, got " + drd::to_string(shape()));
    if (!node_->requires_grad) {
        return;
    }
    auto order = topological_order(node_.get());
    for (detail::Node* n : order) {
        if (!n->is_leaf()) {
            n->grad.assign(n->value.size(), 0.0);
        }
    }
    node_->grad_buffer()[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        detail::Node* n = *it;
        if (!n->is_leaf() && n->backward) {
            n->backward(*n);
        }
    }
}

Tensor Tensor::detach() const {
    auto node = std::make_shared<detail::Node>();
    node->shape = node_->shape;
    node->value = node_->value;
    return Tensor(std::move(node));
}

Tensor Tensor::clone() const {
    Tensor copy = detach();
    copy.node_->requires_grad = node_->requires_grad && node_->is_leaf();
    return copy;
}

Tensor make_result(Shape shape, std::vector<double> value, std::vector<Tensor> inputs,
                   std::function<void(detail::Node&)> backward) {
    auto node = std::make_shared<detail::Node>();
    node->shape = std::move(shape);
    node->value = std::move(value);
    if (g_grad_enabled) {
        bool any = std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
        if (any) {
            node->requires_grad = true;
            node->inputs.reserve(inputs.size());
            for (auto& t : inputs) {
                node->inputs.push_back(t.node());
            }
            node->backward = std::move(backward);
        }
    }
    return Tensor(std::move(node));
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

DetachParamsGuard::DetachParamsGuard() : previous_(g_detach_params) { g_detach_params = true; }
DetachParamsGuard::~DetachParamsGuard() { g_detach_params = previous_; }

Tensor param(const Tensor& weight) { return g_detach_params ? weight.detach() : weight; }

std::vector<std::vector<double>> gradients(const Tensor& loss, std::span<const Tensor> wrt) {
    std::vector<std::vector<double>> result(wrt.size());
    if (!loss.requires_grad()) {
        for (std::size_t i = 0; i < wrt.size(); ++i) {
            result[i].assign(wrt[i].numel(), 0.0);
        }
        return result;
    }
    auto order = topological_order(loss.node().get());
    std::unordered_map<detail::Node*, std::vector<double>> saved;
    for (detail::Node* n : order) {
        if (n->is_leaf()) {
            saved.emplace(n, std::move(n->grad));
            n->grad.clear();
        }
    }
    loss.backward();
    for (std::size_t i = 0; i < wrt.size(); ++i) {
        const auto& g = wrt[i].node()->grad;
        if (g.empty() || !saved.contains(wrt[i].node().get())) {
            result[i].assign(wrt[i].numel(), 0.0);
        } else {
            result[i] = g;
        }
    }
    for (auto& [n, g] : saved) {
        n->grad = std::move(g);
    }
    return result;
}

}  // namespace drd
