#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "ghostforge/errors.hpp"

namespace ghostforge {

/// (batch, channels, height, width); degenerate axes are 1.
/// Convolution weights reuse the slots as (out_ch, in_ch, kh, kw).
struct Shape {
    int n = 1, c = 1, h = 1, w = 1;

    std::size_t numel() const {
        return static_cast<std::size_t>(n) * static_cast<std::size_t>(c) *
               static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
    }
    bool operator==(const Shape&) const = default;

    std::string str() const {
        return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
               std::to_string(w) + ")";
    }
};

class Tape;

namespace detail {

struct TensorNode {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // allocated on first contribution
    bool requires_grad = false;
    const char* op = "leaf";
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::function<void(TensorNode&)> backprop;

    void ensure_grad() {
        if (grad.empty()) grad.assign(value.size(), 0.0);
    }
};

using NodePtr = std::shared_ptr<TensorNode>;

inline Tape*& active_tape() {
    thread_local Tape* current = nullptr;
    return current;
}

inline void check_finite(const char* op, const std::vector<double>& values) {
    for (double v : values) {
        if (!std::isfinite(v))
            throw NumericError(std::string(op) + " produced a non-finite value");
    }
}

}  // namespace detail

/// Handle to a tensor node; copies share the underlying storage.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(const Shape& shape, bool requires_grad = false) {
        return leaf(shape, std::vector<double>(shape.numel(), 0.0), requires_grad);
    }
    static Tensor full(const Shape& shape, double v, bool requires_grad = false) {
        return leaf(shape, std::vector<double>(shape.numel(), v), requires_grad);
    }
    static Tensor from_vector(const Shape& shape, std::vector<double> values,
                              bool requires_grad = false) {
        if (values.size() != shape.numel())
            throw ConfigError("Tensor: data length " + std::to_string(values.size()) +
                              " does not match shape " + shape.str());
        return leaf(shape, std::move(values), requires_grad);
    }

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return checked()->shape; }
    std::size_t numel() const { return checked()->value.size(); }
    bool requires_grad() const { return checked()->requires_grad; }

    const std::vector<double>& data() const { return checked()->value; }
    std::vector<double>& mutable_data() { return checked()->value; }

    bool has_grad() const { return !checked()->grad.empty(); }
    const std::vector<double>& grad() const {
        if (checked()->grad.empty())
            throw ConfigError(std::string("Tensor: no gradient present (op ") + node_->op + ")");
        return node_->grad;
    }
    void zero_grad() {
        if (!checked()->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
    }

    /// Value of a single-element tensor.
    double item() const {
        if (numel() != 1)
            throw ConfigError("Tensor: item() on non-scalar shape " + shape().str());
        return node_->value[0];
    }

    detail::NodePtr node() const { return node_; }
    explicit Tensor(detail::NodePtr node) : node_(std::move(node)) {}

private:
    static Tensor leaf(const Shape& shape, std::vector<double> values, bool requires_grad) {
        auto node = std::make_shared<detail::TensorNode>();
        node->shape = shape;
        node->value = std::move(values);
        node->requires_grad = requires_grad;
        return Tensor(std::move(node));
    }

    const detail::NodePtr& checked() const {
        if (!node_) throw ConfigError("Tensor: use of an undefined tensor");
        return node_;
    }

    detail::NodePtr node_;
};

/// Records operations in execution order while alive; backward replays the
/// record strictly in reverse. One tape per logical training step.
class Tape {
public:
    Tape() : previous_(detail::active_tape()) { detail::active_tape() = this; }
    ~Tape() { detail::active_tape() = previous_; }
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    void record(detail::NodePtr node) { nodes_.push_back(std::move(node)); }
    std::size_t size() const { return nodes_.size(); }

    /// Seed d(loss)/d(loss) = 1 and push gradients back through the record.
    /// Gradients accumulate additively into every contributing node.
    void backward(const Tensor& loss) {
        if (loss.numel() != 1)
            throw ConfigError("Tape::backward: loss must be scalar, got " + loss.shape().str());
        if (!loss.requires_grad())
            throw ConfigError("Tape::backward: loss does not require grad (nothing recorded)");
        loss.node()->ensure_grad();
        loss.node()->grad[0] += 1.0;
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
            detail::TensorNode& node = **it;
            if (node.grad.empty() || !node.backprop) continue;
            node.backprop(node);
            for (const auto& parent : node.parents) {
                if (!parent->grad.empty()) detail::check_finite(node.op, parent->grad);
            }
        }
    }

private:
    std::vector<detail::NodePtr> nodes_;
    Tape* previous_;
};

/// Suspends recording for the scope (evaluation / detached forward passes).
struct NoGrad {
    NoGrad() : previous_(detail::active_tape()) { detail::active_tape() = nullptr; }
    ~NoGrad() { detail::active_tape() = previous_; }
    NoGrad(const NoGrad&) = delete;
    NoGrad& operator=(const NoGrad&) = delete;

private:
    Tape* previous_;
};

namespace detail {

/// Create an op output node; wires parents/backprop and records on the active
/// tape only when gradients can flow. Forward values are checked finite.
inline Tensor make_op(const char* op, const Shape& shape, std::vector<double> value,
                      std::vector<NodePtr> parents,
                      std::function<void(TensorNode&)> backprop) {
    check_finite(op, value);
    auto node = std::make_shared<TensorNode>();
    node->shape = shape;
    node->value = std::move(value);
    node->op = op;
    Tape* tape = active_tape();
    bool any_grad = false;
    for (const auto& p : parents) any_grad = any_grad || p->requires_grad;
    if (tape != nullptr && any_grad) {
        node->requires_grad = true;
        node->parents = std::move(parents);
        node->backprop = std::move(backprop);
        tape->record(node);
    }
    return Tensor(std::move(node));
}

}  // namespace detail
}  // namespace ghostforge
