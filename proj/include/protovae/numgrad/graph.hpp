#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "protovae/numgrad/tensor.hpp"

namespace protovae::numgrad {

struct DiffNode;
using NodePtr = std::shared_ptr<DiffNode>;

/// One value in a computation graph. Intermediate nodes keep their parents
/// alive; the graph is freed when the last handle to its root goes away.
struct DiffNode {
    Tensor value;
    Tensor grad;  // same shape as value once backward() has visited the node
    std::vector<NodePtr> parents;
    // Reads this node's grad and accumulates into parents' grads.
    std::function<void(DiffNode&)> backward_rule;
    bool requires_grad = false;
    std::string name;
};

/// Handle to a DiffNode. Cheap to copy; copies alias the same node.
class Var {
public:
    Var() = default;
    explicit Var(NodePtr node) : node_(std::move(node)) {}

    /// Leaf that never receives a gradient.
    static Var constant(Tensor value);
    /// Leaf that receives a gradient and is updated by optimizers.
    static Var parameter(Tensor value, std::string name = {});

    const Tensor& value() const { return node_->value; }
    Tensor& mutable_value() { return node_->value; }
    const Tensor& grad() const { return node_->grad; }
    const Shape& shape() const { return node_->value.shape(); }
    bool requires_grad() const { return node_ && node_->requires_grad; }
    const std::string& name() const { return node_->name; }

    const NodePtr& node() const { return node_; }
    explicit operator bool() const { return static_cast<bool>(node_); }

private:
    NodePtr node_;
};

/// Build a node from a forward value, its inputs, and a backward rule. The
/// rule is dropped when no input needs a gradient. Throws NumericError if the
/// forward value is not finite.
Var make_node(Tensor value, std::vector<Var> inputs, std::function<void(DiffNode&)> rule, const char* op);

/// Reverse-mode sweep from a single-element root. Every node reachable from
/// the root has its gradient zeroed first, so repeated calls never accumulate.
void backward(const Var& root);

}  // namespace protovae::numgrad
