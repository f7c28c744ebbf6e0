#include "protovae/numgrad/graph.hpp"

#include <unordered_set>

#include "protovae/error.hpp"

namespace protovae::numgrad {

Var Var::constant(Tensor value) {
    auto node = std::make_shared<DiffNode>();
    node->value = std::move(value);
    return Var(std::move(node));
}

Var Var::parameter(Tensor value, std::string name) {
    auto node = std::make_shared<DiffNode>();
    node->value = std::move(value);
    node->grad = Tensor::zeros(node->value.shape());
    node->requires_grad = true;
    node->name = std::move(name);
    return Var(std::move(node));
}

Var make_node(Tensor value, std::vector<Var> inputs, std::function<void(DiffNode&)> rule, const char* op) {
    if (!value.all_finite()) throw NumericError(std::string(op) + " produced a non-finite value");
    auto node = std::make_shared<DiffNode>();
    node->value = std::move(value);
    for (const auto& in : inputs) node->requires_grad = node->requires_grad || in.requires_grad();
    if (node->requires_grad) {
        node->parents.reserve(inputs.size());
        for (auto& in : inputs) node->parents.push_back(in.node());
        node->backward_rule = std::move(rule);
    }
    node->name = op;
    return Var(std::move(node));
}

void backward(const Var& root) {
    if (!root) throw ContractError("backward on an empty handle");
    if (root.value().size() != 1) {
        throw ContractError("backward requires a scalar root, got shape " + shape_string(root.shape()));
    }
    if (!root.requires_grad()) return;

    // Iterative post-order DFS; reversed, it is a topological order from the root.
    std::vector<DiffNode*> order;
    std::unordered_set<DiffNode*> seen;
    std::vector<std::pair<DiffNode*, std::size_t>> stack{{root.node().get(), 0}};
    seen.insert(root.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            DiffNode* parent = node->parents[next++].get();
            if (parent->requires_grad && seen.insert(parent).second) stack.emplace_back(parent, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    for (DiffNode* node : order) {
        if (node->grad.shape() == node->value.shape() && node->grad.size() == node->value.size()) {
            node->grad.fill(0.0);
        } else {
            node->grad = Tensor::zeros(node->value.shape());
        }
    }
    root.node()->grad.fill(1.0);

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        if ((*it)->backward_rule) (*it)->backward_rule(**it);
    }
}

}  // namespace protovae::numgrad
