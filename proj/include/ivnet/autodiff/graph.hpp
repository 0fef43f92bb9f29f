#ifndef IVNET_AUTODIFF_GRAPH_HPP
#define IVNET_AUTODIFF_GRAPH_HPP

#include <cstddef>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "ivnet/autodiff/tensor.hpp"

namespace ivnet::ad {

/// Topologically ordered view of every op record reachable from a root.
/// Graphs are rebuilt per example, so the order is recomputed on demand.
class Graph {
  public:
    static Graph trace(const Tensor &root) {
        Graph g;
        std::unordered_set<const TensorImpl *> seen;
        // iterative post-order DFS; (node, next-input-index)
        std::vector<std::pair<TensorImpl *, std::size_t>> stack;
        stack.emplace_back(root.impl().get(), 0);
        seen.insert(root.impl().get());
        while (!stack.empty()) {
            auto &[node, next] = stack.back();
            if (node->consumed) {
                throw GraphError("backward: graph has already been consumed by a previous backward()");
            }
            if (node->op && next < node->op->inputs.size()) {
                TensorImpl *child = node->op->inputs[next++].get();
                if (child->requires_grad && seen.insert(child).second) {
                    stack.emplace_back(child, 0);
                }
                continue;
            }
            if (node->op) {
                g.order_.push_back(node);
            }
            stack.pop_back();
        }
        return g;
    }

    /// Op outputs, inputs before the ops that consume them.
    [[nodiscard]] const std::vector<TensorImpl *> &order() const noexcept { return order_; }
    [[nodiscard]] std::size_t size() const noexcept { return order_.size(); }

  private:
    std::vector<TensorImpl *> order_;
};

/// Reverse-mode sweep from a scalar loss. Gradients accumulate additively
/// into every leaf that requires them; the interior of the graph is released
/// and may not be traversed again.
inline void backward(const Tensor &loss) {
    if (loss.size() != 1) {
        throw GraphError(fmt::format("backward: loss must be a scalar, got shape {}", shape_str(loss.shape())));
    }
    if (!loss.requires_grad()) {
        throw GraphError("backward: loss does not depend on any tensor that requires a gradient");
    }
    const Graph graph = Graph::trace(loss);
    loss.impl()->ensure_grad()[0] += 1.0;
    const auto &order = graph.order();
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        TensorImpl *node = *it;
        if (!node->grad.empty()) {
            node->op->backward(*node);
        }
    }
    for (TensorImpl *node : order) {
        node->consumed = true;
        node->op.reset();
        node->grad.clear();
        node->grad.shrink_to_fit();
    }
}

}  // namespace ivnet::ad

#endif
