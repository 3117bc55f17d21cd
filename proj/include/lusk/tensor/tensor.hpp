#pragma once

// Dense row-major tensor with a reverse-mode autodiff graph.
//
// A Tensor is a cheap handle onto a shared node. Operations in ops.hpp build
// new nodes and, when any input requires gradients, record a backward closure
// on the result. backward() walks the recorded graph in reverse topological
// order and overwrites every reachable gradient buffer.

#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "lusk/error.hpp"

namespace lusk {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& shape)
{
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                           std::multiplies<>());
}

inline std::string to_string(const Shape& shape)
{
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

namespace detail {

template <typename T>
struct Node {
    Shape shape;
    std::vector<T> value;
    std::vector<T> grad;
    bool requires_grad = false;
    std::string name;
    std::vector<std::shared_ptr<Node>> parents;
    // Reads this->grad and accumulates into the grads of parents that
    // require gradients.
    std::function<void(Node&)> backward;
};

} // namespace detail

template <typename T>
class Tensor {
public:
    using value_type = T;
    using node_type = detail::Node<T>;

    Tensor() = default;

    Tensor(Shape shape, std::vector<T> values, bool requires_grad = false)
        : node_(std::make_shared<node_type>())
    {
        if (lusk::numel(shape) != values.size()) {
            throw ShapeError("Tensor: shape " + lusk::to_string(shape) + " holds " +
                             std::to_string(lusk::numel(shape)) + " values, got " +
                             std::to_string(values.size()));
        }
        node_->shape = std::move(shape);
        node_->value = std::move(values);
        node_->requires_grad = requires_grad;
        if (requires_grad) node_->grad.assign(node_->value.size(), T(0));
    }

    static Tensor zeros(Shape shape, bool requires_grad = false)
    {
        auto n = lusk::numel(shape);
        return Tensor(std::move(shape), std::vector<T>(n, T(0)), requires_grad);
    }

    static Tensor full(Shape shape, T v, bool requires_grad = false)
    {
        auto n = lusk::numel(shape);
        return Tensor(std::move(shape), std::vector<T>(n, v), requires_grad);
    }

    static Tensor scalar(T v, bool requires_grad = false)
    {
        return Tensor(Shape{}, std::vector<T>{v}, requires_grad);
    }

    // Named leaf that accumulates gradients (a trainable weight).
    static Tensor parameter(std::string name, Shape shape, std::vector<T> values)
    {
        Tensor t(std::move(shape), std::move(values), true);
        t.node_->name = std::move(name);
        return t;
    }

    // Result of an operation. The graph is only recorded when a parent
    // requires gradients.
    static Tensor from_op(Shape shape, std::vector<T> values,
                          std::vector<Tensor> inputs,
                          std::function<void(node_type&)> backward_fn)
    {
        Tensor out(std::move(shape), std::move(values), false);
        bool record = false;
        for (const auto& in : inputs) record = record || in.requires_grad();
        if (record) {
            out.node_->requires_grad = true;
            for (auto& in : inputs) out.node_->parents.push_back(in.node_);
            out.node_->backward = std::move(backward_fn);
        }
        return out;
    }

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
    std::size_t numel() const { return node_->value.size(); }
    bool requires_grad() const { return node_->requires_grad; }
    const std::string& name() const { return node_->name; }

    std::span<const T> values() const { return node_->value; }
    // Mutable access for optimizers and test setup; does not touch the graph.
    std::span<T> values_mut() { return node_->value; }

    std::span<const T> grad() const { return node_->grad; }
    std::span<T> grad_mut() { return node_->grad; }

    void zero_grad()
    {
        if (node_->requires_grad) node_->grad.assign(node_->value.size(), T(0));
    }

    T item() const
    {
        if (numel() != 1) {
            throw ShapeError("item: tensor of shape " + lusk::to_string(shape()) +
                             " is not a scalar");
        }
        return node_->value[0];
    }

    T operator[](std::size_t i) const { return node_->value[i]; }

    // Deep copy detached from any graph. Parameters keep their name and
    // requires_grad flag.
    Tensor clone() const
    {
        Tensor t(node_->shape, node_->value, node_->requires_grad && node_->parents.empty());
        t.node_->name = node_->name;
        return t;
    }

    const std::shared_ptr<node_type>& node() const { return node_; }

private:
    std::shared_ptr<node_type> node_;
};

// Reverse sweep from a scalar loss. Gradients of every node reachable from
// the loss are zeroed and then recomputed, so repeated calls overwrite.
template <typename T>
void backward(const Tensor<T>& loss)
{
    if (!loss.defined() || loss.numel() != 1) {
        throw ShapeError("backward: loss must be a scalar, got shape " +
                         (loss.defined() ? to_string(loss.shape()) : std::string("<undefined>")));
    }
    if (!loss.requires_grad()) {
        throw std::invalid_argument("backward: loss is not on a recorded graph");
    }

    using Node = detail::Node<T>;
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(loss.node().get(), 0);
    seen.insert(loss.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* p = node->parents[next++].get();
            if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    for (Node* n : order) n->grad.assign(n->value.size(), T(0));
    loss.node()->grad[0] = T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        if ((*it)->backward) (*it)->backward(**it);
    }
}

} // namespace lusk
