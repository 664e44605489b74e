#include "concurrence/tensor.hpp"

#include <algorithm>
#include <string>
#include <unordered_map>
#include <unordered_set>

#include "concurrence/error.hpp"

namespace concurrence {

namespace {

thread_local bool grad_disabled = false;

constexpr std::size_t kPoolMinBytes = std::size_t{1} << 20;
constexpr std::size_t kPoolMaxCached = std::size_t{2} << 30;

// Exact-size free lists. Only blocks of at least kPoolMinBytes are cached and
// the cache is bounded; anything beyond goes straight back to the heap.
struct BlockPool {
    std::unordered_map<std::size_t, std::vector<void*>> free_blocks;
    std::size_t cached_bytes = 0;

    ~BlockPool() {
        for (auto& [bytes, blocks] : free_blocks) {
            for (void* p : blocks) ::operator delete(p);
        }
    }
};

BlockPool& pool() {
    thread_local BlockPool instance;
    return instance;
}

}  // namespace

namespace detail {

void* pool_allocate(std::size_t bytes) {
    if (bytes >= kPoolMinBytes) {
        auto& p = pool();
        auto it = p.free_blocks.find(bytes);
        if (it != p.free_blocks.end() && !it->second.empty()) {
            void* block = it->second.back();
            it->second.pop_back();
            p.cached_bytes -= bytes;
            return block;
        }
    }
    return ::operator new(bytes);
}

void pool_deallocate(void* ptr, std::size_t bytes) noexcept {
    if (bytes >= kPoolMinBytes) {
        auto& p = pool();
        if (p.cached_bytes + bytes <= kPoolMaxCached) {
            try {
                p.free_blocks[bytes].push_back(ptr);
                p.cached_bytes += bytes;
                return;
            } catch (...) {
            }
        }
    }
    ::operator delete(ptr);
}

}  // namespace detail

NoGradGuard::NoGradGuard() : previous_(grad_disabled) { grad_disabled = true; }
NoGradGuard::~NoGradGuard() { grad_disabled = previous_; }

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) {
        if (d == 0) throw config_error("tensor dimensions must be positive");
        n *= d;
    }
    return n;
}

Buffer& Tensor::Node::grad_buffer() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
    return grad;
}

Tensor::Tensor(Shape shape, const std::vector<double>& data, bool requires_grad)
    : Tensor(std::move(shape), Buffer(data.begin(), data.end()), requires_grad) {}

Tensor::Tensor(Shape shape, std::initializer_list<double> data, bool requires_grad)
    : Tensor(std::move(shape), Buffer(data), requires_grad) {}

Tensor::Tensor(Shape shape, Buffer data, bool requires_grad) {
    if (shape_numel(shape) != data.size()) {
        throw config_error("tensor data length " + std::to_string(data.size()) +
                           " does not match shape");
    }
    node_ = std::make_shared<Node>();
    node_->shape = std::move(shape);
    node_->data = std::move(data);
    node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    const auto n = shape_numel(shape);
    return Tensor(std::move(shape), Buffer(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) { return Tensor({1}, {value}, requires_grad); }

Tensor Tensor::from_op(Shape shape, Buffer data, std::vector<Tensor> parents,
                       std::function<void(Node&)> backward) {
    Tensor out(std::move(shape), std::move(data));
    const bool needs = !grad_disabled && std::any_of(parents.begin(), parents.end(),
                                   [](const Tensor& p) { return p.requires_grad(); });
    if (needs) {
        out.node_->requires_grad = true;
        out.node_->parents.reserve(parents.size());
        for (auto& p : parents) out.node_->parents.push_back(p.node_);
        out.node_->backward = std::move(backward);
    }
    return out;
}

double Tensor::item() const {
    if (numel() != 1) throw config_error("item() requires a single-element tensor");
    return node_->data[0];
}

void Tensor::zero_grad() {
    if (node_ && !node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach_copy() const { return Tensor(node_->shape, Buffer(node_->data), false); }

void backward(const Tensor& loss) {
    if (!loss.defined() || loss.numel() != 1) throw config_error("backward requires a scalar loss");
    if (!loss.requires_grad()) return;

    // Iterative post-order DFS gives a topological order (parents first).
    std::vector<Tensor::Node*> order;
    std::unordered_set<const Tensor::Node*> seen;
    std::vector<std::pair<Tensor::Node*, std::size_t>> stack;
    stack.emplace_back(loss.node().get(), 0);
    seen.insert(loss.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Tensor::Node* parent = node->parents[next++].get();
            if (parent->requires_grad && seen.insert(parent).second) stack.emplace_back(parent, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    loss.node()->grad_buffer()[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Tensor::Node* node = *it;
        if (node->backward && !node->grad.empty()) node->backward(*node);
    }
}

}  // namespace concurrence
