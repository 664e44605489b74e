#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <vector>

namespace concurrence {

using Shape = std::vector<std::size_t>;

namespace detail {
void* pool_allocate(std::size_t bytes);
void pool_deallocate(void* ptr, std::size_t bytes) noexcept;
}  // namespace detail

/// Recycles large blocks per thread. Activation buffers of identical size are
/// requested on every training iteration; reusing them avoids returning the
/// memory to the OS and faulting it back in.
template <class T>
struct PoolAllocator {
    using value_type = T;
    PoolAllocator() noexcept = default;
    template <class U>
    PoolAllocator(const PoolAllocator<U>&) noexcept {}
    T* allocate(std::size_t n) { return static_cast<T*>(detail::pool_allocate(n * sizeof(T))); }
    void deallocate(T* p, std::size_t n) noexcept { detail::pool_deallocate(p, n * sizeof(T)); }
    template <class U>
    bool operator==(const PoolAllocator<U>&) const noexcept { return true; }
};

using Buffer = std::vector<double, PoolAllocator<double>>;

enum class Mode { train, eval };

std::size_t shape_numel(const Shape& shape);

/// Dense row-major float64 array that records the operation that produced it.
///
/// Tensors are cheap handles; copies share storage. An operation whose
/// inputs require gradients produces a result that also requires gradients
/// and remembers how to push its gradient back to those inputs. The graph is
/// owned by the result handles, so dropping the loss releases it.
class Tensor {
public:
    struct Node {
        Shape shape;
        Buffer data;
        Buffer grad;  // empty until first accumulation
        bool requires_grad = false;
        std::vector<std::shared_ptr<Node>> parents;
        std::function<void(Node&)> backward;

        Buffer& grad_buffer();
    };

    Tensor() = default;
    Tensor(Shape shape, Buffer data, bool requires_grad = false);
    Tensor(Shape shape, const std::vector<double>& data, bool requires_grad = false);
    Tensor(Shape shape, std::initializer_list<double> data, bool requires_grad = false);

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    /// Result of an operation. `backward` receives the result node, whose
    /// `grad` holds the upstream gradient, and accumulates into parents.
    static Tensor from_op(Shape shape, Buffer data, std::vector<Tensor> parents,
                          std::function<void(Node&)> backward);

    bool defined() const noexcept { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t numel() const { return node_->data.size(); }

    std::span<double> data() { return node_->data; }
    std::span<const double> data() const { return node_->data; }
    double item() const;

    bool requires_grad() const noexcept { return node_ && node_->requires_grad; }
    void set_requires_grad(bool value) { node_->requires_grad = value; }
    bool has_grad() const noexcept { return node_ && !node_->grad.empty(); }
    /// Gradient buffer; allocated (zeroed) on first access.
    std::span<double> grad() { return node_->grad_buffer(); }
    std::span<const double> grad() const { return node_->grad_buffer(); }
    void zero_grad();

    /// A new leaf holding a copy of the values, detached from any graph.
    Tensor detach_copy() const;

    const std::shared_ptr<Node>& node() const noexcept { return node_; }

private:
    explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
    std::shared_ptr<Node> node_;
};

/// While alive on a thread, operations on that thread record no graph.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

/// Reverse-mode sweep from a scalar. Gradients accumulate into every tensor
/// on the graph that requires them; call `zero_grad` between sweeps.
void backward(const Tensor& loss);

}  // namespace concurrence
