#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "lmkit/errors.hpp"
#include "lmkit/rng.hpp"

namespace lmkit {

class Tensor;

namespace autograd {

// One recorded op. Nodes form the tape: ids are assigned in execution order,
// so walking reachable nodes in descending id is a valid reverse-topological
// order and is the exact reverse of the forward op sequence.
struct Node {
    std::uint64_t id = 0;
    std::vector<Tensor> parents;
    // View of the op output sharing its data and grad buffers but carrying no
    // node pointer (otherwise the node would own itself).
    std::unique_ptr<Tensor> out;
    std::function<void(Node&)> backward;
};

bool grad_enabled();

// Scoped "stop recording" switch (thread-local).
struct NoGradGuard {
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

  private:
    bool prev_;
};

std::uint64_t next_node_id();

}  // namespace autograd

// Toggles the NaN/Inf scan after every op. On by default; timed runs and the
// benchmark turn it off.
bool debug_checks_enabled();
void set_debug_checks(bool enabled);

// Dense row-major f32 tensor with reverse-mode autodiff. Copies are shallow:
// they share the data buffer, the grad cell, and the graph node, which is how
// the optimizer mutates the same storage the model holds.
class Tensor {
  public:
    Tensor() = default;

    static Tensor zeros(std::vector<std::int64_t> shape, bool requires_grad = false);
    static Tensor full(std::vector<std::int64_t> shape, float value, bool requires_grad = false);
    static Tensor from(std::vector<std::int64_t> shape, std::vector<float> values,
                       bool requires_grad = false);
    static Tensor scalar(float value, bool requires_grad = false);
    static Tensor randn(std::vector<std::int64_t> shape, Rng& rng, float stddev,
                        bool requires_grad = false);

    bool defined() const { return static_cast<bool>(data_); }
    const std::vector<std::int64_t>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    std::int64_t dim(int i) const;
    std::int64_t numel() const;

    float* data() { return data_->data(); }
    const float* data() const { return data_->data(); }
    std::span<float> values() { return {data_->data(), data_->size()}; }
    std::span<const float> values() const { return {data_->data(), data_->size()}; }
    float item() const;
    float at(std::int64_t i) const { return (*data_)[static_cast<std::size_t>(i)]; }
    float at(std::int64_t i, std::int64_t j) const {
        return (*data_)[static_cast<std::size_t>(i * dim(1) + j)];
    }

    bool requires_grad() const { return requires_grad_; }
    Tensor& set_requires_grad(bool rq);

    // nullptr until something has accumulated into this tensor's grad.
    const float* grad() const;
    float* grad();
    bool has_grad() const { return grad() != nullptr; }
    // Grad buffer, allocated (zero-filled) on first use.
    std::vector<float>& grad_buf();
    void zero_grad();
    void accumulate_grad(std::span<const float> g);

    // Same data, no grad tracking, no node.
    Tensor detached() const;
    // Same data AND grad cell, requires_grad on, no node. Used as the replay
    // input by gradient checkpointing so the replayed subgraph accumulates
    // straight into the original tensor's grad.
    Tensor grad_alias() const;
    // Deep copy of the values; fresh buffers, no node.
    Tensor clone() const;

    std::shared_ptr<autograd::Node> node() const { return node_; }
    void set_node(std::shared_ptr<autograd::Node> n) { node_ = std::move(n); }

  private:
    struct GradCell {
        std::vector<float> value;
        bool present = false;
    };

    std::vector<std::int64_t> shape_;
    std::shared_ptr<std::vector<float>> data_;
    std::shared_ptr<GradCell> grad_;
    bool requires_grad_ = false;
    std::shared_ptr<autograd::Node> node_;
};

namespace autograd {

// Record a node for `out`. Call only when grad mode is on and at least one
// parent requires grad; marks `out` as requiring grad.
void record(Tensor& out, std::vector<Tensor> parents, std::function<void(Node&)> backward);

// Seed `out.grad += seed` and run the reachable tape in reverse order.
void backward_seed(const Tensor& out, std::span<const float> seed);

}  // namespace autograd

// Reverse-mode sweep from a scalar loss; grads accumulate into every
// requires_grad leaf. Repeated calls keep accumulating until zeroed.
void backward(const Tensor& loss);

// Throws NumericError if any element is non-finite (used by the debug check).
void check_finite(const Tensor& t, const char* op_name);

}  // namespace lmkit
