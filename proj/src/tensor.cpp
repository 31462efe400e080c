#include "lmkit/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <unordered_set>

namespace lmkit {

namespace {
thread_local bool t_grad_enabled = true;
std::atomic<bool> g_debug_checks{true};
std::atomic<std::uint64_t> g_node_id{1};

std::int64_t shape_numel(const std::vector<std::int64_t>& shape) {
    std::int64_t n = 1;
    for (std::int64_t d : shape) {
        if (d <= 0) throw ShapeError("tensor: extents must be positive");
        n *= d;
    }
    return n;
}
}  // namespace

namespace autograd {

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = prev_; }

std::uint64_t next_node_id() { return g_node_id.fetch_add(1, std::memory_order_relaxed); }

}  // namespace autograd

bool debug_checks_enabled() { return g_debug_checks.load(std::memory_order_relaxed); }
void set_debug_checks(bool enabled) { g_debug_checks.store(enabled, std::memory_order_relaxed); }

Tensor Tensor::zeros(std::vector<std::int64_t> shape, bool requires_grad) {
    Tensor t;
    std::int64_t n = shape_numel(shape);
    t.shape_ = std::move(shape);
    t.data_ = std::make_shared<std::vector<float>>(static_cast<std::size_t>(n), 0.0f);
    t.set_requires_grad(requires_grad);
    return t;
}

Tensor Tensor::full(std::vector<std::int64_t> shape, float value, bool requires_grad) {
    Tensor t = zeros(std::move(shape), requires_grad);
    std::fill(t.data_->begin(), t.data_->end(), value);
    return t;
}

Tensor Tensor::from(std::vector<std::int64_t> shape, std::vector<float> values,
                    bool requires_grad) {
    std::int64_t n = shape_numel(shape);
    if (n != static_cast<std::int64_t>(values.size())) {
        throw ShapeError("tensor: value count does not match shape");
    }
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = std::make_shared<std::vector<float>>(std::move(values));
    t.set_requires_grad(requires_grad);
    return t;
}

Tensor Tensor::scalar(float value, bool requires_grad) {
    return from({1}, {value}, requires_grad);
}

Tensor Tensor::randn(std::vector<std::int64_t> shape, Rng& rng, float stddev,
                     bool requires_grad) {
    Tensor t = zeros(std::move(shape), requires_grad);
    for (float& v : *t.data_) v = static_cast<float>(rng.normal(0.0, stddev));
    return t;
}

std::int64_t Tensor::dim(int i) const {
    int r = rank();
    if (i < 0) i += r;
    if (i < 0 || i >= r) throw ShapeError("tensor: dim index out of range");
    return shape_[static_cast<std::size_t>(i)];
}

std::int64_t Tensor::numel() const {
    return data_ ? static_cast<std::int64_t>(data_->size()) : 0;
}

float Tensor::item() const {
    if (!data_ || data_->size() != 1) throw ContractError("item: tensor is not a scalar");
    return (*data_)[0];
}

Tensor& Tensor::set_requires_grad(bool rq) {
    requires_grad_ = rq;
    if (rq && !grad_) grad_ = std::make_shared<GradCell>();
    return *this;
}

const float* Tensor::grad() const {
    return (grad_ && grad_->present) ? grad_->value.data() : nullptr;
}

float* Tensor::grad() { return (grad_ && grad_->present) ? grad_->value.data() : nullptr; }

std::vector<float>& Tensor::grad_buf() {
    if (!grad_) grad_ = std::make_shared<GradCell>();
    if (!grad_->present) {
        grad_->value.assign(static_cast<std::size_t>(numel()), 0.0f);
        grad_->present = true;
    }
    return grad_->value;
}

void Tensor::zero_grad() {
    if (grad_ && grad_->present) std::fill(grad_->value.begin(), grad_->value.end(), 0.0f);
}

void Tensor::accumulate_grad(std::span<const float> g) {
    auto& buf = grad_buf();
    if (g.size() != buf.size()) throw ShapeError("accumulate_grad: size mismatch");
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += g[i];
}

Tensor Tensor::detached() const {
    Tensor t;
    t.shape_ = shape_;
    t.data_ = data_;
    return t;
}

Tensor Tensor::grad_alias() const {
    Tensor t;
    t.shape_ = shape_;
    t.data_ = data_;
    t.grad_ = grad_;
    t.requires_grad_ = true;
    if (!t.grad_) t.grad_ = std::make_shared<GradCell>();
    return t;
}

Tensor Tensor::clone() const {
    Tensor t;
    t.shape_ = shape_;
    t.data_ = std::make_shared<std::vector<float>>(*data_);
    return t;
}

namespace autograd {

void record(Tensor& out, std::vector<Tensor> parents, std::function<void(Node&)> backward) {
    auto node = std::make_shared<Node>();
    node->id = next_node_id();
    node->parents = std::move(parents);
    out.set_requires_grad(true);
    node->out = std::make_unique<Tensor>(out.grad_alias());
    node->backward = std::move(backward);
    out.set_node(std::move(node));
}

void backward_seed(const Tensor& out, std::span<const float> seed) {
    Tensor seeded = out;
    seeded.accumulate_grad(seed);

    if (!out.node()) return;  // leaf: grad seeded, nothing to propagate

    // Collect reachable nodes, then run in descending id order (reverse of
    // execution order, which is a valid reverse-topological order).
    std::vector<Node*> nodes;
    std::unordered_set<Node*> seen;
    std::vector<Node*> stack{out.node().get()};
    seen.insert(out.node().get());
    while (!stack.empty()) {
        Node* n = stack.back();
        stack.pop_back();
        nodes.push_back(n);
        for (const Tensor& p : n->parents) {
            if (p.node() && !seen.count(p.node().get())) {
                seen.insert(p.node().get());
                stack.push_back(p.node().get());
            }
        }
    }
    std::sort(nodes.begin(), nodes.end(), [](Node* a, Node* b) { return a->id > b->id; });
    for (Node* n : nodes) {
        if (!n->out->has_grad()) continue;  // no contribution reached this output
        n->backward(*n);
    }
}

}  // namespace autograd

void backward(const Tensor& loss) {
    if (!loss.defined() || loss.numel() != 1) {
        throw ContractError("backward: loss must be a scalar tensor");
    }
    if (!loss.node() && !loss.requires_grad()) {
        throw ContractError("backward: loss was not produced by recorded ops");
    }
    const float one = 1.0f;
    autograd::backward_seed(loss, std::span<const float>(&one, 1));
}

void check_finite(const Tensor& t, const char* op_name) {
    for (float v : t.values()) {
        if (!std::isfinite(v)) {
            throw NumericError(std::string("non-finite value produced by op '") + op_name + "'");
        }
    }
}

}  // namespace lmkit
