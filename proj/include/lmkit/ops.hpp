#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "lmkit/tensor.hpp"

namespace lmkit::ops {

// Elementwise.
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, float s);
Tensor gelu(const Tensor& x);
Tensor softplus(const Tensor& x);

// c[i,j] = sum_t a[i,t] * b[t,j]
Tensor matmul(const Tensor& a, const Tensor& b);
// y = x * w^T with w stored [d_out, d_in]; the projection shape used by
// every weight matrix in the model.
Tensor linear(const Tensor& x, const Tensor& w);
Tensor transpose(const Tensor& a);

// Row-wise softmax over the last axis, max-subtracted.
Tensor softmax(const Tensor& x);
// Softmax over scores[t, j] restricted to j <= past_len + t; masked-out
// entries are exactly zero. scores is [T, past_len + T].
Tensor causal_softmax(const Tensor& scores, std::int64_t past_len);

// Mean over mask-true positions of -log softmax(logits)[t, target_t].
Tensor cross_entropy(const Tensor& logits, std::span<const std::int32_t> targets,
                     std::span<const std::uint8_t> mask);
Tensor cross_entropy(const Tensor& logits, std::span<const std::int32_t> targets);

Tensor sum(const Tensor& x);

// Row gather with scatter-add backward.
Tensor embedding(const Tensor& table, std::span<const std::int32_t> ids);

// y = x / sqrt(mean(x^2) + eps) * w, per row. w is [d].
Tensor rmsnorm(const Tensor& x, const Tensor& w, float eps = 1e-5f);

// Concat / split along axis 0 (rows) or 1 (columns) of 2-D tensors.
Tensor concat(const std::vector<Tensor>& parts, int axis);
std::vector<Tensor> split(const Tensor& x, int axis, int n_parts);

// Run `fn` without recording and record a single node whose backward replays
// `fn` on the saved input to rebuild the local graph. Gradients are
// bitwise-identical to running `fn` recorded; peak activation memory drops to
// the segment boundaries.
Tensor checkpoint(const std::function<Tensor(const Tensor&)>& fn, const Tensor& x);

}  // namespace lmkit::ops
